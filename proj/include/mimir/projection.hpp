#pragma once

#include <cstddef>
#include <vector>

#include "mimir/volume.hpp"

namespace mimir {

/// Multi-channel 2D image, channel-major then row-major.
///
/// The projection layout per channel stacks the coronal panel (rows = H, the
/// left-right axis) above the sagittal panel (rows = W, the anterior-posterior
/// axis); columns run along D. A tile from a D x H x W volume is (H + W) x D.
struct ProjectionTile {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    ProjectionTile() = default;
    ProjectionTile(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), pixels(c * h * w, 0.0f) {}

    std::size_t plane_size() const { return height * width; }
    float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

    bool operator==(const ProjectionTile&) const = default;
};

inline constexpr std::size_t kProjectionChannels = 2;

/// Mean-intensity panels before normalization.
ProjectionTile project_unnormalized(const VolumeGrid& volume);

/// Mean-intensity projection divided by the tile maximum; an all-zero volume gives an all-zero tile.
/// Throws ValidationError unless the volume has two channels of finite, non-negative voxels.
ProjectionTile project(const VolumeGrid& volume);

/// Bilinear resampling with half-pixel centers. Identity dims return an exact copy.
/// Output values are clamped to [0, 1].
ProjectionTile resize_tile(const ProjectionTile& tile, std::size_t height, std::size_t width);

}  // namespace mimir
