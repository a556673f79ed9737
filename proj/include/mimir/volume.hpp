#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mimir {

/// Multi-channel 3D scalar field. Axes are (D, H, W): D runs head to foot,
/// H left to right, W anterior to posterior. Voxels are stored channel-major,
/// then D, H, W with W fastest.
struct VolumeGrid {
    std::size_t depth = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    float voxel_size = 1.0f;  // mm, isotropic
    std::vector<float> voxels;

    VolumeGrid() = default;
    VolumeGrid(std::size_t d, std::size_t h, std::size_t w, std::size_t c, float voxel_mm)
        : depth(d), height(h), width(w), channels(c), voxel_size(voxel_mm), voxels(d * h * w * c, 0.0f) {}

    std::size_t channel_size() const { return depth * height * width; }

    std::size_t index(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
        return ((c * depth + d) * height + h) * width + w;
    }

    float& at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) { return voxels[index(c, d, h, w)]; }
    float at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const { return voxels[index(c, d, h, w)]; }

    std::span<const float> channel(std::size_t c) const {
        return {voxels.data() + c * channel_size(), channel_size()};
    }

    bool operator==(const VolumeGrid&) const = default;
};

}  // namespace mimir
