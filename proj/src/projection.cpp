#include "mimir/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mimir/error.hpp"

namespace mimir {

namespace {

void check_volume(const VolumeGrid& volume) {
    if (volume.channels != kProjectionChannels) {
        throw ValidationError("projection needs a 2-channel volume, got " + std::to_string(volume.channels));
    }
    if (volume.depth == 0 || volume.height == 0 || volume.width == 0) {
        throw ValidationError("projection needs a non-empty volume");
    }
    if (volume.voxels.size() != volume.channel_size() * volume.channels) {
        throw ValidationError("volume voxel count does not match its dimensions");
    }
    for (float v : volume.voxels) {
        if (!std::isfinite(v) || v < 0.0f) {
            throw ValidationError("volume contains a non-finite or negative voxel");
        }
    }
}

}  // namespace

ProjectionTile project_unnormalized(const VolumeGrid& volume) {
    check_volume(volume);
    const std::size_t D = volume.depth;
    const std::size_t H = volume.height;
    const std::size_t W = volume.width;
    ProjectionTile tile(volume.channels, H + W, D);

    std::vector<double> coronal(H * D);
    std::vector<double> sagittal(W * D);
    for (std::size_t c = 0; c < volume.channels; ++c) {
        std::fill(coronal.begin(), coronal.end(), 0.0);
        std::fill(sagittal.begin(), sagittal.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t h = 0; h < H; ++h) {
                const float* row = &volume.voxels[volume.index(c, d, h, 0)];
                double line = 0.0;
                for (std::size_t w = 0; w < W; ++w) {
                    line += row[w];
                    sagittal[w * D + d] += row[w];
                }
                coronal[h * D + d] = line;
            }
        }
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t d = 0; d < D; ++d) {
                tile.at(c, h, d) = static_cast<float>(coronal[h * D + d] / static_cast<double>(W));
            }
        }
        for (std::size_t w = 0; w < W; ++w) {
            for (std::size_t d = 0; d < D; ++d) {
                tile.at(c, H + w, d) = static_cast<float>(sagittal[w * D + d] / static_cast<double>(H));
            }
        }
    }
    return tile;
}

ProjectionTile project(const VolumeGrid& volume) {
    ProjectionTile tile = project_unnormalized(volume);
    const float peak = *std::max_element(tile.pixels.begin(), tile.pixels.end());
    if (peak <= 0.0f) {
        std::fill(tile.pixels.begin(), tile.pixels.end(), 0.0f);
        return tile;
    }
    for (float& p : tile.pixels) {
        p = std::min(p / peak, 1.0f);
    }
    return tile;
}

ProjectionTile resize_tile(const ProjectionTile& tile, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw ValidationError("resize target dimensions must be positive");
    }
    if (tile.height == 0 || tile.width == 0 || tile.pixels.size() != tile.channels * tile.plane_size()) {
        throw ValidationError("resize source tile is empty or inconsistent");
    }
    if (height == tile.height && width == tile.width) {
        return tile;
    }

    struct Tap {
        std::size_t lo, hi;
        float frac;
    };
    auto taps = [](std::size_t out, std::size_t in) {
        std::vector<Tap> result(out);
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t i = 0; i < out; ++i) {
            double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            const std::size_t hi = std::min(lo + 1, in - 1);
            result[i] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
        }
        return result;
    };
    const std::vector<Tap> ty = taps(height, tile.height);
    const std::vector<Tap> tx = taps(width, tile.width);

    ProjectionTile out(tile.channels, height, width);
    for (std::size_t c = 0; c < tile.channels; ++c) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const float p00 = tile.at(c, ty[y].lo, tx[x].lo);
                const float p01 = tile.at(c, ty[y].lo, tx[x].hi);
                const float p10 = tile.at(c, ty[y].hi, tx[x].lo);
                const float p11 = tile.at(c, ty[y].hi, tx[x].hi);
                // lerp form keeps constant regions exactly constant
                const float top = p00 + tx[x].frac * (p01 - p00);
                const float bottom = p10 + tx[x].frac * (p11 - p10);
                out.at(c, y, x) = std::clamp(top + ty[y].frac * (bottom - top), 0.0f, 1.0f);
            }
        }
    }
    return out;
}

}  // namespace mimir
