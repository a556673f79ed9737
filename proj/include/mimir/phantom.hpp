#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mimir/dataset.hpp"
#include "mimir/volume.hpp"

namespace mimir {

struct PhantomSpec {
    std::size_t depth = 64;   // head-foot
    std::size_t height = 64;  // left-right
    std::size_t width = 32;   // anterior-posterior
    float voxel_size = 4.0f;  // mm
    std::uint64_t seed = 1;
    std::size_t n_subjects = 100;
    double missing_rate = 0.5;
    double noise_sigma = 0.02;

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Axis-aligned ellipsoid in voxel-index coordinates (voxel centers sit on integers).
struct Ellipsoid {
    double center[3] = {0, 0, 0};  // (d, h, w)
    double half_axes[3] = {1, 1, 1};

    bool contains(double d, double h, double w) const;
    double volume_voxels() const;
};

/// Everything drawn per subject. Rasterization is a pure function of this plus the noise stream.
struct PhantomGeometry {
    Ellipsoid body;                // outer skin surface
    double fat_thickness = 2.0;    // subcutaneous shell, voxels
    bool broad_shoulders = false;  // drives sex_analog
    double shoulder_factor = 1.3;  // left-right widening of the upper half when broad_shoulders
    Ellipsoid organ;
    double visceral_fat = 0.1;     // fat share of interior tissue
    double t2d_noise = 0.0;        // added to fat_fraction before thresholding
};

struct PhantomSubject {
    std::string subject_id;
    VolumeGrid volume;
    std::map<std::string, double> truth;
    PhantomGeometry geometry;
};

inline constexpr double kOrganIntensity = 3.0;
inline constexpr double kT2dThreshold = 50.0;   // fat_fraction, %
inline constexpr double kT2dNoiseSigma = 2.0;   // %

/// organ_volume, fat_fraction, height_analog, weight_analog, sex_analog, t2d_analog.
TargetRegistry phantom_registry();

/// Draws geometry for subject `index` from the stream (spec.seed, index).
PhantomGeometry sample_geometry(const PhantomSpec& spec, std::size_t index);

/// Voxelizes `geometry`, computes truth from the noiseless volume, then adds clamped Gaussian
/// noise from the stream (spec.seed, index).
PhantomSubject rasterize_subject(const PhantomSpec& spec, const PhantomGeometry& geometry, std::size_t index);

PhantomSubject generate_subject(const PhantomSpec& spec, std::size_t index);
std::vector<PhantomSubject> generate_phantom(const PhantomSpec& spec);

std::string phantom_subject_id(std::size_t index);

/// Builds a label matrix (columns in phantom_registry() order) and drops each value independently
/// with probability `missing_rate`. Values are kept under mask 0; only masks depend on `seed`.
LabelMatrix export_labels(std::span<const PhantomSubject> subjects, double missing_rate, std::uint64_t seed);

}  // namespace mimir
