#include "mimir/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mimir/error.hpp"
#include "mimir/rng.hpp"

namespace mimir {

void PhantomSpec::validate() const {
    if (depth < 8) throw ValidationError("phantom depth must be >= 8");
    if (height < 8) throw ValidationError("phantom height must be >= 8");
    if (width < 8) throw ValidationError("phantom width must be >= 8");
    if (!(voxel_size > 0.0f) || !std::isfinite(voxel_size)) throw ValidationError("phantom voxel_size must be > 0");
    if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ValidationError("phantom missing_rate must be in [0, 1]");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("phantom noise_sigma must be >= 0");
}

bool Ellipsoid::contains(double d, double h, double w) const {
    const double x = (d - center[0]) / half_axes[0];
    const double y = (h - center[1]) / half_axes[1];
    const double z = (w - center[2]) / half_axes[2];
    return x * x + y * y + z * z <= 1.0;
}

double Ellipsoid::volume_voxels() const {
    return 4.0 / 3.0 * std::numbers::pi * half_axes[0] * half_axes[1] * half_axes[2];
}

TargetRegistry phantom_registry() {
    return TargetRegistry({
        {"organ_volume", "ml", TargetKind::continuous, "organs"},
        {"fat_fraction", "%", TargetKind::continuous, "body-composition"},
        {"height_analog", "mm", TargetKind::continuous, "anthropometric"},
        {"weight_analog", "au", TargetKind::continuous, "anthropometric"},
        {"sex_analog", "-", TargetKind::binary, "anthropometric"},
        {"t2d_analog", "-", TargetKind::binary, "experimental"},
    });
}

std::string phantom_subject_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sub%06zu", index);
    return buf;
}

namespace {

double draw(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Interior (below the fat shell) for a voxel row at depth d.
struct BodyShape {
    const PhantomGeometry& g;

    double lr_scale(double d) const {
        return (g.broad_shoulders && d < g.body.center[0]) ? g.shoulder_factor : 1.0;
    }
    double radius2(double d, double h, double w, double shrink) const {
        const double ad = g.body.half_axes[0] - shrink;
        const double ah = g.body.half_axes[1] * lr_scale(d) - shrink;
        const double aw = g.body.half_axes[2] - shrink;
        if (ad <= 0 || ah <= 0 || aw <= 0) return 2.0;
        const double x = (d - g.body.center[0]) / ad;
        const double y = (h - g.body.center[1]) / ah;
        const double z = (w - g.body.center[2]) / aw;
        return x * x + y * y + z * z;
    }
    bool in_body(double d, double h, double w) const { return radius2(d, h, w, 0.0) <= 1.0; }
    bool in_interior(double d, double h, double w) const { return radius2(d, h, w, g.fat_thickness) <= 1.0; }
};

bool organ_fits(const PhantomGeometry& g) {
    const BodyShape shape{g};
    // Fibonacci-sphere surface samples
    constexpr int kSamples = 256;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < kSamples; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / kSamples;
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * i;
        const double u[3] = {z, r * std::cos(phi), r * std::sin(phi)};
        const double p[3] = {g.organ.center[0] + g.organ.half_axes[0] * u[0],
                             g.organ.center[1] + g.organ.half_axes[1] * u[1],
                             g.organ.center[2] + g.organ.half_axes[2] * u[2]};
        if (!shape.in_interior(p[0], p[1], p[2])) return false;
    }
    return true;
}

}  // namespace

PhantomGeometry sample_geometry(const PhantomSpec& spec, std::size_t index) {
    spec.validate();
    Rng rng = make_rng(spec.seed, 2 * static_cast<std::uint64_t>(index));
    const auto D = static_cast<double>(spec.depth);
    const auto H = static_cast<double>(spec.height);
    const auto W = static_cast<double>(spec.width);

    PhantomGeometry g;
    g.body.center[0] = (D - 1.0) / 2.0 + draw(rng, -1.0, 1.0);
    g.body.center[1] = (H - 1.0) / 2.0 + draw(rng, -1.0, 1.0);
    g.body.center[2] = (W - 1.0) / 2.0 + draw(rng, -1.0, 1.0);
    g.body.half_axes[0] = draw(rng, 0.30, 0.44) * D;
    g.body.half_axes[1] = draw(rng, 0.24, 0.30) * H;
    g.body.half_axes[2] = draw(rng, 0.30, 0.42) * W;
    g.broad_shoulders = uniform01(rng) < 0.5;
    g.fat_thickness = draw(rng, 1.0, 3.5);
    g.visceral_fat = draw(rng, 0.0, 0.35);
    std::normal_distribution<double> t2d(0.0, kT2dNoiseSigma);
    g.t2d_noise = t2d(rng);

    const double organ_scale = draw(rng, 0.3, 0.7);
    const double aspect[3] = {1.0, 0.8, 0.8};
    double axes[3];
    for (int a = 0; a < 3; ++a) axes[a] = organ_scale * aspect[a] * (g.body.half_axes[a] - g.fat_thickness);
    const double offset[3] = {draw(rng, -0.3, 0.3), draw(rng, -0.3, 0.3), draw(rng, -0.3, 0.3)};
    for (int attempt = 0;; ++attempt) {
        for (int a = 0; a < 3; ++a) {
            g.organ.half_axes[a] = axes[a];
            const double room = std::max(0.0, g.body.half_axes[a] - g.fat_thickness - axes[a]);
            g.organ.center[a] = g.body.center[a] + offset[a] * room;
        }
        if (organ_fits(g) || attempt >= 64) break;
        for (double& a : axes) a *= 0.97;
    }
    return g;
}

PhantomSubject rasterize_subject(const PhantomSpec& spec, const PhantomGeometry& geometry, std::size_t index) {
    spec.validate();
    PhantomSubject subject;
    subject.subject_id = phantom_subject_id(index);
    subject.geometry = geometry;
    VolumeGrid& vol = subject.volume;
    vol = VolumeGrid(spec.depth, spec.height, spec.width, 2, spec.voxel_size);

    const BodyShape shape{geometry};
    const auto water = static_cast<float>(1.0 - geometry.visceral_fat);
    const auto visceral = static_cast<float>(geometry.visceral_fat);
    for (std::size_t d = 0; d < spec.depth; ++d) {
        const auto fd = static_cast<double>(d);
        for (std::size_t h = 0; h < spec.height; ++h) {
            const auto fh = static_cast<double>(h);
            for (std::size_t w = 0; w < spec.width; ++w) {
                const auto fw = static_cast<double>(w);
                if (geometry.organ.contains(fd, fh, fw)) {
                    vol.at(0, d, h, w) = static_cast<float>(kOrganIntensity);
                } else if (shape.in_interior(fd, fh, fw)) {
                    vol.at(0, d, h, w) = water;
                    vol.at(1, d, h, w) = visceral;
                } else if (shape.in_body(fd, fh, fw)) {
                    vol.at(1, d, h, w) = 1.0f;
                }
            }
        }
    }

    double water_sum = 0.0;
    double fat_sum = 0.0;
    for (float v : vol.channel(0)) water_sum += v;
    for (float v : vol.channel(1)) fat_sum += v;
    const double vs = spec.voxel_size;
    const double voxel_ml = vs * vs * vs / 1000.0;
    const double fat_fraction = 100.0 * fat_sum / (water_sum + fat_sum);

    subject.truth["organ_volume"] = geometry.organ.volume_voxels() * voxel_ml;
    subject.truth["fat_fraction"] = fat_fraction;
    subject.truth["height_analog"] = 2.0 * geometry.body.half_axes[0] * vs;
    subject.truth["weight_analog"] = (water_sum + fat_sum) * voxel_ml;
    subject.truth["sex_analog"] = geometry.broad_shoulders ? 1.0 : 0.0;
    subject.truth["t2d_analog"] = fat_fraction + geometry.t2d_noise > kT2dThreshold ? 1.0 : 0.0;

    if (spec.noise_sigma > 0.0) {
        Rng rng = make_rng(spec.seed, 2 * static_cast<std::uint64_t>(index) + 1);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (float& v : vol.voxels) {
            v = static_cast<float>(std::max(0.0, static_cast<double>(v) + noise(rng)));
        }
    }
    return subject;
}

PhantomSubject generate_subject(const PhantomSpec& spec, std::size_t index) {
    return rasterize_subject(spec, sample_geometry(spec, index), index);
}

std::vector<PhantomSubject> generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::vector<PhantomSubject> subjects(spec.n_subjects);
    // each subject owns its stream, so any iteration order gives the same result
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        subjects[i] = generate_subject(spec, i);
    }
    return subjects;
}

LabelMatrix export_labels(std::span<const PhantomSubject> subjects, double missing_rate, std::uint64_t seed) {
    if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ValidationError("missing_rate must be in [0, 1]");
    const TargetRegistry registry = phantom_registry();
    std::vector<std::string> ids;
    ids.reserve(subjects.size());
    for (const auto& s : subjects) ids.push_back(s.subject_id);
    LabelMatrix labels(std::move(ids), registry.names());

    for (std::size_t i = 0; i < subjects.size(); ++i) {
        Rng rng = make_rng(seed ^ 0x1ABE15ULL, i);
        for (std::size_t t = 0; t < registry.size(); ++t) {
            const auto it = subjects[i].truth.find(registry[t].name);
            if (it == subjects[i].truth.end()) {
                throw ValidationError("subject '" + subjects[i].subject_id + "' lacks truth for '" + registry[t].name + "'");
            }
            labels.value(i, t) = it->second;
            // draw unconditionally so the mask pattern does not depend on the rate's edge cases
            const double u = uniform01(rng);
            labels.set_mask(i, t, !(u < missing_rate));
        }
    }
    return labels;
}

}  // namespace mimir
