#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimir/projection.hpp"

namespace mimir {

enum class TargetKind : std::uint8_t { continuous = 0, binary = 1 };

std::string_view to_string(TargetKind kind);
TargetKind parse_target_kind(std::string_view text);

struct TargetSpec {
    std::string name;
    std::string unit;
    TargetKind kind = TargetKind::continuous;
    std::string group;

    bool operator==(const TargetSpec&) const = default;
};

/// Ordered set of regression targets with unique names.
///
/// Text form is one target per line, `name,unit,kind,group`; blank lines and
/// lines starting with `#` are ignored.
class TargetRegistry {
public:
    TargetRegistry() = default;
    explicit TargetRegistry(std::vector<TargetSpec> targets);

    void add(TargetSpec target);

    std::size_t size() const { return targets_.size(); }
    bool empty() const { return targets_.empty(); }
    const TargetSpec& operator[](std::size_t i) const { return targets_[i]; }
    const std::vector<TargetSpec>& targets() const { return targets_; }

    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws ValidationError when unknown
    std::vector<std::string> names() const;

    /// Targets whose group is in `groups`, in registry order. Used to train per-group models.
    TargetRegistry filter_groups(std::span<const std::string> groups) const;

    static TargetRegistry parse(std::string_view text);
    std::string to_text() const;

    bool operator==(const TargetRegistry&) const = default;

private:
    std::vector<TargetSpec> targets_;
};

/// Per-subject target values with availability masks. Row-major, subjects x targets.
/// Values under mask 0 carry no meaning and are never read by training or evaluation.
struct LabelMatrix {
    std::vector<std::string> subjects;
    std::vector<std::string> targets;
    std::vector<double> values;
    std::vector<std::uint8_t> masks;

    LabelMatrix() = default;
    LabelMatrix(std::vector<std::string> subject_ids, std::vector<std::string> target_names);

    std::size_t n_subjects() const { return subjects.size(); }
    std::size_t n_targets() const { return targets.size(); }

    double value(std::size_t i, std::size_t t) const { return values[i * n_targets() + t]; }
    double& value(std::size_t i, std::size_t t) { return values[i * n_targets() + t]; }
    bool known(std::size_t i, std::size_t t) const { return masks[i * n_targets() + t] != 0; }
    void set_mask(std::size_t i, std::size_t t, bool on) { masks[i * n_targets() + t] = on ? 1 : 0; }

    /// A subject is usable for training when at least one of its values is known.
    bool usable(std::size_t i) const;
    std::vector<std::size_t> unusable_subjects() const;

    std::optional<std::size_t> find_target(std::string_view name) const;
    std::optional<std::size_t> find_subject(std::string_view id) const;

    /// Shapes consistent, masks in {0,1}, known values finite.
    void validate() const;

    /// Columns reordered (and restricted) to match `registry`; throws when a target is absent.
    LabelMatrix aligned_to(const TargetRegistry& registry) const;
};

/// Per-target label mean and sample standard deviation (n-1 denominator),
/// computed over known training entries only.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;

    std::size_t size() const { return mean.size(); }
    double normalize(std::size_t t, double v) const { return (v - mean[t]) / std[t]; }
    double denormalize(std::size_t t, double z) const { return z * std[t] + mean[t]; }

    bool operator==(const NormStats&) const = default;
};

/// `train_rows[i] != 0` selects subject i as a training row. Throws ValidationError naming
/// the first target with fewer than two known training values or zero spread.
NormStats compute_norm_stats(const LabelMatrix& labels, std::span<const std::uint8_t> train_rows);

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold;  // per subject, in [0, k)

    std::size_t fold_size(std::size_t f) const;
    std::vector<std::size_t> members(std::size_t f) const;
    /// 1 for every subject outside fold `f`.
    std::vector<std::uint8_t> training_rows(std::size_t f) const;
};

/// Stratified k-fold split. Subjects are shuffled within each stratum and dealt round-robin,
/// continuing the fold counter across strata, so fold sizes differ by at most one and every
/// stratum's count per fold is floor(p/k) or ceil(p/k).
///
/// A binary strata key stratifies by value; a continuous key by quartile of the known values.
/// Subjects whose key value is masked form their own stratum.
FoldAssignment make_folds(const LabelMatrix& labels, const TargetRegistry& registry, std::size_t k,
                          const std::optional<std::string>& strata_key, std::uint64_t seed);

struct Batch {
    std::size_t size = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t n_targets = 0;
    std::vector<double> inputs;  // size x channels x height x width
    std::vector<double> y_norm;  // size x n_targets, zero where masked
    std::vector<std::uint8_t> masks;
};

struct AugmentOptions {
    bool enabled = false;
    int max_shift = 8;  // pixels, per axis
};

/// Translates `tile` by (dy, dx) pixels with zero fill.
ProjectionTile shift_tile(const ProjectionTile& tile, int dy, int dx);

/// `tiles[i]` belongs to label row i. When augmenting, each drawn tile is shifted by offsets
/// uniform in [-max_shift, max_shift] per axis; draws depend only on (seed, position in batch).
Batch make_batch(std::span<const ProjectionTile> tiles, const LabelMatrix& labels, const NormStats& norm,
                 std::span<const std::size_t> indices, const AugmentOptions& augment, std::uint64_t seed);

}  // namespace mimir
