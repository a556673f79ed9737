#include "mimir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/rng.hpp"
#include "mimir/text.hpp"

namespace mimir {

std::string_view to_string(TargetKind kind) {
    return kind == TargetKind::binary ? "binary" : "continuous";
}

TargetKind parse_target_kind(std::string_view text) {
    if (text == "continuous") return TargetKind::continuous;
    if (text == "binary") return TargetKind::binary;
    throw ValidationError("unknown target kind '" + std::string(text) + "'");
}

TargetRegistry::TargetRegistry(std::vector<TargetSpec> targets) {
    for (auto& t : targets) add(std::move(t));
}

void TargetRegistry::add(TargetSpec target) {
    if (target.name.empty()) throw ValidationError("target name must not be empty");
    if (find(target.name)) throw ValidationError("duplicate target name '" + target.name + "'");
    targets_.push_back(std::move(target));
}

std::optional<std::size_t> TargetRegistry::find(std::string_view name) const {
    for (std::size_t i = 0; i < targets_.size(); ++i) {
        if (targets_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t TargetRegistry::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("unknown target '" + std::string(name) + "'");
}

std::vector<std::string> TargetRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(targets_.size());
    for (const auto& t : targets_) out.push_back(t.name);
    return out;
}

TargetRegistry TargetRegistry::filter_groups(std::span<const std::string> groups) const {
    TargetRegistry out;
    for (const auto& t : targets_) {
        if (std::find(groups.begin(), groups.end(), t.group) != groups.end()) out.add(t);
    }
    return out;
}

TargetRegistry TargetRegistry::parse(std::string_view text) {
    TargetRegistry registry;
    std::size_t line_no = 0;
    for (const std::string& raw : split_lines(text)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 4) {
            throw FormatError("registry line " + std::to_string(line_no) + ": expected name,unit,kind,group");
        }
        registry.add({trim(fields[0]), trim(fields[1]), parse_target_kind(trim(fields[2])), trim(fields[3])});
    }
    return registry;
}

std::string TargetRegistry::to_text() const {
    std::ostringstream out;
    out << "# name,unit,kind,group\n";
    for (const auto& t : targets_) {
        out << t.name << ',' << t.unit << ',' << to_string(t.kind) << ',' << t.group << '\n';
    }
    return out.str();
}

LabelMatrix::LabelMatrix(std::vector<std::string> subject_ids, std::vector<std::string> target_names)
    : subjects(std::move(subject_ids)),
      targets(std::move(target_names)),
      values(subjects.size() * targets.size(), 0.0),
      masks(subjects.size() * targets.size(), 0) {}

bool LabelMatrix::usable(std::size_t i) const {
    for (std::size_t t = 0; t < n_targets(); ++t) {
        if (known(i, t)) return true;
    }
    return false;
}

std::vector<std::size_t> LabelMatrix::unusable_subjects() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_subjects(); ++i) {
        if (!usable(i)) out.push_back(i);
    }
    return out;
}

std::optional<std::size_t> LabelMatrix::find_target(std::string_view name) const {
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == name) return t;
    }
    return std::nullopt;
}

std::optional<std::size_t> LabelMatrix::find_subject(std::string_view id) const {
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (subjects[i] == id) return i;
    }
    return std::nullopt;
}

void LabelMatrix::validate() const {
    const std::size_t cells = n_subjects() * n_targets();
    if (values.size() != cells || masks.size() != cells) {
        throw ValidationError("label matrix shape mismatch");
    }
    for (std::size_t i = 0; i < cells; ++i) {
        if (masks[i] > 1) throw ValidationError("label mask values must be 0 or 1");
        if (masks[i] == 1 && !std::isfinite(values[i])) {
            throw ValidationError("known label for subject '" + subjects[i / n_targets()] + "', target '" +
                                  targets[i % n_targets()] + "' is not finite");
        }
    }
}

LabelMatrix LabelMatrix::aligned_to(const TargetRegistry& registry) const {
    LabelMatrix out(subjects, registry.names());
    for (std::size_t t = 0; t < registry.size(); ++t) {
        const auto src = find_target(registry[t].name);
        if (!src) throw ValidationError("labels have no column for target '" + registry[t].name + "'");
        for (std::size_t i = 0; i < n_subjects(); ++i) {
            out.value(i, t) = value(i, *src);
            out.set_mask(i, t, known(i, *src));
        }
    }
    return out;
}

NormStats compute_norm_stats(const LabelMatrix& labels, std::span<const std::uint8_t> train_rows) {
    if (train_rows.size() != labels.n_subjects()) {
        throw ValidationError("training row selector length does not match label rows");
    }
    NormStats stats;
    stats.mean.resize(labels.n_targets());
    stats.std.resize(labels.n_targets());
    for (std::size_t t = 0; t < labels.n_targets(); ++t) {
        std::size_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < labels.n_subjects(); ++i) {
            if (!train_rows[i] || !labels.known(i, t)) continue;
            const double v = labels.value(i, t);
            ++n;
            const double delta = v - mean;
            mean += delta / static_cast<double>(n);
            m2 += delta * (v - mean);
        }
        if (n < 2) {
            throw ValidationError("target '" + labels.targets[t] + "' rejected: " + std::to_string(n) +
                                  " known training value(s), need at least 2");
        }
        const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
        if (!(sd > 0.0) || !std::isfinite(sd)) {
            throw ValidationError("target '" + labels.targets[t] + "' rejected: zero spread in training labels");
        }
        stats.mean[t] = mean;
        stats.std[t] = sd;
    }
    return stats;
}

std::size_t FoldAssignment::fold_size(std::size_t f) const {
    return static_cast<std::size_t>(std::count(fold.begin(), fold.end(), f));
}

std::vector<std::size_t> FoldAssignment::members(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] == f) out.push_back(i);
    }
    return out;
}

std::vector<std::uint8_t> FoldAssignment::training_rows(std::size_t f) const {
    std::vector<std::uint8_t> out(fold.size());
    for (std::size_t i = 0; i < fold.size(); ++i) out[i] = fold[i] != f ? 1 : 0;
    return out;
}

namespace {

// Stratum label per subject; masked key values get the last stratum.
std::vector<std::size_t> strata_for(const LabelMatrix& labels, const TargetRegistry& registry, const std::string& key) {
    const std::size_t reg_index = registry.index_of(key);
    const auto col = labels.find_target(key);
    if (!col) throw ValidationError("strata key '" + key + "' has no label column");
    const std::size_t n = labels.n_subjects();
    std::vector<std::size_t> strata(n);

    if (registry[reg_index].kind == TargetKind::binary) {
        for (std::size_t i = 0; i < n; ++i) {
            strata[i] = !labels.known(i, *col) ? 2 : (labels.value(i, *col) > 0.5 ? 1 : 0);
        }
        return strata;
    }

    std::vector<double> known;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels.known(i, *col)) known.push_back(labels.value(i, *col));
    }
    std::sort(known.begin(), known.end());
    std::vector<double> cuts;
    if (!known.empty()) {
        for (int q = 1; q < 4; ++q) {
            cuts.push_back(known[std::min(known.size() - 1, known.size() * static_cast<std::size_t>(q) / 4)]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!labels.known(i, *col)) {
            strata[i] = 4;
            continue;
        }
        const double v = labels.value(i, *col);
        strata[i] = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    }
    return strata;
}

}  // namespace

FoldAssignment make_folds(const LabelMatrix& labels, const TargetRegistry& registry, std::size_t k,
                          const std::optional<std::string>& strata_key, std::uint64_t seed) {
    const std::size_t n = labels.n_subjects();
    if (k < 2) throw ValidationError("k must be at least 2");
    if (k > n) throw ValidationError("k (" + std::to_string(k) + ") exceeds subject count (" + std::to_string(n) + ")");

    std::vector<std::size_t> strata(n, 0);
    if (strata_key) strata = strata_for(labels, registry, *strata_key);
    const std::size_t n_strata = n == 0 ? 0 : *std::max_element(strata.begin(), strata.end()) + 1;

    Rng rng = make_rng(seed, 0xF01D);
    FoldAssignment out{k, std::vector<std::size_t>(n, 0)};
    std::size_t next = 0;
    for (std::size_t s = 0; s < n_strata; ++s) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (strata[i] == s) members.push_back(i);
        }
        // Fisher-Yates with our own uniform draw so the split is identical across standard libraries.
        for (std::size_t i = members.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
            std::swap(members[i - 1], members[std::min(j, i - 1)]);
        }
        for (std::size_t m : members) {
            out.fold[m] = next % k;
            ++next;
        }
    }
    return out;
}

ProjectionTile shift_tile(const ProjectionTile& tile, int dy, int dx) {
    ProjectionTile out(tile.channels, tile.height, tile.width);
    const auto H = static_cast<long>(tile.height);
    const auto W = static_cast<long>(tile.width);
    for (std::size_t c = 0; c < tile.channels; ++c) {
        for (long y = 0; y < H; ++y) {
            const long sy = y - dy;
            if (sy < 0 || sy >= H) continue;
            for (long x = 0; x < W; ++x) {
                const long sx = x - dx;
                if (sx < 0 || sx >= W) continue;
                out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                    tile.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        }
    }
    return out;
}

Batch make_batch(std::span<const ProjectionTile> tiles, const LabelMatrix& labels, const NormStats& norm,
                 std::span<const std::size_t> indices, const AugmentOptions& augment, std::uint64_t seed) {
    if (tiles.size() != labels.n_subjects()) throw ValidationError("tile count does not match label rows");
    if (norm.size() != labels.n_targets()) throw ValidationError("normalization stats do not match label targets");
    if (indices.empty()) throw ValidationError("batch needs at least one index");

    const ProjectionTile& first = tiles[indices.front()];
    Batch batch;
    batch.size = indices.size();
    batch.channels = first.channels;
    batch.height = first.height;
    batch.width = first.width;
    batch.n_targets = labels.n_targets();
    const std::size_t sample = first.channels * first.plane_size();
    batch.inputs.resize(batch.size * sample);
    batch.y_norm.assign(batch.size * batch.n_targets, 0.0);
    batch.masks.assign(batch.size * batch.n_targets, 0);

    const int span = augment.max_shift;
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const std::size_t i = indices[b];
        if (i >= tiles.size()) throw ValidationError("batch index out of range");
        const ProjectionTile& tile = tiles[i];
        if (tile.channels != first.channels || tile.height != first.height || tile.width != first.width) {
            throw ValidationError("batch tiles have mismatched dimensions");
        }
        const ProjectionTile* src = &tile;
        ProjectionTile shifted;
        if (augment.enabled && span > 0) {
            Rng rng = make_rng(seed, b);
            const auto width = static_cast<double>(2 * span + 1);
            const int dy = static_cast<int>(uniform01(rng) * width) - span;
            const int dx = static_cast<int>(uniform01(rng) * width) - span;
            shifted = shift_tile(tile, dy, dx);
            src = &shifted;
        }
        std::copy(src->pixels.begin(), src->pixels.end(), batch.inputs.begin() + static_cast<std::ptrdiff_t>(b * sample));
        for (std::size_t t = 0; t < batch.n_targets; ++t) {
            if (!labels.known(i, t)) continue;
            batch.masks[b * batch.n_targets + t] = 1;
            batch.y_norm[b * batch.n_targets + t] = norm.normalize(t, labels.value(i, t));
        }
    }
    return batch;
}

}  // namespace mimir
