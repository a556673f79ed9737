#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mimir/model.hpp"
#include "mimir/phantom.hpp"
#include "mimir/training.hpp"

namespace mimir {

/// Every tunable of the pipeline. Text form is one `key = value` per line; `#` starts a comment.
///
/// `seed` seeds the phantom, fold split, initialization and batch draws. The specific keys
/// `phantom_seed`, `fold_seed`, `init_seed` and `training_seed` override it individually.
struct EngineConfig {
    PhantomSpec phantom;
    NetworkConfig network;
    TrainingConfig training;
    std::uint64_t seed = 1;
    std::uint64_t fold_seed = 1;
    std::size_t folds = 10;
    std::optional<std::string> strata_key = "sex_analog";
    std::vector<std::string> groups;  // empty: all targets
    double level = 0.95;

    void validate() const;
    std::string to_text() const;
};

/// Keys understood by parse_config, in to_text order.
const std::vector<std::string>& config_keys();

/// Unknown keys and malformed values throw ValidationError naming the line.
EngineConfig parse_config(std::string_view text);
EngineConfig load_config(const std::string& path);

/// Applies MIMIR_SEED from the environment when set; throws on a malformed value.
void apply_seed_override(EngineConfig& config);
/// Sets every seed from `seed`.
void set_all_seeds(EngineConfig& config, std::uint64_t seed);

}  // namespace mimir
