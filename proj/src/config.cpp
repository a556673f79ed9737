#include "mimir/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/text.hpp"

namespace mimir {

namespace {

std::uint64_t parse_u64(const std::string& v) {
    const long long x = parse_int(v);
    if (x < 0) throw ValidationError("expected a non-negative integer, got '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("expected true or false, got '" + v + "'");
}

double parse_real(const std::string& v) {
    const double x = parse_double(v);
    if (std::isnan(x)) throw ValidationError("expected a number, got '" + v + "'");
    return x;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

struct Key {
    std::string name;
    std::function<void(EngineConfig&, const std::string&)> set;
    std::function<std::string(const EngineConfig&)> get;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        {"seed", [](EngineConfig& c, const std::string& v) { set_all_seeds(c, parse_u64(v)); },
         [](const EngineConfig& c) { return std::to_string(c.seed); }},
        {"phantom_seed", [](EngineConfig& c, const std::string& v) { c.phantom.seed = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.phantom.seed); }},
        {"fold_seed", [](EngineConfig& c, const std::string& v) { c.fold_seed = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.fold_seed); }},
        {"init_seed", [](EngineConfig& c, const std::string& v) { c.network.init_seed = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.network.init_seed); }},
        {"training_seed", [](EngineConfig& c, const std::string& v) { c.training.seed = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.training.seed); }},
        {"depth", [](EngineConfig& c, const std::string& v) { c.phantom.depth = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.phantom.depth); }},
        {"height", [](EngineConfig& c, const std::string& v) { c.phantom.height = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.phantom.height); }},
        {"width", [](EngineConfig& c, const std::string& v) { c.phantom.width = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.phantom.width); }},
        {"voxel_size", [](EngineConfig& c, const std::string& v) { c.phantom.voxel_size = static_cast<float>(parse_real(v)); },
         [](const EngineConfig& c) { return format_double(c.phantom.voxel_size); }},
        {"n_subjects", [](EngineConfig& c, const std::string& v) { c.phantom.n_subjects = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.phantom.n_subjects); }},
        {"missing_rate", [](EngineConfig& c, const std::string& v) { c.phantom.missing_rate = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.phantom.missing_rate); }},
        {"noise_sigma", [](EngineConfig& c, const std::string& v) { c.phantom.noise_sigma = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.phantom.noise_sigma); }},
        {"in_channels", [](EngineConfig& c, const std::string& v) { c.network.in_channels = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.network.in_channels); }},
        {"in_height", [](EngineConfig& c, const std::string& v) { c.network.in_height = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.network.in_height); }},
        {"in_width", [](EngineConfig& c, const std::string& v) { c.network.in_width = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.network.in_width); }},
        {"blocks", [](EngineConfig& c, const std::string& v) { c.network.blocks = parse_blocks(v); },
         [](const EngineConfig& c) { return format_blocks(c.network.blocks); }},
        {"batch_size", [](EngineConfig& c, const std::string& v) { c.training.batch_size = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.training.batch_size); }},
        {"total_iterations", [](EngineConfig& c, const std::string& v) { c.training.total_iterations = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.training.total_iterations); }},
        {"stage1_iterations", [](EngineConfig& c, const std::string& v) { c.training.stage1_iterations = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.training.stage1_iterations); }},
        {"lr_stage1", [](EngineConfig& c, const std::string& v) { c.training.lr_stage1 = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.training.lr_stage1); }},
        {"lr_stage2", [](EngineConfig& c, const std::string& v) { c.training.lr_stage2 = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.training.lr_stage2); }},
        {"beta1", [](EngineConfig& c, const std::string& v) { c.training.beta1 = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.training.beta1); }},
        {"beta2", [](EngineConfig& c, const std::string& v) { c.training.beta2 = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.training.beta2); }},
        {"epsilon", [](EngineConfig& c, const std::string& v) { c.training.epsilon = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.training.epsilon); }},
        {"augment", [](EngineConfig& c, const std::string& v) { c.training.augment = parse_bool(v); },
         [](const EngineConfig& c) { return std::string(c.training.augment ? "true" : "false"); }},
        {"augment_shift", [](EngineConfig& c, const std::string& v) { c.training.augment_shift = static_cast<int>(parse_int(v)); },
         [](const EngineConfig& c) { return std::to_string(c.training.augment_shift); }},
        {"folds", [](EngineConfig& c, const std::string& v) { c.folds = parse_u64(v); },
         [](const EngineConfig& c) { return std::to_string(c.folds); }},
        {"strata_key",
         [](EngineConfig& c, const std::string& v) {
             c.strata_key = (v.empty() || v == "none") ? std::nullopt : std::optional<std::string>(v);
         },
         [](const EngineConfig& c) { return c.strata_key.value_or("none"); }},
        {"groups",
         [](EngineConfig& c, const std::string& v) {
             c.groups.clear();
             for (const auto& g : split(v, ',')) {
                 if (!trim(g).empty()) c.groups.push_back(trim(g));
             }
         },
         [](const EngineConfig& c) { return join(c.groups); }},
        {"level", [](EngineConfig& c, const std::string& v) { c.level = parse_real(v); },
         [](const EngineConfig& c) { return format_double(c.level); }},
    };
    return k;
}

}  // namespace

void set_all_seeds(EngineConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.phantom.seed = seed;
    config.fold_seed = seed;
    config.network.init_seed = seed;
    config.training.seed = seed;
}

void EngineConfig::validate() const {
    phantom.validate();
    training.validate();
    NetworkConfig net = network;
    net.n_targets = std::max<std::size_t>(1, net.n_targets);
    net.validate();
    if (network.in_channels != kProjectionChannels) throw ValidationError("in_channels must be 2 (water and fat)");
    if (folds < 2) throw ValidationError("folds must be >= 2");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must be in (0, 1)");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& k : keys()) n.push_back(k.name);
        return n;
    }();
    return names;
}

std::string EngineConfig::to_text() const {
    std::ostringstream out;
    for (const auto& k : keys()) out << k.name << " = " << k.get(*this) << '\n';
    return out.str();
}

EngineConfig parse_config(std::string_view text) {
    std::map<std::string, const Key*> by_name;
    for (const auto& k : keys()) by_name[k.name] = &k;
    EngineConfig c;
    std::vector<std::pair<const Key*, std::string>> assignments;
    const auto lines = split_lines(text);
    for (std::size_t l = 0; l < lines.size(); ++l) {
        std::string line = lines[l];
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(l + 1) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto it = by_name.find(key);
        if (it == by_name.end()) throw ValidationError("config line " + std::to_string(l + 1) + ": unknown key '" + key + "'");
        assignments.emplace_back(it->second, value);
    }
    // the master seed applies first so the specific seed keys win regardless of line order
    std::stable_partition(assignments.begin(), assignments.end(), [](const auto& a) { return a.first->name == "seed"; });
    for (const auto& [key, value] : assignments) {
        try {
            key->set(c, value);
        } catch (const std::exception& e) {
            throw ValidationError("config key '" + key->name + "': " + e.what());
        }
    }
    return c;
}

EngineConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

void apply_seed_override(EngineConfig& config) {
    const char* env = std::getenv("MIMIR_SEED");
    if (env == nullptr || *env == '\0') return;
    try {
        set_all_seeds(config, parse_u64(env));
    } catch (const std::exception& e) {
        throw ValidationError(std::string("MIMIR_SEED: ") + e.what());
    }
}

}  // namespace mimir
