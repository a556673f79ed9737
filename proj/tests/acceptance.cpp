// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mimir_acceptance --cli <path to mimir> --workdir <dir> [--only <id>]... [--allow-fail <id>]...
//
// Exit status is 0 when every failing criterion is listed in --allow-fail. Allowed failures are
// still printed as FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mimir/checkpoint.hpp"
#include "mimir/engine.hpp"
#include "mimir/metrics.hpp"
#include "mimir/phantom.hpp"
#include "mimir/text.hpp"
#include "mimir/training.hpp"
#include "mimir/uncertainty.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mimir;

namespace {

// tolerances
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradRelFloor = 1e-8;
constexpr double kLossTol = 1e-12;
constexpr double kMetricRelTol = 1e-9;
constexpr double kMinR2 = 0.90;
constexpr double kMinIcc = 0.75;
constexpr double kMinAuc = 0.95;
constexpr double kCalibrationTol = 1e-9;
constexpr double kCoverageLow = 0.90;
constexpr double kCoverageHigh = 0.98;
constexpr std::size_t kHeldOutSubjects = 1200;
constexpr double kThroughputSeconds = 60.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

struct Options {
    std::string cli;
    fs::path workdir;
};

Options g_opts;

int run(const std::string& command, const fs::path& log) {
    const std::string full = command + " > '" + log.string() + "' 2>&1";
    const int status = std::system(full.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) { return read_text_file(p.string()); }

fs::path fresh_dir(const std::string& name) {
    const fs::path p = g_opts.workdir / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    NetworkConfig nc;
    nc.in_height = 8;
    nc.in_width = 8;
    nc.n_targets = 3;
    const Network net(nc);
    ParameterSet p = net.init_params(5);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> small(-0.1, 0.1);
    for (auto& t : p.tensors)
        for (double& v : t.data)
            if (v == 0.0) v = small(rng);

    const std::size_t n = 2;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n * net.input_size());
    for (double& v : x) v = u(rng);
    std::vector<double> y(n * 3);
    for (double& v : y) v = 2.0 * u(rng) - 1.0;
    std::vector<std::uint8_t> m(n * 3, 1);
    m[1] = 0;

    const auto loss_at = [&](const ParameterSet& q) {
        const ForwardResult o = net.forward(q, x, n, false);
        return nll_loss(o.mu, o.log_var, y, m).loss;
    };
    const ForwardResult o = net.forward(p, x, n);
    const LossResult l = nll_loss(o.mu, o.log_var, y, m);
    const ParameterGradients g = net.backward(p, o.cache, l.grad_mu, l.grad_log_var);

    double worst = 0.0;
    std::size_t checked = 0;
    ParameterSet q = p;
    for (std::size_t ti = 0; ti < p.tensors.size(); ++ti) {
        for (std::size_t j = 0; j < p.tensors[ti].data.size(); ++j) {
            const double orig = p.tensors[ti].data[j];
            q.tensors[ti].data[j] = orig + kGradStep;
            const double lp = loss_at(q);
            q.tensors[ti].data[j] = orig - kGradStep;
            const double lm = loss_at(q);
            q.tensors[ti].data[j] = orig;
            const double numeric = (lp - lm) / (2.0 * kGradStep);
            const double analytic = g.tensors[ti].data[j];
            const double rel =
                std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), kGradRelFloor});
            worst = std::max(worst, rel);
            ++checked;
        }
    }
    return {worst <= kGradRelTol,
            std::to_string(checked) + " parameters, worst relative error " + fmt(worst, 3) + " (tol " +
                fmt(kGradRelTol) + ")"};
}

Outcome loss_masking() {
    const std::vector<std::uint8_t> on{1}, off{0};
    const LossResult zero = nll_loss(std::vector<double>{2.0}, std::vector<double>{0.0}, std::vector<double>{2.0}, on);
    const LossResult half = nll_loss(std::vector<double>{0.0}, std::vector<double>{0.0}, std::vector<double>{1.0}, on);
    const LossResult masked =
        nll_loss(std::vector<double>{1.0}, std::vector<double>{3.0}, std::vector<double>{9.0}, off);
    bool ok = std::abs(zero.loss) <= kLossTol && std::abs(half.loss - 0.5) <= kLossTol &&
              std::abs(masked.loss) <= kLossTol;
    ok = ok && std::abs(half.grad_mu[0] + 1.0) <= kLossTol && std::abs(half.grad_log_var[0]) <= kLossTol;
    ok = ok && masked.grad_mu[0] == 0.0 && masked.grad_log_var[0] == 0.0;

    NetworkConfig nc;
    nc.in_height = 8;
    nc.in_width = 8;
    nc.n_targets = 3;
    const Network net(nc);
    const ParameterSet p = net.init_params(9);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t in = net.input_size();
    const auto random_rows = [&](std::size_t k) {
        std::vector<double> v(k * in);
        for (double& e : v) e = u(rng);
        return v;
    };
    const std::vector<double> base = random_rows(3);
    const std::vector<double> extra = random_rows(2);
    std::vector<double> y(3 * 3);
    for (double& e : y) e = u(rng);
    std::vector<std::uint8_t> m(3 * 3, 1);
    m[4] = 0;

    const auto loss_and_grads = [&](const std::vector<double>& x, const std::vector<double>& yy,
                                    const std::vector<std::uint8_t>& mm, std::size_t n) {
        const ForwardResult o = net.forward(p, x, n);
        const LossResult l = nll_loss(o.mu, o.log_var, yy, mm);
        return std::make_pair(l.loss, net.backward(p, o.cache, l.grad_mu, l.grad_log_var));
    };
    const auto reference = loss_and_grads(base, y, m, 3);

    bool padded_ok = true;
    for (bool prepend : {false, true}) {
        std::vector<double> x, yy(y);
        std::vector<std::uint8_t> mm(m);
        std::vector<double> junk_y(2 * 3, 123.0);
        std::vector<std::uint8_t> junk_m(2 * 3, 0);
        if (prepend) {
            x = extra;
            x.insert(x.end(), base.begin(), base.end());
            yy.insert(yy.begin(), junk_y.begin(), junk_y.end());
            mm.insert(mm.begin(), junk_m.begin(), junk_m.end());
        } else {
            x = base;
            x.insert(x.end(), extra.begin(), extra.end());
            yy.insert(yy.end(), junk_y.begin(), junk_y.end());
            mm.insert(mm.end(), junk_m.begin(), junk_m.end());
        }
        const auto padded = loss_and_grads(x, yy, mm, 5);
        padded_ok = padded_ok && padded.first == reference.first && padded.second.same_values(reference.second);
    }
    return {ok && padded_ok, std::string("unit cases ") + (ok ? "exact" : "WRONG") +
                                 ", fully masked rows " + (padded_ok ? "change nothing" : "CHANGE the result")};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(3, 12);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_int_distribution<int> coarse(0, 4);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        std::vector<double> y(n), p(n), labels(n), scores(n);
        for (int i = 0; i < n; ++i) {
            y[i] = u(rng);
            p[i] = y[i] + 0.7 * u(rng);
            labels[i] = i % 2;
            scores[i] = trial % 2 ? coarse(rng) * 0.25 : u(rng);
        }
        std::shuffle(labels.begin(), labels.end(), rng);
        worst = std::max(worst, oracle::rel_err(icc_2_1(y, p).value, oracle::icc_2_1(y, p)));
        worst = std::max(worst, oracle::rel_err(r_squared(y, p), oracle::r_squared(y, p)));
        const ErrorSummary e = mae_mape(y, p);
        worst = std::max(worst, oracle::rel_err(e.mae, oracle::mae(y, p)));
        worst = std::max(worst, oracle::rel_err(e.mape, oracle::mape(y, p)));
        worst = std::max(worst, oracle::rel_err(auc_roc(labels, scores), oracle::auc(labels, scores)));
        const Confusion c = confusion_at_threshold(labels, scores, 0.3);
        const auto [sens, spec] = oracle::confusion(labels, scores, 0.3);
        worst = std::max(worst, oracle::rel_err(c.sensitivity, sens));
        worst = std::max(worst, oracle::rel_err(c.specificity, spec));
    }
    const double icc_example = icc_2_1(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 3, 4, 5}).value;
    const double auc_example =
        auc_roc(std::vector<double>{0, 0, 1, 1}, std::vector<double>{0.1, 0.4, 0.35, 0.8});
    const bool examples =
        oracle::rel_err(icc_example, 10.0 / 13.0) <= kMetricRelTol && oracle::rel_err(auc_example, 0.75) <= kMetricRelTol;
    return {worst <= kMetricRelTol && examples, "1000 instances, worst relative error " + fmt(worst, 3) +
                                                    "; ICC example " + fmt(icc_example, 12) + ", AUC example " +
                                                    fmt(auc_example)};
}

// ---------------------------------------------------------------------------
// Phantom learning and calibration share one trained model.

struct TrainedPhantom {
    EngineConfig config;
    Dataset data;
    FoldAssignment folds;
    ModelCheckpoint raw;
    ModelCheckpoint calibrated;
    PredictionTable validation_raw;
    PredictionTable validation_calibrated;
    double train_seconds = 0.0;
};

Dataset phantom_dataset(const PhantomSpec& spec, const NetworkConfig& network) {
    Dataset d;
    d.registry = phantom_registry();
    std::vector<PhantomSubject> subjects(spec.n_subjects);
    d.tiles.resize(spec.n_subjects);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        subjects[i] = generate_subject(spec, i);
        d.tiles[i] = prepare_tile(subjects[i].volume, network);
        subjects[i].volume = VolumeGrid{};
    }
    d.labels = export_labels(subjects, spec.missing_rate, spec.seed);
    return d;
}

const TrainedPhantom& trained_phantom() {
    static std::unique_ptr<TrainedPhantom> cached;
    if (cached) return *cached;
    auto tp = std::make_unique<TrainedPhantom>();
    EngineConfig& c = tp->config;
    c.phantom.n_subjects = 2000;
    c.phantom.missing_rate = 0.5;
    c.network.n_targets = phantom_registry().size();
    tp->data = phantom_dataset(c.phantom, c.network);
    tp->folds = make_folds(tp->data.labels, tp->data.registry, c.folds, c.strata_key, c.fold_seed);

    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult trained = train(tp->data.tiles, tp->data.labels, tp->folds, 0, c.network, c.training);
    tp->train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tp->raw = make_checkpoint(tp->data.registry, trained, c.network, c.training);

    const std::vector<std::size_t> val = tp->folds.members(0);
    std::vector<ProjectionTile> tiles;
    std::vector<std::string> ids;
    for (std::size_t i : val) {
        tiles.push_back(tp->data.tiles[i]);
        ids.push_back(tp->data.labels.subjects[i]);
    }
    tp->validation_raw = predict(tp->raw, tiles, ids, c.level, 0);
    tp->calibrated = tp->raw;
    tp->calibrated.calibration = calibrate_from(tp->raw, tp->validation_raw, tp->data.labels, "fold 0");
    tp->validation_calibrated = predict(tp->calibrated, tiles, ids, c.level, 0);
    cached = std::move(tp);
    return *cached;
}

Outcome phantom_learning() {
    const TrainedPhantom& tp = trained_phantom();
    const MetricsReport r = evaluate(tp.validation_raw, tp.data.labels, tp.data.registry);
    const TargetMetrics* organ = r.find("organ_volume");
    const TargetMetrics* fat = r.find("fat_fraction");
    const TargetMetrics* sex = r.find("sex_analog");
    const auto good = [](const TargetMetrics* m) { return m && m->r2 >= kMinR2 && m->icc >= kMinIcc; };
    const bool pass = good(organ) && good(fat) && sex && sex->auc >= kMinAuc;
    std::string detail = "organ_volume R2 " + fmt(organ->r2, 3) + " ICC " + fmt(organ->icc, 3) + "; fat_fraction R2 " +
                         fmt(fat->r2, 3) + " ICC " + fmt(fat->icc, 3) + "; sex_analog AUC " + fmt(sex->auc, 3) +
                         " (need R2>=" + fmt(kMinR2) + ", ICC>=" + fmt(kMinIcc) + ", AUC>=" + fmt(kMinAuc) +
                         "); trained in " + fmt(tp.train_seconds, 3) + " s";
    return {pass, detail};
}

Outcome calibration() {
    const TrainedPhantom& tp = trained_phantom();
    const PredictionTable& p = tp.validation_calibrated;
    const LabelMatrix& labels = tp.data.labels;
    double worst_msr = 0.0;
    std::size_t fitted = 0;
    for (std::size_t t = 0; t < p.n_targets(); ++t) {
        if (!tp.calibrated.calibration.calibrated[t]) continue;
        ++fitted;
        const std::size_t lt = labels.find_target(p.targets[t]).value();
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < p.n_subjects(); ++i) {
            const std::size_t row = labels.find_subject(p.subjects[i]).value();
            if (!labels.known(row, lt)) continue;
            const double z = (labels.value(row, lt) - p.mean[p.index(i, t)]) / p.sigma[p.index(i, t)];
            sum += z * z;
            ++count;
        }
        worst_msr = std::max(worst_msr, std::abs(sum / static_cast<double>(count) - 1.0));
    }
    const bool fit_ok = fitted == p.n_targets() && worst_msr <= kCalibrationTol;

    PhantomSpec held = tp.config.phantom;
    held.seed = tp.config.phantom.seed + 1000;
    held.n_subjects = kHeldOutSubjects;
    held.missing_rate = 0.0;
    const Dataset fresh = phantom_dataset(held, tp.config.network);
    const PredictionTable hp = predict(tp.calibrated, fresh.tiles, fresh.labels.subjects, 0.95);
    bool coverage_ok = true;
    std::string cov;
    for (std::size_t t = 0; t < hp.n_targets(); ++t) {
        if (fresh.registry[t].kind != TargetKind::continuous) continue;
        std::vector<Interval> iv;
        std::vector<double> truth;
        for (std::size_t i = 0; i < hp.n_subjects(); ++i) {
            iv.push_back({hp.low[hp.index(i, t)], hp.high[hp.index(i, t)]});
            truth.push_back(fresh.labels.value(i, t));
        }
        const double c = coverage(iv, truth, std::vector<std::uint8_t>(truth.size(), 1));
        coverage_ok = coverage_ok && c >= kCoverageLow && c <= kCoverageHigh;
        cov += " " + hp.targets[t] + "=" + fmt(c, 3);
    }
    return {fit_ok && coverage_ok, "fitting-fold |MSR-1| max " + fmt(worst_msr, 3) + " over " + std::to_string(fitted) +
                                       " targets; held-out 95% coverage (n=" + std::to_string(kHeldOutSubjects) +
                                       "):" + cov};
}

// ---------------------------------------------------------------------------
// CLI-driven criteria share a small dataset and two cross-validation runs.

constexpr const char* kSmallConfig = R"(seed = 7
depth = 32
height = 32
width = 16
n_subjects = 80
missing_rate = 0.2
in_height = 16
in_width = 16
blocks = 8p,16
total_iterations = 40
stage1_iterations = 32
batch_size = 8
folds = 5
groups = organs,body-composition,anthropometric
)";

struct CvRuns {
    bool ok = false;
    std::string error;
    fs::path data, run1, run2;
};

const CvRuns& cv_runs() {
    static std::optional<CvRuns> cached;
    if (cached) return *cached;
    CvRuns r;
    const fs::path root = fresh_dir("cv");
    write_text_file((root / "small.cfg").string(), kSmallConfig);
    const std::string base = "'" + g_opts.cli + "' --config '" + (root / "small.cfg").string() + "'";
    r.data = root / "data";
    r.run1 = root / "run1";
    r.run2 = root / "run2";
    for (const auto& d : {r.data, r.run1, r.run2}) fs::create_directories(d);
    if (run(base + " phantom --out '" + r.data.string() + "'", root / "phantom.log") != 0) {
        r.error = "phantom command failed";
    } else if (run(base + " cv --data '" + r.data.string() + "' --out '" + r.run1.string() + "'", root / "cv1.log") != 0 ||
               run(base + " cv --data '" + r.data.string() + "' --out '" + r.run2.string() + "'", root / "cv2.log") != 0) {
        r.error = "cv command failed (see " + root.string() + ")";
    } else {
        r.ok = true;
    }
    cached = r;
    return *cached;
}

Outcome cv_integrity() {
    // fold-size arithmetic at full scale
    const std::size_t n_full = 38916;
    LabelMatrix big(std::vector<std::string>(n_full), {"sex_analog"});
    for (std::size_t i = 0; i < n_full; ++i) {
        big.subjects[i] = "s" + std::to_string(i);
        big.value(i, 0) = static_cast<double>((i * 7919) % 3 == 0);
        big.set_mask(i, 0, true);
    }
    const TargetRegistry big_reg({{"sex_analog", "-", TargetKind::binary, "g"}});
    const FoldAssignment big_folds = make_folds(big, big_reg, 10, std::string("sex_analog"), 1);
    std::set<std::size_t> big_sizes;
    for (std::size_t f = 0; f < 10; ++f) big_sizes.insert(big_folds.fold_size(f));
    const bool big_ok = big_sizes == std::set<std::size_t>{3891, 3892};

    const CvRuns& r = cv_runs();
    if (!r.ok) return {false, r.error};
    const LabelMatrix labels = parse_labels_csv(read_file(r.data / "labels.csv"));
    const PredictionTable pooled = PredictionTable::parse_csv(read_file(r.run1 / "predictions.csv"));
    const FoldAssignment folds = parse_folds_csv(read_file(r.run1 / "folds.csv"), labels.subjects);

    std::map<std::string, int> seen;
    for (const auto& s : pooled.subjects) ++seen[s];
    bool once = seen.size() == labels.n_subjects();
    for (const auto& s : labels.subjects) once = once && seen[s] == 1;

    std::size_t lo = SIZE_MAX, hi = 0;
    for (std::size_t f = 0; f < folds.k; ++f) {
        lo = std::min(lo, folds.fold_size(f));
        hi = std::max(hi, folds.fold_size(f));
    }
    const bool balanced = hi - lo <= 1;

    std::set<std::pair<long long, std::string>> trained_on;
    const auto lines = split_lines(read_file(r.run1 / "training_subjects.csv"));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split(lines[i], ',');
        trained_on.insert({parse_int(cells[0]), cells[1]});
    }
    std::size_t leaks = 0;
    for (std::size_t i = 0; i < pooled.n_subjects(); ++i) {
        const std::size_t row = labels.find_subject(pooled.subjects[i]).value();
        if (pooled.fold[i] != static_cast<long long>(folds.fold[row])) ++leaks;
        if (trained_on.count({pooled.fold[i], pooled.subjects[i]})) ++leaks;
    }
    const bool audited = !trained_on.empty() && leaks == 0;
    return {big_ok && once && balanced && audited,
            std::to_string(pooled.n_subjects()) + " pooled rows, each subject " + (once ? "exactly once" : "NOT once") +
                "; fold sizes " + std::to_string(lo) + ".." + std::to_string(hi) + "; provenance violations " +
                std::to_string(leaks) + "; 38916 subjects into 10 folds gives " + std::to_string(*big_sizes.begin()) +
                "/" + std::to_string(*big_sizes.rbegin())};
}

Outcome determinism() {
    const CvRuns& r = cv_runs();
    if (!r.ok) return {false, r.error};
    std::size_t compared = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(r.run1)) {
        const std::string name = entry.path().filename().string();
        const bool relevant = entry.path().extension() == ".mckp" || name == "predictions.csv" || name == "folds.csv" ||
                              name == "report.csv";
        if (!relevant) continue;
        ++compared;
        if (!fs::exists(r.run2 / name) || read_file(entry.path()) != read_file(r.run2 / name)) ++differing;
    }
    const fs::path ckpt = r.run1 / "fold_0.mckp";
    const std::string bytes = read_file(ckpt);
    const ModelCheckpoint loaded = load_checkpoint(ckpt.string());
    const fs::path copy = g_opts.workdir / "cv" / "roundtrip.mckp";
    save_checkpoint(copy.string(), loaded);
    const bool roundtrip = encode_checkpoint(loaded) == bytes && read_file(copy) == bytes;
    return {compared >= 3 && differing == 0 && roundtrip,
            std::to_string(compared) + " artifacts compared across two runs, " + std::to_string(differing) +
                " differ; checkpoint round-trip " + (roundtrip ? "byte-identical" : "DIFFERS")};
}

Outcome throughput() {
    const fs::path root = fresh_dir("throughput");
    write_text_file((root / "tp.cfg").string(), "seed = 11\ntotal_iterations = 4\nstage1_iterations = 3\n");
    const std::string base = "'" + g_opts.cli + "' --config '" + (root / "tp.cfg").string() + "'";
    const fs::path data = root / "data";
    fs::create_directories(data);
    if (run(base + " phantom --out '" + data.string() + "' -n 1000", root / "phantom.log") != 0)
        return {false, "phantom command failed"};
    if (run(base + " train --data '" + data.string() + "' --out '" + (root / "model.mckp").string() + "'",
            root / "train.log") != 0)
        return {false, "train command failed"};
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = run(base + " predict --checkpoint '" + (root / "model.mckp").string() + "' '" +
                           (data / "volumes").string() + "' --out '" + (root / "predictions.csv").string() + "'",
                       root / "predict.log");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (rc != 0) return {false, "predict command failed"};
    const PredictionTable p = PredictionTable::parse_csv(read_file(root / "predictions.csv"));
    return {p.n_subjects() == 1000 && seconds < kThroughputSeconds,
            std::to_string(p.n_subjects()) + " subjects predicted in " + fmt(seconds, 3) + " s (limit " +
                fmt(kThroughputSeconds) + " s)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mimir acceptance suite"};
    std::vector<std::string> only, allow_fail;
    std::string workdir;
    app.add_option("--cli", g_opts.cli, "path to the mimir executable")->required();
    app.add_option("--workdir", workdir, "scratch directory")->required();
    app.add_option("--only", only, "run only these criteria");
    app.add_option("--allow-fail", allow_fail, "criteria whose failure does not fail the run");
    CLI11_PARSE(app, argc, argv);
    g_opts.workdir = fs::absolute(workdir);
    fs::create_directories(g_opts.workdir);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient-check", gradient_check}, {"loss-masking", loss_masking},
        {"metric-oracles", metric_oracles}, {"phantom-learning", phantom_learning},
        {"calibration", calibration},       {"cv-integrity", cv_integrity},
        {"determinism", determinism},       {"throughput", throughput},
    };
    const std::set<std::string> allowed(allow_fail.begin(), allow_fail.end());
    std::size_t passed = 0, failed = 0, blocking = 0;
    for (const auto& [id, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string line = (o.pass ? "PASS " : "FAIL ") + id + ": " + o.detail + " [" + fmt(s, 3) + " s]";
        if (o.pass) {
            ++passed;
        } else {
            ++failed;
            if (allowed.count(id)) line += " (failure allowed by --allow-fail)";
            else ++blocking;
        }
        std::cout << line << std::endl;
    }
    std::cout << "acceptance: " << passed << " passed, " << failed << " failed";
    if (failed > blocking) std::cout << " (" << failed - blocking << " allowed)";
    std::cout << std::endl;
    return blocking == 0 ? 0 : 1;
}
