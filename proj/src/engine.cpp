#include "mimir/engine.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/phantom.hpp"
#include "mimir/text.hpp"

namespace mimir {

ProjectionTile prepare_tile(const VolumeGrid& volume, const NetworkConfig& network) {
    return resize_tile(project(volume), network.in_height, network.in_width);
}

Dataset Dataset::filtered(std::span<const std::string> groups) const {
    if (groups.empty()) return *this;
    Dataset d;
    d.registry = registry.filter_groups(groups);
    if (d.registry.empty()) throw ValidationError("no targets belong to the selected groups");
    d.labels = labels.aligned_to(d.registry);
    d.tiles = tiles;
    return d;
}

void write_phantom_dataset(const std::string& dir, const EngineConfig& config) {
    namespace fs = std::filesystem;
    config.phantom.validate();
    if (!fs::is_directory(dir)) throw IoError("output directory '" + dir + "' does not exist");
    const DataLayout layout{dir};
    fs::create_directories(layout.volumes());

    const PhantomSpec& spec = config.phantom;
    std::vector<PhantomSubject> subjects(spec.n_subjects);
    std::vector<std::string> errors(spec.n_subjects);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        try {
            PhantomSubject s = generate_subject(spec, i);
            save_volume(layout.volume(s.subject_id), s.volume);
            s.volume = VolumeGrid();
            subjects[i] = std::move(s);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw IoError(e);
    }
    const LabelMatrix labels = export_labels(subjects, spec.missing_rate, spec.seed);
    write_text_file(layout.labels(), labels_csv(labels));
    write_text_file(layout.registry(), phantom_registry().to_text());

    std::ostringstream manifest;
    manifest << "n_subjects = " << spec.n_subjects << '\n'
             << "n_targets = " << labels.n_targets() << '\n'
             << "seed = " << spec.seed << '\n'
             << "depth = " << spec.depth << '\n'
             << "height = " << spec.height << '\n'
             << "width = " << spec.width << '\n'
             << "voxel_size = " << format_double(spec.voxel_size) << '\n'
             << "missing_rate = " << format_double(spec.missing_rate) << '\n'
             << "noise_sigma = " << format_double(spec.noise_sigma) << '\n'
             << "volume_format = MVOL " << kVolumeVersion << '\n';
    write_text_file(layout.manifest(), manifest.str());
}

Dataset load_dataset(const std::string& dir, const NetworkConfig& network) {
    const DataLayout layout{dir};
    Dataset d;
    const LabelMatrix raw = parse_labels_csv(read_text_file(layout.labels()));
    d.registry = std::filesystem::exists(layout.registry()) ? TargetRegistry::parse(read_text_file(layout.registry()))
                                                            : infer_registry(raw);
    d.labels = raw.aligned_to(d.registry);
    d.tiles.resize(d.labels.n_subjects());
    std::vector<std::string> errors(d.tiles.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < d.tiles.size(); ++i) {
        try {
            d.tiles[i] = prepare_tile(load_volume(layout.volume(d.labels.subjects[i])), network);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw IoError(e);
    }
    return d;
}

ModelCheckpoint make_checkpoint(const TargetRegistry& registry, const TrainResult& trained, const NetworkConfig& network,
                                const TrainingConfig& training) {
    ModelCheckpoint c;
    c.registry = registry;
    c.norm = trained.norm;
    c.calibration = CalibrationFactors::identity(registry.size());
    c.network = network;
    c.network.n_targets = registry.size();
    c.params = trained.params.quantized_f32();
    c.training = training;
    c.metadata = {{"format", "mimir checkpoint"},
                  {"library_version", "0.1.0"},
                  {"n_training_rows", std::to_string(trained.training_rows.size())}};
    c.validate();
    return c;
}

PredictionTable predict(const ModelCheckpoint& checkpoint, std::span<const ProjectionTile> tiles,
                        std::span<const std::string> subject_ids, double level, long long fold) {
    checkpoint.validate();
    if (tiles.size() != subject_ids.size()) throw ValidationError("predict: tile and subject counts differ");
    const double z = normal_quantile(level);
    const Network network(checkpoint.network);
    const std::size_t T = checkpoint.registry.size();
    const std::size_t in = network.input_size();
    const NetworkConfig& nc = checkpoint.network;

    PredictionTable p;
    p.targets = checkpoint.registry.names();
    p.subjects.assign(subject_ids.begin(), subject_ids.end());
    p.fold.assign(tiles.size(), fold);
    p.mean.resize(tiles.size() * T);
    p.sigma.resize(tiles.size() * T);
    p.low.resize(tiles.size() * T);
    p.high.resize(tiles.size() * T);

    constexpr std::size_t kChunk = 256;
    std::vector<double> inputs;
    for (std::size_t start = 0; start < tiles.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, tiles.size() - start);
        inputs.assign(n * in, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
            const ProjectionTile& tile = tiles[start + b];
            if (tile.channels != nc.in_channels || tile.height != nc.in_height || tile.width != nc.in_width) {
                throw ValidationError("tile for '" + p.subjects[start + b] + "' does not match the network input size");
            }
            std::copy(tile.pixels.begin(), tile.pixels.end(), inputs.begin() + static_cast<std::ptrdiff_t>(b * in));
        }
        const ForwardResult out = network.forward(checkpoint.params, inputs, n, false);
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t j = (start + b) * T + t;
                const double mu = checkpoint.norm.denormalize(t, out.mu[b * T + t]);
                const double sigma =
                    std::exp(0.5 * out.log_var[b * T + t]) * checkpoint.norm.std[t] * checkpoint.calibration.factor[t];
                p.mean[j] = mu;
                p.sigma[j] = sigma;
                p.low[j] = mu - z * sigma;
                p.high[j] = mu + z * sigma;
            }
        }
    }
    return p;
}

namespace {

std::map<std::string, std::size_t> subject_index(const LabelMatrix& labels) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < labels.n_subjects(); ++i) idx.emplace(labels.subjects[i], i);
    return idx;
}

}  // namespace

CalibrationFactors calibrate_from(const ModelCheckpoint& checkpoint, const PredictionTable& uncalibrated,
                                  const LabelMatrix& labels, std::string source) {
    const std::size_t T = checkpoint.registry.size();
    if (uncalibrated.targets != checkpoint.registry.names()) throw ValidationError("prediction targets do not match checkpoint");
    std::vector<std::size_t> label_col(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto c = labels.find_target(uncalibrated.targets[t]);
        if (!c) throw ValidationError("labels lack target '" + uncalibrated.targets[t] + "'");
        label_col[t] = *c;
    }
    const auto idx = subject_index(labels);
    std::vector<double> mu, sigma, y;
    std::vector<std::uint8_t> masks;
    for (std::size_t i = 0; i < uncalibrated.n_subjects(); ++i) {
        const auto it = idx.find(uncalibrated.subjects[i]);
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t j = uncalibrated.index(i, t);
            const bool known = it != idx.end() && labels.known(it->second, label_col[t]);
            mu.push_back(uncalibrated.mean[j]);
            sigma.push_back(uncalibrated.sigma[j]);
            y.push_back(known ? labels.value(it->second, label_col[t]) : 0.0);
            masks.push_back(known ? 1 : 0);
        }
    }
    return fit_calibration(mu, sigma, y, masks, T, std::move(source));
}

TargetRegistry infer_registry(const LabelMatrix& labels) {
    TargetRegistry r;
    for (std::size_t t = 0; t < labels.n_targets(); ++t) {
        bool binary = false;
        bool all01 = true;
        for (std::size_t i = 0; i < labels.n_subjects(); ++i) {
            if (!labels.known(i, t)) continue;
            binary = true;
            if (labels.value(i, t) != 0.0 && labels.value(i, t) != 1.0) all01 = false;
        }
        r.add({labels.targets[t], "", binary && all01 ? TargetKind::binary : TargetKind::continuous, "default"});
    }
    return r;
}

MetricsReport evaluate(const PredictionTable& predictions, const LabelMatrix& labels, const TargetRegistry& registry) {
    const auto idx = subject_index(labels);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (prediction row, label row)
    for (std::size_t i = 0; i < predictions.n_subjects(); ++i) {
        if (const auto it = idx.find(predictions.subjects[i]); it != idx.end()) pairs.emplace_back(i, it->second);
    }
    if (pairs.empty()) throw ValidationError("predictions and labels share no subject ids");

    MetricsReport report;
    for (const auto& target : registry.targets()) {
        const auto lc = labels.find_target(target.name);
        std::size_t pc = predictions.n_targets();
        for (std::size_t t = 0; t < predictions.n_targets(); ++t) {
            if (predictions.targets[t] == target.name) pc = t;
        }
        if (!lc || pc == predictions.n_targets()) {
            throw ValidationError("target '" + target.name + "' is missing from predictions or labels");
        }
        std::vector<double> truth, pred, low, high;
        for (const auto& [pi, li] : pairs) {
            if (!labels.known(li, *lc)) continue;
            const std::size_t j = predictions.index(pi, pc);
            truth.push_back(labels.value(li, *lc));
            pred.push_back(predictions.mean[j]);
            low.push_back(predictions.low[j]);
            high.push_back(predictions.high[j]);
        }
        report.rows.push_back(evaluate_target(target, truth, pred, low, high));
    }
    return report;
}

CvResult cross_validate(const Dataset& data, const EngineConfig& config, const std::optional<FoldAssignment>& folds) {
    config.validate();
    data.labels.validate();
    if (data.tiles.size() != data.labels.n_subjects()) throw ValidationError("tile count does not match label rows");
    CvResult cv;
    if (folds) {
        if (folds->fold.size() != data.labels.n_subjects()) throw ValidationError("fold assignment does not match subjects");
        cv.folds = *folds;
    } else {
        cv.folds = make_folds(data.labels, data.registry, config.folds, config.strata_key, config.fold_seed);
    }

    NetworkConfig net = config.network;
    net.n_targets = data.registry.size();
    const std::size_t N = data.labels.n_subjects();
    const std::size_t T = data.registry.size();
    cv.pooled.targets = data.registry.names();
    cv.pooled.subjects = data.labels.subjects;
    cv.pooled.fold.assign(N, -1);
    cv.pooled.mean.assign(N * T, 0.0);
    cv.pooled.sigma.assign(N * T, 0.0);
    cv.pooled.low.assign(N * T, 0.0);
    cv.pooled.high.assign(N * T, 0.0);

    for (std::size_t f = 0; f < cv.folds.k; ++f) {
        FoldRun run;
        run.fold = f;
        run.validation_rows = cv.folds.members(f);
        TrainResult trained;
        try {
            trained = train(data.tiles, data.labels, cv.folds, f, net, config.training);
        } catch (const std::exception& e) {
            throw std::runtime_error("fold " + std::to_string(f) + ": " + e.what());
        }
        run.checkpoint = make_checkpoint(data.registry, trained, net, config.training);
        run.checkpoint.metadata.emplace_back("fold", std::to_string(f));
        run.checkpoint.metadata.emplace_back("k", std::to_string(cv.folds.k));
        run.log = std::move(trained.log);
        run.training_rows = std::move(trained.training_rows);

        std::vector<ProjectionTile> tiles;
        std::vector<std::string> ids;
        for (std::size_t i : run.validation_rows) {
            tiles.push_back(data.tiles[i]);
            ids.push_back(data.labels.subjects[i]);
        }
        const PredictionTable raw = predict(run.checkpoint, tiles, ids, config.level, static_cast<long long>(f));
        run.checkpoint.calibration = calibrate_from(run.checkpoint, raw, data.labels, "fold " + std::to_string(f));
        const PredictionTable calibrated = predict(run.checkpoint, tiles, ids, config.level, static_cast<long long>(f));
        for (std::size_t r = 0; r < run.validation_rows.size(); ++r) {
            const std::size_t i = run.validation_rows[r];
            cv.pooled.fold[i] = static_cast<long long>(f);
            for (std::size_t t = 0; t < T; ++t) {
                cv.pooled.mean[i * T + t] = calibrated.mean[r * T + t];
                cv.pooled.sigma[i * T + t] = calibrated.sigma[r * T + t];
                cv.pooled.low[i * T + t] = calibrated.low[r * T + t];
                cv.pooled.high[i * T + t] = calibrated.high[r * T + t];
            }
        }
        cv.runs.push_back(std::move(run));
    }
    cv.report = evaluate(cv.pooled, data.labels, data.registry);
    return cv;
}

}  // namespace mimir
