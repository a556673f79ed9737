#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mimir/config.hpp"
#include "mimir/engine.hpp"
#include "mimir/error.hpp"
#include "mimir/io.hpp"
#include "mimir/phantom.hpp"
#include "mimir/text.hpp"

namespace fs = std::filesystem;
using namespace mimir;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

EngineConfig make_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    EngineConfig c = path.empty() ? EngineConfig{} : load_config(path);
    apply_seed_override(c);
    if (seed) set_all_seeds(c, *seed);
    return c;
}

void require_dir(const std::string& dir, const char* what) {
    if (!fs::is_directory(dir)) throw UsageError(std::string(what) + " '" + dir + "' is not an existing directory");
}

void require_parent(const std::string& file) {
    const fs::path parent = fs::path(file).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw UsageError("directory '" + parent.string() + "' for '" + file + "' does not exist");
    }
}

std::vector<std::string> collect_volumes(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(in)) {
                if (e.is_regular_file() && e.path().extension() == ".mvol") found.push_back(e.path().string());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(in);
        }
    }
    return files;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mimir: phenotype regression with calibrated uncertainty from body MRI projections"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed for every random stream (overrides MIMIR_SEED and the config)");

    auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
    std::string out_dir;
    std::optional<std::size_t> n_subjects;
    phantom->add_option("--out", out_dir, "existing output directory")->required();
    phantom->add_option("-n,--n-subjects", n_subjects, "number of subjects");

    auto* project = app.add_subcommand("project", "compute the projection tile of one volume");
    std::string volume_path, tile_path, pgm_prefix;
    bool raw_tile = false;
    project->add_option("volume", volume_path, "MVOL file")->required();
    project->add_option("--out", tile_path, "MTIL output file")->required();
    project->add_option("--pgm", pgm_prefix, "also write <prefix>_water.pgm and <prefix>_fat.pgm");
    project->add_flag("--full-size", raw_tile, "keep the (H+W) x D tile instead of resizing to the network input");

    auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
    std::string data_dir, folds_path;
    std::optional<std::size_t> k;
    std::optional<std::string> strata;
    cv->add_option("--data", data_dir, "dataset directory")->required();
    cv->add_option("--out", out_dir, "existing output directory")->required();
    cv->add_option("-k,--folds", k, "number of folds");
    cv->add_option("--strata", strata, "stratification target, or 'none'");
    cv->add_option("--fold-file", folds_path, "use this subject_id,fold CSV instead of generating folds")
        ->check(CLI::ExistingFile);

    auto* train_cmd = app.add_subcommand("train", "train one model on every usable subject");
    std::string checkpoint_out, log_path;
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", checkpoint_out, "checkpoint output file")->required();
    train_cmd->add_option("--log", log_path, "training log CSV");

    auto* calibrate = app.add_subcommand("calibrate", "fit calibration factors on labelled data");
    std::string checkpoint_in, csv_out;
    std::optional<std::size_t> fold_id;
    calibrate->add_option("--checkpoint", checkpoint_in, "input checkpoint")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--data", data_dir, "dataset directory")->required();
    calibrate->add_option("--out", checkpoint_out, "calibrated checkpoint output file")->required();
    calibrate->add_option("--fold-file", folds_path, "subject_id,fold CSV")->check(CLI::ExistingFile);
    calibrate->add_option("--fold", fold_id, "calibrate on this fold only (needs --fold-file)");
    calibrate->add_option("--csv", csv_out, "also write target,factor,n_points");

    auto* predict_cmd = app.add_subcommand("predict", "predict phenotypes with confidence intervals");
    std::vector<std::string> volume_inputs;
    std::string predictions_out;
    std::optional<double> level;
    predict_cmd->add_option("--checkpoint", checkpoint_in, "checkpoint file")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("volumes", volume_inputs, "MVOL files or directories of them");
    predict_cmd->add_option("--out", predictions_out, "predictions CSV")->required();
    predict_cmd->add_option("--level", level, "confidence level in (0, 1)");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against labels");
    std::string labels_path, registry_path, report_out;
    evaluate_cmd->add_option("--predictions", predictions_out, "predictions CSV")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--labels", labels_path, "labels CSV")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--registry", registry_path, "target registry (default: inferred)")->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--out", report_out, "report CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        EngineConfig config = make_config(config_path, seed);

        if (*phantom) {
            if (n_subjects) config.phantom.n_subjects = *n_subjects;
            require_dir(out_dir, "output directory");
            write_phantom_dataset(out_dir, config);
            std::cerr << "wrote " << config.phantom.n_subjects << " subjects to " << out_dir << '\n';
        } else if (*project) {
            require_parent(tile_path);
            const VolumeGrid volume = load_volume(volume_path);
            const ProjectionTile tile = raw_tile ? mimir::project(volume) : prepare_tile(volume, config.network);
            save_tile(tile_path, tile);
            if (!pgm_prefix.empty()) {
                write_binary_file(pgm_prefix + "_water.pgm", tile_channel_pgm(tile, 0));
                write_binary_file(pgm_prefix + "_fat.pgm", tile_channel_pgm(tile, 1));
            }
        } else if (*cv) {
            if (k) config.folds = *k;
            if (strata) config.strata_key = (*strata == "none") ? std::nullopt : std::optional<std::string>(*strata);
            config.validate();
            require_dir(data_dir, "data directory");
            require_dir(out_dir, "output directory");
            const Dataset data = load_dataset(data_dir, config.network).filtered(config.groups);
            std::optional<FoldAssignment> folds;
            if (!folds_path.empty()) folds = parse_folds_csv(read_text_file(folds_path), data.labels.subjects);
            const CvResult result = cross_validate(data, config, folds);
            const std::string dir = out_dir + "/";
            write_text_file(dir + "folds.csv", folds_csv(result.folds, data.labels.subjects));
            std::string provenance = "fold,subject_id\n";
            for (const auto& run : result.runs) {
                const std::string f = std::to_string(run.fold);
                save_checkpoint(dir + "fold_" + f + ".mckp", run.checkpoint);
                write_text_file(dir + "fold_" + f + "_log.csv", training_log_csv(run.log));
                write_text_file(dir + "fold_" + f + "_calibration.csv",
                                calibration_csv(run.checkpoint.calibration, data.registry.names()));
                for (std::size_t i : run.training_rows) provenance += f + "," + data.labels.subjects[i] + "\n";
            }
            write_text_file(dir + "training_subjects.csv", provenance);
            write_text_file(dir + "predictions.csv", result.pooled.to_csv());
            write_text_file(dir + "report.csv", result.report.to_csv());
            std::cout << result.report.to_csv();
        } else if (*train_cmd) {
            config.validate();
            require_dir(data_dir, "data directory");
            require_parent(checkpoint_out);
            const Dataset data = load_dataset(data_dir, config.network).filtered(config.groups);
            NetworkConfig net = config.network;
            net.n_targets = data.registry.size();
            FoldAssignment all{1, std::vector<std::size_t>(data.labels.n_subjects(), 0)};
            const TrainResult trained = train(data.tiles, data.labels, all, std::nullopt, net, config.training);
            save_checkpoint(checkpoint_out, make_checkpoint(data.registry, trained, net, config.training));
            if (!log_path.empty()) write_text_file(log_path, training_log_csv(trained.log));
        } else if (*calibrate) {
            require_dir(data_dir, "data directory");
            require_parent(checkpoint_out);
            if (fold_id && folds_path.empty()) throw UsageError("--fold needs --fold-file");
            ModelCheckpoint checkpoint = load_checkpoint(checkpoint_in);
            const Dataset data = load_dataset(data_dir, checkpoint.network);
            std::vector<std::size_t> rows;
            std::string source = "all";
            if (fold_id) {
                const FoldAssignment folds = parse_folds_csv(read_text_file(folds_path), data.labels.subjects);
                if (*fold_id >= folds.k) throw UsageError("--fold out of range");
                rows = folds.members(*fold_id);
                source = "fold " + std::to_string(*fold_id);
            } else {
                for (std::size_t i = 0; i < data.labels.n_subjects(); ++i) rows.push_back(i);
            }
            std::vector<ProjectionTile> tiles;
            std::vector<std::string> ids;
            for (std::size_t i : rows) {
                tiles.push_back(data.tiles[i]);
                ids.push_back(data.labels.subjects[i]);
            }
            checkpoint.calibration = CalibrationFactors::identity(checkpoint.registry.size());
            const PredictionTable raw = mimir::predict(checkpoint, tiles, ids, config.level);
            checkpoint.calibration = calibrate_from(checkpoint, raw, data.labels, source);
            save_checkpoint(checkpoint_out, checkpoint);
            if (!csv_out.empty()) write_text_file(csv_out, calibration_csv(checkpoint.calibration, checkpoint.registry.names()));
        } else if (*predict_cmd) {
            require_parent(predictions_out);
            const double lvl = level.value_or(config.level);
            normal_quantile(lvl);
            const auto start = std::chrono::steady_clock::now();
            const ModelCheckpoint checkpoint = load_checkpoint(checkpoint_in);
            const std::vector<std::string> files = collect_volumes(volume_inputs);
            std::vector<ProjectionTile> tiles(files.size());
            std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
            for (std::size_t i = 0; i < files.size(); ++i) {
                try {
                    tiles[i] = prepare_tile(load_volume(files[i]), checkpoint.network);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
            std::vector<ProjectionTile> ok_tiles;
            std::vector<std::string> ids;
            std::size_t failed = 0;
            for (std::size_t i = 0; i < files.size(); ++i) {
                if (!errors[i].empty()) {
                    std::cerr << "skipped " << files[i] << ": " << errors[i] << '\n';
                    ++failed;
                    continue;
                }
                ok_tiles.push_back(std::move(tiles[i]));
                ids.push_back(fs::path(files[i]).stem().string());
            }
            const PredictionTable table = mimir::predict(checkpoint, ok_tiles, ids, lvl);
            write_text_file(predictions_out, table.to_csv());
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cerr << "predicted " << ids.size() << " subjects in " << secs << " s";
            if (secs > 0) std::cerr << " (" << static_cast<double>(ids.size()) / secs << " subjects/s)";
            std::cerr << '\n';
            if (!files.empty() && failed == files.size()) {
                std::cerr << "error: every input volume failed\n";
                return kExitRuntime;
            }
        } else if (*evaluate_cmd) {
            const PredictionTable table = PredictionTable::parse_csv(read_text_file(predictions_out));
            const LabelMatrix labels = parse_labels_csv(read_text_file(labels_path));
            const TargetRegistry registry =
                registry_path.empty() ? infer_registry(labels) : TargetRegistry::parse(read_text_file(registry_path));
            const MetricsReport report = evaluate(table, labels, registry);
            if (report_out.empty()) {
                std::cout << report.to_csv();
            } else {
                require_parent(report_out);
                write_text_file(report_out, report.to_csv());
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
