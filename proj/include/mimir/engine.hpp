#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mimir/checkpoint.hpp"
#include "mimir/config.hpp"
#include "mimir/dataset.hpp"
#include "mimir/io.hpp"
#include "mimir/metrics.hpp"
#include "mimir/projection.hpp"
#include "mimir/training.hpp"

namespace mimir {

/// Network input for a volume: projection tile resized to the network's input size.
ProjectionTile prepare_tile(const VolumeGrid& volume, const NetworkConfig& network);

/// Tiles, labels and registry in one aligned set (tiles[i] belongs to labels row i).
struct Dataset {
    TargetRegistry registry;
    LabelMatrix labels;
    std::vector<ProjectionTile> tiles;

    /// Restricts targets to `groups` (all when empty).
    Dataset filtered(std::span<const std::string> groups) const;
};

/// Data directory layout written by the phantom command.
struct DataLayout {
    std::string dir;
    std::string labels() const { return dir + "/labels.csv"; }
    std::string registry() const { return dir + "/registry.txt"; }
    std::string manifest() const { return dir + "/manifest.txt"; }
    std::string volumes() const { return dir + "/volumes"; }
    std::string volume(const std::string& subject_id) const { return volumes() + "/" + subject_id + ".mvol"; }
};

/// Writes volumes, labels.csv, registry.txt and manifest.txt into an existing directory.
void write_phantom_dataset(const std::string& dir, const EngineConfig& config);

/// Loads labels and registry and turns every subject's volume into a tile.
Dataset load_dataset(const std::string& dir, const NetworkConfig& network);

ModelCheckpoint make_checkpoint(const TargetRegistry& registry, const TrainResult& trained, const NetworkConfig& network,
                                const TrainingConfig& training);

/// Predictions in target units. sigma = exp(log_var / 2) * norm std * calibration factor.
/// `fold` fills the fold column (-1 outside cross-validation).
PredictionTable predict(const ModelCheckpoint& checkpoint, std::span<const ProjectionTile> tiles,
                        std::span<const std::string> subject_ids, double level, long long fold = -1);

/// Fits factors from a table predicted with identity calibration against `labels`
/// (matched by subject id and target name).
CalibrationFactors calibrate_from(const ModelCheckpoint& checkpoint, const PredictionTable& uncalibrated,
                                  const LabelMatrix& labels, std::string source);

/// One row per registry target over known labels of subjects present in both tables.
/// Throws ValidationError when no subject ids overlap.
MetricsReport evaluate(const PredictionTable& predictions, const LabelMatrix& labels, const TargetRegistry& registry);

/// Binary when every known value is 0 or 1; used when no registry is at hand.
TargetRegistry infer_registry(const LabelMatrix& labels);

struct FoldRun {
    std::size_t fold = 0;
    ModelCheckpoint checkpoint;
    std::vector<TrainLogEntry> log;
    std::vector<std::size_t> training_rows;
    std::vector<std::size_t> validation_rows;
};

struct CvResult {
    FoldAssignment folds;
    std::vector<FoldRun> runs;
    PredictionTable pooled;  // one row per subject, in subject order
    MetricsReport report;
};

/// Stratified k-fold cross-validation: per fold, train on the rest, predict the held-out fold,
/// calibrate on it, and pool. `folds` replaces the generated split when given.
CvResult cross_validate(const Dataset& data, const EngineConfig& config,
                        const std::optional<FoldAssignment>& folds = std::nullopt);

}  // namespace mimir
