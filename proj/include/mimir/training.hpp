#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mimir/dataset.hpp"
#include "mimir/model.hpp"
#include "mimir/projection.hpp"

namespace mimir {

struct TrainingConfig {
    std::size_t batch_size = 32;
    std::size_t total_iterations = 2000;
    std::size_t stage1_iterations = 1600;
    double lr_stage1 = 5e-5;
    double lr_stage2 = 5e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool augment = true;
    int augment_shift = 8;
    std::uint64_t seed = 0;

    /// Full-scale schedule: 8,000 iterations at 5e-5 followed by 2,000 at 5e-6.
    static TrainingConfig full_scale();

    void validate() const;
    double learning_rate(std::size_t iteration) const {
        return iteration < stage1_iterations ? lr_stage1 : lr_stage2;
    }

    bool operator==(const TrainingConfig&) const = default;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad_mu;
    std::vector<double> grad_log_var;
    std::size_t n_known = 0;
    bool fully_masked = false;
};

/// Masked Gaussian negative log-likelihood in normalized label space, without the 0.5*ln(2*pi)
/// constant, averaged over known entries:
///
///   loss = sum_m [ 0.5 * exp(-s) * (y - mu)^2 + 0.5 * s ] / max(1, sum m)
///
/// All spans are N x T row-major. A batch without known entries yields zero loss and gradients.
LossResult nll_loss(std::span<const double> mu, std::span<const double> log_var, std::span<const double> y,
                    std::span<const std::uint8_t> masks);

struct AdamState {
    ParameterSet first_moment;
    ParameterSet second_moment;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const ParameterSet& params);

/// Bias-corrected Adam, element-wise.
void adam_step(ParameterSet& params, const ParameterGradients& grads, AdamState& state, double lr,
               const TrainingConfig& config);

struct StepResult {
    double loss = 0.0;
    bool applied = false;  // false when the batch had no known labels
};

/// One forward/loss/backward/update cycle. A fully masked batch leaves parameters and optimizer
/// state untouched.
StepResult train_step(const Network& network, ParameterSet& params, AdamState& state, const Batch& batch, double lr,
                      const TrainingConfig& config);

struct TrainLogEntry {
    std::size_t iteration = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    ParameterSet params;
    NormStats norm;
    std::vector<TrainLogEntry> log;
    std::vector<std::size_t> training_rows;  // subjects batches were drawn from
};

/// Trains on every usable subject outside `validation_fold` (all usable subjects when nullopt).
/// Batches are drawn uniformly with replacement; the draw for iteration i depends only on
/// (config.seed, i).
TrainResult train(std::span<const ProjectionTile> tiles, const LabelMatrix& labels, const FoldAssignment& folds,
                  std::optional<std::size_t> validation_fold, const NetworkConfig& net_config,
                  const TrainingConfig& config);

/// Training log as CSV: iteration,lr,loss.
std::string training_log_csv(std::span<const TrainLogEntry> log);

}  // namespace mimir
