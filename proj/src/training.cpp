#include "mimir/training.hpp"

#include <cmath>
#include <sstream>

#include "mimir/error.hpp"
#include "mimir/rng.hpp"
#include "mimir/text.hpp"

namespace mimir {

TrainingConfig TrainingConfig::full_scale() {
    TrainingConfig c;
    c.total_iterations = 10000;
    c.stage1_iterations = 8000;
    return c;
}

void TrainingConfig::validate() const {
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (!(lr_stage1 > 0.0) || !(lr_stage2 > 0.0) || lr_stage2 > lr_stage1) {
        throw ValidationError("learning rates must satisfy 0 < lr_stage2 <= lr_stage1");
    }
    if (total_iterations > 0 && (stage1_iterations == 0 || stage1_iterations > total_iterations)) {
        throw ValidationError("stage1_iterations must be in (0, total_iterations]");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must be in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
    if (augment_shift < 0) throw ValidationError("augment_shift must be >= 0");
}

LossResult nll_loss(std::span<const double> mu, std::span<const double> log_var, std::span<const double> y,
                    std::span<const std::uint8_t> masks) {
    const std::size_t n = mu.size();
    if (log_var.size() != n || y.size() != n || masks.size() != n) {
        throw ValidationError("nll_loss inputs must share one shape");
    }
    LossResult r;
    r.grad_mu.assign(n, 0.0);
    r.grad_log_var.assign(n, 0.0);
    for (std::uint8_t m : masks) {
        if (m > 1) throw ValidationError("nll_loss masks must be 0 or 1");
        r.n_known += m;
    }
    if (r.n_known == 0) {
        r.fully_masked = true;
        return r;
    }
    const double denom = static_cast<double>(r.n_known);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!masks[i]) continue;
        const double resid = y[i] - mu[i];
        const double precision = std::exp(-log_var[i]);
        const double scaled = precision * resid * resid;
        total += 0.5 * scaled + 0.5 * log_var[i];
        r.grad_mu[i] = -precision * resid / denom;
        r.grad_log_var[i] = 0.5 * (1.0 - scaled) / denom;
    }
    r.loss = total / denom;
    return r;
}

AdamState make_adam_state(const ParameterSet& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterSet& params, const ParameterGradients& grads, AdamState& state, double lr,
               const TrainingConfig& config) {
    const std::size_t n = params.tensors.size();
    if (grads.tensors.size() != n || state.first_moment.tensors.size() != n || state.second_moment.tensors.size() != n) {
        throw ValidationError("adam_step: parameter, gradient and moment tensor counts differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto size = params.tensors[i].data.size();
        if (grads.tensors[i].data.size() != size || state.first_moment.tensors[i].data.size() != size ||
            state.second_moment.tensors[i].data.size() != size) {
            throw ValidationError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
        }
    }
    ++state.step;
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = params.tensors[i].data;
        const auto& g = grads.tensors[i].data;
        auto& m = state.first_moment.tensors[i].data;
        auto& v = state.second_moment.tensors[i].data;
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
    ++params.generation;
}

StepResult train_step(const Network& network, ParameterSet& params, AdamState& state, const Batch& batch, double lr,
                      const TrainingConfig& config) {
    ForwardResult out = network.forward(params, batch.inputs, batch.size);
    const LossResult loss = nll_loss(out.mu, out.log_var, batch.y_norm, batch.masks);
    if (loss.fully_masked) return {0.0, false};
    const ParameterGradients grads = network.backward(params, out.cache, loss.grad_mu, loss.grad_log_var);
    adam_step(params, grads, state, lr, config);
    if (!params.all_finite()) throw std::runtime_error("training diverged: non-finite parameters");
    return {loss.loss, true};
}

TrainResult train(std::span<const ProjectionTile> tiles, const LabelMatrix& labels, const FoldAssignment& folds,
                  std::optional<std::size_t> validation_fold, const NetworkConfig& net_config,
                  const TrainingConfig& config) {
    config.validate();
    labels.validate();
    if (tiles.size() != labels.n_subjects()) throw ValidationError("tile count does not match label rows");
    if (net_config.n_targets != labels.n_targets()) throw ValidationError("network target count does not match labels");
    if (folds.fold.size() != labels.n_subjects()) throw ValidationError("fold assignment does not match label rows");
    if (validation_fold && *validation_fold >= folds.k) {
        throw ValidationError("fold id " + std::to_string(*validation_fold) + " out of range for k=" + std::to_string(folds.k));
    }

    std::vector<std::uint8_t> in_training(labels.n_subjects(), 1);
    if (validation_fold) in_training = folds.training_rows(*validation_fold);

    TrainResult result;
    for (std::size_t i = 0; i < labels.n_subjects(); ++i) {
        if (in_training[i] && labels.usable(i)) result.training_rows.push_back(i);
    }
    if (result.training_rows.empty()) throw ValidationError("no usable training rows");
    result.norm = compute_norm_stats(labels, in_training);

    const Network network(net_config);
    result.params = network.init_params(net_config.init_seed);
    AdamState state = make_adam_state(result.params);
    const AugmentOptions augment{config.augment, config.augment_shift};
    std::vector<std::size_t> picks(config.batch_size);
    const auto n_rows = static_cast<double>(result.training_rows.size());

    result.log.reserve(config.total_iterations);
    for (std::size_t it = 0; it < config.total_iterations; ++it) {
        Rng rng = make_rng(config.seed, it);
        for (auto& p : picks) {
            const auto j = static_cast<std::size_t>(uniform01(rng) * n_rows);
            p = result.training_rows[std::min(j, result.training_rows.size() - 1)];
        }
        const Batch batch = make_batch(tiles, labels, result.norm, picks, augment, rng());
        const double lr = config.learning_rate(it);
        const StepResult step = train_step(network, result.params, state, batch, lr, config);
        result.log.push_back({it, lr, step.loss});
    }
    return result;
}

std::string training_log_csv(std::span<const TrainLogEntry> log) {
    std::ostringstream out;
    out << "iteration,lr,loss\n";
    for (const auto& e : log) out << e.iteration << ',' << format_double(e.lr) << ',' << format_double(e.loss) << '\n';
    return out.str();
}

}  // namespace mimir
