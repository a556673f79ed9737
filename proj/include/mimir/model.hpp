#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mimir {

struct ConvBlock {
    std::size_t out_channels = 16;
    bool pool = true;  // 2x2 average pooling after the activation

    bool operator==(const ConvBlock&) const = default;
};

/// MimirNet-S: 3x3 same-padded convolutions with ReLU, optional 2x2 average pooling,
/// global average pooling, and one dense layer emitting T means followed by T log-variances.
struct NetworkConfig {
    std::size_t in_channels = 2;
    std::size_t in_height = 48;
    std::size_t in_width = 32;
    std::vector<ConvBlock> blocks{{16, true}, {32, true}, {64, false}};
    std::size_t n_targets = 1;
    std::uint64_t init_seed = 0;

    std::size_t output_size() const { return 2 * n_targets; }
    /// Throws ValidationError on inconsistent shapes.
    void validate() const;

    bool operator==(const NetworkConfig&) const = default;
};

/// Parses "16p,32p,64" (p = pooled) into blocks.
std::vector<ConvBlock> parse_blocks(const std::string& text);
std::string format_blocks(const std::vector<ConvBlock>& blocks);

/// Storage aligned to Eigen's maximum packet size.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
    std::vector<std::size_t> shape;
    Buffer data;

    bool operator==(const Tensor&) const = default;
};

/// Tensors in fixed order: per conv block a kernel [out, in, 3, 3] and bias [out],
/// then the dense weight [2T, F] and bias [2T]. Rows 0..T-1 of the dense layer produce
/// means, rows T..2T-1 log-variances.
struct ParameterSet {
    std::vector<Tensor> tensors;
    std::uint64_t generation = 0;  // bumped on every in-place update

    std::size_t total_size() const;
    bool all_finite() const;
    /// Same shapes, all zeros.
    ParameterSet zeros_like() const;
    void add(const ParameterSet& other);
    void scale(double factor);
    /// Values rounded through f32, as they are stored in a checkpoint.
    ParameterSet quantized_f32() const;

    bool same_values(const ParameterSet& other) const;
};

using ParameterGradients = ParameterSet;

/// Per-sample intermediate values kept by forward for backward.
struct LayerCache {
    Buffer columns;                   // im2col matrix, (in*9) x (h*w)
    Buffer preact;                    // out x (h*w), before ReLU
};

struct ForwardCache {
    std::size_t batch = 0;
    std::vector<std::vector<LayerCache>> layers;  // [sample][block]
    std::vector<Buffer> features;                // [sample] pooled features
    const void* params_identity = nullptr;
    std::uint64_t params_generation = 0;
};

struct ForwardResult {
    std::vector<double> mu;     // N x T, normalized label space
    std::vector<double> log_var;  // N x T, variance = exp(log_var)
    ForwardCache cache;
};

class Network {
public:
    explicit Network(NetworkConfig config);

    const NetworkConfig& config() const { return config_; }
    std::size_t input_size() const { return config_.in_channels * config_.in_height * config_.in_width; }
    std::size_t feature_size() const;

    /// Kernels and dense mean rows ~ N(0, 2/fan_in); biases and dense log-variance rows zero,
    /// so every initial predicted variance is exactly 1.
    ParameterSet init_params(std::uint64_t seed) const;

    /// Checks tensor count and shapes against the config.
    void check_params(const ParameterSet& params) const;

    /// `inputs` holds n samples of input_size() values each. Samples are evaluated independently.
    ForwardResult forward(const ParameterSet& params, std::span<const double> inputs, std::size_t n,
                          bool keep_cache = true) const;

    /// Gradients summed over the batch. Per-sample gradients are reduced in sample order, so the
    /// result does not depend on the thread count. Samples whose upstream gradient is all zero are
    /// skipped, so appending them leaves the result bit-identical. Throws if `cache` came from other parameters.
    ParameterGradients backward(const ParameterSet& params, const ForwardCache& cache,
                                std::span<const double> grad_mu, std::span<const double> grad_log_var) const;

private:
    struct LayerShape {
        std::size_t in_c, out_c, h, w;  // conv operates at h x w
        bool pool;
        std::size_t out_h, out_w;       // after pooling
    };

    void forward_sample(const ParameterSet& params, const double* input, LayerCache* caches,
                        Buffer& features) const;
    void backward_sample(const ParameterSet& params, const LayerCache* caches, const Buffer& features,
                         const double* grad_out, ParameterGradients& grads) const;

    NetworkConfig config_;
    std::vector<LayerShape> layers_;
};

}  // namespace mimir
