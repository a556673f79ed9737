#include "mimir/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>

#include "mimir/error.hpp"
#include "mimir/rng.hpp"
#include "mimir/text.hpp"

namespace mimir {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;

void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, double* cols) {
    const std::size_t hw = h * w;
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double* plane = x + ci * hw;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
            for (std::size_t kx = 0; kx < kKernel; ++kx) {
                double* row = cols + ((ci * kTaps) + ky * kKernel + kx) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y + ky) - 1;
                    double* dst = row + y * w;
                    if (sy < 0 || sy >= static_cast<long>(h)) {
                        std::fill(dst, dst + w, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(sy) * w;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = static_cast<long>(x + kx) - 1;
                        dst[x] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0 : src[sx];
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, double* x) {
    const std::size_t hw = h * w;
    std::fill(x, x + c * hw, 0.0);
    for (std::size_t ci = 0; ci < c; ++ci) {
        double* plane = x + ci * hw;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
            for (std::size_t kx = 0; kx < kKernel; ++kx) {
                const double* row = cols + ((ci * kTaps) + ky * kKernel + kx) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    double* dst = plane + static_cast<std::size_t>(sy) * w;
                    const double* src = row + y * w;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = static_cast<long>(x + kx) - 1;
                        if (sx >= 0 && sx < static_cast<long>(w)) dst[sx] += src[x];
                    }
                }
            }
        }
    }
}

// Midpoint-split tree sum: a batch concatenated with itself sums to exactly twice the original.
ParameterSet reduce_pairwise(std::vector<ParameterSet>& items, std::size_t begin, std::size_t end,
                             const ParameterSet& like) {
    if (end - begin == 0) return like.zeros_like();
    if (end - begin == 1) return std::move(items[begin]);
    const std::size_t mid = begin + (end - begin) / 2;
    ParameterSet left = reduce_pairwise(items, begin, mid, like);
    left.add(reduce_pairwise(items, mid, end, like));
    return left;
}

}  // namespace

void NetworkConfig::validate() const {
    if (in_channels == 0) throw ValidationError("network input must have at least one channel");
    if (in_height < 8 || in_width < 8) throw ValidationError("network input must be at least 8x8");
    if (blocks.empty()) throw ValidationError("network needs at least one conv block");
    if (n_targets == 0) throw ValidationError("network needs at least one target");
    std::size_t h = in_height;
    std::size_t w = in_width;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].out_channels == 0) {
            throw ValidationError("conv block " + std::to_string(i) + " has zero output channels");
        }
        if (blocks[i].pool) {
            if (h < 2 || w < 2) throw ValidationError("conv block " + std::to_string(i) + " pools a map smaller than 2x2");
            h /= 2;
            w /= 2;
        }
    }
}

std::vector<ConvBlock> parse_blocks(const std::string& text) {
    std::vector<ConvBlock> blocks;
    for (const std::string& raw : split(text, ',')) {
        std::string item = trim(raw);
        if (item.empty()) throw ValidationError("empty conv block in '" + text + "'");
        ConvBlock block;
        block.pool = item.back() == 'p';
        if (block.pool) item.pop_back();
        const long long channels = parse_int(item);
        if (channels <= 0) throw ValidationError("conv block channels must be positive in '" + text + "'");
        block.out_channels = static_cast<std::size_t>(channels);
        blocks.push_back(block);
    }
    return blocks;
}

std::string format_blocks(const std::vector<ConvBlock>& blocks) {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(blocks[i].out_channels);
        if (blocks[i].pool) out += 'p';
    }
    return out;
}

std::size_t ParameterSet::total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.data.size();
    return n;
}

bool ParameterSet::all_finite() const {
    for (const auto& t : tensors) {
        for (double v : t.data) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back({t.shape, Buffer(t.data.size(), 0.0)});
    return out;
}

void ParameterSet::add(const ParameterSet& other) {
    if (other.tensors.size() != tensors.size()) throw ValidationError("parameter sets differ in tensor count");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (other.tensors[i].shape != tensors[i].shape) throw ValidationError("parameter tensor shapes differ");
        auto& dst = tensors[i].data;
        const auto& src = other.tensors[i].data;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    ++generation;
}

void ParameterSet::scale(double factor) {
    for (auto& t : tensors) {
        for (double& v : t.data) v *= factor;
    }
    ++generation;
}

ParameterSet ParameterSet::quantized_f32() const {
    ParameterSet out = *this;
    for (auto& t : out.tensors) {
        for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
    }
    return out;
}

bool ParameterSet::same_values(const ParameterSet& other) const {
    if (tensors.size() != other.tensors.size()) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!(tensors[i] == other.tensors[i])) return false;
    }
    return true;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t c = config_.in_channels;
    std::size_t h = config_.in_height;
    std::size_t w = config_.in_width;
    for (const auto& block : config_.blocks) {
        LayerShape shape{c, block.out_channels, h, w, block.pool, h, w};
        if (block.pool) {
            shape.out_h = h / 2;
            shape.out_w = w / 2;
        }
        layers_.push_back(shape);
        c = block.out_channels;
        h = shape.out_h;
        w = shape.out_w;
    }
}

std::size_t Network::feature_size() const { return layers_.back().out_c; }

ParameterSet Network::init_params(std::uint64_t seed) const {
    ParameterSet params;
    std::uint64_t stream = 0;
    auto he_normal = [&](std::vector<std::size_t> shape, std::size_t fan_in, std::size_t rows_to_fill) {
        Tensor t{std::move(shape), {}};
        std::size_t count = 1;
        for (std::size_t s : t.shape) count *= s;
        t.data.assign(count, 0.0);
        Rng rng = make_rng(seed, stream++);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        const std::size_t row = count / t.shape.front();
        for (std::size_t i = 0; i < rows_to_fill * row; ++i) t.data[i] = dist(rng);
        return t;
    };
    for (const auto& layer : layers_) {
        params.tensors.push_back(he_normal({layer.out_c, layer.in_c, kKernel, kKernel}, layer.in_c * kTaps, layer.out_c));
        params.tensors.push_back({{layer.out_c}, Buffer(layer.out_c, 0.0)});
        ++stream;
    }
    const std::size_t T = config_.n_targets;
    params.tensors.push_back(he_normal({2 * T, feature_size()}, feature_size(), T));
    params.tensors.push_back({{2 * T}, Buffer(2 * T, 0.0)});
    return params;
}

void Network::check_params(const ParameterSet& params) const {
    const std::size_t expected = 2 * layers_.size() + 2;
    if (params.tensors.size() != expected) {
        throw ValidationError("parameter set has " + std::to_string(params.tensors.size()) + " tensors, network needs " +
                              std::to_string(expected));
    }
    auto check = [&](std::size_t i, std::vector<std::size_t> shape) {
        const Tensor& t = params.tensors[i];
        std::size_t count = 1;
        for (std::size_t s : shape) count *= s;
        if (t.shape != shape || t.data.size() != count) {
            throw ValidationError("parameter tensor " + std::to_string(i) + " has the wrong shape");
        }
    };
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        check(2 * l, {layers_[l].out_c, layers_[l].in_c, kKernel, kKernel});
        check(2 * l + 1, {layers_[l].out_c});
    }
    const std::size_t T = config_.n_targets;
    check(2 * layers_.size(), {2 * T, feature_size()});
    check(2 * layers_.size() + 1, {2 * T});
}

void Network::forward_sample(const ParameterSet& params, const double* input, LayerCache* caches,
                             Buffer& features) const {
    Buffer x(input, input + input_size());
    Buffer cols_local;
    Buffer pre_local;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerShape& s = layers_[l];
        const std::size_t hw = s.h * s.w;
        Buffer& cols = caches ? caches[l].columns : cols_local;
        Buffer& pre = caches ? caches[l].preact : pre_local;
        cols.resize(s.in_c * kTaps * hw);
        pre.resize(s.out_c * hw);
        im2col(x.data(), s.in_c, s.h, s.w, cols.data());

        const Tensor& kernel = params.tensors[2 * l];
        const Tensor& bias = params.tensors[2 * l + 1];
        ConstMatMap K(kernel.data.data(), static_cast<Eigen::Index>(s.out_c), static_cast<Eigen::Index>(s.in_c * kTaps));
        ConstMatMap C(cols.data(), static_cast<Eigen::Index>(s.in_c * kTaps), static_cast<Eigen::Index>(hw));
        MatMap Z(pre.data(), static_cast<Eigen::Index>(s.out_c), static_cast<Eigen::Index>(hw));
        Z.noalias() = K * C;
        Z.colwise() += ConstVecMap(bias.data.data(), static_cast<Eigen::Index>(s.out_c));

        if (!s.pool) {
            x.resize(s.out_c * hw);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(pre[i], 0.0);
            continue;
        }
        x.assign(s.out_c * s.out_h * s.out_w, 0.0);
        for (std::size_t c = 0; c < s.out_c; ++c) {
            const double* plane = pre.data() + c * hw;
            double* dst = x.data() + c * s.out_h * s.out_w;
            for (std::size_t y = 0; y < s.out_h; ++y) {
                const double* r0 = plane + (2 * y) * s.w;
                const double* r1 = r0 + s.w;
                for (std::size_t px = 0; px < s.out_w; ++px) {
                    dst[y * s.out_w + px] = 0.25 * (std::max(r0[2 * px], 0.0) + std::max(r0[2 * px + 1], 0.0) +
                                                    std::max(r1[2 * px], 0.0) + std::max(r1[2 * px + 1], 0.0));
                }
            }
        }
    }

    const LayerShape& last = layers_.back();
    const std::size_t area = last.out_h * last.out_w;
    features.assign(last.out_c, 0.0);
    for (std::size_t c = 0; c < last.out_c; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < area; ++i) sum += x[c * area + i];
        features[c] = sum / static_cast<double>(area);
    }
}

ForwardResult Network::forward(const ParameterSet& params, std::span<const double> inputs, std::size_t n,
                               bool keep_cache) const {
    check_params(params);
    if (inputs.size() != n * input_size()) {
        throw ValidationError("forward input has " + std::to_string(inputs.size()) + " values, expected " +
                              std::to_string(n * input_size()));
    }
    const std::size_t T = config_.n_targets;
    const std::size_t F = feature_size();
    ForwardResult result;
    result.mu.assign(n * T, 0.0);
    result.log_var.assign(n * T, 0.0);
    ForwardCache& cache = result.cache;
    cache.batch = n;
    cache.params_identity = &params;
    cache.params_generation = params.generation;
    if (keep_cache) cache.layers.assign(n, std::vector<LayerCache>(layers_.size()));
    cache.features.assign(n, {});

    const Tensor& dense = params.tensors[2 * layers_.size()];
    const Tensor& dense_bias = params.tensors[2 * layers_.size() + 1];
    ConstMatMap Wd(dense.data.data(), static_cast<Eigen::Index>(2 * T), static_cast<Eigen::Index>(F));

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        Buffer& f = cache.features[i];
        forward_sample(params, inputs.data() + i * input_size(), keep_cache ? cache.layers[i].data() : nullptr, f);
        const Eigen::VectorXd out = Wd * ConstVecMap(f.data(), static_cast<Eigen::Index>(F)) +
                                    ConstVecMap(dense_bias.data.data(), static_cast<Eigen::Index>(2 * T));
        for (std::size_t t = 0; t < T; ++t) {
            result.mu[i * T + t] = out[static_cast<Eigen::Index>(t)];
            result.log_var[i * T + t] = out[static_cast<Eigen::Index>(T + t)];
        }
    }
    if (!keep_cache) cache.features.clear();
    return result;
}

void Network::backward_sample(const ParameterSet& params, const LayerCache* caches, const Buffer& features,
                              const double* grad_out, ParameterGradients& grads) const {
    const std::size_t T = config_.n_targets;
    const std::size_t F = feature_size();
    const std::size_t L = layers_.size();

    ConstVecMap g(grad_out, static_cast<Eigen::Index>(2 * T));
    ConstVecMap f(features.data(), static_cast<Eigen::Index>(F));
    MatMap dWd(grads.tensors[2 * L].data.data(), static_cast<Eigen::Index>(2 * T), static_cast<Eigen::Index>(F));
    dWd.noalias() += g * f.transpose();
    VecMap(grads.tensors[2 * L + 1].data.data(), static_cast<Eigen::Index>(2 * T)) += g;
    ConstMatMap Wd(params.tensors[2 * L].data.data(), static_cast<Eigen::Index>(2 * T), static_cast<Eigen::Index>(F));
    const Eigen::VectorXd df = Wd.transpose() * g;

    // gradient w.r.t. the last block's output map (global average pooling)
    const LayerShape& last = layers_.back();
    const std::size_t last_area = last.out_h * last.out_w;
    Buffer dx(last.out_c * last_area);
    for (std::size_t c = 0; c < last.out_c; ++c) {
        std::fill_n(dx.begin() + static_cast<std::ptrdiff_t>(c * last_area), last_area,
                    df[static_cast<Eigen::Index>(c)] / static_cast<double>(last_area));
    }

    Buffer dpre;
    Buffer dcols;
    for (std::size_t l = L; l-- > 0;) {
        const LayerShape& s = layers_[l];
        const std::size_t hw = s.h * s.w;
        const LayerCache& cache = caches[l];
        dpre.assign(s.out_c * hw, 0.0);
        if (s.pool) {
            for (std::size_t c = 0; c < s.out_c; ++c) {
                for (std::size_t y = 0; y < 2 * s.out_h; ++y) {
                    for (std::size_t x = 0; x < 2 * s.out_w; ++x) {
                        dpre[c * hw + y * s.w + x] = 0.25 * dx[(c * s.out_h + y / 2) * s.out_w + x / 2];
                    }
                }
            }
        } else {
            std::copy(dx.begin(), dx.end(), dpre.begin());
        }
        for (std::size_t i = 0; i < dpre.size(); ++i) {
            if (!(cache.preact[i] > 0.0)) dpre[i] = 0.0;
        }

        ConstMatMap dZ(dpre.data(), static_cast<Eigen::Index>(s.out_c), static_cast<Eigen::Index>(hw));
        ConstMatMap C(cache.columns.data(), static_cast<Eigen::Index>(s.in_c * kTaps), static_cast<Eigen::Index>(hw));
        MatMap dK(grads.tensors[2 * l].data.data(), static_cast<Eigen::Index>(s.out_c),
                  static_cast<Eigen::Index>(s.in_c * kTaps));
        dK.noalias() += dZ * C.transpose();
        VecMap(grads.tensors[2 * l + 1].data.data(), static_cast<Eigen::Index>(s.out_c)) += dZ.rowwise().sum();

        if (l == 0) break;
        ConstMatMap K(params.tensors[2 * l].data.data(), static_cast<Eigen::Index>(s.out_c),
                      static_cast<Eigen::Index>(s.in_c * kTaps));
        dcols.resize(s.in_c * kTaps * hw);
        MatMap dC(dcols.data(), static_cast<Eigen::Index>(s.in_c * kTaps), static_cast<Eigen::Index>(hw));
        dC.noalias() = K.transpose() * dZ;
        dx.resize(s.in_c * hw);
        col2im(dcols.data(), s.in_c, s.h, s.w, dx.data());
    }
}

ParameterGradients Network::backward(const ParameterSet& params, const ForwardCache& cache,
                                     std::span<const double> grad_mu, std::span<const double> grad_log_var) const {
    check_params(params);
    if (cache.params_identity != &params || cache.params_generation != params.generation) {
        throw ValidationError("stale forward cache: parameters changed since forward");
    }
    const std::size_t n = cache.batch;
    const std::size_t T = config_.n_targets;
    if (cache.layers.size() != n || cache.features.size() != n) {
        throw ValidationError("forward cache was not kept; call forward with keep_cache");
    }
    if (grad_mu.size() != n * T || grad_log_var.size() != n * T) {
        throw ValidationError("upstream gradient shape does not match the forward batch");
    }

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            if (grad_mu[i * T + t] != 0.0 || grad_log_var[i * T + t] != 0.0) {
                active.push_back(i);
                break;
            }
        }
    }

    std::vector<ParameterGradients> per_sample(active.size());
#pragma omp parallel for schedule(static)
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t i = active[a];
        per_sample[a] = params.zeros_like();
        Buffer grad_out(2 * T);
        for (std::size_t t = 0; t < T; ++t) {
            grad_out[t] = grad_mu[i * T + t];
            grad_out[T + t] = grad_log_var[i * T + t];
        }
        backward_sample(params, cache.layers[i].data(), cache.features[i], grad_out.data(), per_sample[a]);
    }

    ParameterGradients total = reduce_pairwise(per_sample, 0, per_sample.size(), params);
    total.generation = 0;
    return total;
}

}  // namespace mimir
