#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stridelab/core_types.hpp"

namespace stridelab {

/// Dense (batch, channels, freq, time) tensor, row-major, double precision.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::int64_t batch, std::int64_t channels, std::int64_t freq, std::int64_t time, double fill = 0.0);

  std::int64_t batch() const { return b_; }
  std::int64_t channels() const { return c_; }
  std::int64_t freq() const { return f_; }
  std::int64_t time() const { return t_; }
  TensorShape shape() const { return TensorShape{c_, f_, t_}; }  // per batch item
  std::size_t size() const { return data_.size(); }

  double& at(std::int64_t b, std::int64_t c, std::int64_t f, std::int64_t t) { return data_[index(b, c, f, t)]; }
  double at(std::int64_t b, std::int64_t c, std::int64_t f, std::int64_t t) const {
    return data_[index(b, c, f, t)];
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double* plane(std::int64_t b, std::int64_t c) { return data_.data() + index(b, c, 0, 0); }
  const double* plane(std::int64_t b, std::int64_t c) const { return data_.data() + index(b, c, 0, 0); }

  bool all_finite() const;

 private:
  std::size_t index(std::int64_t b, std::int64_t c, std::int64_t f, std::int64_t t) const {
    return static_cast<std::size_t>(((b * c_ + c) * f_ + f) * t_ + t);
  }

  std::int64_t b_ = 0, c_ = 0, f_ = 0, t_ = 0;
  std::vector<double> data_;
};

struct OpCounter {
  std::uint64_t multiplies = 0;
  std::uint64_t adds = 0;

  OpCounter& operator+=(const OpCounter& o) {
    multiplies += o.multiplies;
    adds += o.adds;
    return *this;
  }
};

/// Trainable and folded-statistics values for one layer. Unused fields stay empty.
///   Conv2D:        weight [out][in/groups][kf][kt], optional bias [out]
///   HierConv2D:    weight [(scale-1)][w][w][kf][kt] with w = channels/scale
///   BatchNorm:     scale [c], shift [c]  (y = scale * x + shift)
///   SqueezeExcite: weight [c/r][c], bias [c/r], weight2 [c][c/r], bias2 [c]
///   FullyConnected weight [out][in], bias [out]
struct LayerParams {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> weight2;
  std::vector<double> bias2;
  std::vector<double> scale;
  std::vector<double> shift;
};

/// Per-layer parameters for a whole spec.
class WeightStore {
 public:
  /// Weights and biases uniform in [-0.1, 0.1] from a 64-bit seed; BatchNorm is the identity map.
  static WeightStore random(const ModelSpec& spec, std::uint64_t seed);
  /// Everything zero except BatchNorm, which stays the identity map.
  static WeightStore zeros(const ModelSpec& spec);

  const LayerParams& operator[](std::size_t i) const { return layers_.at(i); }
  LayerParams& operator[](std::size_t i) { return layers_.at(i); }
  std::size_t size() const { return layers_.size(); }
  const std::vector<LayerParams>& layers() const { return layers_; }

 private:
  std::vector<LayerParams> layers_;
};

/// Seed from STRIDE_LAB_SEED when set, otherwise a fixed default.
std::uint64_t default_seed();

/// Fills `out` with uniform values in [lo, hi) from a seeded 64-bit Mersenne twister.
void fill_uniform(std::vector<double>& out, std::uint64_t seed, double lo, double hi);

Tensor4 conv2d_forward(const Tensor4& x, const LayerSpec& layer, std::span<const double> weights, OpCounter& counter,
                       std::span<const double> bias = {});
Tensor4 hier_conv_forward(const Tensor4& x, const LayerSpec& layer, std::span<const double> weights,
                          OpCounter& counter);
Tensor4 batchnorm_forward(const Tensor4& x, std::span<const double> scale, std::span<const double> shift);
Tensor4 relu_forward(const Tensor4& x);
Tensor4 maxpool_forward(const Tensor4& x, const LayerSpec& layer);
Tensor4 squeeze_excite_forward(const Tensor4& x, const LayerSpec& layer, const LayerParams& p, OpCounter& counter);
/// (b, 2*C*F, 1, 1): per (c, f) means over time, then population standard deviations.
Tensor4 stats_pooling_forward(const Tensor4& x);
Tensor4 global_avg_pool_forward(const Tensor4& x);
Tensor4 fully_connected_forward(const Tensor4& x, const LayerSpec& layer, const LayerParams& p, OpCounter& counter);

struct ConvGradients {
  std::vector<double> weights;
  Tensor4 input;
};

/// Gradients of sum(dy * conv(x, w)) with respect to w and x.
ConvGradients conv2d_backward(const Tensor4& x, const LayerSpec& layer, std::span<const double> weights,
                              const Tensor4& dy);

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<std::string> failures;  // "weight[i]" / "input[i]" with both values
  bool passed() const { return failures.empty(); }
};

/// Compares analytic gradients of sum(y^2) with central differences (h = 1e-5) on up to
/// `samples` coordinates of the weights and of the input.
GradcheckReport gradcheck_conv(const LayerSpec& layer, const TensorShape& input, std::size_t samples,
                               double tolerance, std::uint64_t seed);

/// Runs one residual block (its branch, shortcut and merge layers) on x.
Tensor4 residual_block_forward(const Tensor4& x, std::span<const LayerSpec> block, std::span<const LayerParams> params,
                               OpCounter& counter);

struct ModelRun {
  std::vector<std::vector<double>> embeddings;  // one per batch item
  OpCounter counter;
  std::vector<TensorShape> shapes;  // output shape of every layer
};

ModelRun run_model(const ModelSpec& spec, const Tensor4& x, const WeightStore& weights);
ModelRun run_model(const ModelSpec& spec, const Tensor4& x, std::uint64_t seed);

}  // namespace stridelab
