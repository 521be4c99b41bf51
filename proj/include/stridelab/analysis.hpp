#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stridelab/core_types.hpp"

namespace stridelab {

/// A feature-map dimension dropped below 1 while propagating through a spec.
class ShapeUnderflow : public std::runtime_error {
 public:
  ShapeUnderflow(std::string dimension, std::size_t layer_index, std::string layer_name);

  const std::string& dimension() const { return dimension_; }
  std::size_t layer_index() const { return layer_index_; }

 private:
  std::string dimension_;
  std::size_t layer_index_;
};

/// floor((r + 2p - d(k-1) - 1) / s) + 1; may be <= 0 when the window does not fit.
std::int64_t conv_output_extent(std::int64_t r, int kernel, int stride, int padding, int dilation);

/// Output shape of a single layer. `layer_index` is only used for error reporting.
TensorShape propagate_shape(const TensorShape& in, const LayerSpec& layer, std::size_t layer_index = 0);

/// Output shape after each layer of the flat list (one entry per layer).
std::vector<TensorShape> layer_shapes(const ModelSpec& spec, const TensorShape& input);

std::uint64_t layer_params(const LayerSpec& layer);
/// MACs of one layer given its output shape.
std::uint64_t layer_flops(const LayerSpec& layer, const TensorShape& out);

struct ComplexityReport {
  TensorShape input_shape;
  std::uint64_t params_total = 0;
  std::vector<std::uint64_t> params_by_layer;
  std::uint64_t flops_total = 0;
  std::vector<std::uint64_t> flops_by_layer;

  bool operator==(const ComplexityReport&) const = default;
};

ComplexityReport count_params(const ModelSpec& spec);
ComplexityReport count_flops(const ModelSpec& spec, const TensorShape& input);
/// Both halves in one report.
ComplexityReport analyze(const ModelSpec& spec, const TensorShape& input);

struct RelativeChange {
  double params_percent = 0.0;
  double flops_percent = 0.0;
};

/// Signed percentage change from a to b.
RelativeChange compare(const ComplexityReport& a, const ComplexityReport& b);

/// 80 mel bins by `frames` frames, single channel.
TensorShape input_for_frames(int frames, int freq_bins = 80);

}  // namespace stridelab
