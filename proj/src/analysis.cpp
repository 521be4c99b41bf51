#include "stridelab/analysis.hpp"

#include <numeric>

namespace stridelab {

ShapeUnderflow::ShapeUnderflow(std::string dimension, std::size_t layer_index, std::string layer_name)
    : std::runtime_error("shape underflow: " + dimension + " < 1 after layer " + std::to_string(layer_index) +
                         " (" + layer_name + ")"),
      dimension_(std::move(dimension)),
      layer_index_(layer_index) {}

std::int64_t conv_output_extent(std::int64_t r, int kernel, int stride, int padding, int dilation) {
  const std::int64_t num = r + 2 * padding - static_cast<std::int64_t>(dilation) * (kernel - 1) - 1;
  // floor division; num may be negative for windows larger than the padded input
  const std::int64_t q = num >= 0 ? num / stride : -((-num + stride - 1) / stride);
  return q + 1;
}

namespace {

void expect_channels(const TensorShape& in, std::int64_t c, const LayerSpec& layer, std::size_t idx) {
  if (in.channels != c) {
    throw std::invalid_argument("layer " + std::to_string(idx) + " (" + layer.name + ") expects " +
                                std::to_string(c) + " channels, got " + std::to_string(in.channels));
  }
}

TensorShape windowed(const TensorShape& in, const LayerSpec& layer, std::size_t idx, std::int64_t channels) {
  const auto f = conv_output_extent(in.freq, layer.kernel.freq, layer.stride.freq(), layer.padding.freq,
                                    layer.dilation.freq);
  const auto t = conv_output_extent(in.time, layer.kernel.time, layer.stride.time(), layer.padding.time,
                                    layer.dilation.time);
  if (f < 1) throw ShapeUnderflow("freq", idx, layer.name);
  if (t < 1) throw ShapeUnderflow("time", idx, layer.name);
  return TensorShape{channels, f, t};
}

}  // namespace

TensorShape propagate_shape(const TensorShape& in, const LayerSpec& layer, std::size_t layer_index) {
  switch (layer.kind) {
    case LayerKind::Conv2D:
    case LayerKind::HierConv2D:
      expect_channels(in, layer.in_channels, layer, layer_index);
      return windowed(in, layer, layer_index, layer.out_channels);
    case LayerKind::MaxPool2D:
      return windowed(in, layer, layer_index, in.channels);
    case LayerKind::BatchNorm:
    case LayerKind::SqueezeExcite:
      expect_channels(in, layer.channels, layer, layer_index);
      return in;
    case LayerKind::Activation:
    case LayerKind::Add:
      return in;
    case LayerKind::StatsPooling:
      return TensorShape{2 * in.channels * in.freq, 1, 1};
    case LayerKind::GlobalAvgPooling:
      return TensorShape{in.channels, 1, 1};
    case LayerKind::FullyConnected: {
      const auto flat = in.channels * in.freq * in.time;
      if (flat != layer.in_dim) {
        throw std::invalid_argument("layer " + std::to_string(layer_index) + " (" + layer.name + ") expects " +
                                    std::to_string(layer.in_dim) + " inputs, got " + std::to_string(flat));
      }
      return TensorShape{layer.out_dim, 1, 1};
    }
  }
  return in;
}

std::vector<TensorShape> layer_shapes(const ModelSpec& spec, const TensorShape& input) {
  std::vector<TensorShape> shapes;
  shapes.reserve(spec.layers.size());
  TensorShape main = input;
  TensorShape shortcut = input;
  int cur_stage = -1;
  int cur_block = -1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.block >= 0 && (layer.stage != cur_stage || layer.block != cur_block)) {
      cur_stage = layer.stage;
      cur_block = layer.block;
      shortcut = main;
    }
    if (layer.role == LayerRole::Shortcut) {
      shortcut = propagate_shape(shortcut, layer, i);
      shapes.push_back(shortcut);
      continue;
    }
    if (layer.kind == LayerKind::Add && !(main == shortcut)) {
      throw std::invalid_argument("residual add '" + layer.name + "': branch " + main.str() + " vs shortcut " +
                                  shortcut.str());
    }
    main = propagate_shape(main, layer, i);
    shapes.push_back(main);
  }
  return shapes;
}

std::uint64_t layer_params(const LayerSpec& l) {
  using u64 = std::uint64_t;
  switch (l.kind) {
    case LayerKind::Conv2D:
      return u64(l.kernel.freq) * u64(l.kernel.time) * u64(l.in_channels / l.groups) * u64(l.out_channels) +
             (l.bias ? u64(l.out_channels) : 0);
    case LayerKind::HierConv2D: {
      const u64 w = u64(l.in_channels / l.scale);
      return u64(l.scale - 1) * (u64(l.kernel.freq) * u64(l.kernel.time) * w * w + (l.bias ? w : 0));
    }
    case LayerKind::BatchNorm:
      return 2 * u64(l.channels);
    case LayerKind::SqueezeExcite: {
      const u64 c = u64(l.channels);
      const u64 h = c / u64(l.reduction);
      return 2 * c * h + h + c;
    }
    case LayerKind::FullyConnected:
      return u64(l.in_dim) * u64(l.out_dim) + (l.bias ? u64(l.out_dim) : 0);
    default:
      return 0;
  }
}

std::uint64_t layer_flops(const LayerSpec& l, const TensorShape& out) {
  using u64 = std::uint64_t;
  const u64 spatial = u64(out.freq) * u64(out.time);
  switch (l.kind) {
    case LayerKind::Conv2D:
      return u64(l.kernel.freq) * u64(l.kernel.time) * u64(l.in_channels / l.groups) * u64(l.out_channels) *
             spatial;
    case LayerKind::HierConv2D: {
      const u64 w = u64(l.in_channels / l.scale);
      return u64(l.scale - 1) * u64(l.kernel.freq) * u64(l.kernel.time) * w * w * spatial;
    }
    case LayerKind::SqueezeExcite: {
      const u64 c = u64(l.channels);
      return 2 * c * (c / u64(l.reduction));
    }
    case LayerKind::FullyConnected:
      return u64(l.in_dim) * u64(l.out_dim);
    default:
      return 0;
  }
}

ComplexityReport count_params(const ModelSpec& spec) {
  ComplexityReport r;
  r.params_by_layer.reserve(spec.layers.size());
  for (const auto& l : spec.layers) r.params_by_layer.push_back(layer_params(l));
  r.params_total = std::accumulate(r.params_by_layer.begin(), r.params_by_layer.end(), std::uint64_t{0});
  return r;
}

ComplexityReport count_flops(const ModelSpec& spec, const TensorShape& input) {
  ComplexityReport r;
  r.input_shape = input;
  const auto shapes = layer_shapes(spec, input);
  r.flops_by_layer.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    r.flops_by_layer.push_back(layer_flops(spec.layers[i], shapes[i]));
  }
  r.flops_total = std::accumulate(r.flops_by_layer.begin(), r.flops_by_layer.end(), std::uint64_t{0});
  return r;
}

ComplexityReport analyze(const ModelSpec& spec, const TensorShape& input) {
  ComplexityReport r = count_flops(spec, input);
  ComplexityReport p = count_params(spec);
  r.params_total = p.params_total;
  r.params_by_layer = std::move(p.params_by_layer);
  return r;
}

RelativeChange compare(const ComplexityReport& a, const ComplexityReport& b) {
  auto pct = [](std::uint64_t from, std::uint64_t to) {
    if (from == 0) return 0.0;
    return (static_cast<double>(to) - static_cast<double>(from)) / static_cast<double>(from) * 100.0;
  };
  return {pct(a.params_total, b.params_total), pct(a.flops_total, b.flops_total)};
}

TensorShape input_for_frames(int frames, int freq_bins) { return TensorShape::make(1, freq_bins, frames); }

}  // namespace stridelab
