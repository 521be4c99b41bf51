#include "stridelab/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>

namespace stridelab {

Tensor4::Tensor4(std::int64_t batch, std::int64_t channels, std::int64_t freq, std::int64_t time, double fill)
    : b_(batch), c_(channels), f_(freq), t_(time) {
  if (batch < 1 || channels < 1 || freq < 1 || time < 1) {
    throw std::invalid_argument("tensor dims must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(batch * channels * freq * time), fill);
}

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

constexpr std::uint64_t kDefaultSeed = 0x5EED5EEDull;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::int64_t window_count(std::int64_t padded, std::int64_t span, int stride) {
  std::int64_t n = 0;
  for (std::int64_t p = 0; p + span <= padded; p += stride) ++n;
  return n;
}

struct Geometry {
  std::int64_t fp, tp;  // padded input extent
  std::int64_t fo, to;  // output extent
  int kf, kt, sf, st, df, dt, pf, pt;
};

Geometry geometry_of(const Tensor4& x, const LayerSpec& l) {
  Geometry g{};
  g.kf = l.kernel.freq;
  g.kt = l.kernel.time;
  g.sf = l.stride.freq();
  g.st = l.stride.time();
  g.df = l.dilation.freq;
  g.dt = l.dilation.time;
  g.pf = l.padding.freq;
  g.pt = l.padding.time;
  g.fp = x.freq() + 2 * g.pf;
  g.tp = x.time() + 2 * g.pt;
  g.fo = window_count(g.fp, static_cast<std::int64_t>(g.kf - 1) * g.df + 1, g.sf);
  g.to = window_count(g.tp, static_cast<std::int64_t>(g.kt - 1) * g.dt + 1, g.st);
  if (g.fo < 1 || g.to < 1) {
    throw std::invalid_argument("layer '" + l.name + "': kernel window does not fit the " +
                                std::to_string(x.freq()) + "x" + std::to_string(x.time()) + " input");
  }
  return g;
}

// Copies one batch item into a zero- (or `fill`-) padded buffer of shape [c][fp][tp].
void pad_input(const Tensor4& x, std::int64_t b, const Geometry& g, std::vector<double>& buf, double fill = 0.0) {
  buf.assign(static_cast<std::size_t>(x.channels() * g.fp * g.tp), fill);
  for (std::int64_t c = 0; c < x.channels(); ++c) {
    const double* src = x.plane(b, c);
    double* dst = buf.data() + c * g.fp * g.tp;
    for (std::int64_t f = 0; f < x.freq(); ++f) {
      std::copy_n(src + f * x.time(), x.time(), dst + (f + g.pf) * g.tp + g.pt);
    }
  }
}

template <int KF, int KT>
void accumulate_fixed(double* y, const double* xp, const double* w, const Geometry& g) {
  for (std::int64_t fo = 0; fo < g.fo; ++fo) {
    const double* xr = xp + fo * g.sf * g.tp;
    double* yr = y + fo * g.to;
    if (g.st == 1 && g.dt == 1 && g.df == 1) {
      for (std::int64_t to = 0; to < g.to; ++to) {
        double acc = yr[to];
        for (int kf = 0; kf < KF; ++kf) {
          for (int kt = 0; kt < KT; ++kt) acc += w[kf * KT + kt] * xr[kf * g.tp + to + kt];
        }
        yr[to] = acc;
      }
    } else {
      for (std::int64_t to = 0; to < g.to; ++to) {
        double acc = yr[to];
        for (int kf = 0; kf < KF; ++kf) {
          for (int kt = 0; kt < KT; ++kt) {
            acc += w[kf * KT + kt] * xr[kf * g.df * g.tp + to * g.st + kt * g.dt];
          }
        }
        yr[to] = acc;
      }
    }
  }
}

void accumulate_generic(double* y, const double* xp, const double* w, const Geometry& g) {
  for (int kf = 0; kf < g.kf; ++kf) {
    for (int kt = 0; kt < g.kt; ++kt) {
      const double wv = w[kf * g.kt + kt];
      for (std::int64_t fo = 0; fo < g.fo; ++fo) {
        const double* xr = xp + (fo * g.sf + kf * g.df) * g.tp + kt * g.dt;
        double* yr = y + fo * g.to;
        for (std::int64_t to = 0; to < g.to; ++to) yr[to] += wv * xr[to * g.st];
      }
    }
  }
}

void accumulate_plane(double* y, const double* xp, const double* w, const Geometry& g) {
  if (g.kf == 1 && g.kt == 1) {
    accumulate_fixed<1, 1>(y, xp, w, g);
  } else if (g.kf == 3 && g.kt == 3) {
    accumulate_fixed<3, 3>(y, xp, w, g);
  } else if (g.kf == 7 && g.kt == 7) {
    accumulate_fixed<7, 7>(y, xp, w, g);
  } else {
    accumulate_generic(y, xp, w, g);
  }
}

void require(bool ok, const LayerSpec& l, const std::string& what) {
  if (!ok) throw std::invalid_argument("layer '" + l.name + "': " + what);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

std::uint64_t default_seed() {
  const char* env = std::getenv("STRIDE_LAB_SEED");
  if (env == nullptr || *env == '\0') return kDefaultSeed;
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(env, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || env[used] != '\0') {
    throw std::invalid_argument(std::string("STRIDE_LAB_SEED is not an unsigned integer: ") + env);
  }
  return v;
}

void fill_uniform(std::vector<double>& out, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  for (auto& v : out) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1), identical on every platform
    v = lo + (hi - lo) * u;
  }
}

WeightStore WeightStore::zeros(const ModelSpec& spec) {
  WeightStore ws;
  ws.layers_.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = ws.layers_[i];
    switch (l.kind) {
      case LayerKind::Conv2D:
        p.weight.assign(static_cast<std::size_t>(l.out_channels) * (l.in_channels / l.groups) * l.kernel.freq *
                            l.kernel.time,
                        0.0);
        if (l.bias) p.bias.assign(static_cast<std::size_t>(l.out_channels), 0.0);
        break;
      case LayerKind::HierConv2D: {
        const std::size_t w = static_cast<std::size_t>(l.in_channels / l.scale);
        p.weight.assign(static_cast<std::size_t>(l.scale - 1) * w * w * l.kernel.freq * l.kernel.time, 0.0);
        break;
      }
      case LayerKind::BatchNorm:
        p.scale.assign(static_cast<std::size_t>(l.channels), 1.0);
        p.shift.assign(static_cast<std::size_t>(l.channels), 0.0);
        break;
      case LayerKind::SqueezeExcite: {
        const std::size_t c = static_cast<std::size_t>(l.channels);
        const std::size_t h = c / static_cast<std::size_t>(l.reduction);
        p.weight.assign(h * c, 0.0);
        p.bias.assign(h, 0.0);
        p.weight2.assign(c * h, 0.0);
        p.bias2.assign(c, 0.0);
        break;
      }
      case LayerKind::FullyConnected:
        p.weight.assign(static_cast<std::size_t>(l.in_dim) * l.out_dim, 0.0);
        if (l.bias) p.bias.assign(static_cast<std::size_t>(l.out_dim), 0.0);
        break;
      default:
        break;
    }
  }
  return ws;
}

WeightStore WeightStore::random(const ModelSpec& spec, std::uint64_t seed) {
  WeightStore ws = zeros(spec);
  std::uint64_t state = seed;
  for (auto& p : ws.layers_) {
    const std::uint64_t layer_seed = splitmix64(state);
    std::uint64_t sub = layer_seed;
    for (auto* v : {&p.weight, &p.bias, &p.weight2, &p.bias2}) fill_uniform(*v, splitmix64(sub), -0.1, 0.1);
  }
  return ws;
}

Tensor4 conv2d_forward(const Tensor4& x, const LayerSpec& l, std::span<const double> weights, OpCounter& counter,
                       std::span<const double> bias) {
  require(l.kind == LayerKind::Conv2D, l, "not a Conv2D layer");
  require(x.channels() == l.in_channels, l,
          "expects " + std::to_string(l.in_channels) + " input channels, got " + std::to_string(x.channels()));
  const int groups = l.groups;
  const int cin_g = l.in_channels / groups;
  const int cout_g = l.out_channels / groups;
  const std::size_t ksize = static_cast<std::size_t>(l.kernel.freq) * l.kernel.time;
  require(weights.size() == static_cast<std::size_t>(l.out_channels) * cin_g * ksize, l, "weight size mismatch");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(l.out_channels), l, "bias size mismatch");

  const Geometry g = geometry_of(x, l);
  Tensor4 y(x.batch(), l.out_channels, g.fo, g.to);
  std::vector<double> xp;
  const std::uint64_t per_plane = static_cast<std::uint64_t>(ksize) * g.fo * g.to;
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    pad_input(x, b, g, xp);
    for (int co = 0; co < l.out_channels; ++co) {
      double* yp = y.plane(b, co);
      if (!bias.empty()) std::fill_n(yp, g.fo * g.to, bias[static_cast<std::size_t>(co)]);
      const int first_ci = (co / cout_g) * cin_g;
      for (int j = 0; j < cin_g; ++j) {
        const double* w = weights.data() + (static_cast<std::size_t>(co) * cin_g + j) * ksize;
        accumulate_plane(yp, xp.data() + static_cast<std::int64_t>(first_ci + j) * g.fp * g.tp, w, g);
        counter.multiplies += per_plane;
        counter.adds += per_plane;
      }
    }
  }
  return y;
}

Tensor4 hier_conv_forward(const Tensor4& x, const LayerSpec& l, std::span<const double> weights, OpCounter& counter) {
  require(l.kind == LayerKind::HierConv2D, l, "not a HierConv2D layer");
  require(x.channels() == l.in_channels, l, "input channel mismatch");
  const int s = l.scale;
  const int w = l.in_channels / s;
  const std::size_t per_kernel = static_cast<std::size_t>(w) * w * l.kernel.freq * l.kernel.time;
  require(weights.size() == per_kernel * static_cast<std::size_t>(s - 1), l, "weight size mismatch");

  LayerSpec sub = l;
  sub.kind = LayerKind::Conv2D;
  sub.in_channels = w;
  sub.out_channels = w;
  sub.scale = 1;

  auto slice = [&](int i) {
    Tensor4 t(x.batch(), w, x.freq(), x.time());
    for (std::int64_t b = 0; b < x.batch(); ++b) {
      for (int c = 0; c < w; ++c) std::copy_n(x.plane(b, i * w + c), x.freq() * x.time(), t.plane(b, c));
    }
    return t;
  };

  Tensor4 y(x.batch(), l.out_channels, x.freq(), x.time());
  auto store = [&](const Tensor4& part, int i) {
    require(part.freq() == x.freq() && part.time() == x.time(), l, "split output must keep the input extent");
    for (std::int64_t b = 0; b < x.batch(); ++b) {
      for (int c = 0; c < w; ++c) std::copy_n(part.plane(b, c), x.freq() * x.time(), y.plane(b, i * w + c));
    }
  };

  store(slice(0), 0);
  Tensor4 prev;
  for (int i = 1; i < s; ++i) {
    Tensor4 in = slice(i);
    if (i >= 2) {
      for (std::size_t k = 0; k < in.size(); ++k) in.data()[k] += prev.data()[k];
      counter.adds += in.size();
    }
    prev = conv2d_forward(in, sub, weights.subspan(per_kernel * static_cast<std::size_t>(i - 1), per_kernel),
                          counter);
    store(prev, i);
  }
  return y;
}

Tensor4 batchnorm_forward(const Tensor4& x, std::span<const double> scale, std::span<const double> shift) {
  if (scale.size() != static_cast<std::size_t>(x.channels()) || shift.size() != scale.size()) {
    throw std::invalid_argument("batchnorm parameter size mismatch");
  }
  Tensor4 y = x;
  const std::int64_t n = x.freq() * x.time();
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    for (std::int64_t c = 0; c < x.channels(); ++c) {
      double* p = y.plane(b, c);
      const double a = scale[static_cast<std::size_t>(c)];
      const double s = shift[static_cast<std::size_t>(c)];
      for (std::int64_t i = 0; i < n; ++i) p[i] = a * p[i] + s;
    }
  }
  return y;
}

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor4 maxpool_forward(const Tensor4& x, const LayerSpec& l) {
  require(l.kind == LayerKind::MaxPool2D, l, "not a MaxPool2D layer");
  const Geometry g = geometry_of(x, l);
  Tensor4 y(x.batch(), x.channels(), g.fo, g.to);
  std::vector<double> xp;
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    pad_input(x, b, g, xp, -std::numeric_limits<double>::infinity());
    for (std::int64_t c = 0; c < x.channels(); ++c) {
      const double* src = xp.data() + c * g.fp * g.tp;
      double* dst = y.plane(b, c);
      for (std::int64_t fo = 0; fo < g.fo; ++fo) {
        for (std::int64_t to = 0; to < g.to; ++to) {
          double m = -std::numeric_limits<double>::infinity();
          for (int kf = 0; kf < g.kf; ++kf) {
            for (int kt = 0; kt < g.kt; ++kt) {
              m = std::max(m, src[(fo * g.sf + kf * g.df) * g.tp + to * g.st + kt * g.dt]);
            }
          }
          dst[fo * g.to + to] = m;
        }
      }
    }
  }
  return y;
}

Tensor4 squeeze_excite_forward(const Tensor4& x, const LayerSpec& l, const LayerParams& p, OpCounter& counter) {
  require(l.kind == LayerKind::SqueezeExcite, l, "not a SqueezeExcite layer");
  const std::int64_t c = x.channels();
  require(c == l.channels, l, "channel mismatch");
  const std::int64_t h = c / l.reduction;
  require(p.weight.size() == static_cast<std::size_t>(h * c) && p.weight2.size() == static_cast<std::size_t>(c * h),
          l, "weight size mismatch");
  const std::int64_t n = x.freq() * x.time();
  Tensor4 y = x;
  std::vector<double> z(static_cast<std::size_t>(c)), hidden(static_cast<std::size_t>(h));
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double* src = x.plane(b, ch);
      double sum = 0.0;
      for (std::int64_t i = 0; i < n; ++i) sum += src[i];
      z[static_cast<std::size_t>(ch)] = sum / static_cast<double>(n);
    }
    for (std::int64_t j = 0; j < h; ++j) {
      double acc = p.bias.empty() ? 0.0 : p.bias[static_cast<std::size_t>(j)];
      for (std::int64_t ch = 0; ch < c; ++ch) acc += p.weight[static_cast<std::size_t>(j * c + ch)] * z[ch];
      hidden[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
    }
    counter.multiplies += static_cast<std::uint64_t>(h * c);
    counter.adds += static_cast<std::uint64_t>(h * c);
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double acc = p.bias2.empty() ? 0.0 : p.bias2[static_cast<std::size_t>(ch)];
      for (std::int64_t j = 0; j < h; ++j) acc += p.weight2[static_cast<std::size_t>(ch * h + j)] * hidden[j];
      const double gate = sigmoid(acc);
      double* dst = y.plane(b, ch);
      for (std::int64_t i = 0; i < n; ++i) dst[i] *= gate;
    }
    counter.multiplies += static_cast<std::uint64_t>(c * h);
    counter.adds += static_cast<std::uint64_t>(c * h);
  }
  return y;
}

Tensor4 stats_pooling_forward(const Tensor4& x) {
  if (x.time() < 2) throw std::invalid_argument("statistics pooling needs at least 2 time frames");
  const std::int64_t cf = x.channels() * x.freq();
  const std::int64_t t = x.time();
  Tensor4 y(x.batch(), 2 * cf, 1, 1);
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    const double* src = x.plane(b, 0);
    for (std::int64_t row = 0; row < cf; ++row) {
      const double* r = src + row * t;
      double sum = 0.0;
      for (std::int64_t i = 0; i < t; ++i) sum += r[i];
      const double mean = sum / static_cast<double>(t);
      double sq = 0.0;
      for (std::int64_t i = 0; i < t; ++i) sq += (r[i] - mean) * (r[i] - mean);
      y.at(b, row, 0, 0) = mean;
      y.at(b, cf + row, 0, 0) = std::sqrt(sq / static_cast<double>(t) + 1e-10);
    }
  }
  return y;
}

Tensor4 global_avg_pool_forward(const Tensor4& x) {
  Tensor4 y(x.batch(), x.channels(), 1, 1);
  const std::int64_t n = x.freq() * x.time();
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    for (std::int64_t c = 0; c < x.channels(); ++c) {
      const double* p = x.plane(b, c);
      double sum = 0.0;
      for (std::int64_t i = 0; i < n; ++i) sum += p[i];
      y.at(b, c, 0, 0) = sum / static_cast<double>(n);
    }
  }
  return y;
}

Tensor4 fully_connected_forward(const Tensor4& x, const LayerSpec& l, const LayerParams& p, OpCounter& counter) {
  require(l.kind == LayerKind::FullyConnected, l, "not a FullyConnected layer");
  const std::int64_t in = x.channels() * x.freq() * x.time();
  require(in == l.in_dim, l, "expects " + std::to_string(l.in_dim) + " inputs, got " + std::to_string(in));
  require(p.weight.size() == static_cast<std::size_t>(l.in_dim) * l.out_dim, l, "weight size mismatch");
  Tensor4 y(x.batch(), l.out_dim, 1, 1);
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    const double* src = x.plane(b, 0);
    for (int o = 0; o < l.out_dim; ++o) {
      const double* w = p.weight.data() + static_cast<std::size_t>(o) * l.in_dim;
      double acc = p.bias.empty() ? 0.0 : p.bias[static_cast<std::size_t>(o)];
      for (std::int64_t i = 0; i < in; ++i) acc += w[i] * src[i];
      y.at(b, o, 0, 0) = acc;
    }
    counter.multiplies += static_cast<std::uint64_t>(in) * l.out_dim;
    counter.adds += static_cast<std::uint64_t>(in) * l.out_dim;
  }
  return y;
}

ConvGradients conv2d_backward(const Tensor4& x, const LayerSpec& l, std::span<const double> weights,
                              const Tensor4& dy) {
  require(l.kind == LayerKind::Conv2D, l, "not a Conv2D layer");
  const Geometry g = geometry_of(x, l);
  require(dy.batch() == x.batch() && dy.channels() == l.out_channels && dy.freq() == g.fo && dy.time() == g.to, l,
          "output gradient shape mismatch");
  const int cin_g = l.in_channels / l.groups;
  const int cout_g = l.out_channels / l.groups;
  const std::size_t ksize = static_cast<std::size_t>(g.kf) * g.kt;

  ConvGradients out{std::vector<double>(weights.size(), 0.0), Tensor4(x.batch(), x.channels(), x.freq(), x.time())};
  std::vector<double> xp;
  std::vector<double> dxp;
  for (std::int64_t b = 0; b < x.batch(); ++b) {
    pad_input(x, b, g, xp);
    dxp.assign(xp.size(), 0.0);
    for (int co = 0; co < l.out_channels; ++co) {
      const double* gy = dy.plane(b, co);
      const int first_ci = (co / cout_g) * cin_g;
      for (int j = 0; j < cin_g; ++j) {
        const std::int64_t base = static_cast<std::int64_t>(first_ci + j) * g.fp * g.tp;
        for (int kf = 0; kf < g.kf; ++kf) {
          for (int kt = 0; kt < g.kt; ++kt) {
            const std::size_t wi = (static_cast<std::size_t>(co) * cin_g + j) * ksize + kf * g.kt + kt;
            double acc = 0.0;
            for (std::int64_t fo = 0; fo < g.fo; ++fo) {
              for (std::int64_t to = 0; to < g.to; ++to) {
                const std::int64_t xi = base + (fo * g.sf + kf * g.df) * g.tp + to * g.st + kt * g.dt;
                const double d = gy[fo * g.to + to];
                acc += d * xp[static_cast<std::size_t>(xi)];
                dxp[static_cast<std::size_t>(xi)] += d * weights[wi];
              }
            }
            out.weights[wi] += acc;
          }
        }
      }
    }
    for (std::int64_t c = 0; c < x.channels(); ++c) {
      for (std::int64_t f = 0; f < x.freq(); ++f) {
        for (std::int64_t t = 0; t < x.time(); ++t) {
          out.input.at(b, c, f, t) = dxp[static_cast<std::size_t>((c * g.fp + f + g.pf) * g.tp + t + g.pt)];
        }
      }
    }
  }
  return out;
}

GradcheckReport gradcheck_conv(const LayerSpec& layer, const TensorShape& input, std::size_t samples,
                               double tolerance, std::uint64_t seed) {
  constexpr double h = 1e-5;
  std::uint64_t state = seed;
  Tensor4 x(1, input.channels, input.freq, input.time);
  fill_uniform(x.data(), splitmix64(state), -1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(layer.out_channels) * (layer.in_channels / layer.groups) *
                        layer.kernel.freq * layer.kernel.time);
  fill_uniform(w, splitmix64(state), -0.5, 0.5);

  auto loss = [&]() {
    OpCounter scratch;
    const Tensor4 y = conv2d_forward(x, layer, w, scratch);
    double s = 0.0;
    for (double v : y.data()) s += v * v;
    return s;
  };

  OpCounter scratch;
  Tensor4 dy = conv2d_forward(x, layer, w, scratch);
  for (auto& v : dy.data()) v *= 2.0;
  const ConvGradients grads = conv2d_backward(x, layer, w, dy);

  GradcheckReport report;
  std::mt19937_64 pick(splitmix64(state));
  auto check = [&](std::vector<double>& values, const std::vector<double>& analytic, const char* what) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > samples) {
      for (std::size_t i = 0; i < samples; ++i) std::swap(idx[i], idx[i + pick() % (idx.size() - i)]);
      idx.resize(samples);
    }
    for (std::size_t i : idx) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss();
      values[i] = orig - h;
      const double down = loss();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked;
      if (rel > tolerance) {
        report.failures.push_back(std::string(what) + "[" + std::to_string(i) + "]: analytic " + std::to_string(a) +
                                  " numeric " + std::to_string(numeric));
      }
    }
  };
  check(w, grads.weights, "weight");
  check(x.data(), grads.input.data(), "input");
  return report;
}

namespace {

Tensor4 apply_layer(const Tensor4& x, const LayerSpec& l, const LayerParams& p, OpCounter& counter) {
  switch (l.kind) {
    case LayerKind::Conv2D: return conv2d_forward(x, l, p.weight, counter, p.bias);
    case LayerKind::HierConv2D: return hier_conv_forward(x, l, p.weight, counter);
    case LayerKind::BatchNorm: return batchnorm_forward(x, p.scale, p.shift);
    case LayerKind::Activation: return relu_forward(x);
    case LayerKind::MaxPool2D: return maxpool_forward(x, l);
    case LayerKind::SqueezeExcite: return squeeze_excite_forward(x, l, p, counter);
    case LayerKind::StatsPooling: return stats_pooling_forward(x);
    case LayerKind::GlobalAvgPooling: return global_avg_pool_forward(x);
    case LayerKind::FullyConnected: return fully_connected_forward(x, l, p, counter);
    case LayerKind::Add: break;
  }
  throw std::logic_error("add layers are merged by the executor");
}

Tensor4 execute(std::span<const LayerSpec> layers, std::span<const LayerParams> params, const Tensor4& x,
                OpCounter& counter, std::vector<TensorShape>* shapes) {
  if (params.size() != layers.size()) throw std::invalid_argument("one parameter set per layer required");
  Tensor4 main = x;
  Tensor4 shortcut = x;
  int stage = -1;
  int block = -1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.block >= 0 && (l.stage != stage || l.block != block)) {
      stage = l.stage;
      block = l.block;
      shortcut = main;
    }
    Tensor4* result = &main;
    if (l.role == LayerRole::Shortcut) {
      shortcut = apply_layer(shortcut, l, params[i], counter);
      result = &shortcut;
    } else if (l.kind == LayerKind::Add) {
      if (main.batch() != shortcut.batch() || !(main.shape() == shortcut.shape())) {
        throw std::invalid_argument("residual add '" + l.name + "': branch " + main.shape().str() +
                                    " vs shortcut " + shortcut.shape().str());
      }
      for (std::size_t k = 0; k < main.size(); ++k) main.data()[k] += shortcut.data()[k];
      counter.adds += main.size();
    } else {
      main = apply_layer(main, l, params[i], counter);
    }
    if (!result->all_finite()) throw std::runtime_error("non-finite values after layer '" + l.name + "'");
    if (shapes) shapes->push_back(result->shape());
  }
  return main;
}

}  // namespace

Tensor4 residual_block_forward(const Tensor4& x, std::span<const LayerSpec> block, std::span<const LayerParams> params,
                               OpCounter& counter) {
  if (block.empty()) throw std::invalid_argument("empty residual block");
  const int stage = block.front().stage;
  const int index = block.front().block;
  bool has_add = false;
  for (const auto& l : block) {
    if (l.block < 0 || l.stage != stage || l.block != index) {
      throw std::invalid_argument("layer '" + l.name + "' does not belong to the block");
    }
    has_add = has_add || l.kind == LayerKind::Add;
  }
  if (!has_add) throw std::invalid_argument("residual block has no add layer");
  return execute(block, params, x, counter, nullptr);
}

ModelRun run_model(const ModelSpec& spec, const Tensor4& x, const WeightStore& weights) {
  if (weights.size() != spec.layers.size()) throw std::invalid_argument("weight store does not match the spec");
  ModelRun run;
  const Tensor4 out = execute(spec.layers, weights.layers(), x, run.counter, &run.shapes);
  const std::int64_t dim = out.channels() * out.freq() * out.time();
  for (std::int64_t b = 0; b < out.batch(); ++b) {
    run.embeddings.emplace_back(out.plane(b, 0), out.plane(b, 0) + dim);
  }
  return run;
}

ModelRun run_model(const ModelSpec& spec, const Tensor4& x, std::uint64_t seed) {
  return run_model(spec, x, WeightStore::random(spec, seed));
}

}  // namespace stridelab
