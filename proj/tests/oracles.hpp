#pragma once

// Brute-force reference implementations shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "stridelab/core_types.hpp"
#include "stridelab/metrics.hpp"
#include "stridelab/numkernel.hpp"

namespace oracle {

struct Rates {
  double threshold;
  double p_miss;
  double p_fa;
};

// Counts misses and false accepts directly for every candidate threshold.
inline std::vector<Rates> rates(const stridelab::TrialScoreSet& set) {
  std::set<double> cand;
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& t : set.trials()) {
    cand.insert(t.score);
    hi = std::max(hi, t.score);
  }
  cand.insert(std::nextafter(hi, std::numeric_limits<double>::infinity()));
  std::vector<Rates> out;
  for (double thr : cand) {
    double miss = 0, fa = 0, nt = 0, nn = 0;
    for (const auto& t : set.trials()) {
      if (t.is_target) {
        nt += 1;
        if (t.score < thr) miss += 1;
      } else {
        nn += 1;
        if (t.score >= thr) fa += 1;
      }
    }
    out.push_back({thr, miss / nt, fa / nn});
  }
  return out;
}

inline double eer(const stridelab::TrialScoreSet& set) {
  const auto r = rates(set);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].p_fa > r[i].p_miss) continue;
    if (i == 0 || r[i].p_fa == r[i].p_miss) return r[i].p_fa;
    // linear interpolation of both error curves between the two neighbouring thresholds
    const double d0 = r[i - 1].p_fa - r[i - 1].p_miss;
    const double d1 = r[i].p_fa - r[i].p_miss;
    const double w = d0 / (d0 - d1);
    return (1 - w) * r[i - 1].p_fa + w * r[i].p_fa;
  }
  return 0.0;
}

inline double min_dcf(const stridelab::TrialScoreSet& set, double p, double c_fa, double c_miss) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rates(set)) {
    best = std::min(best, c_miss * r.p_miss * p + c_fa * r.p_fa * (1 - p));
  }
  return best / std::min(c_miss * p, c_fa * (1 - p));
}

// Random labelled trials; with `ties` the scores are rounded to a 0.5 grid.
inline stridelab::TrialScoreSet random_trials(std::mt19937_64& rng, bool ties) {
  std::uniform_int_distribution<int> size(2, 60);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const int n = size(rng);
  const double shift = std::uniform_real_distribution<double>(-1.0, 3.0)(rng);
  std::vector<stridelab::Trial> trials;
  for (int i = 0; i < n; ++i) {
    const bool target = i == 0 ? true : (i == 1 ? false : coin(rng));
    double s = noise(rng) + (target ? shift : 0.0);
    if (ties) s = std::round(s * 2.0) / 2.0;
    trials.push_back({s, target});
  }
  if (std::all_of(trials.begin(), trials.end(), [&](const auto& t) { return t.score == trials[0].score; })) {
    trials[0].score += 1.0;
  }
  return stridelab::TrialScoreSet(std::move(trials));
}

// Direct convolution written output-first with explicit bounds checks instead of padding.
inline stridelab::Tensor4 conv2d(const stridelab::Tensor4& x, const stridelab::LayerSpec& l,
                                 std::span<const double> w, std::span<const double> bias = {}) {
  const auto ext = [](std::int64_t r, int k, int s, int p, int d) { return (r + 2 * p - d * (k - 1) - 1) / s + 1; };
  const std::int64_t F = ext(x.freq(), l.kernel.freq, l.stride.freq(), l.padding.freq, l.dilation.freq);
  const std::int64_t T = ext(x.time(), l.kernel.time, l.stride.time(), l.padding.time, l.dilation.time);
  const int cin_g = l.in_channels / l.groups;
  const int cout_g = l.out_channels / l.groups;
  stridelab::Tensor4 y(x.batch(), l.out_channels, F, T);
  for (std::int64_t b = x.batch() - 1; b >= 0; --b) {
    for (int o = l.out_channels - 1; o >= 0; --o) {
      const int g = o / cout_g;
      for (std::int64_t f = 0; f < F; ++f) {
        for (std::int64_t t = 0; t < T; ++t) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
          for (int ci = cin_g - 1; ci >= 0; --ci) {
            for (int kf = l.kernel.freq - 1; kf >= 0; --kf) {
              for (int kt = l.kernel.time - 1; kt >= 0; --kt) {
                const std::int64_t fi = f * l.stride.freq() - l.padding.freq + kf * l.dilation.freq;
                const std::int64_t ti = t * l.stride.time() - l.padding.time + kt * l.dilation.time;
                if (fi < 0 || fi >= x.freq() || ti < 0 || ti >= x.time()) continue;
                const std::size_t wi =
                    ((static_cast<std::size_t>(o) * cin_g + ci) * l.kernel.freq + kf) * l.kernel.time + kt;
                acc += w[wi] * x.at(b, g * cin_g + ci, fi, ti);
              }
            }
          }
          y.at(b, o, f, t) = acc;
        }
      }
    }
  }
  return y;
}

}  // namespace oracle
