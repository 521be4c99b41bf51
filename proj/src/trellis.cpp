#include "stridelab/trellis.hpp"

#include <algorithm>
#include <bit>

#include "stridelab/analysis.hpp"

namespace stridelab {

namespace {

int exponent_of(int v) {
  if (v < 1 || v > 32 || !std::has_single_bit(static_cast<unsigned>(v))) {
    throw InvariantError("endpoint factors must be powers of two in [1, 32], got " + std::to_string(v));
  }
  return std::countr_zero(static_cast<unsigned>(v));
}

std::uint64_t binomial(int n, int k) {
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

}  // namespace

TrellisEndpoint TrellisEndpoint::make(int alpha5, int beta5) {
  exponent_of(alpha5);
  exponent_of(beta5);
  return TrellisEndpoint{alpha5, beta5};
}

int TrellisEndpoint::time_exponent() const { return exponent_of(alpha5); }
int TrellisEndpoint::freq_exponent() const { return exponent_of(beta5); }

std::string TrellisEndpoint::str() const {
  return "(" + std::to_string(alpha5) + "," + std::to_string(beta5) + ")";
}

TrellisEndpoint endpoint_of_path(const TrellisPath& path) {
  const auto d = endpoint_of(path);
  return TrellisEndpoint{d.alpha, d.beta};
}

std::vector<TrellisEndpoint> enumerate_endpoints() {
  std::vector<TrellisEndpoint> out;
  out.reserve(36);
  for (int a = 0; a <= kStages; ++a) {
    for (int b = 0; b <= kStages; ++b) out.push_back(TrellisEndpoint{1 << a, 1 << b});
  }
  return out;
}

PathFamily enumerate_paths(const TrellisEndpoint& endpoint) {
  const int ta = endpoint.time_exponent();
  const int fb = endpoint.freq_exponent();
  PathFamily fam{endpoint, {}};
  for (unsigned tm = 0; tm < 32; ++tm) {
    if (std::popcount(tm) != ta) continue;
    for (unsigned fm = 0; fm < 32; ++fm) {
      if (std::popcount(fm) != fb) continue;
      TrellisPath p = TrellisPath::from_masks(tm, fm);
      p.set_label(canonical_name(p));
      fam.paths.push_back(RankedPath{std::move(p), 0, std::nullopt, std::nullopt, std::nullopt});
    }
  }
  return fam;
}

std::vector<TrellisPath> enumerate_all_paths() {
  std::vector<TrellisPath> out;
  out.reserve(1024);
  for (unsigned tm = 0; tm < 32; ++tm) {
    for (unsigned fm = 0; fm < 32; ++fm) {
      TrellisPath p = TrellisPath::from_masks(tm, fm);
      p.set_label(canonical_name(p));
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<TrellisEndpoint, TrellisEndpoint> golden_gemini_endpoints() {
  return {TrellisEndpoint{2, 16}, TrellisEndpoint{4, 8}};
}

bool is_golden_gemini(const TrellisEndpoint& endpoint) {
  const auto [a, b] = golden_gemini_endpoints();
  return endpoint == a || endpoint == b;
}

std::uint64_t family_size(const TrellisEndpoint& endpoint) {
  return binomial(kStages, endpoint.time_exponent()) * binomial(kStages, endpoint.freq_exponent());
}

PathFamily rank_paths_by_flops(PathFamily family, const TensorShape& input, const BuildRequest& spec_template) {
  BuildRequest tmpl = spec_template;
  if (!tmpl.block_counts) {
    const auto [type, blocks] = preset_blocks(tmpl.family, tmpl.depth_label);
    tmpl.block_type = type;
    tmpl.block_counts = blocks;
  }
  tmpl.depth_label = 0;  // separate downsampling layers may vary along the family

  std::optional<std::uint64_t> shared_params;
  for (auto& rp : family.paths) {
    BuildRequest req = tmpl;
    req.path = rp.path;
    try {
      const ModelSpec spec = build(req);
      const auto report = analyze(spec, input);
      rp.flops = report.flops_total;
      rp.params = report.params_total;
    } catch (const ShapeUnderflow& e) {
      rp.underflow = e.what();
    }
    if (rp.params) {
      if (shared_params && *shared_params != *rp.params) {
        throw BuildError("parameter count differs within family " + family.endpoint.str() + ": " +
                         std::to_string(*shared_params) + " vs " + std::to_string(*rp.params) + " (" +
                         rp.path.label() + ")");
      }
      shared_params = rp.params;
    }
  }
  std::stable_sort(family.paths.begin(), family.paths.end(), [](const RankedPath& a, const RankedPath& b) {
    if (a.flops.has_value() != b.flops.has_value()) return a.flops.has_value();
    return a.flops.value_or(0) > b.flops.value_or(0);
  });
  for (std::size_t i = 0; i < family.paths.size(); ++i) family.paths[i].rank = static_cast<int>(i + 1);
  return family;
}

const std::vector<std::string>& published_configs() {
  static const std::vector<std::string> names = {
      "ORI", "MOD", "T05", "F50", "T15", "F51", "T25", "F52", "T14", "F41", "T24",  "F42",
      "T34", "F43", "T23", "F32", "T04", "T13", "T14b", "T14c", "T14d", "T23b", "T23c", "T23d",
  };
  return names;
}

bool is_published_config(const TrellisPath& path) {
  const auto name = canonical_name(path);
  const auto& names = published_configs();
  return std::find(names.begin(), names.end(), name) != names.end();
}

BuildRequest published_config_request(const std::string& name) {
  const auto path = find_path_by_name(name);
  if (!path) throw BuildError("unknown stride configuration '" + name + "'");
  BuildRequest req;
  req.family = name == "ORI" ? Family::OriginalResNet : resnet_family_for(*path);
  req.depth_label = 34;
  req.path = path;
  return req;
}

}  // namespace stridelab
