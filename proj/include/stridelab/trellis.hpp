#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stridelab/arch_builder.hpp"
#include "stridelab/core_types.hpp"

namespace stridelab {

struct TrellisEndpoint {
  int alpha5 = 1;
  int beta5 = 1;

  static TrellisEndpoint make(int alpha5, int beta5);  // both must be 2^k, k in 0..5
  int time_exponent() const;
  int freq_exponent() const;
  bool operator==(const TrellisEndpoint&) const = default;
  std::string str() const;  // "(2,16)"
};

TrellisEndpoint endpoint_of_path(const TrellisPath& path);

struct RankedPath {
  TrellisPath path;
  int rank = 0;  // 1-based position after ranking, 0 before
  std::optional<std::uint64_t> flops;
  std::optional<std::uint64_t> params;
  std::optional<std::string> underflow;  // set when the input is too small for this path
};

struct PathFamily {
  TrellisEndpoint endpoint;
  std::vector<RankedPath> paths;
};

/// All 36 endpoints, time exponent major, frequency exponent minor.
std::vector<TrellisEndpoint> enumerate_endpoints();

/// Every path reaching `endpoint`, ordered by (time mask, freq mask); labels set to canonical names.
PathFamily enumerate_paths(const TrellisEndpoint& endpoint);

/// All 1024 paths in the same order.
std::vector<TrellisPath> enumerate_all_paths();

std::pair<TrellisEndpoint, TrellisEndpoint> golden_gemini_endpoints();
bool is_golden_gemini(const TrellisEndpoint& endpoint);

std::uint64_t family_size(const TrellisEndpoint& endpoint);

/// Builds every member with `spec_template.path` replaced and orders by FLOPs, descending.
/// Paths that underflow sort last and carry the message. Throws BuildError if parameter
/// counts differ within the family.
PathFamily rank_paths_by_flops(PathFamily family, const TensorShape& input, const BuildRequest& spec_template);

/// The 24 named stride configurations with published complexity figures.
const std::vector<std::string>& published_configs();
bool is_published_config(const TrellisPath& path);
/// 34-layer request for a published configuration name ("ORI" selects the original family).
BuildRequest published_config_request(const std::string& name);

}  // namespace stridelab
