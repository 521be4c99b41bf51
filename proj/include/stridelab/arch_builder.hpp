#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stridelab/core_types.hpp"

namespace stridelab {

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BuildRequest {
  Family family = Family::ModifiedResNet;
  int depth_label = 34;  // 0: derive from block_counts
  std::optional<int> base_channels;              // 64 for the original family, 32 otherwise
  std::optional<std::array<int, 4>> block_counts;  // preset from depth_label when unset
  std::optional<BlockType> block_type;           // preset from depth_label when unset
  std::optional<TrellisPath> path;               // family reference path when unset
  int embedding_dim = 256;
  std::optional<int> se_reduction;
  std::optional<int> res2net_scale;
  int input_freq_bins = 80;
};

/// Depth label: 2m + 2 for basic blocks, 3m + 2 for three-layer blocks, plus extra layers.
int depth_from_blocks(BlockType kind, int m, int extra_layers);

/// Reference stride configuration of a family (ORI, MOD or T14c).
TrellisPath default_path(Family family);

/// GeminiResNet for paths ending on (2,16) or (4,8), ModifiedResNet otherwise.
Family resnet_family_for(const TrellisPath& path);

/// Block type and per-stage block counts for a family/depth pair.
/// Throws BuildError for unknown depths.
std::pair<BlockType, std::array<int, 4>> preset_blocks(Family family, int depth_label);

/// Number of separate downsampling layers the family inserts for a given stage layout.
int separate_downsample_count(const ModelSpec& spec);

ModelSpec build(const BuildRequest& req);

/// Request that rebuilds `spec` (explicit block counts, depth derived).
BuildRequest request_from_spec(const ModelSpec& spec);

/// Regenerates the flat layer list from the family, path, stage descriptors and head.
std::vector<LayerSpec> elaborate(const ModelSpec& spec);

/// Replaces any existing head with pooling + FC(pooled_dim -> embedding_dim).
ModelSpec attach_head(ModelSpec spec, int embedding_dim);

/// Channel count leaving the last residual stage.
int final_channels(const ModelSpec& spec);

}  // namespace stridelab
