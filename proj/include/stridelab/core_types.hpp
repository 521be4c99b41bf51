#pragma once

// Shared vocabulary: shapes, strides, trellis paths, layers and model specs.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stridelab {

/// Raised when a value violates a type invariant (e.g. a stride of 3).
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// C x F x T feature-map shape. All fields are >= 1.
struct TensorShape {
  std::int64_t channels = 1;
  std::int64_t freq = 1;
  std::int64_t time = 1;

  static TensorShape make(std::int64_t channels, std::int64_t freq, std::int64_t time);
  bool operator==(const TensorShape&) const = default;
  std::string str() const;
};

/// Per-stage stride, stored as (time, freq). Each component is 1 or 2.
class StridePair {
 public:
  constexpr StridePair() = default;
  StridePair(int time_stride, int freq_stride);

  int time() const { return time_; }
  int freq() const { return freq_; }
  bool is_identity() const { return time_ == 1 && freq_ == 1; }

  bool operator==(const StridePair&) const = default;
  std::string str() const;  // "(t,f)"

 private:
  int time_ = 1;
  int freq_ = 1;
};

inline constexpr int kStages = 5;

/// Cumulative downsampling after a stage: alpha (time), beta (freq).
struct Downsampling {
  int alpha = 1;
  int beta = 1;
  bool operator==(const Downsampling&) const = default;
};

/// A stride configuration: one StridePair per network stage.
class TrellisPath {
 public:
  TrellisPath() = default;
  explicit TrellisPath(std::array<StridePair, kStages> steps, std::string label = {});

  /// Builds a path from its time row and frequency row, e.g. [1,1,2,1,1] / [1,2,2,2,2].
  static TrellisPath from_rows(const std::vector<int>& time_row, const std::vector<int>& freq_row,
                               std::string label = {});
  /// Bit i (from the MSB, stage 1 first) of each mask selects stride 2 on that axis.
  static TrellisPath from_masks(unsigned time_mask, unsigned freq_mask);

  const std::array<StridePair, kStages>& steps() const { return steps_; }
  const StridePair& step(int stage) const { return steps_.at(static_cast<std::size_t>(stage - 1)); }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  std::array<int, kStages> time_row() const;
  std::array<int, kStages> freq_row() const;
  unsigned time_mask() const;
  unsigned freq_mask() const;

  /// Equality ignores the label.
  bool operator==(const TrellisPath& other) const { return steps_ == other.steps_; }

  std::string rows_str() const;  // "[1,1,2,1,1]/[1,2,2,2,2]"

 private:
  std::array<StridePair, kStages> steps_{};
  std::string label_;
};

enum class Priority { TimePriority, Equal, FrequencyPriority };

std::array<Downsampling, kStages> downsampling_factors(const TrellisPath& path);
Downsampling endpoint_of(const TrellisPath& path);
Priority classify_path(const TrellisPath& path);
std::string canonical_name(const TrellisPath& path);
/// True for names outside the published index scheme (the E-prefixed equal-class names).
bool is_extension_name(std::string_view name);
/// Reverse lookup over all 1024 paths; nullopt when no path carries that name.
std::optional<TrellisPath> find_path_by_name(std::string_view name);

std::string_view to_string(Priority p);
std::optional<Priority> parse_priority(std::string_view text);

// ---------------------------------------------------------------------------
// Layers and model specifications

enum class BlockType { Basic, Bottleneck, DepthFirstInverted, SeparateDownsample };

struct BlockKind {
  BlockType type = BlockType::Basic;
  std::optional<int> se_reduction;   // SE enabled when set; r >= 1
  std::optional<int> res2net_scale;  // s >= 2

  void validate() const;
  bool operator==(const BlockKind&) const = default;
};

enum class LayerKind {
  Conv2D,
  HierConv2D,  // Res2Net hierarchical 3x3 group
  BatchNorm,
  Activation,
  MaxPool2D,
  Add,
  SqueezeExcite,
  StatsPooling,
  GlobalAvgPooling,
  FullyConnected,
};

/// Where a layer sits in the network graph.
enum class LayerRole { Stem, Downsample, Branch, Shortcut, Merge, Head };

/// (freq, time) extent used for kernels, padding and dilation.
struct Extent2D {
  int freq = 1;
  int time = 1;
  bool operator==(const Extent2D&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Conv2D;
  LayerRole role = LayerRole::Branch;
  std::string name;
  int stage = 0;   // 1 = stem, 2..5 = residual stages, 0 = head
  int block = -1;  // block index inside the stage, -1 outside blocks

  // Conv2D / HierConv2D / MaxPool2D
  int in_channels = 0;
  int out_channels = 0;
  Extent2D kernel{1, 1};
  StridePair stride{};
  Extent2D padding{0, 0};
  Extent2D dilation{1, 1};
  int groups = 1;
  int scale = 1;  // HierConv2D splits
  bool bias = false;

  // BatchNorm / SqueezeExcite channel count
  int channels = 0;
  int reduction = 1;

  // FullyConnected
  int in_dim = 0;
  int out_dim = 0;

  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

std::string_view to_string(LayerKind k);
std::string_view to_string(LayerRole r);
std::string_view to_string(BlockType t);
std::optional<LayerKind> parse_layer_kind(std::string_view text);
std::optional<LayerRole> parse_layer_role(std::string_view text);
std::optional<BlockType> parse_block_type(std::string_view text);

enum class Family { OriginalResNet, ModifiedResNet, GeminiResNet, DFResNet, SDResNet };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view text);

struct StageDesc {
  int index = 2;  // 2..5
  BlockKind block;
  int blocks = 1;
  int channels = 32;  // stage width before any bottleneck expansion
  StridePair stride;
  bool downsample_layer = false;  // separate 3x3 downsampling conv in front of the blocks
  bool operator==(const StageDesc&) const = default;
};

enum class PoolingKind { Statistics, GlobalAverage };

struct HeadSpec {
  PoolingKind pooling = PoolingKind::Statistics;
  int embedding_dim = 256;
  bool operator==(const HeadSpec&) const = default;
};

std::string_view to_string(PoolingKind p);
std::optional<PoolingKind> parse_pooling_kind(std::string_view text);

struct ModelSpec {
  Family family = Family::ModifiedResNet;
  int depth_label = 34;
  int base_channels = 32;
  int input_freq_bins = 80;
  TrellisPath path;
  std::array<StageDesc, 4> stages{};
  HeadSpec head;
  bool canonical = true;  // false when the path is not the family's reference configuration
  std::vector<LayerSpec> layers;

  bool operator==(const ModelSpec&) const = default;
};

}  // namespace stridelab
