#include "stridelab/arch_builder.hpp"

#include <numeric>
#include <string>
#include <tuple>

#include "stridelab/analysis.hpp"

namespace stridelab {

namespace {

constexpr int kBottleneckExpansion = 4;
constexpr int kDepthwiseExpansion = 4;

struct DfPreset {
  int m;
  std::array<int, 4> blocks;
};
constexpr DfPreset kDfPresets[] = {
    {18, {3, 3, 9, 3}},
    {36, {3, 3, 27, 3}},
    {59, {3, 8, 45, 3}},
};

int total_blocks(const std::array<int, 4>& b) { return std::accumulate(b.begin(), b.end(), 0); }

std::pair<BlockType, std::array<int, 4>> resnet_preset(int depth) {
  switch (depth) {
    case 18: return {BlockType::Basic, {2, 2, 2, 2}};
    case 34: return {BlockType::Basic, {3, 4, 6, 3}};
    case 50: return {BlockType::Bottleneck, {3, 4, 6, 3}};
    case 101: return {BlockType::Bottleneck, {3, 4, 23, 3}};
    case 152: return {BlockType::Bottleneck, {3, 8, 36, 3}};
    default: throw BuildError("no block layout for ResNet depth " + std::to_string(depth));
  }
}

int stage_width(const StageDesc& s) {
  return s.block.type == BlockType::Bottleneck ? s.channels * kBottleneckExpansion : s.channels;
}

class LayerWriter {
 public:
  explicit LayerWriter(std::vector<LayerSpec>& out) : out_(out) {}

  void at(std::string prefix, int stage, int block, LayerRole role) {
    prefix_ = std::move(prefix);
    stage_ = stage;
    block_ = block;
    role_ = role;
  }
  void role(LayerRole r) { role_ = r; }

  void conv(const std::string& name, int in, int out, int k, StridePair stride, int groups = 1) {
    LayerSpec l = base(LayerKind::Conv2D, name);
    l.in_channels = in;
    l.out_channels = out;
    l.kernel = {k, k};
    l.padding = {k / 2, k / 2};
    l.stride = stride;
    l.groups = groups;
    out_.push_back(l);
  }
  void hier_conv(const std::string& name, int channels, int scale) {
    LayerSpec l = base(LayerKind::HierConv2D, name);
    l.in_channels = channels;
    l.out_channels = channels;
    l.kernel = {3, 3};
    l.padding = {1, 1};
    l.scale = scale;
    out_.push_back(l);
  }
  void bn(const std::string& name, int channels) {
    LayerSpec l = base(LayerKind::BatchNorm, name);
    l.channels = channels;
    out_.push_back(l);
  }
  void relu(const std::string& name) { out_.push_back(base(LayerKind::Activation, name)); }
  void maxpool(const std::string& name, StridePair stride) {
    LayerSpec l = base(LayerKind::MaxPool2D, name);
    l.kernel = {3, 3};
    l.padding = {1, 1};
    l.stride = stride;
    out_.push_back(l);
  }
  void se(const std::string& name, int channels, int r) {
    LayerSpec l = base(LayerKind::SqueezeExcite, name);
    l.channels = channels;
    l.reduction = r;
    l.bias = true;
    out_.push_back(l);
  }
  void add(const std::string& name) { out_.push_back(base(LayerKind::Add, name)); }
  void pool(const std::string& name, LayerKind kind) { out_.push_back(base(kind, name)); }
  void fc(const std::string& name, int in, int out) {
    LayerSpec l = base(LayerKind::FullyConnected, name);
    l.in_dim = in;
    l.out_dim = out;
    l.bias = true;
    out_.push_back(l);
  }

 private:
  LayerSpec base(LayerKind kind, const std::string& name) const {
    LayerSpec l;
    l.kind = kind;
    l.role = role_;
    l.name = prefix_ + "." + name;
    l.stage = stage_;
    l.block = block_;
    return l;
  }

  std::vector<LayerSpec>& out_;
  std::string prefix_;
  int stage_ = 0;
  int block_ = -1;
  LayerRole role_ = LayerRole::Branch;
};

bool has_projection(Family family, int block_index) {
  if (family == Family::SDResNet || family == Family::DFResNet) return false;
  return block_index == 0;
}

void write_block(LayerWriter& w, Family family, const StageDesc& s, int b, int in_channels) {
  const std::string prefix = "stage" + std::to_string(s.index) + ".block" + std::to_string(b);
  const StridePair stride = (b == 0 && !s.downsample_layer) ? s.stride : StridePair{};
  const int c = s.channels;
  const int out = stage_width(s);
  w.at(prefix, s.index, b, LayerRole::Branch);

  switch (s.block.type) {
    case BlockType::Basic:
      w.conv("conv1", in_channels, c, 3, stride);
      w.bn("bn1", c);
      w.relu("relu1");
      if (s.block.res2net_scale) {
        w.hier_conv("conv2", c, *s.block.res2net_scale);
      } else {
        w.conv("conv2", c, c, 3, StridePair{});
      }
      w.bn("bn2", c);
      break;
    case BlockType::Bottleneck:
      w.conv("conv1", in_channels, c, 1, StridePair{});
      w.bn("bn1", c);
      w.relu("relu1");
      w.conv("conv2", c, c, 3, stride);
      w.bn("bn2", c);
      w.relu("relu2");
      w.conv("conv3", c, out, 1, StridePair{});
      w.bn("bn3", out);
      break;
    case BlockType::DepthFirstInverted: {
      const int e = c * kDepthwiseExpansion;
      w.conv("conv1", in_channels, e, 1, StridePair{});
      w.bn("bn1", e);
      w.relu("relu1");
      w.conv("conv2", e, e, 3, stride, e);
      w.bn("bn2", e);
      w.relu("relu2");
      w.conv("conv3", e, out, 1, StridePair{});
      w.bn("bn3", out);
      break;
    }
    case BlockType::SeparateDownsample:
      throw BuildError("separate downsampling is a stage option, not a residual block type");
  }
  if (s.block.se_reduction) w.se("se", out, *s.block.se_reduction);

  if (has_projection(family, b)) {
    w.role(LayerRole::Shortcut);
    w.conv("shortcut.conv", in_channels, out, 1, stride);
    w.bn("shortcut.bn", out);
  }
  w.role(LayerRole::Merge);
  w.add("add");
  w.relu("relu");
}

std::vector<LayerSpec> elaborate_body(const ModelSpec& spec) {
  std::vector<LayerSpec> layers;
  LayerWriter w(layers);
  const auto& p = spec.path;

  w.at("stem", 1, -1, LayerRole::Stem);
  if (spec.family == Family::OriginalResNet) {
    w.conv("conv", 1, spec.base_channels, 7, p.step(1));
    w.bn("bn", spec.base_channels);
    w.relu("relu");
    w.maxpool("maxpool", p.step(2));
  } else {
    w.conv("conv", 1, spec.base_channels, 3, p.step(1));
    w.bn("bn", spec.base_channels);
    w.relu("relu");
  }

  int channels = spec.base_channels;
  for (const StageDesc& s : spec.stages) {
    const int out = stage_width(s);
    if (s.downsample_layer) {
      w.at("stage" + std::to_string(s.index) + ".sd", s.index, -1, LayerRole::Downsample);
      w.conv("conv", channels, out, 3, s.stride);
      w.bn("bn", out);
      w.relu("relu");
      channels = out;
    }
    for (int b = 0; b < s.blocks; ++b) {
      write_block(w, spec.family, s, b, channels);
      channels = out;
    }
  }
  return layers;
}

void append_head(const ModelSpec& spec, std::vector<LayerSpec>& layers) {
  const int c = final_channels(spec);
  LayerWriter w(layers);
  w.at("head", 0, -1, LayerRole::Head);
  if (spec.head.pooling == PoolingKind::GlobalAverage) {
    w.pool("pool", LayerKind::GlobalAvgPooling);
    w.fc("fc", c, spec.head.embedding_dim);
    return;
  }
  // pooled dimension depends only on the frequency axis; any time extent that survives works
  ModelSpec body = spec;
  body.layers = layers;
  const auto shapes = layer_shapes(body, TensorShape::make(1, spec.input_freq_bins, 4096));
  const auto last = shapes.empty() ? TensorShape::make(1, spec.input_freq_bins, 4096) : shapes.back();
  w.pool("pool", LayerKind::StatsPooling);
  w.fc("fc", static_cast<int>(2 * last.channels * last.freq), spec.head.embedding_dim);
}

bool is_canonical(Family family, const TrellisPath& path) {
  const auto end = endpoint_of(path);
  switch (family) {
    case Family::OriginalResNet:
      return end.alpha == 32 && end.beta == 32;
    case Family::ModifiedResNet:
      return end.alpha == end.beta;
    case Family::GeminiResNet:
      return (end.alpha == 2 && end.beta == 16) || (end.alpha == 4 && end.beta == 8);
    default:
      return true;
  }
}

}  // namespace

int depth_from_blocks(BlockType kind, int m, int extra_layers) {
  const int per_block = kind == BlockType::Basic ? 2 : 3;
  return per_block * m + 2 + extra_layers;
}

TrellisPath default_path(Family family) {
  switch (family) {
    case Family::OriginalResNet: return *find_path_by_name("ORI");
    case Family::GeminiResNet: return *find_path_by_name("T14c");
    default: return *find_path_by_name("MOD");
  }
}

Family resnet_family_for(const TrellisPath& path) {
  return is_canonical(Family::GeminiResNet, path) ? Family::GeminiResNet : Family::ModifiedResNet;
}

std::pair<BlockType, std::array<int, 4>> preset_blocks(Family family, int depth_label) {
  switch (family) {
    case Family::DFResNet:
      for (const auto& p : kDfPresets) {
        const int base = depth_from_blocks(BlockType::DepthFirstInverted, p.m, 0);
        if (depth_label >= base && depth_label <= base + 4) return {BlockType::DepthFirstInverted, p.blocks};
      }
      throw BuildError("no block layout for DF-ResNet depth " + std::to_string(depth_label));
    case Family::SDResNet:
      return resnet_preset(depth_label - 4);
    default:
      return resnet_preset(depth_label);
  }
}

int separate_downsample_count(const ModelSpec& spec) {
  int n = 0;
  for (const auto& s : spec.stages) n += s.downsample_layer ? 1 : 0;
  return n;
}

int final_channels(const ModelSpec& spec) { return stage_width(spec.stages.back()); }

std::vector<LayerSpec> elaborate(const ModelSpec& spec) {
  auto layers = elaborate_body(spec);
  append_head(spec, layers);
  for (const auto& l : layers) l.validate();
  return layers;
}

ModelSpec attach_head(ModelSpec spec, int embedding_dim) {
  if (embedding_dim < 1) throw BuildError("embedding dimension must be >= 1");
  std::erase_if(spec.layers, [](const LayerSpec& l) { return l.role == LayerRole::Head; });
  spec.head.embedding_dim = embedding_dim;
  append_head(spec, spec.layers);
  return spec;
}

ModelSpec build(const BuildRequest& req) {
  ModelSpec spec;
  spec.family = req.family;
  spec.path = req.path.value_or(default_path(req.family));
  if (spec.path.label().empty()) spec.path.set_label(canonical_name(spec.path));
  spec.base_channels = req.base_channels.value_or(req.family == Family::OriginalResNet ? 64 : 32);
  spec.input_freq_bins = req.input_freq_bins;
  spec.head.embedding_dim = req.embedding_dim;
  spec.head.pooling = req.family == Family::OriginalResNet ? PoolingKind::GlobalAverage : PoolingKind::Statistics;
  spec.canonical = is_canonical(req.family, spec.path);

  if (spec.base_channels < 1) throw BuildError("base channels must be >= 1");
  if (req.embedding_dim < 1) throw BuildError("embedding dimension must be >= 1");
  if (req.input_freq_bins < 1) throw BuildError("input frequency bins must be >= 1");

  BlockType type;
  std::array<int, 4> blocks;
  if (req.block_counts) {
    blocks = *req.block_counts;
    if (req.block_type) {
      type = *req.block_type;
    } else if (req.family == Family::DFResNet) {
      type = BlockType::DepthFirstInverted;
    } else {
      type = BlockType::Basic;
    }
  } else {
    std::tie(type, blocks) = preset_blocks(req.family, req.depth_label);
    if (req.block_type && *req.block_type != type) {
      throw BuildError("block type " + std::string(to_string(*req.block_type)) + " does not match depth " +
                       std::to_string(req.depth_label));
    }
  }
  for (int b : blocks) {
    if (b < 1) throw BuildError("every stage needs at least one block");
  }
  if (type == BlockType::SeparateDownsample) {
    throw BuildError("separate downsampling is a stage option, not a residual block type");
  }
  if ((req.family == Family::DFResNet) != (type == BlockType::DepthFirstInverted)) {
    throw BuildError("depth-first inverted blocks are used by, and only by, the DF-ResNet family");
  }
  if (req.res2net_scale && type != BlockType::Basic) throw BuildError("Res2Net option requires basic blocks");
  if (req.se_reduction && type == BlockType::DepthFirstInverted) {
    throw BuildError("SE option is not available for depth-first inverted blocks");
  }

  BlockKind kind{type, req.se_reduction, req.res2net_scale};
  try {
    kind.validate();
  } catch (const InvariantError& e) {
    throw BuildError(e.what());
  }

  int prev = spec.base_channels;
  for (int i = 0; i < 4; ++i) {
    StageDesc& s = spec.stages[static_cast<std::size_t>(i)];
    s.index = i + 2;
    s.block = kind;
    s.blocks = blocks[static_cast<std::size_t>(i)];
    s.channels = spec.base_channels << i;
    s.stride = (req.family == Family::OriginalResNet && i == 0) ? StridePair{} : spec.path.step(i + 2);
    if (req.family == Family::SDResNet) {
      s.downsample_layer = true;
    } else if (req.family == Family::DFResNet) {
      s.downsample_layer = !s.stride.is_identity() || prev != stage_width(s);
    }
    if (kind.se_reduction && stage_width(s) % *kind.se_reduction != 0) {
      throw BuildError("SE reduction " + std::to_string(*kind.se_reduction) + " does not divide " +
                       std::to_string(stage_width(s)) + " channels");
    }
    if (kind.res2net_scale && s.channels % *kind.res2net_scale != 0) {
      throw BuildError("Res2Net scale " + std::to_string(*kind.res2net_scale) + " does not divide " +
                       std::to_string(s.channels) + " channels");
    }
    prev = stage_width(s);
  }

  const int expected = depth_from_blocks(type, total_blocks(blocks), separate_downsample_count(spec));
  if (req.depth_label != 0 && req.depth_label != expected) {
    throw BuildError("depth " + std::to_string(req.depth_label) + " does not match the block layout (expected " +
                     std::to_string(expected) + ")");
  }
  spec.depth_label = expected;

  try {
    spec.layers = elaborate(spec);
  } catch (const InvariantError& e) {
    throw BuildError(e.what());
  }
  return spec;
}

BuildRequest request_from_spec(const ModelSpec& spec) {
  BuildRequest req;
  req.family = spec.family;
  req.depth_label = 0;
  req.base_channels = spec.base_channels;
  std::array<int, 4> blocks{};
  for (std::size_t i = 0; i < 4; ++i) blocks[i] = spec.stages[i].blocks;
  req.block_counts = blocks;
  req.block_type = spec.stages[0].block.type;
  req.path = spec.path;
  req.embedding_dim = spec.head.embedding_dim;
  req.se_reduction = spec.stages[0].block.se_reduction;
  req.res2net_scale = spec.stages[0].block.res2net_scale;
  req.input_freq_bins = spec.input_freq_bins;
  return req;
}

}  // namespace stridelab
