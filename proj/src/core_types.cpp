#include "stridelab/core_types.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>
#include <tuple>

namespace stridelab {

TensorShape TensorShape::make(std::int64_t channels, std::int64_t freq, std::int64_t time) {
  if (channels < 1 || freq < 1 || time < 1) {
    throw InvariantError("tensor shape fields must be >= 1, got " + std::to_string(channels) + "x" +
                         std::to_string(freq) + "x" + std::to_string(time));
  }
  return TensorShape{channels, freq, time};
}

std::string TensorShape::str() const {
  return std::to_string(channels) + "x" + std::to_string(freq) + "x" + std::to_string(time);
}

StridePair::StridePair(int time_stride, int freq_stride) : time_(time_stride), freq_(freq_stride) {
  auto ok = [](int s) { return s == 1 || s == 2; };
  if (!ok(time_stride) || !ok(freq_stride)) {
    throw InvariantError("strides must be 1 or 2, got (" + std::to_string(time_stride) + "," +
                         std::to_string(freq_stride) + ")");
  }
}

std::string StridePair::str() const {
  return "(" + std::to_string(time_) + "," + std::to_string(freq_) + ")";
}

TrellisPath::TrellisPath(std::array<StridePair, kStages> steps, std::string label)
    : steps_(steps), label_(std::move(label)) {}

TrellisPath TrellisPath::from_rows(const std::vector<int>& time_row, const std::vector<int>& freq_row,
                                   std::string label) {
  if (time_row.size() != kStages || freq_row.size() != kStages) {
    throw InvariantError("a stride configuration needs exactly 5 time and 5 frequency strides");
  }
  std::array<StridePair, kStages> steps;
  for (std::size_t i = 0; i < kStages; ++i) steps[i] = StridePair(time_row[i], freq_row[i]);
  return TrellisPath(steps, std::move(label));
}

TrellisPath TrellisPath::from_masks(unsigned time_mask, unsigned freq_mask) {
  std::array<StridePair, kStages> steps;
  for (int i = 0; i < kStages; ++i) {
    const unsigned bit = 1u << (kStages - 1 - i);
    steps[static_cast<std::size_t>(i)] = StridePair((time_mask & bit) ? 2 : 1, (freq_mask & bit) ? 2 : 1);
  }
  return TrellisPath(steps);
}

std::array<int, kStages> TrellisPath::time_row() const {
  std::array<int, kStages> r{};
  for (std::size_t i = 0; i < kStages; ++i) r[i] = steps_[i].time();
  return r;
}

std::array<int, kStages> TrellisPath::freq_row() const {
  std::array<int, kStages> r{};
  for (std::size_t i = 0; i < kStages; ++i) r[i] = steps_[i].freq();
  return r;
}

unsigned TrellisPath::time_mask() const {
  unsigned m = 0;
  for (const auto& s : steps_) m = (m << 1) | (s.time() == 2 ? 1u : 0u);
  return m;
}

unsigned TrellisPath::freq_mask() const {
  unsigned m = 0;
  for (const auto& s : steps_) m = (m << 1) | (s.freq() == 2 ? 1u : 0u);
  return m;
}

namespace {

std::string row_str(const std::array<int, kStages>& row) {
  std::string out = "[";
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(row[i]);
  }
  return out + "]";
}

}  // namespace

std::string TrellisPath::rows_str() const { return row_str(time_row()) + "/" + row_str(freq_row()); }

std::array<Downsampling, kStages> downsampling_factors(const TrellisPath& path) {
  std::array<Downsampling, kStages> out{};
  int alpha = 1;
  int beta = 1;
  for (std::size_t i = 0; i < kStages; ++i) {
    alpha *= path.steps()[i].time();
    beta *= path.steps()[i].freq();
    out[i] = {alpha, beta};
  }
  return out;
}

Downsampling endpoint_of(const TrellisPath& path) { return downsampling_factors(path).back(); }

Priority classify_path(const TrellisPath& path) {
  const auto end = endpoint_of(path);
  if (end.alpha < end.beta) return Priority::TimePriority;
  if (end.alpha > end.beta) return Priority::FrequencyPriority;
  return Priority::Equal;
}

// ---------------------------------------------------------------------------
// Naming

namespace {

constexpr unsigned kPathCount = 1u << (2 * kStages);

std::string suffix_letters(int k) {
  // bijective base-25 over 'b'..'z': 1 -> "b", 25 -> "z", 26 -> "bb"
  std::string s;
  while (k > 0) {
    --k;
    s.insert(s.begin(), static_cast<char>('b' + k % 25));
    k /= 25;
  }
  return s;
}

struct ReservedName {
  int time_exp;
  int freq_exp;
  unsigned time_mask;
  unsigned freq_mask;
  const char* suffix;
};

// Published alternates whose letters do not follow the systematic order.
constexpr ReservedName kReserved[] = {
    {2, 3, 0b00110, 0b00111, "b"},  // [1,1,2,2,1]/[1,1,2,2,2]
    {2, 3, 0b00011, 0b01110, "c"},  // [1,1,1,2,2]/[1,2,2,2,1]
    {2, 3, 0b00101, 0b01110, "d"},  // [1,1,2,1,2]/[1,2,2,2,1]
};

std::string base_name(int te, int fe) {
  if (te == fe) {
    if (te == 3) return "MOD";
    if (te == 5) return "ORI";
  }
  const char prefix = te < fe ? 'T' : (te > fe ? 'F' : 'E');
  return std::string(1, prefix) + std::to_string(te) + std::to_string(fe);
}

std::string alternate_prefix(int te, int fe) {
  if (te == fe) return "E" + std::to_string(te) + std::to_string(fe);
  return base_name(te, fe);
}

struct NameTable {
  std::array<std::string, kPathCount> names;
  std::map<std::string, unsigned, std::less<>> index;

  static unsigned key(unsigned tm, unsigned fm) { return (tm << kStages) | fm; }

  NameTable() {
    for (int te = 0; te <= kStages; ++te) {
      for (int fe = 0; fe <= kStages; ++fe) name_family(te, fe);
    }
    for (unsigned k = 0; k < kPathCount; ++k) index.emplace(names[k], k);
  }

  void name_family(int te, int fe) {
    const unsigned base_t = (1u << te) - 1;  // strides packed into the latest stages
    const unsigned base_f = (1u << fe) - 1;
    names[key(base_t, base_f)] = base_name(te, fe);

    std::vector<std::string> taken;
    std::vector<std::pair<unsigned, unsigned>> rest;
    for (unsigned tm = 0; tm < 32; ++tm) {
      if (std::popcount(tm) != te) continue;
      for (unsigned fm = 0; fm < 32; ++fm) {
        if (std::popcount(fm) != fe || (tm == base_t && fm == base_f)) continue;
        bool reserved = false;
        for (const auto& r : kReserved) {
          if (r.time_exp == te && r.freq_exp == fe && r.time_mask == tm && r.freq_mask == fm) {
            names[key(tm, fm)] = alternate_prefix(te, fe) + r.suffix;
            taken.emplace_back(r.suffix);
            reserved = true;
          }
        }
        if (!reserved) rest.emplace_back(tm, fm);
      }
    }

    // first stage at which the path leaves the latest-downsampling path (1-based)
    auto departure = [&](unsigned tm, unsigned fm) {
      const unsigned diff = (tm ^ base_t) | (fm ^ base_f);
      return kStages - static_cast<int>(std::bit_width(diff)) + 1;
    };
    std::sort(rest.begin(), rest.end(), [&](const auto& a, const auto& b) {
      return std::tuple(-departure(a.first, a.second), a.first, a.second) <
             std::tuple(-departure(b.first, b.second), b.first, b.second);
    });

    int k = 0;
    for (const auto& [tm, fm] : rest) {
      std::string s;
      do {
        s = suffix_letters(++k);
      } while (std::find(taken.begin(), taken.end(), s) != taken.end());
      names[key(tm, fm)] = alternate_prefix(te, fe) + s;
    }
  }
};

const NameTable& name_table() {
  static const NameTable table;
  return table;
}

}  // namespace

std::string canonical_name(const TrellisPath& path) {
  return name_table().names[NameTable::key(path.time_mask(), path.freq_mask())];
}

bool is_extension_name(std::string_view name) { return !name.empty() && name.front() == 'E'; }

std::optional<TrellisPath> find_path_by_name(std::string_view name) {
  const auto& idx = name_table().index;
  auto it = idx.find(name);
  if (it == idx.end()) return std::nullopt;
  auto p = TrellisPath::from_masks(it->second >> kStages, it->second & 31u);
  p.set_label(std::string(name));
  return p;
}

std::string_view to_string(Priority p) {
  switch (p) {
    case Priority::TimePriority: return "time-priority";
    case Priority::Equal: return "equal";
    case Priority::FrequencyPriority: return "frequency-priority";
  }
  return "?";
}

std::optional<Priority> parse_priority(std::string_view text) {
  for (auto p : {Priority::TimePriority, Priority::Equal, Priority::FrequencyPriority}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void BlockKind::validate() const {
  if (se_reduction && *se_reduction < 1) throw InvariantError("SE reduction ratio must be >= 1");
  if (res2net_scale && *res2net_scale < 2) throw InvariantError("Res2Net scale must be >= 2");
}

void LayerSpec::validate() const {
  auto fail = [&](const std::string& what) { throw InvariantError("layer '" + name + "': " + what); };
  switch (kind) {
    case LayerKind::Conv2D:
    case LayerKind::HierConv2D:
      if (in_channels < 1 || out_channels < 1) fail("channel counts must be >= 1");
      if (groups < 1) fail("groups must be >= 1");
      if (in_channels % groups != 0 || out_channels % groups != 0) fail("channels not divisible by groups");
      if (kind == LayerKind::HierConv2D) {
        if (scale < 2 || in_channels % scale != 0 || in_channels != out_channels) {
          fail("hierarchical conv needs in == out channels divisible by scale >= 2");
        }
        if (!stride.is_identity()) fail("hierarchical conv must have stride (1,1)");
      }
      [[fallthrough]];
    case LayerKind::MaxPool2D:
      if (kernel.freq < 1 || kernel.time < 1) fail("kernel must be >= 1");
      if (padding.freq < 0 || padding.time < 0) fail("padding must be >= 0");
      if (dilation.freq < 1 || dilation.time < 1) fail("dilation must be >= 1");
      break;
    case LayerKind::BatchNorm:
    case LayerKind::SqueezeExcite:
      if (channels < 1) fail("channels must be >= 1");
      if (kind == LayerKind::SqueezeExcite && (reduction < 1 || channels % reduction != 0)) {
        fail("SE reduction must divide channels");
      }
      break;
    case LayerKind::FullyConnected:
      if (in_dim < 1 || out_dim < 1) fail("fully connected dims must be >= 1");
      break;
    case LayerKind::Activation:
    case LayerKind::Add:
    case LayerKind::StatsPooling:
    case LayerKind::GlobalAvgPooling:
      break;
  }
}

namespace {

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view text, const std::array<E, N>& all) {
  for (E e : all) {
    if (to_string(e) == text) return e;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::HierConv2D: return "hier_conv2d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Activation: return "relu";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::Add: return "add";
    case LayerKind::SqueezeExcite: return "squeeze_excite";
    case LayerKind::StatsPooling: return "stats_pooling";
    case LayerKind::GlobalAvgPooling: return "global_avg_pooling";
    case LayerKind::FullyConnected: return "fully_connected";
  }
  return "?";
}

std::string_view to_string(LayerRole r) {
  switch (r) {
    case LayerRole::Stem: return "stem";
    case LayerRole::Downsample: return "downsample";
    case LayerRole::Branch: return "branch";
    case LayerRole::Shortcut: return "shortcut";
    case LayerRole::Merge: return "merge";
    case LayerRole::Head: return "head";
  }
  return "?";
}

std::string_view to_string(BlockType t) {
  switch (t) {
    case BlockType::Basic: return "basic";
    case BlockType::Bottleneck: return "bottleneck";
    case BlockType::DepthFirstInverted: return "depth_first_inverted";
    case BlockType::SeparateDownsample: return "separate_downsample";
  }
  return "?";
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::OriginalResNet: return "original_resnet";
    case Family::ModifiedResNet: return "modified_resnet";
    case Family::GeminiResNet: return "gemini_resnet";
    case Family::DFResNet: return "df_resnet";
    case Family::SDResNet: return "sd_resnet";
  }
  return "?";
}

std::string_view to_string(PoolingKind p) {
  return p == PoolingKind::Statistics ? "statistics" : "global_average";
}

std::optional<LayerKind> parse_layer_kind(std::string_view text) {
  return parse_enum(text, std::array{LayerKind::Conv2D, LayerKind::HierConv2D, LayerKind::BatchNorm,
                                     LayerKind::Activation, LayerKind::MaxPool2D, LayerKind::Add,
                                     LayerKind::SqueezeExcite, LayerKind::StatsPooling,
                                     LayerKind::GlobalAvgPooling, LayerKind::FullyConnected});
}

std::optional<LayerRole> parse_layer_role(std::string_view text) {
  return parse_enum(text, std::array{LayerRole::Stem, LayerRole::Downsample, LayerRole::Branch,
                                     LayerRole::Shortcut, LayerRole::Merge, LayerRole::Head});
}

std::optional<BlockType> parse_block_type(std::string_view text) {
  return parse_enum(text, std::array{BlockType::Basic, BlockType::Bottleneck, BlockType::DepthFirstInverted,
                                     BlockType::SeparateDownsample});
}

std::optional<Family> parse_family(std::string_view text) {
  return parse_enum(text, std::array{Family::OriginalResNet, Family::ModifiedResNet, Family::GeminiResNet,
                                     Family::DFResNet, Family::SDResNet});
}

std::optional<PoolingKind> parse_pooling_kind(std::string_view text) {
  return parse_enum(text, std::array{PoolingKind::Statistics, PoolingKind::GlobalAverage});
}

}  // namespace stridelab
