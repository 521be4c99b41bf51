#include <doctest.h>

#include <bit>
#include <set>

#include "stridelab/core_types.hpp"

using namespace stridelab;

namespace {

int binom(int n, int k) {
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("stride pairs accept only 1 and 2") {
  CHECK_NOTHROW(StridePair(1, 2));
  CHECK_NOTHROW(StridePair(2, 2));
  CHECK_THROWS_AS(StridePair(3, 1), InvariantError);
  CHECK_THROWS_AS(StridePair(1, 0), InvariantError);
  CHECK_THROWS_AS(StridePair(-1, 2), InvariantError);
  CHECK(StridePair(1, 2).time() == 1);
  CHECK(StridePair(1, 2).freq() == 2);
  CHECK(StridePair().is_identity());
}

TEST_CASE("tensor shapes reject empty dimensions") {
  CHECK_NOTHROW(TensorShape::make(1, 1, 1));
  CHECK_THROWS_AS(TensorShape::make(0, 80, 200), InvariantError);
  CHECK_THROWS_AS(TensorShape::make(1, 80, 0), InvariantError);
}

TEST_CASE("paths need exactly five stages") {
  CHECK_THROWS_AS(TrellisPath::from_rows({1, 1, 2, 1}, {1, 2, 2, 2, 2}), InvariantError);
  CHECK_THROWS_AS(TrellisPath::from_rows({1, 1, 2, 1, 1}, {1, 2, 2, 2, 2, 1}), InvariantError);
  CHECK_THROWS_AS(TrellisPath::from_rows({1, 1, 3, 1, 1}, {1, 2, 2, 2, 2}), InvariantError);
}

TEST_CASE("downsampling factors of the worked examples") {
  const auto t14c = TrellisPath::from_rows({1, 1, 2, 1, 1}, {1, 2, 2, 2, 2});
  CHECK(endpoint_of(t14c) == Downsampling{2, 16});

  const auto identity = TrellisPath::from_rows({1, 1, 1, 1, 1}, {1, 1, 1, 1, 1});
  for (const auto& d : downsampling_factors(identity)) CHECK(d == Downsampling{1, 1});

  const auto all2 = TrellisPath::from_rows({2, 2, 2, 2, 2}, {2, 2, 2, 2, 2});
  CHECK(endpoint_of(all2) == Downsampling{32, 32});
  const auto f = downsampling_factors(all2);
  CHECK(f[0] == Downsampling{2, 2});
  CHECK(f[2] == Downsampling{8, 8});
}

TEST_CASE("downsampling factors are running products over all 1024 paths") {
  for (unsigned tm = 0; tm < 32; ++tm) {
    for (unsigned fm = 0; fm < 32; ++fm) {
      const auto p = TrellisPath::from_masks(tm, fm);
      const auto d = downsampling_factors(p);
      for (int n = 1; n <= kStages; ++n) {
        // the first n stages are the n most significant bits of each mask
        const unsigned prefix_t = tm >> (kStages - n);
        const unsigned prefix_f = fm >> (kStages - n);
        CHECK(d[static_cast<std::size_t>(n - 1)].alpha == (1 << std::popcount(prefix_t)));
        CHECK(d[static_cast<std::size_t>(n - 1)].beta == (1 << std::popcount(prefix_f)));
        if (n > 1) {
          CHECK(d[static_cast<std::size_t>(n - 1)].alpha >= d[static_cast<std::size_t>(n - 2)].alpha);
          CHECK(d[static_cast<std::size_t>(n - 1)].beta >= d[static_cast<std::size_t>(n - 2)].beta);
        }
      }
    }
  }
}

TEST_CASE("masks and rows describe the same path") {
  const auto p = TrellisPath::from_rows({1, 1, 2, 1, 1}, {1, 2, 2, 2, 2});
  CHECK(p.time_mask() == 0b00100u);
  CHECK(p.freq_mask() == 0b01111u);
  CHECK(TrellisPath::from_masks(p.time_mask(), p.freq_mask()) == p);
  CHECK(p.rows_str() == "[1,1,2,1,1]/[1,2,2,2,2]");
  CHECK(p.step(3) == StridePair(2, 2));
}

TEST_CASE("classification examples") {
  CHECK(classify_path(*find_path_by_name("T14")) == Priority::TimePriority);
  CHECK(classify_path(*find_path_by_name("MOD")) == Priority::Equal);
  CHECK(classify_path(*find_path_by_name("F41")) == Priority::FrequencyPriority);
  CHECK(endpoint_of(*find_path_by_name("F41")) == Downsampling{16, 2});
}

TEST_CASE("classification partitions all paths with fixed counts") {
  int equal_oracle = 0;
  int time_oracle = 0;
  for (int a = 0; a <= 5; ++a) {
    for (int b = 0; b <= 5; ++b) {
      if (a == b) equal_oracle += binom(5, a) * binom(5, b);
      if (a < b) time_oracle += binom(5, a) * binom(5, b);
    }
  }
  int counts[3] = {0, 0, 0};
  for (unsigned tm = 0; tm < 32; ++tm) {
    for (unsigned fm = 0; fm < 32; ++fm) ++counts[static_cast<int>(classify_path(TrellisPath::from_masks(tm, fm)))];
  }
  CHECK(counts[0] + counts[1] + counts[2] == 1024);
  CHECK(counts[static_cast<int>(Priority::Equal)] == equal_oracle);
  CHECK(counts[static_cast<int>(Priority::TimePriority)] == time_oracle);
  CHECK(counts[static_cast<int>(Priority::FrequencyPriority)] == time_oracle);
  CHECK(equal_oracle == 252);
}

TEST_CASE("published configuration names map to their stride rows") {
  struct Row {
    const char* name;
    std::vector<int> time;
    std::vector<int> freq;
  };
  const std::vector<Row> rows = {
      {"ORI", {2, 2, 2, 2, 2}, {2, 2, 2, 2, 2}},  {"MOD", {1, 1, 2, 2, 2}, {1, 1, 2, 2, 2}},
      {"T05", {1, 1, 1, 1, 1}, {2, 2, 2, 2, 2}},  {"F50", {2, 2, 2, 2, 2}, {1, 1, 1, 1, 1}},
      {"T15", {1, 1, 1, 1, 2}, {2, 2, 2, 2, 2}},  {"F51", {2, 2, 2, 2, 2}, {1, 1, 1, 1, 2}},
      {"T25", {1, 1, 1, 2, 2}, {2, 2, 2, 2, 2}},  {"F52", {2, 2, 2, 2, 2}, {1, 1, 1, 2, 2}},
      {"T14", {1, 1, 1, 1, 2}, {1, 2, 2, 2, 2}},  {"F41", {1, 2, 2, 2, 2}, {1, 1, 1, 1, 2}},
      {"T24", {1, 1, 1, 2, 2}, {1, 2, 2, 2, 2}},  {"F42", {1, 2, 2, 2, 2}, {1, 1, 1, 2, 2}},
      {"T34", {1, 1, 2, 2, 2}, {1, 2, 2, 2, 2}},  {"F43", {1, 2, 2, 2, 2}, {1, 1, 2, 2, 2}},
      {"T23", {1, 1, 1, 2, 2}, {1, 1, 2, 2, 2}},  {"F32", {1, 1, 2, 2, 2}, {1, 1, 1, 2, 2}},
      {"T04", {1, 1, 1, 1, 1}, {1, 2, 2, 2, 2}},  {"T13", {1, 1, 1, 1, 2}, {1, 1, 2, 2, 2}},
      {"T14b", {1, 1, 1, 2, 1}, {1, 2, 2, 2, 2}}, {"T14c", {1, 1, 2, 1, 1}, {1, 2, 2, 2, 2}},
      {"T14d", {1, 2, 1, 1, 1}, {1, 2, 2, 2, 2}}, {"T23b", {1, 1, 2, 2, 1}, {1, 1, 2, 2, 2}},
      {"T23c", {1, 1, 1, 2, 2}, {1, 2, 2, 2, 1}}, {"T23d", {1, 1, 2, 1, 2}, {1, 2, 2, 2, 1}},
  };
  for (const auto& r : rows) {
    CAPTURE(r.name);
    const auto p = TrellisPath::from_rows(r.time, r.freq);
    CHECK(canonical_name(p) == r.name);
    const auto found = find_path_by_name(r.name);
    REQUIRE(found.has_value());
    CHECK(*found == p);
    CHECK(found->label() == r.name);
  }
}

TEST_CASE("canonical names are injective and round-trip") {
  std::set<std::string> seen;
  for (unsigned tm = 0; tm < 32; ++tm) {
    for (unsigned fm = 0; fm < 32; ++fm) {
      const auto p = TrellisPath::from_masks(tm, fm);
      const auto name = canonical_name(p);
      CHECK(seen.insert(name).second);
      CHECK(*find_path_by_name(name) == p);
      CHECK(canonical_name(p) == name);
      const auto e = endpoint_of(p);
      if (classify_path(p) == Priority::TimePriority) CHECK(name.front() == 'T');
      if (classify_path(p) == Priority::FrequencyPriority) CHECK(name.front() == 'F');
      if (classify_path(p) == Priority::Equal) {
        CHECK((name == "MOD" || name == "ORI" || is_extension_name(name)));
      } else {
        CHECK(name[1] - '0' == std::countr_zero(static_cast<unsigned>(e.alpha)));
        CHECK(name[2] - '0' == std::countr_zero(static_cast<unsigned>(e.beta)));
      }
    }
  }
  CHECK(seen.size() == 1024);
  CHECK_FALSE(find_path_by_name("T99").has_value());
  CHECK_FALSE(find_path_by_name("").has_value());
}

TEST_CASE("equal-class names outside MOD and ORI are flagged as extensions") {
  CHECK(canonical_name(TrellisPath::from_masks(0, 0)) == "E00");
  CHECK(is_extension_name("E00"));
  CHECK(is_extension_name("E33b"));
  CHECK_FALSE(is_extension_name("MOD"));
  CHECK_FALSE(is_extension_name("T14c"));
  CHECK(canonical_name(TrellisPath::from_rows({1, 1, 2, 2, 2}, {1, 2, 1, 2, 2})).rfind("E33", 0) == 0);
}

TEST_CASE("layer spec validation") {
  LayerSpec conv;
  conv.kind = LayerKind::Conv2D;
  conv.name = "c";
  conv.in_channels = 6;
  conv.out_channels = 4;
  conv.groups = 2;
  conv.kernel = {3, 3};
  CHECK_NOTHROW(conv.validate());
  conv.groups = 4;
  CHECK_THROWS_AS(conv.validate(), InvariantError);
  conv.groups = 2;
  conv.padding = {-1, 0};
  CHECK_THROWS_AS(conv.validate(), InvariantError);
  conv.padding = {1, 1};
  conv.dilation = {0, 1};
  CHECK_THROWS_AS(conv.validate(), InvariantError);

  BlockKind kind{BlockType::Basic, 0, std::nullopt};
  CHECK_THROWS_AS(kind.validate(), InvariantError);
  kind = BlockKind{BlockType::Basic, 4, 1};
  CHECK_THROWS_AS(kind.validate(), InvariantError);
  kind = BlockKind{BlockType::Basic, 4, 4};
  CHECK_NOTHROW(kind.validate());
}

TEST_CASE("enum names round-trip") {
  for (auto k : {LayerKind::Conv2D, LayerKind::HierConv2D, LayerKind::BatchNorm, LayerKind::Activation,
                 LayerKind::MaxPool2D, LayerKind::Add, LayerKind::SqueezeExcite, LayerKind::StatsPooling,
                 LayerKind::GlobalAvgPooling, LayerKind::FullyConnected}) {
    CHECK(parse_layer_kind(to_string(k)) == k);
  }
  for (auto f : {Family::OriginalResNet, Family::ModifiedResNet, Family::GeminiResNet, Family::DFResNet,
                 Family::SDResNet}) {
    CHECK(parse_family(to_string(f)) == f);
  }
  for (auto p : {Priority::TimePriority, Priority::Equal, Priority::FrequencyPriority}) {
    CHECK(parse_priority(to_string(p)) == p);
  }
  CHECK_FALSE(parse_priority("sideways").has_value());
}
