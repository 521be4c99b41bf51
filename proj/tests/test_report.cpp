#include <doctest.h>

#include <functional>
#include <json.hpp>
#include <regex>

#include "stridelab/analysis.hpp"
#include "stridelab/arch_builder.hpp"
#include "stridelab/report.hpp"

using namespace stridelab;
using nlohmann::json;

namespace {

std::vector<ModelSpec> sample_specs() {
  std::vector<ModelSpec> out;
  for (const auto& name : published_configs()) out.push_back(build(published_config_request(name)));
  BuildRequest r;
  r.se_reduction = 8;
  out.push_back(build(r));
  r.se_reduction.reset();
  r.res2net_scale = 4;
  out.push_back(build(r));
  r = BuildRequest{};
  r.family = Family::DFResNet;
  r.depth_label = 183;
  r.path = find_path_by_name("T14c");
  out.push_back(build(r));
  r = BuildRequest{};
  r.family = Family::SDResNet;
  r.depth_label = 38;
  out.push_back(build(r));
  return out;
}

std::string corrupt(const ModelSpec& spec, const std::function<void(json&)>& edit) {
  json j = json::parse(export_spec_json(spec));
  edit(j);
  return j.dump();
}

}  // namespace

TEST_CASE("JSON round trip preserves the spec and its complexity") {
  for (const auto& spec : sample_specs()) {
    CAPTURE(spec.path.label());
    const auto text = export_spec_json(spec);
    const auto back = import_spec_json(text);
    CHECK(back == spec);
    CHECK(back.path.label() == spec.path.label());
    CHECK(export_spec_json(back) == text);
    CHECK(analyze(back, input_for_frames(300)) == analyze(spec, input_for_frames(300)));
  }
}

TEST_CASE("corrupted specs are rejected") {
  BuildRequest r;
  const auto spec = build(r);

  CHECK_THROWS_AS(import_spec_json("{"), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json("[]"), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["path"]["time"][2] = 3; })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["stages"][1]["stride"]["freq"] = 3; })),
                  SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["layers"][0]["stride"]["time"] = 3; })),
                  SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["schema_version"] = 2; })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["depth_label"] = 36; })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["family"] = "VGG"; })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["layers"].erase(3); })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["layers"][5]["out_channels"] = 33; })),
                  SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j.erase("layers"); })), SpecFormatError);
  CHECK_THROWS_AS(import_spec_json(corrupt(spec, [](json& j) { j["layers"][0]["groups"] = 0; })), SpecFormatError);
}

TEST_CASE("table rows") {
  const auto row = make_table_row(build(published_config_request("T14c")), "T14c");
  CHECK(row.params_millions == doctest::Approx(5.98));
  CHECK(row.flops_2s_giga == doctest::Approx(4.36));
  CHECK(row.flops_3s_giga == doctest::Approx(6.53));
  CHECK(row.endpoint == Downsampling{2, 16});
  CHECK(format_csv_row(row) == "T14c,\"[1,1,2,1,1]\",\"[1,2,2,2,2]\",2,16,5.98,4.36,6.53");
  CHECK(round2(2.344) == doctest::Approx(2.34));
  CHECK(format_millions(6635424) == "6.64");
  CHECK(format_giga(6832451584ull) == "6.83");
}

TEST_CASE("CSV round trip is lossless and byte stable") {
  std::vector<TableRow> rows;
  for (const auto& name : published_configs()) rows.push_back(make_table_row(build(published_config_request(name)), name));
  const auto text = format_table_csv(rows);
  const auto back = parse_table_csv(text);
  CHECK(back == rows);
  CHECK(format_table_csv(back) == text);
  CHECK(text.rfind(std::string(table_csv_header()) + "\n", 0) == 0);
}

TEST_CASE("malformed CSV") {
  CHECK_THROWS(parse_table_csv("index,wrong\n"));
  CHECK_THROWS(parse_csv_row("X,\"[1,1,1,1,1]\",\"[1,1,1,1,1]\",1,1,1.0,2.0"));
  CHECK_THROWS(parse_csv_row("X,\"[1,1,1,1,1]\",\"[1,1,1,1,1]\",2,1,1.0,2.0,3.0"));
  CHECK_THROWS(parse_csv_row("X,\"[1,1,3,1,1]\",\"[1,1,1,1,1]\",1,1,1.0,2.0,3.0"));
  CHECK_THROWS(parse_csv_row("X,\"[1,1,1,1,1]\",\"[1,1,1,1,1]\",1,1,abc,2.0,3.0"));
}

TEST_CASE("trellis DOT rendering") {
  const auto dot = render_trellis_dot();
  const std::regex node_decl(R"(\n  n\d_\d \[label=)");
  CHECK(std::distance(std::sregex_iterator(dot.begin(), dot.end(), node_decl), std::sregex_iterator()) == 36);
  const std::regex gold("fillcolor=gold");
  CHECK(std::distance(std::sregex_iterator(dot.begin(), dot.end(), gold), std::sregex_iterator()) == 2);
  CHECK(dot.find("n1_4 [label=\"(2,16)\"") != std::string::npos);
  CHECK(dot.find("n2_3 [label=\"(4,8)\"") != std::string::npos);
  CHECK(dot.find("penwidth=3") == std::string::npos);
  CHECK(dot.rfind("digraph", 0) == 0);

  DotOptions opt;
  opt.highlight_path = find_path_by_name("T14c");
  opt.highlight_family = TrellisEndpoint{2, 16};
  const auto hl = render_trellis_dot(opt);
  const std::regex red(R"(color=red, penwidth=3)");
  CHECK(std::distance(std::sregex_iterator(hl.begin(), hl.end(), red), std::sregex_iterator()) == 5);
  CHECK(hl.find("n0_0 -> n0_0 [label=\"(1,1)\", color=red") != std::string::npos);
  CHECK(hl.find("n0_1 -> n1_2 [label=\"(2,2)\", color=red") != std::string::npos);
  CHECK(hl.find("color=blue") != std::string::npos);
  CHECK(render_trellis_dot(opt) == hl);
}
