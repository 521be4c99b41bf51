#include "stridelab/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stridelab/analysis.hpp"
#include "stridelab/arch_builder.hpp"

namespace stridelab {

using nlohmann::json;

namespace {

json stride_json(const StridePair& s) { return json{{"time", s.time()}, {"freq", s.freq()}}; }
json extent_json(const Extent2D& e) { return json::array({e.freq, e.time}); }

json layer_json(const LayerSpec& l) {
  json j{{"kind", to_string(l.kind)}, {"role", to_string(l.role)}, {"name", l.name}, {"stage", l.stage},
         {"block", l.block}};
  switch (l.kind) {
    case LayerKind::Conv2D:
    case LayerKind::HierConv2D:
    case LayerKind::MaxPool2D:
      if (l.kind != LayerKind::MaxPool2D) {
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["groups"] = l.groups;
        j["bias"] = l.bias;
      }
      if (l.kind == LayerKind::HierConv2D) j["scale"] = l.scale;
      j["kernel"] = extent_json(l.kernel);
      j["stride"] = stride_json(l.stride);
      j["padding"] = extent_json(l.padding);
      j["dilation"] = extent_json(l.dilation);
      break;
    case LayerKind::BatchNorm:
      j["channels"] = l.channels;
      break;
    case LayerKind::SqueezeExcite:
      j["channels"] = l.channels;
      j["reduction"] = l.reduction;
      j["bias"] = l.bias;
      break;
    case LayerKind::FullyConnected:
      j["in_dim"] = l.in_dim;
      j["out_dim"] = l.out_dim;
      j["bias"] = l.bias;
      break;
    default:
      break;
  }
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw SpecFormatError(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

template <typename E>
E enum_field(const json& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
  const auto text = field<std::string>(j, key);
  const auto v = parse(text);
  if (!v) throw SpecFormatError(std::string("unknown ") + key + " '" + text + "'");
  return *v;
}

StridePair parse_stride(const json& j) { return StridePair(field<int>(j, "time"), field<int>(j, "freq")); }

Extent2D parse_extent(const json& j, const char* key, Extent2D fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw SpecFormatError(std::string("'") + key + "' must be [freq, time]");
  return Extent2D{a[0].get<int>(), a[1].get<int>()};
}

LayerSpec parse_layer(const json& j) {
  LayerSpec l;
  l.kind = enum_field<LayerKind>(j, "kind", parse_layer_kind);
  l.role = enum_field<LayerRole>(j, "role", parse_layer_role);
  l.name = field<std::string>(j, "name");
  l.stage = field<int>(j, "stage");
  l.block = field<int>(j, "block");
  l.in_channels = field_or(j, "in_channels", 0);
  l.out_channels = field_or(j, "out_channels", 0);
  l.groups = field_or(j, "groups", 1);
  l.scale = field_or(j, "scale", 1);
  l.bias = field_or(j, "bias", false);
  l.kernel = parse_extent(j, "kernel", {1, 1});
  l.padding = parse_extent(j, "padding", {0, 0});
  l.dilation = parse_extent(j, "dilation", {1, 1});
  if (j.contains("stride")) l.stride = parse_stride(j.at("stride"));
  l.channels = field_or(j, "channels", 0);
  l.reduction = field_or(j, "reduction", 1);
  l.in_dim = field_or(j, "in_dim", 0);
  l.out_dim = field_or(j, "out_dim", 0);
  l.validate();
  return l;
}

TrellisPath parse_path(const json& j) {
  auto p = TrellisPath::from_rows(field<std::vector<int>>(j, "time"), field<std::vector<int>>(j, "freq"),
                                  field_or<std::string>(j, "label", ""));
  return p;
}

ModelSpec parse_spec(const json& root) {
  if (!root.is_object()) throw SpecFormatError("top level must be an object");
  const int version = field<int>(root, "schema_version");
  if (version != kSchemaVersion) throw SpecFormatError("unsupported schema_version " + std::to_string(version));

  ModelSpec spec;
  spec.family = enum_field<Family>(root, "family", parse_family);
  spec.depth_label = field<int>(root, "depth_label");
  spec.base_channels = field<int>(root, "base_channels");
  spec.input_freq_bins = field<int>(root, "input_freq_bins");
  spec.path = parse_path(root.at("path"));
  spec.canonical = field<bool>(root, "canonical");

  const json& stages = root.at("stages");
  if (!stages.is_array() || stages.size() != spec.stages.size()) throw SpecFormatError("expected 4 stages");
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const json& s = stages[i];
    StageDesc& d = spec.stages[i];
    d.index = field<int>(s, "index");
    const json& b = s.at("block");
    d.block.type = enum_field<BlockType>(b, "type", parse_block_type);
    if (b.contains("se_reduction")) d.block.se_reduction = b.at("se_reduction").get<int>();
    if (b.contains("res2net_scale")) d.block.res2net_scale = b.at("res2net_scale").get<int>();
    d.block.validate();
    d.blocks = field<int>(s, "blocks");
    d.channels = field<int>(s, "channels");
    d.stride = parse_stride(s.at("stride"));
    d.downsample_layer = field<bool>(s, "downsample_layer");
  }

  const json& head = root.at("head");
  spec.head.pooling = enum_field<PoolingKind>(head, "pooling", parse_pooling_kind);
  spec.head.embedding_dim = field<int>(head, "embedding_dim");

  for (const json& l : root.at("layers")) spec.layers.push_back(parse_layer(l));
  return spec;
}

void check_consistency(const ModelSpec& spec) {
  for (const auto& s : spec.stages) {
    if (s.blocks < 1 || s.channels < 1) throw SpecFormatError("stage " + std::to_string(s.index) + " is empty");
  }
  int m = 0;
  for (const auto& s : spec.stages) m += s.blocks;
  const int depth = depth_from_blocks(spec.stages[0].block.type, m, separate_downsample_count(spec));
  if (depth != spec.depth_label) {
    throw SpecFormatError("depth_label " + std::to_string(spec.depth_label) + " does not match the stages (" +
                          std::to_string(depth) + ")");
  }
  std::vector<LayerSpec> expected;
  try {
    expected = elaborate(spec);
  } catch (const std::exception& e) {
    throw SpecFormatError(std::string("stage descriptors do not elaborate: ") + e.what());
  }
  if (expected.size() != spec.layers.size()) {
    throw SpecFormatError("layer list has " + std::to_string(spec.layers.size()) + " entries, stages describe " +
                          std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!(expected[i] == spec.layers[i])) {
      throw SpecFormatError("layer " + std::to_string(i) + " ('" + spec.layers[i].name +
                            "') does not match the stage descriptors");
    }
  }
}

}  // namespace

std::string export_spec_json(const ModelSpec& spec, int indent) {
  json root;
  root["schema_version"] = kSchemaVersion;
  root["family"] = to_string(spec.family);
  root["depth_label"] = spec.depth_label;
  root["base_channels"] = spec.base_channels;
  root["input_freq_bins"] = spec.input_freq_bins;
  root["canonical"] = spec.canonical;
  const auto t = spec.path.time_row();
  const auto f = spec.path.freq_row();
  root["path"] = json{{"label", spec.path.label()},
                      {"time", std::vector<int>(t.begin(), t.end())},
                      {"freq", std::vector<int>(f.begin(), f.end())}};
  json stages = json::array();
  for (const auto& s : spec.stages) {
    json block{{"type", to_string(s.block.type)}};
    if (s.block.se_reduction) block["se_reduction"] = *s.block.se_reduction;
    if (s.block.res2net_scale) block["res2net_scale"] = *s.block.res2net_scale;
    stages.push_back(json{{"index", s.index},
                          {"block", block},
                          {"blocks", s.blocks},
                          {"channels", s.channels},
                          {"stride", stride_json(s.stride)},
                          {"downsample_layer", s.downsample_layer}});
  }
  root["stages"] = stages;
  root["head"] = json{{"pooling", to_string(spec.head.pooling)}, {"embedding_dim", spec.head.embedding_dim}};
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_json(l));
  root["layers"] = layers;
  return root.dump(indent);
}

ModelSpec import_spec_json(std::string_view text) {
  ModelSpec spec;
  try {
    spec = parse_spec(json::parse(text));
  } catch (const json::exception& e) {
    throw SpecFormatError(std::string("malformed spec JSON: ") + e.what());
  } catch (const InvariantError& e) {
    throw SpecFormatError(std::string("invalid spec: ") + e.what());
  }
  check_consistency(spec);
  return spec;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

TableRow make_table_row(const ModelSpec& spec, std::string config_index, int frames_2s, int frames_3s) {
  const auto r2 = analyze(spec, input_for_frames(frames_2s, spec.input_freq_bins));
  const auto r3 = count_flops(spec, input_for_frames(frames_3s, spec.input_freq_bins));
  TableRow row;
  row.config_index = std::move(config_index);
  row.path = spec.path;
  row.path.set_label(row.config_index);
  row.endpoint = endpoint_of(spec.path);
  row.params_millions = round2(static_cast<double>(r2.params_total) / 1e6);
  row.flops_2s_giga = round2(static_cast<double>(r2.flops_total) / 1e9);
  row.flops_3s_giga = round2(static_cast<double>(r3.flops_total) / 1e9);
  return row;
}

std::string_view table_csv_header() {
  return "index,time_strides,freq_strides,alpha5,beta5,params_m,flops_2s_g,flops_3s_g";
}

namespace {

std::string row_text(const std::array<int, kStages>& r) {
  std::string s = "[";
  for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + std::to_string(r[i]);
  return s + "]";
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote in CSV row");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw std::invalid_argument("stride row must look like [1,2,...], got '" + text + "'");
  }
  std::vector<int> out;
  std::stringstream ss(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("invalid number '" + text + "'");
  return v;
}

}  // namespace

std::string format_csv_row(const TableRow& row) {
  return row.config_index + ",\"" + row_text(row.path.time_row()) + "\",\"" + row_text(row.path.freq_row()) + "\"," +
         std::to_string(row.endpoint.alpha) + "," + std::to_string(row.endpoint.beta) + "," +
         fixed2(row.params_millions) + "," + fixed2(row.flops_2s_giga) + "," + fixed2(row.flops_3s_giga);
}

TableRow parse_csv_row(std::string_view line) {
  const auto cells = split_csv(line);
  if (cells.size() != 8) throw std::invalid_argument("expected 8 CSV fields, got " + std::to_string(cells.size()));
  TableRow row;
  row.config_index = cells[0];
  row.path = TrellisPath::from_rows(parse_int_list(cells[1]), parse_int_list(cells[2]), cells[0]);
  row.endpoint = {std::stoi(cells[3]), std::stoi(cells[4])};
  if (!(row.endpoint == endpoint_of(row.path))) {
    throw std::invalid_argument("endpoint columns disagree with the stride rows for '" + cells[0] + "'");
  }
  row.params_millions = parse_number(cells[5]);
  row.flops_2s_giga = parse_number(cells[6]);
  row.flops_3s_giga = parse_number(cells[7]);
  return row;
}

std::string format_table_csv(const std::vector<TableRow>& rows) {
  std::string out(table_csv_header());
  out += '\n';
  for (const auto& r : rows) out += format_csv_row(r) + '\n';
  return out;
}

std::vector<TableRow> parse_table_csv(std::string_view text) {
  std::vector<TableRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != table_csv_header()) {
    throw std::invalid_argument("missing or unexpected CSV header");
  }
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_csv_row(line));
  }
  return rows;
}

std::string format_millions(std::uint64_t count) { return fixed2(static_cast<double>(count) / 1e6); }
std::string format_giga(std::uint64_t count) { return fixed2(static_cast<double>(count) / 1e9); }

std::string render_trellis_dot(const DotOptions& options) {
  auto node = [](int a, int b) { return "n" + std::to_string(a) + "_" + std::to_string(b); };

  // (from, to) exponent pairs touched by the highlighted path
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> path_edges;
  if (options.highlight_path) {
    int a = 0, b = 0;
    for (const auto& s : options.highlight_path->steps()) {
      const int na = a + (s.time() == 2 ? 1 : 0);
      const int nb = b + (s.freq() == 2 ? 1 : 0);
      path_edges.insert({{a, b}, {na, nb}});
      a = na;
      b = nb;
    }
  }
  auto in_family = [&](int a, int b) {
    if (!options.highlight_family) return false;
    return a <= options.highlight_family->time_exponent() && b <= options.highlight_family->freq_exponent();
  };

  std::ostringstream out;
  out << "digraph trellis {\n";
  out << "  graph [layout=neato, splines=true, label=\"stride trellis: alpha (time) right, beta (freq) up\"];\n";
  out << "  node [shape=circle, fontsize=10];\n";
  out << "  edge [fontsize=8];\n";
  for (int a = 0; a <= kStages; ++a) {
    for (int b = 0; b <= kStages; ++b) {
      const TrellisEndpoint e{1 << a, 1 << b};
      out << "  " << node(a, b) << " [label=\"" << e.str() << "\", pos=\"" << a * 1.5 << "," << b * 1.5 << "!\"";
      if (is_golden_gemini(e)) out << ", shape=doublecircle, style=filled, fillcolor=gold";
      if (options.highlight_family && e == *options.highlight_family) out << ", color=red, penwidth=2";
      out << "];\n";
    }
  }
  for (int a = 0; a <= kStages; ++a) {
    for (int b = 0; b <= kStages; ++b) {
      struct Move {
        int da, db;
        const char* label;
      };
      for (const Move mv : {Move{0, 0, "(1,1)"}, Move{1, 0, "(2,1)"}, Move{0, 1, "(1,2)"}, Move{1, 1, "(2,2)"}}) {
        const int na = a + mv.da;
        const int nb = b + mv.db;
        if (na > kStages || nb > kStages) continue;
        out << "  " << node(a, b) << " -> " << node(na, nb) << " [label=\"" << mv.label << "\"";
        if (path_edges.count({{a, b}, {na, nb}})) {
          out << ", color=red, penwidth=3";
        } else if (in_family(a, b) && in_family(na, nb)) {
          out << ", color=blue";
        } else {
          out << ", color=gray";
        }
        out << "];\n";
      }
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace stridelab
