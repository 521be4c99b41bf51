#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stridelab/core_types.hpp"
#include "stridelab/trellis.hpp"

namespace stridelab {

class SpecFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

/// ModelSpec as JSON (schema_version 1, flat layer list).
std::string export_spec_json(const ModelSpec& spec, int indent = 2);
/// Parses and validates: stride values, layer invariants, depth label and that the layer
/// list matches what the stage descriptors elaborate to.
ModelSpec import_spec_json(std::string_view text);

/// One line of a complexity table. Numeric columns hold values rounded to 2 decimals.
struct TableRow {
  std::string config_index;
  TrellisPath path;
  Downsampling endpoint;
  double params_millions = 0.0;
  double flops_2s_giga = 0.0;
  double flops_3s_giga = 0.0;

  bool operator==(const TableRow&) const = default;
};

double round2(double v);
TableRow make_table_row(const ModelSpec& spec, std::string config_index, int frames_2s = 200, int frames_3s = 300);

std::string_view table_csv_header();
std::string format_csv_row(const TableRow& row);
TableRow parse_csv_row(std::string_view line);
std::string format_table_csv(const std::vector<TableRow>& rows);
std::vector<TableRow> parse_table_csv(std::string_view text);

std::string format_millions(std::uint64_t count);  // "6.64"
std::string format_giga(std::uint64_t count);      // "6.83"

struct DotOptions {
  std::optional<TrellisEndpoint> highlight_family;
  std::optional<TrellisPath> highlight_path;
};

/// Graphviz digraph of the 6x6 endpoint grid with stride-labelled edges.
std::string render_trellis_dot(const DotOptions& options = {});

}  // namespace stridelab
