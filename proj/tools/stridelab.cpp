// stridelab: stride-configuration explorer for ResNet speaker-embedding backbones.
//
//   stridelab enumerate [--class C] [--endpoint a,b] [--published] [--dot]
//   stridelab build FAMILY DEPTH [--path P] [-o spec.json]
//   stridelab analyze FAMILY DEPTH [--path P] [--compare P2] [--layers] [--csv]
//   stridelab compare A B [--family F --depth D]
//   stridelab verify [--all-table3-configs] [--gradcheck] [--spec spec.json]
//   stridelab metrics SCORES [--p-target 0.01] [--c-fa 1] [--c-miss 1]
//   stridelab render [--endpoint a,b] [--path P] [--csv]
//
// Exit codes: 0 success, 1 usage, 2 build or input error, 3 verification failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "stridelab/analysis.hpp"
#include "stridelab/arch_builder.hpp"
#include "stridelab/metrics.hpp"
#include "stridelab/numkernel.hpp"
#include "stridelab/report.hpp"
#include "stridelab/trellis.hpp"

using namespace stridelab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitBuild = 2;
constexpr int kExitVerify = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_ints(const std::string& text, char sep) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not an integer list: '" + text + "'");
    }
  }
  return out;
}

TrellisEndpoint parse_endpoint(const std::string& text) {
  const auto v = parse_ints(text, ',');
  if (v.size() != 2) throw UsageError("endpoint must be ALPHA,BETA, got '" + text + "'");
  try {
    return TrellisEndpoint::make(v[0], v[1]);
  } catch (const InvariantError& e) {
    throw UsageError(e.what());
  }
}

// A configuration name ("T14c") or explicit rows ("1,1,2,1,1/1,2,2,2,2").
TrellisPath parse_path(const std::string& text) {
  if (auto named = find_path_by_name(text)) return *named;
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw UsageError("unknown stride configuration '" + text + "'");
  try {
    auto p = TrellisPath::from_rows(parse_ints(text.substr(0, slash), ','), parse_ints(text.substr(slash + 1), ','));
    p.set_label(canonical_name(p));
    return p;
  } catch (const InvariantError& e) {
    throw UsageError(e.what());
  }
}

std::string name_note(const std::string& name) { return is_extension_name(name) ? " (extension name)" : ""; }

struct ModelArgs {
  std::string family = "resnet";
  int depth = 34;
  std::string path;
  bool gemini = false;
  std::optional<int> se;
  std::optional<int> res2net;
  int embedding = 256;
  int freq_bins = 80;
  std::string blocks;
};

void add_model_options(CLI::App* cmd, ModelArgs& a, bool positional) {
  if (positional) {
    cmd->add_option("family", a.family, "resnet | original | modified | gemini | dfresnet | sdresnet")->required();
    cmd->add_option("depth", a.depth, "depth label, e.g. 34, 182, 183")->required();
  } else {
    cmd->add_option("--family", a.family, "model family")->capture_default_str();
    cmd->add_option("--depth", a.depth, "depth label")->capture_default_str();
  }
  cmd->add_option("--path", a.path, "stride configuration name or rows t1,..,t5/f1,..,f5");
  cmd->add_flag("--gemini", a.gemini, "use the Gemini reference configuration (T14c)");
  cmd->add_option("--se", a.se, "squeeze-excitation reduction ratio");
  cmd->add_option("--res2net", a.res2net, "Res2Net scale");
  cmd->add_option("--embedding", a.embedding, "embedding dimension")->capture_default_str();
  cmd->add_option("--freq-bins", a.freq_bins, "input frequency bins")->capture_default_str();
  cmd->add_option("--blocks", a.blocks, "explicit block counts m1,m2,m3,m4");
}

BuildRequest make_request(const ModelArgs& a, const std::string& path_override = {}) {
  BuildRequest req;
  req.depth_label = a.depth;
  req.embedding_dim = a.embedding;
  req.input_freq_bins = a.freq_bins;
  req.se_reduction = a.se;
  req.res2net_scale = a.res2net;
  if (!a.blocks.empty()) {
    const auto b = parse_ints(a.blocks, ',');
    if (b.size() != 4) throw UsageError("--blocks needs four counts");
    req.block_counts = std::array<int, 4>{b[0], b[1], b[2], b[3]};
  }

  const std::string& path_text = path_override.empty() ? a.path : path_override;
  std::optional<TrellisPath> path;
  if (!path_text.empty()) {
    path = parse_path(path_text);
  } else if (a.gemini) {
    path = find_path_by_name("T14c");
  }

  const std::string& f = a.family;
  if (f == "resnet") {
    req.family = path ? resnet_family_for(*path) : Family::ModifiedResNet;
  } else if (f == "original" || f == "original_resnet") {
    req.family = Family::OriginalResNet;
  } else if (f == "modified" || f == "modified_resnet") {
    req.family = Family::ModifiedResNet;
  } else if (f == "gemini" || f == "gemini_resnet") {
    req.family = Family::GeminiResNet;
    if (!path) path = find_path_by_name("T14c");
  } else if (f == "dfresnet" || f == "df_resnet") {
    req.family = Family::DFResNet;
  } else if (f == "sdresnet" || f == "sd_resnet") {
    req.family = Family::SDResNet;
  } else {
    throw UsageError("unknown family '" + f + "'");
  }
  req.path = path;
  return req;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& file, const std::string& text) {
  if (file.empty() || file == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file + "'");
  out << text;
}

// ---------------------------------------------------------------------------

struct EnumerateArgs {
  std::string klass;
  std::string endpoint;
  bool published = false;
  bool dot = false;
};

int cmd_enumerate(const EnumerateArgs& a) {
  std::optional<Priority> klass;
  if (!a.klass.empty()) {
    klass = parse_priority(a.klass);
    if (!klass) throw UsageError("unknown class '" + a.klass + "' (time-priority | equal | frequency-priority)");
  }
  std::optional<TrellisEndpoint> endpoint;
  if (!a.endpoint.empty()) endpoint = parse_endpoint(a.endpoint);

  if (a.dot) {
    DotOptions opts;
    opts.highlight_family = endpoint;
    std::cout << render_trellis_dot(opts);
    return 0;
  }

  std::cout << "# name   time_strides  freq_strides  alpha5 beta5 class\n";
  std::size_t rows = 0;
  for (const auto& p : enumerate_all_paths()) {
    if (klass && classify_path(p) != *klass) continue;
    if (endpoint && !(endpoint_of_path(p) == *endpoint)) continue;
    if (a.published && !is_published_config(p)) continue;
    const auto e = endpoint_of(p);
    const auto rows_text = p.rows_str();
    const auto slash = rows_text.find('/');
    char line[160];
    std::snprintf(line, sizeof line, "%-7s  %s  %s  %6d %5d %s%s", p.label().c_str(),
                  rows_text.substr(0, slash).c_str(), rows_text.substr(slash + 1).c_str(), e.alpha, e.beta,
                  std::string(to_string(classify_path(p))).c_str(), name_note(p.label()).c_str());
    std::cout << line << '\n';
    ++rows;
  }
  std::cout << "# " << rows << " paths\n";
  return 0;
}

int cmd_build(const ModelArgs& a, const std::string& out) {
  const ModelSpec spec = build(make_request(a));
  write_output(out, export_spec_json(spec) + "\n");
  return 0;
}

struct AnalyzeArgs {
  int frames2 = 200;
  int frames3 = 300;
  std::string compare;
  bool layers = false;
  bool csv = false;
};

void print_summary(const ModelSpec& spec, const AnalyzeArgs& a) {
  const auto r2 = analyze(spec, input_for_frames(a.frames2, spec.input_freq_bins));
  const auto r3 = count_flops(spec, input_for_frames(a.frames3, spec.input_freq_bins));
  const auto e = endpoint_of(spec.path);
  const std::string name = spec.path.label();
  std::cout << "model   " << to_string(spec.family) << " depth " << spec.depth_label
            << (spec.canonical ? "" : " (non-canonical path for this family)") << '\n';
  std::cout << "config  " << name << name_note(name) << "  " << spec.path.rows_str() << "  (" << e.alpha << ","
            << e.beta << ") " << to_string(classify_path(spec.path)) << '\n';
  std::cout << "params  " << format_millions(r2.params_total) << " M  (" << r2.params_total << ")\n";
  std::cout << "flops   " << format_giga(r2.flops_total) << " / " << format_giga(r3.flops_total) << " G  at "
            << spec.input_freq_bins << "x" << a.frames2 << " / " << spec.input_freq_bins << "x" << a.frames3 << "  ("
            << r2.flops_total << " / " << r3.flops_total << ")\n";
}

int cmd_analyze(const ModelArgs& m, const AnalyzeArgs& a) {
  const ModelSpec spec = build(make_request(m));
  if (a.csv) {
    std::cout << format_table_csv({make_table_row(spec, spec.path.label(), a.frames2, a.frames3)});
    return 0;
  }
  print_summary(spec, a);

  if (a.layers) {
    const auto input = input_for_frames(a.frames3, spec.input_freq_bins);
    const auto shapes = layer_shapes(spec, input);
    const auto r = analyze(spec, input);
    std::cout << "\n#  idx  name                              kind             output          params        flops\n";
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      char line[200];
      std::snprintf(line, sizeof line, "%6zu  %-32s  %-15s  %-14s %10llu %14llu", i, spec.layers[i].name.c_str(),
                    std::string(to_string(spec.layers[i].kind)).c_str(), shapes[i].str().c_str(),
                    static_cast<unsigned long long>(r.params_by_layer[i]),
                    static_cast<unsigned long long>(r.flops_by_layer[i]));
      std::cout << line << '\n';
    }
  }

  if (!a.compare.empty()) {
    ModelArgs other = m;
    if (m.family == "gemini" || m.family == "modified") other.family = "resnet";
    const ModelSpec b = build(make_request(other, a.compare));
    std::cout << "\ncompare " << b.path.label() << " against " << spec.path.label() << '\n';
    print_summary(b, a);
    const auto input = input_for_frames(a.frames3, spec.input_freq_bins);
    const auto d = compare(analyze(spec, input), analyze(b, input));
    char line[120];
    std::snprintf(line, sizeof line, "delta   params %+.2f%%  flops(%d frames) %+.2f%%\n", d.params_percent, a.frames3,
                  d.flops_percent);
    std::cout << line;
  }
  return 0;
}

ModelSpec spec_from_argument(const std::string& arg, const ModelArgs& m) {
  if (std::filesystem::is_regular_file(arg)) return import_spec_json(read_file(arg));
  return build(make_request(m, arg));
}

int cmd_compare(const std::string& a_arg, const std::string& b_arg, const ModelArgs& m, int frames) {
  const ModelSpec a = spec_from_argument(a_arg, m);
  const ModelSpec b = spec_from_argument(b_arg, m);
  const auto input = input_for_frames(frames, a.input_freq_bins);
  const auto ra = analyze(a, input);
  const auto rb = analyze(b, input);
  const auto d = compare(ra, rb);
  std::printf("%-8s params %s M  flops %s G\n", a.path.label().c_str(), format_millions(ra.params_total).c_str(),
              format_giga(ra.flops_total).c_str());
  std::printf("%-8s params %s M  flops %s G\n", b.path.label().c_str(), format_millions(rb.params_total).c_str(),
              format_giga(rb.flops_total).c_str());
  std::printf("delta    params %+.2f%%  flops %+.2f%%  (%d frames)\n", d.params_percent, d.flops_percent, frames);
  return 0;
}

// ---------------------------------------------------------------------------

struct NumericCheck {
  bool shapes_ok = false;
  bool flops_ok = false;
  std::uint64_t multiplies = 0;
  std::uint64_t flops = 0;
  double seconds = 0.0;
};

NumericCheck check_numeric(const ModelSpec& spec, int frames, std::uint64_t seed) {
  const TensorShape input = input_for_frames(frames, spec.input_freq_bins);
  Tensor4 x(1, 1, input.freq, input.time);
  fill_uniform(x.data(), seed, -1.0, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelRun run = run_model(spec, x, seed);
  NumericCheck c;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.shapes_ok = run.shapes == layer_shapes(spec, input);
  c.multiplies = run.counter.multiplies;
  c.flops = count_flops(spec, input).flops_total;
  c.flops_ok = c.multiplies == c.flops;
  return c;
}

LayerSpec random_conv_layer(std::mt19937_64& gen, TensorShape& input) {
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1)); };
  for (;;) {
    LayerSpec l;
    l.kind = LayerKind::Conv2D;
    l.name = "gradcheck";
    const int kind = pick(0, 3);  // 0: dense, 1: depthwise, 2: grouped, 3: pointwise
    const int cin = pick(1, 8);
    l.in_channels = cin;
    if (kind == 1) {
      l.groups = cin;
      l.out_channels = cin;
    } else if (kind == 2 && cin % 2 == 0) {
      l.groups = 2;
      l.out_channels = 2 * pick(1, 4);
    } else {
      l.out_channels = pick(1, 8);
    }
    const int k = kind == 3 ? 1 : pick(1, 3);
    l.kernel = {k, pick(1, 3)};
    l.stride = StridePair(pick(1, 2), pick(1, 2));
    l.padding = {pick(0, l.kernel.freq / 2 + 1), pick(0, l.kernel.time / 2 + 1)};
    l.dilation = {pick(1, 2), pick(1, 2)};
    input = TensorShape{cin, pick(3, 8), pick(3, 8)};
    const auto fo = conv_output_extent(input.freq, l.kernel.freq, l.stride.freq(), l.padding.freq, l.dilation.freq);
    const auto to = conv_output_extent(input.time, l.kernel.time, l.stride.time(), l.padding.time, l.dilation.time);
    if (fo >= 1 && to >= 1) return l;
  }
}

int cmd_verify(bool all_configs, bool gradcheck, const std::string& spec_file, const std::string& frames_text,
               int layers) {
  if (!all_configs && !gradcheck && spec_file.empty()) all_configs = gradcheck = true;
  const std::uint64_t seed = default_seed();
  std::size_t checks = 0;
  std::size_t failures = 0;

  if (!spec_file.empty()) {
    ModelSpec spec;
    try {
      spec = import_spec_json(read_file(spec_file));
    } catch (const std::exception& e) {
      std::cerr << "stridelab: rejected spec: " << e.what() << '\n';
      return kExitBuild;
    }
    for (int frames : parse_ints(frames_text, ',')) {
      const auto c = check_numeric(spec, frames, seed);
      ++checks;
      failures += (c.shapes_ok && c.flops_ok) ? 0 : 1;
      std::printf("%s spec %s %dx%d shapes=%s multiplies=%llu flops=%llu\n",
                  c.shapes_ok && c.flops_ok ? "PASS" : "FAIL", spec.path.label().c_str(), spec.input_freq_bins,
                  frames, c.shapes_ok ? "match" : "MISMATCH", static_cast<unsigned long long>(c.multiplies),
                  static_cast<unsigned long long>(c.flops));
    }
  }

  if (all_configs) {
    for (const auto& name : published_configs()) {
      const ModelSpec spec = build(published_config_request(name));
      for (int frames : parse_ints(frames_text, ',')) {
        const auto c = check_numeric(spec, frames, seed);
        ++checks;
        failures += (c.shapes_ok && c.flops_ok) ? 0 : 1;
        std::printf("%s config %-5s 80x%d shapes=%s multiplies=%llu flops=%llu (%.1fs)\n",
                    c.shapes_ok && c.flops_ok ? "PASS" : "FAIL", name.c_str(), frames,
                    c.shapes_ok ? "match" : "MISMATCH", static_cast<unsigned long long>(c.multiplies),
                    static_cast<unsigned long long>(c.flops), c.seconds);
        std::fflush(stdout);
      }
    }
  }

  if (gradcheck) {
    std::mt19937_64 gen(seed);
    double worst = 0.0;
    std::size_t failed_layers = 0;
    for (int i = 0; i < layers; ++i) {
      TensorShape input;
      const LayerSpec l = random_conv_layer(gen, input);
      const auto r = gradcheck_conv(l, input, 64, 1e-4, gen());
      worst = std::max(worst, r.max_rel_error);
      if (!r.passed()) {
        ++failed_layers;
        std::printf("FAIL gradcheck layer %d: %s\n", i, r.failures.front().c_str());
      }
    }
    ++checks;
    failures += failed_layers ? 1 : 0;
    std::printf("%s gradcheck layers=%d max_rel_err=%.3e tolerance=1e-04\n", failed_layers ? "FAIL" : "PASS", layers,
                worst);
  }

  std::printf("{\"checks\": %zu, \"failures\": %zu}\n", checks, failures);
  return failures ? kExitVerify : 0;
}

int cmd_metrics(const std::string& file, double p_target, double c_fa, double c_miss) {
  const TrialScoreSet set = read_score_file(file);
  const auto eer = compute_eer(set);
  const auto dcf = compute_min_dcf(set, p_target, c_fa, c_miss);
  std::printf("trials  %zu (%zu target, %zu nontarget)\n", set.trials().size(), set.targets(), set.nontargets());
  std::printf("EER %.3f%%  threshold %.6g\n", eer.eer * 100.0, eer.threshold);
  std::printf("minDCF %.4f  threshold %.6g  (p_target %g, c_fa %g, c_miss %g)\n", dcf.min_dcf, dcf.threshold,
              p_target, c_fa, c_miss);
  return 0;
}

int cmd_render(const std::string& endpoint, const std::string& path, bool csv, const std::string& out) {
  if (csv) {
    std::vector<TableRow> rows;
    for (const auto& name : published_configs()) {
      rows.push_back(make_table_row(build(published_config_request(name)), name));
    }
    write_output(out, format_table_csv(rows));
    return 0;
  }
  DotOptions opts;
  if (!endpoint.empty()) opts.highlight_family = parse_endpoint(endpoint);
  if (!path.empty()) opts.highlight_path = parse_path(path);
  write_output(out, render_trellis_dot(opts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stride-configuration explorer for ResNet speaker-embedding backbones"};
  app.require_subcommand(1);

  EnumerateArgs en;
  auto* enumerate = app.add_subcommand("enumerate", "list stride configurations or emit the trellis as DOT");
  enumerate->add_option("--class", en.klass, "time-priority | equal | frequency-priority");
  enumerate->add_option("--endpoint", en.endpoint, "ALPHA,BETA endpoint filter");
  enumerate->add_flag("--published", en.published, "only configurations with published figures");
  enumerate->add_flag("--dot", en.dot, "emit Graphviz DOT instead of a table");

  ModelArgs build_args;
  std::string build_out;
  auto* build_cmd = app.add_subcommand("build", "elaborate a model and export it as JSON");
  add_model_options(build_cmd, build_args, true);
  build_cmd->add_option("-o,--output", build_out, "output file (stdout by default)");

  ModelArgs an_model;
  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "parameter and FLOPs accounting for one model");
  add_model_options(analyze_cmd, an_model, true);
  analyze_cmd->add_option("--frames2", an.frames2, "frames of the short input")->capture_default_str();
  analyze_cmd->add_option("--frames3", an.frames3, "frames of the long input")->capture_default_str();
  analyze_cmd->add_option("--compare", an.compare, "second configuration to compare against");
  analyze_cmd->add_flag("--layers", an.layers, "per-layer breakdown");
  analyze_cmd->add_flag("--csv", an.csv, "emit a CSV table row");

  ModelArgs cmp_model;
  std::string cmp_a, cmp_b;
  int cmp_frames = 300;
  auto* compare_cmd = app.add_subcommand("compare", "relative change between two configurations or spec files");
  compare_cmd->add_option("a", cmp_a, "baseline: configuration name or spec JSON")->required();
  compare_cmd->add_option("b", cmp_b, "candidate: configuration name or spec JSON")->required();
  add_model_options(compare_cmd, cmp_model, false);
  compare_cmd->add_option("--frames", cmp_frames, "input frames")->capture_default_str();

  bool v_all = false, v_grad = false;
  std::string v_spec, v_frames = "200,300";
  int v_layers = 100;
  auto* verify = app.add_subcommand("verify", "numeric cross-checks of the symbolic analysis");
  verify->add_flag("--all-table3-configs", v_all, "run every published configuration through the numeric kernel");
  verify->add_flag("--gradcheck", v_grad, "finite-difference gradient checks on random conv layers");
  verify->add_option("--spec", v_spec, "check an exported spec JSON file");
  verify->add_option("--frames", v_frames, "comma-separated input frame counts")->capture_default_str();
  verify->add_option("--layers", v_layers, "random layers for --gradcheck")->capture_default_str();

  std::string m_file;
  double p_target = 0.01, c_fa = 1.0, c_miss = 1.0;
  auto* metrics = app.add_subcommand("metrics", "EER and minDCF from a score file");
  metrics->add_option("scores", m_file, "lines of '<target|nontarget> <score>'")->required();
  metrics->add_option("--p-target", p_target, "target prior")->capture_default_str();
  metrics->add_option("--c-fa", c_fa, "false-alarm cost")->capture_default_str();
  metrics->add_option("--c-miss", c_miss, "miss cost")->capture_default_str();

  std::string r_endpoint, r_path, r_out;
  bool r_csv = false;
  auto* render = app.add_subcommand("render", "trellis DOT or the published-configuration CSV table");
  render->add_option("--endpoint", r_endpoint, "highlight the paths reaching ALPHA,BETA");
  render->add_option("--path", r_path, "highlight one stride configuration");
  render->add_flag("--csv", r_csv, "emit the complexity table as CSV");
  render->add_option("-o,--output", r_out, "output file (stdout by default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*enumerate) return cmd_enumerate(en);
    if (*build_cmd) return cmd_build(build_args, build_out);
    if (*analyze_cmd) return cmd_analyze(an_model, an);
    if (*compare_cmd) return cmd_compare(cmp_a, cmp_b, cmp_model, cmp_frames);
    if (*verify) return cmd_verify(v_all, v_grad, v_spec, v_frames, v_layers);
    if (*metrics) return cmd_metrics(m_file, p_target, c_fa, c_miss);
    if (*render) return cmd_render(r_endpoint, r_path, r_csv, r_out);
  } catch (const UsageError& e) {
    std::cerr << "stridelab: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "stridelab: " << e.what() << '\n';
    return kExitBuild;
  }
  return kExitUsage;
}
