#include "stridelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace stridelab {

ScoreParseError::ScoreParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

TrialScoreSet::TrialScoreSet(std::vector<Trial> trials) : trials_(std::move(trials)) {
  for (const auto& t : trials_) {
    if (!std::isfinite(t.score)) throw std::invalid_argument("trial scores must be finite");
    targets_ += t.is_target ? 1 : 0;
  }
  if (targets_ == 0 || targets_ == trials_.size()) {
    throw std::invalid_argument("trial set needs at least one target and one non-target trial");
  }
}

namespace {

// Error rates at each candidate threshold: every unique score, then one past the maximum.
struct OperatingPoint {
  double threshold;
  double p_miss;
  double p_fa;
};

std::vector<OperatingPoint> sweep(const TrialScoreSet& set) {
  std::vector<Trial> sorted = set.trials();
  std::sort(sorted.begin(), sorted.end(), [](const Trial& a, const Trial& b) { return a.score < b.score; });
  if (sorted.front().score == sorted.back().score) {
    throw DegenerateScores("all trial scores are identical; no threshold separates the classes");
  }
  const double nt = static_cast<double>(set.targets());
  const double nn = static_cast<double>(set.nontargets());

  std::vector<OperatingPoint> pts;
  std::size_t below_target = 0;
  std::size_t below_nontarget = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].score;
    pts.push_back({s, below_target / nt, (nn - below_nontarget) / nn});
    for (; i < sorted.size() && sorted[i].score == s; ++i) {
      (sorted[i].is_target ? below_target : below_nontarget) += 1;
    }
  }
  pts.push_back({std::nextafter(sorted.back().score, std::numeric_limits<double>::infinity()), 1.0, 0.0});
  return pts;
}

}  // namespace

EerResult compute_eer(const TrialScoreSet& trials) {
  const auto pts = sweep(trials);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = pts[i].p_fa - pts[i].p_miss;
    if (d > 0.0) continue;
    if (d == 0.0 || i == 0) return {pts[i].p_fa, pts[i].threshold};
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    const double da = a.p_fa - a.p_miss;
    const double t = da / (da - d);
    return {a.p_fa + t * (b.p_fa - a.p_fa), a.threshold + t * (b.threshold - a.threshold)};
  }
  return {pts.back().p_fa, pts.back().threshold};  // unreachable: the last point has p_fa - p_miss = -1
}

DcfResult compute_min_dcf(const TrialScoreSet& trials, double p_target, double c_fa, double c_miss) {
  if (!(p_target > 0.0 && p_target < 1.0)) throw std::invalid_argument("p_target must lie in (0, 1)");
  if (!(c_fa > 0.0) || !(c_miss > 0.0)) throw std::invalid_argument("detection costs must be positive");
  const auto pts = sweep(trials);
  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& p : pts) {
    const double dcf = (c_miss * p.p_miss * p_target + c_fa * p.p_fa * (1.0 - p_target)) / norm;
    if (dcf < best.min_dcf) best = {dcf, p.threshold};
  }
  return best;
}

TrialScoreSet parse_scores(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string label;
    if (!(ss >> label)) continue;
    std::string score_text;
    if (!(ss >> score_text)) throw ScoreParseError(lineno, "missing score after label '" + label + "'");
    std::string extra;
    if (ss >> extra) throw ScoreParseError(lineno, "unexpected trailing field '" + extra + "'");

    Trial t;
    if (label == "target") {
      t.is_target = true;
    } else if (label != "nontarget") {
      throw ScoreParseError(lineno, "label must be 'target' or 'nontarget', got '" + label + "'");
    }
    std::size_t used = 0;
    try {
      t.score = std::stod(score_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != score_text.size() || !std::isfinite(t.score)) {
      throw ScoreParseError(lineno, "invalid score '" + score_text + "'");
    }
    trials.push_back(t);
  }
  try {
    return TrialScoreSet(std::move(trials));
  } catch (const std::invalid_argument& e) {
    throw ScoreParseError(lineno, e.what());
  }
}

TrialScoreSet read_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score file '" + path + "'");
  return parse_scores(in);
}

}  // namespace stridelab
