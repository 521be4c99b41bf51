#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace stridelab {

class DegenerateScores : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScoreParseError : public std::runtime_error {
 public:
  ScoreParseError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Trial {
  double score = 0.0;
  bool is_target = false;
};

/// Labelled similarity scores with at least one target and one non-target trial.
class TrialScoreSet {
 public:
  explicit TrialScoreSet(std::vector<Trial> trials);

  const std::vector<Trial>& trials() const { return trials_; }
  std::size_t targets() const { return targets_; }
  std::size_t nontargets() const { return trials_.size() - targets_; }

 private:
  std::vector<Trial> trials_;
  std::size_t targets_ = 0;
};

struct EerResult {
  double eer = 0.0;  // fraction in [0, 1]
  double threshold = 0.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

/// A trial is accepted when score >= threshold.
EerResult compute_eer(const TrialScoreSet& trials);
DcfResult compute_min_dcf(const TrialScoreSet& trials, double p_target = 0.01, double c_fa = 1.0,
                          double c_miss = 1.0);

/// One trial per line: "<target|nontarget> <score>". Text after '#' is ignored.
TrialScoreSet parse_scores(std::istream& in);
TrialScoreSet read_score_file(const std::string& path);

}  // namespace stridelab
