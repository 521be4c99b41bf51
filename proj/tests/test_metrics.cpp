#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "stridelab/metrics.hpp"

using namespace stridelab;

namespace {

TrialScoreSet make(std::vector<std::pair<double, bool>> v) {
  std::vector<Trial> t;
  for (auto [s, target] : v) t.push_back({s, target});
  return TrialScoreSet(std::move(t));
}

TrialScoreSet parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scores(in);
}

}  // namespace

TEST_CASE("perfect separation and perfect inversion") {
  const auto good = make({{0.9, true}, {0.8, true}, {0.1, false}, {0.2, false}});
  CHECK(compute_eer(good).eer == 0.0);
  CHECK(compute_min_dcf(good).min_dcf == 0.0);

  const auto bad = make({{0.1, true}, {0.2, true}, {0.9, false}, {0.8, false}});
  CHECK(compute_eer(bad).eer == doctest::Approx(1.0));
  CHECK(compute_min_dcf(bad).min_dcf == doctest::Approx(1.0));
}

TEST_CASE("hand-computed small case") {
  // thresholds 1,2,3,4: (miss, fa) = (0,1) (0,.5) (.5,.5) (.5,0)
  const auto s = make({{1.0, false}, {2.0, true}, {3.0, false}, {4.0, true}});
  CHECK(compute_eer(s).eer == doctest::Approx(0.5));
  CHECK(compute_eer(s).threshold == doctest::Approx(3.0));
  const auto d = compute_min_dcf(s, 0.5, 1.0, 1.0);
  CHECK(d.min_dcf == doctest::Approx(0.25 / 0.5));
}

TEST_CASE("agreement with the brute-force oracle on 1000 random sets") {
  std::mt19937_64 rng(20240611);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto set = oracle::random_trials(rng, i % 2 == 1);
    worst = std::max(worst, std::abs(compute_eer(set).eer - oracle::eer(set)));
    worst = std::max(worst, std::abs(compute_min_dcf(set).min_dcf - oracle::min_dcf(set, 0.01, 1.0, 1.0)));
    worst = std::max(worst, std::abs(compute_min_dcf(set, 0.05, 1.0, 10.0).min_dcf -
                                     oracle::min_dcf(set, 0.05, 1.0, 10.0)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("strictly increasing transforms leave both metrics unchanged") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto set = oracle::random_trials(rng, i % 3 == 0);
    std::vector<Trial> moved = set.trials();
    for (auto& t : moved) t.score = std::exp(0.5 * t.score) * 3.0 - 2.0;
    const TrialScoreSet other(std::move(moved));
    CHECK(compute_eer(other).eer == doctest::Approx(compute_eer(set).eer).epsilon(1e-12));
    CHECK(compute_min_dcf(other).min_dcf == doctest::Approx(compute_min_dcf(set).min_dcf).epsilon(1e-12));
  }
}

TEST_CASE("overlapping Gaussian scores approach the analytic error rate") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Trial> t;
  for (int i = 0; i < 20000; ++i) {
    t.push_back({n(rng) + 2.0, true});
    t.push_back({n(rng), false});
  }
  // equal variances with means 0 and 2 cross at 1: EER = Phi(-1)
  const double phi = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
  CHECK(std::abs(compute_eer(TrialScoreSet(t)).eer - phi) < 0.01);
}

TEST_CASE("scores without discrimination give a normalized minDCF of one") {
  std::vector<Trial> t;
  for (int i = 0; i < 50; ++i) {
    t.push_back({static_cast<double>(i % 5), true});
    t.push_back({static_cast<double>(i % 5), false});
  }
  const TrialScoreSet s(t);
  CHECK(compute_min_dcf(s).min_dcf == doctest::Approx(1.0));
  CHECK(compute_eer(s).eer == doctest::Approx(0.5));
}

TEST_CASE("degenerate inputs") {
  CHECK_NOTHROW(make({{0.3, true}, {0.3, false}, {0.4, true}}));
  CHECK_THROWS_AS(compute_eer(make({{0.3, true}, {0.3, false}})), DegenerateScores);
  CHECK_THROWS_AS(make({{0.3, true}, {0.4, true}}), std::invalid_argument);
  CHECK_THROWS_AS(make({{NAN, true}, {0.4, false}}), std::invalid_argument);
  const auto s = make({{1.0, true}, {0.0, false}});
  CHECK_THROWS_AS(compute_min_dcf(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_min_dcf(s, 0.01, -1.0), std::invalid_argument);
}

TEST_CASE("identical scores are degenerate") {
  std::vector<Trial> t = {{0.5, true}, {0.5, false}, {0.5, false}};
  const TrialScoreSet s(t);
  CHECK_THROWS_AS(compute_eer(s), DegenerateScores);
  CHECK_THROWS_AS(compute_min_dcf(s), DegenerateScores);
}

TEST_CASE("score file parsing") {
  const auto s = parse("# header\ntarget 0.9\n\nnontarget -1.5e-1  # trailing\n  target 2\n");
  CHECK(s.trials().size() == 3);
  CHECK(s.targets() == 2);
  CHECK(s.trials()[1].score == doctest::Approx(-0.15));

  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ScoreParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("target 1\nnontarget x\n") == 2);
  CHECK(line_of("target 1\nimpostor 0.2\n") == 2);
  CHECK(line_of("target 1\n\nnontarget\n") == 3);
  CHECK(line_of("target 1\nnontarget 0.1 extra\n") == 2);
  CHECK(line_of("target 1\nnontarget 0.1x\n") == 2);
  CHECK(line_of("target 1\nnontarget inf\n") == 2);
  CHECK(line_of("target 1\ntarget 2\n") == 2);
  CHECK_THROWS_AS(read_score_file("/nonexistent/scores.txt"), std::runtime_error);
}
