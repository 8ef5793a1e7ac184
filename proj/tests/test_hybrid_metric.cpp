#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rankweave/error.hpp"
#include "rankweave/hybrid_metric.hpp"

using namespace rankweave;

namespace {

MetricParams fixture_params() {
  MetricParams p;
  p.rating_irs = {0.0, 1.0, 2.0};
  p.gamma = 0.5;
  p.wmp = 0.5;
  return p;
}

RatingInputs random_inputs(std::mt19937& rng) {
  std::uniform_int_distribution<int> grade(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return RatingInputs{grade(rng), unit(rng), unit(rng) < 0.4 ? 1 : 0};
}

MetricParams random_params(std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MetricParams p;
  p.rating_irs = {0.0, 0.3 + unit(rng), 0.0};
  p.rating_irs[2] = p.rating_irs[1] + 0.2 + unit(rng);
  p.gamma = 0.1 + 0.8 * unit(rng);
  p.wmp = 0.1 + 0.8 * unit(rng);
  double b = -0.8 + 0.4 * unit(rng);
  for (auto& x : p.boundaries) {
    x = b;
    b += 0.05 + 0.4 * unit(rng);
  }
  p.sigma = 0.1 + 0.5 * unit(rng);
  return p;
}

std::vector<PairObservation> random_pairs(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> count(0, 9);
  std::vector<PairObservation> pairs;
  for (int i = 0; i < n; ++i) {
    PairObservation o{random_inputs(rng), random_inputs(rng), {}};
    for (auto& c : o.counts) c = count(rng);
    o.counts[2] += 1;
    pairs.push_back(o);
  }
  return pairs;
}

// Observed verdicts whose probability sits below the log floor make the
// clamped loss flat, so finite differences cannot see the unclamped gradient.
bool clear_of_floor(const std::vector<PairObservation>& pairs, const MetricParams& p) {
  for (const auto& o : pairs) {
    const auto probs = pair_label_probabilities(compute_rating(o.left, p), compute_rating(o.right, p), p);
    for (std::size_t j = 0; j < kVerdictCount; ++j) {
      if (o.counts[j] > 0 && probs[j] < 1e-9) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("hybrid rating fixtures") {
  const MetricParams p = fixture_params();
  CHECK(compute_rating(0, 1.0, 0, p) == 0.0);
  CHECK(compute_rating(2, 1.0, 0, p) == 1.0);
  CHECK(compute_rating(1, 0.8, 1, p) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(compute_rating(2, 0.0, 1, p) == 0.75);
  CHECK(compute_rating(1, 1.0, 0, p) == 0.5);
  CHECK(compute_rating(2, 0.0, 1, p) > compute_rating(1, 1.0, 0, p));
  CHECK_THROWS_AS(compute_rating(3, 0.5, 0, p), ValidationError);
}

TEST_CASE("property: rating monotonicity, penalty and range") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const MetricParams p = random_params(rng);
    for (int ir = 0; ir <= 2; ++ir) {
      for (int k = 0; k <= 20; ++k) {
        const double ia = k / 20.0;
        const double clean = compute_rating(ir, ia, 0, p);
        const double marked = compute_rating(ir, ia, 1, p);
        CHECK(clean >= 0.0);
        CHECK(clean <= 1.0 + 1e-15);
        CHECK(marked <= clean);
        const double width = p.rating_irs[ir] - p.rating_irs[std::max(ir - 1, 0)];
        if (p.wmp * ia * width * p.gamma == 0.0) {
          CHECK(marked == doctest::Approx(clean).epsilon(1e-14));
        } else {
          CHECK(marked < clean);
        }
        if (k > 0) {
          const double prev = compute_rating(ir, (k - 1) / 20.0, 0, p);
          if (ir >= 1) {
            CHECK(clean > prev);
          } else {
            CHECK(clean == prev);
          }
        }
        if (ir == 0) CHECK(clean == 0.0);
      }
    }
    CHECK(compute_rating(2, 1.0, 0, p) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("relevance dominance margin") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const MetricParams p = trial == 0 ? fixture_params() : random_params(rng);
    for (int g = 1; g <= 2; ++g) {
      double lowest = 1e9;
      double highest = -1e9;
      for (int k = 0; k <= 20; ++k) {
        for (int wm = 0; wm <= 1; ++wm) {
          lowest = std::min(lowest, compute_rating(g, k / 20.0, wm, p));
          highest = std::max(highest, compute_rating(g - 1, k / 20.0, wm, p));
        }
      }
      const double width = p.rating_irs[g] - p.rating_irs[g - 1];
      CHECK(lowest - highest ==
            doctest::Approx(width * (1.0 - p.gamma) / p.rating_excellent()).epsilon(1e-12));
    }
  }
}

TEST_CASE("standard normal cdf") {
  CHECK(standard_normal_cdf(0.0) == 0.5);
  CHECK(standard_normal_cdf(8.0) > 1.0 - 1e-14);
  CHECK(standard_normal_cdf(-8.0) < 1e-14);
  CHECK(std::abs(standard_normal_cdf(1.0) - 0.8413447) < 1e-6);
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    CHECK(std::abs(standard_normal_cdf(x) - oracle::normal_cdf_by_quadrature(x)) < 1e-7);
  }
}

TEST_CASE("verdict probabilities") {
  MetricParams p;
  p.boundaries = {-0.6, -0.2, 0.2, 0.6};
  p.sigma = 1.0 / std::sqrt(2.0);
  const auto at_zero = pair_label_probabilities(0.3, 0.3, p);
  CHECK(at_zero[0] == doctest::Approx(at_zero[4]).epsilon(1e-14));
  CHECK(at_zero[1] == doctest::Approx(at_zero[3]).epsilon(1e-14));
  const double expected_p2 =
      oracle::normal_cdf_by_quadrature(0.2) - oracle::normal_cdf_by_quadrature(-0.2);
  CHECK(std::abs(expected_p2 - 0.1585) < 1e-3);
  CHECK(at_zero[2] == doctest::Approx(expected_p2).epsilon(1e-9));

  // Larger left rating favours "left better".
  const auto left_wins = pair_label_probabilities(1.0, 0.0, p);
  CHECK(left_wins[0] > left_wins[4]);
  CHECK(left_wins[0] > 0.5);

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> mu(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const MetricParams q = random_params(rng);
    const double a = mu(rng);
    const double b = mu(rng);
    const auto probs = pair_label_probabilities(a, b, q);
    double sum = 0.0;
    for (double x : probs) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("property: swapping sides reverses probabilities for symmetric boundaries") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    MetricParams p;
    const double inner = 0.05 + 0.3 * unit(rng);
    const double outer = inner + 0.05 + 0.5 * unit(rng);
    p.boundaries = {-outer, -inner, inner, outer};
    p.sigma = 0.05 + unit(rng);
    const double a = unit(rng);
    const double b = unit(rng);
    const auto fwd = pair_label_probabilities(a, b, p);
    const auto rev = pair_label_probabilities(b, a, p);
    for (std::size_t j = 0; j < kVerdictCount; ++j) {
      CHECK(fwd[j] == doctest::Approx(rev[kVerdictCount - 1 - j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("metric loss") {
  const MetricParams p = fixture_params();
  CHECK(metric_loss({}, p) == 0.0);

  // All five verdicts on one label.
  PairObservation single{{2, 1.0, 0}, {1, 0.8, 1}, {0, 5, 0, 0, 0}};
  const auto probs = pair_label_probabilities(1.0, 0.35, p);
  CHECK(metric_loss(std::vector{single}, p) == doctest::Approx(-5.0 * std::log(probs[1])));

  // Two pairs, expected cost summed by hand from independently evaluated
  // normal CDF differences.
  const std::vector<PairObservation> two = {
      {{2, 1.0, 0}, {1, 0.8, 1}, {3, 1, 1, 0, 0}},
      {{1, 1.0, 0}, {2, 0.0, 1}, {0, 0, 2, 2, 1}},
  };
  CHECK(std::abs(metric_loss(two, p) - 12.734360882698983) < 1e-9);
  CHECK(metric_loss(two, p, 4) == metric_loss(two, p, 1));
}

TEST_CASE("make_observations requires labels") {
  Dataset ds;
  ds.groups.push_back(QueryGroup{"q", {}});
  for (const char* id : {"a", "b"}) {
    Document d;
    d.query_id = "q";
    d.doc_id = id;
    d.ir_label = 1;
    d.ia_label = 0.5;
    d.wm_label = 0;
    ds.groups[0].documents.push_back(d);
  }
  JudgedPair pair{"q", "a", "b", {0, 0}, {0, 1}, {1, 0, 0, 0, 0}};
  CHECK(make_observations(std::vector{pair}, ds).size() == 1);
  ds.groups[0].documents[1].wm_label.reset();
  CHECK_THROWS_AS(make_observations(std::vector{pair}, ds), ValidationError);
}

TEST_CASE("reparameterization round trip") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const MetricParams p = random_params(rng);
    const MetricParams back = from_unconstrained(to_unconstrained(p));
    const auto a = to_vector(p);
    const auto b = to_vector(back);
    for (std::size_t k = 0; k < kMetricParamCount; ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-12));
  }
  ParamVector wild{};
  for (auto& x : wild) x = 3.0;
  wild[4] = -50.0;
  CHECK_NOTHROW(from_unconstrained(wild).validate());
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto pairs = random_pairs(rng, 50);
    MetricParams p = random_params(rng);
    while (!clear_of_floor(pairs, p)) {
      pairs = random_pairs(rng, 50);
      p = random_params(rng);
    }

    const ParamVector analytic = metric_gradient(pairs, p);
    const ParamVector numeric = oracle::central_difference<ParamVector>(
        [&](const ParamVector& v) { return metric_loss(pairs, from_vector(v)); }, to_vector(p), 1e-5);
    for (std::size_t k = 0; k < kMetricParamCount; ++k) {
      INFO("natural component " << kMetricParamNames[k]);
      CHECK(std::abs(analytic[k] - numeric[k]) /
                std::max({std::abs(analytic[k]), std::abs(numeric[k]), 1e-8}) <
            1e-4);
    }

    const ParamVector theta = to_unconstrained(p);
    const ParamVector analytic_u = metric_gradient_unconstrained(pairs, from_unconstrained(theta));
    const ParamVector numeric_u = oracle::central_difference<ParamVector>(
        [&](const ParamVector& t) { return metric_loss(pairs, from_unconstrained(t)); }, theta, 1e-5);
    for (std::size_t k = 0; k < kMetricParamCount; ++k) {
      INFO("unconstrained component " << k);
      CHECK(std::abs(analytic_u[k] - numeric_u[k]) /
                std::max({std::abs(analytic_u[k]), std::abs(numeric_u[k]), 1e-8}) <
            1e-4);
    }
    CHECK(metric_gradient(pairs, p, 3) == analytic);
  }
}

TEST_CASE("mirrored data gives a symmetric boundary gradient") {
  std::mt19937 rng(31);
  auto pairs = random_pairs(rng, 40);
  const std::size_t n = pairs.size();
  for (std::size_t i = 0; i < n; ++i) {
    PairObservation m{pairs[i].right, pairs[i].left, {}};
    for (std::size_t j = 0; j < kVerdictCount; ++j) m.counts[j] = pairs[i].counts[kVerdictCount - 1 - j];
    pairs.push_back(m);
  }
  MetricParams p = fixture_params();
  p.boundaries = {-0.5, -0.15, 0.15, 0.5};
  const ParamVector g = metric_gradient(pairs, p);
  CHECK(std::abs(g[4] + g[7]) < 1e-8);
  CHECK(std::abs(g[5] + g[6]) < 1e-8);
}

TEST_CASE("fit: single all-equal pair ends inside the equal band") {
  const std::vector<PairObservation> pairs = {{{2, 0.9, 0}, {1, 0.4, 0}, {0, 0, 5, 0, 0}}};
  FitConfig config;
  config.max_iters = 5000;
  config.convergence_tol = 1e-6;
  const MetricFit fit = fit_metric(pairs, config);
  CHECK(fit.report.converged);
  CHECK(fit.report.gradient_norm < config.convergence_tol);
  const double delta = compute_rating(pairs[0].left, fit.params) - compute_rating(pairs[0].right, fit.params);
  CHECK(fit.params.boundaries[1] < delta);
  CHECK(delta < fit.params.boundaries[2]);
  CHECK(fit.report.final_cost < fit.report.initial_cost);
}

TEST_CASE("fit: watermarked images never preferred raises the penalty") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PairObservation> pairs;
  for (int i = 0; i < 200; ++i) {
    const int grade = 1 + i % 2;
    const RatingInputs clean{grade, unit(rng), 0};
    const RatingInputs marked{grade, unit(rng), 1};
    // The clean image always wins clearly.
    if (i % 2 == 0) {
      pairs.push_back({clean, marked, {6, 2, 0, 0, 0}});
    } else {
      pairs.push_back({marked, clean, {0, 0, 0, 2, 6}});
    }
  }
  FitConfig config;
  config.max_iters = 3000;
  const MetricParams init;
  const MetricFit fit = fit_metric(pairs, config, init);
  CHECK(fit.params.wmp > init.wmp);
  CHECK_NOTHROW(fit.params.validate());
  for (std::size_t i = 1; i < fit.report.cost_trace.size(); ++i) {
    CHECK(fit.report.cost_trace[i] <= fit.report.cost_trace[i - 1]);
  }
  CHECK(fit.report.iterations == static_cast<int>(fit.report.cost_trace.size()));
}

TEST_CASE("fit: errors") {
  FitConfig config;
  CHECK_THROWS_AS(fit_metric({}, config), ValidationError);
  std::vector<PairObservation> pairs = {{{1, 0.5, 0}, {2, 0.5, 0}, {1, 0, 0, 0, 0}}};
  FitConfig bad = config;
  bad.max_iters = 0;
  CHECK_THROWS_AS(fit_metric(pairs, bad), ValidationError);
  MetricParams invalid;
  invalid.gamma = 1.0;
  CHECK_THROWS_AS(fit_metric(pairs, config, invalid), ValidationError);
  pairs[0].counts = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(fit_metric(pairs, config), ValidationError);
}

TEST_CASE("metric file round trip") {
  MetricParams p;
  p.rating_irs = {0.0, 0.7316, 1.92};
  p.gamma = 0.6123456789;
  p.wmp = 0.31;
  p.boundaries = {-0.41, -0.1, 0.12, 0.5};
  p.sigma = 0.093;
  FitReport report;
  report.final_cost = 1234.5;
  report.initial_cost = 2000.25;
  report.iterations = 77;
  report.gradient_norm = 3.5e-8;
  report.converged = true;
  const std::string text = serialize_metric(p, report);
  const MetricFile back = parse_metric_text(text);
  CHECK(back.params == p);
  REQUIRE(back.report.has_value());
  CHECK(back.report->iterations == 77);
  CHECK(back.report->gradient_norm == 3.5e-8);
  CHECK(back.report->converged);
  CHECK(serialize_metric(back.params, back.report) == text);
  CHECK_FALSE(parse_metric_text(serialize_metric(p)).report.has_value());

  const std::string path = "test_metric.tmp";
  save_metric(path, p, report);
  CHECK(load_metric(path).params == p);
  std::remove(path.c_str());

  CHECK_THROWS_AS(parse_metric_text(text.substr(0, text.size() / 2)), ParseError);
  CHECK_THROWS_AS(parse_metric_text("rankweave-metric v9\n"), ParseError);
  std::string bad = text;
  bad.replace(bad.find("gamma=0.6123456789"), 18, "gamma=1.5");
  CHECK_THROWS_AS(parse_metric_text(bad), ParseError);
}
