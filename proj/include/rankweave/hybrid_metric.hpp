#ifndef RANKWEAVE_HYBRID_METRIC_HPP_
#define RANKWEAVE_HYBRID_METRIC_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankweave/corpus.hpp"

namespace rankweave {

/// Learnable parameters of the hybrid relevance/attractiveness/watermark
/// rating and of the ordinal side-by-side verdict model.
struct MetricParams {
  std::array<double, 3> rating_irs = {0.0, 1.0, 2.0};  // best rating per grade
  double gamma = 0.5;  // fraction of a grade bucket modulated by attractiveness
  double wmp = 0.5;    // watermark penalty on attractiveness
  std::array<double, 4> boundaries = {-0.6, -0.2, 0.2, 0.6};
  double sigma = 0.5;  // shared per-image rating standard deviation

  double rating_good() const { return rating_irs[1]; }
  double rating_excellent() const { return rating_irs[2]; }

  /// Throws ValidationError when an invariant does not hold.
  void validate() const;

  bool operator==(const MetricParams&) const = default;
};

/// Labels a rating is computed from.
struct RatingInputs {
  int ir = kBad;
  double ia = 0.0;
  int wm = 0;
};

double compute_rating(const RatingInputs& labels, const MetricParams& params);
double compute_rating(int ir, double ia, int wm, const MetricParams& params);

/// Standard normal CDF.
double standard_normal_cdf(double x);

/// Probabilities of the five verdicts (left better .. right better) for a
/// pair with the given mean ratings. Verdict 0 takes the upper tail of the
/// rating difference left - right.
std::array<double, kVerdictCount> pair_label_probabilities(double mu_left, double mu_right,
                                                           const MetricParams& params);

/// A judged pair reduced to what the verdict likelihood needs.
struct PairObservation {
  RatingInputs left;
  RatingInputs right;
  VerdictCounts counts{};
};

/// Resolves labels for every pair. Throws ValidationError when a document
/// lacks its ia or wm label.
std::vector<PairObservation> make_observations(std::span<const JudgedPair> pairs,
                                               const Dataset& documents);

/// Negative log-likelihood of the verdict counts.
double metric_loss(std::span<const PairObservation> pairs, const MetricParams& params,
                   int threads = 1);

// Parameter vectors are ordered rating_good, rating_excellent, gamma, wmp,
// b0, b1, b2, b3, sigma.
inline constexpr std::size_t kMetricParamCount = 9;
using ParamVector = std::array<double, kMetricParamCount>;
extern const std::array<std::string_view, kMetricParamCount> kMetricParamNames;

ParamVector to_vector(const MetricParams& params);
MetricParams from_vector(const ParamVector& v);

// Unconstrained coordinates: log rating_good, log(rating_excellent -
// rating_good), logit gamma, logit wmp, b0, log gaps b1-b0, b2-b1, b3-b2,
// log sigma. Every point maps to valid params.
ParamVector to_unconstrained(const MetricParams& params);
MetricParams from_unconstrained(const ParamVector& theta);

/// Gradient of metric_loss with respect to the natural parameters.
ParamVector metric_gradient(std::span<const PairObservation> pairs, const MetricParams& params,
                            int threads = 1);

/// Gradient of metric_loss with respect to the unconstrained coordinates.
ParamVector metric_gradient_unconstrained(std::span<const PairObservation> pairs,
                                          const MetricParams& params, int threads = 1);

struct FitConfig {
  int max_iters = 20000;
  double init_step = 1.0;
  int step_halvings = 40;
  double convergence_tol = 1e-7;
  std::uint64_t seed = 1;
  int threads = 1;  // does not affect results

  void validate() const;
};

struct FitReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;          // accepted steps
  double gradient_norm = 0.0;  // per-judgment objective, unconstrained space
  bool converged = false;
  std::vector<double> cost_trace;  // cost after each accepted step
};

struct MetricFit {
  MetricParams params;
  FitReport report;
};

/// Full-batch gradient descent on the mean per-judgment negative
/// log-likelihood in unconstrained coordinates, with step halving whenever
/// the cost fails to decrease.
MetricFit fit_metric(std::span<const PairObservation> pairs, const FitConfig& config,
                     const MetricParams& init = {});

struct MetricFile {
  MetricParams params;
  std::optional<FitReport> report;  // cost_trace is not stored
};

std::string serialize_metric(const MetricParams& params,
                             const std::optional<FitReport>& report = std::nullopt);
MetricFile parse_metric_text(std::string_view text, const std::string& source = "<memory>");
void save_metric(const std::string& path, const MetricParams& params,
                 const std::optional<FitReport>& report = std::nullopt);
MetricFile load_metric(const std::string& path);

}  // namespace rankweave

#endif  // RANKWEAVE_HYBRID_METRIC_HPP_
