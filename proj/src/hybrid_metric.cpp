#include "rankweave/hybrid_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "rankweave/detail/parallel.hpp"
#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"

namespace rankweave {
namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr std::string_view kMagic = "rankweave-metric v1";

// Partials of a rating with respect to (rating_good, rating_excellent,
// gamma, wmp).
struct RatingGrad {
  double value = 0.0;
  std::array<double, 4> d{};
};

RatingGrad rating_with_grad(const RatingInputs& x, const MetricParams& p) {
  RatingGrad r;
  if (x.ir == kBad) return r;  // zero-width bucket
  const double good = p.rating_good();
  const double excellent = p.rating_excellent();
  const double ia_eff = (1.0 - p.wmp * x.wm) * x.ia;
  const double c = 1.0 - p.gamma + p.gamma * ia_eff;
  const double d_ia_eff_d_wmp = -static_cast<double>(x.wm) * x.ia;
  if (x.ir == kGood) {
    const double raw = good * c;
    r.value = raw / excellent;
    r.d[0] = c / excellent;
    r.d[1] = -raw / (excellent * excellent);
    r.d[2] = good * (ia_eff - 1.0) / excellent;
    r.d[3] = good * p.gamma * d_ia_eff_d_wmp / excellent;
  } else {
    const double width = excellent - good;
    const double raw = good + width * c;
    r.value = raw / excellent;
    r.d[0] = (1.0 - c) / excellent;
    r.d[1] = c / excellent - raw / (excellent * excellent);
    r.d[2] = width * (ia_eff - 1.0) / excellent;
    r.d[3] = width * p.gamma * d_ia_eff_d_wmp / excellent;
  }
  return r;
}

double normal_pdf(double z) {
  if (std::isinf(z)) return 0.0;
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// Mass of N(0,1) on [lo, hi], evaluated on the side of zero that keeps
// precision in the tails.
double interval_mass(double lo, double hi) {
  if (lo >= 0.0) return standard_normal_cdf(-lo) - standard_normal_cdf(-hi);
  return standard_normal_cdf(hi) - standard_normal_cdf(lo);
}

// Edges of the rating-difference regions in ascending order; region r holds
// verdict 4 - r.
std::array<double, 6> edges(const MetricParams& p) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {-inf, p.boundaries[0], p.boundaries[1], p.boundaries[2], p.boundaries[3], inf};
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double pair_loss(const PairObservation& obs, const MetricParams& p) {
  const double mu_l = compute_rating(obs.left, p);
  const double mu_r = compute_rating(obs.right, p);
  const auto probs = pair_label_probabilities(mu_l, mu_r, p);
  double cost = 0.0;
  for (std::size_t j = 0; j < kVerdictCount; ++j) {
    if (obs.counts[j] == 0) continue;
    cost -= static_cast<double>(obs.counts[j]) * std::log(std::max(probs[j], kProbabilityFloor));
  }
  return cost;
}

ParamVector pair_gradient(const PairObservation& obs, const MetricParams& p) {
  const RatingGrad left = rating_with_grad(obs.left, p);
  const RatingGrad right = rating_with_grad(obs.right, p);
  const double delta_mu = left.value - right.value;
  const double delta_sigma = std::numbers::sqrt2 * p.sigma;
  const auto e = edges(p);

  double d_delta_mu = 0.0;
  double d_delta_sigma = 0.0;
  std::array<double, 6> d_edge{};
  for (std::size_t r = 0; r < kVerdictCount; ++r) {
    const auto n = obs.counts[kVerdictCount - 1 - r];
    if (n == 0) continue;
    const double z_lo = (e[r] - delta_mu) / delta_sigma;
    const double z_hi = (e[r + 1] - delta_mu) / delta_sigma;
    double prob = interval_mass(z_lo, z_hi);
    if (!(prob > 0.0)) prob = std::numeric_limits<double>::min();
    const double phi_lo = normal_pdf(z_lo);
    const double phi_hi = normal_pdf(z_hi);
    const double w = -static_cast<double>(n) / prob;
    d_delta_mu += w * (phi_lo - phi_hi) / delta_sigma;
    d_edge[r] += w * (-phi_lo / delta_sigma);
    d_edge[r + 1] += w * (phi_hi / delta_sigma);
    const double zphi_lo = phi_lo == 0.0 ? 0.0 : phi_lo * z_lo;
    const double zphi_hi = phi_hi == 0.0 ? 0.0 : phi_hi * z_hi;
    d_delta_sigma += w * (zphi_lo - zphi_hi) / delta_sigma;
  }

  ParamVector g{};
  for (std::size_t k = 0; k < 4; ++k) g[k] = d_delta_mu * (left.d[k] - right.d[k]);
  for (std::size_t k = 0; k < 4; ++k) g[4 + k] = d_edge[k + 1];
  g[8] = d_delta_sigma * std::numbers::sqrt2;
  return g;
}

template <typename T, typename Fn>
std::vector<T> per_pair(std::span<const PairObservation> pairs, int threads, Fn&& fn) {
  std::vector<T> out(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t i) { out[i] = fn(pairs[i]); });
  return out;
}

ParamVector chain_to_unconstrained(const ParamVector& g, const MetricParams& p) {
  const double good = p.rating_good();
  const double width = p.rating_excellent() - good;
  ParamVector u{};
  u[0] = (g[0] + g[1]) * good;
  u[1] = g[1] * width;
  u[2] = g[2] * p.gamma * (1.0 - p.gamma);
  u[3] = g[3] * p.wmp * (1.0 - p.wmp);
  u[4] = g[4] + g[5] + g[6] + g[7];
  u[5] = (g[5] + g[6] + g[7]) * (p.boundaries[1] - p.boundaries[0]);
  u[6] = (g[6] + g[7]) * (p.boundaries[2] - p.boundaries[1]);
  u[7] = g[7] * (p.boundaries[3] - p.boundaries[2]);
  u[8] = g[8] * p.sigma;
  return u;
}

double norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

const std::array<std::string_view, kMetricParamCount> kMetricParamNames = {
    "rating_good", "rating_excellent", "gamma", "wmp", "b0", "b1", "b2", "b3", "sigma"};

void MetricParams::validate() const {
  if (rating_irs[0] != 0.0) throw ValidationError("metric params: rating_irs[0] must be 0");
  if (!(rating_irs[1] > 0.0 && rating_irs[2] > rating_irs[1]) || !std::isfinite(rating_irs[2])) {
    throw ValidationError("metric params: need 0 < rating_good < rating_excellent");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("metric params: gamma must lie in (0,1)");
  if (!(wmp >= 0.0 && wmp <= 1.0)) throw ValidationError("metric params: wmp must lie in [0,1]");
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    if (!std::isfinite(boundaries[k]) || (k > 0 && !(boundaries[k] > boundaries[k - 1]))) {
      throw ValidationError("metric params: boundaries must be finite and strictly increasing");
    }
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("metric params: sigma must be positive");
  }
}

double compute_rating(const RatingInputs& x, const MetricParams& p) {
  if (x.ir < kBad || x.ir > kExcellent) throw ValidationError("compute_rating: ir outside {0,1,2}");
  const double rating_ir = p.rating_irs[static_cast<std::size_t>(x.ir)];
  const double rating_ir_prev = p.rating_irs[static_cast<std::size_t>(std::max(x.ir - 1, 0))];
  const double bucket_width = rating_ir - rating_ir_prev;
  const double ia_eff = (1.0 - p.wmp * x.wm) * x.ia;
  const double raw = rating_ir_prev + bucket_width * (1.0 - p.gamma) +
                     ia_eff * bucket_width * p.gamma;
  return raw / p.rating_excellent();
}

double compute_rating(int ir, double ia, int wm, const MetricParams& params) {
  return compute_rating(RatingInputs{ir, ia, wm}, params);
}

double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2));
}

std::array<double, kVerdictCount> pair_label_probabilities(double mu_left, double mu_right,
                                                           const MetricParams& params) {
  const double delta_mu = mu_left - mu_right;
  const double delta_sigma = std::numbers::sqrt2 * params.sigma;
  const auto e = edges(params);
  std::array<double, kVerdictCount> p{};
  for (std::size_t r = 0; r < kVerdictCount; ++r) {
    p[kVerdictCount - 1 - r] =
        interval_mass((e[r] - delta_mu) / delta_sigma, (e[r + 1] - delta_mu) / delta_sigma);
  }
  return p;
}

std::vector<PairObservation> make_observations(std::span<const JudgedPair> pairs,
                                               const Dataset& documents) {
  const auto inputs = [&](const JudgedPair& pair, DocRef ref, const std::string& id) {
    const Document& d = documents.at(ref);
    if (!d.ia_label || !d.wm_label) {
      throw ValidationError("pair in query '" + pair.query_id + "': document '" + id +
                            "' lacks its " + (d.ia_label ? "wm" : "ia") + " label");
    }
    return RatingInputs{d.ir_label, *d.ia_label, *d.wm_label};
  };
  std::vector<PairObservation> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    out.push_back(PairObservation{inputs(pair, pair.left, pair.left_doc_id),
                                  inputs(pair, pair.right, pair.right_doc_id), pair.counts});
  }
  return out;
}

double metric_loss(std::span<const PairObservation> pairs, const MetricParams& params,
                   int threads) {
  const auto parts = per_pair<double>(pairs, threads,
                                      [&](const PairObservation& o) { return pair_loss(o, params); });
  double total = 0.0;
  for (double c : parts) total += c;
  return total;
}

ParamVector to_vector(const MetricParams& p) {
  return {p.rating_irs[1], p.rating_irs[2], p.gamma,         p.wmp,  p.boundaries[0],
          p.boundaries[1], p.boundaries[2], p.boundaries[3], p.sigma};
}

MetricParams from_vector(const ParamVector& v) {
  MetricParams p;
  p.rating_irs = {0.0, v[0], v[1]};
  p.gamma = v[2];
  p.wmp = v[3];
  p.boundaries = {v[4], v[5], v[6], v[7]};
  p.sigma = v[8];
  return p;
}

ParamVector to_unconstrained(const MetricParams& p) {
  p.validate();
  const auto logit = [](double q) { return std::log(q) - std::log1p(-q); };
  return {std::log(p.rating_good()),
          std::log(p.rating_excellent() - p.rating_good()),
          logit(p.gamma),
          logit(std::clamp(p.wmp, 1e-12, 1.0 - 1e-12)),
          p.boundaries[0],
          std::log(p.boundaries[1] - p.boundaries[0]),
          std::log(p.boundaries[2] - p.boundaries[1]),
          std::log(p.boundaries[3] - p.boundaries[2]),
          std::log(p.sigma)};
}

MetricParams from_unconstrained(const ParamVector& t) {
  MetricParams p;
  const double good = std::exp(t[0]);
  p.rating_irs = {0.0, good, good + std::exp(t[1])};
  p.gamma = logistic(t[2]);
  p.wmp = logistic(t[3]);
  p.boundaries[0] = t[4];
  p.boundaries[1] = p.boundaries[0] + std::exp(t[5]);
  p.boundaries[2] = p.boundaries[1] + std::exp(t[6]);
  p.boundaries[3] = p.boundaries[2] + std::exp(t[7]);
  p.sigma = std::exp(t[8]);
  return p;
}

ParamVector metric_gradient(std::span<const PairObservation> pairs, const MetricParams& params,
                            int threads) {
  const auto parts = per_pair<ParamVector>(
      pairs, threads, [&](const PairObservation& o) { return pair_gradient(o, params); });
  ParamVector total{};
  for (const auto& g : parts) {
    for (std::size_t k = 0; k < kMetricParamCount; ++k) total[k] += g[k];
  }
  return total;
}

ParamVector metric_gradient_unconstrained(std::span<const PairObservation> pairs,
                                          const MetricParams& params, int threads) {
  return chain_to_unconstrained(metric_gradient(pairs, params, threads), params);
}

void FitConfig::validate() const {
  if (max_iters <= 0 || !(init_step > 0.0) || step_halvings <= 0 || !(convergence_tol > 0.0) ||
      threads <= 0) {
    throw ValidationError("fit config: max_iters, init_step, step_halvings, convergence_tol and "
                          "threads must be positive");
  }
}

MetricFit fit_metric(std::span<const PairObservation> pairs, const FitConfig& config,
                     const MetricParams& init) {
  config.validate();
  init.validate();
  if (pairs.empty()) throw ValidationError("fit_metric: no pairs");
  double judgments = 0.0;
  for (const auto& o : pairs) {
    for (auto n : o.counts) judgments += static_cast<double>(n);
  }
  if (!(judgments > 0.0)) throw ValidationError("fit_metric: pairs carry no verdicts");

  const auto objective = [&](const MetricParams& p) {
    return metric_loss(pairs, p, config.threads) / judgments;
  };

  ParamVector theta = to_unconstrained(init);
  MetricParams params = from_unconstrained(theta);
  double cost = objective(params);
  if (!std::isfinite(cost)) throw ValidationError("fit_metric: non-finite cost at init");

  MetricFit fit;
  fit.report.initial_cost = cost * judgments;
  double step = config.init_step;
  ParamVector grad{};
  for (;;) {
    grad = metric_gradient_unconstrained(pairs, params, config.threads);
    for (double& g : grad) g /= judgments;
    fit.report.gradient_norm = norm(grad);
    if (fit.report.gradient_norm < config.convergence_tol) {
      fit.report.converged = true;
      break;
    }
    if (fit.report.iterations >= config.max_iters) break;

    bool accepted = false;
    for (int attempt = 0; attempt <= config.step_halvings; ++attempt) {
      ParamVector candidate = theta;
      for (std::size_t k = 0; k < kMetricParamCount; ++k) candidate[k] -= step * grad[k];
      const MetricParams trial = from_unconstrained(candidate);
      const double trial_cost = objective(trial);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        theta = candidate;
        params = trial;
        cost = trial_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no decrease at any tried step length
    ++fit.report.iterations;
    fit.report.cost_trace.push_back(cost * judgments);
    step *= 2.0;
  }
  fit.params = params;
  fit.report.final_cost = cost * judgments;
  return fit;
}

std::string serialize_metric(const MetricParams& params, const std::optional<FitReport>& report) {
  params.validate();
  std::string out(kMagic);
  out += '\n';
  const ParamVector v = to_vector(params);
  for (std::size_t k = 0; k < kMetricParamCount; ++k) {
    out += std::string(kMetricParamNames[k]) + '=' + detail::format_double(v[k]) + '\n';
  }
  if (report) {
    out += "final_cost=" + detail::format_double(report->final_cost) + '\n';
    out += "initial_cost=" + detail::format_double(report->initial_cost) + '\n';
    out += "iterations=" + std::to_string(report->iterations) + '\n';
    out += "gradient_norm=" + detail::format_double(report->gradient_norm) + '\n';
    out += std::string("converged=") + (report->converged ? "1" : "0") + '\n';
  }
  return out;
}

MetricFile parse_metric_text(std::string_view text, const std::string& source) {
  const auto lines = detail::split(text, '\n');
  if (lines.size() < 2 || !lines.back().empty()) {
    throw ParseError(source, lines.size(), "corrupt metric file: truncated");
  }
  if (detail::chomp(lines[0]) != kMagic) {
    if (lines[0].starts_with("rankweave-metric ")) {
      throw ParseError(source, 1, "unsupported metric file version '" + std::string(lines[0]) + "'");
    }
    throw ParseError(source, 1, "corrupt metric file: bad header");
  }
  std::map<std::string, std::string, std::less<>> values;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const auto line = detail::chomp(lines[i]);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(source, i + 1, "corrupt metric file: expected key=value");
    }
    if (!values.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))).second) {
      throw ParseError(source, i + 1, "corrupt metric file: duplicate key");
    }
  }
  const auto number = [&](std::string_view key) {
    auto it = values.find(key);
    double v = 0.0;
    if (it == values.end() || !detail::parse_double(it->second, &v)) {
      throw ParseError("corrupt metric file " + source + ": missing or bad '" + std::string(key) + "'");
    }
    return v;
  };
  ParamVector v{};
  for (std::size_t k = 0; k < kMetricParamCount; ++k) v[k] = number(kMetricParamNames[k]);
  MetricFile file;
  file.params = from_vector(v);
  try {
    file.params.validate();
  } catch (const ValidationError& e) {
    throw ParseError("corrupt metric file " + source + ": " + e.what());
  }
  if (values.contains("final_cost")) {
    FitReport r;
    r.final_cost = number("final_cost");
    r.initial_cost = number("initial_cost");
    r.iterations = static_cast<int>(number("iterations"));
    r.gradient_norm = number("gradient_norm");
    r.converged = number("converged") != 0.0;
    file.report = r;
  }
  return file;
}

void save_metric(const std::string& path, const MetricParams& params,
                 const std::optional<FitReport>& report) {
  detail::write_file(path, serialize_metric(params, report));
}

MetricFile load_metric(const std::string& path) {
  return parse_metric_text(detail::read_file(path), path);
}

}  // namespace rankweave
