#include "rankweave/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"

namespace rankweave {
namespace {

RatingInputs labels_of(const Document& d) {
  if (!d.ia_label || !d.wm_label) {
    throw ValidationError("document '" + d.doc_id + "' of query '" + d.query_id + "' lacks its " +
                          (d.ia_label ? "wm" : "ia") + " label");
  }
  return RatingInputs{d.ir_label, *d.ia_label, *d.wm_label};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string optional_number(double v) {
  return std::isnan(v) ? std::string("NA") : detail::format_double(v);
}

}  // namespace

double watermark_rate_at_k(std::span<const QueryGroup> ranked, std::size_t k) {
  if (k == 0) throw ValidationError("watermark_rate_at_k: k must be positive");
  std::size_t counted = 0;
  std::size_t marked = 0;
  for (const auto& group : ranked) {
    const std::size_t top = std::min(k, group.documents.size());
    for (std::size_t i = 0; i < top; ++i) {
      const auto& d = group.documents[i];
      if (!d.wm_label) {
        throw ValidationError("watermark_rate_at_k: document '" + d.doc_id + "' of query '" +
                              d.query_id + "' lacks its wm label");
      }
      ++counted;
      marked += static_cast<std::size_t>(*d.wm_label);
    }
  }
  return counted == 0 ? 0.0 : static_cast<double>(marked) / static_cast<double>(counted);
}

std::vector<RatedList> make_rated_lists(const Dataset& documents, const MetricParams& params) {
  params.validate();
  std::vector<RatedList> lists;
  lists.reserve(documents.groups.size());
  for (const auto& group : documents.groups) {
    RatedList list;
    list.query_id = group.query_id;
    list.features = FeatureMatrix(0, documents.feature_dim());
    for (const auto& d : group.documents) {
      list.gains.push_back(gain(compute_rating(labels_of(d), params)));
      list.features.push_row(d.features);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

std::uint64_t dataset_digest(const Dataset& documents) {
  std::vector<std::string> keys;
  keys.reserve(documents.document_count());
  for (const auto& group : documents.groups) {
    for (const auto& d : group.documents) keys.push_back(d.query_id + '\t' + d.doc_id);
  }
  std::sort(keys.begin(), keys.end());
  std::uint64_t h = detail::fnv1a("");
  for (const auto& key : keys) {
    h = detail::fnv1a(key, h);
    h = detail::fnv1a("\n", h);
  }
  return h;
}

EvalReport evaluate(const Ensemble& model, const Dataset& documents, const MetricParams& params,
                    std::span<const std::size_t> ks, const std::string& model_id) {
  params.validate();
  if (ks.empty()) throw ValidationError("evaluate: no cutoffs given");
  if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
    throw ValidationError("evaluate: cutoffs must be positive");
  }
  if (documents.feature_dim() != model.feature_dim) {
    throw ValidationError("evaluate: dataset has " + std::to_string(documents.feature_dim()) +
                          " features, model expects " + std::to_string(model.feature_dim));
  }

  std::vector<std::size_t> order(documents.groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return documents.groups[a].query_id < documents.groups[b].query_id;
  });

  EvalReport report;
  report.model_id = model_id;
  report.dataset = dataset_digest(documents);
  report.n_queries = documents.groups.size();
  report.ks.assign(ks.begin(), ks.end());
  report.mean_ndcg.assign(ks.size(), 0.0);

  std::vector<QueryGroup> ranked;
  ranked.reserve(order.size());
  for (std::size_t g : order) {
    const auto& group = documents.groups[g];
    std::vector<double> scores;
    std::vector<double> gains;
    for (const auto& d : group.documents) {
      scores.push_back(model.predict(d.features));
      gains.push_back(gain(compute_rating(labels_of(d), params)));
    }
    const auto permutation = rank_by_score(scores);
    QueryGroup sorted{group.query_id, {}};
    std::vector<double> ranked_gains;
    for (std::size_t i : permutation) {
      sorted.documents.push_back(group.documents[i]);
      ranked_gains.push_back(gains[i]);
    }
    QueryEval q{group.query_id, {}};
    for (std::size_t k : ks) q.ndcg.push_back(ndcg(ranked_gains, k));
    report.per_query.push_back(std::move(q));
    ranked.push_back(std::move(sorted));
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double sum = 0.0;
    for (const auto& q : report.per_query) sum += q.ndcg[i];
    report.mean_ndcg[i] = report.per_query.empty() ? 0.0 : sum / static_cast<double>(report.n_queries);
    report.watermark_rate.push_back(watermark_rate_at_k(ranked, ks[i]));
  }
  return report;
}

std::string report_to_tsv(const EvalReport& r) {
  std::string out = "model\tdataset\tqueries\tk\tmean_ndcg\twatermark_rate\n";
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    out += r.model_id + '\t' + hex64(r.dataset) + '\t' + std::to_string(r.n_queries) + '\t' +
           std::to_string(r.ks[i]) + '\t' + detail::format_double(r.mean_ndcg[i]) + '\t' +
           detail::format_double(r.watermark_rate[i]) + '\n';
  }
  return out;
}

std::string report_to_text(const EvalReport& r) {
  char line[128];
  std::string out = "model: " + r.model_id + "  queries: " + std::to_string(r.n_queries) + '\n';
  std::snprintf(line, sizeof(line), "%6s  %10s  %14s\n", "k", "NDCG@k", "watermark@k");
  out += line;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    std::snprintf(line, sizeof(line), "%6zu  %10.5f  %13.3f%%\n", r.ks[i], r.mean_ndcg[i],
                  100.0 * r.watermark_rate[i]);
    out += line;
  }
  return out;
}

EvalReport parse_report_tsv(std::string_view text, const std::string& source) {
  auto lines = detail::split(text, '\n');
  while (!lines.empty() && detail::chomp(lines.back()).empty()) lines.pop_back();
  if (lines.empty() ||
      detail::chomp(lines[0]) != "model\tdataset\tqueries\tk\tmean_ndcg\twatermark_rate") {
    throw ParseError(source, 1, "not an evaluation report");
  }
  if (lines.size() < 2) throw ParseError(source, 2, "evaluation report has no rows");
  EvalReport r;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(detail::chomp(lines[i]), '\t');
    std::int64_t queries = 0;
    std::int64_t k = 0;
    double ndcg_value = 0.0;
    double rate = 0.0;
    std::uint64_t digest = 0;
    bool ok = f.size() == 6 && f[1].size() == 16 && detail::parse_int64(f[2], &queries) &&
              queries >= 0 && detail::parse_int64(f[3], &k) && k > 0 &&
              detail::parse_double(f[4], &ndcg_value) && detail::parse_double(f[5], &rate);
    if (ok) {
      auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), digest, 16);
      ok = ec == std::errc() && ptr == f[1].data() + f[1].size();
    }
    if (!ok) throw ParseError(source, i + 1, "malformed report row");
    if (i == 1) {
      r.model_id = std::string(f[0]);
      r.dataset = digest;
      r.n_queries = static_cast<std::size_t>(queries);
    } else if (r.model_id != f[0] || r.dataset != digest ||
               r.n_queries != static_cast<std::size_t>(queries)) {
      throw ParseError(source, i + 1, "report rows disagree on model, dataset or query count");
    }
    r.ks.push_back(static_cast<std::size_t>(k));
    r.mean_ndcg.push_back(ndcg_value);
    r.watermark_rate.push_back(rate);
  }
  return r;
}

double relative_reduction(double control, double experiment) {
  if (control == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (control - experiment) / control;
}

Comparison compare(const EvalReport& control, const EvalReport& experiment) {
  if (control.dataset != experiment.dataset || control.n_queries != experiment.n_queries) {
    throw ValidationError("compare: reports were computed on different datasets");
  }
  if (control.ks != experiment.ks) throw ValidationError("compare: reports use different cutoffs");
  Comparison c{control.model_id, experiment.model_id, {}};
  const auto add = [&](const char* metric, std::size_t k, double a, double b) {
    const double reduction = relative_reduction(a, b);
    c.rows.push_back(MetricDelta{metric, k, a, b, b - a, 0.0 - reduction, reduction});
  };
  for (std::size_t i = 0; i < control.ks.size(); ++i) {
    add("ndcg", control.ks[i], control.mean_ndcg[i], experiment.mean_ndcg[i]);
  }
  for (std::size_t i = 0; i < control.ks.size(); ++i) {
    add("watermark_rate", control.ks[i], control.watermark_rate[i], experiment.watermark_rate[i]);
  }
  return c;
}

std::string comparison_to_tsv(const Comparison& c) {
  std::string out = "metric\tk\tcontrol:" + c.control_id + "\texperiment:" + c.experiment_id +
                    "\tdelta\trelative_delta\trelative_reduction\n";
  for (const auto& row : c.rows) {
    out += row.metric + '\t' + std::to_string(row.k) + '\t' + detail::format_double(row.control) +
           '\t' + detail::format_double(row.experiment) + '\t' + detail::format_double(row.delta) +
           '\t' + optional_number(row.relative_delta) + '\t' +
           optional_number(row.relative_reduction) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

MetricParams SynthConfig::default_planted() {
  MetricParams p;
  p.rating_irs = {0.0, 1.0, 2.0};
  p.gamma = 0.6;
  p.wmp = 0.7;
  p.boundaries = {-0.3, -0.1, 0.1, 0.3};
  p.sigma = 0.1;
  return p;
}

void SynthConfig::validate() const {
  if (n_queries <= 0 || docs_per_query < 2 || feature_dim < 3 || domain_count < 2 ||
      pairs_per_query < 0 || judgments_per_pair <= 0) {
    throw ValidationError(
        "synth config: need n_queries > 0, docs_per_query >= 2, feature_dim >= 3, "
        "domain_count >= 2, pairs_per_query >= 0, judgments_per_pair > 0");
  }
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw ValidationError("synth config: noise_level must be a finite non-negative number");
  }
  if (!(watermark_base_rate > 0.0 && watermark_base_rate < 1.0)) {
    throw ValidationError("synth config: watermark_base_rate must lie in (0,1)");
  }
  if (!(domain_skew >= 1.0)) throw ValidationError("synth config: domain_skew must be >= 1");
  double mix = 0.0;
  for (double m : relevance_mix) {
    if (!(m >= 0.0)) throw ValidationError("synth config: relevance_mix must be non-negative");
    mix += m;
  }
  if (!(mix > 0.0)) throw ValidationError("synth config: relevance_mix sums to zero");
  planted.validate();
}

SynthCorpus generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::discrete_distribution<int> relevance(config.relevance_mix.begin(),
                                            config.relevance_mix.end());
  const auto noise = [&] { return config.noise_level > 0.0 ? config.noise_level * gauss(rng) : 0.0; };

  SynthCorpus corpus;
  const int n_marked = std::max(1, static_cast<int>(std::lround(config.domain_count * 0.1)));
  const int n_plain = config.domain_count - n_marked;
  std::vector<std::string> plain_domains;
  for (int i = 0; i < n_marked; ++i) {
    corpus.watermark_domains.push_back("stock" + std::to_string(i) + ".example.com");
  }
  for (int i = 0; i < n_plain; ++i) {
    plain_domains.push_back("site" + std::to_string(i) + ".example.org");
  }
  std::uniform_int_distribution<int> pick_marked(0, n_marked - 1);
  std::uniform_int_distribution<int> pick_plain(0, n_plain - 1);
  const double concentrate = std::isinf(config.domain_skew) ? 1.0 : 1.0 - 1.0 / config.domain_skew;

  const std::size_t dim = static_cast<std::size_t>(config.feature_dim);
  corpus.watermark_feature = dim - 1;
  Dataset& ds = corpus.documents;
  for (std::size_t f = 0; f < dim; ++f) ds.feature_names.push_back("f" + std::to_string(f));

  const int qid_width = static_cast<int>(std::to_string(config.n_queries - 1).size());
  const int did_width = static_cast<int>(std::to_string(config.docs_per_query - 1).size());
  const auto padded = [](int v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
  };

  for (int q = 0; q < config.n_queries; ++q) {
    QueryGroup group{"q" + padded(q, qid_width), {}};
    for (int k = 0; k < config.docs_per_query; ++k) {
      Document d;
      d.query_id = group.query_id;
      d.doc_id = group.query_id + "_d" + padded(k, did_width);
      d.ir_label = relevance(rng);
      d.ia_label = unit(rng);
      const int wm = unit(rng) < config.watermark_base_rate ? 1 : 0;
      d.wm_label = wm;
      if (wm == 1 && unit(rng) < concentrate) {
        d.domain = corpus.watermark_domains[static_cast<std::size_t>(pick_marked(rng))];
      } else {
        d.domain = plain_domains[static_cast<std::size_t>(pick_plain(rng))];
      }
      const double ir01 = d.ir_label / 2.0;
      const double ia = *d.ia_label;
      d.features.resize(dim);
      d.features[0] = ir01 + noise();
      d.features[1] = ia + noise();
      for (std::size_t f = 2; f + 1 < dim; ++f) {
        d.features[f] = (f % 2 == 0) ? 0.5 * ir01 + 0.5 * ia + noise() : unit(rng);
      }
      const double content = std::clamp(0.2 + 0.6 * wm + noise(), 0.0, 1.0);
      d.features[dim - 1] = content;
      d.wm_prob = content;
      group.documents.push_back(std::move(d));
    }
    ds.groups.push_back(std::move(group));
  }

  std::uniform_int_distribution<std::size_t> pick_doc(0, static_cast<std::size_t>(config.docs_per_query) - 1);
  for (std::size_t g = 0; g < ds.groups.size(); ++g) {
    const auto& docs = ds.groups[g].documents;
    for (int p = 0; p < config.pairs_per_query; ++p) {
      const std::size_t a = pick_doc(rng);
      std::size_t b = pick_doc(rng);
      while (b == a) b = pick_doc(rng);
      const auto probs = pair_label_probabilities(
          compute_rating(docs[a].ir_label, *docs[a].ia_label, *docs[a].wm_label, config.planted),
          compute_rating(docs[b].ir_label, *docs[b].ia_label, *docs[b].wm_label, config.planted),
          config.planted);
      JudgedPair pair;
      pair.query_id = ds.groups[g].query_id;
      pair.left_doc_id = docs[a].doc_id;
      pair.right_doc_id = docs[b].doc_id;
      pair.left = DocRef{g, a};
      pair.right = DocRef{g, b};
      // Multinomial draw as a chain of conditional binomials.
      std::int64_t remaining = config.judgments_per_pair;
      double mass = 1.0;
      for (std::size_t j = 0; j < kVerdictCount; ++j) {
        if (j + 1 == kVerdictCount || remaining == 0) {
          pair.counts[j] = remaining;
          remaining = 0;
          continue;
        }
        const double share = mass > 0.0 ? std::clamp(probs[j] / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::int64_t> draw(remaining, share);
        pair.counts[j] = draw(rng);
        remaining -= pair.counts[j];
        mass -= probs[j];
      }
      corpus.pairs.push_back(std::move(pair));
    }
  }
  return corpus;
}

}  // namespace rankweave
