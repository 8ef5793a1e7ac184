#ifndef RANKWEAVE_EVALKIT_HPP_
#define RANKWEAVE_EVALKIT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankweave/corpus.hpp"
#include "rankweave/hybrid_metric.hpp"
#include "rankweave/ltr.hpp"

namespace rankweave {

/// Fraction of watermarked documents among the top k of every query,
/// pooled over queries. Documents must already be in ranked order.
double watermark_rate_at_k(std::span<const QueryGroup> ranked, std::size_t k);

/// Gains from hybrid ratings, one RatedList per query.
std::vector<RatedList> make_rated_lists(const Dataset& documents, const MetricParams& params);

/// Order-independent fingerprint of the (query_id, doc_id) set.
std::uint64_t dataset_digest(const Dataset& documents);

struct QueryEval {
  std::string query_id;
  std::vector<double> ndcg;  // one per k
};

struct EvalReport {
  std::string model_id;
  std::uint64_t dataset = 0;  // dataset_digest
  std::size_t n_queries = 0;
  std::vector<std::size_t> ks;
  std::vector<double> mean_ndcg;       // one per k
  std::vector<double> watermark_rate;  // one per k
  std::vector<QueryEval> per_query;    // sorted by query_id; not serialized
};

/// Ranks each query by model score and scores the ranking with NDCG@k on
/// hybrid-rating gains and watermark_rate@k. Queries are processed in
/// query_id order.
EvalReport evaluate(const Ensemble& model, const Dataset& documents, const MetricParams& params,
                    std::span<const std::size_t> ks, const std::string& model_id = "model");

std::string report_to_tsv(const EvalReport& report);
std::string report_to_text(const EvalReport& report);
EvalReport parse_report_tsv(std::string_view text, const std::string& source = "<memory>");

struct MetricDelta {
  std::string metric;  // "ndcg" or "watermark_rate"
  std::size_t k = 0;
  double control = 0.0;
  double experiment = 0.0;
  double delta = 0.0;               // experiment - control
  double relative_delta = 0.0;      // delta / control, NaN when control is 0
  double relative_reduction = 0.0;  // (control - experiment) / control
};

struct Comparison {
  std::string control_id;
  std::string experiment_id;
  std::vector<MetricDelta> rows;
};

/// (control - experiment) / control; NaN when control is 0.
double relative_reduction(double control, double experiment);

Comparison compare(const EvalReport& control, const EvalReport& experiment);
std::string comparison_to_tsv(const Comparison& comparison);

// ---------------------------------------------------------------------------
// Synthetic corpora with planted ground truth.

struct SynthConfig {
  int n_queries = 200;
  int docs_per_query = 30;
  int feature_dim = 6;
  double noise_level = 0.3;
  double watermark_base_rate = 0.15;
  int domain_count = 50;
  // Watermarked images land on a designated watermark domain with
  // probability 1 - 1/domain_skew; infinity concentrates all of them.
  double domain_skew = 4.0;
  std::array<double, 3> relevance_mix = {0.2, 0.3, 0.5};
  int pairs_per_query = 10;
  int judgments_per_pair = 200;
  MetricParams planted = default_planted();
  std::uint64_t seed = 1;

  static MetricParams default_planted();
  void validate() const;
};

struct SynthCorpus {
  Dataset documents;
  std::vector<JudgedPair> pairs;
  std::vector<std::string> watermark_domains;
  // Index of the feature column carrying the content watermark score.
  std::size_t watermark_feature = 0;
};

/// Features: f0 relevance, f1 attractiveness, middle columns alternate
/// relevance/attractiveness mixtures and pure noise, the last column is the
/// content watermark score (also written as wm_prob).
SynthCorpus generate_synthetic(const SynthConfig& config);

}  // namespace rankweave

#endif  // RANKWEAVE_EVALKIT_HPP_
