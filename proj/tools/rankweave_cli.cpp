#include <chrono>
#include <concepts>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "rankweave/corpus.hpp"
#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"
#include "rankweave/evalkit.hpp"
#include "rankweave/hybrid_metric.hpp"
#include "rankweave/ltr.hpp"
#include "rankweave/watermark_signal.hpp"

namespace rw = rankweave;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

// Key-value record written to "<primary output>.manifest" after a successful run.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) : start_(std::chrono::steady_clock::now()) {
    set("subcommand", std::move(subcommand));
  }

  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, rw::detail::format_double(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  template <std::integral T>
  void set(const std::string& key, T value) {
    set(key, std::to_string(value));
  }

  void write(const std::string& primary_output) const {
    std::string text;
    for (const auto& [k, v] : entries_) text += k + '=' + v + '\n';
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    text += "wall_seconds=" + rw::detail::format_double(seconds) + '\n';
    text += "version=" RANKWEAVE_VERSION "\n";
    rw::detail::write_file(primary_output + ".manifest", text);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

struct Globals {
  int threads = 1;
};

// build-domains

struct BuildDomainsOptions {
  std::string docs, out;
  std::int64_t min_count = 5;
  double min_rate = 0.90;
};

void run_build_domains(const BuildDomainsOptions& o) {
  Manifest m("build-domains");
  const rw::Dataset docs = rw::parse_documents(o.docs);
  const auto built = rw::build_domain_list(docs, o.min_count, o.min_rate);
  rw::save_domain_list(built.list, o.out);
  std::cout << "domains seen: " << built.domains_seen << "\nlisted: " << built.list.size() << '\n';
  if (built.skipped_unlabeled > 0) {
    std::cerr << "warning: skipped " << built.skipped_unlabeled << " documents without a wm label\n";
  }
  if (built.skipped_no_domain > 0) {
    std::cerr << "warning: skipped " << built.skipped_no_domain << " documents without a domain\n";
  }
  m.set("docs", o.docs);
  m.set("out", o.out);
  m.set("min_count", o.min_count);
  m.set("min_rate", o.min_rate);
  m.set("domains_seen", built.domains_seen);
  m.set("listed", built.list.size());
  m.write(o.out);
}

// fuse

struct FuseOptions {
  std::string docs, domains, out;
  bool domain_only = false;
};

void run_fuse(const FuseOptions& o) {
  Manifest m("fuse");
  const rw::Dataset docs = rw::parse_documents(o.docs);
  const rw::DomainList list = rw::load_domain_list(o.domains);
  rw::write_documents(o.out, rw::fuse_dataset(docs, list, o.domain_only));
  m.set("docs", o.docs);
  m.set("domains", o.domains);
  m.set("out", o.out);
  m.set("domain_only", o.domain_only);
  m.write(o.out);
}

// fit-metric

struct FitMetricOptions {
  std::string pairs, docs, out;
  rw::FitConfig config;
};

void run_fit_metric(FitMetricOptions o, const Globals& g) {
  Manifest m("fit-metric");
  o.config.threads = g.threads;
  const rw::Dataset docs = rw::parse_documents(o.docs);
  const auto pairs = rw::parse_pairs(o.pairs, docs);
  const auto fit = rw::fit_metric(rw::make_observations(pairs, docs), o.config, rw::MetricParams{});
  rw::save_metric(o.out, fit.params, fit.report);
  std::cout << "cost " << rw::detail::format_double(fit.report.initial_cost) << " -> "
            << rw::detail::format_double(fit.report.final_cost) << " after " << fit.report.iterations
            << " iterations (" << (fit.report.converged ? "converged" : "not converged") << ")\n";
  m.set("pairs", o.pairs);
  m.set("docs", o.docs);
  m.set("out", o.out);
  m.set("max_iters", o.config.max_iters);
  m.set("init_step", o.config.init_step);
  m.set("step_halvings", o.config.step_halvings);
  m.set("convergence_tol", o.config.convergence_tol);
  m.set("seed", o.config.seed);
  m.set("threads", o.config.threads);
  m.write(o.out);
}

// rate

struct RateOptions {
  std::string docs, metric, out;
};

void run_rate(const RateOptions& o) {
  Manifest m("rate");
  const rw::Dataset docs = rw::parse_documents(o.docs);
  const rw::MetricParams params = rw::load_metric(o.metric).params;
  const std::string text = rw::serialize_documents(docs);
  const auto lines = rw::detail::split(text, '\n');
  std::string out(lines[0]);
  out += "\trating\n";
  std::size_t line = 1;
  for (const auto& group : docs.groups) {
    for (const auto& d : group.documents) {
      if (!d.ia_label || !d.wm_label) {
        throw rw::ValidationError("document '" + d.doc_id + "' in query '" + d.query_id + "' (row " +
                                  std::to_string(line) + ") lacks its " + (d.ia_label ? "wm" : "ia") +
                                  " label");
      }
      const double rating = rw::compute_rating(d.ir_label, *d.ia_label, *d.wm_label, params);
      out += std::string(lines[line]) + '\t' + rw::detail::format_double(rating) + '\n';
      ++line;
    }
  }
  rw::detail::write_file(o.out, out);
  m.set("docs", o.docs);
  m.set("metric", o.metric);
  m.set("out", o.out);
  m.write(o.out);
}

// train

struct TrainOptions {
  std::string docs, metric, out_model;
  std::vector<std::string> features;
  std::int64_t truncation = 0;  // 0 means the full list
  rw::TrainConfig config;
};

void run_train(TrainOptions o, const Globals& g) {
  Manifest m("train");
  o.config.threads = g.threads;
  if (o.truncation < 0) throw rw::ValidationError("--truncation must be non-negative");
  o.config.truncation = o.truncation == 0 ? rw::kFullList : static_cast<std::size_t>(o.truncation);
  rw::Dataset docs = rw::parse_documents(o.docs);
  if (!o.features.empty()) docs = rw::select_features(docs, o.features);
  const rw::MetricParams params = rw::load_metric(o.metric).params;
  const auto result = rw::train_lambdamart(rw::make_rated_lists(docs, params), o.config, docs.feature_names);
  rw::save_model(result.model, o.out_model);
  std::cout << "tree\tmean_ndcg\n0\t" << rw::detail::format_double(result.initial_ndcg) << '\n';
  for (std::size_t i = 0; i < result.ndcg_trace.size(); ++i) {
    std::cout << i + 1 << '\t' << rw::detail::format_double(result.ndcg_trace[i]) << '\n';
  }
  m.set("docs", o.docs);
  m.set("metric", o.metric);
  m.set("out_model", o.out_model);
  m.set("features", join(docs.feature_names, ','));
  m.set("n_trees", o.config.n_trees);
  m.set("shrinkage", o.config.shrinkage);
  m.set("max_leaves", o.config.max_leaves);
  m.set("min_docs_per_leaf", o.config.min_docs_per_leaf);
  m.set("lambda_sigma", o.config.lambda_sigma);
  m.set("truncation", o.truncation);
  m.set("seed", o.config.seed);
  m.set("threads", o.config.threads);
  m.write(o.out_model);
}

// eval

struct EvalOptions {
  std::string docs, model, metric, out_report, model_id;
  std::vector<std::size_t> ks = {5, 10, 25};
};

void run_eval(const EvalOptions& o) {
  Manifest m("eval");
  const rw::Ensemble model = rw::load_model(o.model);
  rw::Dataset docs = rw::parse_documents(o.docs);
  if (!model.feature_names.empty()) docs = rw::select_features(docs, model.feature_names);
  const rw::MetricParams params = rw::load_metric(o.metric).params;
  const std::string id = o.model_id.empty() ? o.model : o.model_id;
  const auto report = rw::evaluate(model, docs, params, o.ks, id);
  rw::detail::write_file(o.out_report, rw::report_to_tsv(report));
  std::cout << rw::report_to_text(report);
  std::vector<std::string> ks;
  for (auto k : o.ks) ks.push_back(std::to_string(k));
  m.set("docs", o.docs);
  m.set("model", o.model);
  m.set("metric", o.metric);
  m.set("out_report", o.out_report);
  m.set("model_id", id);
  m.set("k", join(ks, ','));
  m.write(o.out_report);
}

// synth

struct SynthOptions {
  std::string out_docs, out_pairs;
  rw::SynthConfig config;
};

void run_synth(const SynthOptions& o) {
  Manifest m("synth");
  const auto corpus = rw::generate_synthetic(o.config);
  rw::write_documents(o.out_docs, corpus.documents);
  rw::write_pairs(o.out_pairs, corpus.pairs);
  const auto& c = o.config;
  std::cout << corpus.documents.document_count() << " documents, " << corpus.pairs.size() << " pairs, "
            << corpus.watermark_domains.size() << " watermark domains\n";
  m.set("out_docs", o.out_docs);
  m.set("out_pairs", o.out_pairs);
  m.set("queries", c.n_queries);
  m.set("docs_per_query", c.docs_per_query);
  m.set("feature_dim", c.feature_dim);
  m.set("noise", c.noise_level);
  m.set("wm_rate", c.watermark_base_rate);
  m.set("domains", c.domain_count);
  m.set("domain_skew", c.domain_skew);
  m.set("pairs_per_query", c.pairs_per_query);
  m.set("judgments_per_pair", c.judgments_per_pair);
  m.set("planted_gamma", c.planted.gamma);
  m.set("planted_wmp", c.planted.wmp);
  m.set("seed", c.seed);
  m.write(o.out_docs);
}

// compare

struct CompareOptions {
  std::string a, b, out;
};

void run_compare(const CompareOptions& o) {
  Manifest m("compare");
  const auto control = rw::parse_report_tsv(rw::detail::read_file(o.a), o.a);
  const auto experiment = rw::parse_report_tsv(rw::detail::read_file(o.b), o.b);
  const std::string tsv = rw::comparison_to_tsv(rw::compare(control, experiment));
  rw::detail::write_file(o.out, tsv);
  std::cout << tsv;
  m.set("a", o.a);
  m.set("b", o.b);
  m.set("out", o.out);
  m.write(o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankweave: watermark-aware image ranking pipeline"};
  app.set_version_flag("--version", RANKWEAVE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--threads", globals.threads, "Worker threads for library calls (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  BuildDomainsOptions bd;
  auto* build = app.add_subcommand("build-domains", "Build the known watermark domain list");
  build->add_option("--docs", bd.docs, "Documents TSV")->required();
  build->add_option("--out", bd.out, "Domain list output")->required();
  build->add_option("--min-count", bd.min_count, "A domain needs more than this many images")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  build->add_option("--min-rate", bd.min_rate, "A domain needs a watermark rate above this")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  FuseOptions fu;
  auto* fuse = app.add_subcommand("fuse", "Rewrite wm_prob with the domain signal");
  fuse->add_option("--docs", fu.docs, "Documents TSV")->required();
  fuse->add_option("--domains", fu.domains, "Domain list file")->required();
  fuse->add_option("--out", fu.out, "Fused documents output")->required();
  fuse->add_flag("--domain-only", fu.domain_only, "Ignore the content probability (unlisted domains get 0.5)");

  FitMetricOptions fm;
  auto* fit = app.add_subcommand("fit-metric", "Fit the hybrid metric to pairwise judgments");
  fit->add_option("--pairs", fm.pairs, "Judged pairs TSV")->required();
  fit->add_option("--docs", fm.docs, "Documents TSV")->required();
  fit->add_option("--out", fm.out, "Metric parameter output")->required();
  fit->add_option("--max-iters", fm.config.max_iters, "Gradient descent iteration cap")->capture_default_str();
  fit->add_option("--init-step", fm.config.init_step, "Initial step length")->capture_default_str();
  fit->add_option("--step-halvings", fm.config.step_halvings, "Line search halvings per iteration")
      ->capture_default_str();
  fit->add_option("--tol", fm.config.convergence_tol, "Gradient norm stopping tolerance")->capture_default_str();
  fit->add_option("--seed", fm.config.seed, "Recorded seed (the fit itself is deterministic)")
      ->capture_default_str();

  RateOptions ra;
  auto* rate = app.add_subcommand("rate", "Append the hybrid rating of every document");
  rate->add_option("--docs", ra.docs, "Documents TSV")->required();
  rate->add_option("--metric", ra.metric, "Metric parameter file")->required();
  rate->add_option("--out", ra.out, "Rated documents output")->required();

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train a LambdaMART ranker on hybrid-rating gains");
  train->add_option("--docs", tr.docs, "Documents TSV")->required();
  train->add_option("--metric", tr.metric, "Metric parameter file")->required();
  train->add_option("--out-model", tr.out_model, "Model output")->required();
  train->add_option("--features", tr.features, "Feature columns to use, comma separated (wm_prob allowed)")
      ->delimiter(',');
  train->add_option("--n-trees", tr.config.n_trees, "Boosting rounds")->capture_default_str();
  train->add_option("--shrinkage", tr.config.shrinkage, "Learning rate")->capture_default_str();
  train->add_option("--max-leaves", tr.config.max_leaves, "Leaves per tree")->capture_default_str();
  train->add_option("--min-docs-per-leaf", tr.config.min_docs_per_leaf, "Minimum documents in a leaf")
      ->capture_default_str();
  train->add_option("--lambda-sigma", tr.config.lambda_sigma, "Sigmoid scale of the pairwise lambdas")
      ->capture_default_str();
  train->add_option("--truncation", tr.truncation, "NDCG truncation for lambdas (0 = full list)")
      ->capture_default_str();
  train->add_option("--seed", tr.config.seed, "Training seed")->capture_default_str();

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a model: mean NDCG@k and watermark rate@k");
  eval->add_option("--docs", ev.docs, "Documents TSV")->required();
  eval->add_option("--model", ev.model, "Model file")->required();
  eval->add_option("--metric", ev.metric, "Metric parameter file (defines the gains)")->required();
  eval->add_option("--out-report", ev.out_report, "Report TSV output")->required();
  eval->add_option("--k", ev.ks, "Cutoffs, comma separated")->delimiter(',')->capture_default_str();
  eval->add_option("--model-id", ev.model_id, "Label for the report (default: model path)");

  SynthOptions sy;
  auto& sc = sy.config;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted metric parameters");
  synth->add_option("--out-docs", sy.out_docs, "Documents output")->required();
  synth->add_option("--out-pairs", sy.out_pairs, "Judged pairs output")->required();
  synth->add_option("--queries", sc.n_queries, "Number of queries")->capture_default_str();
  synth->add_option("--docs-per-query", sc.docs_per_query, "Documents per query")->capture_default_str();
  synth->add_option("--feature-dim", sc.feature_dim, "Feature columns (last one is the watermark score)")
      ->capture_default_str();
  synth->add_option("--noise", sc.noise_level, "Feature noise level")->capture_default_str();
  synth->add_option("--wm-rate", sc.watermark_base_rate, "Fraction of watermarked documents")
      ->capture_default_str();
  synth->add_option("--domains", sc.domain_count, "Number of domains")->capture_default_str();
  synth->add_option("--domain-skew", sc.domain_skew, "Concentration of watermarks on watermark domains (inf allowed)")
      ->capture_default_str();
  synth->add_option("--pairs-per-query", sc.pairs_per_query, "Judged pairs per query")->capture_default_str();
  synth->add_option("--judgments", sc.judgments_per_pair, "Verdicts per pair")->capture_default_str();
  synth->add_option("--planted-gamma", sc.planted.gamma, "Planted gamma")->capture_default_str();
  synth->add_option("--planted-wmp", sc.planted.wmp, "Planted watermark penalty")->capture_default_str();
  synth->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();

  CompareOptions co;
  auto* cmp = app.add_subcommand("compare", "Compare a control and an experiment report");
  cmp->add_option("--a", co.a, "Control report TSV")->required();
  cmp->add_option("--b", co.b, "Experiment report TSV")->required();
  cmp->add_option("--out", co.out, "Comparison TSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (build->parsed()) run_build_domains(bd);
    if (fuse->parsed()) run_fuse(fu);
    if (fit->parsed()) run_fit_metric(fm, globals);
    if (rate->parsed()) run_rate(ra);
    if (train->parsed()) run_train(tr, globals);
    if (eval->parsed()) run_eval(ev);
    if (synth->parsed()) run_synth(sy);
    if (cmp->parsed()) run_compare(co);
  } catch (const rw::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const rw::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
