#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <string>
#include <vector>

#include "rankweave/corpus.hpp"
#include "rankweave/error.hpp"
#include "rankweave/evalkit.hpp"
#include "rankweave/hybrid_metric.hpp"
#include "rankweave/ltr.hpp"
#include "rankweave/watermark_signal.hpp"

namespace py = pybind11;
namespace rw = rankweave;

namespace {

// Pairs hold positions into the document set they were parsed against, so
// the two travel together on the Python side.
struct JudgedPairs {
  rw::Dataset documents;
  std::vector<rw::JudgedPair> pairs;
};

py::dict report_dict(const rw::FitReport& r) {
  py::dict d;
  d["initial_cost"] = r.initial_cost;
  d["final_cost"] = r.final_cost;
  d["iterations"] = r.iterations;
  d["gradient_norm"] = r.gradient_norm;
  d["converged"] = r.converged;
  d["cost_trace"] = r.cost_trace;
  return d;
}

py::dict eval_dict(const rw::EvalReport& r) {
  py::dict d;
  d["model_id"] = r.model_id;
  d["dataset"] = r.dataset;
  d["n_queries"] = r.n_queries;
  d["ks"] = r.ks;
  d["mean_ndcg"] = r.mean_ndcg;
  d["watermark_rate"] = r.watermark_rate;
  d["tsv"] = rw::report_to_tsv(r);
  return d;
}

rw::FeatureMatrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  rw::FeatureMatrix m(0, cols);
  for (const auto& r : rows) m.push_row(r);
  return m;
}

}  // namespace

PYBIND11_MODULE(_rankweave, m) {
  m.doc() = "Watermark-aware learning to rank";

  static py::exception<rw::ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
  static py::exception<rw::IoError> io_error(m, "IoError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const rw::ValidationError& e) {
      py::set_error(validation_error, e.what());
    } catch (const rw::IoError& e) {
      py::set_error(io_error, e.what());
    }
  });

  py::class_<rw::Dataset>(m, "Dataset")
      .def_static("load", [](const std::string& path) { return rw::parse_documents(path); }, py::arg("path"))
      .def_static("from_text", [](const std::string& text) { return rw::parse_documents_text(text); },
                  py::arg("text"))
      .def("save", [](const rw::Dataset& d, const std::string& path) { rw::write_documents(path, d); },
           py::arg("path"))
      .def("to_text", &rw::serialize_documents)
      .def("select_features",
           [](const rw::Dataset& d, const std::vector<std::string>& names) { return rw::select_features(d, names); },
           py::arg("names"))
      .def_readonly("feature_names", &rw::Dataset::feature_names)
      .def_property_readonly("feature_dim", &rw::Dataset::feature_dim)
      .def_property_readonly("document_count", &rw::Dataset::document_count)
      .def_property_readonly("query_ids",
                             [](const rw::Dataset& d) {
                               std::vector<std::string> ids;
                               for (const auto& g : d.groups) ids.push_back(g.query_id);
                               return ids;
                             })
      .def("wm_probs",
           [](const rw::Dataset& d) {
             std::vector<std::optional<double>> out;
             for (const auto& g : d.groups) {
               for (const auto& doc : g.documents) out.push_back(doc.wm_prob);
             }
             return out;
           })
      .def("__eq__", [](const rw::Dataset& a, const rw::Dataset& b) { return a == b; });

  py::class_<JudgedPairs>(m, "JudgedPairs")
      .def_static("load",
                  [](const std::string& path, const rw::Dataset& docs) {
                    return JudgedPairs{docs, rw::parse_pairs(path, docs)};
                  },
                  py::arg("path"), py::arg("documents"))
      .def("save", [](const JudgedPairs& p, const std::string& path) { rw::write_pairs(path, p.pairs); },
           py::arg("path"))
      .def("to_text", [](const JudgedPairs& p) { return rw::serialize_pairs(p.pairs); })
      .def("__len__", [](const JudgedPairs& p) { return p.pairs.size(); })
      .def_readonly("documents", &JudgedPairs::documents);

  py::class_<rw::MetricParams>(m, "MetricParams")
      .def(py::init<>())
      .def_readwrite("rating_irs", &rw::MetricParams::rating_irs)
      .def_readwrite("gamma", &rw::MetricParams::gamma)
      .def_readwrite("wmp", &rw::MetricParams::wmp)
      .def_readwrite("boundaries", &rw::MetricParams::boundaries)
      .def_readwrite("sigma", &rw::MetricParams::sigma)
      .def("validate", &rw::MetricParams::validate)
      .def_static("load", [](const std::string& path) { return rw::load_metric(path).params; }, py::arg("path"))
      .def("save", [](const rw::MetricParams& p, const std::string& path) { rw::save_metric(path, p); },
           py::arg("path"))
      .def("__repr__", [](const rw::MetricParams& p) { return rw::serialize_metric(p, std::nullopt); });

  m.def("compute_rating", py::overload_cast<int, double, int, const rw::MetricParams&>(&rw::compute_rating),
        py::arg("ir"), py::arg("ia"), py::arg("wm"), py::arg("params"));
  m.def("standard_normal_cdf", &rw::standard_normal_cdf, py::arg("x"));
  m.def("pair_label_probabilities", &rw::pair_label_probabilities, py::arg("mu_left"), py::arg("mu_right"),
        py::arg("params"));
  m.def(
      "fit_metric",
      [](const JudgedPairs& pairs, int max_iters, double convergence_tol, int threads) {
        rw::FitConfig config;
        config.max_iters = max_iters;
        config.convergence_tol = convergence_tol;
        config.threads = threads;
        const auto observations = rw::make_observations(pairs.pairs, pairs.documents);
        py::gil_scoped_release release;
        auto fit = rw::fit_metric(observations, config);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(fit.params, report_dict(fit.report));
      },
      py::arg("pairs"), py::arg("max_iters") = 20000, py::arg("convergence_tol") = 1e-7, py::arg("threads") = 1,
      "Fit the hybrid metric; returns (params, report).");

  py::class_<rw::DomainList>(m, "DomainList")
      .def_static("load", &rw::load_domain_list, py::arg("path"))
      .def("save", [](const rw::DomainList& l, const std::string& path) { rw::save_domain_list(l, path); },
           py::arg("path"))
      .def("__contains__", &rw::DomainList::contains)
      .def("__len__", &rw::DomainList::size)
      .def_readonly("min_count", &rw::DomainList::min_count)
      .def_readonly("min_rate", &rw::DomainList::min_rate)
      .def_property_readonly("domains", [](const rw::DomainList& l) {
        std::vector<std::string> out;
        for (const auto& [domain, stats] : l.entries) out.push_back(domain);
        return out;
      });
  m.def(
      "build_domain_list",
      [](const rw::Dataset& docs, std::int64_t min_count, double min_rate) {
        return rw::build_domain_list(docs, min_count, min_rate).list;
      },
      py::arg("documents"), py::arg("min_count") = 5, py::arg("min_rate") = 0.90);
  m.def("fuse_dataset", &rw::fuse_dataset, py::arg("documents"), py::arg("domains"),
        py::arg("domain_only") = false);

  m.def(
      "ndcg",
      [](const std::vector<double>& gains, std::size_t truncation) { return rw::ndcg(gains, truncation); },
      py::arg("gains_in_ranked_order"), py::arg("truncation") = rw::kFullList);
  m.def(
      "delta_ndcg",
      [](const std::vector<double>& gains, std::size_t i, std::size_t j, std::size_t truncation) {
        return rw::delta_ndcg(gains, i, j, truncation);
      },
      py::arg("gains_in_ranked_order"), py::arg("i"), py::arg("j"), py::arg("truncation") = rw::kFullList);
  m.def(
      "lambda_gradients",
      [](const std::vector<double>& scores, const std::vector<double>& gains, std::size_t truncation,
         double sigma) {
        auto g = rw::lambda_gradients(scores, gains, truncation, sigma);
        return py::make_tuple(g.lambdas, g.hessians);
      },
      py::arg("scores"), py::arg("gains"), py::arg("truncation") = rw::kFullList, py::arg("lambda_sigma") = 1.0,
      "Returns (lambdas, hessians).");

  py::class_<rw::Ensemble>(m, "Ensemble")
      .def_static("load", &rw::load_model, py::arg("path"))
      .def("save", [](const rw::Ensemble& e, const std::string& path) { rw::save_model(e, path); },
           py::arg("path"))
      .def("to_text", &rw::serialize_model)
      .def_property_readonly("n_trees", [](const rw::Ensemble& e) { return e.trees.size(); })
      .def_readonly("feature_names", &rw::Ensemble::feature_names)
      .def_readonly("feature_dim", &rw::Ensemble::feature_dim)
      .def(
          "predict",
          [](const rw::Ensemble& e, const std::vector<std::vector<double>>& rows) {
            return e.predict(to_matrix(rows, e.feature_dim));
          },
          py::arg("rows"))
      .def("__eq__", [](const rw::Ensemble& a, const rw::Ensemble& b) { return a == b; });

  m.def(
      "train_lambdamart",
      [](const rw::Dataset& docs, const rw::MetricParams& params, int n_trees, double shrinkage, int max_leaves,
         int min_docs_per_leaf, double lambda_sigma, std::size_t truncation, std::uint64_t seed, int threads) {
        rw::TrainConfig c;
        c.n_trees = n_trees;
        c.shrinkage = shrinkage;
        c.max_leaves = max_leaves;
        c.min_docs_per_leaf = min_docs_per_leaf;
        c.lambda_sigma = lambda_sigma;
        c.truncation = truncation;
        c.seed = seed;
        c.threads = threads;
        const auto lists = rw::make_rated_lists(docs, params);
        py::gil_scoped_release release;
        auto result = rw::train_lambdamart(lists, c, docs.feature_names);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(result.model, result.ndcg_trace);
      },
      py::arg("documents"), py::arg("params"), py::arg("n_trees") = 200, py::arg("shrinkage") = 0.1,
      py::arg("max_leaves") = 16, py::arg("min_docs_per_leaf") = 5, py::arg("lambda_sigma") = 1.0,
      py::arg("truncation") = rw::kFullList, py::arg("seed") = 1, py::arg("threads") = 1,
      "Train on hybrid-rating gains; returns (model, ndcg_trace).");

  m.def(
      "evaluate",
      [](const rw::Ensemble& model, const rw::Dataset& docs, const rw::MetricParams& params,
         const std::vector<std::size_t>& ks, const std::string& model_id) {
        return eval_dict(rw::evaluate(model, docs, params, ks, model_id));
      },
      py::arg("model"), py::arg("documents"), py::arg("params"), py::arg("ks") = std::vector<std::size_t>{5, 10, 25},
      py::arg("model_id") = "model");
  m.def(
      "compare",
      [](const std::string& control_tsv, const std::string& experiment_tsv) {
        const auto c = rw::compare(rw::parse_report_tsv(control_tsv), rw::parse_report_tsv(experiment_tsv));
        py::list rows;
        for (const auto& r : c.rows) {
          py::dict d;
          d["metric"] = r.metric;
          d["k"] = r.k;
          d["control"] = r.control;
          d["experiment"] = r.experiment;
          d["delta"] = r.delta;
          d["relative_delta"] = r.relative_delta;
          d["relative_reduction"] = r.relative_reduction;
          rows.append(d);
        }
        return rows;
      },
      py::arg("control_tsv"), py::arg("experiment_tsv"), "Compare two report TSVs (as returned in evaluate()['tsv']).");
  m.def("relative_reduction", &rw::relative_reduction, py::arg("control"), py::arg("experiment"));

  m.def(
      "generate_synthetic",
      [](int n_queries, int docs_per_query, int feature_dim, double noise, double wm_rate, int domains,
         double domain_skew, int pairs_per_query, int judgments_per_pair, double planted_gamma, double planted_wmp,
         std::uint64_t seed) {
        rw::SynthConfig c;
        c.n_queries = n_queries;
        c.docs_per_query = docs_per_query;
        c.feature_dim = feature_dim;
        c.noise_level = noise;
        c.watermark_base_rate = wm_rate;
        c.domain_count = domains;
        c.domain_skew = domain_skew;
        c.pairs_per_query = pairs_per_query;
        c.judgments_per_pair = judgments_per_pair;
        c.planted.gamma = planted_gamma;
        c.planted.wmp = planted_wmp;
        c.seed = seed;
        auto corpus = rw::generate_synthetic(c);
        JudgedPairs pairs{corpus.documents, std::move(corpus.pairs)};
        return py::make_tuple(std::move(corpus.documents), std::move(pairs));
      },
      py::arg("n_queries") = 200, py::arg("docs_per_query") = 30, py::arg("feature_dim") = 6, py::arg("noise") = 0.3,
      py::arg("wm_rate") = 0.15, py::arg("domains") = 50, py::arg("domain_skew") = 4.0,
      py::arg("pairs_per_query") = 10, py::arg("judgments_per_pair") = 200, py::arg("planted_gamma") = 0.6,
      py::arg("planted_wmp") = 0.7, py::arg("seed") = 1, "Returns (documents, pairs).");
}
