#include "rankweave/ltr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "rankweave/detail/parallel.hpp"
#include "rankweave/detail/text.hpp"
#include "rankweave/error.hpp"

namespace rankweave {
namespace {

double discount(std::size_t position, std::size_t truncation) {
  return position < truncation ? 1.0 / std::log2(static_cast<double>(position) + 2.0) : 0.0;
}

double dcg(std::span<const double> gains, std::size_t truncation) {
  const std::size_t n = std::min(gains.size(), truncation);
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) sum += gains[p] * discount(p, truncation);
  return sum;
}

double ideal_dcg(std::span<const double> gains, std::size_t truncation) {
  std::vector<double> sorted(gains.begin(), gains.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return dcg(sorted, truncation);
}

// 1 / (1 + exp(x)) without overflow.
double inverse_logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

}  // namespace

void FeatureMatrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && values_.empty()) cols_ = values.size();
  if (values.size() != cols_) {
    throw ValidationError("feature row has " + std::to_string(values.size()) + " values, expected " +
                          std::to_string(cols_));
  }
  values_.insert(values_.end(), values.begin(), values.end());
  ++rows_;
}

double gain(double rating) { return std::exp2(4.0 * rating) - 1.0; }

double ndcg(std::span<const double> gains, std::size_t truncation) {
  const double ideal = ideal_dcg(gains, truncation);
  if (ideal <= 0.0) return 1.0;
  return dcg(gains, truncation) / ideal;
}

double delta_ndcg(std::span<const double> gains, std::size_t i, std::size_t j,
                  std::size_t truncation) {
  if (i >= gains.size() || j >= gains.size() || i == j) {
    throw ValidationError("delta_ndcg: positions must be distinct and inside the list");
  }
  const double ideal = ideal_dcg(gains, truncation);
  if (ideal <= 0.0) return 0.0;
  return std::abs((gains[i] - gains[j]) * (discount(i, truncation) - discount(j, truncation))) /
         ideal;
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

LambdaGradients lambda_gradients(std::span<const double> scores, std::span<const double> gains,
                                 std::size_t truncation, double lambda_sigma) {
  if (scores.size() != gains.size()) {
    throw ValidationError("lambda_gradients: scores and gains differ in length");
  }
  const std::size_t n = scores.size();
  LambdaGradients out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double ideal = ideal_dcg(gains, truncation);
  if (ideal <= 0.0) return out;

  const auto order = rank_by_score(scores);
  std::vector<double> disc(n);
  for (std::size_t p = 0; p < n; ++p) disc[order[p]] = discount(p, truncation);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(gains[i] > gains[j])) continue;
      const double delta = std::abs((gains[i] - gains[j]) * (disc[i] - disc[j])) / ideal;
      if (delta == 0.0) continue;
      const double rho = inverse_logistic(lambda_sigma * (scores[i] - scores[j]));
      const double lambda_ij = -lambda_sigma * rho * delta;
      out.lambdas[i] -= lambda_ij;
      out.lambdas[j] += lambda_ij;
      const double h = lambda_sigma * lambda_sigma * rho * (1.0 - rho) * delta;
      out.hessians[i] += h;
      out.hessians[j] += h;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regression trees.

RegressionTree::RegressionTree(std::vector<Node> nodes, int max_leaves)
    : nodes_(std::move(nodes)), max_leaves_(max_leaves) {}

double RegressionTree::predict(std::span<const double> row) const {
  if (nodes_.empty()) return 0.0;
  std::size_t k = 0;
  while (!nodes_[k].is_leaf()) {
    const Node& n = nodes_[k];
    k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes_[k].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

void RegressionTree::validate(std::size_t feature_dim) const {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  std::vector<int> parents(nodes_.size(), 0);
  for (const auto& n : nodes_) {
    if (n.is_leaf()) {
      if (!std::isfinite(n.value)) throw ValidationError("tree leaf value is not finite");
      continue;
    }
    if (static_cast<std::size_t>(n.feature) >= feature_dim) {
      throw ValidationError("tree split feature " + std::to_string(n.feature) +
                            " outside feature dimension " + std::to_string(feature_dim));
    }
    for (int child : {n.left, n.right}) {
      if (child <= 0 || static_cast<std::size_t>(child) >= nodes_.size()) {
        throw ValidationError("tree child index out of range");
      }
      ++parents[static_cast<std::size_t>(child)];
    }
  }
  for (std::size_t k = 1; k < nodes_.size(); ++k) {
    if (parents[k] != 1) throw ValidationError("tree node unreachable or shared");
  }
}

PresortedIndex presort_features(const FeatureMatrix& features) {
  PresortedIndex index(features.cols());
  for (std::size_t f = 0; f < features.cols(); ++f) {
    auto& order = index[f];
    order.resize(features.rows());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return features(a, f) < features(b, f);
    });
  }
  return index;
}

RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> targets,
                        std::span<const double> hessians, const TreeConfig& config,
                        const PresortedIndex* presorted) {
  const std::size_t n = features.rows();
  if (n == 0) throw ValidationError("fit_tree: empty input");
  if (targets.size() != n || hessians.size() != n) {
    throw ValidationError("fit_tree: targets/hessians length differs from row count");
  }
  if (config.max_leaves < 1 || config.min_docs_per_leaf < 1) {
    throw ValidationError("fit_tree: max_leaves and min_docs_per_leaf must be positive");
  }
  if (n < static_cast<std::size_t>(config.min_docs_per_leaf)) {
    throw ValidationError("fit_tree: fewer documents than min_docs_per_leaf");
  }
  PresortedIndex local;
  if (presorted == nullptr) {
    local = presort_features(features);
    presorted = &local;
  }
  const std::size_t min_leaf = static_cast<std::size_t>(config.min_docs_per_leaf);
  const std::size_t dims = features.cols();

  std::vector<RegressionTree::Node> nodes(1);
  std::vector<int> node_of(n, 0);

  // Best split of one leaf; per-feature searches reduce in feature order so
  // the lowest feature wins ties.
  const auto best_split = [&](int leaf) {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] != leaf) continue;
      ++count;
      sum += targets[i];
      sum_sq += targets[i] * targets[i];
    }
    SplitCandidate best;
    if (count < 2 * min_leaf) return best;
    const double parent_score = sum * sum / static_cast<double>(count);
    std::vector<SplitCandidate> per_feature(dims);
    detail::parallel_for(dims, config.threads, [&](std::size_t f) {
      SplitCandidate cand;
      std::size_t left_count = 0;
      double left_sum = 0.0;
      bool have_prev = false;
      double prev = 0.0;
      for (std::uint32_t i : (*presorted)[f]) {
        if (node_of[i] != leaf) continue;
        const double v = features(i, f);
        if (have_prev && v > prev && left_count >= min_leaf && count - left_count >= min_leaf) {
          const double right_sum = sum - left_sum;
          const double g = left_sum * left_sum / static_cast<double>(left_count) +
                           right_sum * right_sum / static_cast<double>(count - left_count) -
                           parent_score;
          if (g > cand.gain) {
            double threshold = prev + (v - prev) * 0.5;
            if (!(threshold < v)) threshold = prev;
            cand = SplitCandidate{g, static_cast<int>(f), threshold};
          }
        }
        ++left_count;
        left_sum += targets[i];
        prev = v;
        have_prev = true;
      }
      per_feature[f] = cand;
    });
    // Gains at rounding level of the node's sum of squares are no split.
    const double min_gain = 1e-12 * std::max(sum_sq, std::numeric_limits<double>::min());
    for (const auto& cand : per_feature) {
      if (cand.feature >= 0 && cand.gain > min_gain && cand.gain > best.gain) best = cand;
    }
    return best;
  };

  std::vector<std::pair<int, SplitCandidate>> open = {{0, best_split(0)}};
  std::size_t leaves = 1;
  while (leaves < static_cast<std::size_t>(config.max_leaves)) {
    auto pick = open.end();
    for (auto it = open.begin(); it != open.end(); ++it) {
      if (it->second.feature < 0) continue;
      if (pick == open.end() || it->second.gain > pick->second.gain) pick = it;
    }
    if (pick == open.end()) break;
    const int parent = pick->first;
    const SplitCandidate split = pick->second;
    open.erase(pick);

    const int left = static_cast<int>(nodes.size());
    const int right = left + 1;
    nodes.resize(nodes.size() + 2);
    nodes[static_cast<std::size_t>(parent)].feature = split.feature;
    nodes[static_cast<std::size_t>(parent)].threshold = split.threshold;
    nodes[static_cast<std::size_t>(parent)].left = left;
    nodes[static_cast<std::size_t>(parent)].right = right;
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] != parent) continue;
      node_of[i] = features(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left
                                                                                           : right;
    }
    ++leaves;
    open.emplace_back(left, best_split(left));
    open.emplace_back(right, best_split(right));
    std::sort(open.begin(), open.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  std::vector<double> lambda_sum(nodes.size(), 0.0);
  std::vector<double> hessian_sum(nodes.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    lambda_sum[static_cast<std::size_t>(node_of[i])] += targets[i];
    hessian_sum[static_cast<std::size_t>(node_of[i])] += hessians[i];
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!nodes[k].is_leaf()) continue;
    nodes[k].value = hessian_sum[k] != 0.0 ? lambda_sum[k] / hessian_sum[k] : 0.0;
  }
  // Store nodes in pre-order, the order model files list them in.
  std::vector<RegressionTree::Node> ordered;
  ordered.reserve(nodes.size());
  const std::function<int(int)> relayout = [&](int k) {
    const int index = static_cast<int>(ordered.size());
    ordered.push_back(nodes[static_cast<std::size_t>(k)]);
    if (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
      const int left = relayout(nodes[static_cast<std::size_t>(k)].left);
      const int right = relayout(nodes[static_cast<std::size_t>(k)].right);
      ordered[static_cast<std::size_t>(index)].left = left;
      ordered[static_cast<std::size_t>(index)].right = right;
    }
    return index;
  };
  relayout(0);
  return RegressionTree(std::move(ordered), config.max_leaves);
}

// ---------------------------------------------------------------------------
// Boosting.

void TrainConfig::validate() const {
  if (n_trees < 0) throw ValidationError("train config: n_trees must be non-negative");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
    throw ValidationError("train config: shrinkage must lie in (0,1]");
  }
  if (max_leaves < 1 || min_docs_per_leaf < 1) {
    throw ValidationError("train config: max_leaves and min_docs_per_leaf must be positive");
  }
  if (!(lambda_sigma > 0.0) || !std::isfinite(lambda_sigma)) {
    throw ValidationError("train config: lambda_sigma must be positive");
  }
  if (truncation == 0) throw ValidationError("train config: truncation must be positive");
  if (threads < 1) throw ValidationError("train config: threads must be positive");
}

double Ensemble::predict(std::span<const double> row) const {
  if (row.size() != feature_dim) {
    throw ValidationError("predict: row has " + std::to_string(row.size()) +
                          " features, model expects " + std::to_string(feature_dim));
  }
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(row);
  return base_score + shrinkage * sum;
}

std::vector<double> Ensemble::predict(const FeatureMatrix& features) const {
  std::vector<double> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = predict(features.row(i));
  return out;
}

std::vector<std::size_t> rank(const Ensemble& model, const RatedList& list) {
  return rank_by_score(model.predict(list.features));
}

TrainResult train_lambdamart(std::span<const RatedList> queries, const TrainConfig& config,
                             std::vector<std::string> feature_names) {
  config.validate();
  if (queries.empty()) throw ValidationError("train_lambdamart: no queries");
  const std::size_t dim = queries.front().features.cols();
  if (!feature_names.empty() && feature_names.size() != dim) {
    throw ValidationError("train_lambdamart: feature name count differs from feature dimension");
  }

  // Concatenate all documents; offsets[q] is the first row of query q.
  std::vector<std::size_t> offsets = {0};
  FeatureMatrix all(0, dim);
  for (const auto& q : queries) {
    if (q.features.cols() != dim && q.features.rows() > 0) {
      throw ValidationError("train_lambdamart: query '" + q.query_id + "' has feature dimension " +
                            std::to_string(q.features.cols()) + ", expected " +
                            std::to_string(dim));
    }
    if (q.gains.size() != q.features.rows()) {
      throw ValidationError("train_lambdamart: query '" + q.query_id +
                            "' gains and feature rows differ");
    }
    for (double g : q.gains) {
      if (!(g >= 0.0) || !std::isfinite(g)) {
        throw ValidationError("train_lambdamart: gains must be finite and non-negative");
      }
    }
    for (std::size_t i = 0; i < q.features.rows(); ++i) all.push_row(q.features.row(i));
    offsets.push_back(offsets.back() + q.features.rows());
  }
  const std::size_t n_docs = offsets.back();

  TrainResult result;
  result.model.shrinkage = config.shrinkage;
  result.model.base_score = 0.0;
  result.model.feature_dim = dim;
  result.model.feature_names = std::move(feature_names);
  result.model.config = config;

  std::vector<double> scores(n_docs, result.model.base_score);
  const auto mean_ndcg = [&] {
    std::vector<double> per_query(queries.size());
    detail::parallel_for(queries.size(), config.threads, [&](std::size_t q) {
      const auto s = std::span<const double>(scores).subspan(offsets[q], queries[q].gains.size());
      std::vector<double> ranked;
      for (std::size_t i : rank_by_score(s)) ranked.push_back(queries[q].gains[i]);
      per_query[q] = ndcg(ranked, config.truncation);
    });
    double sum = 0.0;
    for (double v : per_query) sum += v;
    return sum / static_cast<double>(queries.size());
  };
  result.initial_ndcg = mean_ndcg();
  if (config.n_trees == 0 || n_docs == 0) return result;
  if (n_docs < static_cast<std::size_t>(config.min_docs_per_leaf)) {
    throw ValidationError("train_lambdamart: fewer documents than min_docs_per_leaf");
  }

  const PresortedIndex presorted = presort_features(all);
  const TreeConfig tree_config{config.max_leaves, config.min_docs_per_leaf, config.threads};
  std::vector<double> lambdas(n_docs);
  std::vector<double> hessians(n_docs);
  for (int t = 0; t < config.n_trees; ++t) {
    detail::parallel_for(queries.size(), config.threads, [&](std::size_t q) {
      const std::size_t size = queries[q].gains.size();
      auto grads = lambda_gradients(std::span<const double>(scores).subspan(offsets[q], size),
                                    queries[q].gains, config.truncation, config.lambda_sigma);
      std::copy(grads.lambdas.begin(), grads.lambdas.end(), lambdas.begin() + offsets[q]);
      std::copy(grads.hessians.begin(), grads.hessians.end(), hessians.begin() + offsets[q]);
    });
    RegressionTree tree = fit_tree(all, lambdas, hessians, tree_config, &presorted);
    for (std::size_t i = 0; i < n_docs; ++i) {
      scores[i] += config.shrinkage * tree.predict(all.row(i));
    }
    result.model.trees.push_back(std::move(tree));
    result.ndcg_trace.push_back(mean_ndcg());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model files.

namespace {

constexpr std::string_view kModelMagic = "rankweave-model v1";

void write_preorder(const RegressionTree& tree, std::size_t k, std::string& out) {
  const auto& node = tree.nodes()[k];
  if (node.is_leaf()) {
    out += "leaf\t" + detail::format_double(node.value) + '\n';
    return;
  }
  out += "split\t" + std::to_string(node.feature) + '\t' + detail::format_double(node.threshold) +
         '\n';
  write_preorder(tree, static_cast<std::size_t>(node.left), out);
  write_preorder(tree, static_cast<std::size_t>(node.right), out);
}

std::string truncation_text(std::size_t t) {
  return t == kFullList ? std::string("full") : std::to_string(t);
}

class ModelReader {
 public:
  ModelReader(std::string_view text, const std::string& source)
      : lines_(detail::split(text, '\n')), source_(source) {
    if (lines_.empty() || !lines_.back().empty()) fail("corrupt model file: truncated");
    lines_.pop_back();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_, std::min(pos_ + 1, lines_.size() + 1), what);
  }

  std::string_view next() {
    if (pos_ >= lines_.size()) {
      ++pos_;
      fail("corrupt model file: truncated");
    }
    return detail::chomp(lines_[pos_++]);
  }

  bool done() const { return pos_ >= lines_.size(); }

  std::string_view value(std::string_view key) {
    const auto line = next();
    if (!line.starts_with(key) || line.size() <= key.size() || line[key.size()] != '=') {
      --pos_;
      fail("corrupt model file: expected '" + std::string(key) + "='");
    }
    return line.substr(key.size() + 1);
  }

  double number(std::string_view key) {
    double v = 0.0;
    if (!detail::parse_double(value(key), &v)) {
      --pos_;
      fail("corrupt model file: bad number for '" + std::string(key) + "'");
    }
    return v;
  }

  std::int64_t integer(std::string_view key) {
    std::int64_t v = 0;
    if (!detail::parse_int64(value(key), &v)) {
      --pos_;
      fail("corrupt model file: bad integer for '" + std::string(key) + "'");
    }
    return v;
  }

  // Reads one subtree in pre-order, appending nodes; returns its index.
  int read_node(std::vector<RegressionTree::Node>& nodes, int depth) {
    if (depth > 4096) fail("corrupt model file: tree too deep");
    const auto fields = detail::split(next(), '\t');
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (fields.size() == 2 && fields[0] == "leaf") {
      if (!detail::parse_double(fields[1], &nodes.back().value)) fail("corrupt model file: bad leaf");
      return index;
    }
    std::int64_t feature = 0;
    double threshold = 0.0;
    if (fields.size() != 3 || fields[0] != "split" || !detail::parse_int64(fields[1], &feature) ||
        feature < 0 || feature > std::numeric_limits<int>::max() ||
        !detail::parse_double(fields[2], &threshold)) {
      fail("corrupt model file: bad tree node");
    }
    const int left = read_node(nodes, depth + 1);
    const int right = read_node(nodes, depth + 1);
    auto& node = nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<int>(feature);
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return index;
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
  const std::string& source_;
};

}  // namespace

std::string serialize_model(const Ensemble& model) {
  std::string out(kModelMagic);
  out += '\n';
  out += "feature_dim=" + std::to_string(model.feature_dim) + '\n';
  out += "shrinkage=" + detail::format_double(model.shrinkage) + '\n';
  out += "base_score=" + detail::format_double(model.base_score) + '\n';
  out += "n_trees=" + std::to_string(model.trees.size()) + '\n';
  out += "features=";
  for (std::size_t k = 0; k < model.feature_names.size(); ++k) {
    if (k > 0) out += '\t';
    out += model.feature_names[k];
  }
  out += '\n';
  const auto& c = model.config;
  out += "config.n_trees=" + std::to_string(c.n_trees) + '\n';
  out += "config.shrinkage=" + detail::format_double(c.shrinkage) + '\n';
  out += "config.max_leaves=" + std::to_string(c.max_leaves) + '\n';
  out += "config.min_docs_per_leaf=" + std::to_string(c.min_docs_per_leaf) + '\n';
  out += "config.lambda_sigma=" + detail::format_double(c.lambda_sigma) + '\n';
  out += "config.truncation=" + truncation_text(c.truncation) + '\n';
  out += "config.seed=" + std::to_string(c.seed) + '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& tree = model.trees[t];
    out += "tree=" + std::to_string(t) + "\tnodes=" + std::to_string(tree.nodes().size()) +
           "\tmax_leaves=" + std::to_string(tree.max_leaves()) + '\n';
    write_preorder(tree, 0, out);
  }
  out += "end\n";
  return out;
}

Ensemble parse_model_text(std::string_view text, const std::string& source) {
  ModelReader in(text, source);
  const auto magic = in.next();
  if (magic != kModelMagic) {
    if (magic.starts_with("rankweave-model ")) {
      throw ParseError(source, 1, "unsupported model version '" + std::string(magic) + "'");
    }
    throw ParseError(source, 1, "corrupt model file: bad header");
  }
  Ensemble model;
  const auto dim = in.integer("feature_dim");
  if (dim < 0) in.fail("corrupt model file: negative feature_dim");
  model.feature_dim = static_cast<std::size_t>(dim);
  model.shrinkage = in.number("shrinkage");
  model.base_score = in.number("base_score");
  const auto n_trees = in.integer("n_trees");
  if (n_trees < 0) in.fail("corrupt model file: negative n_trees");
  const auto names = in.value("features");
  if (!names.empty()) {
    for (auto name : detail::split(names, '\t')) model.feature_names.emplace_back(name);
    if (model.feature_names.size() != model.feature_dim) {
      in.fail("corrupt model file: feature name count differs from feature_dim");
    }
  }
  auto& c = model.config;
  c.n_trees = static_cast<int>(in.integer("config.n_trees"));
  c.shrinkage = in.number("config.shrinkage");
  c.max_leaves = static_cast<int>(in.integer("config.max_leaves"));
  c.min_docs_per_leaf = static_cast<int>(in.integer("config.min_docs_per_leaf"));
  c.lambda_sigma = in.number("config.lambda_sigma");
  const auto truncation = in.value("config.truncation");
  std::int64_t t = 0;
  if (truncation == "full") {
    c.truncation = kFullList;
  } else if (detail::parse_int64(truncation, &t) && t > 0) {
    c.truncation = static_cast<std::size_t>(t);
  } else {
    in.fail("corrupt model file: bad truncation");
  }
  const auto seed = in.integer("config.seed");
  c.seed = static_cast<std::uint64_t>(seed);

  for (std::int64_t k = 0; k < n_trees; ++k) {
    const auto fields = detail::split(in.next(), '\t');
    std::int64_t index = -1;
    std::int64_t count = 0;
    std::int64_t max_leaves = 0;
    if (fields.size() != 3 || !fields[0].starts_with("tree=") ||
        !detail::parse_int64(fields[0].substr(5), &index) || index != k ||
        !fields[1].starts_with("nodes=") || !detail::parse_int64(fields[1].substr(6), &count) ||
        !fields[2].starts_with("max_leaves=") ||
        !detail::parse_int64(fields[2].substr(11), &max_leaves)) {
      in.fail("corrupt model file: bad tree header");
    }
    std::vector<RegressionTree::Node> nodes;
    in.read_node(nodes, 0);
    if (static_cast<std::int64_t>(nodes.size()) != count) {
      in.fail("corrupt model file: node count mismatch");
    }
    RegressionTree tree(std::move(nodes), static_cast<int>(max_leaves));
    try {
      tree.validate(model.feature_dim);
    } catch (const ValidationError& e) {
      in.fail(std::string("corrupt model file: ") + e.what());
    }
    model.trees.push_back(std::move(tree));
  }
  if (in.next() != "end" || !in.done()) in.fail("corrupt model file: trailing content");
  return model;
}

void save_model(const Ensemble& model, const std::string& path) {
  detail::write_file(path, serialize_model(model));
}

Ensemble load_model(const std::string& path) {
  return parse_model_text(detail::read_file(path), path);
}

}  // namespace rankweave
