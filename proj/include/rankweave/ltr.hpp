#ifndef RANKWEAVE_LTR_HPP_
#define RANKWEAVE_LTR_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankweave {

/// Truncation value meaning "the whole list".
inline constexpr std::size_t kFullList = std::numeric_limits<std::size_t>::max();

/// Row-major documents x features matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  /// Appends a row; the first row fixes the column count.
  void push_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One query's documents with their gains.
struct RatedList {
  std::string query_id;
  std::vector<double> gains;
  FeatureMatrix features;
};

/// Exponential gain of a hybrid rating in [0,1]: 2^(4 rating) - 1.
double gain(double rating);

/// NDCG of gains listed in ranked order, discount 1/log2(1+j) for 1-based
/// position j <= truncation. All-zero gains score 1.
double ndcg(std::span<const double> gains_in_ranked_order, std::size_t truncation = kFullList);

/// |NDCG change| from swapping ranked positions i and j (0-based).
double delta_ndcg(std::span<const double> gains_in_ranked_order, std::size_t i, std::size_t j,
                  std::size_t truncation = kFullList);

struct LambdaGradients {
  std::vector<double> lambdas;   // positive pushes a document up
  std::vector<double> hessians;
};

/// LambdaRank gradients for one query. Positions come from sorting `scores`
/// descending, ties by index.
LambdaGradients lambda_gradients(std::span<const double> scores, std::span<const double> gains,
                                 std::size_t truncation, double lambda_sigma);

struct TreeConfig {
  int max_leaves = 16;
  int min_docs_per_leaf = 5;
  int threads = 1;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, int max_leaves);

  /// Rows with x[feature] <= threshold go left.
  double predict(std::span<const double> row) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int max_leaves() const { return max_leaves_; }
  std::size_t leaf_count() const;

  /// Throws ValidationError when the node array is not a well-formed binary
  /// tree over `feature_dim` features.
  void validate(std::size_t feature_dim) const;

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<Node> nodes_;
  int max_leaves_ = 1;
};

/// Per-feature document orders, computed once per training set.
using PresortedIndex = std::vector<std::vector<std::uint32_t>>;
PresortedIndex presort_features(const FeatureMatrix& features);

/// Grows a tree best-first by variance reduction of `targets`. Leaf values
/// are Newton steps sum(targets)/sum(hessians).
RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> targets,
                        std::span<const double> hessians, const TreeConfig& config,
                        const PresortedIndex* presorted = nullptr);

struct TrainConfig {
  int n_trees = 200;
  double shrinkage = 0.1;
  int max_leaves = 16;
  int min_docs_per_leaf = 5;
  double lambda_sigma = 1.0;
  std::size_t truncation = kFullList;
  std::uint64_t seed = 1;
  int threads = 1;  // not part of the model; results do not depend on it

  void validate() const;
  bool operator==(const TrainConfig& o) const {
    return n_trees == o.n_trees && shrinkage == o.shrinkage && max_leaves == o.max_leaves &&
           min_docs_per_leaf == o.min_docs_per_leaf && lambda_sigma == o.lambda_sigma &&
           truncation == o.truncation && seed == o.seed;
  }
};

struct Ensemble {
  std::vector<RegressionTree> trees;
  double shrinkage = 0.1;
  double base_score = 0.0;
  std::size_t feature_dim = 0;
  std::vector<std::string> feature_names;  // optional, one per dimension
  TrainConfig config;

  /// base_score + shrinkage * sum of tree outputs.
  double predict(std::span<const double> row) const;
  std::vector<double> predict(const FeatureMatrix& features) const;

  bool operator==(const Ensemble&) const = default;
};

struct TrainResult {
  Ensemble model;
  double initial_ndcg = 0.0;
  std::vector<double> ndcg_trace;  // mean training NDCG after each tree
};

/// LambdaMART boosting over the given queries.
TrainResult train_lambdamart(std::span<const RatedList> queries, const TrainConfig& config,
                             std::vector<std::string> feature_names = {});

/// Document order by descending score, ties by original index.
std::vector<std::size_t> rank_by_score(std::span<const double> scores);
std::vector<std::size_t> rank(const Ensemble& model, const RatedList& list);

std::string serialize_model(const Ensemble& model);
Ensemble parse_model_text(std::string_view text, const std::string& source = "<memory>");
void save_model(const Ensemble& model, const std::string& path);
Ensemble load_model(const std::string& path);

}  // namespace rankweave

#endif  // RANKWEAVE_LTR_HPP_
