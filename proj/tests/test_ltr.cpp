#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rankweave/error.hpp"
#include "rankweave/ltr.hpp"

using namespace rankweave;

namespace {

std::vector<double> random_gains(std::mt19937& rng, std::size_t n) {
  std::uniform_int_distribution<int> level(0, 4);
  std::vector<double> g(n);
  for (auto& x : g) x = std::exp2(level(rng)) - 1.0;
  return g;
}

// Queries whose feature 0 orders documents exactly by gain.
std::vector<RatedList> monotone_fixture(int queries, int docs) {
  std::vector<RatedList> out;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int q = 0; q < queries; ++q) {
    RatedList list{"q" + std::to_string(q), {}, FeatureMatrix(0, 2)};
    for (int d = 0; d < docs; ++d) {
      const int grade = (d * 7 + q) % 5;
      list.gains.push_back(std::exp2(grade) - 1.0);
      const std::array<double, 2> row = {grade + 0.1 * q, unit(rng)};
      list.features.push_row(row);
    }
    out.push_back(std::move(list));
  }
  return out;
}

}  // namespace

TEST_CASE("gain") {
  CHECK(gain(0.0) == 0.0);
  CHECK(gain(1.0) == 15.0);
  CHECK(gain(0.5) == 3.0);
}

TEST_CASE("ndcg fixtures") {
  const std::vector<double> sorted = {15, 7, 3, 3, 1, 0};
  CHECK(ndcg(sorted) == 1.0);
  const std::vector<double> worked = {3, 0, 1};
  CHECK(std::abs(ndcg(worked, 3) - 0.96394) < 1e-5);
  CHECK(ndcg(worked, 3) == doctest::Approx(oracle::brute_ndcg(worked, 3)).epsilon(1e-15));
  CHECK(ndcg(std::vector<double>{0, 0, 0}) == 1.0);
  CHECK(ndcg(std::vector<double>{}) == 1.0);
  // Truncation ignores everything past position T.
  CHECK(ndcg(std::vector<double>{1, 0, 15}, 1) == doctest::Approx(1.0 / 15.0));
}

TEST_CASE("property: ndcg range and equal-gain permutation invariance") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 15);
    const std::size_t t = trial % 3 == 0 ? kFullList : 1 + static_cast<std::size_t>(trial % 7);
    auto g = random_gains(rng, n);
    const double v = ndcg(g, t);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-15);
    CHECK(v == doctest::Approx(oracle::brute_ndcg(g, t)).epsilon(1e-12));
    // Swapping two positions with equal gains leaves NDCG unchanged.
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (g[i] != g[j]) continue;
        auto h = g;
        std::swap(h[i], h[j]);
        CHECK(ndcg(h, t) == v);
      }
    }
  }
}

TEST_CASE("delta_ndcg equals brute-force swap recomputation") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 11);
    const std::size_t t = trial % 4 == 0 ? kFullList : 1 + static_cast<std::size_t>(trial % 9);
    const auto g = random_gains(rng, n);
    std::uniform_int_distribution<std::size_t> pos(0, n - 1);
    const std::size_t i = pos(rng);
    std::size_t j = pos(rng);
    while (j == i) j = pos(rng);
    CHECK(std::abs(delta_ndcg(g, i, j, t) - oracle::brute_swap_delta(g, i, j, t)) < 1e-12);
  }
  const std::vector<double> g = {3, 7, 3, 1, 0};
  CHECK(delta_ndcg(g, 0, 2) == 0.0);
  CHECK(delta_ndcg(g, 3, 4, 2) == 0.0);
  CHECK_THROWS_AS(delta_ndcg(g, 0, 5), ValidationError);
  CHECK_THROWS_AS(delta_ndcg(g, 1, 1), ValidationError);
}

TEST_CASE("lambda gradients") {
  SUBCASE("equal gains give nothing") {
    const auto r = lambda_gradients(std::vector<double>{0.3, -1, 2}, std::vector<double>{3, 3, 3},
                                    kFullList, 1.0);
    for (double l : r.lambdas) CHECK(l == 0.0);
    for (double h : r.hessians) CHECK(h == 0.0);
  }
  SUBCASE("two documents, tied scores") {
    const auto r = lambda_gradients(std::vector<double>{0, 0}, std::vector<double>{15, 0},
                                    kFullList, 1.0);
    CHECK(r.lambdas[0] == doctest::Approx(0.18453512321427123).epsilon(1e-14));
    CHECK(r.lambdas[1] == doctest::Approx(-0.18453512321427123).epsilon(1e-14));
    CHECK(r.hessians[0] == doctest::Approx(0.09226756160713562).epsilon(1e-14));
    CHECK(r.hessians[1] == r.hessians[0]);
  }
  SUBCASE("saturation with growing margin") {
    double previous = 1e9;
    for (double margin : {1.0, 4.0, 16.0, 64.0}) {
      const auto r = lambda_gradients(std::vector<double>{3 * margin, 2 * margin, margin, 0},
                                      std::vector<double>{15, 7, 3, 0}, kFullList, 1.0);
      double norm = 0.0;
      for (double l : r.lambdas) norm += l * l;
      norm = std::sqrt(norm);
      CHECK(norm < previous);
      previous = norm;
    }
    CHECK(previous < 1e-20);
  }
  SUBCASE("property: lambdas sum to zero") {
    std::mt19937 rng(17);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = 1 + static_cast<std::size_t>(trial % 20);
      const auto g = random_gains(rng, n);
      std::vector<double> s(n);
      for (auto& x : s) x = gauss(rng);
      const auto r = lambda_gradients(s, g, trial % 2 ? kFullList : 5, 0.5 + trial % 3);
      double sum = 0.0;
      double scale = 0.0;
      for (double l : r.lambdas) {
        sum += l;
        scale += std::abs(l);
      }
      CHECK(std::abs(sum) <= 1e-12 * std::max(1.0, scale));
      for (double h : r.hessians) CHECK(h >= 0.0);
    }
  }
  CHECK_THROWS_AS(lambda_gradients(std::vector<double>{1}, std::vector<double>{1, 2}, kFullList, 1.0),
                  ValidationError);
}

TEST_CASE("fit_tree") {
  SUBCASE("constant targets give a single leaf") {
    FeatureMatrix x(0, 2);
    std::vector<double> t, h;
    for (int i = 0; i < 20; ++i) {
      x.push_row(std::array<double, 2>{double(i), double(i % 3)});
      t.push_back(0.7);
      h.push_back(1.0);
    }
    const auto tree = fit_tree(x, t, h, TreeConfig{8, 2, 1});
    CHECK(tree.leaf_count() == 1);
    CHECK(tree.nodes()[0].value == doctest::Approx(0.7).epsilon(1e-14));
  }
  SUBCASE("max_leaves = 1 gives the Newton step over all documents") {
    FeatureMatrix x(0, 1);
    const std::vector<double> t = {1, -2, 4, 0.5};
    const std::vector<double> h = {0.5, 1, 2, 0.25};
    for (int i = 0; i < 4; ++i) x.push_row(std::array<double, 1>{double(i)});
    const auto tree = fit_tree(x, t, h, TreeConfig{1, 1, 1});
    CHECK(tree.leaf_count() == 1);
    CHECK(tree.nodes()[0].value == doctest::Approx(3.5 / 3.75));
  }
  SUBCASE("zero hessian leaf is zero") {
    FeatureMatrix x(0, 1);
    for (int i = 0; i < 3; ++i) x.push_row(std::array<double, 1>{double(i)});
    const auto tree = fit_tree(x, std::vector<double>{1, 1, 1}, std::vector<double>{0, 0, 0},
                               TreeConfig{1, 1, 1});
    CHECK(tree.nodes()[0].value == 0.0);
  }
  SUBCASE("perfect split on feature 0 matches the exhaustive search") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FeatureMatrix x(0, 3);
    std::vector<std::vector<double>> rows;
    std::vector<double> t, h;
    for (int i = 0; i < 40; ++i) {
      const std::vector<double> row = {unit(rng), unit(rng), unit(rng)};
      rows.push_back(row);
      x.push_row(row);
      t.push_back(row[0] < 0.45 ? -1.0 : 2.0);
      h.push_back(1.0);
    }
    const auto tree = fit_tree(x, t, h, TreeConfig{2, 1, 1});
    const auto brute = oracle::brute_best_split(rows, t, 1);
    REQUIRE(tree.leaf_count() == 2);
    CHECK(tree.nodes()[0].feature == 0);
    CHECK(brute.feature == 0);
    CHECK(tree.nodes()[0].threshold == doctest::Approx(brute.threshold).epsilon(1e-15));
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(tree.predict(rows[i]) == t[i]);
  }
  SUBCASE("property: first split equals the exhaustive best split") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 8 + static_cast<std::size_t>(trial % 57);
      const std::size_t min_leaf = 1 + static_cast<std::size_t>(trial % 4);
      FeatureMatrix x(0, 3);
      std::vector<std::vector<double>> rows;
      std::vector<double> t, h(n, 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> row = {double(coarse(rng)), unit(rng), double(coarse(rng))};
        rows.push_back(row);
        x.push_row(row);
        t.push_back(unit(rng) + row[1] * 2.0);
      }
      const auto tree = fit_tree(x, t, h, TreeConfig{2, static_cast<int>(min_leaf), 1});
      const auto brute = oracle::brute_best_split(rows, t, min_leaf);
      if (brute.feature < 0) {
        CHECK(tree.leaf_count() == 1);
        continue;
      }
      REQUIRE(tree.leaf_count() == 2);
      CHECK(tree.nodes()[0].feature == brute.feature);
      CHECK(tree.nodes()[0].threshold == doctest::Approx(brute.threshold).epsilon(1e-12));
      // Children respect min_docs_per_leaf.
      std::size_t left = 0;
      for (const auto& r : rows) left += r[tree.nodes()[0].feature] <= tree.nodes()[0].threshold;
      CHECK(left >= min_leaf);
      CHECK(n - left >= min_leaf);
    }
  }
  SUBCASE("ties prefer the lowest feature index") {
    FeatureMatrix x(0, 2);
    std::vector<double> t, h;
    for (int i = 0; i < 10; ++i) {
      x.push_row(std::array<double, 2>{double(i), double(i)});
      t.push_back(i < 5 ? 0.0 : 1.0);
      h.push_back(1.0);
    }
    const auto tree = fit_tree(x, t, h, TreeConfig{2, 1, 1});
    CHECK(tree.nodes()[0].feature == 0);
    CHECK(tree.nodes()[0].threshold == 4.5);
  }
  SUBCASE("leaf limit and thread count") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FeatureMatrix x(0, 4);
    std::vector<double> t, h;
    for (int i = 0; i < 300; ++i) {
      x.push_row(std::array<double, 4>{unit(rng), unit(rng), unit(rng), unit(rng)});
      t.push_back(unit(rng));
      h.push_back(0.5 + unit(rng));
    }
    const auto one = fit_tree(x, t, h, TreeConfig{7, 5, 1});
    const auto four = fit_tree(x, t, h, TreeConfig{7, 5, 4});
    CHECK(one.leaf_count() == 7);
    CHECK(one == four);
    CHECK_NOTHROW(one.validate(4));
    CHECK_THROWS_AS(one.validate(2), ValidationError);
  }
  CHECK_THROWS_AS(fit_tree(FeatureMatrix(0, 2), {}, {}, TreeConfig{}), ValidationError);
}

TEST_CASE("prediction and ranking") {
  Ensemble empty;
  empty.base_score = 0.25;
  empty.feature_dim = 2;
  CHECK(empty.predict(std::vector<double>{1, 2}) == 0.25);
  CHECK_THROWS_AS(empty.predict(std::vector<double>{1}), ValidationError);

  Ensemble single = empty;
  single.shrinkage = 0.5;
  single.trees.emplace_back(std::vector<RegressionTree::Node>{{-1, 0, -1, -1, 3.0}}, 1);
  CHECK(single.predict(std::vector<double>{9, 9}) == 0.25 + 0.5 * 3.0);

  // Tree A: f0 <= 1 ? 2 : (f1 <= 0 ? -1 : 4). Tree B: f1 <= 5 ? 10 : 20.
  Ensemble two;
  two.feature_dim = 2;
  two.shrinkage = 0.1;
  two.base_score = 1.0;
  two.trees.emplace_back(std::vector<RegressionTree::Node>{{0, 1.0, 1, 2, 0},
                                                           {-1, 0, -1, -1, 2.0},
                                                           {1, 0.0, 3, 4, 0},
                                                           {-1, 0, -1, -1, -1.0},
                                                           {-1, 0, -1, -1, 4.0}},
                         4);
  two.trees.emplace_back(
      std::vector<RegressionTree::Node>{{1, 5.0, 1, 2, 0}, {-1, 0, -1, -1, 10}, {-1, 0, -1, -1, 20}}, 2);
  // Row (3, 0.5): tree A -> 4, tree B -> 10; 1 + 0.1 * 14.
  CHECK(two.predict(std::vector<double>{3, 0.5}) == doctest::Approx(2.4).epsilon(1e-15));
  // Row (0, 7): tree A -> 2, tree B -> 20.
  CHECK(two.predict(std::vector<double>{0, 7}) == doctest::Approx(3.2).epsilon(1e-15));

  const std::vector<double> scores = {0.5, 2.0, 0.5, -1.0, 2.0};
  const auto order = rank_by_score(scores);
  CHECK(order == std::vector<std::size_t>{1, 4, 0, 2, 3});
  std::vector<double> affine;
  for (double s : scores) affine.push_back(3.0 * s + 7.0);
  CHECK(rank_by_score(affine) == order);
}

TEST_CASE("training") {
  SUBCASE("no trees gives a constant model") {
    TrainConfig c;
    c.n_trees = 0;
    const auto r = train_lambdamart(monotone_fixture(2, 10), c);
    CHECK(r.model.trees.empty());
    CHECK(r.ndcg_trace.empty());
    CHECK(r.model.predict(std::vector<double>{5, 5}) == r.model.base_score);
  }
  SUBCASE("toy set with one perfectly ranking feature reaches NDCG 1 within 20 trees") {
    TrainConfig c;
    c.n_trees = 20;
    c.min_docs_per_leaf = 1;
    c.max_leaves = 8;
    const auto r = train_lambdamart(monotone_fixture(2, 10), c);
    REQUIRE(r.ndcg_trace.size() == 20);
    CHECK(r.ndcg_trace.back() == 1.0);
    for (std::size_t i = 1; i < r.ndcg_trace.size(); ++i) {
      CHECK(r.ndcg_trace[i] >= r.ndcg_trace[i - 1]);
    }
    CHECK(r.ndcg_trace.back() >= r.initial_ndcg);
  }
  SUBCASE("deterministic and thread-count independent") {
    TrainConfig c;
    c.n_trees = 15;
    c.min_docs_per_leaf = 2;
    const auto data = monotone_fixture(6, 25);
    const auto a = train_lambdamart(data, c, {"rank", "noise"});
    const auto b = train_lambdamart(data, c, {"rank", "noise"});
    c.threads = 3;
    const auto d = train_lambdamart(data, c, {"rank", "noise"});
    CHECK(serialize_model(a.model) == serialize_model(b.model));
    CHECK(serialize_model(a.model) == serialize_model(d.model));
    CHECK(a.ndcg_trace == d.ndcg_trace);
  }
  SUBCASE("errors") {
    TrainConfig c;
    CHECK_THROWS_AS(train_lambdamart({}, c), ValidationError);
    c.shrinkage = 0.0;
    CHECK_THROWS_AS(train_lambdamart(monotone_fixture(1, 5), c), ValidationError);
    auto data = monotone_fixture(2, 6);
    data[1].features = FeatureMatrix(6, 3);
    CHECK_THROWS_AS(train_lambdamart(data, TrainConfig{}), ValidationError);
    CHECK_THROWS_AS(train_lambdamart(monotone_fixture(1, 6), TrainConfig{}, {"only-one"}),
                    ValidationError);
  }
}

TEST_CASE("model file round trip") {
  TrainConfig c;
  c.n_trees = 12;
  c.min_docs_per_leaf = 2;
  c.truncation = 10;
  c.seed = 99;
  const auto data = monotone_fixture(4, 20);
  const Ensemble model = train_lambdamart(data, c, {"a", "b"}).model;
  const std::string text = serialize_model(model);
  const Ensemble back = parse_model_text(text);
  CHECK(back == model);
  CHECK(back.config == c);
  CHECK(serialize_model(back) == text);
  for (const auto& q : data) {
    for (std::size_t i = 0; i < q.features.rows(); ++i) {
      CHECK(back.predict(q.features.row(i)) == model.predict(q.features.row(i)));
    }
    CHECK(rank(back, q) == rank(model, q));
  }

  const std::string path = "test_model.tmp";
  save_model(model, path);
  CHECK(load_model(path) == model);
  std::remove(path.c_str());

  CHECK_THROWS_AS(parse_model_text(text.substr(0, text.size() / 2)), ParseError);
  CHECK_THROWS_AS(parse_model_text(text.substr(0, text.size() - 4)), ParseError);
  std::string wrong_version = text;
  wrong_version.replace(0, 18, "rankweave-model v2");
  CHECK_THROWS_AS(parse_model_text(wrong_version), ParseError);
  std::string bad_feature = text;
  bad_feature.replace(bad_feature.find("split\t"), 7, "split\t9");
  CHECK_THROWS_AS(parse_model_text(bad_feature), ParseError);
  CHECK_THROWS_AS(load_model("/nonexistent/model"), IoError);
}
