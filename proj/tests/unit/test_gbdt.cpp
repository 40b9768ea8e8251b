#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "stackcast/error.hpp"
#include "stackcast/gbdt/binning.hpp"
#include "stackcast/gbdt/booster.hpp"
#include "stackcast/gbdt/histogram.hpp"
#include "stackcast/gbdt/sampling.hpp"
#include "stackcast/gbdt/tree.hpp"

using namespace stackcast;
using namespace stackcast::gbdt;

namespace {

// Owns everything a GrowContext points at, for unit-hessian, unit-weight data.
struct Grower {
  BinnedMatrix binned;
  std::vector<FeatureBundle> bundles;
  BinColumns bundle_columns;
  std::vector<double> gradients;
  std::vector<double> hessians;
  std::vector<double> weights;
  std::vector<std::uint32_t> rows;

  Grower(const Matrix& features, std::vector<double> g, std::size_t n_bins = 256)
      : binned(bin_features(features, n_bins)),
        bundles(singleton_bundles(binned.columns)),
        bundle_columns(encode_bundles(binned.columns, bundles)),
        gradients(std::move(g)),
        hessians(gradients.size(), 1.0),
        weights(gradients.size(), 1.0),
        rows(gradients.size()) {
    std::iota(rows.begin(), rows.end(), std::uint32_t{0});
  }

  GrowContext context(SplitParams split) const {
    GrowContext ctx;
    ctx.binned = &binned;
    ctx.bundle_columns = &bundle_columns;
    ctx.bundles = bundles;
    ctx.gradients = gradients;
    ctx.hessians = hessians;
    ctx.weights = weights;
    ctx.rows = rows;
    ctx.split = split;
    return ctx;
  }
};

std::vector<double> gradients_from_mean(const std::vector<double>& y) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::vector<double> g;
  for (const double v : y) g.push_back(mean - v);
  return g;
}

double tree_sse(const Tree& tree, const Matrix& x, const std::vector<double>& g) {
  // Loss of the residual targets -g after one full Newton step.
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double d = tree.predict(x.row(r)) + g[r];
    total += d * d;
  }
  return total;
}

std::vector<std::vector<BinStats>> unit_histograms(const Grower& grower) {
  const auto hist = build_histograms(grower.bundle_columns, grower.gradients, grower.hessians, grower.weights,
                                     grower.rows);
  const auto total = sum_stats(grower.gradients, grower.hessians, grower.weights, grower.rows);
  return expand_histograms(hist, grower.bundles, grower.binned.columns.n_bins, total);
}

Matrix sine_features(std::size_t n, std::size_t cols, Rng& rng) {
  Matrix m(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = std::sin(0.1 * static_cast<double>(r * (c + 1))) + 0.1 * rng.normal();
  }
  return m;
}

std::vector<double> targets_for(const Matrix& x, Rng& rng) {
  std::vector<double> y;
  for (std::size_t r = 0; r < x.rows(); ++r) y.push_back(2.0 * x(r, 0) - x(r, 1 % x.cols()) + 0.05 * rng.normal());
  return y;
}

}  // namespace

TEST_SUITE("binning") {
  TEST_CASE("quantile edges split 1..8 into four equal-count bins") {
    const std::vector<double> column{1, 2, 3, 4, 5, 6, 7, 8};
    const auto edges = compute_bin_edges(column, 4);
    REQUIRE(edges.size() == 3);
    std::vector<int> counts(4, 0);
    for (const double x : column) ++counts[bin_of(edges, x)];
    CHECK(counts == std::vector<int>{2, 2, 2, 2});
  }

  TEST_CASE("constant columns have no edges") {
    CHECK(compute_bin_edges(std::vector<double>{3, 3, 3}, 256).empty());
  }

  TEST_CASE("duplicate quantiles collapse") {
    const auto edges = compute_bin_edges(std::vector<double>{1, 1, 1, 9}, 4);
    CHECK(edges.size() < 3);
    CHECK(std::is_sorted(edges.begin(), edges.end()));
    CHECK(std::adjacent_find(edges.begin(), edges.end()) == edges.end());
  }

  TEST_CASE("x <= edge[k] exactly when bin(x) <= k") {
    Rng rng(4);
    auto column = stackcast::testing::random_vector(300, rng);
    const auto edges = compute_bin_edges(column, 16);
    REQUIRE(edges.size() == 15);
    for (const double x : column) {
      for (std::size_t k = 0; k < edges.size(); ++k) CHECK((x <= edges[k]) == (bin_of(edges, x) <= k));
    }
  }
}

TEST_SUITE("histogram") {
  TEST_CASE("single sample and additive accumulation") {
    const Grower one(stackcast::testing::column_matrix({0.0}), {2.0});
    const auto hist = build_histograms(one.bundle_columns, one.gradients, one.hessians, one.weights, one.rows);
    CHECK(hist.column(0)[0].grad == 2.0);
    CHECK(hist.column(0)[0].count == 1);

    const Grower two(stackcast::testing::column_matrix({5.0, 5.0}), {1.0, 3.0});
    const auto h2 = build_histograms(two.bundle_columns, two.gradients, two.hessians, two.weights, two.rows);
    CHECK(h2.column(0)[0].grad == 4.0);
    CHECK(h2.column(0)[0].count == 2);
  }

  TEST_CASE("amplified small-gradient sample contributes weight times gradient") {
    Grower grower(stackcast::testing::column_matrix({1.0}), {0.5});
    const GossConfig goss{0.2, 0.1, 0};
    grower.weights[0] = goss.amplification();
    const auto hist = build_histograms(grower.bundle_columns, grower.gradients, grower.hessians, grower.weights,
                                       grower.rows);
    CHECK(hist.column(0)[0].grad == 4.0);
  }

  TEST_CASE("parent histogram equals the sum of its children") {
    Rng rng(9);
    const Matrix x = stackcast::testing::random_matrix(200, 4, rng);
    const Grower grower(x, stackcast::testing::random_vector(200, rng), 32);
    std::vector<std::uint32_t> left, right;
    for (const std::uint32_t r : grower.rows) (x(r, 2) <= 0.1 ? left : right).push_back(r);
    auto build = [&](std::span<const std::uint32_t> rows) {
      return build_histograms(grower.bundle_columns, grower.gradients, grower.hessians, grower.weights, rows);
    };
    auto children = build(left);
    children += build(right);
    const auto parent = build(grower.rows);
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t b = 0; b < parent.column(c).size(); ++b) {
        CHECK(std::abs(parent.column(c)[b].grad - children.column(c)[b].grad) <= 1e-9);
        CHECK(std::abs(parent.column(c)[b].hess - children.column(c)[b].hess) <= 1e-9);
        CHECK(parent.column(c)[b].count == children.column(c)[b].count);
      }
    }
  }

  TEST_CASE("threaded histograms are bit-identical") {
    Rng rng(10);
    const Matrix x = stackcast::testing::random_matrix(600, 20, rng);
    const Grower grower(x, stackcast::testing::random_vector(600, rng));
    const auto serial = build_histograms(grower.bundle_columns, grower.gradients, grower.hessians, grower.weights,
                                         grower.rows, 1);
    const auto threaded = build_histograms(grower.bundle_columns, grower.gradients, grower.hessians, grower.weights,
                                           grower.rows, 4);
    for (std::size_t c = 0; c < 20; ++c) {
      CHECK(std::equal(serial.column(c).begin(), serial.column(c).end(), threaded.column(c).begin()));
    }
  }
}

TEST_SUITE("best_split") {
  TEST_CASE("perfect split of {-1,-1,+1,+1} has gain 2") {
    const std::vector<double> y{-1, -1, 1, 1};
    const Grower grower(stackcast::testing::column_matrix({1, 2, 3, 4}), gradients_from_mean(y));
    const auto total = sum_stats(grower.gradients, grower.hessians, grower.weights, grower.rows);
    const auto split = best_split(unit_histograms(grower), total, SplitParams{0.0, 0.0, 1});
    REQUIRE(split);
    CHECK(split->gain == 2.0);
    CHECK(split->feature == 0);
    CHECK(split->left.count == 2);
  }

  TEST_CASE("zero gradients give no split") {
    const Grower grower(stackcast::testing::column_matrix({1, 2, 3, 4}), {0, 0, 0, 0});
    CHECK_FALSE(best_split(unit_histograms(grower), BinStats{0, 4, 4}, SplitParams{0.0, 0.0, 1}));
  }

  TEST_CASE("equal gains resolve to the lower feature index") {
    Matrix x(4, 2);
    for (std::size_t r = 0; r < 4; ++r) x(r, 0) = x(r, 1) = static_cast<double>(r);
    const Grower grower(x, gradients_from_mean({-1, -1, 1, 1}));
    const auto total = sum_stats(grower.gradients, grower.hessians, grower.weights, grower.rows);
    const auto split = best_split(unit_histograms(grower), total, SplitParams{0.0, 0.0, 1});
    REQUIRE(split);
    CHECK(split->feature == 0);
  }

  TEST_CASE("min_samples_leaf and gamma suppress splits") {
    const Grower grower(stackcast::testing::column_matrix({1, 2, 3, 4}), gradients_from_mean({-1, -1, 1, 1}));
    const auto total = sum_stats(grower.gradients, grower.hessians, grower.weights, grower.rows);
    CHECK_FALSE(best_split(unit_histograms(grower), total, SplitParams{0.0, 0.0, 3}));
    CHECK_FALSE(best_split(unit_histograms(grower), total, SplitParams{0.0, 2.0, 1}));
    CHECK(best_split(unit_histograms(grower), total, SplitParams{0.0, 1.9, 1}));
  }
}

TEST_SUITE("sampling") {
  TEST_CASE("amplification is (1-a)/b") {
    CHECK(GossConfig{0.2, 0.1, 0}.amplification() == 8.0);
  }

  TEST_CASE("top rows by |g| are always kept with weight 1") {
    const std::vector<double> g{0.1, -5.0, 0.2, 0.3, 4.0, -0.1, 0.05, 0.0, 0.2, -0.3};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const auto sample = goss_sample(g, GossConfig{0.2, 0.1, 0}, rng);
      REQUIRE(sample.indices.size() == 3);
      CHECK(std::is_sorted(sample.indices.begin(), sample.indices.end()));
      int top_found = 0;
      for (std::size_t k = 0; k < sample.indices.size(); ++k) {
        if (sample.indices[k] == 1 || sample.indices[k] == 4) {
          CHECK(sample.weights[k] == 1.0);
          ++top_found;
        } else {
          CHECK(sample.weights[k] == 8.0);
        }
      }
      CHECK(top_found == 2);
    }
  }

  TEST_CASE("GOSS is deterministic per seed and rejects oversized budgets") {
    Rng a(3), b(3);
    const std::vector<double> g{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(goss_sample(g, GossConfig{0.3, 0.3, 0}, a).indices == goss_sample(g, GossConfig{0.3, 0.3, 0}, b).indices);
    Rng rng(0);
    const std::vector<double> three{1, 2, 3};
    try {
      goss_sample(three, GossConfig{0.5, 0.5, 0}, rng);
      FAIL("expected SampleBudgetExceedsData");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kSampleBudgetExceedsData);
    }
  }

  TEST_CASE("ordered target statistics examples") {
    const std::vector<std::int64_t> cats{7, 7};
    const std::vector<double> y{1.0, 0.0};
    const std::vector<std::size_t> identity{0, 1};
    const auto enc = ordered_target_stats(cats, y, 1.0, identity, 0.5);
    CHECK(enc[0] == 0.5);
    CHECK(enc[1] == 1.0);
  }

  TEST_CASE("ordered target statistics never see their own or later targets") {
    Rng rng(21);
    const std::size_t n = 60;
    std::vector<std::int64_t> cats(n);
    for (auto& c : cats) c = static_cast<std::int64_t>(rng.index(4));
    auto y = stackcast::testing::random_vector(n, rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> position(n);
    for (std::size_t k = 0; k < n; ++k) position[order[k]] = k;

    const auto base = ordered_target_stats(cats, y, 1.0, order, 0.5);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t i = rng.index(n);
      auto perturbed = y;
      perturbed[i] += rng.uniform(-5.0, 5.0);
      const auto enc = ordered_target_stats(cats, perturbed, 1.0, order, 0.5);
      for (std::size_t j = 0; j < n; ++j) {
        if (position[j] <= position[i]) CHECK(enc[j] == base[j]);
      }
    }
  }

  TEST_CASE("ordered target statistics reject non-permutations") {
    const std::vector<std::int64_t> cats{1, 2};
    const std::vector<double> y{1.0, 0.0};
    const std::vector<std::size_t> repeated{0, 0};
    CHECK_THROWS_AS(ordered_target_stats(cats, y, 1.0, repeated, 0.5), Error);
  }
}

TEST_SUITE("tree growth") {
  TEST_CASE("one leaf holds the Newton step") {
    const Grower grower(stackcast::testing::column_matrix({1, 2, 3}), {1.0, 2.0, 3.0});
    const Tree tree = grow_tree_leafwise(grower.context(SplitParams{1.0, 0.0, 1}), 1);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].value == -6.0 / 4.0);
  }

  TEST_CASE("XOR-like four points are isolated by leaf-wise growth") {
    Matrix x(4, 2);
    const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    for (std::size_t r = 0; r < 4; ++r) {
      x(r, 0) = pts[r][0];
      x(r, 1) = pts[r][1];
    }
    const auto g = gradients_from_mean({0.0, 1.0, 1.0, 0.5});
    const Grower grower(x, g);
    const Tree tree = grow_tree_leafwise(grower.context(SplitParams{0.0, 0.0, 1}), 4);
    CHECK(tree.n_leaves() == 4);
    CHECK(tree.nodes[0].feature == 0);
    for (std::size_t r = 0; r < 4; ++r) CHECK(tree.predict(x.row(r)) == -g[r]);
  }

  TEST_CASE("unsplittable data stays a single leaf") {
    Matrix x(5, 2, 1.0);
    const Grower grower(x, {1, -2, 3, -4, 5});
    CHECK(grow_tree_leafwise(grower.context(SplitParams{}), 31).n_leaves() == 1);
    CHECK(grow_tree_oblivious(grower.context(SplitParams{}), 4).n_leaves() == 1);
  }

  TEST_CASE("depth-1 oblivious tree makes the best_split choice") {
    const Grower grower(stackcast::testing::column_matrix({1, 2, 3, 4}), gradients_from_mean({-1, -1, 1, 1}));
    const Tree tree = grow_tree_oblivious(grower.context(SplitParams{0.0, 0.0, 1}), 1);
    const auto total = sum_stats(grower.gradients, grower.hessians, grower.weights, grower.rows);
    const auto split = best_split(unit_histograms(grower), total, SplitParams{0.0, 0.0, 1});
    REQUIRE(tree.nodes.size() == 3);
    CHECK(static_cast<std::size_t>(tree.nodes[0].feature) == split->feature);
    CHECK(tree.nodes[0].threshold_bin == split->bin);
  }

  TEST_CASE("depth-2 oblivious trees share one split per level") {
    Rng rng(12);
    const Matrix x = stackcast::testing::random_matrix(100, 3, rng);
    const Grower grower(x, stackcast::testing::random_vector(100, rng));
    const Tree tree = grow_tree_oblivious(grower.context(SplitParams{}), 2);
    CHECK(tree.n_leaves() == 4);
    CHECK(is_oblivious(tree));
    CHECK(tree.nodes[1].feature == tree.nodes[2].feature);
    CHECK(tree.nodes[1].threshold == tree.nodes[2].threshold);
  }

  TEST_CASE("oblivious trees lose to leaf-wise trees on per-node structure") {
    // x0 picks the half; the left half depends on x1, the right half on x2.
    Matrix x(8, 3);
    std::vector<double> y(8);
    for (std::size_t r = 0; r < 8; ++r) {
      x(r, 0) = static_cast<double>(r / 4);
      x(r, 1) = static_cast<double>((r / 2) % 2);
      x(r, 2) = static_cast<double>(r % 2);
      y[r] = r < 4 ? (x(r, 1) > 0 ? 4.0 : 0.0) : (x(r, 2) > 0 ? 10.0 : 6.0);
    }
    const auto g = gradients_from_mean(y);
    const Grower grower(x, g);
    const Tree leafwise = grow_tree_leafwise(grower.context(SplitParams{0.0, 0.0, 1}), 4);
    const Tree oblivious = grow_tree_oblivious(grower.context(SplitParams{0.0, 0.0, 1}), 2);
    CHECK(leafwise.n_leaves() == 4);
    CHECK(oblivious.n_leaves() == 4);
    CHECK(tree_sse(leafwise, x, g) == doctest::Approx(0.0));
    CHECK(tree_sse(oblivious, x, g) > tree_sse(leafwise, x, g));
  }

  TEST_CASE("routing sends values equal to the threshold left") {
    Tree tree;
    tree.nodes = {TreeNode{0, 2.5, 0, 1, 2, 0.0}, TreeNode{-1, 0, 0, -1, -1, -1.0}, TreeNode{-1, 0, 0, -1, -1, 1.0}};
    CHECK(tree.predict(std::vector<double>{2.5}) == -1.0);
    CHECK(tree.predict(std::vector<double>{2.5000001}) == 1.0);
  }
}

TEST_SUITE("booster") {
  TEST_CASE("no iterations predicts the mean") {
    BoostConfig config;
    config.n_iterations = 0;
    const std::vector<double> y{1.0, 2.0, 6.0};
    const auto model = fit_gbdt(stackcast::testing::column_matrix({1, 2, 3}), y, config);
    CHECK(model.trees.empty());
    CHECK(model.predict(std::vector<double>{10.0}) == 3.0);
  }

  TEST_CASE("linear prediction form") {
    GbdtModel model;
    model.base_prediction = 5.0;
    model.learning_rate = 0.1;
    model.n_features = 1;
    Tree tree;
    tree.nodes = {TreeNode{-1, 0, 0, -1, -1, 2.0}};
    model.trees.push_back(tree);
    CHECK(model.predict(std::vector<double>{0.0}) == doctest::Approx(5.2).epsilon(1e-15));
    CHECK_THROWS_AS(model.predict(std::vector<double>{0.0, 1.0}), Error);
  }

  TEST_CASE("exact fit in one iteration") {
    Rng rng(13);
    const std::size_t n = 40;
    std::vector<double> xs(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i) + 0.25;
      y[i] = rng.uniform(-10.0, 10.0);
    }
    BoostConfig config;
    config.n_iterations = 1;
    config.learning_rate = 1.0;
    config.lambda = 0.0;
    config.max_leaves = n;
    const auto model = fit_gbdt(stackcast::testing::column_matrix(xs), y, config);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(model.predict(std::vector<double>{xs[i]}) - y[i]) < 1e-10);
  }

  TEST_CASE("half steps shrink training MSE by a quarter per iteration") {
    Rng rng(14);
    const std::size_t n = 16;
    std::vector<double> xs(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i);
      y[i] = rng.uniform(-3.0, 3.0);
    }
    BoostConfig config;
    config.n_iterations = 5;
    config.learning_rate = 0.5;
    config.lambda = 0.0;
    config.max_leaves = n;
    TrainingTrace trace;
    fit_gbdt(stackcast::testing::column_matrix(xs), y, config, &trace);
    REQUIRE(trace.train_mse.size() == 6);
    for (std::size_t m = 1; m < trace.train_mse.size(); ++m) {
      CHECK(trace.train_mse[m] == doctest::Approx(trace.train_mse[0] * std::pow(0.25, m)).epsilon(1e-9));
    }
  }

  TEST_CASE("training loss never increases without sampling") {
    Rng rng(15);
    const Matrix x = sine_features(300, 6, rng);
    const auto y = targets_for(x, rng);
    for (const GrowthMode mode : {GrowthMode::kLeafwise, GrowthMode::kOblivious}) {
      BoostConfig config;
      config.mode = mode;
      config.n_iterations = 60;
      TrainingTrace trace;
      fit_gbdt(x, y, config, &trace);
      for (std::size_t m = 1; m < trace.train_mse.size(); ++m) CHECK(trace.train_mse[m] <= trace.train_mse[m - 1]);
    }
  }

  TEST_CASE("every oblivious tree is symmetric") {
    Rng rng(16);
    const Matrix x = sine_features(200, 5, rng);
    BoostConfig config;
    config.mode = GrowthMode::kOblivious;
    config.depth = 4;
    config.n_iterations = 30;
    config.goss = GossConfig{};
    const auto model = fit_gbdt(x, targets_for(x, rng), config);
    for (const Tree& tree : model.trees) CHECK(is_oblivious(tree));
  }

  TEST_CASE("training predictions match model predictions bit for bit") {
    Rng rng(17);
    const Matrix x = sine_features(150, 4, rng);
    const auto y = targets_for(x, rng);
    BoostConfig config;
    config.n_iterations = 25;
    config.goss = GossConfig{};
    TrainingTrace trace;
    const auto model = fit_gbdt(x, y, config, &trace);
    const auto pred = model.predict(x);
    double sse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sse += (pred[i] - y[i]) * (pred[i] - y[i]);
    CHECK(sse / static_cast<double>(y.size()) == trace.train_mse.back());
  }

  TEST_CASE("results do not depend on the thread count") {
    Rng rng(18);
    const Matrix x = sine_features(500, 20, rng);
    const auto y = targets_for(x, rng);
    for (const GrowthMode mode : {GrowthMode::kLeafwise, GrowthMode::kOblivious}) {
      BoostConfig config;
      config.mode = mode;
      config.n_iterations = 10;
      config.goss = GossConfig{};
      const auto serial = fit_gbdt(x, y, config);
      config.n_threads = 4;
      const auto threaded = fit_gbdt(x, y, config);
      CHECK(serial.trees == threaded.trees);
      CHECK(serial.predict(x) == threaded.predict(x));
    }
  }

  TEST_CASE("bundled and unbundled training agree on conflict-free sparse data") {
    Rng rng(19);
    const std::size_t n = 400;
    Matrix x(n, 8, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      // At most one active feature per group of four.
      for (std::size_t group = 0; group < 2; ++group) {
        if (rng.uniform() < 0.7) x(r, group * 4 + rng.index(4)) = rng.uniform(0.5, 3.0);
      }
    }
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) y[r] = x(r, 0) - 2.0 * x(r, 5) + x(r, 2) * 0.5 + 0.1 * rng.normal();

    BoostConfig config;
    config.n_iterations = 30;
    config.n_bins = 16;
    config.goss = GossConfig{};
    config.seed = 5;
    const auto plain = fit_gbdt(x, y, config);
    config.bundle_features = true;
    const auto bundled = fit_gbdt(x, y, config);

    const auto binned = bin_features(x, 16);
    CHECK(efb_bundle(binned.columns, 0).size() == 2);
    CHECK(plain.predict(x) == bundled.predict(x));
  }

  TEST_CASE("categorical columns use ordered statistics in oblivious mode") {
    Rng rng(20);
    const std::size_t n = 200;
    Matrix x(n, 2);
    std::vector<double> y(n);
    const double level[] = {1.0, -2.0, 0.5, 3.0};
    for (std::size_t r = 0; r < n; ++r) {
      const auto code = rng.index(4);
      x(r, 0) = static_cast<double>(code);
      x(r, 1) = rng.uniform();
      y[r] = level[code] + 0.1 * rng.normal();
    }
    BoostConfig config;
    config.mode = GrowthMode::kOblivious;
    config.depth = 3;
    config.n_iterations = 40;
    config.categorical_features = {0};
    const auto model = fit_gbdt(x, y, config);
    REQUIRE(model.encodings.size() == 1);
    CHECK(model.encodings[0].stats.size() == 4);
    double sse = 0.0;
    double sst = 0.0;
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    const auto pred = model.predict(x);
    for (std::size_t r = 0; r < n; ++r) {
      sse += (pred[r] - y[r]) * (pred[r] - y[r]);
      sst += (y[r] - mean) * (y[r] - mean);
    }
    CHECK(sse < 0.3 * sst);
    // Full-data encodings order the categories by their target level.
    const auto& enc = model.encodings[0];
    CHECK(enc.encode(1) < enc.encode(2));
    CHECK(enc.encode(2) < enc.encode(0));
    CHECK(enc.encode(0) < enc.encode(3));
  }

  TEST_CASE("invalid configs are rejected") {
    const auto x = stackcast::testing::column_matrix({1, 2});
    const std::vector<double> y{1, 2};
    auto expect_invalid = [&](auto mutate) {
      BoostConfig config;
      mutate(config);
      try {
        fit_gbdt(x, y, config);
        FAIL("expected ConfigInvalid");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kConfigInvalid);
      }
    };
    expect_invalid([](BoostConfig& c) { c.learning_rate = 0.0; });
    expect_invalid([](BoostConfig& c) { c.learning_rate = 1.5; });
    expect_invalid([](BoostConfig& c) { c.max_leaves = 1; });
    expect_invalid([](BoostConfig& c) { c.n_bins = 1; });
    expect_invalid([](BoostConfig& c) { c.goss = GossConfig{0.8, 0.5, 0}; });
  }

  TEST_CASE("model documents round-trip exactly") {
    Rng rng(22);
    const Matrix x = sine_features(120, 3, rng);
    for (const GrowthMode mode : {GrowthMode::kLeafwise, GrowthMode::kOblivious}) {
      BoostConfig config;
      config.mode = mode;
      config.n_iterations = 15;
      const auto model = fit_gbdt(x, targets_for(x, rng), config);
      const std::string doc = save_gbdt(model);
      const auto loaded = load_gbdt(doc);
      CHECK(loaded == model);
      CHECK(save_gbdt(loaded) == doc);
      CHECK(loaded.predict(x) == model.predict(x));
    }
    CHECK_THROWS_AS(load_gbdt("{\"kind\":\"lstm\"}"), Error);
    CHECK_THROWS_AS(load_gbdt("not json"), Error);
  }
}
