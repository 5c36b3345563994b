#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "eafrs/error.hpp"
#include "eafrs/ml.hpp"
#include "helpers.hpp"

using namespace eafrs;

namespace {

DecisionTree leaf(int fps) {
  DecisionTree t;
  TreeNode n;
  n.prediction = fps;
  t.nodes.push_back(n);
  return t;
}

EnsembleModel voters(const std::vector<int>& votes) {
  EnsembleModel m;
  for (int v : votes) m.trees.push_back(leaf(v));
  m.n_estimators = static_cast<int>(votes.size());
  m.feature_names = {"x"};
  m.selected_features = {0};
  return m;
}

// Feature 0 encodes the class, feature 1 is noise.
Dataset planted(int per_class, unsigned seed) {
  std::mt19937 rng(seed);
  Dataset d;
  d.feature_names = {"signal", "noise"};
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    for (int i = 0; i < per_class; ++i) {
      d.add({c * 10.0 + (rng() % 100) / 100.0, static_cast<double>(rng() % 1000)},
            kFrameRateClasses[c]);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("class order") {
  CHECK(class_index(120) == 0);
  CHECK(class_index(15) == 4);
  CHECK(is_frame_rate_class(24));
  CHECK_FALSE(is_frame_rate_class(100));
  CHECK_THROWS_AS(class_index(100), DataError);
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.feature_names = {"a", "b"};
  d.add({1, 2}, 60);
  CHECK_THROWS(d.add({1}, 60));
  CHECK_THROWS(d.add({1, 2}, 50));
  const Dataset p = d.project({1});
  CHECK(p.feature_names == std::vector<std::string>{"b"});
  CHECK(p.rows[0] == std::vector<double>{2});
}

TEST_CASE("chi-square hand cases") {
  Dataset d;
  d.feature_names = {"sep", "const"};
  for (int i = 0; i < 10; ++i) d.add({static_cast<double>(i), 3.0}, 120);
  for (int i = 0; i < 10; ++i) d.add({static_cast<double>(100 + i), 3.0}, 15);
  const auto s = chi_square_scores(d, 2);
  CHECK(s[0] == 20.0);
  CHECK(s[1] == 0.0);

  // Ten bins on 20 rows: still a perfect separation, statistic 20.
  CHECK(chi_square_scores(d, 10)[0] == 20.0);

  // Only ranks matter.
  Dataset t = d;
  for (auto& r : t.rows) r[0] = std::exp(r[0] / 50.0);
  CHECK(chi_square_scores(t, 10) == chi_square_scores(d, 10));

  const Dataset rnd = planted(40, 3);
  const auto rs = chi_square_scores(rnd);
  CHECK(rs[0] > rs[1]);

  Dataset one;
  one.feature_names = {"x"};
  one.add({1}, 30);
  one.add({2}, 30);
  CHECK_THROWS_AS(chi_square_scores(one), DataError);
}

TEST_CASE("top-k selection") {
  CHECK(select_top_k({3, 1, 2}, 2) == std::vector<std::size_t>{0, 2});
  CHECK(select_top_k({3, 1, 2}, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(select_top_k({5, 2, 2, 2}, 2) == std::vector<std::size_t>{0, 1});
  CHECK(select_top_k({1, 4, 4}, 1) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(select_top_k({1, 2}, 0), PreconditionError);
  CHECK_THROWS_AS(select_top_k({1, 2}, 3), PreconditionError);
}

TEST_CASE("tree fitting") {
  Dataset single;
  single.feature_names = {"x"};
  for (int i = 0; i < 5; ++i) single.add({static_cast<double>(i)}, 24);
  const DecisionTree s = fit_tree(single);
  CHECK(s.nodes.size() == 1);
  CHECK(s.predict({100}) == 24);

  Dataset line;
  line.feature_names = {"x"};
  for (int i = -5; i < 5; ++i) line.add({static_cast<double>(i)}, i < 0 ? 60 : 30);
  const DecisionTree l = fit_tree(line);
  CHECK(l.depth() == 1);
  CHECK(l.nodes[0].threshold == -0.5);
  for (std::size_t i = 0; i < line.size(); ++i) CHECK(l.predict(line.rows[i]) == line.labels[i]);

  Dataset xr;
  xr.feature_names = {"a", "b"};
  for (int a : {0, 1}) {
    for (int b : {0, 1}) xr.add({static_cast<double>(a), static_cast<double>(b)}, (a ^ b) ? 120 : 15);
  }
  const DecisionTree x = fit_tree(xr);
  CHECK(x.depth() == 2);
  for (std::size_t i = 0; i < xr.size(); ++i) CHECK(x.predict(xr.rows[i]) == xr.labels[i]);

  // Distinct rows, unconstrained depth: training accuracy 1.
  std::mt19937 rng(4);
  Dataset r;
  r.feature_names = {"a", "b", "c"};
  for (int i = 0; i < 200; ++i) {
    r.add({static_cast<double>(rng() % 997), static_cast<double>(rng() % 991), static_cast<double>(i)},
          kFrameRateClasses[rng() % kNumClasses]);
  }
  const DecisionTree deep = fit_tree(r, {64, 1});
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(deep.predict(r.rows[i]) == r.labels[i]);
  CHECK(fit_tree(r, {3, 1}).depth() <= 3);
  CHECK_THROWS(fit_tree(Dataset{}));
}

TEST_CASE("vote ties go to the higher rate") {
  CHECK(predict(voters({120, 120, 120, 60, 60}), {0}) == 120);
  CHECK(predict(voters({60, 30, 30, 60}), {0}) == 60);
  CHECK(predict(voters({15, 24, 24, 15}), {0}) == 24);
  CHECK(predict(voters({30, 30}), {0}) == 30);
  CHECK_THROWS_AS(predict(voters({30}), {0, 1}), PreconditionError);
}

TEST_CASE("bagging determinism and single class") {
  const Dataset d = planted(20, 8);
  BaggingParams p;
  p.n_estimators = 15;
  p.seed = 42;
  const EnsembleModel a = fit_bagging(d, p);
  const EnsembleModel b = fit_bagging(d, p);
  CHECK(model_to_json(a) == model_to_json(b));
  std::mt19937 rng(1);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> probe = {(rng() % 500) / 10.0, static_cast<double>(rng() % 1000)};
    CHECK(predict(a, probe) == predict(b, probe));
  }
  EnsembleModel reversed = a;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  CHECK(predict(reversed, {21.0, 5.0}) == predict(a, {21.0, 5.0}));

  Dataset one;
  one.feature_names = {"x"};
  for (int i = 0; i < 6; ++i) one.add({static_cast<double>(i)}, 60);
  const EnsembleModel m = fit_bagging(one, p);
  CHECK(m.trees.size() == 15);
  for (double x : {-5.0, 2.5, 99.0}) CHECK(predict(m, {x}) == 60);
}

TEST_CASE("selected features and serialization") {
  const Dataset d = planted(10, 2);
  BaggingParams p;
  p.n_estimators = 5;
  p.seed = 3;
  const EnsembleModel m = fit_bagging(d, p, {0});
  CHECK(m.selected_features == std::vector<std::size_t>{0});
  CHECK(m.feature_names == d.feature_names);
  CHECK(m.restrict({7.0, 8.0}) == std::vector<double>{7.0});

  testutil::TempDir dir("model");
  save_model(m, dir / "m.json");
  const EnsembleModel back = load_model(dir / "m.json");
  CHECK(model_to_json(back) == model_to_json(m));
  for (double x : {0.1, 10.2, 20.5, 31.0, 44.9}) CHECK(predict(back, {x}) == predict(m, {x}));
  CHECK_THROWS(model_from_json("{\"format\":\"other\"}"));
}

TEST_CASE("evaluation on a planted mapping is perfect") {
  const Dataset d = planted(20, 11);
  EvalParams p;
  p.seed = 5;
  p.bagging.n_estimators = 10;
  const Evaluation e = evaluate(d, p);
  CHECK(e.accuracy == 1.0);
  CHECK(e.errors == 0);
  CHECK(e.per_iteration_accuracy.size() == 12);
  long total = 0;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (r != c) CHECK(e.confusion[r][c] == 0);
      total += e.confusion[r][c];
    }
    // 20 % of 20 rows per class in each of 12 draws.
    CHECK(e.confusion[r][r] == 4 * 12);
  }
  CHECK(total == 12 * 20);

  p.canonical_kfold = true;
  const Evaluation k = evaluate(d, p);
  CHECK(k.accuracy == 1.0);
  long seen = 0;
  for (std::size_t r = 0; r < kNumClasses; ++r) seen += k.confusion[r][r];
  CHECK(seen == static_cast<long>(d.size()));
}

TEST_CASE("shuffled labels fall to the majority baseline") {
  std::mt19937 rng(17);
  Dataset d;
  d.feature_names = {"noise"};
  // 60 % of rows at 120 fps.
  for (int i = 0; i < 150; ++i) {
    d.add({static_cast<double>(rng() % 10000)}, i < 90 ? 120 : kFrameRateClasses[1 + i % 4]);
  }
  EvalParams p;
  p.seed = 9;
  p.bagging.n_estimators = 25;
  p.bagging.tree.max_depth = 3;
  const Evaluation e = evaluate(d, p);
  CHECK(std::abs(e.accuracy - 0.6) <= 0.10);
  CHECK(e.errors_toward_higher >= 0.0);
  CHECK(e.errors_toward_higher <= 1.0);
}
