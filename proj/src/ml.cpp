#include "eafrs/ml.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

using Counts = std::array<int, kNumClasses>;

constexpr int kModelVersion = 1;

int majority(const Counts& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (counts[c] > counts[best]) best = c;  // strict: earlier = higher fps wins ties
  }
  return kFrameRateClasses[best];
}

double gini(const Counts& counts, int n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / n;
    s += p * p;
  }
  return 1.0 - s;
}

bool is_pure(const Counts& counts) {
  return std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
}

struct TreeBuilder {
  const Dataset& data;
  const TreeParams& params;
  DecisionTree tree;

  int build(std::vector<std::size_t>& idx, int depth) {
    TreeNode node;
    for (std::size_t i : idx) ++node.counts[class_index(data.labels[i])];
    node.prediction = majority(node.counts);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (is_pure(node.counts) || depth >= params.max_depth ||
        static_cast<int>(idx.size()) < 2 * params.min_leaf) {
      return id;
    }

    const int n = static_cast<int>(idx.size());
    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < data.dimension(); ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.rows[a][f] < data.rows[b][f];
      });
      Counts left{};
      Counts right = node.counts;
      for (int i = 0; i + 1 < n; ++i) {
        const std::size_t cls = class_index(data.labels[order[i]]);
        ++left[cls];
        --right[cls];
        const double a = data.rows[order[i]][f];
        const double b = data.rows[order[i + 1]][f];
        if (!(a < b)) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < params.min_leaf || nr < params.min_leaf) continue;
        const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
      (data.rows[i][best_feature] <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = build(left_idx, depth + 1);
    const int r = build(right_idx, depth + 1);
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

void check_row(const std::vector<double>& x, std::size_t dim) {
  if (x.size() != dim) {
    throw PreconditionError("feature vector has " + std::to_string(x.size()) +
                            " values, model expects " + std::to_string(dim));
  }
}

std::vector<std::size_t> present_classes(const Dataset& data,
                                         const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  for (std::size_t i : idx) out.push_back(class_index(data.labels[i]));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void score_split(const Dataset& data, const std::vector<std::size_t>& train,
                 const std::vector<std::size_t>& test, const BaggingParams& bp,
                 Evaluation& ev) {
  const EnsembleModel model = fit_bagging(data.subset(train), bp);
  long correct = 0;
  for (std::size_t i : test) {
    const int truth = data.labels[i];
    const int pred = predict(model, model.restrict(data.rows[i]));
    ++ev.confusion[class_index(truth)][class_index(pred)];
    if (pred == truth) {
      ++correct;
    } else {
      ++ev.errors;
      if (pred > truth) ev.errors_toward_higher += 1.0;
    }
  }
  ev.per_iteration_accuracy.push_back(static_cast<double>(correct) /
                                      static_cast<double>(test.size()));
}

}  // namespace

std::size_t class_index(int fps) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (kFrameRateClasses[c] == fps) return c;
  }
  throw DataError("label " + std::to_string(fps) + " is not a frame-rate class");
}

bool is_frame_rate_class(int fps) {
  return std::find(kFrameRateClasses.begin(), kFrameRateClasses.end(), fps) !=
         kFrameRateClasses.end();
}

void Dataset::add(std::vector<double> row, int label) {
  if (!feature_names.empty() && row.size() != feature_names.size()) {
    throw DataError("row has " + std::to_string(row.size()) + " features, expected " +
                    std::to_string(feature_names.size()));
  }
  class_index(label);
  rows.push_back(std::move(row));
  labels.push_back(label);
}

void Dataset::validate() const {
  if (rows.size() != labels.size()) throw DataError("rows and labels differ in count");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dimension()) {
      throw DataError("row " + std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " features, expected " +
                      std::to_string(dimension()));
    }
    class_index(labels[i]);
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.feature_names = feature_names;
  for (std::size_t i : indices) out.add(rows.at(i), labels.at(i));
  return out;
}

Dataset Dataset::project(const std::vector<std::size_t>& features) const {
  Dataset out;
  for (std::size_t f : features) out.feature_names.push_back(feature_names.at(f));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> r;
    for (std::size_t f : features) r.push_back(rows[i].at(f));
    out.add(std::move(r), labels[i]);
  }
  return out;
}

std::vector<double> chi_square_scores(const Dataset& data, int n_bins) {
  data.validate();
  if (n_bins < 1) throw PreconditionError("n_bins must be >= 1");
  const std::size_t n = data.size();
  if (present_classes(data, [&] {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        return all;
      }()).size() < 2) {
    throw DataError("chi-square ranking needs at least two distinct labels");
  }

  std::vector<double> scores(data.dimension(), 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t f = 0; f < data.dimension(); ++f) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return data.rows[a][f] < data.rows[b][f];
    });
    // Bin from the rank of the first equal value so ties share a bin.
    std::vector<std::array<double, kNumClasses>> table(n_bins);
    for (auto& row : table) row.fill(0.0);
    std::size_t less = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && data.rows[order[i]][f] > data.rows[order[i - 1]][f]) less = i;
      const std::size_t bin = less * static_cast<std::size_t>(n_bins) / n;
      table[bin][class_index(data.labels[order[i]])] += 1.0;
    }
    std::array<double, kNumClasses> col{};
    std::vector<double> row_sum(n_bins, 0.0);
    for (int b = 0; b < n_bins; ++b) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        row_sum[b] += table[b][c];
        col[c] += table[b][c];
      }
    }
    double stat = 0.0;
    for (int b = 0; b < n_bins; ++b) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double expected = row_sum[b] * col[c] / static_cast<double>(n);
        if (expected <= 0.0) continue;
        const double diff = table[b][c] - expected;
        stat += diff * diff / expected;
      }
    }
    scores[f] = stat;
  }
  return scores;
}

std::vector<std::size_t> select_top_k(const std::vector<double>& scores, int k) {
  if (k <= 0) throw PreconditionError("k must be positive");
  if (static_cast<std::size_t>(k) > scores.size()) {
    throw PreconditionError("k = " + std::to_string(k) + " exceeds " +
                            std::to_string(scores.size()) + " features");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

int DecisionTree::predict(const std::vector<double>& x) const {
  int id = 0;
  while (!nodes.at(id).is_leaf()) {
    const TreeNode& node = nodes[id];
    id = x.at(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[id].prediction;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return best;
}

DecisionTree fit_tree(const Dataset& data, const TreeParams& params) {
  if (data.size() == 0) throw PreconditionError("cannot fit a tree on no rows");
  if (params.max_depth < 0 || params.min_leaf < 1) {
    throw PreconditionError("tree needs max_depth >= 0 and min_leaf >= 1");
  }
  data.validate();
  TreeBuilder builder{data, params, {}};
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(idx, 0);
  return std::move(builder.tree);
}

std::vector<double> EnsembleModel::restrict(const std::vector<double>& full) const {
  check_row(full, feature_names.size());
  std::vector<double> out;
  out.reserve(selected_features.size());
  for (std::size_t f : selected_features) out.push_back(full[f]);
  return out;
}

EnsembleModel fit_bagging(const Dataset& data, const BaggingParams& params,
                          std::vector<std::size_t> selected) {
  if (data.size() == 0) throw PreconditionError("cannot fit on an empty dataset");
  if (params.n_estimators < 1) throw PreconditionError("n_estimators must be >= 1");
  data.validate();
  if (selected.empty()) {
    selected.resize(data.dimension());
    std::iota(selected.begin(), selected.end(), 0);
  }
  EnsembleModel model;
  model.n_estimators = params.n_estimators;
  model.seed = params.seed;
  model.selected_features = std::move(selected);
  model.feature_names = data.feature_names;
  model.trees.resize(params.n_estimators);
  const Dataset projected = data.project(model.selected_features);

  // Each tree owns an RNG stream keyed by (seed, tree index), so the result
  // does not depend on how trees are spread over threads.
  auto fit_one = [&](int t) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed),
                      static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> sample(data.size());
    for (auto& s : sample) s = static_cast<std::size_t>(rng() % data.size());
    model.trees[t] = fit_tree(projected.subset(sample), params.tree);
  };
  const int workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                      params.n_estimators));
  if (workers == 1) {
    for (int t = 0; t < params.n_estimators; ++t) fit_one(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int t = w; t < params.n_estimators; t += workers) fit_one(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

int predict(const EnsembleModel& model, const std::vector<double>& x) {
  if (model.trees.empty()) throw PreconditionError("model has no trees");
  check_row(x, model.selected_features.size());
  Counts votes{};
  for (const auto& tree : model.trees) ++votes[class_index(tree.predict(x))];
  return majority(votes);
}

Evaluation evaluate(const Dataset& data, const EvalParams& params) {
  data.validate();
  if (params.n_iterations < 1) throw PreconditionError("n_iterations must be >= 1");
  if (!(params.train_fraction > 0.0 && params.train_fraction < 1.0)) {
    throw PreconditionError("train_fraction must be in (0, 1)");
  }
  const std::size_t n = data.size();
  if (n < 2) throw DataError("evaluation needs at least two rows");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto classes = present_classes(data, all);

  Evaluation ev;
  std::mt19937_64 rng(params.seed);

  if (params.canonical_kfold) {
    const int k = params.n_iterations;
    if (static_cast<std::size_t>(k) > n) {
      throw DataError("k-fold needs at least k = " + std::to_string(k) + " rows");
    }
    std::vector<std::size_t> order = all;
    std::shuffle(order.begin(), order.end(), rng);
    for (int fold = 0; fold < k; ++fold) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < n; ++i) {
        (static_cast<int>(i % k) == fold ? test : train).push_back(order[i]);
      }
      score_split(data, train, test, params.bagging, ev);
    }
  } else {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[class_index(data.labels[i])].push_back(i);
    for (int it = 0; it < params.n_iterations; ++it) {
      std::vector<std::size_t> train, test;
      bool ok = false;
      for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
        train.clear();
        test.clear();
        for (auto& [cls, members] : by_class) {
          std::vector<std::size_t> m = members;
          std::shuffle(m.begin(), m.end(), rng);
          auto n_train = static_cast<std::size_t>(
              std::floor(params.train_fraction * static_cast<double>(m.size()) + 0.5));
          n_train = std::clamp<std::size_t>(n_train, 1, m.size());
          train.insert(train.end(), m.begin(), m.begin() + n_train);
          test.insert(test.end(), m.begin() + n_train, m.end());
        }
        ok = !test.empty() && present_classes(data, train) == classes;
      }
      if (test.empty()) throw DataError("dataset too small for a non-empty test split");
      if (!ok) throw DataError("a class stayed absent from training after 10 redraws");
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
      score_split(data, train, test, params.bagging, ev);
    }
  }
  ev.accuracy = std::accumulate(ev.per_iteration_accuracy.begin(),
                                ev.per_iteration_accuracy.end(), 0.0) /
                static_cast<double>(ev.per_iteration_accuracy.size());
  ev.errors_toward_higher = ev.errors > 0 ? ev.errors_toward_higher / ev.errors : 0.0;
  return ev;
}

std::string model_to_json(const EnsembleModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "eafrs-bagged-trees";
  j["version"] = kModelVersion;
  j["classes"] = kFrameRateClasses;
  j["n_estimators"] = model.n_estimators;
  j["seed"] = model.seed;
  j["feature_names"] = model.feature_names;
  j["selected_features"] = model.selected_features;
  auto& trees = j["trees"] = nlohmann::ordered_json::array();
  for (const auto& tree : model.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& node : tree.nodes) {
      nlohmann::ordered_json jn;
      if (node.is_leaf()) {
        jn["leaf"] = node.prediction;
      } else {
        jn["feature"] = node.feature;
        jn["threshold"] = node.threshold;
        jn["left"] = node.left;
        jn["right"] = node.right;
      }
      jn["counts"] = node.counts;
      nodes.push_back(std::move(jn));
    }
    trees.push_back(std::move(nodes));
  }
  return j.dump(1);
}

EnsembleModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "eafrs-bagged-trees") throw DataError("not an eafrs model");
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("unsupported model version " + j.at("version").dump());
    }
    if (j.at("classes").get<std::vector<int>>() !=
        std::vector<int>(kFrameRateClasses.begin(), kFrameRateClasses.end())) {
      throw DataError("model class order differs from this build");
    }
    EnsembleModel m;
    m.n_estimators = j.at("n_estimators").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.selected_features = j.at("selected_features").get<std::vector<std::size_t>>();
    for (const auto& jt : j.at("trees")) {
      DecisionTree tree;
      for (const auto& jn : jt) {
        TreeNode node;
        node.counts = jn.at("counts").get<std::array<int, kNumClasses>>();
        if (jn.contains("leaf")) {
          node.prediction = jn.at("leaf").get<int>();
        } else {
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
          node.prediction = majority(node.counts);
        }
        tree.nodes.push_back(node);
      }
      const int count = static_cast<int>(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        if (!node.is_leaf() && (node.left <= 0 || node.left >= count || node.right <= 0 ||
                                node.right >= count ||
                                node.feature >= static_cast<int>(m.selected_features.size()))) {
          throw DataError("model tree has a dangling node reference");
        }
      }
      if (tree.nodes.empty()) throw DataError("model tree is empty");
      m.trees.push_back(std::move(tree));
    }
    if (static_cast<int>(m.trees.size()) != m.n_estimators) {
      throw DataError("model lists " + std::to_string(m.trees.size()) + " trees, expected " +
                      std::to_string(m.n_estimators));
    }
    for (std::size_t f : m.selected_features) {
      if (f >= m.feature_names.size()) throw DataError("selected feature out of range");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const EnsembleModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << model_to_json(model) << "\n";
  if (!out) throw DataError("cannot write " + path.string());
}

EnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace eafrs
