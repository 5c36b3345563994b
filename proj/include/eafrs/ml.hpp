#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eafrs {

/// Frame-rate classes in confusion-matrix order.
inline constexpr std::array<int, 5> kFrameRateClasses = {120, 60, 30, 24, 15};
inline constexpr std::size_t kNumClasses = kFrameRateClasses.size();

/// Index of `fps` in kFrameRateClasses; throws DataError otherwise.
std::size_t class_index(int fps);
bool is_frame_rate_class(int fps);

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;  // fps class per row

  std::size_t size() const { return rows.size(); }
  std::size_t dimension() const { return feature_names.size(); }
  void add(std::vector<double> row, int label);
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  Dataset project(const std::vector<std::size_t>& features) const;
};

/// Chi-square statistic of each feature against the labels after
/// equal-frequency discretization into at most `n_bins` bins.
std::vector<double> chi_square_scores(const Dataset& data, int n_bins = 10);

/// Indices of the k largest scores, ascending; ties keep the lower index.
std::vector<std::size_t> select_top_k(const std::vector<double>& scores, int k = 15);

struct TreeParams {
  int max_depth = 12;
  int min_leaf = 1;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  std::array<int, kNumClasses> counts{};
  int prediction = 0;  // fps

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0

  int predict(const std::vector<double>& x) const;
  int depth() const;
};

DecisionTree fit_tree(const Dataset& data, const TreeParams& params = {});

struct EnsembleModel {
  std::vector<DecisionTree> trees;
  int n_estimators = 0;
  std::uint64_t seed = 0;
  /// Feature indices (into the full feature vector) the trees were fit on.
  std::vector<std::size_t> selected_features;
  std::vector<std::string> feature_names;  // full vector names

  std::vector<double> restrict(const std::vector<double>& full) const;
};

struct BaggingParams {
  int n_estimators = 100;
  std::uint64_t seed = 0;
  TreeParams tree;
};

/// Bootstrap-aggregated trees fit on the `selected` columns of `data`
/// (empty means all of them).
EnsembleModel fit_bagging(const Dataset& data, const BaggingParams& params,
                          std::vector<std::size_t> selected = {});

/// Majority vote over a restricted feature vector; ties go to the higher fps.
int predict(const EnsembleModel& model, const std::vector<double>& x);

using ConfusionMatrix = std::array<std::array<long, kNumClasses>, kNumClasses>;

struct EvalParams {
  int n_iterations = 12;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  /// Standard k-fold with k = n_iterations instead of random 80/20 draws.
  bool canonical_kfold = false;
  BaggingParams bagging;
};

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion{};  // rows = truth, columns = predicted
  long errors = 0;
  /// Share of errors that predicted a higher frame rate than the truth.
  double errors_toward_higher = 0.0;
  std::vector<double> per_iteration_accuracy;
};

Evaluation evaluate(const Dataset& data, const EvalParams& params = {});

void save_model(const EnsembleModel& model, const std::filesystem::path& path);
EnsembleModel load_model(const std::filesystem::path& path);
std::string model_to_json(const EnsembleModel& model);
EnsembleModel model_from_json(const std::string& text);

}  // namespace eafrs
