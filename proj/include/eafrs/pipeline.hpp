#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eafrs/bd_metrics.hpp"
#include "eafrs/codec_runner.hpp"
#include "eafrs/energy.hpp"
#include "eafrs/features.hpp"
#include "eafrs/ml.hpp"
#include "eafrs/pareto.hpp"

namespace eafrs {

struct MlConfig {
  int chi_square_bins = 10;
  int top_k = 15;
  int n_estimators = 100;
  int max_depth = 12;
  int min_leaf = 1;
  std::uint64_t seed = 0;
  int n_iterations = 12;
  double train_fraction = 0.8;
  bool canonical_kfold = false;
};

struct RunConfig {
  std::vector<Rational> ladder;  // descending
  std::vector<int> crf_grid;
  std::vector<int> crf_subset;
  CommandTemplate encoder;
  CommandTemplate decoder;
  /// "mock" or "rapl" / "rapl:<zone dir>".
  std::string meter = "mock";
  MockMeterConfig mock;
  CostModel cost;
  CiPolicy ci;
  MlConfig ml;
  FeatureConfig features;
  BdInterpolation bd_method = BdInterpolation::kPchip;
  std::filesystem::path work_dir = "eafrs-work";
  std::filesystem::path store = "measurements.csv";

  static RunConfig defaults();
  Rational native_rate() const { return ladder.front(); }
  void validate() const;
  /// FNV-1a over the measurement-relevant settings.
  std::string config_hash() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const std::string& text);

/// Meter named by EAFRS_METER if set, else by `config.meter`.
std::unique_ptr<EnergyMeter> make_meter(const RunConfig& config);
/// Simulated executor for the mock meter, wall-clock otherwise.
std::unique_ptr<Executor> make_executor(const RunConfig& config, EnergyMeter& meter);

struct StoreRow {
  std::string sequence;
  RdePoint point;
  std::string config_hash;
};

/// Append-only CSV of measured grid cells plus a `.meta.json` sidecar.
class MeasurementStore {
 public:
  explicit MeasurementStore(std::filesystem::path csv_path);

  /// Creates or checks the sidecar; a different config hash is an error.
  void bind(const std::string& meter_name, const std::string& config_hash);
  bool contains(const std::string& sequence, const Rational& fps, int crf) const;
  void append(const StoreRow& row);
  void record_failure(const std::string& sequence, const Rational& fps, int crf,
                      const std::string& stage, const std::string& message);

  const std::vector<StoreRow>& rows() const { return rows_; }
  std::vector<std::string> sequences() const;
  std::vector<RdePoint> points_for(const std::string& sequence) const;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path meta_path() const;
  std::filesystem::path failure_path() const;

 private:
  std::filesystem::path path_;
  std::vector<StoreRow> rows_;
};

struct MeasureSummary {
  int added = 0;
  int skipped = 0;
  int failed = 0;
};

/// Downsample, encode, decode and score every (sequence, rate, CRF) cell
/// not already in the store. Cell failures are logged and skipped.
MeasureSummary pipeline_measure(const RunConfig& config,
                                const std::vector<std::filesystem::path>& sequences,
                                MeasurementStore& store, EnergyMeter& meter,
                                Executor& executor);

struct BdRow {
  std::string sequence;
  std::string policy;  // "{120,30,15,15}"
  double bdr = 0.0, bdee = 0.0, bdde = 0.0;
};

/// Per-sequence policies with BDR/BDEE/BDDE and group averages.
struct LabelReport {
  std::vector<BdRow> rows;
  BdRow average_all;
  std::optional<BdRow> average_downsampled;

  void recompute_averages();
  std::string to_csv() const;
  std::string to_json() const;
  static LabelReport from_csv(const std::string& text);
  static LabelReport from_json(const std::string& text);
};

/// True when the policy text lowers the frame rate at some CRF.
bool policy_downsamples(const std::string& policy, const Rational& native);

LabelReport pipeline_label(const MeasurementStore& store, const RunConfig& config);

/// Energy-distortion curve data (one row per cell, Pareto flag) for plotting.
std::string render_curves_csv(const std::vector<RdePoint>& points,
                              EnergyAxis axis = EnergyAxis::kEncode);

/// Feature rows keyed by (sequence, crf).
struct FeatureTable {
  std::vector<std::string> sequences;
  std::vector<FeatureVector> vectors;

  void add(const std::string& sequence, const FeatureVector& v);
  std::string to_csv() const;
  static FeatureTable from_csv(const std::string& text);
  const FeatureVector* find(const std::string& sequence, int crf) const;
};

/// Features of `seq` replicated over `crfs` (they differ only in CRF).
std::vector<FeatureVector> sequence_features(const VideoSequence& seq,
                                             const std::vector<int>& crfs,
                                             const FeatureConfig& cfg = {});

/// Maps a policy rate to the frame-rate class at or above it.
int label_class(const Rational& rate);

Dataset build_dataset(const FeatureTable& features, const LabelReport& labels,
                      const std::vector<int>& crf_subset);

struct TrainResult {
  EnsembleModel model;
  Evaluation evaluation;
  std::vector<double> chi_square;
};

TrainResult pipeline_train(const Dataset& data, const MlConfig& ml);
std::string evaluation_to_json(const TrainResult& result);

int predict_frame_rate(const EnsembleModel& model, const FeatureVector& features);
int predict_frame_rate(const EnsembleModel& model, const VideoSequence& seq, int crf,
                       const FeatureConfig& cfg = {});

/// 100 (E_a - E_b) / E_b with E_a = e_features + sum_c (e_classify +
/// E_enc(f_c, c)) and E_b = sum_c E_enc(native, c).
double delta_e_percent(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                       const Rational& native, double e_features, double e_classify);

struct DeltaERow {
  std::string sequence;
  std::string policy;
  double delta_e = 0.0;
};

struct DeltaEReport {
  std::vector<DeltaERow> rows;
  double average_all = 0.0;
  std::optional<double> average_reduced;
  std::optional<double> average_native;

  void recompute_averages(const Rational& native = Rational(120));
  std::string to_csv() const;
  std::string to_json() const;
  static DeltaEReport from_csv(const std::string& text);
  static DeltaEReport from_json(const std::string& text);
};

/// Measures feature extraction and classification energy for the sequence,
/// predicts its policy and returns the ΔE row.
DeltaERow delta_e_select(const MeasurementStore& store, const EnsembleModel& model,
                         const std::filesystem::path& sequence_path,
                         const RunConfig& config, EnergyMeter& meter, Executor& executor);

/// File-system-safe rate text: "120", "120000_1001".
std::string rate_slug(const Rational& r);
/// Sequence name from a file path (stem).
std::string sequence_name(const std::filesystem::path& path);

}  // namespace eafrs
