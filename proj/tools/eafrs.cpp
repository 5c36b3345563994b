#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eafrs/bd_metrics.hpp"
#include "eafrs/csv.hpp"
#include "eafrs/error.hpp"
#include "eafrs/features.hpp"
#include "eafrs/ml.hpp"
#include "eafrs/pipeline.hpp"
#include "eafrs/quality.hpp"
#include "eafrs/resampler.hpp"
#include "eafrs/video_io.hpp"

namespace {

using namespace eafrs;
using ojson = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSubprocess = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

RdCurve curve_from_csv(const std::string& path, BdMetric metric) {
  const CsvTable t = read_csv(path);
  const char* column = metric == BdMetric::kRate     ? "bitrate_kbps"
                       : metric == BdMetric::kEncode ? "e_enc_j"
                                                     : "e_dec_j";
  const std::size_t cq = t.column("mpsnr_db"), cm = t.column(column);
  RdCurve c;
  c.axis_label = column;
  for (const auto& row : t.rows) c.points.push_back({parse_double(row[cq]), parse_double(row[cm])});
  return c;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

LabelReport load_label_report(const std::string& path) {
  const std::string text = slurp(path);
  return ends_with(path, ".json") ? LabelReport::from_json(text) : LabelReport::from_csv(text);
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig::defaults() : load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-aware frame rate selection toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "run config (JSON)");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic Y4M sequence");
  std::string synth_kind = "global_translation", synth_out, synth_fps = "120";
  SyntheticParams sp;
  synth->add_option("--kind", synth_kind, "constant|global_translation|local_motion|dynamic_texture");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--fps", synth_fps);
  synth->add_option("--width", sp.width);
  synth->add_option("--height", sp.height);
  synth->add_option("--frames", sp.frames);
  synth->add_option("--motion", sp.motion);
  synth->add_option("--seed", sp.seed);

  // downsample
  auto* down = app.add_subcommand("downsample", "temporal downsampling by frame averaging");
  std::string down_in, down_out, down_fps;
  down->add_option("--in", down_in)->required();
  down->add_option("--out", down_out)->required();
  down->add_option("--fps", down_fps)->required();

  // quality
  auto* qual = app.add_subcommand("quality", "PSNR / mPSNR between two sequences");
  std::string q_ref, q_test, q_metric = "mpsnr";
  qual->add_option("--ref", q_ref)->required();
  qual->add_option("--test", q_test)->required();
  qual->add_option("--metric", q_metric)->check(CLI::IsMember({"psnr", "mpsnr"}));

  // features
  auto* feat = app.add_subcommand("features", "spatio-temporal feature vectors");
  std::vector<std::string> feat_inputs;
  std::vector<int> feat_crfs;
  std::string feat_out;
  feat->add_option("inputs", feat_inputs, "Y4M sequences")->required();
  feat->add_option("--crf", feat_crfs, "CRFs (default: config crf_subset)");
  feat->add_option("--out", feat_out, "features CSV (default stdout)");

  // measure
  auto* meas = app.add_subcommand("measure", "net energy of a shell command");
  std::string m_cmd, m_class = "encode";
  double m_modeled = 1.0;
  meas->add_option("--cmd", m_cmd)->required();
  meas->add_option("--class", m_class);
  meas->add_option("--modeled-seconds", m_modeled, "runtime charged under the mock meter");

  // pipeline-measure
  auto* pm = app.add_subcommand("pipeline-measure", "measure the full rate x CRF grid");
  std::vector<std::string> pm_inputs;
  pm->add_option("inputs", pm_inputs, "native-rate Y4M sequences")->required();

  // label
  auto* lab = app.add_subcommand("label", "energy-aware frame rates and BD table");
  std::string lab_csv, lab_json, lab_curves;
  lab->add_option("--out", lab_csv, "CSV report (default stdout)");
  lab->add_option("--json", lab_json, "JSON report");
  lab->add_option("--curves-dir", lab_curves, "per-sequence energy-distortion curve CSVs");

  // bd
  auto* bd = app.add_subcommand("bd", "Bjontegaard delta between two curves");
  std::string bd_ref, bd_test, bd_metric = "rate";
  bool bd_cubic = false;
  bd->add_option("--ref", bd_ref)->required();
  bd->add_option("--test", bd_test)->required();
  bd->add_option("--metric", bd_metric)->check(CLI::IsMember({"rate", "enc", "dec"}));
  bd->add_flag("--cubic", bd_cubic, "classic cubic polynomial fit instead of PCHIP");

  // train
  auto* tr = app.add_subcommand("train", "feature ranking, bagging fit and evaluation");
  std::string tr_features, tr_labels, tr_model, tr_report;
  tr->add_option("--features", tr_features)->required();
  tr->add_option("--labels", tr_labels, "label report from 'label' (CSV or JSON)")->required();
  tr->add_option("--model", tr_model)->required();
  tr->add_option("--report", tr_report, "evaluation JSON (default stdout)");

  // predict
  auto* pr = app.add_subcommand("predict", "recommended frame rate for a sequence");
  std::string pr_model, pr_in;
  std::vector<int> pr_crfs;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--in", pr_in)->required();
  pr->add_option("--crf", pr_crfs)->required();

  // delta-e
  auto* de = app.add_subcommand("delta-e", "energy of selection vs native encoding");
  std::string de_model, de_csv, de_json;
  std::vector<std::string> de_inputs;
  de->add_option("inputs", de_inputs)->required();
  de->add_option("--model", de_model)->required();
  de->add_option("--out", de_csv, "CSV report (default stdout)");
  de->add_option("--json", de_json);

  // report
  auto* rep = app.add_subcommand("report", "re-render a report as CSV or JSON");
  std::string rep_in, rep_kind = "label", rep_format = "csv";
  rep->add_option("--in", rep_in)->required();
  rep->add_option("--kind", rep_kind)->check(CLI::IsMember({"label", "delta-e"}));
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) {
      sp.frame_rate = Rational::parse(synth_fps);
      sp.name = std::filesystem::path(synth_out).stem().string();
      write_y4m(generate_synthetic(parse_synthetic_kind(synth_kind), sp), synth_out);
    } else if (*down) {
      write_y4m(downsample(read_y4m(down_in), Rational::parse(down_fps)), down_out);
    } else if (*qual) {
      const auto ref = read_y4m(q_ref), test = read_y4m(q_test);
      const QualityScore s = q_metric == "psnr" ? psnr(ref, test) : mpsnr(ref, test);
      ojson j = {{"metric", q_metric}, {"n_compared", s.n_compared}};
      j["value_db"] = s.is_lossless() ? ojson("inf") : ojson(s.value_db);
      std::cout << j.dump() << "\n";
    } else if (*feat) {
      const RunConfig cfg = config_or_default(config_path);
      if (feat_crfs.empty()) feat_crfs = cfg.crf_subset;
      FeatureTable table;
      for (const auto& in : feat_inputs) {
        const auto seq = read_y4m(in);
        for (const auto& v : sequence_features(seq, feat_crfs, cfg.features)) {
          table.add(sequence_name(in), v);
        }
      }
      emit(table.to_csv(), feat_out);
    } else if (*meas) {
      const RunConfig cfg = config_or_default(config_path);
      auto meter = make_meter(cfg);
      auto exec = make_executor(cfg, *meter);
      MeasureOptions opts;
      opts.ci = cfg.ci;
      const auto m = measure_command(*meter, *exec, shell_workload(m_cmd, m_class, m_modeled), opts);
      ojson j = {{"meter", meter->name()},       {"e_total_j", m.e_total},
                 {"e_idle_j", m.e_idle},         {"e_net_j", m.e_net},
                 {"duration_s", m.duration_s},   {"repetitions", m.n_repetitions},
                 {"passed_ci", m.passed_ci}};
      std::cout << j.dump() << "\n";
    } else if (*pm) {
      const RunConfig cfg = config_or_default(config_path);
      auto meter = make_meter(cfg);
      auto exec = make_executor(cfg, *meter);
      MeasurementStore store(cfg.store);
      std::vector<std::filesystem::path> paths(pm_inputs.begin(), pm_inputs.end());
      const MeasureSummary s = pipeline_measure(cfg, paths, store, *meter, *exec);
      std::cout << ojson({{"added", s.added}, {"skipped", s.skipped}, {"failed", s.failed}}).dump()
                << "\n";
      if (s.failed > 0) {
        std::cerr << "failures logged to " << store.failure_path().string() << "\n";
        return kExitData;
      }
    } else if (*lab) {
      const RunConfig cfg = config_or_default(config_path);
      const MeasurementStore store(cfg.store);
      const LabelReport report = pipeline_label(store, cfg);
      emit(report.to_csv(), lab_csv);
      if (!lab_json.empty()) emit(report.to_json(), lab_json);
      if (!lab_curves.empty()) {
        std::filesystem::create_directories(lab_curves);
        for (const auto& name : store.sequences()) {
          emit(render_curves_csv(store.points_for(name)),
               (std::filesystem::path(lab_curves) / (name + "_curves.csv")).string());
        }
      }
    } else if (*bd) {
      const BdMetric metric = parse_bd_metric(bd_metric);
      const BdResult r = bd_delta(curve_from_csv(bd_ref, metric), curve_from_csv(bd_test, metric),
                                  bd_cubic ? BdInterpolation::kCubicPolynomial
                                           : BdInterpolation::kPchip);
      if (r.narrow_overlap) std::cerr << "warning: quality overlap below 2 dB\n";
      std::cout << ojson({{"bd_percent", r.bd_percent}, {"overlap_db", r.overlap_db}}).dump()
                << "\n";
    } else if (*tr) {
      const RunConfig cfg = config_or_default(config_path);
      const FeatureTable features = FeatureTable::from_csv(slurp(tr_features));
      const Dataset data = build_dataset(features, load_label_report(tr_labels), cfg.crf_subset);
      const TrainResult result = pipeline_train(data, cfg.ml);
      save_model(result.model, tr_model);
      emit(evaluation_to_json(result), tr_report);
    } else if (*pr) {
      const RunConfig cfg = config_or_default(config_path);
      const EnsembleModel model = load_model(pr_model);
      const auto seq = read_y4m(pr_in);
      const auto vectors = sequence_features(seq, pr_crfs, cfg.features);
      ojson out = ojson::array();
      for (const auto& v : vectors) {
        out.push_back({{"crf", v.crf}, {"fps", predict_frame_rate(model, v)}});
      }
      std::cout << out.dump() << "\n";
    } else if (*de) {
      const RunConfig cfg = config_or_default(config_path);
      const MeasurementStore store(cfg.store);
      const EnsembleModel model = load_model(de_model);
      auto meter = make_meter(cfg);
      auto exec = make_executor(cfg, *meter);
      DeltaEReport report;
      for (const auto& in : de_inputs) {
        report.rows.push_back(delta_e_select(store, model, in, cfg, *meter, *exec));
      }
      report.recompute_averages(cfg.native_rate());
      emit(report.to_csv(), de_csv);
      if (!de_json.empty()) emit(report.to_json(), de_json);
    } else if (*rep) {
      const std::string text = slurp(rep_in);
      const bool json_in = ends_with(rep_in, ".json");
      if (rep_kind == "label") {
        const LabelReport r = json_in ? LabelReport::from_json(text) : LabelReport::from_csv(text);
        std::cout << (rep_format == "csv" ? r.to_csv() : r.to_json());
      } else {
        const DeltaEReport r = json_in ? DeltaEReport::from_json(text) : DeltaEReport::from_csv(text);
        std::cout << (rep_format == "csv" ? r.to_csv() : r.to_json());
      }
    }
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SubprocessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSubprocess;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
