#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "eafrs/csv.hpp"
#include "eafrs/error.hpp"
#include "eafrs/pipeline.hpp"
#include "fixtures.hpp"
#include "helpers.hpp"

using namespace eafrs;

namespace {

const std::string kStub = EAFRS_STUB_CODEC;
const std::string kCli = EAFRS_CLI;

RunConfig small_config(const testutil::TempDir& dir, const std::string& mode = "identity") {
  RunConfig c = RunConfig::defaults();
  c.ladder = {Rational(120), Rational(60)};
  c.crf_grid = {18, 23};
  c.crf_subset = {18, 23};
  c.encoder = CommandTemplate("'" + kStub + "' encode --mode " + mode +
                              " --crf {crf} --in {input} --out {output}");
  c.decoder = CommandTemplate("'" + kStub + "' decode --in {input} --out {output}");
  c.work_dir = dir / "work";
  c.store = dir / "store.csv";
  return c;
}

std::filesystem::path write_source(const testutil::TempDir& dir, const std::string& name,
                                   double motion = 1.0) {
  SyntheticParams p;
  p.width = 32;
  p.height = 32;
  p.frames = 16;
  p.motion = motion;
  const auto path = dir / (name + ".y4m");
  write_y4m(generate_synthetic(SyntheticKind::kGlobalTranslation, p), path);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = "'" + kCli + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RdePoint pt(int f, int crf, double q, double enc) {
  RdePoint p;
  p.frame_rate = Rational(f);
  p.crf = crf;
  p.mpsnr_db = q;
  p.bitrate_kbps = enc * 10;
  p.e_enc_j = enc;
  p.e_dec_j = enc / 2;
  return p;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const RunConfig d = RunConfig::defaults();
  CHECK(d.ladder.size() == 9);
  CHECK(d.native_rate() == Rational(120));
  CHECK(d.crf_subset == std::vector<int>{18, 23, 28, 33});
  CHECK(d.crf_grid.front() == 0);
  CHECK(d.crf_grid.back() == 51);
  CHECK_NOTHROW(d.validate());

  RunConfig bad = d;
  bad.crf_subset = {18, 22};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = d;
  std::swap(bad.ladder[0], bad.ladder[1]);
  CHECK_THROWS_AS(bad.validate(), DataError);

  CHECK(d.config_hash() == RunConfig::defaults().config_hash());
  RunConfig other = d;
  other.ladder.pop_back();
  CHECK(other.config_hash() != d.config_hash());
  RunConfig ml_only = d;
  ml_only.ml.seed = 99;
  CHECK(ml_only.config_hash() == d.config_hash());
}

TEST_CASE("config from JSON") {
  const RunConfig c = config_from_json(R"({
    "ladder": [120, "60", 30],
    "crf_grid": {"start": 18, "stop": 33, "step": 5, "extra": [23]},
    "crf_subset": [18, 23, 28, 33],
    "mock": {"idle_watts": 4, "active_watts": {"decode": 12}},
    "ml": {"n_estimators": 7, "seed": 3},
    "bd_interpolation": "cubic"
  })");
  CHECK(c.ladder == std::vector<Rational>{Rational(120), Rational(60), Rational(30)});
  CHECK(c.crf_grid == std::vector<int>{18, 23, 28, 33});
  CHECK(c.mock.idle_watts == 4.0);
  CHECK(c.mock.active_watts.at("decode") == 12.0);
  CHECK(c.ml.n_estimators == 7);
  CHECK(c.bd_method == BdInterpolation::kCubicPolynomial);
  CHECK_THROWS_AS(config_from_json("{\"bd_interpolation\": \"spline\"}"), DataError);
  CHECK_THROWS_AS(config_from_json("not json"), DataError);

  testutil::TempDir dir("cfg");
  testutil::write_file(dir / "run.json", R"({"work_dir": "w", "store": "s.csv"})");
  const RunConfig l = load_config(dir / "run.json");
  CHECK(l.work_dir == dir / "w");
  CHECK(l.store == dir / "s.csv");
}

TEST_CASE("store grid, resume and energy ordering") {
  testutil::TempDir dir("store");
  const RunConfig cfg = small_config(dir);
  const auto src = write_source(dir, "clip");
  MockMeter meter(cfg.mock);
  SimulatedExecutor ex(meter);
  {
    MeasurementStore store(cfg.store);
    const MeasureSummary s = pipeline_measure(cfg, {src}, store, meter, ex);
    CHECK(s.added == 4);
    CHECK(s.failed == 0);
  }
  MeasurementStore again(cfg.store);
  CHECK(again.rows().size() == 4);
  const MeasureSummary s2 = pipeline_measure(cfg, {src}, again, meter, ex);
  CHECK(s2.added == 0);
  CHECK(s2.skipped == 4);
  CHECK(std::filesystem::exists(again.meta_path()));

  const auto pts = again.points_for("clip");
  for (int crf : {18, 23}) {
    const RdePoint* hi = nullptr;
    const RdePoint* lo = nullptr;
    for (const auto& p : pts) {
      if (p.crf != crf) continue;
      (p.frame_rate == Rational(120) ? hi : lo) = &p;
    }
    REQUIRE(hi);
    REQUIRE(lo);
    CHECK(lo->e_enc_j < hi->e_enc_j);
    CHECK(lo->e_dec_j < hi->e_dec_j);
    // Identity codec at native rate is lossless.
    CHECK(std::isinf(hi->mpsnr_db));
    CHECK(std::isfinite(lo->mpsnr_db));
  }
  CHECK(testutil::read_file(cfg.store).find("inf") != std::string::npos);

  RunConfig changed = cfg;
  changed.mock.idle_watts = 6.0;
  CHECK_THROWS_AS(pipeline_measure(changed, {src}, again, meter, ex), DataError);
}

TEST_CASE("cell failures are logged and skipped") {
  testutil::TempDir dir("fail");
  RunConfig cfg = small_config(dir);
  cfg.encoder = CommandTemplate("false {input} {output}");
  const auto src = write_source(dir, "clip");
  MockMeter meter(cfg.mock);
  SimulatedExecutor ex(meter);
  MeasurementStore store(cfg.store);
  const MeasureSummary s = pipeline_measure(cfg, {src}, store, meter, ex);
  CHECK(s.added == 0);
  CHECK(s.failed == 4);
  CHECK(std::filesystem::exists(store.failure_path()));

  // Wrong source rate.
  SyntheticParams p;
  p.width = 16;
  p.height = 16;
  p.frame_rate = Rational(60);
  write_y4m(generate_synthetic(SyntheticKind::kConstant, p), dir / "slow.y4m");
  MeasurementStore s2(dir / "s2.csv");
  CHECK(pipeline_measure(small_config(dir), {dir / "slow.y4m"}, s2, meter, ex).failed == 4);
}

TEST_CASE("label report round trip with the catch row") {
  const std::string text =
      "sequence,policy,BDR,BDEE,BDDE\n"
      "catch,\"{120,30,15,15}\",-16.03,-69.45,-64.60\n"
      "other,\"{120,60,30,30}\",-15.97,-69.55,-64.40\n"
      "All sequences,Average BD,-16.00,-69.50,-64.50\n"
      "Downsampled,Average BD,-16.00,-69.50,-64.50\n";
  const LabelReport r = LabelReport::from_csv(text);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].policy == "{120,30,15,15}");
  CHECK(r.rows[0].bdr == -16.03);
  CHECK(r.rows[0].bdee == -69.45);
  CHECK(r.rows[0].bdde == -64.60);
  CHECK(r.to_csv() == text);
  CHECK(LabelReport::from_json(r.to_json()).to_csv() == text);

  LabelReport re = r;
  re.recompute_averages();
  CHECK(re.average_all.bdr == doctest::Approx(-16.0));
  CHECK(re.average_downsampled->bdee == doctest::Approx(-69.5));
  CHECK(re.to_csv() == text);
}

TEST_CASE("delta-e report round trip and arithmetic") {
  const std::string text =
      "sequence,policy,delta_e_percent\n"
      "catch,\"{120,30,15,15}\",-54.85\n"
      "All sequences,Average,-54.85\n"
      "Reduced,Average,-54.85\n";
  const DeltaEReport r = DeltaEReport::from_csv(text);
  CHECK(r.rows.at(0).delta_e == -54.85);
  CHECK(r.to_csv() == text);
  CHECK(DeltaEReport::from_json(r.to_json()).to_csv() == text);

  std::vector<RdePoint> pts;
  for (int c : {18, 23, 28, 33}) {
    pts.push_back(pt(120, c, 40 - c / 10.0, 10.0));
    pts.push_back(pt(60, c, 39 - c / 10.0, 5.0));
  }
  FrameRatePolicy half{{18, 23, 28, 33}, {Rational(60), Rational(60), Rational(60), Rational(60)}};
  // E_a = 1 + 4 * 5, E_b = 40.
  CHECK(delta_e_percent(pts, half, Rational(120), 1.0, 0.0) == doctest::Approx(-47.5));
  CHECK(delta_e_percent(pts, half, Rational(120), 0.0, 0.0) == doctest::Approx(-50.0));
  FrameRatePolicy native{{18, 23, 28, 33}, std::vector<Rational>(4, Rational(120))};
  const double overhead = delta_e_percent(pts, native, Rational(120), 0.5, 0.1);
  CHECK(overhead > 0.0);
  CHECK(overhead == doctest::Approx(100.0 * 0.9 / 40.0));
  FrameRatePolicy missing{{18}, {Rational(24)}};
  CHECK_THROWS_AS(delta_e_percent(pts, missing, Rational(120), 0, 0), DataError);
}

TEST_CASE("label classes and helpers") {
  CHECK(label_class(Rational(120)) == 120);
  CHECK(label_class(Rational(100)) == 120);
  CHECK(label_class(Rational(60)) == 60);
  CHECK(label_class(Rational(50)) == 60);
  CHECK(label_class(Rational(25)) == 30);
  CHECK(label_class(Rational(24)) == 24);
  CHECK(label_class(Rational(15)) == 15);
  CHECK(label_class(Rational(240)) == 120);
  CHECK(rate_slug(Rational(120000, 1001)) == "120000_1001");
  CHECK(rate_slug(Rational(60)) == "60");
  CHECK(sequence_name("/a/b/clip.y4m") == "clip");
  CHECK(policy_downsamples("{120,30,15,15}", Rational(120)));
  CHECK_FALSE(policy_downsamples("{120,120,120,120}", Rational(120)));
}

TEST_CASE("pipeline label on planted grid") {
  testutil::TempDir dir("label");
  RunConfig cfg = RunConfig::defaults();
  cfg.ladder = {Rational(120), Rational(60), Rational(30), Rational(15)};
  cfg.crf_grid = {18, 23, 28, 33};
  cfg.store = dir / "s.csv";
  MeasurementStore store(cfg.store);
  store.bind("mock", cfg.config_hash());
  for (const auto& p : testutil::planted_crossover_grid()) store.append({"catch", p, cfg.config_hash()});
  for (const auto& p : testutil::planted_crossover_grid()) {
    RdePoint q = p;
    q.mpsnr_db += q.frame_rate.to_double();  // native dominates everywhere
    store.append({"plain", q, cfg.config_hash()});
  }
  const LabelReport r = pipeline_label(store, cfg);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].sequence == "catch");
  CHECK(r.rows[0].policy == "{120,30,15,15}");
  CHECK(r.rows[0].bdee < 0.0);
  CHECK(r.rows[1].policy == "{120,120,120,120}");
  CHECK(r.rows[1].bdr == 0.0);
  CHECK(r.average_all.bdee == doctest::Approx(r.rows[0].bdee / 2));
  REQUIRE(r.average_downsampled);
  CHECK(r.average_downsampled->bdee == r.rows[0].bdee);

  const std::string curves = render_curves_csv(store.points_for("catch"));
  const CsvTable t = parse_csv(curves);
  CHECK(t.header.back() == "pareto");
  CHECK(t.rows.size() == 16);
  int on_front = 0;
  for (const auto& row : t.rows) on_front += row.back() == "1";
  CHECK(on_front == static_cast<int>(pareto_front(store.points_for("catch")).size()));
}

TEST_CASE("planted model picks by motion") {
  FeatureTable table;
  LabelReport labels;
  const std::vector<int> crfs = {18, 23, 28, 33};
  for (int i = 0; i < 4; ++i) {
    SyntheticParams p;
    p.width = 32;
    p.height = 32;
    p.frames = 6;
    p.seed = 10 + i;
    p.value = static_cast<std::uint16_t>(60 + 30 * i);
    const std::string still = "still" + std::to_string(i);
    for (const auto& v : sequence_features(generate_synthetic(SyntheticKind::kConstant, p), crfs)) {
      table.add(still, v);
    }
    labels.rows.push_back({still, "{15,15,15,15}"});
    p.motion = 3.0 + i;
    const std::string fast = "fast" + std::to_string(i);
    for (const auto& v : sequence_features(generate_synthetic(SyntheticKind::kDynamicTexture, p), crfs)) {
      table.add(fast, v);
    }
    labels.rows.push_back({fast, "{120,120,120,120}"});
  }
  CHECK(FeatureTable::from_csv(table.to_csv()).to_csv() == table.to_csv());
  const Dataset data = build_dataset(table, labels, crfs);
  CHECK(data.size() == 32);
  MlConfig ml;
  ml.n_estimators = 10;
  ml.seed = 1;
  const TrainResult tr = pipeline_train(data, ml);
  CHECK(tr.evaluation.accuracy == 1.0);
  CHECK(tr.model.selected_features.size() == 15);

  SyntheticParams q;
  q.width = 32;
  q.height = 32;
  q.frames = 6;
  q.value = 100;
  const auto still = generate_synthetic(SyntheticKind::kConstant, q);
  q.motion = 4.0;
  q.seed = 77;
  const auto fast = generate_synthetic(SyntheticKind::kDynamicTexture, q);
  CHECK(predict_frame_rate(tr.model, still, 23) == 15);
  CHECK(predict_frame_rate(tr.model, fast, 23) == 120);
  CHECK(predict_frame_rate(tr.model, fast, 23) == predict_frame_rate(tr.model, fast, 23));
  const EnsembleModel back = model_from_json(model_to_json(tr.model));
  CHECK(predict_frame_rate(back, still, 28) == 15);

  const std::string ev = evaluation_to_json(tr);
  CHECK(ev.find("\"confusion_matrix\"") != std::string::npos);
  CHECK(ev.find("\"class_order\"") != std::string::npos);

  // A single class trains to a constant predictor.
  LabelReport one;
  one.rows.push_back({"still0", "{15,15,15,15}"});
  one.rows.push_back({"still1", "{15,15,15,15}"});
  MlConfig single = ml;
  single.n_iterations = 2;
  const Dataset sd = build_dataset(table, one, crfs);
  const TrainResult st = pipeline_train(sd, single);
  CHECK(predict_frame_rate(st.model, fast, 18) == 15);
}

TEST_CASE("csv quoting and number formatting") {
  const CsvRow row = {"a", "b,c", "say \"hi\"", ""};
  CHECK(parse_csv_line(format_csv_line(row)) == row);
  CHECK(format_fixed2(-0.001) == "0.00");
  CHECK(format_fixed2(-16.03) == "-16.03");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isinf(parse_double("inf")));
  CHECK(parse_double(format_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK_THROWS_AS(parse_double("1.5x"), DataError);
}

TEST_CASE("cli exit codes") {
  testutil::TempDir dir("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("downsample --in") == 1);
  CHECK(run_cli("quality --ref '" + (dir / "none.y4m").string() + "' --test x.y4m") == 2);
  CHECK(run_cli("measure --cmd 'exit 5' --modeled-seconds 1") == 3);
  CHECK(run_cli("measure --cmd true --modeled-seconds 1") == 0);
  const auto a = dir / "a.y4m";
  CHECK(run_cli("synth --kind local_motion --frames 8 --out '" + a.string() + "'") == 0);
  CHECK(run_cli("downsample --in '" + a.string() + "' --out '" + (dir / "b.y4m").string() +
                "' --fps 30") == 0);
  CHECK(read_y4m(dir / "b.y4m").size() == 2);
  CHECK(run_cli("downsample --in '" + a.string() + "' --out '" + (dir / "c.y4m").string() +
                "' --fps 240") == 1);
}
