#include "eafrs/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eafrs/csv.hpp"
#include "eafrs/error.hpp"
#include "eafrs/quality.hpp"
#include "eafrs/resampler.hpp"
#include "eafrs/video_io.hpp"

namespace eafrs {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const char* const kDefaultEncoder =
    "ffmpeg -loglevel error -y -i {input} -c:v libx265 -preset medium -crf {crf} "
    "-x265-params log-level=error -f hevc {output}";
const char* const kDefaultDecoder =
    "ffmpeg -loglevel error -y -i {input} -f yuv4mpegpipe -strict -1 {output}";

const CsvRow kStoreHeader = {"sequence", "fps",     "crf",     "mpsnr_db",
                             "bitrate_kbps", "e_enc_j", "e_dec_j", "config_hash"};

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string hostname() {
  char buf[256] = {};
  if (gethostname(buf, sizeof(buf) - 1) != 0) return "unknown";
  return buf;
}

Rational rate_from_json(const json& j) {
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_number()) return Rational::parse(j.dump());
  throw DataError("frame rate must be a number or string, got " + j.dump());
}

std::vector<int> crf_list_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<int>>();
  if (j.is_object()) {
    const int start = j.value("start", 0), stop = j.value("stop", 51), step = j.value("step", 3);
    if (step <= 0) throw DataError("CRF step must be positive");
    std::vector<int> out;
    for (int c = start; c <= stop; c += step) out.push_back(c);
    for (int c : j.value("extra", std::vector<int>{})) out.push_back(c);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  throw DataError("CRF list must be an array or {start, stop, step}");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<Rational> policy_rates(const std::string& policy) {
  std::string body;
  for (char c : policy) {
    if (c != '{' && c != '}' && c != ' ') body += c;
  }
  std::vector<Rational> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Rational::parse(item));
  if (out.empty()) throw DataError("empty policy '" + policy + "'");
  return out;
}

json bd_row_json(const BdRow& r) {
  return {{"BDR", r.bdr}, {"BDEE", r.bdee}, {"BDDE", r.bdde}};
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (int f : {120, 100, 60, 50, 40, 30, 25, 24, 15}) c.ladder.emplace_back(f);
  for (int crf = 0; crf <= 51; crf += 3) c.crf_grid.push_back(crf);
  // 23 and 28 are not on the step-3 grid but are needed for selection.
  c.crf_grid.push_back(23);
  c.crf_grid.push_back(28);
  std::sort(c.crf_grid.begin(), c.crf_grid.end());
  c.crf_subset = {18, 23, 28, 33};
  c.encoder = CommandTemplate(kDefaultEncoder);
  c.decoder = CommandTemplate(kDefaultDecoder);
  return c;
}

void RunConfig::validate() const {
  if (ladder.empty()) throw DataError("ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!ladder[i].is_positive()) throw DataError("ladder rates must be positive");
    if (i > 0 && !(ladder[i] < ladder[i - 1])) {
      throw DataError("ladder must be strictly descending");
    }
  }
  if (crf_grid.empty() || crf_subset.empty()) throw DataError("CRF lists must be non-empty");
  for (int c : crf_grid) {
    if (c < 0 || c > 51) throw DataError("CRF " + std::to_string(c) + " outside [0, 51]");
  }
  if (!std::is_sorted(crf_subset.begin(), crf_subset.end())) {
    throw DataError("crf_subset must be ascending");
  }
  for (int c : crf_subset) {
    if (std::find(crf_grid.begin(), crf_grid.end(), c) == crf_grid.end()) {
      throw DataError("crf_subset member " + std::to_string(c) + " is not in crf_grid");
    }
  }
  if (encoder.text().empty() || decoder.text().empty()) {
    throw DataError("encoder and decoder templates are required");
  }
}

std::string RunConfig::config_hash() const {
  json j;
  std::vector<std::string> rates;
  for (const auto& r : ladder) rates.push_back(r.to_string());
  j["ladder"] = rates;
  j["crf_grid"] = crf_grid;
  j["encoder"] = encoder.text();
  j["decoder"] = decoder.text();
  j["meter"] = meter;
  j["mock"] = {{"idle_watts", mock.idle_watts},
               {"default_active_watts", mock.default_active_watts},
               {"active_watts", mock.active_watts},
               {"max_range_joules", mock.max_range_joules}};
  j["cost"] = {{"encode_s_per_mpx", cost.encode_s_per_mpx},
               {"decode_s_per_mpx", cost.decode_s_per_mpx},
               {"crf_slope", cost.crf_slope}};
  j["ci"] = {{"alpha", ci.alpha}, {"beta", ci.beta}, {"min_reps", ci.min_reps},
             {"max_reps", ci.max_reps}};
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::exception& e) {
    throw DataError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = RunConfig::defaults();
  try {
    if (j.contains("ladder")) {
      c.ladder.clear();
      for (const auto& r : j["ladder"]) c.ladder.push_back(rate_from_json(r));
    }
    if (j.contains("crf_grid")) c.crf_grid = crf_list_from_json(j["crf_grid"]);
    if (j.contains("crf_subset")) c.crf_subset = j["crf_subset"].get<std::vector<int>>();
    if (j.contains("encoder")) c.encoder = CommandTemplate(j["encoder"].get<std::string>());
    if (j.contains("decoder")) c.decoder = CommandTemplate(j["decoder"].get<std::string>());
    if (j.contains("meter")) c.meter = j["meter"].get<std::string>();
    if (j.contains("mock")) {
      const auto& m = j["mock"];
      c.mock.idle_watts = m.value("idle_watts", c.mock.idle_watts);
      c.mock.default_active_watts = m.value("default_active_watts", c.mock.default_active_watts);
      c.mock.max_range_joules = m.value("max_range_joules", c.mock.max_range_joules);
      if (m.contains("active_watts")) {
        c.mock.active_watts = m["active_watts"].get<std::map<std::string, double>>();
      }
    }
    if (j.contains("cost")) {
      const auto& m = j["cost"];
      c.cost.encode_s_per_mpx = m.value("encode_s_per_mpx", c.cost.encode_s_per_mpx);
      c.cost.decode_s_per_mpx = m.value("decode_s_per_mpx", c.cost.decode_s_per_mpx);
      c.cost.features_s_per_mpx = m.value("features_s_per_mpx", c.cost.features_s_per_mpx);
      c.cost.classify_s = m.value("classify_s", c.cost.classify_s);
      c.cost.crf_slope = m.value("crf_slope", c.cost.crf_slope);
    }
    if (j.contains("ci")) {
      const auto& m = j["ci"];
      c.ci.alpha = m.value("alpha", c.ci.alpha);
      c.ci.beta = m.value("beta", c.ci.beta);
      c.ci.min_reps = m.value("min_reps", c.ci.min_reps);
      c.ci.max_reps = m.value("max_reps", c.ci.max_reps);
    }
    if (j.contains("ml")) {
      const auto& m = j["ml"];
      c.ml.chi_square_bins = m.value("chi_square_bins", c.ml.chi_square_bins);
      c.ml.top_k = m.value("top_k", c.ml.top_k);
      c.ml.n_estimators = m.value("n_estimators", c.ml.n_estimators);
      c.ml.max_depth = m.value("max_depth", c.ml.max_depth);
      c.ml.min_leaf = m.value("min_leaf", c.ml.min_leaf);
      c.ml.seed = m.value("seed", c.ml.seed);
      c.ml.n_iterations = m.value("n_iterations", c.ml.n_iterations);
      c.ml.train_fraction = m.value("train_fraction", c.ml.train_fraction);
      c.ml.canonical_kfold = m.value("canonical_kfold", c.ml.canonical_kfold);
    }
    if (j.contains("bd_interpolation")) {
      const auto m = j["bd_interpolation"].get<std::string>();
      if (m == "pchip") {
        c.bd_method = BdInterpolation::kPchip;
      } else if (m == "cubic") {
        c.bd_method = BdInterpolation::kCubicPolynomial;
      } else {
        throw DataError("bd_interpolation must be pchip or cubic");
      }
    }
    if (j.contains("work_dir")) c.work_dir = j["work_dir"].get<std::string>();
    if (j.contains("store")) c.store = j["store"].get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig c = config_from_json(read_text(path));
  // Relative paths resolve against the config file's directory.
  const auto base = path.parent_path();
  if (c.work_dir.is_relative()) c.work_dir = base / c.work_dir;
  if (c.store.is_relative()) c.store = base / c.store;
  return c;
}

std::unique_ptr<EnergyMeter> make_meter(const RunConfig& config) {
  std::string choice = config.meter;
  if (const char* env = std::getenv("EAFRS_METER"); env != nullptr && *env != '\0') {
    choice = env;
  }
  if (choice == "mock") return std::make_unique<MockMeter>(config.mock);
  if (choice == "rapl") return std::make_unique<RaplMeter>();
  if (choice.rfind("rapl:", 0) == 0) return std::make_unique<RaplMeter>(choice.substr(5));
  throw PreconditionError("unknown meter '" + choice + "' (mock|rapl|rapl:<zone>)");
}

std::unique_ptr<Executor> make_executor(const RunConfig&, EnergyMeter& meter) {
  if (auto* mock = dynamic_cast<MockMeter*>(&meter)) {
    return std::make_unique<SimulatedExecutor>(*mock);
  }
  return std::make_unique<RealExecutor>();
}

std::string rate_slug(const Rational& r) {
  std::string s = r.to_string();
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

std::string sequence_name(const std::filesystem::path& path) {
  return path.stem().string();
}

// ---------------------------------------------------------------------------
// MeasurementStore

MeasurementStore::MeasurementStore(std::filesystem::path csv_path)
    : path_(std::move(csv_path)) {
  if (!std::filesystem::exists(path_)) return;
  const CsvTable t = read_csv(path_);
  if (t.header != kStoreHeader) throw DataError(path_.string() + " is not a measurement store");
  for (const auto& r : t.rows) {
    StoreRow row;
    row.sequence = r[0];
    row.point.frame_rate = Rational::parse(r[1]);
    row.point.crf = std::stoi(r[2]);
    row.point.mpsnr_db = parse_double(r[3]);
    row.point.bitrate_kbps = parse_double(r[4]);
    row.point.e_enc_j = parse_double(r[5]);
    row.point.e_dec_j = parse_double(r[6]);
    row.config_hash = r[7];
    if (contains(row.sequence, row.point.frame_rate, row.point.crf)) {
      throw DataError("store repeats key (" + row.sequence + ", " + r[1] + ", " + r[2] + ")");
    }
    rows_.push_back(std::move(row));
  }
}

std::filesystem::path MeasurementStore::meta_path() const {
  return path_.string() + ".meta.json";
}

std::filesystem::path MeasurementStore::failure_path() const {
  return path_.string() + ".failures.csv";
}

void MeasurementStore::bind(const std::string& meter_name, const std::string& config_hash) {
  if (std::filesystem::exists(meta_path())) {
    json meta;
    try {
      meta = json::parse(read_text(meta_path()));
    } catch (const json::exception& e) {
      throw DataError("unreadable store metadata: " + std::string(e.what()));
    }
    const std::string stored = meta.value("config_hash", "");
    if (stored != config_hash) {
      throw DataError("store " + path_.string() + " was written with config " + stored +
                      ", current config is " + config_hash);
    }
    return;
  }
  for (const auto& r : rows_) {
    if (r.config_hash != config_hash) {
      throw DataError("store rows carry config " + r.config_hash + ", current is " +
                      config_hash);
    }
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  ojson meta = {{"meter", meter_name},
                {"host", hostname()},
                {"config_hash", config_hash},
                {"columns", kStoreHeader}};
  write_text(meta_path(), meta.dump(2) + "\n");
}

bool MeasurementStore::contains(const std::string& sequence, const Rational& fps,
                                int crf) const {
  return std::any_of(rows_.begin(), rows_.end(), [&](const StoreRow& r) {
    return r.sequence == sequence && r.point.frame_rate == fps && r.point.crf == crf;
  });
}

void MeasurementStore::append(const StoreRow& row) {
  if (contains(row.sequence, row.point.frame_rate, row.point.crf)) {
    throw DataError("store already has (" + row.sequence + ", " +
                    row.point.frame_rate.to_string() + ", " + std::to_string(row.point.crf) +
                    ")");
  }
  const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
  if (fresh && path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (fresh) out << format_csv_line(kStoreHeader) << "\n";
  const RdePoint& p = row.point;
  out << format_csv_line({row.sequence, p.frame_rate.to_string(), std::to_string(p.crf),
                          format_double(p.mpsnr_db), format_double(p.bitrate_kbps),
                          format_double(p.e_enc_j), format_double(p.e_dec_j),
                          row.config_hash})
      << "\n";
  if (!out) throw DataError("cannot append to " + path_.string());
  rows_.push_back(row);
}

void MeasurementStore::record_failure(const std::string& sequence, const Rational& fps,
                                      int crf, const std::string& stage,
                                      const std::string& message) {
  const bool fresh = !std::filesystem::exists(failure_path());
  std::ofstream out(failure_path(), std::ios::app);
  if (fresh) out << "sequence,fps,crf,stage,error\n";
  out << format_csv_line({sequence, fps.to_string(), std::to_string(crf), stage, message})
      << "\n";
}

std::vector<std::string> MeasurementStore::sequences() const {
  std::vector<std::string> out;
  for (const auto& r : rows_) {
    if (std::find(out.begin(), out.end(), r.sequence) == out.end()) out.push_back(r.sequence);
  }
  return out;
}

std::vector<RdePoint> MeasurementStore::points_for(const std::string& sequence) const {
  std::vector<RdePoint> out;
  for (const auto& r : rows_) {
    if (r.sequence == sequence) out.push_back(r.point);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Measurement

MeasureSummary pipeline_measure(const RunConfig& config,
                                const std::vector<std::filesystem::path>& sequences,
                                MeasurementStore& store, EnergyMeter& meter,
                                Executor& executor) {
  config.validate();
  const std::string hash = config.config_hash();
  store.bind(meter.name(), hash);
  std::filesystem::create_directories(config.work_dir);

  IdleBaselineCache idle_cache;
  MeasureOptions opts;
  opts.ci = config.ci;
  opts.idle_cache = &idle_cache;
  if (dynamic_cast<MockMeter*>(&meter) == nullptr) {
    opts.lock_path = config.work_dir / ".measure.lock";
  }

  MeasureSummary summary;
  const Rational native = config.native_rate();
  for (const auto& seq_path : sequences) {
    const std::string name = sequence_name(seq_path);
    std::optional<VideoSequence> src;
    try {
      src = read_y4m(seq_path);
      if (src->frame_rate() != native) {
        throw DataError("source rate " + src->frame_rate().to_string() +
                        " differs from the ladder's native rate " + native.to_string());
      }
    } catch (const std::exception& e) {
      store.record_failure(name, native, -1, "read", e.what());
      summary.failed += static_cast<int>(config.ladder.size() * config.crf_grid.size());
      continue;
    }
    const auto dir = config.work_dir / name;
    std::filesystem::create_directories(dir);

    for (const auto& f : config.ladder) {
      std::vector<int> todo;
      for (int crf : config.crf_grid) {
        if (store.contains(name, f, crf)) {
          ++summary.skipped;
        } else {
          todo.push_back(crf);
        }
      }
      if (todo.empty()) continue;

      const auto ds_path = dir / (name + "_" + rate_slug(f) + ".y4m");
      double mpx = 0.0;
      try {
        const VideoSequence ds = f == native ? *src : downsample(*src, f);
        write_y4m(ds, ds_path);
        mpx = static_cast<double>(ds.size()) * ds.width() * ds.height() / 1e6;
      } catch (const std::exception& e) {
        for (int crf : todo) store.record_failure(name, f, crf, "downsample", e.what());
        summary.failed += static_cast<int>(todo.size());
        continue;
      }

      for (int crf : todo) {
        const std::string stem = name + "_" + rate_slug(f) + "_crf" + std::to_string(crf);
        const auto bitstream = dir / (stem + ".bin");
        const auto decoded = dir / (stem + "_dec.y4m");
        std::string stage = "encode";
        try {
          std::filesystem::remove(bitstream);
          const Workload enc =
              make_encode_workload(config.encoder, ds_path, bitstream, crf, config.cost);
          const EnergyMeasurement em = measure_command(meter, executor, enc, opts);
          const EncodeResult er = harvest_encode(ds_path, bitstream, crf, em.duration_s);
          write_encode_sidecar(er, bitstream.string() + ".json");

          stage = "decode";
          std::filesystem::remove(decoded);
          const Workload dec =
              make_decode_workload(config.decoder, bitstream, decoded, mpx, config.cost);
          const EnergyMeasurement dm = measure_command(meter, executor, dec, opts);
          if (!std::filesystem::exists(decoded)) {
            throw SubprocessError("decoder produced no output at " + decoded.string(), 0);
          }

          stage = "quality";
          const VideoSequence out = read_y4m(decoded).with_frame_rate(f);
          const QualityScore q = mpsnr(*src, out);
          std::filesystem::remove(decoded);

          StoreRow row;
          row.sequence = name;
          row.point = {f, crf, q.value_db, er.bitrate_kbps, em.e_net, dm.e_net};
          row.config_hash = hash;
          store.append(row);
          ++summary.added;
        } catch (const std::exception& e) {
          store.record_failure(name, f, crf, stage, e.what());
          ++summary.failed;
        }
      }
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Labels and BD report

bool policy_downsamples(const std::string& policy, const Rational& native) {
  for (const auto& r : policy_rates(policy)) {
    if (r < native) return true;
  }
  return false;
}

void LabelReport::recompute_averages() {
  auto avg = [](const std::vector<const BdRow*>& rows, const char* name, const char* label) {
    BdRow a;
    a.sequence = name;
    a.policy = label;
    std::vector<double> r, e, d;
    for (const BdRow* row : rows) {
      r.push_back(row->bdr);
      e.push_back(row->bdee);
      d.push_back(row->bdde);
    }
    a.bdr = mean(r);
    a.bdee = mean(e);
    a.bdde = mean(d);
    return a;
  };
  std::vector<const BdRow*> all, down;
  Rational native(0);
  for (const auto& row : rows) {
    for (const auto& r : policy_rates(row.policy)) native = std::max(native, r);
  }
  for (const auto& row : rows) {
    all.push_back(&row);
    if (policy_downsamples(row.policy, native)) down.push_back(&row);
  }
  average_all = avg(all, "All sequences", "Average BD");
  average_downsampled.reset();
  if (!down.empty()) average_downsampled = avg(down, "Downsampled", "Average BD");
}

std::string LabelReport::to_csv() const {
  CsvTable t;
  t.header = {"sequence", "policy", "BDR", "BDEE", "BDDE"};
  auto add = [&](const BdRow& r) {
    t.rows.push_back({r.sequence, r.policy, format_fixed2(r.bdr), format_fixed2(r.bdee),
                      format_fixed2(r.bdde)});
  };
  for (const auto& r : rows) add(r);
  add(average_all);
  if (average_downsampled) add(*average_downsampled);
  return render_csv(t);
}

std::string LabelReport::to_json() const {
  ojson j;
  j["rows"] = ojson::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"sequence", r.sequence},
                         {"policy", r.policy},
                         {"BDR", r.bdr},
                         {"BDEE", r.bdee},
                         {"BDDE", r.bdde}});
  }
  j["average_all"] = bd_row_json(average_all);
  j["average_downsampled"] =
      average_downsampled ? ojson(bd_row_json(*average_downsampled)) : ojson(nullptr);
  return j.dump(2) + "\n";
}

LabelReport LabelReport::from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const std::size_t cs = t.column("sequence"), cp = t.column("policy"), cr = t.column("BDR"),
                    ce = t.column("BDEE"), cd = t.column("BDDE");
  LabelReport rep;
  bool have_all = false;
  for (const auto& row : t.rows) {
    BdRow r{row[cs], row[cp], parse_double(row[cr]), parse_double(row[ce]),
            parse_double(row[cd])};
    if (r.policy == "Average BD" && r.sequence == "All sequences") {
      rep.average_all = r;
      have_all = true;
    } else if (r.policy == "Average BD" && r.sequence == "Downsampled") {
      rep.average_downsampled = r;
    } else {
      rep.rows.push_back(r);
    }
  }
  if (!have_all) rep.recompute_averages();
  return rep;
}

LabelReport LabelReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    LabelReport rep;
    for (const auto& r : j.at("rows")) {
      rep.rows.push_back({r.at("sequence").get<std::string>(), r.at("policy").get<std::string>(),
                          r.at("BDR").get<double>(), r.at("BDEE").get<double>(),
                          r.at("BDDE").get<double>()});
    }
    auto avg = [](const json& a, const char* name) {
      return BdRow{name, "Average BD", a.at("BDR").get<double>(), a.at("BDEE").get<double>(),
                   a.at("BDDE").get<double>()};
    };
    rep.average_all = avg(j.at("average_all"), "All sequences");
    if (j.contains("average_downsampled") && !j["average_downsampled"].is_null()) {
      rep.average_downsampled = avg(j["average_downsampled"], "Downsampled");
    }
    return rep;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed label report: ") + e.what());
  }
}

LabelReport pipeline_label(const MeasurementStore& store, const RunConfig& config) {
  config.validate();
  LabelReport rep;
  const Rational native = config.native_rate();
  for (const auto& name : store.sequences()) {
    const auto points = store.points_for(name);
    for (const auto& f : config.ladder) {
      for (int c : config.crf_subset) {
        bool found = false;
        for (const auto& p : points) found = found || (p.frame_rate == f && p.crf == c);
        if (!found) {
          throw DataError("sequence " + name + " lacks cell (" + f.to_string() + " fps, CRF " +
                          std::to_string(c) + ")");
        }
      }
    }
    const FrameRatePolicy policy = select_policy(points, config.crf_subset);
    const BdTriplet bd = bd_triplet(points, policy, native, config.bd_method);
    for (const BdResult* r : {&bd.rate, &bd.enc, &bd.dec}) {
      if (r->narrow_overlap) {
        std::cerr << "warning: " << name << ": BD quality overlap only " << r->overlap_db
                  << " dB\n";
      }
    }
    rep.rows.push_back({name, policy.to_string(), bd.rate.bd_percent, bd.enc.bd_percent,
                        bd.dec.bd_percent});
  }
  rep.recompute_averages();
  return rep;
}

std::string render_curves_csv(const std::vector<RdePoint>& points, EnergyAxis axis) {
  const auto front = pareto_front(points, axis);
  std::vector<RdePoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const RdePoint& a, const RdePoint& b) {
    if (a.frame_rate != b.frame_rate) return a.frame_rate > b.frame_rate;
    return a.crf < b.crf;
  });
  CsvTable t;
  t.header = {"fps", "crf", "mpsnr_db", "bitrate_kbps", "e_enc_j", "e_dec_j", "pareto"};
  for (const auto& p : sorted) {
    const bool on_front = std::find(front.begin(), front.end(), p) != front.end();
    t.rows.push_back({p.frame_rate.to_string(), std::to_string(p.crf), format_double(p.mpsnr_db),
                      format_double(p.bitrate_kbps), format_double(p.e_enc_j),
                      format_double(p.e_dec_j), on_front ? "1" : "0"});
  }
  return render_csv(t);
}

// ---------------------------------------------------------------------------
// Features and training

void FeatureTable::add(const std::string& sequence, const FeatureVector& v) {
  if (find(sequence, v.crf)) {
    throw DataError("duplicate feature row (" + sequence + ", CRF " + std::to_string(v.crf) +
                    ")");
  }
  sequences.push_back(sequence);
  vectors.push_back(v);
}

const FeatureVector* FeatureTable::find(const std::string& sequence, int crf) const {
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (sequences[i] == sequence && vectors[i].crf == crf) return &vectors[i];
  }
  return nullptr;
}

std::string FeatureTable::to_csv() const {
  CsvTable t;
  t.header.push_back("sequence");
  for (auto n : feature_names()) t.header.emplace_back(n);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    CsvRow row{sequences[i]};
    const auto values = vectors[i].as_row();
    for (std::size_t k = 0; k + 1 < values.size(); ++k) row.push_back(format_double(values[k]));
    row.push_back(std::to_string(vectors[i].crf));
    t.rows.push_back(std::move(row));
  }
  return render_csv(t);
}

FeatureTable FeatureTable::from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  std::vector<std::size_t> cols;
  for (auto n : feature_names()) cols.push_back(t.column(std::string(n)));
  const std::size_t cs = t.column("sequence");
  FeatureTable out;
  for (const auto& row : t.rows) {
    std::vector<double> values;
    for (std::size_t c : cols) values.push_back(parse_double(row[c]));
    out.add(row[cs], FeatureVector::from_row(values));
  }
  return out;
}

std::vector<FeatureVector> sequence_features(const VideoSequence& seq,
                                             const std::vector<int>& crfs,
                                             const FeatureConfig& cfg) {
  std::vector<FeatureVector> out;
  if (crfs.empty()) return out;
  const FeatureVector base = extract_feature_vector(seq, crfs.front(), cfg);
  for (int c : crfs) {
    FeatureVector v = base;
    v.crf = c;
    out.push_back(v);
  }
  return out;
}

int label_class(const Rational& rate) {
  if (!rate.is_positive()) throw DataError("frame rate must be positive");
  // Classes are descending; take the lowest class that is not below the rate.
  int chosen = kFrameRateClasses.front();
  for (int c : kFrameRateClasses) {
    if (!(Rational(c) < rate)) chosen = c;
  }
  return chosen;
}

Dataset build_dataset(const FeatureTable& features, const LabelReport& labels,
                      const std::vector<int>& crf_subset) {
  Dataset d;
  for (auto n : feature_names()) d.feature_names.emplace_back(n);
  for (const auto& row : labels.rows) {
    const FrameRatePolicy policy = FrameRatePolicy::parse(row.policy, crf_subset);
    for (std::size_t i = 0; i < crf_subset.size(); ++i) {
      const FeatureVector* v = features.find(row.sequence, crf_subset[i]);
      if (!v) {
        throw DataError("no features for (" + row.sequence + ", CRF " +
                        std::to_string(crf_subset[i]) + ")");
      }
      d.add(v->as_row(), label_class(policy.rates[i]));
    }
  }
  d.validate();
  return d;
}

TrainResult pipeline_train(const Dataset& data, const MlConfig& ml) {
  if (data.size() == 0) throw DataError("training set is empty");
  TrainResult res;
  std::set<int> classes(data.labels.begin(), data.labels.end());
  if (classes.size() >= 2) {
    res.chi_square = chi_square_scores(data, ml.chi_square_bins);
  } else {
    res.chi_square.assign(data.dimension(), 0.0);
  }
  const int k = std::min<int>(ml.top_k, static_cast<int>(data.dimension()));
  const auto selected = select_top_k(res.chi_square, k);

  BaggingParams bp;
  bp.n_estimators = ml.n_estimators;
  bp.seed = ml.seed;
  bp.tree.max_depth = ml.max_depth;
  bp.tree.min_leaf = ml.min_leaf;

  EvalParams ep;
  ep.n_iterations = ml.n_iterations;
  ep.train_fraction = ml.train_fraction;
  ep.seed = ml.seed;
  ep.canonical_kfold = ml.canonical_kfold;
  ep.bagging = bp;
  res.evaluation = evaluate(data.project(selected), ep);
  res.model = fit_bagging(data, bp, selected);
  return res;
}

std::string evaluation_to_json(const TrainResult& result) {
  const Evaluation& ev = result.evaluation;
  ojson j;
  j["accuracy"] = ev.accuracy;
  j["iteration_accuracy"] = ev.per_iteration_accuracy;
  j["class_order"] = kFrameRateClasses;
  ojson cm = ojson::array();
  for (const auto& row : ev.confusion) cm.push_back(row);
  j["confusion_matrix"] = cm;
  j["errors"] = ev.errors;
  j["errors_toward_higher_fps"] = ev.errors_toward_higher;
  ojson sel = ojson::array();
  for (std::size_t f : result.model.selected_features) {
    sel.push_back(result.model.feature_names.at(f));
  }
  j["selected_features"] = sel;
  ojson chi = ojson::object();
  for (std::size_t f = 0; f < result.chi_square.size(); ++f) {
    chi[result.model.feature_names.at(f)] = result.chi_square[f];
  }
  j["chi_square"] = chi;
  return j.dump(2) + "\n";
}

int predict_frame_rate(const EnsembleModel& model, const FeatureVector& features) {
  return predict(model, model.restrict(features.as_row()));
}

int predict_frame_rate(const EnsembleModel& model, const VideoSequence& seq, int crf,
                       const FeatureConfig& cfg) {
  return predict_frame_rate(model, extract_feature_vector(seq, crf, cfg));
}

// ---------------------------------------------------------------------------
// ΔE_select

double delta_e_percent(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                       const Rational& native, double e_features, double e_classify) {
  auto enc = [&](const Rational& f, int crf) {
    for (const auto& p : points) {
      if (p.frame_rate == f && p.crf == crf) return p.e_enc_j;
    }
    throw DataError("missing encode energy for (" + f.to_string() + " fps, CRF " +
                    std::to_string(crf) + ")");
  };
  double e_a = e_features, e_b = 0.0;
  for (std::size_t i = 0; i < policy.crfs.size(); ++i) {
    e_a += e_classify + enc(policy.rates.at(i), policy.crfs[i]);
    e_b += enc(native, policy.crfs[i]);
  }
  if (!(e_b > 0.0)) throw DataError("native encode energy must be positive");
  return 100.0 * (e_a - e_b) / e_b;
}

void DeltaEReport::recompute_averages(const Rational& native) {
  std::vector<double> all, reduced, kept;
  for (const auto& r : rows) {
    all.push_back(r.delta_e);
    (policy_downsamples(r.policy, native) ? reduced : kept).push_back(r.delta_e);
  }
  average_all = mean(all);
  average_reduced.reset();
  average_native.reset();
  if (!reduced.empty()) average_reduced = mean(reduced);
  if (!kept.empty()) average_native = mean(kept);
}

std::string DeltaEReport::to_csv() const {
  CsvTable t;
  t.header = {"sequence", "policy", "delta_e_percent"};
  for (const auto& r : rows) t.rows.push_back({r.sequence, r.policy, format_fixed2(r.delta_e)});
  t.rows.push_back({"All sequences", "Average", format_fixed2(average_all)});
  if (average_reduced) t.rows.push_back({"Reduced", "Average", format_fixed2(*average_reduced)});
  if (average_native) t.rows.push_back({"Native", "Average", format_fixed2(*average_native)});
  return render_csv(t);
}

std::string DeltaEReport::to_json() const {
  ojson j;
  j["rows"] = ojson::array();
  for (const auto& r : rows) {
    j["rows"].push_back(
        {{"sequence", r.sequence}, {"policy", r.policy}, {"delta_e_percent", r.delta_e}});
  }
  j["average_all"] = average_all;
  j["average_reduced"] = average_reduced ? ojson(*average_reduced) : ojson(nullptr);
  j["average_native"] = average_native ? ojson(*average_native) : ojson(nullptr);
  return j.dump(2) + "\n";
}

DeltaEReport DeltaEReport::from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  const std::size_t cs = t.column("sequence"), cp = t.column("policy"),
                    cv = t.column("delta_e_percent");
  DeltaEReport rep;
  bool have_all = false;
  for (const auto& row : t.rows) {
    const double v = parse_double(row[cv]);
    if (row[cp] == "Average") {
      if (row[cs] == "All sequences") {
        rep.average_all = v;
        have_all = true;
      } else if (row[cs] == "Reduced") {
        rep.average_reduced = v;
      } else if (row[cs] == "Native") {
        rep.average_native = v;
      }
      continue;
    }
    rep.rows.push_back({row[cs], row[cp], v});
  }
  if (!have_all) rep.recompute_averages();
  return rep;
}

DeltaEReport DeltaEReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DeltaEReport rep;
    for (const auto& r : j.at("rows")) {
      rep.rows.push_back({r.at("sequence").get<std::string>(),
                          r.at("policy").get<std::string>(),
                          r.at("delta_e_percent").get<double>()});
    }
    rep.average_all = j.at("average_all").get<double>();
    if (j.contains("average_reduced") && !j["average_reduced"].is_null()) {
      rep.average_reduced = j["average_reduced"].get<double>();
    }
    if (j.contains("average_native") && !j["average_native"].is_null()) {
      rep.average_native = j["average_native"].get<double>();
    }
    return rep;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed delta-e report: ") + e.what());
  }
}

DeltaERow delta_e_select(const MeasurementStore& store, const EnsembleModel& model,
                         const std::filesystem::path& sequence_path,
                         const RunConfig& config, EnergyMeter& meter, Executor& executor) {
  const VideoSequence seq = read_y4m(sequence_path);
  const std::string name = sequence_name(sequence_path);
  const auto points = store.points_for(name);
  if (points.empty()) throw DataError("store has no cells for " + name);
  const double mpx = static_cast<double>(seq.size()) * seq.width() * seq.height() / 1e6;

  MeasureOptions opts;
  opts.ci = config.ci;

  std::vector<FeatureVector> features;
  Workload feat;
  feat.label = "features:" + name;
  feat.workload_class = "features";
  feat.modeled_seconds = config.cost.features_seconds(mpx);
  feat.action = [&] {
    features = sequence_features(seq, config.crf_subset, config.features);
    return 0;
  };
  const double e_feat = measure_command(meter, executor, feat, opts).e_net;

  FrameRatePolicy policy;
  policy.crfs = config.crf_subset;
  double e_classify = 0.0;
  for (const auto& v : features) {
    int fps = 0;
    Workload cls;
    cls.label = "classify:" + name + ":" + std::to_string(v.crf);
    cls.workload_class = "classify";
    cls.modeled_seconds = config.cost.classify_s;
    cls.action = [&] {
      fps = predict_frame_rate(model, v);
      return 0;
    };
    e_classify += measure_command(meter, executor, cls, opts).e_net;
    // A class missing from the ladder falls back to the next measured rate up.
    Rational rate = config.native_rate();
    for (const auto& f : config.ladder) {
      if (!(f < Rational(fps)) && f < rate) rate = f;
    }
    policy.rates.push_back(rate);
  }
  e_classify /= static_cast<double>(features.size());
  return {name, policy.to_string(),
          delta_e_percent(points, policy, config.native_rate(), e_feat, e_classify)};
}

}  // namespace eafrs
