#include "eafrs/codec_runner.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "eafrs/error.hpp"
#include "eafrs/video_io.hpp"

namespace eafrs {
namespace {

const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> names = {"input", "output", "crf",
                                              "fps",   "width",  "height"};
  return names;
}

void check_crf(int crf) {
  if (crf < 0 || crf > 51) {
    throw PreconditionError("CRF " + std::to_string(crf) + " outside [0, 51]");
  }
}

}  // namespace

CommandTemplate::CommandTemplate(std::string text) : text_(std::move(text)) {
  // Validate placeholder names eagerly.
  std::map<std::string, std::string> probe;
  for (const auto& name : known_placeholders()) probe[name] = "";
  expand(probe);
}

std::string CommandTemplate::expand(
    const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(text_.size());
  for (std::size_t i = 0; i < text_.size(); ++i) {
    const char c = text_[i];
    if (c == '{' && i + 1 < text_.size() && text_[i + 1] == '{') {
      out += '{';
      ++i;
      continue;
    }
    if (c == '}' && i + 1 < text_.size() && text_[i + 1] == '}') {
      out += '}';
      ++i;
      continue;
    }
    if (c != '{') {
      out += c;
      continue;
    }
    const auto close = text_.find('}', i);
    if (close == std::string::npos) {
      throw PreconditionError("unterminated placeholder in '" + text_ + "'");
    }
    const std::string name = text_.substr(i + 1, close - i - 1);
    if (!known_placeholders().count(name)) {
      throw PreconditionError("unknown placeholder {" + name + "} in '" + text_ + "'");
    }
    const auto it = values.find(name);
    if (it == values.end()) {
      throw PreconditionError("placeholder {" + name + "} has no value");
    }
    out += it->second;
    i = close;
  }
  return out;
}

double CostModel::encode_seconds(double megapixels, int crf) const {
  return encode_s_per_mpx * megapixels * (1.0 + crf_slope * (51.0 - crf) / 51.0);
}

double CostModel::decode_seconds(double megapixels) const {
  return decode_s_per_mpx * megapixels;
}

double CostModel::features_seconds(double megapixels) const {
  return features_s_per_mpx * megapixels;
}

double bitrate_kbps(std::uintmax_t bytes, std::size_t frames, const Rational& fps) {
  if (frames == 0) throw PreconditionError("bitrate needs a non-empty sequence");
  const double duration = static_cast<double>(frames) / fps.to_double();
  return 8.0 * static_cast<double>(bytes) / duration / 1000.0;
}

Workload make_encode_workload(const CommandTemplate& tmpl,
                              const std::filesystem::path& input,
                              const std::filesystem::path& output, int crf,
                              const CostModel& cost) {
  check_crf(crf);
  const Y4mInfo info = probe_y4m(input);
  const std::string cmd = tmpl.expand({{"input", input.string()},
                                       {"output", output.string()},
                                       {"crf", std::to_string(crf)},
                                       {"fps", info.frame_rate.to_string()},
                                       {"width", std::to_string(info.width)},
                                       {"height", std::to_string(info.height)}});
  const double mpx = static_cast<double>(info.frame_count) * info.width *
                     info.height / 1e6;
  return shell_workload(cmd, "encode", cost.encode_seconds(mpx, crf));
}

Workload make_decode_workload(const CommandTemplate& tmpl,
                              const std::filesystem::path& bitstream,
                              const std::filesystem::path& output,
                              double megapixels, const CostModel& cost) {
  if (!std::filesystem::exists(bitstream)) {
    throw DataError("bitstream not found: " + bitstream.string());
  }
  const std::string cmd =
      tmpl.expand({{"input", bitstream.string()}, {"output", output.string()}});
  return shell_workload(cmd, "decode", cost.decode_seconds(megapixels));
}

EncodeResult harvest_encode(const std::filesystem::path& input,
                            const std::filesystem::path& bitstream, int crf,
                            double wall_time_s) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(bitstream, ec);
  if (ec || size == 0) {
    throw SubprocessError("encoder produced no output at " + bitstream.string(), 0);
  }
  const Y4mInfo info = probe_y4m(input);
  EncodeResult r;
  r.bitstream_path = bitstream;
  r.bitrate_kbps = bitrate_kbps(size, info.frame_count, info.frame_rate);
  r.wall_time_s = wall_time_s;
  r.crf = crf;
  r.frame_rate = info.frame_rate;
  return r;
}

EncodeResult run_encode(const CommandTemplate& tmpl,
                        const std::filesystem::path& seq_path, int crf,
                        const std::filesystem::path& bitstream,
                        Executor& executor) {
  const Workload w = make_encode_workload(tmpl, seq_path, bitstream, crf);
  std::filesystem::remove(bitstream);
  const RunOutcome run = executor.run(w);
  if (run.exit_code != 0) {
    throw SubprocessError("encoder exited with status " + std::to_string(run.exit_code) +
                              ": " + w.label,
                          run.exit_code);
  }
  EncodeResult r = harvest_encode(seq_path, bitstream, crf, run.seconds);
  write_encode_sidecar(r, bitstream.string() + ".json");
  return r;
}

DecodeResult run_decode(const CommandTemplate& tmpl,
                        const std::filesystem::path& bitstream,
                        const std::filesystem::path& decoded, Executor& executor) {
  const Workload w = make_decode_workload(tmpl, bitstream, decoded, 0.0);
  const RunOutcome run = executor.run(w);
  if (run.exit_code != 0) {
    throw SubprocessError("decoder exited with status " + std::to_string(run.exit_code) +
                              ": " + w.label,
                          run.exit_code);
  }
  if (!std::filesystem::exists(decoded)) {
    throw SubprocessError("decoder produced no output at " + decoded.string(), 0);
  }
  return {decoded, run.seconds};
}

void write_encode_sidecar(const EncodeResult& r, const std::filesystem::path& path) {
  const nlohmann::ordered_json j = {{"crf", r.crf},
                                    {"fps", r.frame_rate.to_string()},
                                    {"bitrate_kbps", r.bitrate_kbps},
                                    {"wall_s", r.wall_time_s}};
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace eafrs
