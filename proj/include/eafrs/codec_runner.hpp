#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "eafrs/energy.hpp"
#include "eafrs/rational.hpp"

namespace eafrs {

/// Command line with {input} {output} {crf} {fps} {width} {height}
/// placeholders, e.g. "ffmpeg -y -i {input} -c:v libx265 -crf {crf} {output}".
class CommandTemplate {
 public:
  CommandTemplate() = default;
  explicit CommandTemplate(std::string text);

  const std::string& text() const { return text_; }
  /// Substitutes every placeholder; unknown or unresolved names are errors.
  std::string expand(const std::map<std::string, std::string>& values) const;

 private:
  std::string text_;
};

struct EncodeResult {
  std::filesystem::path bitstream_path;
  double bitrate_kbps = 0.0;
  double wall_time_s = 0.0;
  int crf = 0;
  Rational frame_rate;
};

struct DecodeResult {
  std::filesystem::path decoded_path;
  double wall_time_s = 0.0;
};

/// Modeled runtime used by simulated meters: seconds per megapixel of input,
/// scaled up for low CRF (more encoder effort at high quality).
struct CostModel {
  double encode_s_per_mpx = 0.02;
  double decode_s_per_mpx = 0.004;
  double features_s_per_mpx = 0.004;
  double classify_s = 0.001;
  /// seconds *= 1 + crf_slope * (51 - crf) / 51 for encodes.
  double crf_slope = 1.0;

  double encode_seconds(double megapixels, int crf) const;
  double decode_seconds(double megapixels) const;
  double features_seconds(double megapixels) const;
};

/// 8 * bytes / (frames / fps) / 1000.
double bitrate_kbps(std::uintmax_t bytes, std::size_t frames, const Rational& fps);

/// Workload that runs the encoder once on `input`, writing `output`.
Workload make_encode_workload(const CommandTemplate& tmpl,
                              const std::filesystem::path& input,
                              const std::filesystem::path& output, int crf,
                              const CostModel& cost = {});

Workload make_decode_workload(const CommandTemplate& tmpl,
                              const std::filesystem::path& bitstream,
                              const std::filesystem::path& output,
                              double megapixels, const CostModel& cost = {});

/// Harvests bitrate from the bitstream written by an encode workload.
EncodeResult harvest_encode(const std::filesystem::path& input,
                            const std::filesystem::path& bitstream, int crf,
                            double wall_time_s);

/// Runs the encoder once and writes the JSON sidecar `<bitstream>.json`.
EncodeResult run_encode(const CommandTemplate& tmpl,
                        const std::filesystem::path& seq_path, int crf,
                        const std::filesystem::path& bitstream,
                        Executor& executor);

DecodeResult run_decode(const CommandTemplate& tmpl,
                        const std::filesystem::path& bitstream,
                        const std::filesystem::path& decoded, Executor& executor);

void write_encode_sidecar(const EncodeResult& r, const std::filesystem::path& path);

}  // namespace eafrs
