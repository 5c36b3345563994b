// Deterministic stand-in codec for hermetic runs.
//   encode --mode identity|quantize --crf N --in x.y4m --out x.bin
//   decode --in x.bin --out x.y4m
// quantize: samples snapped to a CRF-dependent step, then deflated.
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eafrs/video_io.hpp"

namespace {

constexpr char kMagic[4] = {'E', 'A', 'F', 'Q'};

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const unsigned char* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

double quant_step(int crf) { return std::pow(2.0, (crf - 12) / 6.0); }

void quantize_plane(eafrs::Plane& plane, double step, std::uint16_t max_value) {
  for (auto& s : plane.samples) {
    const double q = std::round(s / step) * step;
    s = static_cast<std::uint16_t>(std::clamp(q, 0.0, static_cast<double>(max_value)));
  }
}

int encode(const std::string& mode, int crf, const std::filesystem::path& in,
           const std::filesystem::path& out) {
  if (mode == "identity") {
    std::filesystem::copy_file(in, out, std::filesystem::copy_options::overwrite_existing);
    return 0;
  }
  const eafrs::VideoSequence src = eafrs::read_y4m(in);
  const double step = quant_step(crf);
  std::vector<eafrs::Frame> frames = src.frames();
  if (step > 1.0) {
    const std::uint16_t max_value = src.format().max_value();
    for (auto& f : frames) {
      quantize_plane(f.luma, step, max_value);
      quantize_plane(f.chroma_u, step, max_value);
      quantize_plane(f.chroma_v, step, max_value);
    }
  }
  const eafrs::VideoSequence q(src.name(), src.frame_rate(), std::move(frames),
                               src.header_tags());
  const auto tmp = std::filesystem::path(out.string() + ".raw");
  eafrs::write_y4m(q, tmp);
  const auto raw = read_bytes(tmp);
  std::filesystem::remove(tmp);

  uLongf packed_size = compressBound(raw.size());
  std::vector<unsigned char> packed(sizeof(kMagic) + 8 + packed_size);
  std::memcpy(packed.data(), kMagic, sizeof(kMagic));
  const std::uint64_t n = raw.size();
  std::memcpy(packed.data() + sizeof(kMagic), &n, 8);
  if (compress2(packed.data() + sizeof(kMagic) + 8, &packed_size, raw.data(), raw.size(),
                Z_BEST_COMPRESSION) != Z_OK) {
    throw std::runtime_error("deflate failed");
  }
  write_bytes(out, packed.data(), sizeof(kMagic) + 8 + packed_size);
  return 0;
}

int decode(const std::filesystem::path& in, const std::filesystem::path& out) {
  const auto data = read_bytes(in);
  if (data.size() < sizeof(kMagic) + 8 || std::memcmp(data.data(), kMagic, 4) != 0) {
    write_bytes(out, data.data(), data.size());
    return 0;
  }
  std::uint64_t n = 0;
  std::memcpy(&n, data.data() + sizeof(kMagic), 8);
  std::vector<unsigned char> raw(n);
  uLongf raw_size = n;
  if (uncompress(raw.data(), &raw_size, data.data() + sizeof(kMagic) + 8,
                 data.size() - sizeof(kMagic) - 8) != Z_OK ||
      raw_size != n) {
    throw std::runtime_error("corrupt stream " + in.string());
  }
  write_bytes(out, raw.data(), raw.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eafrs stub codec"};
  app.require_subcommand(1);
  std::string mode = "quantize", in, out;
  int crf = 23;
  auto* enc = app.add_subcommand("encode", "encode a Y4M file");
  enc->add_option("--mode", mode)->check(CLI::IsMember({"identity", "quantize"}));
  enc->add_option("--crf", crf)->check(CLI::Range(0, 51));
  enc->add_option("--in", in)->required();
  enc->add_option("--out", out)->required();
  auto* dec = app.add_subcommand("decode", "decode a stub stream");
  dec->add_option("--in", in)->required();
  dec->add_option("--out", out)->required();
  CLI11_PARSE(app, argc, argv);
  try {
    if (*enc) return encode(mode, crf, in, out);
    return decode(in, out);
  } catch (const std::exception& e) {
    std::cerr << "stub codec: " << e.what() << "\n";
    return 2;
  }
}
