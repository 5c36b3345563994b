#include "eafrs/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

constexpr std::string_view kMagic = "YUV4MPEG2";

struct ChromaTag {
  std::string_view tag;
  ChromaSubsampling chroma;
  int bit_depth;
};

constexpr ChromaTag kChromaTags[] = {
    {"420jpeg", ChromaSubsampling::k420, 8},
    {"420paldv", ChromaSubsampling::k420, 8},
    {"420mpeg2", ChromaSubsampling::k420, 8},
    {"420", ChromaSubsampling::k420, 8},
    {"422", ChromaSubsampling::k422, 8},
    {"444", ChromaSubsampling::k444, 8},
    {"420p10", ChromaSubsampling::k420, 10},
    {"422p10", ChromaSubsampling::k422, 10},
    {"444p10", ChromaSubsampling::k444, 10},
};

std::string_view canonical_chroma_tag(const PixelFormat& f) {
  if (f.bit_depth == 8) {
    switch (f.chroma) {
      case ChromaSubsampling::k420: return "420jpeg";
      case ChromaSubsampling::k422: return "422";
      case ChromaSubsampling::k444: return "444";
    }
  }
  switch (f.chroma) {
    case ChromaSubsampling::k420: return "420p10";
    case ChromaSubsampling::k422: return "422p10";
    case ChromaSubsampling::k444: return "444p10";
  }
  return "420jpeg";
}

PixelFormat parse_chroma_tag(std::string_view tag) {
  for (const auto& entry : kChromaTags) {
    if (entry.tag == tag) return PixelFormat{entry.chroma, entry.bit_depth};
  }
  throw DataError("unsupported chroma tag 'C" + std::string(tag) + "'");
}

void validate_format(const PixelFormat& f) {
  if (f.bit_depth != 8 && f.bit_depth != 10) {
    throw PreconditionError("bit depth must be 8 or 10, got " +
                            std::to_string(f.bit_depth));
  }
}

struct ParsedHeader {
  Y4mInfo info;
  std::vector<std::string> tags;
  std::size_t header_bytes = 0;
};

ParsedHeader parse_header(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  if (in.eof()) throw DataError(origin + ": unterminated stream header");
  std::istringstream tokens(line);
  std::string magic;
  tokens >> magic;
  if (magic != kMagic) throw DataError(origin + ": missing YUV4MPEG2 magic");

  ParsedHeader out;
  out.header_bytes = line.size() + 1;
  PixelFormat format{ChromaSubsampling::k420, 8};
  bool have_w = false, have_h = false, have_f = false;
  std::string tok;
  while (tokens >> tok) {
    out.tags.push_back(tok);
    const char key = tok[0];
    const std::string value = tok.substr(1);
    try {
      switch (key) {
        case 'W': out.info.width = std::stoi(value); have_w = true; break;
        case 'H': out.info.height = std::stoi(value); have_h = true; break;
        case 'F': out.info.frame_rate = Rational::parse(value); have_f = true; break;
        case 'C': format = parse_chroma_tag(value); break;
        default: break;  // I, A, X tags are carried through untouched
      }
    } catch (const std::logic_error&) {
      throw DataError(origin + ": malformed header tag '" + tok + "'");
    }
  }
  if (!have_w || !have_h || !have_f) {
    throw DataError(origin + ": header lacks W, H or F tag");
  }
  if (out.info.width <= 0 || out.info.height <= 0 ||
      !out.info.frame_rate.is_positive()) {
    throw DataError(origin + ": malformed header geometry or rate");
  }
  out.info.format = format;
  return out;
}

void read_plane(const std::vector<char>& buf, std::size_t& pos, Plane& plane,
                const PixelFormat& format) {
  const std::size_t n = plane.size();
  if (format.bytes_per_sample() == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      plane.samples[i] = static_cast<unsigned char>(buf[pos + i]);
    }
    pos += n;
    return;
  }
  const std::uint16_t max = format.max_value();
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = static_cast<unsigned char>(buf[pos + 2 * i]);
    const auto hi = static_cast<unsigned char>(buf[pos + 2 * i + 1]);
    const auto v = static_cast<std::uint16_t>(lo | (hi << 8));
    if (v > max) throw DataError("sample exceeds bit depth");
    plane.samples[i] = v;
  }
  pos += 2 * n;
}

Frame decode_frame(const std::vector<char>& buf, int width, int height,
                   const PixelFormat& format) {
  Frame f = Frame::filled(width, height, format, 0, 0);
  std::size_t pos = 0;
  read_plane(buf, pos, f.luma, format);
  read_plane(buf, pos, f.chroma_u, format);
  read_plane(buf, pos, f.chroma_v, format);
  return f;
}

void append_plane(std::vector<char>& out, const Plane& plane,
                  const PixelFormat& format) {
  if (format.bytes_per_sample() == 1) {
    for (auto s : plane.samples) out.push_back(static_cast<char>(s & 0xFF));
    return;
  }
  for (auto s : plane.samples) {
    out.push_back(static_cast<char>(s & 0xFF));
    out.push_back(static_cast<char>((s >> 8) & 0xFF));
  }
}

std::vector<char> encode_frame(const Frame& f) {
  std::vector<char> out;
  out.reserve(f.format.frame_bytes(f.width(), f.height()));
  append_plane(out, f.luma, f.format);
  append_plane(out, f.chroma_u, f.format);
  append_plane(out, f.chroma_v, f.format);
  return out;
}

std::string rate_tag(const Rational& r) {
  return "F" + std::to_string(r.num()) + ":" + std::to_string(r.den());
}

// Deterministic uniform double in [0, 1), independent of the standard
// library's distribution implementations.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Wave {
  double fx, fy;  // cycles per pixel
  double amplitude;
  double phase;
  double speed;   // drift in px/frame along (fx, fy) direction
};

// Smooth texture that wraps seamlessly on a W x H torus.
std::vector<Wave> periodic_waves(std::mt19937_64& rng, int w, int h, int count,
                                 double amplitude) {
  std::vector<Wave> waves;
  for (int k = 0; k < count; ++k) {
    const int kx = 1 + static_cast<int>(uniform01(rng) * 3.0);
    const int ky = static_cast<int>(uniform01(rng) * 4.0);
    waves.push_back({static_cast<double>(kx) / w, static_cast<double>(ky) / h,
                     amplitude * (0.5 + 0.5 * uniform01(rng)),
                     2.0 * std::numbers::pi * uniform01(rng), 0.0});
  }
  return waves;
}

double eval_waves(const std::vector<Wave>& waves, double x, double y) {
  double v = 0.0;
  for (const auto& w : waves) {
    v += w.amplitude *
         std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
  }
  return v;
}

std::uint16_t to_sample(double value8, const PixelFormat& format) {
  const double scale = static_cast<double>(1 << (format.bit_depth - 8));
  const double v = std::round(value8 * scale);
  return static_cast<std::uint16_t>(
      std::clamp(v, 0.0, static_cast<double>(format.max_value())));
}

}  // namespace

int PixelFormat::chroma_width(int luma_width) const {
  return chroma == ChromaSubsampling::k444 ? luma_width : (luma_width + 1) / 2;
}

int PixelFormat::chroma_height(int luma_height) const {
  return chroma == ChromaSubsampling::k420 ? (luma_height + 1) / 2
                                            : luma_height;
}

std::size_t PixelFormat::frame_bytes(int width, int height) const {
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma_plane =
      static_cast<std::size_t>(chroma_width(width)) * chroma_height(height);
  return (luma + 2 * chroma_plane) * bytes_per_sample();
}

Frame Frame::filled(int width, int height, PixelFormat format,
                    std::uint16_t luma_fill, std::uint16_t chroma_fill) {
  Frame f;
  f.format = format;
  f.luma = Plane(width, height, luma_fill);
  f.chroma_u = Plane(format.chroma_width(width), format.chroma_height(height),
                     chroma_fill);
  f.chroma_v = f.chroma_u;
  return f;
}

VideoSequence::VideoSequence(std::string name, Rational frame_rate,
                             std::vector<Frame> frames,
                             std::vector<std::string> header_tags)
    : name_(std::move(name)),
      frame_rate_(frame_rate),
      frames_(std::move(frames)),
      header_tags_(std::move(header_tags)) {
  if (frames_.empty()) throw DataError("sequence '" + name_ + "' has no frames");
  if (!frame_rate_.is_positive()) {
    throw PreconditionError("frame rate must be positive");
  }
  const Frame& first = frames_.front();
  validate_format(first.format);
  if (first.width() <= 0 || first.height() <= 0) {
    throw PreconditionError("zero-area frame geometry");
  }
  const std::uint16_t max = first.format.max_value();
  for (const auto& f : frames_) {
    if (f.format != first.format || f.width() != first.width() ||
        f.height() != first.height() ||
        f.chroma_u.width != first.format.chroma_width(first.width()) ||
        f.chroma_u.height != first.format.chroma_height(first.height()) ||
        f.chroma_v.width != f.chroma_u.width ||
        f.chroma_v.height != f.chroma_u.height) {
      throw DataError("sequence '" + name_ + "' mixes frame geometries");
    }
    for (const Plane* p : {&f.luma, &f.chroma_u, &f.chroma_v}) {
      if (p->samples.size() != static_cast<std::size_t>(p->width) * p->height) {
        throw DataError("plane buffer size does not match its geometry");
      }
      if (std::any_of(p->samples.begin(), p->samples.end(),
                      [max](std::uint16_t s) { return s > max; })) {
        throw DataError("sample exceeds bit depth");
      }
    }
  }
}

double VideoSequence::duration_seconds() const {
  return static_cast<double>(frames_.size()) / frame_rate_.to_double();
}

VideoSequence VideoSequence::with_frame_rate(Rational rate) const {
  return VideoSequence(name_, rate, frames_, header_tags_);
}

VideoSequence VideoSequence::renamed(std::string name) const {
  return VideoSequence(std::move(name), frame_rate_, frames_, header_tags_);
}

VideoSequence read_y4m(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ParsedHeader header = parse_header(in, path.string());
  const Y4mInfo& info = header.info;
  const std::size_t payload = info.format.frame_bytes(info.width, info.height);

  std::vector<Frame> frames;
  std::vector<char> buf(payload);
  std::string marker;
  while (std::getline(in, marker)) {
    if (marker.rfind("FRAME", 0) != 0) {
      throw DataError(path.string() + ": expected FRAME marker");
    }
    in.read(buf.data(), static_cast<std::streamsize>(payload));
    if (static_cast<std::size_t>(in.gcount()) != payload) {
      throw DataError(path.string() + ": truncated frame payload");
    }
    frames.push_back(decode_frame(buf, info.width, info.height, info.format));
  }
  if (frames.empty()) throw DataError(path.string() + ": no frames");
  return VideoSequence(path.stem().string(), info.frame_rate, std::move(frames),
                       std::move(header.tags));
}

Y4mInfo probe_y4m(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ParsedHeader header = parse_header(in, path.string());
  const std::size_t payload =
      header.info.format.frame_bytes(header.info.width, header.info.height);
  const auto file_size = std::filesystem::file_size(path);
  // Plain "FRAME\n" markers; streams with frame parameters fall back to a scan.
  std::size_t pos = header.header_bytes;
  std::size_t count = 0;
  std::string marker;
  in.seekg(static_cast<std::streamoff>(pos));
  while (pos < file_size && std::getline(in, marker)) {
    if (marker.rfind("FRAME", 0) != 0) {
      throw DataError(path.string() + ": expected FRAME marker");
    }
    pos += marker.size() + 1 + payload;
    if (pos > file_size) throw DataError(path.string() + ": truncated frame payload");
    in.seekg(static_cast<std::streamoff>(pos));
    ++count;
  }
  if (count == 0) throw DataError(path.string() + ": no frames");
  header.info.frame_count = count;
  return header.info;
}

void write_y4m(const VideoSequence& seq, const std::filesystem::path& path) {
  std::vector<std::string> tags = seq.header_tags();
  if (tags.empty()) tags = {"W", "H", "F", "Ip", "A1:1", "C"};

  bool have_w = false, have_h = false, have_f = false, have_c = false;
  for (auto& tag : tags) {
    switch (tag[0]) {
      case 'W': tag = "W" + std::to_string(seq.width()); have_w = true; break;
      case 'H': tag = "H" + std::to_string(seq.height()); have_h = true; break;
      case 'F': tag = rate_tag(seq.frame_rate()); have_f = true; break;
      case 'C': {
        bool keep = false;
        try {
          keep = tag.size() > 1 && parse_chroma_tag(tag.substr(1)) == seq.format();
        } catch (const DataError&) {
        }
        if (!keep) tag = "C" + std::string(canonical_chroma_tag(seq.format()));
        have_c = true;
        break;
      }
      default: break;
    }
  }
  std::string header(kMagic);
  if (!have_w) header += " W" + std::to_string(seq.width());
  if (!have_h) header += " H" + std::to_string(seq.height());
  if (!have_f) header += " " + rate_tag(seq.frame_rate());
  for (const auto& tag : tags) header += " " + tag;
  if (!have_c) header += " C" + std::string(canonical_chroma_tag(seq.format()));
  header += "\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& frame : seq.frames()) {
    out.write("FRAME\n", 6);
    const auto bytes = encode_frame(frame);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  out.flush();
  if (!out) throw DataError("I/O failure writing " + path.string());
}

VideoSequence read_raw_yuv(const std::filesystem::path& path, int width,
                           int height, Rational frame_rate, PixelFormat format) {
  validate_format(format);
  if (width <= 0 || height <= 0) throw PreconditionError("zero-area geometry");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw DataError("cannot stat " + path.string());
  const std::size_t frame_bytes = format.frame_bytes(width, height);
  if (size == 0 || size % frame_bytes != 0) {
    throw DataError(path.string() + ": size " + std::to_string(size) +
                    " is not a multiple of the frame size " +
                    std::to_string(frame_bytes));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Frame> frames;
  std::vector<char> buf(frame_bytes);
  for (std::size_t i = 0; i < size / frame_bytes; ++i) {
    in.read(buf.data(), static_cast<std::streamsize>(frame_bytes));
    if (static_cast<std::size_t>(in.gcount()) != frame_bytes) {
      throw DataError(path.string() + ": short read");
    }
    frames.push_back(decode_frame(buf, width, height, format));
  }
  return VideoSequence(path.stem().string(), frame_rate, std::move(frames));
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "constant") return SyntheticKind::kConstant;
  if (name == "global_translation") return SyntheticKind::kGlobalTranslation;
  if (name == "local_motion") return SyntheticKind::kLocalMotion;
  if (name == "dynamic_texture") return SyntheticKind::kDynamicTexture;
  throw PreconditionError("unknown synthetic kind '" + name + "'");
}

VideoSequence generate_synthetic(SyntheticKind kind,
                                 const SyntheticParams& p) {
  validate_format(p.format);
  if (p.width <= 0 || p.height <= 0) {
    throw PreconditionError("zero-area geometry");
  }
  if (p.frames < 1) throw PreconditionError("synthetic sequence needs frames");

  const std::uint16_t neutral =
      static_cast<std::uint16_t>(1u << (p.format.bit_depth - 1));
  std::mt19937_64 rng(p.seed);
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(p.frames));

  if (kind == SyntheticKind::kConstant) {
    if (p.value > p.format.max_value()) {
      throw PreconditionError("constant value exceeds bit depth");
    }
    for (int i = 0; i < p.frames; ++i) {
      frames.push_back(Frame::filled(p.width, p.height, p.format, p.value, p.value));
    }
    return VideoSequence(p.name, p.frame_rate, std::move(frames));
  }

  const auto background = periodic_waves(rng, p.width, p.height, 4, 25.0);
  Frame base = Frame::filled(p.width, p.height, p.format, 0, neutral);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      base.luma.at(x, y) = to_sample(128.0 + eval_waves(background, x, y), p.format);
    }
  }

  switch (kind) {
    case SyntheticKind::kGlobalTranslation: {
      for (int i = 0; i < p.frames; ++i) {
        const auto shift = static_cast<long>(std::llround(i * p.motion));
        Frame f = base;
        for (int y = 0; y < p.height; ++y) {
          for (int x = 0; x < p.width; ++x) {
            long sx = (x - shift) % p.width;
            if (sx < 0) sx += p.width;
            f.luma.at(x, y) = base.luma.at(static_cast<int>(sx), y);
          }
        }
        frames.push_back(std::move(f));
      }
      break;
    }
    case SyntheticKind::kLocalMotion: {
      const int size = std::clamp(p.object_size, 1, std::min(p.width, p.height));
      const int top = (p.height - size) / 2;
      const double period = 4.0 + 4.0 * uniform01(rng);
      for (int i = 0; i < p.frames; ++i) {
        Frame f = base;
        const double left = i * p.motion;
        for (int oy = 0; oy < size; ++oy) {
          for (int ox = 0; ox < size; ++ox) {
            long x = std::lround(left) + ox;
            x %= p.width;
            if (x < 0) x += p.width;
            const double v =
                128.0 + 90.0 * std::sin(2.0 * std::numbers::pi * ox / period) *
                            std::cos(2.0 * std::numbers::pi * oy / period);
            f.luma.at(static_cast<int>(x), top + oy) = to_sample(v, p.format);
          }
        }
        frames.push_back(std::move(f));
      }
      break;
    }
    case SyntheticKind::kDynamicTexture: {
      std::vector<Wave> waves;
      for (int k = 0; k < 8; ++k) {
        const double theta = 2.0 * std::numbers::pi * uniform01(rng);
        const double freq = 1.0 / (6.0 + 10.0 * uniform01(rng));
        waves.push_back({freq * std::cos(theta), freq * std::sin(theta),
                         10.0 + 10.0 * uniform01(rng),
                         2.0 * std::numbers::pi * uniform01(rng),
                         p.motion * (0.5 + uniform01(rng))});
      }
      for (int i = 0; i < p.frames; ++i) {
        Frame f = Frame::filled(p.width, p.height, p.format, 0, neutral);
        for (int y = 0; y < p.height; ++y) {
          for (int x = 0; x < p.width; ++x) {
            double v = 128.0;
            for (const auto& w : waves) {
              const double norm = std::hypot(w.fx, w.fy);
              const double along = (w.fx * x + w.fy * y) / norm - w.speed * i;
              v += w.amplitude *
                   std::sin(2.0 * std::numbers::pi * norm * along + w.phase);
            }
            f.luma.at(x, y) = to_sample(v, p.format);
          }
        }
        frames.push_back(std::move(f));
      }
      break;
    }
    case SyntheticKind::kConstant:
      break;
  }
  return VideoSequence(p.name, p.frame_rate, std::move(frames));
}

}  // namespace eafrs
