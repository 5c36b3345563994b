#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eafrs/rational.hpp"

namespace eafrs {

enum class ChromaSubsampling { k420, k422, k444 };

struct PixelFormat {
  ChromaSubsampling chroma = ChromaSubsampling::k420;
  int bit_depth = 8;

  std::uint16_t max_value() const {
    return static_cast<std::uint16_t>((1u << bit_depth) - 1u);
  }
  int bytes_per_sample() const { return bit_depth > 8 ? 2 : 1; }
  /// Chroma plane size for a luma plane of the given size.
  int chroma_width(int luma_width) const;
  int chroma_height(int luma_height) const;
  /// Bytes of one planar frame (Y, U, V) in file layout.
  std::size_t frame_bytes(int width, int height) const;

  friend bool operator==(const PixelFormat&, const PixelFormat&) = default;
};

/// One sample plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> samples;

  Plane() = default;
  Plane(int w, int h, std::uint16_t fill = 0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  std::uint16_t at(int x, int y) const {
    return samples[static_cast<std::size_t>(y) * width + x];
  }
  std::uint16_t& at(int x, int y) {
    return samples[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return samples.size(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

struct Frame {
  PixelFormat format;
  Plane luma;
  Plane chroma_u;
  Plane chroma_v;

  int width() const { return luma.width; }
  int height() const { return luma.height; }

  /// Allocates a frame with every plane filled with `luma_fill`/`chroma_fill`.
  static Frame filled(int width, int height, PixelFormat format,
                      std::uint16_t luma_fill, std::uint16_t chroma_fill);

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Immutable sequence of equally-shaped frames at an exact frame rate.
///
/// `header_tags` keeps the YUV4MPEG2 stream-header tokens in their original
/// order so that reading and re-writing a file is byte-exact; W/H/F/C tokens
/// are regenerated from the actual geometry on write.
class VideoSequence {
 public:
  VideoSequence(std::string name, Rational frame_rate, std::vector<Frame> frames,
                std::vector<std::string> header_tags = {});

  const std::string& name() const { return name_; }
  const Rational& frame_rate() const { return frame_rate_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const Frame& frame(std::size_t i) const { return frames_.at(i); }
  std::size_t size() const { return frames_.size(); }
  int width() const { return frames_.front().width(); }
  int height() const { return frames_.front().height(); }
  const PixelFormat& format() const { return frames_.front().format; }
  const std::vector<std::string>& header_tags() const { return header_tags_; }

  /// Duration in seconds, N / f.
  double duration_seconds() const;

  /// Same content under a different name / frame rate.
  VideoSequence with_frame_rate(Rational rate) const;
  VideoSequence renamed(std::string name) const;

 private:
  std::string name_;
  Rational frame_rate_;
  std::vector<Frame> frames_;
  std::vector<std::string> header_tags_;
};

VideoSequence read_y4m(const std::filesystem::path& path);
void write_y4m(const VideoSequence& seq, const std::filesystem::path& path);

/// Header-only inspection (no payload decoding).
struct Y4mInfo {
  int width = 0;
  int height = 0;
  Rational frame_rate;
  PixelFormat format;
  std::size_t frame_count = 0;
};
Y4mInfo probe_y4m(const std::filesystem::path& path);

/// Headerless planar YUV; 10-bit samples are 16-bit little-endian.
VideoSequence read_raw_yuv(const std::filesystem::path& path, int width,
                           int height, Rational frame_rate, PixelFormat format);

enum class SyntheticKind { kConstant, kGlobalTranslation, kLocalMotion,
                           kDynamicTexture };

SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticParams {
  int width = 64;
  int height = 64;
  int frames = 8;
  Rational frame_rate = Rational(120);
  PixelFormat format{};
  /// Pixels per frame (translation, object speed, texture drift).
  double motion = 1.0;
  std::uint64_t seed = 1;
  /// Fill value for kConstant.
  std::uint16_t value = 128;
  /// Object edge length for kLocalMotion, in pixels.
  int object_size = 16;
  std::string name = "synthetic";
};

/// Deterministic content generator; a pure function of (kind, params).
///
/// - constant: every sample equals `value`.
/// - global_translation: a seeded smooth texture; frame i is frame 0 shifted
///   right by round(i * motion) pixels with wrap-around.
/// - local_motion: static seeded background with a textured square that moves
///   horizontally by `motion` px/frame (wrapping).
/// - dynamic_texture: superposition of drifting seeded sinusoids, each with its
///   own direction, so the whole frame moves as an irregular continuum.
VideoSequence generate_synthetic(SyntheticKind kind,
                                 const SyntheticParams& params);

}  // namespace eafrs
