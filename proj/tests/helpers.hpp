#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "eafrs/video_io.hpp"

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("eafrs-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Sequence whose luma sample (x, y) of frame i is `fn(i, x, y)`; chroma
/// is mid-grey.
inline eafrs::VideoSequence make_sequence(
    int width, int height, int frames, eafrs::Rational rate,
    const std::function<int(int, int, int)>& fn,
    eafrs::PixelFormat format = {eafrs::ChromaSubsampling::k420, 8}) {
  std::vector<eafrs::Frame> out;
  const auto neutral = static_cast<std::uint16_t>(1u << (format.bit_depth - 1));
  for (int i = 0; i < frames; ++i) {
    eafrs::Frame f = eafrs::Frame::filled(width, height, format, 0, neutral);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) f.luma.at(x, y) = static_cast<std::uint16_t>(fn(i, x, y));
    }
    out.push_back(std::move(f));
  }
  return eafrs::VideoSequence("test", rate, std::move(out));
}

/// 1-row-per-frame sequence from explicit luma values.
inline eafrs::VideoSequence from_rows(const std::vector<std::vector<int>>& frames,
                                      eafrs::Rational rate = eafrs::Rational(120)) {
  const int w = static_cast<int>(frames.front().size());
  return make_sequence(w, 1, static_cast<int>(frames.size()), rate,
                       [&](int i, int x, int) { return frames[i][x]; },
                       {eafrs::ChromaSubsampling::k444, 8});
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  out << data;
}

}  // namespace testutil
