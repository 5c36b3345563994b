#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

#include "eafrs/video_io.hpp"

namespace eafrs {

/// Quality in dB; +infinity when the compared luma is identical.
struct QualityScore {
  double value_db = 0.0;
  /// Frame comparisons on the common time grid (ticks for mPSNR).
  std::size_t n_compared = 0;

  bool is_lossless() const {
    return value_db == std::numeric_limits<double>::infinity();
  }
};

/// Luma PSNR with MSE pooled over every sample of every frame.
QualityScore psnr(const VideoSequence& ref, const VideoSequence& test);

/// Matched PSNR: both sequences are held on the LCM(f_ref, f_test) tick grid
/// and the luma squared error is pooled over every tick of the common
/// duration before the log. Equals psnr() for integer rate ratios.
QualityScore mpsnr(const VideoSequence& ref, const VideoSequence& test);

/// 10 log10(max^2 / mse); +inf for mse == 0.
double psnr_from_mse(double mse, std::uint16_t max_value);

}  // namespace eafrs
