#pragma once

#include <cstdint>
#include <vector>

#include "eafrs/rational.hpp"
#include "eafrs/video_io.hpp"

namespace eafrs {

/// Averaging window of one output frame.
///
/// `ticks[k]` is the overlap, in periods of 1/LCM(f_src, f_dst), between the
/// display interval of source frame `source_start + k` and the output frame;
/// `weights[k] = ticks[k] / ticks_per_output`.
struct OutputWeights {
  std::size_t source_start = 0;
  std::vector<double> weights;
  std::vector<std::int64_t> ticks;
  std::int64_t ticks_per_output = 1;
};

struct WeightTable {
  Rational source_rate;
  Rational target_rate;
  std::vector<OutputWeights> entries;
};

/// Weights for temporal averaging from `f_src` to `f_dst`. Integer factors
/// produce k equal weights 1/k; other factors weight each source frame by its
/// temporal overlap with the output frame interval.
WeightTable generate_weights(const Rational& f_src, const Rational& f_dst,
                             std::size_t n_src);

/// Applies the weight table to every plane; single rounding per sample,
/// half away from zero.
VideoSequence downsample(const VideoSequence& seq, const Rational& f_dst);

}  // namespace eafrs
