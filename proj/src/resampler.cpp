#include "eafrs/resampler.hpp"

#include <algorithm>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

// Integer-exact weighted average, rounded half away from zero. All sample
// values and ticks are nonnegative so (2a + d) / 2d suffices.
void blend_plane(const std::vector<const Plane*>& sources,
                 const OutputWeights& entry, Plane& out) {
  const std::int64_t denom = entry.ticks_per_output;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < sources.size(); ++k) {
      acc += entry.ticks[k] * static_cast<std::int64_t>(sources[k]->samples[i]);
    }
    out.samples[i] = static_cast<std::uint16_t>((2 * acc + denom) / (2 * denom));
  }
}

}  // namespace

WeightTable generate_weights(const Rational& f_src, const Rational& f_dst,
                             std::size_t n_src) {
  if (!f_dst.is_positive()) throw PreconditionError("target frame rate must be > 0");
  if (f_dst > f_src) {
    throw PreconditionError("target frame rate " + f_dst.to_string() +
                            " exceeds source rate " + f_src.to_string());
  }
  const Rational grid = lcm(f_src, f_dst);
  const Rational src_ticks_r = grid / f_src;
  const Rational dst_ticks_r = grid / f_dst;
  // Both are integers by construction of the LCM.
  const std::int64_t src_ticks = src_ticks_r.num();
  const std::int64_t dst_ticks = dst_ticks_r.num();

  // floor(n_src * f_dst / f_src) == floor(n_src * src_ticks / dst_ticks)
  const auto n_out = static_cast<std::size_t>(
      static_cast<std::int64_t>(n_src) * src_ticks / dst_ticks);

  WeightTable table{f_src, f_dst, {}};
  table.entries.reserve(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::int64_t begin = static_cast<std::int64_t>(j) * dst_ticks;
    const std::int64_t end = begin + dst_ticks;
    OutputWeights entry;
    entry.ticks_per_output = dst_ticks;
    entry.source_start = static_cast<std::size_t>(begin / src_ticks);
    for (std::int64_t k = begin / src_ticks; k * src_ticks < end; ++k) {
      const std::int64_t overlap =
          std::min(end, (k + 1) * src_ticks) - std::max(begin, k * src_ticks);
      if (overlap <= 0) continue;
      entry.ticks.push_back(overlap);
      entry.weights.push_back(static_cast<double>(overlap) /
                              static_cast<double>(dst_ticks));
    }
    table.entries.push_back(std::move(entry));
  }
  return table;
}

VideoSequence downsample(const VideoSequence& seq, const Rational& f_dst) {
  const WeightTable table = generate_weights(seq.frame_rate(), f_dst, seq.size());
  if (table.entries.empty()) {
    throw DataError("sequence '" + seq.name() + "' too short to produce a frame at " +
                    f_dst.to_string() + " fps");
  }
  std::vector<Frame> out;
  out.reserve(table.entries.size());
  for (const auto& entry : table.entries) {
    std::vector<const Plane*> luma, cu, cv;
    for (std::size_t k = 0; k < entry.ticks.size(); ++k) {
      const Frame& src = seq.frame(entry.source_start + k);
      luma.push_back(&src.luma);
      cu.push_back(&src.chroma_u);
      cv.push_back(&src.chroma_v);
    }
    Frame f = Frame::filled(seq.width(), seq.height(), seq.format(), 0, 0);
    blend_plane(luma, entry, f.luma);
    blend_plane(cu, entry, f.chroma_u);
    blend_plane(cv, entry, f.chroma_v);
    out.push_back(std::move(f));
  }
  return VideoSequence(seq.name(), f_dst, std::move(out), seq.header_tags());
}

}  // namespace eafrs
