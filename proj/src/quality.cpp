#include "eafrs/quality.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

std::uint64_t luma_sse(const Frame& a, const Frame& b) {
  std::uint64_t sse = 0;
  const auto& pa = a.luma.samples;
  const auto& pb = b.luma.samples;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const std::int64_t d = static_cast<std::int64_t>(pa[i]) - pb[i];
    sse += static_cast<std::uint64_t>(d * d);
  }
  return sse;
}

void check_geometry(const VideoSequence& ref, const VideoSequence& test) {
  if (ref.width() != test.width() || ref.height() != test.height()) {
    throw DataError("geometry mismatch: " + std::to_string(ref.width()) + "x" +
                    std::to_string(ref.height()) + " vs " +
                    std::to_string(test.width()) + "x" +
                    std::to_string(test.height()));
  }
  if (ref.format().bit_depth != test.format().bit_depth) {
    throw DataError("bit depth mismatch");
  }
}

}  // namespace

double psnr_from_mse(double mse, std::uint16_t max_value) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = static_cast<double>(max_value);
  return 10.0 * std::log10(peak * peak / mse);
}

QualityScore psnr(const VideoSequence& ref, const VideoSequence& test) {
  check_geometry(ref, test);
  if (ref.size() != test.size()) throw DataError("frame count mismatch");
  if (ref.frame_rate() != test.frame_rate()) throw DataError("frame rate mismatch");
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sse += luma_sse(ref.frame(i), test.frame(i));
  }
  const double samples = static_cast<double>(ref.size()) *
                         static_cast<double>(ref.frame(0).luma.size());
  return {psnr_from_mse(static_cast<double>(sse) / samples,
                        ref.format().max_value()),
          ref.size()};
}

QualityScore mpsnr(const VideoSequence& ref, const VideoSequence& test) {
  check_geometry(ref, test);
  if (test.frame_rate() > ref.frame_rate()) {
    throw PreconditionError("test frame rate exceeds reference frame rate");
  }
  const Rational grid = lcm(ref.frame_rate(), test.frame_rate());
  const std::int64_t ref_ticks = (grid / ref.frame_rate()).num();
  const std::int64_t test_ticks = (grid / test.frame_rate()).num();
  const std::int64_t duration =
      std::min(static_cast<std::int64_t>(ref.size()) * ref_ticks,
               static_cast<std::int64_t>(test.size()) * test_ticks);

  // Walk the tick grid in runs where the held (ref, test) frame pair is
  // constant; each run contributes its SSE once per tick.
  std::uint64_t sse = 0;
  std::int64_t t = 0;
  while (t < duration) {
    const std::int64_t i = t / ref_ticks;
    const std::int64_t j = t / test_ticks;
    const std::int64_t run_end =
        std::min({(i + 1) * ref_ticks, (j + 1) * test_ticks, duration});
    sse += luma_sse(ref.frame(static_cast<std::size_t>(i)),
                    test.frame(static_cast<std::size_t>(j))) *
           static_cast<std::uint64_t>(run_end - t);
    t = run_end;
  }
  const double samples = static_cast<double>(duration) *
                         static_cast<double>(ref.frame(0).luma.size());
  return {psnr_from_mse(static_cast<double>(sse) / samples,
                        ref.format().max_value()),
          static_cast<std::size_t>(duration)};
}

}  // namespace eafrs
