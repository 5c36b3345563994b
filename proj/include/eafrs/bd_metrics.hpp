#pragma once

#include <string>
#include <vector>

#include "eafrs/pareto.hpp"

namespace eafrs {

struct RdSample {
  double quality_db = 0.0;
  double metric = 0.0;  // bitrate or energy, > 0
};

struct RdCurve {
  std::vector<RdSample> points;
  std::string axis_label;
};

enum class BdInterpolation { kPchip, kCubicPolynomial };

struct BdResult {
  double bd_percent = 0.0;
  double overlap_db = 0.0;
  /// Overlap under 2 dB; the value is still returned.
  bool narrow_overlap = false;
};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes with
/// the three-point shape-preserving end conditions).
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  /// Exact integral over [a, b] within the knot range.
  double integral(double a, double b) const;
  const std::vector<double>& slopes() const { return d_; }

 private:
  std::size_t segment(double x) const;
  double segment_antiderivative(std::size_t k, double t) const;

  std::vector<double> x_, y_, d_;
};

/// Sorted, validated (quality, log10 metric) knots of a curve.
struct PreparedCurve {
  std::vector<double> quality;
  std::vector<double> log_metric;
};

PreparedCurve prepare_curve(const RdCurve& curve);

/// Average metric difference in percent of `test` against `reference` over
/// their common quality range. Negative means `test` needs less.
BdResult bd_delta(const RdCurve& reference, const RdCurve& test,
                  BdInterpolation method = BdInterpolation::kPchip);

struct BdTriplet {
  BdResult rate, enc, dec;
};

enum class BdMetric { kRate, kEncode, kDecode };
BdMetric parse_bd_metric(const std::string& name);

/// Curve of the native-rate points at `crfs`.
RdCurve native_curve(const std::vector<RdePoint>& points, const Rational& native,
                     const std::vector<int>& crfs, BdMetric metric);
/// Curve of the policy's (f_c, c) points.
RdCurve policy_curve(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                     BdMetric metric);

/// BDR, BDEE and BDDE of the policy against native-rate coding.
BdTriplet bd_triplet(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                     const Rational& native,
                     BdInterpolation method = BdInterpolation::kPchip);

}  // namespace eafrs
