#pragma once

#include <string>
#include <vector>

#include "eafrs/rational.hpp"

namespace eafrs {

/// One (frame rate, CRF) operating point of a sequence.
struct RdePoint {
  Rational frame_rate;
  int crf = 0;
  double mpsnr_db = 0.0;
  double bitrate_kbps = 0.0;
  double e_enc_j = 0.0;
  double e_dec_j = 0.0;

  friend bool operator==(const RdePoint&, const RdePoint&) = default;
};

enum class EnergyAxis { kEncode, kDecode };

EnergyAxis parse_energy_axis(const std::string& name);
double energy_of(const RdePoint& p, EnergyAxis axis);

/// Energy-aware frame rate per CRF, in CRF order.
struct FrameRatePolicy {
  std::vector<int> crfs;
  std::vector<Rational> rates;

  Rational rate_for(int crf) const;
  bool operator==(const FrameRatePolicy&) const = default;
  /// "{120,30,15,15}"
  std::string to_string() const;
  static FrameRatePolicy parse(const std::string& text, std::vector<int> crfs);
};

/// Points not dominated in (higher quality, lower energy), in input order.
/// p dominates q iff Q(p) >= Q(q) and E(p) <= E(q) with one strict;
/// points equal on both axes never dominate one another.
std::vector<RdePoint> pareto_front(const std::vector<RdePoint>& points,
                                   EnergyAxis axis = EnergyAxis::kEncode);

/// Energy-aware frame-rate walk over `crf_subset` (ascending):
///   1. first CRF: the frame rate with the highest quality;
///   2. each next CRF: among Pareto-efficient points at that CRF, the frame
///      rate whose quality is closest to the previously selected frame rate's
///      point at the same CRF.
/// Ties go to the higher frame rate.
FrameRatePolicy select_policy(const std::vector<RdePoint>& points,
                              const std::vector<int>& crf_subset = {18, 23, 28, 33},
                              EnergyAxis axis = EnergyAxis::kEncode);

struct RdCurveByRate {
  Rational frame_rate;
  std::vector<RdePoint> points;  // ascending CRF
};

/// Groups points into one curve per frame rate (highest rate first).
std::vector<RdCurveByRate> build_curves(const std::vector<RdePoint>& points);

}  // namespace eafrs
