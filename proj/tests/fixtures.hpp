#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "eafrs/bd_metrics.hpp"
#include "eafrs/pareto.hpp"

namespace testutil {

/// Ladder {120,60,30,15} x CRF {18,23,28,33} with low-rate curves overtaking
/// above CRF 18. Encode energy = f * (60 - crf) / 10.
///
/// Walk:
///   CRF 18: argmax Q = 120 (40 dB).
///   CRF 23: anchor Q(120,23) = 37. 120@23 is dominated by 60@18 (252 J,
///     38 dB), 60@23 by 30@23. Front at 23 = {30: 36.9, 15: 33} -> 30.
///   CRF 28: anchor Q(30,28) = 33. 30@28 is dominated by 15@23 (55.5 J,
///     33 dB); 60@28 and 120@28 by 30@23. Front at 28 = {15} -> 15.
///   CRF 33: only 15@33 (40.5 J, the global energy minimum) survives -> 15.
inline std::vector<eafrs::RdePoint> planted_crossover_grid() {
  const std::map<int, std::map<int, double>> q = {
      {18, {{120, 40.0}, {60, 38.0}, {30, 36.0}, {15, 34.0}}},
      {23, {{120, 37.0}, {60, 36.5}, {30, 36.9}, {15, 33.0}}},
      {28, {{120, 34.0}, {60, 33.5}, {30, 33.0}, {15, 32.9}}},
      {33, {{120, 31.5}, {60, 31.2}, {30, 31.1}, {15, 31.0}}},
  };
  std::vector<eafrs::RdePoint> pts;
  for (const auto& [crf, row] : q) {
    for (const auto& [f, quality] : row) {
      eafrs::RdePoint p;
      p.frame_rate = eafrs::Rational(f);
      p.crf = crf;
      p.mpsnr_db = quality;
      p.bitrate_kbps = f * (60.0 - crf);
      p.e_enc_j = f * (60.0 - crf) / 10.0;
      p.e_dec_j = f * (60.0 - crf) / 40.0;
      pts.push_back(p);
    }
  }
  return pts;
}

/// O(n^2) dominance filter.
inline std::vector<eafrs::RdePoint> brute_front(const std::vector<eafrs::RdePoint>& pts,
                                                eafrs::EnergyAxis axis) {
  std::vector<eafrs::RdePoint> out;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& o : pts) {
      const double ep = eafrs::energy_of(p, axis), eo = eafrs::energy_of(o, axis);
      if (o.mpsnr_db >= p.mpsnr_db && eo <= ep && (o.mpsnr_db > p.mpsnr_db || eo < ep)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(p);
  }
  return out;
}

/// Shape-preserving cubic Hermite evaluation written out from the
/// Fritsch-Carlson recipe (harmonic-mean interior slopes, three-point ends).
struct OraclePchip {
  std::vector<double> x, y, d;

  OraclePchip(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), m(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = x[k + 1] - x[k];
      m[k] = (y[k + 1] - y[k]) / h[k];
    }
    d.assign(n, 0.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (m[k - 1] * m[k] > 0) {
        const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
      }
    }
    auto end = [](double h0, double h1, double m0, double m1) {
      double e = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
      if ((e > 0) != (m0 > 0)) {
        e = 0;
      } else if ((m0 > 0) != (m1 > 0) && std::abs(e) > std::abs(3 * m0)) {
        e = 3 * m0;
      }
      return e;
    };
    if (n == 2) {
      d[0] = d[1] = m[0];
    } else {
      d[0] = end(h[0], h[1], m[0], m[1]);
      d[n - 1] = end(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
    }
  }

  double operator()(double t) const {
    std::size_t k = 0;
    while (k + 2 < x.size() && t > x[k + 1]) ++k;
    const double h = x[k + 1] - x[k];
    const double s = (t - x[k]) / h;
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    return h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1];
  }
};

/// BD percent by composite Simpson over `samples` intervals of the overlap.
inline double oracle_bd(const eafrs::RdCurve& ref, const eafrs::RdCurve& test, int samples = 20000) {
  auto build = [](const eafrs::RdCurve& c) {
    auto pts = c.points;
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.quality_db < b.quality_db; });
    std::vector<double> x, y;
    for (const auto& p : pts) {
      x.push_back(p.quality_db);
      y.push_back(std::log10(p.metric));
    }
    return OraclePchip(x, y);
  };
  const OraclePchip r = build(ref), t = build(test);
  const double lo = std::max(r.x.front(), t.x.front());
  const double hi = std::min(r.x.back(), t.x.back());
  const double h = (hi - lo) / samples;
  double acc = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double q = lo + i * h;
    const double w = (i == 0 || i == samples) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * (t(q) - r(q));
  }
  const double delta = acc * h / 3.0 / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

}  // namespace testutil
