#include "eafrs/bd_metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

double end_slope(double h0, double h1, double m0, double m1) {
  double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
  if (sign(d) != sign(m0)) {
    d = 0.0;
  } else if (sign(m0) != sign(m1) && std::abs(d) > std::abs(3.0 * m0)) {
    d = 3.0 * m0;
  }
  return d;
}

struct Poly {
  std::vector<double> c;  // ascending powers

  double antiderivative(double x) const {
    double acc = 0.0, p = x;
    for (std::size_t i = 0; i < c.size(); ++i, p *= x) {
      acc += c[i] * p / static_cast<double>(i + 1);
    }
    return acc;
  }
};

Poly fit_poly(const PreparedCurve& curve) {
  const int n = static_cast<int>(curve.quality.size());
  const int degree = std::min(3, n - 1);
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j, p *= curve.quality[i]) a(i, j) = p;
    b(i) = curve.log_metric[i];
  }
  const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);
  Poly poly;
  poly.c.assign(sol.data(), sol.data() + sol.size());
  return poly;
}

double curve_value(const RdePoint& p, BdMetric metric) {
  switch (metric) {
    case BdMetric::kRate: return p.bitrate_kbps;
    case BdMetric::kEncode: return p.e_enc_j;
    case BdMetric::kDecode: return p.e_dec_j;
  }
  return 0.0;
}

const char* metric_label(BdMetric metric) {
  switch (metric) {
    case BdMetric::kRate: return "bitrate_kbps";
    case BdMetric::kEncode: return "e_enc_j";
    case BdMetric::kDecode: return "e_dec_j";
  }
  return "";
}

const RdePoint& lookup(const std::vector<RdePoint>& points, const Rational& f, int crf) {
  for (const auto& p : points) {
    if (p.frame_rate == f && p.crf == crf) return p;
  }
  throw DataError("missing point (" + f.to_string() + " fps, CRF " + std::to_string(crf) +
                  ")");
}

}  // namespace

Pchip::Pchip(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw PreconditionError("PCHIP needs >= 2 matching knots");
  std::vector<double> h(n - 1), m(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    if (!(h[k] > 0.0)) throw PreconditionError("PCHIP knots must be strictly increasing");
    m[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = m[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (sign(m[k - 1]) * sign(m[k]) <= 0) continue;
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
  }
  d_[0] = end_slope(h[0], h[1], m[0], m[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
}

std::size_t Pchip::segment(double x) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(k, x_.size() - 2);
}

double Pchip::operator()(double x) const {
  const std::size_t k = segment(x);
  const double h = x_[k + 1] - x_[k];
  const double t = (x - x_[k]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
         (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
}

double Pchip::segment_antiderivative(std::size_t k, double t) const {
  const double h = x_[k + 1] - x_[k];
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  const double a00 = t4 / 2 - t3 + t;
  const double a10 = t4 / 4 - 2 * t3 / 3 + t2 / 2;
  const double a01 = -t4 / 2 + t3;
  const double a11 = t4 / 4 - t3 / 3;
  return h * (a00 * y_[k] + a10 * h * d_[k] + a01 * y_[k + 1] + a11 * h * d_[k + 1]);
}

double Pchip::integral(double a, double b) const {
  if (a > b) return -integral(b, a);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
    const double lo = std::max(a, x_[k]);
    const double hi = std::min(b, x_[k + 1]);
    if (hi <= lo) continue;
    const double h = x_[k + 1] - x_[k];
    total += segment_antiderivative(k, (hi - x_[k]) / h) -
             segment_antiderivative(k, (lo - x_[k]) / h);
  }
  return total;
}

PreparedCurve prepare_curve(const RdCurve& curve) {
  std::vector<RdSample> pts;
  for (const auto& p : curve.points) {
    if (std::isinf(p.quality_db)) continue;
    if (!std::isfinite(p.quality_db)) throw DataError("quality is not a number");
    if (!(p.metric > 0.0) || !std::isfinite(p.metric)) {
      throw DataError(curve.axis_label + " metric must be positive and finite");
    }
    pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end(), [](const RdSample& a, const RdSample& b) {
    return a.quality_db != b.quality_db ? a.quality_db < b.quality_db : a.metric < b.metric;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const RdSample& a, const RdSample& b) {
                          return a.quality_db == b.quality_db && a.metric == b.metric;
                        }),
            pts.end());
  if (pts.size() < 3) {
    throw DataError(curve.axis_label + " curve has " + std::to_string(pts.size()) +
                    " usable points; 3 are needed");
  }
  PreparedCurve out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && pts[i].quality_db == pts[i - 1].quality_db) {
      throw DataError(curve.axis_label + " curve repeats quality " +
                      std::to_string(pts[i].quality_db) + " dB with different metrics");
    }
    out.quality.push_back(pts[i].quality_db);
    out.log_metric.push_back(std::log10(pts[i].metric));
  }
  return out;
}

BdResult bd_delta(const RdCurve& reference, const RdCurve& test, BdInterpolation method) {
  const PreparedCurve ref = prepare_curve(reference);
  const PreparedCurve tst = prepare_curve(test);
  const double lo = std::max(ref.quality.front(), tst.quality.front());
  const double hi = std::min(ref.quality.back(), tst.quality.back());
  if (!(hi > lo)) throw DataError("curves share no quality interval");

  double int_ref = 0.0, int_tst = 0.0;
  if (method == BdInterpolation::kPchip) {
    int_ref = Pchip(ref.quality, ref.log_metric).integral(lo, hi);
    int_tst = Pchip(tst.quality, tst.log_metric).integral(lo, hi);
  } else {
    const Poly pr = fit_poly(ref), pt = fit_poly(tst);
    int_ref = pr.antiderivative(hi) - pr.antiderivative(lo);
    int_tst = pt.antiderivative(hi) - pt.antiderivative(lo);
  }
  BdResult r;
  r.overlap_db = hi - lo;
  r.narrow_overlap = r.overlap_db < 2.0;
  const double delta = (int_tst - int_ref) / (hi - lo);
  r.bd_percent = (std::pow(10.0, delta) - 1.0) * 100.0;
  return r;
}

BdMetric parse_bd_metric(const std::string& name) {
  if (name == "rate") return BdMetric::kRate;
  if (name == "enc") return BdMetric::kEncode;
  if (name == "dec") return BdMetric::kDecode;
  throw PreconditionError("unknown BD metric '" + name + "' (rate|enc|dec)");
}

RdCurve native_curve(const std::vector<RdePoint>& points, const Rational& native,
                     const std::vector<int>& crfs, BdMetric metric) {
  RdCurve c;
  c.axis_label = metric_label(metric);
  for (int crf : crfs) {
    const RdePoint& p = lookup(points, native, crf);
    c.points.push_back({p.mpsnr_db, curve_value(p, metric)});
  }
  return c;
}

RdCurve policy_curve(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                     BdMetric metric) {
  RdCurve c;
  c.axis_label = metric_label(metric);
  for (std::size_t i = 0; i < policy.crfs.size(); ++i) {
    const RdePoint& p = lookup(points, policy.rates.at(i), policy.crfs[i]);
    c.points.push_back({p.mpsnr_db, curve_value(p, metric)});
  }
  return c;
}

BdTriplet bd_triplet(const std::vector<RdePoint>& points, const FrameRatePolicy& policy,
                     const Rational& native, BdInterpolation method) {
  BdTriplet t;
  BdResult* slots[] = {&t.rate, &t.enc, &t.dec};
  const BdMetric metrics[] = {BdMetric::kRate, BdMetric::kEncode, BdMetric::kDecode};
  for (int i = 0; i < 3; ++i) {
    *slots[i] = bd_delta(native_curve(points, native, policy.crfs, metrics[i]),
                         policy_curve(points, policy, metrics[i]), method);
  }
  return t;
}

}  // namespace eafrs
