#include "eafrs/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

const RdePoint* find_point(const std::vector<RdePoint>& points, const Rational& f,
                           int crf) {
  for (const auto& p : points) {
    if (p.frame_rate == f && p.crf == crf) return &p;
  }
  return nullptr;
}

}  // namespace

EnergyAxis parse_energy_axis(const std::string& name) {
  if (name == "enc" || name == "encode") return EnergyAxis::kEncode;
  if (name == "dec" || name == "decode") return EnergyAxis::kDecode;
  throw PreconditionError("unknown energy axis '" + name + "'");
}

double energy_of(const RdePoint& p, EnergyAxis axis) {
  return axis == EnergyAxis::kEncode ? p.e_enc_j : p.e_dec_j;
}

Rational FrameRatePolicy::rate_for(int crf) const {
  for (std::size_t i = 0; i < crfs.size(); ++i) {
    if (crfs[i] == crf) return rates.at(i);
  }
  throw DataError("policy has no entry for CRF " + std::to_string(crf));
}

std::string FrameRatePolicy::to_string() const {
  std::string s = "{";
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (i) s += ",";
    s += rates[i].to_string();
  }
  return s + "}";
}

FrameRatePolicy FrameRatePolicy::parse(const std::string& text, std::vector<int> crfs) {
  std::string body = text;
  body.erase(std::remove_if(body.begin(), body.end(),
                            [](char c) { return c == '{' || c == '}' || c == ' '; }),
             body.end());
  FrameRatePolicy p;
  p.crfs = std::move(crfs);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) p.rates.push_back(Rational::parse(item));
  if (p.rates.size() != p.crfs.size()) {
    throw DataError("policy '" + text + "' does not match " +
                    std::to_string(p.crfs.size()) + " CRFs");
  }
  return p;
}

std::vector<RdePoint> pareto_front(const std::vector<RdePoint>& points,
                                   EnergyAxis axis) {
  // Sort by energy ascending, quality descending. Within an equal-energy
  // group only the group's best quality can survive, and only if it beats
  // everything seen at strictly lower energy.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = energy_of(points[a], axis), eb = energy_of(points[b], axis);
    if (ea != eb) return ea < eb;
    return points[a].mpsnr_db > points[b].mpsnr_db;
  });

  std::vector<bool> keep(points.size(), false);
  double best_lower = -std::numeric_limits<double>::infinity();
  bool any_lower = false;
  std::size_t i = 0;
  while (i < order.size()) {
    const double e = energy_of(points[order[i]], axis);
    const double group_best = points[order[i]].mpsnr_db;
    std::size_t j = i;
    while (j < order.size() && energy_of(points[order[j]], axis) == e) {
      const double q = points[order[j]].mpsnr_db;
      if (q == group_best && (!any_lower || q > best_lower)) keep[order[j]] = true;
      ++j;
    }
    if (!any_lower || group_best > best_lower) best_lower = group_best;
    any_lower = true;
    i = j;
  }

  std::vector<RdePoint> front;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (keep[k]) front.push_back(points[k]);
  }
  return front;
}

FrameRatePolicy select_policy(const std::vector<RdePoint>& points,
                              const std::vector<int>& crf_subset,
                              EnergyAxis axis) {
  if (crf_subset.empty()) throw PreconditionError("CRF subset is empty");
  if (!std::is_sorted(crf_subset.begin(), crf_subset.end())) {
    throw PreconditionError("CRF subset must be ascending");
  }
  std::set<Rational> ladder;
  for (const auto& p : points) ladder.insert(p.frame_rate);
  for (int c : crf_subset) {
    for (const auto& f : ladder) {
      if (!find_point(points, f, c)) {
        throw DataError("grid lacks point (" + f.to_string() + " fps, CRF " +
                        std::to_string(c) + ")");
      }
    }
  }
  if (ladder.empty()) throw DataError("no measurement points");

  FrameRatePolicy policy;
  policy.crfs = crf_subset;

  // Step 1: highest quality at the first CRF; iterate high->low so that
  // equal quality keeps the higher frame rate.
  const int first = crf_subset.front();
  Rational chosen = *ladder.rbegin();
  double best_q = -std::numeric_limits<double>::infinity();
  for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
    const double q = find_point(points, *it, first)->mpsnr_db;
    if (q > best_q) {
      best_q = q;
      chosen = *it;
    }
  }
  policy.rates.push_back(chosen);

  const std::vector<RdePoint> front = pareto_front(points, axis);
  for (std::size_t k = 1; k < crf_subset.size(); ++k) {
    const int c = crf_subset[k];
    std::vector<RdePoint> candidates;
    for (const auto& p : front) {
      if (p.crf == c) candidates.push_back(p);
    }
    if (candidates.empty()) {
      // Every point at this CRF is dominated by another CRF's point; fall
      // back to the front of this CRF's points alone.
      std::vector<RdePoint> at_c;
      for (const auto& p : points) {
        if (p.crf == c) at_c.push_back(p);
      }
      candidates = pareto_front(at_c, axis);
    }
    const double anchor = find_point(points, chosen, c)->mpsnr_db;
    std::sort(candidates.begin(), candidates.end(),
              [](const RdePoint& a, const RdePoint& b) { return a.frame_rate > b.frame_rate; });
    const RdePoint* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& p : candidates) {
      const double d = (p.mpsnr_db == anchor) ? 0.0 : std::abs(p.mpsnr_db - anchor);
      if (best == nullptr || d < best_dist) {
        best = &p;
        best_dist = d;
      }
    }
    chosen = best->frame_rate;
    policy.rates.push_back(chosen);
  }
  return policy;
}

std::vector<RdCurveByRate> build_curves(const std::vector<RdePoint>& points) {
  std::map<Rational, std::vector<RdePoint>, std::greater<>> grouped;
  for (const auto& p : points) {
    auto& curve = grouped[p.frame_rate];
    for (const auto& q : curve) {
      if (q.crf == p.crf) {
        throw DataError("duplicate point (" + p.frame_rate.to_string() + " fps, CRF " +
                        std::to_string(p.crf) + ")");
      }
    }
    curve.push_back(p);
  }
  std::vector<RdCurveByRate> curves;
  for (auto& [rate, pts] : grouped) {
    std::sort(pts.begin(), pts.end(),
              [](const RdePoint& a, const RdePoint& b) { return a.crf < b.crf; });
    curves.push_back({rate, std::move(pts)});
  }
  return curves;
}

}  // namespace eafrs
