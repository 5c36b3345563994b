#include "eafrs/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/video/tracking.hpp>

#include "eafrs/error.hpp"

namespace eafrs {
namespace {

constexpr std::array<std::string_view, kStatisticCount + 1> kNames = {
    "meanFD",        "meanSFD",       "meanSTD",       "maxSI",
    "maxTI",         "meanGLCM_con",  "stdGLCM_con",   "meanGLCM_corr",
    "stdGLCM_corr",  "meanGLCM_ene",  "stdGLCM_ene",   "meanGLCM_hom",
    "stdGLCM_hom",   "meanGLCM_ent",  "stdGLCM_ent",   "meanOF_mag",
    "stdOF_mag",     "meanOF_or",     "stdOF_or",      "meanHoG",
    "stdHoG",        "meanNFD",       "meanE",         "meanh",
    "CRF"};

// Welford accumulator with Chan's merge; population variance.
struct RunningStats {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  void merge(const RunningStats& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double delta = o.mean - mean;
    mean += delta * o.n / total;
    m2 += o.m2 + delta * delta * n * o.n / total;
    n = total;
  }
  double stddev() const { return n > 0.0 ? std::sqrt(std::max(0.0, m2 / n)) : 0.0; }
};

void require_pairs(const VideoSequence& seq, const char* what) {
  if (seq.size() < 2) {
    throw PreconditionError(std::string(what) + " needs at least 2 frames");
  }
}

double plane_std(const Plane& p) {
  RunningStats s;
  for (auto v : p.samples) s.add(v);
  return s.stddev();
}

double mean_abs_diff(const Plane& a, const Plane& b) {
  std::uint64_t sad = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    sad += static_cast<std::uint64_t>(
        std::abs(static_cast<int>(a.samples[i]) - static_cast<int>(b.samples[i])));
  }
  return static_cast<double>(sad) / static_cast<double>(a.samples.size());
}

double sobel_spread(const Plane& p) {
  if (p.width < 3 || p.height < 3) {
    throw PreconditionError("SI needs frames of at least 3x3 pixels");
  }
  RunningStats s;
  for (int y = 1; y + 1 < p.height; ++y) {
    for (int x = 1; x + 1 < p.width; ++x) {
      const double gx = (p.at(x + 1, y - 1) + 2.0 * p.at(x + 1, y) + p.at(x + 1, y + 1)) -
                        (p.at(x - 1, y - 1) + 2.0 * p.at(x - 1, y) + p.at(x - 1, y + 1));
      const double gy = (p.at(x - 1, y + 1) + 2.0 * p.at(x, y + 1) + p.at(x + 1, y + 1)) -
                        (p.at(x - 1, y - 1) + 2.0 * p.at(x, y - 1) + p.at(x + 1, y - 1));
      s.add(std::sqrt(gx * gx + gy * gy));
    }
  }
  return s.stddev();
}

cv::Mat to_gray8(const Plane& p, int bit_depth) {
  cv::Mat m(p.height, p.width, CV_8UC1);
  const int shift = bit_depth - 8;
  for (int y = 0; y < p.height; ++y) {
    auto* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < p.width; ++x) {
      row[x] = static_cast<unsigned char>(p.at(x, y) >> shift);
    }
  }
  return m;
}

void accumulate_flow(const FlowField& f, RunningStats& mag, RunningStats& ori) {
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    const double dx = f.dx[i];
    const double dy = f.dy[i];
    mag.add(std::sqrt(dx * dx + dy * dy));
    double angle = std::atan2(dy, dx);
    if (angle <= -std::numbers::pi) angle = std::numbers::pi;
    ori.add(angle);
  }
}

std::vector<std::vector<double>> dct_basis(int w) {
  std::vector<std::vector<double>> c(w, std::vector<double>(w));
  for (int k = 0; k < w; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
    for (int n = 0; n < w; ++n) {
      c[k][n] = alpha * std::cos(std::numbers::pi * (2.0 * n + 1.0) * k / (2.0 * w));
    }
  }
  return c;
}

void require_blocks(const VideoSequence& seq, int block, const char* what) {
  if (block <= 0) throw PreconditionError(std::string(what) + ": block size must be > 0");
  if (seq.width() < block || seq.height() < block) {
    throw PreconditionError(std::string(what) + ": frame smaller than one " +
                            std::to_string(block) + "x" + std::to_string(block) +
                            " block");
  }
}

}  // namespace

const std::array<std::string_view, kStatisticCount + 1>& feature_names() {
  return kNames;
}

std::vector<double> FeatureVector::as_row() const {
  std::vector<double> row(stats.begin(), stats.end());
  row.push_back(static_cast<double>(crf));
  return row;
}

FeatureVector FeatureVector::from_row(std::span<const double> row) {
  if (row.size() != kStatisticCount + 1) {
    throw DataError("feature row must have " + std::to_string(kStatisticCount + 1) +
                    " values");
  }
  FeatureVector v;
  std::copy_n(row.begin(), kStatisticCount, v.stats.begin());
  v.crf = static_cast<int>(std::lround(row[kStatisticCount]));
  return v;
}

FlowField FlowField::uniform(int width, int height, float dx, float dy) {
  const auto n = static_cast<std::size_t>(width) * height;
  return FlowField{width, height, std::vector<float>(n, dx), std::vector<float>(n, dy)};
}

double frame_difference(const VideoSequence& seq) {
  require_pairs(seq, "frame difference");
  std::uint64_t sad = 0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const auto& a = seq.frame(i).luma.samples;
    const auto& b = seq.frame(i + 1).luma.samples;
    for (std::size_t k = 0; k < a.size(); ++k) {
      sad += static_cast<std::uint64_t>(
          std::abs(static_cast<int>(b[k]) - static_cast<int>(a[k])));
    }
  }
  return static_cast<double>(sad) /
         (static_cast<double>(seq.size() - 1) * static_cast<double>(seq.frame(0).luma.size()));
}

double squared_frame_difference(const VideoSequence& seq) {
  require_pairs(seq, "squared frame difference");
  std::uint64_t ssd = 0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const auto& a = seq.frame(i).luma.samples;
    const auto& b = seq.frame(i + 1).luma.samples;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::int64_t d = static_cast<std::int64_t>(b[k]) - a[k];
      ssd += static_cast<std::uint64_t>(d * d);
    }
  }
  return static_cast<double>(ssd) /
         (static_cast<double>(seq.size() - 1) * static_cast<double>(seq.frame(0).luma.size()));
}

double contrast_std(const VideoSequence& seq) {
  double total = 0.0;
  for (const auto& f : seq.frames()) total += plane_std(f.luma);
  return total / static_cast<double>(seq.size());
}

SiTi si_ti(const VideoSequence& seq) {
  require_pairs(seq, "TI");
  SiTi out;
  for (const auto& f : seq.frames()) out.max_si = std::max(out.max_si, sobel_spread(f.luma));
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const auto& a = seq.frame(i).luma.samples;
    const auto& b = seq.frame(i + 1).luma.samples;
    RunningStats s;
    for (std::size_t k = 0; k < a.size(); ++k) {
      s.add(static_cast<double>(b[k]) - static_cast<double>(a[k]));
    }
    out.max_ti = std::max(out.max_ti, s.stddev());
  }
  return out;
}

GlcmStats glcm_frame(const Plane& luma, int bit_depth, int levels) {
  if (levels < 2) throw PreconditionError("GLCM needs at least 2 grey levels");
  if (luma.width < 2) throw PreconditionError("GLCM needs frames at least 2 px wide");
  const auto L = static_cast<std::size_t>(levels);
  std::vector<std::uint64_t> counts(L * L, 0);
  auto quantize = [&](std::uint16_t v) {
    return (static_cast<std::size_t>(v) * L) >> bit_depth;
  };
  for (int y = 0; y < luma.height; ++y) {
    for (int x = 0; x + 1 < luma.width; ++x) {
      const std::size_t a = quantize(luma.at(x, y));
      const std::size_t b = quantize(luma.at(x + 1, y));
      ++counts[a * L + b];
      ++counts[b * L + a];
    }
  }
  const double total =
      2.0 * static_cast<double>(luma.height) * static_cast<double>(luma.width - 1);

  GlcmStats s;
  double mu = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) mu += static_cast<double>(i) * counts[i * L + j];
  }
  mu /= total;
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const std::uint64_t c = counts[i * L + j];
      if (c == 0) continue;
      const double p = static_cast<double>(c) / total;
      const double di = static_cast<double>(i) - mu;
      const double dj = static_cast<double>(j) - mu;
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      s.contrast += diff * diff * p;
      s.homogeneity += p / (1.0 + std::abs(diff));
      s.energy += p * p;
      s.entropy -= p * std::log2(p);
      var += di * di * p;
      cov += di * dj * p;
    }
  }
  // Symmetric matrix: both marginals share mean and variance.
  s.correlation = var > 0.0 ? cov / var : 1.0;
  if (s.entropy == 0.0) s.entropy = 0.0;  // normalize -0
  return s;
}

GlcmSummary glcm_stats(const VideoSequence& seq, int levels) {
  RunningStats con, corr, ene, hom, ent;
  for (const auto& f : seq.frames()) {
    const GlcmStats g = glcm_frame(f.luma, seq.format().bit_depth, levels);
    con.add(g.contrast);
    corr.add(g.correlation);
    ene.add(g.energy);
    hom.add(g.homogeneity);
    ent.add(g.entropy);
  }
  return {{con.mean, corr.mean, ene.mean, hom.mean, ent.mean},
          {con.stddev(), corr.stddev(), ene.stddev(), hom.stddev(), ent.stddev()}};
}

FlowField optical_flow(const Frame& prev, const Frame& next,
                       const FarnebackParams& params) {
  if (prev.width() != next.width() || prev.height() != next.height()) {
    throw DataError("optical flow: frame geometry mismatch");
  }
  const cv::Mat a = to_gray8(prev.luma, prev.format.bit_depth);
  const cv::Mat b = to_gray8(next.luma, next.format.bit_depth);
  cv::Mat flow;
  cv::calcOpticalFlowFarneback(a, b, flow, params.pyr_scale, params.levels,
                               params.winsize, params.iterations, params.poly_n,
                               params.poly_sigma, 0);
  FlowField out{prev.width(), prev.height(), {}, {}};
  out.dx.resize(static_cast<std::size_t>(out.width) * out.height);
  out.dy.resize(out.dx.size());
  for (int y = 0; y < out.height; ++y) {
    const auto* row = flow.ptr<cv::Point2f>(y);
    for (int x = 0; x < out.width; ++x) {
      const auto idx = static_cast<std::size_t>(y) * out.width + x;
      out.dx[idx] = row[x].x;
      out.dy[idx] = row[x].y;
    }
  }
  return out;
}

FlowStats flow_stats(std::span<const FlowField> fields) {
  if (fields.empty()) throw PreconditionError("flow statistics need at least one field");
  RunningStats mag, ori;
  for (const auto& f : fields) {
    RunningStats m, o;
    accumulate_flow(f, m, o);
    mag.merge(m);
    ori.merge(o);
  }
  return {mag.mean, mag.stddev(), ori.mean, ori.stddev()};
}

FlowStats flow_stats(const VideoSequence& seq, const FarnebackParams& params) {
  require_pairs(seq, "optical flow statistics");
  RunningStats mag, ori;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const FlowField f = optical_flow(seq.frame(i), seq.frame(i + 1), params);
    RunningStats m, o;
    accumulate_flow(f, m, o);
    mag.merge(m);
    ori.merge(o);
  }
  return {mag.mean, mag.stddev(), ori.mean, ori.stddev()};
}

std::vector<double> hog_descriptor(const Plane& p, const FeatureConfig& cfg) {
  const int cell = cfg.hog_cell;
  const int bins = cfg.hog_bins;
  const int bc = cfg.hog_block_cells;
  const int cells_x = p.width / cell;
  const int cells_y = p.height / cell;
  if (cells_x < bc || cells_y < bc) {
    throw PreconditionError("HoG: frame smaller than one block");
  }
  std::vector<double> hist(static_cast<std::size_t>(cells_x) * cells_y * bins, 0.0);
  const double bin_width = 180.0 / bins;
  for (int y = 0; y < cells_y * cell; ++y) {
    for (int x = 0; x < cells_x * cell; ++x) {
      const double gx = static_cast<double>(p.at(std::min(x + 1, p.width - 1), y)) -
                        p.at(std::max(x - 1, 0), y);
      const double gy = static_cast<double>(p.at(x, std::min(y + 1, p.height - 1))) -
                        p.at(x, std::max(y - 1, 0));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (deg < 0.0) deg += 180.0;
      if (deg >= 180.0) deg -= 180.0;
      const int bin = std::min(static_cast<int>(deg / bin_width), bins - 1);
      const auto c = static_cast<std::size_t>(y / cell) * cells_x + (x / cell);
      hist[c * bins + bin] += mag;
    }
  }

  std::vector<double> desc;
  const std::size_t block_len = static_cast<std::size_t>(bc) * bc * bins;
  desc.reserve(static_cast<std::size_t>(cells_x - bc + 1) * (cells_y - bc + 1) * block_len);
  std::vector<double> block(block_len);
  const double eps2 = cfg.hog_epsilon * cfg.hog_epsilon;
  for (int by = 0; by + bc <= cells_y; ++by) {
    for (int bx = 0; bx + bc <= cells_x; ++bx) {
      std::size_t k = 0;
      double norm2 = 0.0;
      for (int cy = by; cy < by + bc; ++cy) {
        for (int cx = bx; cx < bx + bc; ++cx) {
          const auto c = static_cast<std::size_t>(cy) * cells_x + cx;
          for (int b = 0; b < bins; ++b) {
            block[k] = hist[c * bins + b];
            norm2 += block[k] * block[k];
            ++k;
          }
        }
      }
      const double scale = 1.0 / std::sqrt(norm2 + eps2);
      for (double v : block) desc.push_back(v * scale);
    }
  }
  return desc;
}

HogStats hog_stats(const VideoSequence& seq, const FeatureConfig& cfg) {
  RunningStats all;
  for (const auto& f : seq.frames()) {
    RunningStats s;
    for (double v : hog_descriptor(f.luma, cfg)) s.add(v);
    all.merge(s);
  }
  return {all.mean, all.stddev()};
}

double normalized_frame_difference(const VideoSequence& seq, double epsilon) {
  require_pairs(seq, "normalized frame difference");
  std::vector<double> contrast;
  contrast.reserve(seq.size());
  for (const auto& f : seq.frames()) contrast.push_back(plane_std(f.luma));
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const double fd = mean_abs_diff(seq.frame(i).luma, seq.frame(i + 1).luma);
    total += fd / (0.5 * (contrast[i] + contrast[i + 1]) + epsilon);
  }
  return total / static_cast<double>(seq.size() - 1);
}

double spatial_energy(const VideoSequence& seq, int block, double gamma) {
  require_blocks(seq, block, "spatial energy");
  const auto basis = dct_basis(block);
  const auto w = static_cast<std::size_t>(block);
  std::vector<double> weight(w * w);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      weight[i * w + j] = std::exp(gamma * static_cast<double>(i + j) / (2.0 * block));
    }
  }
  const int blocks_x = seq.width() / block;
  const int blocks_y = seq.height() / block;
  std::vector<double> pixels(w * w), tmp(w * w);
  double total = 0.0;
  for (const auto& f : seq.frames()) {
    for (int by = 0; by < blocks_y; ++by) {
      for (int bx = 0; bx < blocks_x; ++bx) {
        for (std::size_t y = 0; y < w; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            pixels[y * w + x] = f.luma.at(bx * block + static_cast<int>(x),
                                          by * block + static_cast<int>(y));
          }
        }
        // DC is skipped anyway; removing the mean keeps flat blocks exactly zero.
        double mean = 0.0;
        for (double px : pixels) mean += px;
        mean /= static_cast<double>(w * w);
        for (double& px : pixels) px -= mean;
        // Separable 2-D DCT-II: rows then columns.
        for (std::size_t y = 0; y < w; ++y) {
          for (std::size_t k = 0; k < w; ++k) {
            double acc = 0.0;
            for (std::size_t n = 0; n < w; ++n) acc += basis[k][n] * pixels[y * w + n];
            tmp[y * w + k] = acc;
          }
        }
        double energy = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            if (i == 0 && j == 0) continue;
            double coef = 0.0;
            for (std::size_t n = 0; n < w; ++n) coef += basis[i][n] * tmp[n * w + j];
            energy += weight[i * w + j] * std::abs(coef);
          }
        }
        total += energy / static_cast<double>(w * w);
      }
    }
  }
  return total / (static_cast<double>(blocks_x) * blocks_y * static_cast<double>(seq.size()));
}

double temporal_energy(const VideoSequence& seq, int block) {
  require_pairs(seq, "temporal energy");
  require_blocks(seq, block, "temporal energy");
  const int blocks_x = seq.width() / block;
  const int blocks_y = seq.height() / block;
  const double area = static_cast<double>(block) * block;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const Plane& a = seq.frame(i).luma;
    const Plane& b = seq.frame(i + 1).luma;
    for (int by = 0; by < blocks_y; ++by) {
      for (int bx = 0; bx < blocks_x; ++bx) {
        std::uint64_t sad = 0;
        for (int y = by * block; y < (by + 1) * block; ++y) {
          for (int x = bx * block; x < (bx + 1) * block; ++x) {
            sad += static_cast<std::uint64_t>(
                std::abs(static_cast<int>(b.at(x, y)) - static_cast<int>(a.at(x, y))));
          }
        }
        total += static_cast<double>(sad) / area;
      }
    }
  }
  return total / (static_cast<double>(blocks_x) * blocks_y * static_cast<double>(seq.size() - 1));
}

FeatureVector extract_feature_vector(const VideoSequence& seq, int crf,
                                     const FeatureConfig& cfg) {
  if (crf < 0 || crf > 51) throw PreconditionError("CRF must be in [0, 51]");
  require_pairs(seq, "feature extraction");
  FeatureVector v;
  v.crf = crf;
  v[Feature::kMeanFD] = frame_difference(seq);
  v[Feature::kMeanSFD] = squared_frame_difference(seq);
  v[Feature::kMeanSTD] = contrast_std(seq);
  const SiTi st = si_ti(seq);
  v[Feature::kMaxSI] = st.max_si;
  v[Feature::kMaxTI] = st.max_ti;
  const GlcmSummary g = glcm_stats(seq, cfg.glcm_levels);
  v[Feature::kMeanGlcmCon] = g.mean.contrast;
  v[Feature::kStdGlcmCon] = g.std.contrast;
  v[Feature::kMeanGlcmCorr] = g.mean.correlation;
  v[Feature::kStdGlcmCorr] = g.std.correlation;
  v[Feature::kMeanGlcmEne] = g.mean.energy;
  v[Feature::kStdGlcmEne] = g.std.energy;
  v[Feature::kMeanGlcmHom] = g.mean.homogeneity;
  v[Feature::kStdGlcmHom] = g.std.homogeneity;
  v[Feature::kMeanGlcmEnt] = g.mean.entropy;
  v[Feature::kStdGlcmEnt] = g.std.entropy;
  const FlowStats of = flow_stats(seq, cfg.farneback);
  v[Feature::kMeanOFMag] = of.mean_magnitude;
  v[Feature::kStdOFMag] = of.std_magnitude;
  v[Feature::kMeanOFOr] = of.mean_orientation;
  v[Feature::kStdOFOr] = of.std_orientation;
  const HogStats h = hog_stats(seq, cfg);
  v[Feature::kMeanHoG] = h.mean;
  v[Feature::kStdHoG] = h.std;
  v[Feature::kMeanNFD] = normalized_frame_difference(seq, cfg.nfd_epsilon);
  v[Feature::kMeanE] = spatial_energy(seq, cfg.energy_block, cfg.energy_gamma);
  v[Feature::kMeanH] = temporal_energy(seq, cfg.energy_block);
  for (double x : v.stats) {
    if (!std::isfinite(x)) throw DataError("non-finite feature value");
  }
  return v;
}

}  // namespace eafrs
