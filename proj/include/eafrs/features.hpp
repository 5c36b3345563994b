#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eafrs/video_io.hpp"

namespace eafrs {

/// Statistic slots in fixed column order (the order the features CSV uses).
enum class Feature : std::size_t {
  kMeanFD, kMeanSFD, kMeanSTD, kMaxSI, kMaxTI,
  kMeanGlcmCon, kStdGlcmCon, kMeanGlcmCorr, kStdGlcmCorr,
  kMeanGlcmEne, kStdGlcmEne, kMeanGlcmHom, kStdGlcmHom,
  kMeanGlcmEnt, kStdGlcmEnt,
  kMeanOFMag, kStdOFMag, kMeanOFOr, kStdOFOr,
  kMeanHoG, kStdHoG, kMeanNFD, kMeanE, kMeanH,
};

inline constexpr std::size_t kStatisticCount = 24;

/// Column names for the 24 statistics followed by "CRF".
const std::array<std::string_view, kStatisticCount + 1>& feature_names();

struct FeatureVector {
  std::array<double, kStatisticCount> stats{};
  int crf = 0;

  double& operator[](Feature f) { return stats[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return stats[static_cast<std::size_t>(f)]; }

  /// 25 values: statistics, then CRF as a real.
  std::vector<double> as_row() const;
  static FeatureVector from_row(std::span<const double> row);

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FarnebackParams {
  double pyr_scale = 0.5;
  int levels = 3;
  int winsize = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;
};

struct FeatureConfig {
  int glcm_levels = 8;
  FarnebackParams farneback{};
  int hog_bins = 9;
  int hog_cell = 8;
  int hog_block_cells = 2;
  double hog_epsilon = 1e-6;
  double nfd_epsilon = 1e-6;
  int energy_block = 32;
  double energy_gamma = 1.0;
};

/// Dense per-pixel displacement (pixels/frame) between two frames.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  static FlowField uniform(int width, int height, float dx, float dy);
};

struct GlcmStats {
  double contrast = 0.0;
  double correlation = 0.0;
  double energy = 0.0;
  double homogeneity = 0.0;
  double entropy = 0.0;
};

struct GlcmSummary {
  GlcmStats mean;
  GlcmStats std;
};

struct SiTi {
  double max_si = 0.0;
  double max_ti = 0.0;
};

struct FlowStats {
  double mean_magnitude = 0.0;
  double std_magnitude = 0.0;
  double mean_orientation = 0.0;
  double std_orientation = 0.0;
};

struct HogStats {
  double mean = 0.0;
  double std = 0.0;
};

double frame_difference(const VideoSequence& seq);
/// Squared co-located differences normalized by (N-1) W H.
double squared_frame_difference(const VideoSequence& seq);
double contrast_std(const VideoSequence& seq);
SiTi si_ti(const VideoSequence& seq);

/// GLCM of one luma plane (horizontal neighbour, symmetric, `levels` grey
/// levels). Correlation is 1 when either marginal has zero variance.
GlcmStats glcm_frame(const Plane& luma, int bit_depth, int levels = 8);
GlcmSummary glcm_stats(const VideoSequence& seq, int levels = 8);

FlowField optical_flow(const Frame& prev, const Frame& next,
                       const FarnebackParams& params = {});
FlowStats flow_stats(std::span<const FlowField> fields);
FlowStats flow_stats(const VideoSequence& seq, const FarnebackParams& params = {});

/// Unsigned-gradient HoG descriptor entries of one luma plane.
std::vector<double> hog_descriptor(const Plane& luma, const FeatureConfig& cfg = {});
HogStats hog_stats(const VideoSequence& seq, const FeatureConfig& cfg = {});

double normalized_frame_difference(const VideoSequence& seq, double epsilon = 1e-6);

/// Mean DCT texture energy of w x w luma blocks, normalized by w^2.
double spatial_energy(const VideoSequence& seq, int block = 32, double gamma = 1.0);
/// Mean block SAD between consecutive frames, normalized by w^2.
double temporal_energy(const VideoSequence& seq, int block = 32);

FeatureVector extract_feature_vector(const VideoSequence& seq, int crf,
                                     const FeatureConfig& cfg = {});

}  // namespace eafrs
