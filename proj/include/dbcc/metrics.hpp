#pragma once

#include <string>
#include <vector>

#include "dbcc/tensor.hpp"

namespace dbcc {

/// Axis-aligned pixel rectangle excluded from statistics and losses
/// (calibration targets such as color checkers).
struct MaskRect {
  int x = 0, y = 0, w = 0, h = 0;

  bool contains(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

/// Angle between two illuminants in degrees; scale-invariant, symmetric.
/// The normalized dot product is clamped to [-1,1] before acos.
double angular_error_deg(const Illuminant& gt, const Illuminant& et);

/// The five summary statistics used in color-constancy benchmarking.
struct MetricsReport {
  std::vector<double> errors;  // per-sample angular errors, input order
  double mean = 0.0;
  double median = 0.0;
  double trimean = 0.0;   // (Q1 + 2*median + Q3) / 4, type-7 quantiles
  double best25 = 0.0;    // mean of the ceil(n/4) smallest errors
  double worst25 = 0.0;   // mean of the ceil(n/4) largest errors
  int count = 0;
};

MetricsReport summarize(std::vector<double> errors);

/// Summary CSV: header `stat,value`, one row per statistic.
std::string report_csv(const MetricsReport& r);

/// Per-channel mean over unmasked pixels, L2-normalized.
template <typename T>
Illuminant grey_world(const TensorT<T>& image, const std::vector<MaskRect>& mask = {}) {
  detail::require(image.rank() == 3 && image.shape()[2] == 3,
                  "grey_world: image must be [H,W,3], got " + image.shape().str());
  const int h = image.shape()[0], w = image.shape()[1];
  double acc[3] = {0.0, 0.0, 0.0};
  long long used = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bool masked = false;
      for (const MaskRect& m : mask)
        if (m.contains(j, i)) {
          masked = true;
          break;
        }
      if (masked) continue;
      ++used;
      for (int c = 0; c < 3; ++c) acc[c] += static_cast<double>(image.at(i, j, c));
    }
  if (used == 0) throw Error("grey_world: every pixel is masked");
  return normalize_illuminant(acc[0] / used, acc[1] / used, acc[2] / used);
}

}  // namespace dbcc
