#include "dbcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dbcc {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

/// Type-7 quantile: linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double angular_error_deg(const Illuminant& gt, const Illuminant& et) {
  const double ng = std::sqrt(gt.r * gt.r + gt.g * gt.g + gt.b * gt.b);
  const double ne = std::sqrt(et.r * et.r + et.g * et.g + et.b * et.b);
  if (!(ng > 0.0) || !(ne > 0.0)) throw Error("angular_error: zero-length vector");
  double c = (gt.r * et.r + gt.g * et.g + gt.b * et.b) / (ng * ne);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c) * kRadToDeg;
}

MetricsReport summarize(std::vector<double> errors) {
  if (errors.empty()) throw Error("summarize: empty error list");
  MetricsReport r;
  r.errors = errors;
  r.count = static_cast<int>(errors.size());

  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();

  double total = 0.0;
  for (double e : sorted) total += e;
  r.mean = total / static_cast<double>(n);

  r.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.trimean = (quantile(sorted, 0.25) + 2.0 * r.median + quantile(sorted, 0.75)) / 4.0;

  const size_t q = (n + 3) / 4;  // ceil(n/4)
  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < q; ++i) {
    lo += sorted[i];
    hi += sorted[n - 1 - i];
  }
  r.best25 = lo / static_cast<double>(q);
  r.worst25 = hi / static_cast<double>(q);
  return r;
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream s;
  s.precision(9);
  s << "stat,value\n";
  s << "mean," << r.mean << "\n";
  s << "median," << r.median << "\n";
  s << "trimean," << r.trimean << "\n";
  s << "best25," << r.best25 << "\n";
  s << "worst25," << r.worst25 << "\n";
  s << "count," << r.count << "\n";
  return s.str();
}

}  // namespace dbcc
