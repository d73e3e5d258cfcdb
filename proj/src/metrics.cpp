#include "relloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace relloc {
namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

ErrorComponents geometric_error_3d(const RelState& est, const RelState& truth) {
  const Vec3 d = est.position() - truth.position();
  ErrorComponents e;
  e.eps_xy = std::hypot(d.x(), d.y());
  e.eps_z = d.z();
  e.geom_3d = d.norm();
  return e;
}

ErrorComponents line_of_sight_error(const Vec3& est, const Vec3& truth) {
  const double dist = truth.norm();
  Vec3 ez = dist > 0.0 ? Vec3(truth / dist) : Vec3(0.0, 0.0, 1.0);
  // Horizontal axis across the view; fall back to world x when looking
  // straight up or down.
  Vec3 ex = Vec3::UnitY().cross(ez);
  if (ex.norm() < 1e-9) ex = Vec3::UnitX();
  ex.normalize();
  const Vec3 ey = ez.cross(ex);
  Mat3 r;
  r.row(0) = ex.transpose();
  r.row(1) = ey.transpose();
  r.row(2) = ez.transpose();
  return geometric_error_3d(RelState(r * est, 0.0), RelState(r * truth, 0.0));
}

double display_proportional_error(double eps_xy, double eps_z, double dist,
                                  const CameraIntrinsics& camera) {
  const double depth = std::abs(dist + eps_z);
  if (depth < 1e-6) throw DegenerateDepth();
  return eps_xy / depth * (camera.f_x / camera.h_x);
}

ErrorSample make_error_sample(double time, NodeId display, NodeId target, const Vec3& est,
                              const Vec3& truth, const CameraIntrinsics& camera) {
  const ErrorComponents e = line_of_sight_error(est, truth);
  ErrorSample s;
  s.time = time;
  s.display = display;
  s.target = target;
  s.geom_3d = e.geom_3d;
  s.eps_xy = e.eps_xy;
  s.eps_z = e.eps_z;
  s.true_dist = truth.norm();
  s.dpe = display_proportional_error(e.eps_xy, e.eps_z, s.true_dist, camera);
  s.pixel_err = s.dpe * camera.h_x;
  return s;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> rx = average_ranks({x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)});
  const std::vector<double> ry = average_ranks({y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)});
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

std::vector<SeparationBucket> bucket_by_separation(const std::vector<ErrorSample>& samples,
                                                   double width, double max_dist) {
  if (!(width > 0.0) || !(max_dist > 0.0)) return {};
  const auto n = static_cast<std::size_t>(std::ceil(max_dist / width - 1e-9));
  std::vector<std::vector<double>> geom(n);
  std::vector<std::vector<double>> dpe(n);
  for (const ErrorSample& s : samples) {
    if (!(s.true_dist >= 0.0) || s.true_dist >= max_dist) continue;
    const auto b = std::min(static_cast<std::size_t>(s.true_dist / width), n - 1);
    geom[b].push_back(s.geom_3d);
    dpe[b].push_back(s.dpe);
  }
  std::vector<SeparationBucket> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    out[b].lo = static_cast<double>(b) * width;
    out[b].hi = std::min(out[b].lo + width, max_dist);
    out[b].count = geom[b].size();
    out[b].median_geom = median(geom[b]);
    out[b].median_dpe = median(dpe[b]);
  }
  return out;
}

}  // namespace relloc
