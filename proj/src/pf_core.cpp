#include "relloc/pf_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace relloc {

ParticleSet::ParticleSet(std::vector<Particle> particles, std::uint64_t rng_seed)
    : particles_(std::move(particles)), rng_seed_(rng_seed), rng_(rng_seed) {
  normalize();
}

double ParticleSet::weight(std::size_t i) const { return std::exp(particles_[i].log_weight); }

std::vector<double> ParticleSet::weights() const {
  std::vector<double> w(particles_.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight(i);
  return w;
}

double ParticleSet::weight_sum() const {
  double s = 0.0;
  for (const auto& p : particles_) s += std::exp(p.log_weight);
  return s;
}

void ParticleSet::normalize() {
  if (particles_.empty()) return;
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& p : particles_) max_lw = std::max(max_lw, p.log_weight);
  double sum = 0.0;
  for (const auto& p : particles_) sum += std::exp(p.log_weight - max_lw);
  const double log_norm = max_lw + std::log(sum);
  for (auto& p : particles_) p.log_weight -= log_norm;
}

void propagate_vio(ParticleSet& set, const VioDelta& delta, const VioNoiseParams& noise) {
  const double scale = delta.dt > 0.0 ? std::sqrt(delta.dt / noise.reference_dt) : 1.0;
  const double s_xyz = noise.sigma_xyz * scale;
  const double s_theta = noise.sigma_theta * scale;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Rng& rng = set.rng();
  for (auto& p : set.mutable_particles()) {
    const double th = p.state.theta();
    const double c = std::cos(th);
    const double s = std::sin(th);
    p.state.x += delta.dx * c + delta.dz * s;
    p.state.y += delta.dy;
    p.state.z += delta.dz * c - delta.dx * s;
    if (s_xyz > 0.0) {
      p.state.x += s_xyz * gauss(rng);
      p.state.y += s_xyz * gauss(rng);
      p.state.z += s_xyz * gauss(rng);
    }
    if (s_theta > 0.0) p.state.set_theta(th + s_theta * gauss(rng));
  }
}

void propagate_display_motion(ParticleSet& set, const VioDelta& display_delta) {
  for (auto& p : set.mutable_particles()) {
    p.state.x -= display_delta.dx;
    p.state.y -= display_delta.dy;
    p.state.z -= display_delta.dz;
  }
}

double range_likelihood(double predicted_distance, double z, const RangeNoiseParams& noise) {
  return std::abs(predicted_distance - z) <= noise.half_window() ? 1.0 - noise.p_nlos
                                                                  : noise.p_nlos;
}

UpdateStatus weight_range(ParticleSet& set, const Vec3& display_pos, const RangeMeasurement& meas,
                          const RangeNoiseParams& noise) {
  auto& ps = set.mutable_particles();
  if (noise.p_nlos <= 0.0) {
    const bool any_inlier = std::any_of(ps.begin(), ps.end(), [&](const Particle& p) {
      return range_likelihood((p.state.position() - display_pos).norm(), meas.range_z, noise) > 0.0;
    });
    if (!any_inlier) return UpdateStatus::kDegenerateUpdate;
  }
  const double log_in = std::log(1.0 - noise.p_nlos);
  // Smallest finite log weight keeps log_weight finite when p_nlos = 0.
  const double log_out = noise.p_nlos > 0.0
                             ? std::log(noise.p_nlos)
                             : std::log(std::numeric_limits<double>::denorm_min());
  const double hw = noise.half_window();
  for (auto& p : ps) {
    const double d = (p.state.position() - display_pos).norm();
    p.log_weight += std::abs(d - meas.range_z) <= hw ? log_in : log_out;
  }
  set.normalize();
  return UpdateStatus::kOk;
}

double blurred_range_likelihood(double residual, double variance, const RangeNoiseParams& noise) {
  const double hw = noise.half_window();
  const double p = noise.p_nlos;
  double inside;
  if (!(variance > 1e-12)) {
    inside = std::abs(residual) <= hw ? 1.0 : 0.0;
  } else {
    const double s = std::sqrt(2.0 * variance);
    inside = 0.5 * (std::erf((hw - residual) / s) - std::erf((-hw - residual) / s));
  }
  return p + (1.0 - 2.0 * p) * inside;
}

UpdateStatus weight_range_blurred(ParticleSet& set, const Vec3& display_pos,
                                  const Mat3& display_covariance, const RangeMeasurement& meas,
                                  const RangeNoiseParams& noise) {
  if (!(display_covariance.trace() > 1e-12)) return weight_range(set, display_pos, meas, noise);
  auto& ps = set.mutable_particles();
  std::vector<double> factors(ps.size());
  bool any_positive = false;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Vec3 u = ps[i].state.position() - display_pos;
    const double r = u.norm();
    const double var = r > 1e-9 ? u.dot(display_covariance * u) / (r * r)
                                : display_covariance.trace() / 3.0;
    factors[i] = blurred_range_likelihood(r - meas.range_z, std::max(var, 0.0), noise);
    any_positive = any_positive || factors[i] > 0.0;
  }
  if (!any_positive) return UpdateStatus::kDegenerateUpdate;
  const double floor = std::numeric_limits<double>::denorm_min();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ps[i].log_weight += std::log(std::max(factors[i], floor));
  }
  set.normalize();
  return UpdateStatus::kOk;
}

double effective_sample_size(const ParticleSet& set) {
  double s2 = 0.0;
  for (const auto& p : set.particles()) s2 += std::exp(2.0 * p.log_weight);
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

RelState sample_shell(const SphericalShell& shell, Rng& rng) {
  const double outer = shell.radius + shell.half_width;
  const double inner = std::max(0.0, shell.radius - shell.half_width);
  const double y_max = std::min(outer, std::max(0.0, shell.vertical_extent));
  std::uniform_real_distribution<double> uxz(-outer, outer);
  std::uniform_real_distribution<double> uy(-y_max, y_max);
  std::uniform_real_distribution<double> uth(0.0, kTwoPi);
  Vec3 offset(outer, 0.0, 0.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec3 cand(uxz(rng), y_max > 0.0 ? uy(rng) : 0.0, uxz(rng));
    const double r = cand.norm();
    if (r >= inner && r <= outer) {
      offset = cand;
      break;
    }
  }
  return RelState(shell.center + offset, uth(rng));
}

void resample(ParticleSet& set, double recovery_fraction,
              const std::optional<SphericalShell>& init_region) {
  const auto& src = set.particles();
  const std::size_t m = src.size();
  if (m == 0) return;
  std::size_t n_recover = 0;
  if (init_region && recovery_fraction > 0.0) {
    n_recover = std::min(m - 1, static_cast<std::size_t>(std::floor(recovery_fraction * m)));
  }
  const std::size_t n_keep = m - n_recover;
  const double log_uniform = -std::log(static_cast<double>(m));

  std::vector<Particle> out;
  out.reserve(m);
  Rng& rng = set.rng();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double step = 1.0 / static_cast<double>(n_keep);
  double pointer = u01(rng) * step;
  double cumulative = std::exp(src[0].log_weight);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n_keep; ++i) {
    while (pointer > cumulative && j + 1 < m) {
      ++j;
      cumulative += std::exp(src[j].log_weight);
    }
    out.push_back({src[j].state, log_uniform});
    pointer += step;
  }
  for (std::size_t i = 0; i < n_recover; ++i) {
    out.push_back({sample_shell(*init_region, rng), log_uniform});
  }
  set.mutable_particles() = std::move(out);
}

PointEstimate estimate(const ParticleSet& set) {
  PointEstimate est;
  Vec3 mean = Vec3::Zero();
  double c = 0.0;
  double s = 0.0;
  double wsum = 0.0;
  for (const auto& p : set.particles()) {
    const double w = std::exp(p.log_weight);
    mean += w * p.state.position();
    c += w * std::cos(p.state.theta());
    s += w * std::sin(p.state.theta());
    wsum += w;
  }
  if (wsum > 0.0) {
    mean /= wsum;
    c /= wsum;
    s /= wsum;
  }
  est.resultant_length = std::hypot(c, s);
  est.theta_defined = est.resultant_length >= 1e-9;
  est.state = RelState(mean, est.theta_defined ? std::atan2(s, c) : 0.0);
  return est;
}

PositionMoments position_moments(const ParticleSet& set) {
  PositionMoments m;
  double wsum = 0.0;
  for (const auto& p : set.particles()) {
    const double w = std::exp(p.log_weight);
    m.mean += w * p.state.position();
    wsum += w;
  }
  if (wsum <= 0.0) return m;
  m.mean /= wsum;
  for (const auto& p : set.particles()) {
    const double w = std::exp(p.log_weight);
    const Vec3 d = p.state.position() - m.mean;
    m.covariance += w * d * d.transpose();
  }
  m.covariance /= wsum;
  return m;
}

ParticleSet init_from_first_range(std::size_t m, const Vec3& display_pos, double z,
                                  const RangeNoiseParams& noise, double vertical_extent,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const SphericalShell shell{display_pos, std::max(0.0, z), noise.half_window(), vertical_extent};
  std::vector<Particle> ps;
  ps.reserve(m);
  for (std::size_t i = 0; i < std::max<std::size_t>(m, 1); ++i) {
    ps.push_back({sample_shell(shell, rng), 0.0});
  }
  // The set gets its own generator, decorrelated from the one used above.
  return ParticleSet(std::move(ps), seed ^ 0x9E3779B97F4A7C15ULL);
}

bool ResamplePolicy::due(const ParticleSet& set, double now, double last_resample) const {
  if (effective_sample_size(set) < ess_fraction * static_cast<double>(set.size())) return true;
  return now - last_resample >= interval;
}

}  // namespace relloc

namespace relloc {
namespace {

/// 1.4826 * median absolute deviation from the median.
double robust_spread(std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double med = *mid;
  for (double& v : values) v = std::abs(v - med);
  std::nth_element(values.begin(), mid, values.end());
  return 1.4826 * *mid;
}

}  // namespace

void roughen(ParticleSet& set, const RougheningParams& params) {
  auto& ps = set.mutable_particles();
  const std::size_t m = ps.size();
  if (m < 2) return;
  if (params.scale <= 0.0 && params.min_position <= 0.0 && params.min_theta <= 0.0) return;

  const double shrink = std::pow(static_cast<double>(m), -1.0 / 8.0);
  std::vector<double> scratch(m);
  std::array<double, 3> sigma{};
  for (int d = 0; d < 3; ++d) {
    for (std::size_t i = 0; i < m; ++i) {
      const RelState& s = ps[i].state;
      scratch[i] = d == 0 ? s.x : (d == 1 ? s.y : s.z);
    }
    sigma[d] = std::max(params.scale * robust_spread(scratch) * shrink, params.min_position);
  }
  double sum_sin = 0.0;
  double sum_cos = 0.0;
  for (const auto& p : ps) {
    sum_sin += std::sin(p.state.theta());
    sum_cos += std::cos(p.state.theta());
  }
  const double mean_theta = std::atan2(sum_sin, sum_cos);
  for (std::size_t i = 0; i < m; ++i) scratch[i] = wrap_to_pi(ps[i].state.theta() - mean_theta);
  const double sigma_theta =
      std::max(params.scale * robust_spread(scratch) * shrink, params.min_theta);

  Rng& rng = set.rng();
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& p : ps) {
    p.state.x += sigma[0] * gauss(rng);
    p.state.y += sigma[1] * gauss(rng);
    p.state.z += sigma[2] * gauss(rng);
    p.state.set_theta(p.state.theta() + sigma_theta * gauss(rng));
  }
}

}  // namespace relloc
