#pragma once

#include "relloc/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace relloc {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; decorrelates related seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent sub-stream seed for `stream` under a run seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL));
}

struct Particle {
  RelState state;
  double log_weight = 0.0;
};

/// Displacement reported by a node's VIO, expressed in that node's own VIO
/// origin frame (the node's yaw is already applied).
struct VioDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dt = 1.0 / 60.0;
  NodeId source_node = 0;
  std::uint64_t sequence = 0;
  /// Sender clock at the end of the interval covered by this delta.
  double timestamp = 0.0;

  Vec3 displacement() const { return {dx, dy, dz}; }
};

/// Per-update process noise. Deltas whose dt differs from reference_dt get
/// the noise scaled by sqrt(dt / reference_dt), so a batched delta diffuses
/// exactly as the equivalent sequence of 60 Hz updates.
struct VioNoiseParams {
  double sigma_xyz = 0.005;
  double sigma_theta = 0.0005;
  double reference_dt = 1.0 / 60.0;
};

struct RangeNoiseParams {
  double sigma_r = 0.25;
  double p_nlos = 0.1;

  double half_window() const { return 3.0 * sigma_r; }
};

struct RangeMeasurement {
  NodeId initiator = 0;
  NodeId responder = 0;
  double range_z = 0.0;
  double timestamp = 0.0;
};

/// Thick spherical shell |‖p - center‖ - radius| <= half_width, clipped to
/// |p.y - center.y| <= vertical_extent.
struct SphericalShell {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double half_width = 0.0;
  double vertical_extent = 6.0;
};

class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(std::vector<Particle> particles, std::uint64_t rng_seed);

  std::size_t size() const { return particles_.size(); }
  std::uint64_t rng_seed() const { return rng_seed_; }

  const std::vector<Particle>& particles() const { return particles_; }
  std::vector<Particle>& mutable_particles() { return particles_; }

  /// Normalized linear weight of particle i.
  double weight(std::size_t i) const;
  std::vector<double> weights() const;
  /// Shifts log weights so that they sum to one in linear space.
  void normalize();
  double weight_sum() const;

  Rng& rng() { return rng_; }

  std::size_t memory_bytes() const {
    return sizeof(*this) + particles_.capacity() * sizeof(Particle);
  }

 private:
  std::vector<Particle> particles_;
  std::uint64_t rng_seed_ = 0;
  Rng rng_;
};

enum class UpdateStatus { kOk, kDegenerateUpdate };

/// Moves every particle by the target's own VIO displacement rotated by the
/// particle's yaw offset, then adds Gaussian position and yaw noise.
void propagate_vio(ParticleSet& set, const VioDelta& delta, const VioNoiseParams& noise);

/// Deterministic shift by -display_delta: keeps states relative to a display
/// that moved by display_delta.
void propagate_display_motion(ParticleSet& set, const VioDelta& display_delta);

/// Uniform-window range likelihood: (1 - p_nlos) when
/// |‖p - display_pos‖ - z| <= 3 sigma_r, p_nlos otherwise.
double range_likelihood(double predicted_distance, double z, const RangeNoiseParams& noise);

/// Multiplies each weight by the range likelihood and renormalizes. With
/// p_nlos = 0 and every particle outside the window the set is left
/// untouched and kDegenerateUpdate is returned.
UpdateStatus weight_range(ParticleSet& set, const Vec3& display_pos, const RangeMeasurement& meas,
                          const RangeNoiseParams& noise);

/// Range likelihood p_nlos + (1 - 2 p_nlos) * P(inside), where the residual
/// (predicted minus measured distance) carries extra Gaussian uncertainty of
/// the given variance. Zero variance gives the plain uniform window.
double blurred_range_likelihood(double residual, double variance, const RangeNoiseParams& noise);

/// weight_range against an uncertain display position: each particle's
/// window is blurred by the display covariance projected on its line of
/// sight. Reduces to weight_range when the covariance is zero.
UpdateStatus weight_range_blurred(ParticleSet& set, const Vec3& display_pos,
                                  const Mat3& display_covariance, const RangeMeasurement& meas,
                                  const RangeNoiseParams& noise);

/// 1 / sum(w_i^2) over normalized weights.
double effective_sample_size(const ParticleSet& set);

/// Systematic resampling to M equally weighted particles. A
/// floor(recovery_fraction * M) share is replaced by fresh draws from
/// init_region (when given) with uniform yaw.
void resample(ParticleSet& set, double recovery_fraction,
              const std::optional<SphericalShell>& init_region);

/// Jitter applied right after resampling so duplicated particles spread out
/// again. Per dimension the standard deviation is
/// scale * robust_spread * M^(-1/8), where robust_spread is 1.4826 times the
/// median absolute deviation (circular for theta), floored at the minimums.
struct RougheningParams {
  double scale = 0.5;
  double min_position = 0.02;
  double min_theta = 0.005;
};

/// No-op when scale is zero and both minimums are zero.
void roughen(ParticleSet& set, const RougheningParams& params);

struct PointEstimate {
  RelState state;
  /// False when the yaw samples cancel (mean resultant length < 1e-9).
  bool theta_defined = true;
  double resultant_length = 1.0;
};

PointEstimate estimate(const ParticleSet& set);

/// Weighted mean and covariance of particle positions.
struct PositionMoments {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
};
PositionMoments position_moments(const ParticleSet& set);

/// Uniform position sample inside the shell, uniform yaw.
RelState sample_shell(const SphericalShell& shell, Rng& rng);

ParticleSet init_from_first_range(std::size_t m, const Vec3& display_pos, double z,
                                  const RangeNoiseParams& noise, double vertical_extent,
                                  std::uint64_t seed);

/// Resample when ESS < ess_fraction * M or when `interval` seconds passed.
struct ResamplePolicy {
  double ess_fraction = 0.5;
  double interval = 5.0;

  bool due(const ParticleSet& set, double now, double last_resample) const;
};

}  // namespace relloc
