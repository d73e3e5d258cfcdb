#include "relloc/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relloc {

VioSensor::VioSensor(const Trajectory& truth, VioNoiseParams noise, std::uint64_t seed)
    : truth_(truth), noise_(noise), rng_(seed) {
  if (truth_.samples.empty()) throw std::invalid_argument("VIO sensor needs a trajectory");
  start_yaw_ = truth_.samples.front().yaw;
}

VioDelta VioSensor::measure(std::size_t k) {
  if (k != last_tick_ + 1 || k >= truth_.samples.size()) {
    throw std::out_of_range("VIO ticks must be consecutive and within the trajectory");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  drift_ += noise_.sigma_theta * gauss(rng_);
  const Vec3 world = truth_.samples[k].position - truth_.samples[k - 1].position;
  const Vec3 local = rotate_yaw(world, -(start_yaw_ + drift_));
  VioDelta d;
  d.dx = local.x() + noise_.sigma_xyz * gauss(rng_);
  d.dy = local.y() + noise_.sigma_xyz * gauss(rng_);
  d.dz = local.z() + noise_.sigma_xyz * gauss(rng_);
  d.dt = 1.0 / truth_.hz;
  d.source_node = truth_.node;
  d.sequence = k;
  d.timestamp = truth_.samples[k].time;
  last_tick_ = k;
  return d;
}

VioDelta vio_measure(const Trajectory& truth, std::size_t tick, const VioNoiseParams& noise,
                     std::uint64_t seed) {
  if (tick == 0) throw std::out_of_range("VIO deltas start at tick 1");
  VioSensor sensor(truth, noise, seed);
  VioDelta d;
  for (std::size_t k = 1; k <= tick; ++k) d = sensor.measure(k);
  return d;
}

std::optional<double> sample_uwb_range(double true_dist, bool nlos, const UwbChannelParams& params,
                                       Rng& rng) {
  if (!(true_dist >= 0.0) || true_dist > params.radio_radius) return std::nullopt;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double z;
  if (!nlos) {
    z = true_dist + params.sigma_r * gauss(rng);
  } else {
    const double p_outlier = std::min(params.outlier_factor * params.p_nlos, params.outlier_cap);
    if (unit(rng) < p_outlier) {
      std::exponential_distribution<double> bias(1.0 / params.outlier_mean);
      z = true_dist + bias(rng);
    } else {
      z = true_dist + params.nlos_sigma_factor * params.sigma_r * gauss(rng);
    }
  }
  return std::max(z, 0.0);
}

std::optional<double> transport_deliver(const PeerMessage& msg, const TransportParams& params,
                                        Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (params.drop_prob > 0.0 && unit(rng) < params.drop_prob) return std::nullopt;
  std::normal_distribution<double> delay(params.delay_mean, params.delay_std);
  return msg.timestamp + std::max(0.0, delay(rng));
}

}  // namespace relloc
