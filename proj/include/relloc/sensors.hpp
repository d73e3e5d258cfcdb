#pragma once

#include "relloc/geometry.hpp"
#include "relloc/peer_message.hpp"
#include "relloc/pf_core.hpp"
#include "relloc/trajectory.hpp"

#include <cstdint>
#include <optional>

namespace relloc {

/// Simulated visual-inertial odometry for one device. The VIO frame starts at
/// the device's first pose; its heading then drifts as a random walk, and each
/// reported displacement carries independent Gaussian noise.
class VioSensor {
 public:
  VioSensor(const Trajectory& truth, VioNoiseParams noise, std::uint64_t seed);

  /// Noisy displacement between ticks k-1 and k, expressed in the VIO frame.
  /// Ticks must be requested in increasing order starting from 1.
  VioDelta measure(std::size_t k);

  /// Heading of the VIO frame in the world after the last measured tick.
  double frame_yaw() const { return start_yaw_ + drift_; }
  double start_yaw() const { return start_yaw_; }
  std::size_t last_tick() const { return last_tick_; }

 private:
  const Trajectory& truth_;
  VioNoiseParams noise_;
  Rng rng_;
  double start_yaw_ = 0.0;
  double drift_ = 0.0;
  std::size_t last_tick_ = 0;
};

/// Tick-k measurement of a fresh sensor; replays ticks 1..k, so it is meant
/// for tests rather than simulation loops.
VioDelta vio_measure(const Trajectory& truth, std::size_t tick, const VioNoiseParams& noise,
                     std::uint64_t seed);

struct UwbChannelParams {
  double sigma_r = 0.25;
  double p_nlos = 0.1;
  /// Outlier probability under NLOS is min(outlier_factor * p_nlos, outlier_cap).
  double outlier_factor = 3.0;
  double outlier_cap = 0.5;
  /// Mean of the exponential positive bias added to NLOS outliers (m).
  double outlier_mean = 3.0;
  /// Noise inflation for NLOS measurements that are not outliers.
  double nlos_sigma_factor = 2.0;
  double radio_radius = 60.0;
};

/// One UWB range for a link of true length `true_dist`, or nullopt when the
/// nodes are out of radio range. Results are never negative.
std::optional<double> sample_uwb_range(double true_dist, bool nlos, const UwbChannelParams& params,
                                       Rng& rng);

struct TransportParams {
  double drop_prob = 0.0;
  double delay_mean = 0.1;
  double delay_std = 0.02;
};

/// Delivery time for a message sent at msg.timestamp, or nullopt if dropped.
std::optional<double> transport_deliver(const PeerMessage& msg, const TransportParams& params,
                                        Rng& rng);

}  // namespace relloc
