#pragma once

#include "relloc/geometry.hpp"
#include "relloc/peer_message.hpp"
#include "relloc/pf_core.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace relloc {

struct FilterConfig {
  std::size_t display_particles = 500;
  std::size_t target_particles = 300;
  VioNoiseParams vio;
  RangeNoiseParams range;
  double vertical_extent = 6.0;
  double recovery_fraction = 0.02;
  ResamplePolicy resample;
  /// Jitter applied to target sets after each resample.
  RougheningParams roughening;
  /// Ranges older than this (relative to filter time) are dropped.
  double stale_range_age = 2.0;
  /// Remote deltas for a not-yet-ranged node are kept this long.
  double buffer_window = 5.0;
  std::uint64_t seed = 1;
};

enum class VioOutcome { kApplied, kDuplicate, kBuffered, kIgnored };
enum class RangeOutcome { kInitialized, kUpdated, kStale, kNotInvolved, kDegenerate };

class ModeChangeAfterStart : public std::logic_error {
 public:
  ModeChangeAfterStart() : std::logic_error("independent mode must be set before the first event") {}
};

struct TargetEstimate {
  RelState state;
  bool theta_defined = true;
};

struct TargetBelief {
  static constexpr std::size_t kPendingCapacity = 64;
  static constexpr std::size_t kRecentSequences = 32;

  NodeId node_id = 0;
  ParticleSet inner;
  double last_update = 0.0;
  double last_resample = 0.0;
  bool initialized = false;
  /// Remote deltas received before the first range.
  std::vector<VioDelta> pending;
  std::array<std::uint64_t, kRecentSequences> recent_sequences{};
  std::size_t recent_count = 0;
  std::size_t recent_head = 0;

  bool seen_sequence(std::uint64_t seq) const;
  void remember_sequence(std::uint64_t seq);
};

struct FilterCounters {
  std::uint64_t ranges_applied = 0;
  std::uint64_t stale_ranges = 0;
  std::uint64_t degenerate_updates = 0;
  std::uint64_t duplicate_deltas = 0;
  std::uint64_t discarded_deltas = 0;
  std::uint64_t display_resamples = 0;
};

/// Per-node joint filter. The display's drift correction is tracked by an
/// outer particle set; every remote node gets an inner 4-DoF particle set
/// conditioned on the display estimate. Inner sets live in the display's VIO
/// origin frame; estimates are reported relative to the corrected display.
class JointFilter {
 public:
  JointFilter(NodeId self_id, FilterConfig config);

  NodeId self_id() const { return self_id_; }
  const FilterConfig& config() const { return config_; }

  /// Skip display reweighting (independent per-target filters). Throws
  /// ModeChangeAfterStart once any event has been processed.
  void set_independent_mode(bool enabled);
  bool independent_mode() const { return independent_; }

  void on_vio_self(const VioDelta& delta);
  VioOutcome on_vio_remote(const VioDelta& delta);
  /// Link-level handling of a received snapshot: stale or repeated sequence
  /// numbers are dropped and gaps are bridged with the sender's odometer.
  VioOutcome on_peer_message(const PeerMessage& msg);
  RangeOutcome on_range(const RangeMeasurement& meas);

  std::map<NodeId, TargetEstimate> joint_estimate() const;

  /// Mean display drift correction (offset added to the raw VIO position).
  Vec3 display_correction() const;
  /// Per-axis standard deviation of the display correction particles.
  Vec3 display_spread() const;
  Vec3 corrected_display_position() const;
  const Pose6DoF& raw_vio_pose() const { return raw_vio_pose_; }

  const std::map<NodeId, TargetBelief>& targets() const { return targets_; }
  const ParticleSet& display_particles() const { return display_; }
  const FilterCounters& counters() const { return counters_; }
  double now() const { return now_; }

  std::size_t memory_bytes() const;

 private:
  struct LinkState {
    std::uint64_t last_sequence = 0;
    double last_timestamp = 0.0;
    Vec3 last_odometer = Vec3::Zero();
    bool has_previous = false;
  };

  void touch(double timestamp);
  void flush_display_diffusion();
  void reweight_display(const PositionMoments& target, double z);
  void maybe_resample_display();
  TargetBelief& belief_for(NodeId node);
  std::uint64_t seed_for(NodeId node) const;

  NodeId self_id_;
  FilterConfig config_;
  bool independent_ = false;
  bool started_ = false;
  double now_ = 0.0;

  ParticleSet display_;
  double display_last_resample_ = 0.0;
  double pending_display_variance_ = 0.0;
  Pose6DoF raw_vio_pose_;

  std::map<NodeId, TargetBelief> targets_;
  std::map<NodeId, LinkState> links_;
  FilterCounters counters_;
};

}  // namespace relloc
