#include "relloc/joint_filter.hpp"

#include <algorithm>
#include <cmath>

namespace relloc {
bool TargetBelief::seen_sequence(std::uint64_t seq) const {
  for (std::size_t i = 0; i < recent_count; ++i) {
    if (recent_sequences[i] == seq) return true;
  }
  return false;
}

void TargetBelief::remember_sequence(std::uint64_t seq) {
  recent_sequences[recent_head] = seq;
  recent_head = (recent_head + 1) % kRecentSequences;
  recent_count = std::min(recent_count + 1, kRecentSequences);
}

JointFilter::JointFilter(NodeId self_id, FilterConfig config)
    : self_id_(self_id), config_(std::move(config)) {
  std::vector<Particle> ps(std::max<std::size_t>(config_.display_particles, 1));
  display_ = ParticleSet(std::move(ps), splitmix64(config_.seed ^ (std::uint64_t{self_id_} << 32)));
}

void JointFilter::set_independent_mode(bool enabled) {
  if (started_) throw ModeChangeAfterStart();
  independent_ = enabled;
}

void JointFilter::touch(double timestamp) {
  started_ = true;
  now_ = std::max(now_, timestamp);
}

std::uint64_t JointFilter::seed_for(NodeId node) const {
  return splitmix64(config_.seed ^ (std::uint64_t{self_id_} << 32) ^ (std::uint64_t{node} + 1));
}

TargetBelief& JointFilter::belief_for(NodeId node) {
  auto it = targets_.find(node);
  if (it == targets_.end()) {
    TargetBelief b;
    b.node_id = node;
    b.pending.reserve(TargetBelief::kPendingCapacity);
    it = targets_.emplace(node, std::move(b)).first;
  }
  return it->second;
}

void JointFilter::on_vio_self(const VioDelta& delta) {
  touch(delta.timestamp);
  raw_vio_pose_.translation += delta.displacement();
  const double scale = delta.dt > 0.0 ? delta.dt / config_.vio.reference_dt : 1.0;
  pending_display_variance_ += config_.vio.sigma_xyz * config_.vio.sigma_xyz * scale;
}

void JointFilter::flush_display_diffusion() {
  if (pending_display_variance_ <= 0.0) return;
  const double s = std::sqrt(pending_display_variance_);
  pending_display_variance_ = 0.0;
  std::normal_distribution<double> gauss(0.0, s);
  Rng& rng = display_.rng();
  for (auto& p : display_.mutable_particles()) {
    p.state.x += gauss(rng);
    p.state.y += gauss(rng);
    p.state.z += gauss(rng);
  }
}

VioOutcome JointFilter::on_vio_remote(const VioDelta& delta) {
  touch(delta.timestamp);
  if (delta.source_node == self_id_) return VioOutcome::kIgnored;
  TargetBelief& b = belief_for(delta.source_node);
  if (b.seen_sequence(delta.sequence)) {
    ++counters_.duplicate_deltas;
    return VioOutcome::kDuplicate;
  }
  b.remember_sequence(delta.sequence);
  if (!b.initialized) {
    const double cutoff = now_ - config_.buffer_window;
    auto stale = std::remove_if(b.pending.begin(), b.pending.end(),
                                [&](const VioDelta& d) { return d.timestamp < cutoff; });
    counters_.discarded_deltas += static_cast<std::uint64_t>(b.pending.end() - stale);
    b.pending.erase(stale, b.pending.end());
    if (b.pending.size() == TargetBelief::kPendingCapacity) {
      b.pending.erase(b.pending.begin());
      ++counters_.discarded_deltas;
    }
    b.pending.push_back(delta);
    return VioOutcome::kBuffered;
  }
  propagate_vio(b.inner, delta, config_.vio);
  b.last_update = now_;
  return VioOutcome::kApplied;
}

VioOutcome JointFilter::on_peer_message(const PeerMessage& msg) {
  LinkState& link = links_[msg.source];
  if (link.has_previous && msg.sequence <= link.last_sequence) {
    touch(msg.timestamp);
    ++counters_.duplicate_deltas;
    return VioOutcome::kDuplicate;
  }
  VioDelta delta = msg.payload;
  delta.source_node = msg.source;
  delta.sequence = msg.sequence;
  delta.timestamp = msg.timestamp;
  if (link.has_previous && msg.sequence > link.last_sequence + 1) {
    const Vec3 d = msg.odometer - link.last_odometer;
    delta.dx = d.x();
    delta.dy = d.y();
    delta.dz = d.z();
    delta.dt = std::max(msg.timestamp - link.last_timestamp, msg.payload.dt);
  }
  link.last_sequence = msg.sequence;
  link.last_timestamp = msg.timestamp;
  link.last_odometer = msg.odometer;
  link.has_previous = true;
  return on_vio_remote(delta);
}

void JointFilter::reweight_display(const PositionMoments& target, double z) {
  const Vec3 raw = raw_vio_pose_.translation;
  const double trace_var = target.covariance.trace() / 3.0;
  for (auto& dp : display_.mutable_particles()) {
    const Vec3 u = target.mean - (raw + dp.state.position());
    const double r = u.norm();
    // Spread of the target distance along the line of sight.
    const double var = r > 1e-9 ? u.dot(target.covariance * u) / (r * r) : trace_var;
    const double likelihood = blurred_range_likelihood(r - z, std::max(var, 0.0), config_.range);
    dp.log_weight += std::log(std::max(likelihood, 1e-300));
  }
  display_.normalize();
}

void JointFilter::maybe_resample_display() {
  if (config_.resample.due(display_, now_, display_last_resample_)) {
    resample(display_, 0.0, std::nullopt);
    display_last_resample_ = now_;
    ++counters_.display_resamples;
  }
}

RangeOutcome JointFilter::on_range(const RangeMeasurement& meas) {
  NodeId remote;
  if (meas.initiator == self_id_) {
    remote = meas.responder;
  } else if (meas.responder == self_id_) {
    remote = meas.initiator;
  } else {
    return RangeOutcome::kNotInvolved;
  }
  if (remote == self_id_) return RangeOutcome::kNotInvolved;
  started_ = true;
  if (meas.timestamp < now_ - config_.stale_range_age) {
    ++counters_.stale_ranges;
    return RangeOutcome::kStale;
  }
  touch(meas.timestamp);
  flush_display_diffusion();
  const Vec3 display_pos = corrected_display_position();

  TargetBelief& b = belief_for(remote);
  if (!b.initialized) {
    b.inner = init_from_first_range(config_.target_particles, display_pos, meas.range_z,
                                    config_.range, config_.vertical_extent, seed_for(remote));
    b.initialized = true;
    b.last_update = now_;
    b.last_resample = now_;
    for (const VioDelta& d : b.pending) {
      if (d.timestamp > meas.timestamp) propagate_vio(b.inner, d, config_.vio);
    }
    b.pending.clear();
    ++counters_.ranges_applied;
    return RangeOutcome::kInitialized;
  }

  const PositionMoments prior = position_moments(b.inner);
  // In collaborative mode the display is uncertain too: the target window is
  // blurred by the display spread so drift is not forced onto the target.
  const UpdateStatus status =
      independent_ ? weight_range(b.inner, display_pos, meas, config_.range)
                   : weight_range_blurred(b.inner, display_pos,
                                          position_moments(display_).covariance, meas,
                                          config_.range);
  if (!independent_) reweight_display(prior, meas.range_z);
  b.last_update = now_;

  if (config_.resample.due(b.inner, now_, b.last_resample)) {
    const SphericalShell shell{display_pos, meas.range_z, config_.range.half_window(),
                               config_.vertical_extent};
    resample(b.inner, config_.recovery_fraction, shell);
    roughen(b.inner, config_.roughening);
    b.last_resample = now_;
  }
  if (!independent_) maybe_resample_display();
  ++counters_.ranges_applied;
  if (status == UpdateStatus::kDegenerateUpdate) {
    ++counters_.degenerate_updates;
    return RangeOutcome::kDegenerate;
  }
  return RangeOutcome::kUpdated;
}

Vec3 JointFilter::display_correction() const { return estimate(display_).state.position(); }

Vec3 JointFilter::display_spread() const {
  // Diffusion not yet applied to the particles still counts as spread.
  const PositionMoments m = position_moments(display_);
  const Vec3 var = m.covariance.diagonal().cwiseMax(0.0).array() + pending_display_variance_;
  return var.cwiseSqrt();
}

Vec3 JointFilter::corrected_display_position() const {
  return raw_vio_pose_.translation + display_correction();
}

std::map<NodeId, TargetEstimate> JointFilter::joint_estimate() const {
  std::map<NodeId, TargetEstimate> out;
  const Vec3 display_pos = corrected_display_position();
  for (const auto& [id, b] : targets_) {
    if (!b.initialized) continue;
    const PointEstimate e = estimate(b.inner);
    out.emplace(id, TargetEstimate{RelState(e.state.position() - display_pos, e.state.theta()),
                                   e.theta_defined});
  }
  return out;
}

std::size_t JointFilter::memory_bytes() const {
  // Approximate per-node overhead of std::map (three pointers plus colour).
  constexpr std::size_t kMapNode = 4 * sizeof(void*);
  std::size_t bytes = sizeof(*this) + display_.memory_bytes() - sizeof(ParticleSet);
  for (const auto& [id, b] : targets_) {
    bytes += kMapNode + sizeof(NodeId) + sizeof(TargetBelief);
    bytes += b.inner.memory_bytes() - sizeof(ParticleSet);
    bytes += b.pending.capacity() * sizeof(VioDelta);
  }
  bytes += links_.size() * (kMapNode + sizeof(NodeId) + sizeof(LinkState));
  return bytes;
}

}  // namespace relloc
