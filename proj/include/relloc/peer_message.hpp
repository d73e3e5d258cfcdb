#pragma once

#include "relloc/pf_core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace relloc {

/// Per-link budget: 16 kbit/s at 10 Hz.
inline constexpr std::size_t kMaxPeerMessageBytes = 200;

/// VIO snapshot a node sends to its ranging neighbors. `payload` holds the
/// cumulative displacement since the previous send; `odometer` holds the
/// sender's running VIO position so a receiver can bridge dropped messages.
struct PeerMessage {
  NodeId source = 0;
  std::uint64_t sequence = 0;
  double timestamp = 0.0;
  VioDelta payload;
  Vec3 odometer = Vec3::Zero();
  std::size_t size_bytes = 0;
};

/// Little-endian fixed layout:
///   u16 magic 0x4C52, u8 version, u8 reserved,
///   u32 source, u64 sequence, f64 timestamp,
///   f64 dx, f64 dy, f64 dz, f64 dt, f64 odo_x, f64 odo_y, f64 odo_z
inline constexpr std::size_t kPeerMessageWireSize = 4 + 4 + 8 + 8 + 7 * 8;

std::vector<std::uint8_t> encode(const PeerMessage& msg);
/// nullopt on a short buffer or a bad magic/version.
std::optional<PeerMessage> decode(std::span<const std::uint8_t> bytes);

}  // namespace relloc
