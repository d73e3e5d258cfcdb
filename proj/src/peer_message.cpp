#include "relloc/peer_message.hpp"

#include <bit>
#include <cstring>

namespace relloc {
namespace {

constexpr std::uint16_t kMagic = 0x4C52;
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::endian::native == std::endian::little, "wire format assumes little endian");
  const auto* raw = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode(const PeerMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kPeerMessageWireSize);
  put<std::uint16_t>(out, kMagic);
  put<std::uint8_t>(out, kVersion);
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, msg.source);
  put<std::uint64_t>(out, msg.sequence);
  put<double>(out, msg.timestamp);
  put<double>(out, msg.payload.dx);
  put<double>(out, msg.payload.dy);
  put<double>(out, msg.payload.dz);
  put<double>(out, msg.payload.dt);
  put<double>(out, msg.odometer.x());
  put<double>(out, msg.odometer.y());
  put<double>(out, msg.odometer.z());
  return out;
}

std::optional<PeerMessage> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPeerMessageWireSize) return std::nullopt;
  std::size_t off = 0;
  if (get<std::uint16_t>(bytes, off) != kMagic) return std::nullopt;
  if (get<std::uint8_t>(bytes, off) != kVersion) return std::nullopt;
  off += 1;
  PeerMessage msg;
  msg.source = get<std::uint32_t>(bytes, off);
  msg.sequence = get<std::uint64_t>(bytes, off);
  msg.timestamp = get<double>(bytes, off);
  msg.payload.dx = get<double>(bytes, off);
  msg.payload.dy = get<double>(bytes, off);
  msg.payload.dz = get<double>(bytes, off);
  msg.payload.dt = get<double>(bytes, off);
  const double ox = get<double>(bytes, off);
  const double oy = get<double>(bytes, off);
  const double oz = get<double>(bytes, off);
  msg.odometer = Vec3(ox, oy, oz);
  msg.payload.source_node = msg.source;
  msg.payload.sequence = msg.sequence;
  msg.payload.timestamp = msg.timestamp;
  msg.size_bytes = off;
  return msg;
}

}  // namespace relloc
