#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <vector>

#include "relloc/peer_message.hpp"

using namespace relloc;

namespace {

PeerMessage sample_message() {
  PeerMessage m;
  m.source = 7;
  m.sequence = 123456789012ULL;
  m.timestamp = 42.125;
  m.payload.dx = 0.1;
  m.payload.dy = -0.02;
  m.payload.dz = 0.3;
  m.payload.dt = 0.1;
  m.odometer = Vec3(12.5, -0.25, 3.0);
  return m;
}

}  // namespace

TEST(PeerMessage_Budget, WireSizeFitsPerMessageBudget) {
  // 16 kbit/s at 10 messages per second leaves 200 bytes per message.
  EXPECT_EQ(kMaxPeerMessageBytes, 16000u / 8u / 10u);
  EXPECT_LE(kPeerMessageWireSize, kMaxPeerMessageBytes);
  EXPECT_EQ(encode(sample_message()).size(), kPeerMessageWireSize);
}

TEST(PeerMessage_Codec, RoundTripIsExact) {
  const PeerMessage m = sample_message();
  const auto bytes = encode(m);
  const auto back = decode(bytes);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->source, m.source);
  EXPECT_EQ(back->sequence, m.sequence);
  EXPECT_EQ(back->timestamp, m.timestamp);
  EXPECT_EQ(back->payload.dx, m.payload.dx);
  EXPECT_EQ(back->payload.dy, m.payload.dy);
  EXPECT_EQ(back->payload.dz, m.payload.dz);
  EXPECT_EQ(back->payload.dt, m.payload.dt);
  EXPECT_EQ(back->odometer, m.odometer);
  EXPECT_EQ(back->size_bytes, bytes.size());
  // The decoded payload is tagged with the sender identity.
  EXPECT_EQ(back->payload.source_node, m.source);
  EXPECT_EQ(back->payload.sequence, m.sequence);
}

TEST(PeerMessage_Codec, ExtremeValuesSurvive) {
  PeerMessage m = sample_message();
  m.source = std::numeric_limits<NodeId>::max();
  m.sequence = std::numeric_limits<std::uint64_t>::max();
  m.payload.dx = -0.0;
  m.payload.dz = std::numeric_limits<double>::denorm_min();
  const auto back = decode(encode(m));
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->source, m.source);
  EXPECT_EQ(back->sequence, m.sequence);
  EXPECT_TRUE(std::signbit(back->payload.dx));
  EXPECT_EQ(back->payload.dz, m.payload.dz);
}

TEST(PeerMessage_Codec, LayoutIsLittleEndianWithMagic) {
  const auto bytes = encode(sample_message());
  EXPECT_EQ(bytes[0], 0x52);
  EXPECT_EQ(bytes[1], 0x4C);
  EXPECT_EQ(bytes[2], 1);  // version
  std::uint32_t source = 0;
  std::memcpy(&source, bytes.data() + 4, sizeof(source));
  EXPECT_EQ(source, 7u);
}

TEST(PeerMessage_Codec, ShortBufferRejected) {
  auto bytes = encode(sample_message());
  bytes.pop_back();
  EXPECT_FALSE(decode(bytes).has_value());
  EXPECT_FALSE(decode(std::vector<std::uint8_t>{}).has_value());
}

TEST(PeerMessage_Codec, BadMagicOrVersionRejected) {
  auto bytes = encode(sample_message());
  bytes[0] ^= 0xFF;
  EXPECT_FALSE(decode(bytes).has_value());
  bytes = encode(sample_message());
  bytes[2] = 99;
  EXPECT_FALSE(decode(bytes).has_value());
}
