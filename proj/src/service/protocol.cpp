#include "spv/protocol.hpp"

#include <cstring>

namespace spv::protocol {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'V', 'F'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode(const FrameMessage& msg) {
  const GrayImage& img = msg.image;
  if (img.width < 1 || img.height < 1 || img.width > 0xFFFF || img.height > 0xFFFF ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw std::invalid_argument("frame dimensions do not fit the SPVF header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + img.pixels.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(msg.type));
  put_u32(out, msg.frame_id);
  put_u16(out, static_cast<std::uint16_t>(img.width));
  put_u16(out, static_cast<std::uint16_t>(img.height));
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

FrameMessage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw ProtocolError("bad_frame", "message shorter than the " +
                                         std::to_string(kHeaderSize) + "-byte header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ProtocolError("bad_frame", "missing SPVF magic");
  }
  const std::uint8_t type = bytes[4];
  if (type < 1 || type > 3) {
    throw ProtocolError("bad_frame", "unknown msg_type " + std::to_string(type));
  }
  FrameMessage msg;
  msg.type = static_cast<MessageType>(type);
  msg.frame_id = get_u32(bytes.data() + 5);
  const int width = get_u16(bytes.data() + 9);
  const int height = get_u16(bytes.data() + 11);
  if (width == 0 || height == 0) throw ProtocolError("bad_frame", "zero frame dimension");
  const std::size_t expected = static_cast<std::size_t>(width) * height;
  const std::size_t got = bytes.size() - kHeaderSize;
  if (got != expected) {
    throw ProtocolError("bad_frame", "payload is " + std::to_string(got) + " bytes, header " +
                                         std::to_string(width) + "x" +
                                         std::to_string(height) + " needs " +
                                         std::to_string(expected));
  }
  msg.image.width = width;
  msg.image.height = height;
  msg.image.pixels.assign(bytes.begin() + kHeaderSize, bytes.end());
  return msg;
}

}  // namespace spv::protocol
