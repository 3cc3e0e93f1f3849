#pragma once

// Wire format shared by the stream service and its clients.
//
// Binary messages, little-endian:
//   "SPVF" | msg_type u8 | frame_id u32 | width u16 | height u16 | payload
// with a width*height payload of 8-bit luminance. Text messages are JSON.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spv/frame.hpp"
#include "spv/image_io.hpp"

namespace spv::protocol {

enum class MessageType : std::uint8_t { InputFrame = 1, Percept = 2, Mask = 3 };

inline constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 2 + 2;

struct FrameMessage {
  MessageType type = MessageType::InputFrame;
  std::uint32_t frame_id = 0;
  GrayImage image;
};

/// A message the peer got wrong. `code` goes into the error reply.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

std::vector<std::uint8_t> encode(const FrameMessage& msg);

/// Throws ProtocolError("bad_frame", ...) on a short buffer, wrong magic,
/// unknown type, zero dimensions or a payload length that disagrees with the
/// header.
FrameMessage decode(std::span<const std::uint8_t> bytes);

}  // namespace spv::protocol
