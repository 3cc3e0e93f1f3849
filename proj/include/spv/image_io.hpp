#pragma once

// 8-bit grayscale still images (PNG and binary PGM) and raw video streams.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spv/frame.hpp"
#include "spv/vision.hpp"

namespace spv {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

Frame to_frame(const GrayImage& image);
GrayImage to_image(const Frame& frame);

/// Detects the format from the file signature. Color PNGs are converted to
/// luminance.
GrayImage read_image(const std::filesystem::path& path);
/// Format chosen by extension: ".png" or ".pgm".
void write_image(const std::filesystem::path& path, const GrayImage& image);

GrayImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);

/// Nearest-neighbour resize (blocky upscaling for phosphene panels).
GrayImage resize_nearest(const GrayImage& image, int width, int height);

/// Panels placed left to right, each scaled to `height`, separated by
/// `gap` black columns.
GrayImage montage(std::span<const GrayImage> panels, int height, int gap = 4);

// ---------------------------------------------------------------------------
// Raw video: headerless 8-bit frames plus a JSON sidecar at "<path>.json".

struct VideoHeader {
  int width = 0;
  int height = 0;
  double fps = 30.0;
};

std::filesystem::path sidecar_path(const std::filesystem::path& raw);
VideoHeader read_video_header(const std::filesystem::path& sidecar);
void write_video_header(const std::filesystem::path& sidecar, const VideoHeader& header);

class RawVideoReader {
 public:
  RawVideoReader(const std::filesystem::path& path, const VideoHeader& header);
  /// Next frame, or nullopt at a clean end of input. A trailing partial frame
  /// throws IoError.
  std::optional<GrayImage> next();

 private:
  std::ifstream in_;
  VideoHeader header_;
  std::size_t index_ = 0;
};

class RawVideoWriter {
 public:
  explicit RawVideoWriter(const std::filesystem::path& path);
  void write(const GrayImage& frame);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Gaze samples keyed by frame index, CSV "frame_index,dx_deg,dy_deg,rot_deg".
/// A frame uses the latest entry at or before its index (zero gaze before the
/// first entry). A non-numeric first line is taken as a header; blank lines
/// and lines starting with '#' are skipped.
class GazeTrace {
 public:
  struct Entry {
    long long frame = 0;
    GazeTransform gaze;
  };

  explicit GazeTrace(std::vector<Entry> entries);

  GazeTransform at(long long frame) const;
  std::span<const Entry> entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Throws ValidationError (stage "trace", detail "<file>:<line>: ...") on
/// malformed content and IoError when the file cannot be read.
GazeTrace read_gaze_trace(const std::filesystem::path& path);
GazeTrace parse_gaze_trace(std::string_view text, const std::string& source = "trace");

}  // namespace spv
