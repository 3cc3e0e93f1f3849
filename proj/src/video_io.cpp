#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "spv/errors.hpp"
#include "spv/image_io.hpp"

namespace spv {

std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
  return std::filesystem::path(raw.string() + ".json");
}

VideoHeader read_video_header(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open video sidecar " + sidecar.string());
  const auto j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  auto bad = [&](const std::string& what) {
    throw ValidationError("video", sidecar.string() + ": " + what);
  };
  if (j.is_discarded() || !j.is_object()) bad("not a JSON object");
  if (!j.contains("width") || !j["width"].is_number_integer() || !j.contains("height") ||
      !j["height"].is_number_integer()) {
    bad("width and height must be integers");
  }
  VideoHeader h;
  h.width = j["width"].get<int>();
  h.height = j["height"].get<int>();
  if (j.contains("fps")) {
    if (!j["fps"].is_number()) bad("fps must be a number");
    h.fps = j["fps"].get<double>();
  }
  if (h.width < 1 || h.height < 1 || h.width > 16384 || h.height > 16384) {
    bad("frame dimensions out of range");
  }
  if (!(h.fps > 0.0) || !std::isfinite(h.fps)) bad("fps must be > 0");
  return h;
}

void write_video_header(const std::filesystem::path& sidecar, const VideoHeader& header) {
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw IoError("cannot open " + sidecar.string() + " for writing");
  out << nlohmann::json{{"width", header.width}, {"height", header.height}, {"fps", header.fps}}
             .dump(2)
      << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + sidecar.string());
}

RawVideoReader::RawVideoReader(const std::filesystem::path& path, const VideoHeader& header)
    : in_(path, std::ios::binary), header_(header) {
  if (!in_) throw IoError("cannot open video " + path.string());
}

std::optional<GrayImage> RawVideoReader::next() {
  GrayImage frame{header_.width, header_.height, {}};
  frame.pixels.resize(static_cast<std::size_t>(header_.width) * header_.height);
  in_.read(reinterpret_cast<char*>(frame.pixels.data()),
           static_cast<std::streamsize>(frame.pixels.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0 && in_.eof()) return std::nullopt;
  if (got != frame.pixels.size()) {
    throw IoError("truncated frame " + std::to_string(index_) + ": got " +
                  std::to_string(got) + " of " + std::to_string(frame.pixels.size()) +
                  " bytes");
  }
  ++index_;
  return frame;
}

RawVideoWriter::RawVideoWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
}

void RawVideoWriter::write(const GrayImage& frame) {
  out_.write(reinterpret_cast<const char*>(frame.pixels.data()),
             static_cast<std::streamsize>(frame.pixels.size()));
  if (!out_) throw IoError("write failed: " + path_.string());
}

void RawVideoWriter::close() {
  out_.flush();
  if (!out_) throw IoError("write failed: " + path_.string());
  out_.close();
}

// ---------------------------------------------------------------------------

GazeTrace::GazeTrace(std::vector<Entry> entries) : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const Entry& a, const Entry& b) { return a.frame < b.frame; });
}

GazeTransform GazeTrace::at(long long frame) const {
  auto it = std::upper_bound(entries_.begin(), entries_.end(), frame,
                             [](long long f, const Entry& e) { return f < e.frame; });
  if (it == entries_.begin()) return {};
  return std::prev(it)->gaze;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_field(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

GazeTrace parse_gaze_trace(std::string_view text, const std::string& source) {
  std::vector<GazeTrace::Entry> entries;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool first_content = true;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }

    std::vector<std::string_view> fields;
    std::size_t f0 = 0;
    while (true) {
      const auto comma = line.find(',', f0);
      fields.push_back(line.substr(f0, comma == std::string_view::npos ? line.size() - f0
                                                                       : comma - f0));
      if (comma == std::string_view::npos) break;
      f0 = comma + 1;
    }

    auto fail = [&](const std::string& what) {
      throw ValidationError("trace", source + ":" + std::to_string(line_no) + ": " + what);
    };

    GazeTrace::Entry e;
    const bool numeric = !fields.empty() && parse_field(fields[0], e.frame);
    if (!numeric && first_content) {
      first_content = false;  // header row
      if (end == text.size()) break;
      continue;
    }
    first_content = false;
    if (fields.size() != 4) fail("expected 4 fields, got " + std::to_string(fields.size()));
    if (!numeric || e.frame < 0) fail("frame_index must be a non-negative integer");
    if (!parse_field(fields[1], e.gaze.dx_deg) || !parse_field(fields[2], e.gaze.dy_deg) ||
        !parse_field(fields[3], e.gaze.rot_deg)) {
      fail("dx_deg, dy_deg and rot_deg must be numbers");
    }
    if (!std::isfinite(e.gaze.dx_deg) || !std::isfinite(e.gaze.dy_deg) ||
        !std::isfinite(e.gaze.rot_deg)) {
      fail("gaze values must be finite");
    }
    entries.push_back(e);
    if (end == text.size()) break;
  }
  return GazeTrace(std::move(entries));
}

GazeTrace read_gaze_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gaze trace " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_gaze_trace(ss.str(), path.string());
}

}  // namespace spv
