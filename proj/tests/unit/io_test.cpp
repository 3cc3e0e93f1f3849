#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spv/errors.hpp"
#include "spv/image_io.hpp"
#include "support/tempdir.hpp"

using namespace spv;

namespace {

GrayImage gradient(int w, int h) {
  GrayImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 7);
  return img;
}

}  // namespace

TEST_CASE("u8 <-> unit conversion round trips") {
  const GrayImage img = gradient(16, 16);
  const Frame f = to_frame(img);
  CHECK(f.at(1, 0) == 7.0 / 255.0);
  CHECK(to_image(f) == img);
}

TEST_CASE("PNG and PGM files round trip") {
  TempDir dir;
  const GrayImage img = gradient(31, 17);
  for (const char* name : {"a.png", "a.pgm", "A.PNG"}) {
    write_image(dir / name, img);
    CHECK(read_image(dir / name) == img);
  }
  CHECK_THROWS_AS(write_image(dir / "a.jpg", img), IoError);
  CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
  std::ofstream(dir / "junk.png") << "not an image";
  CHECK_THROWS_AS(read_image(dir / "junk.png"), IoError);
}

TEST_CASE("PGM decoding: comments, 16-bit and scaling") {
  const std::string text = "P5\n# comment\n2 1\n# more\n65535\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (std::uint8_t b : {0xFF, 0xFF, 0x80, 0x00}) bytes.push_back(b);
  const GrayImage img = decode_pgm(bytes);
  CHECK(img.width == 2);
  CHECK(img.pixels[0] == 255);
  CHECK(img.pixels[1] == 128);

  const std::string small = "P5 2 1 3\n";
  std::vector<std::uint8_t> sb(small.begin(), small.end());
  sb.push_back(3);
  sb.push_back(1);
  const GrayImage s = decode_pgm(sb);
  CHECK(s.pixels[0] == 255);
  CHECK(s.pixels[1] == 85);

  std::vector<std::uint8_t> truncated(sb.begin(), sb.end() - 1);
  CHECK_THROWS_AS(decode_pgm(truncated), IoError);
}

TEST_CASE("montage and nearest resize") {
  const GrayImage a = gradient(4, 2);
  const GrayImage r = resize_nearest(a, 8, 4);
  CHECK(r.pixels[0] == a.pixels[0]);
  CHECK(r.pixels[1] == a.pixels[0]);
  CHECK(r.pixels[2] == a.pixels[1]);
  const GrayImage panels[] = {a, gradient(2, 2)};
  const GrayImage m = montage(panels, 4, 3);
  CHECK(m.height == 4);
  CHECK(m.width == 8 + 3 + 4);
}

TEST_CASE("raw video with sidecar") {
  TempDir dir;
  const auto raw = dir / "v.raw";
  write_video_header(sidecar_path(raw), {8, 4, 25});
  CHECK(sidecar_path(raw).filename() == "v.raw.json");
  {
    RawVideoWriter w(raw);
    for (int i = 0; i < 3; ++i) w.write(gradient(8, 4));
    w.close();
  }
  const VideoHeader h = read_video_header(sidecar_path(raw));
  CHECK(h.width == 8);
  CHECK(h.fps == 25);
  RawVideoReader r(raw, h);
  int n = 0;
  while (auto f = r.next()) {
    CHECK(*f == gradient(8, 4));
    ++n;
  }
  CHECK(n == 3);

  std::ofstream(raw, std::ios::app | std::ios::binary) << "xx";
  RawVideoReader partial(raw, h);
  for (int i = 0; i < 3; ++i) partial.next();
  CHECK_THROWS_AS(partial.next(), IoError);

  std::ofstream(dir / "bad.json") << R"({"width": 0, "height": 4})";
  CHECK_THROWS_AS(read_video_header(dir / "bad.json"), ValidationError);
  std::ofstream(dir / "bad2.json") << "{";
  CHECK_THROWS_AS(read_video_header(dir / "bad2.json"), ValidationError);
  CHECK_THROWS_AS(read_video_header(dir / "none.json"), IoError);
}

TEST_CASE("gaze traces: header, sample-and-hold, diagnostics") {
  const GazeTrace t = parse_gaze_trace(
      "frame_index,dx_deg,dy_deg,rot_deg\n"
      "# comment\n"
      "5, 1.5, -2, 0\n"
      "\n"
      "2,0.5,0,10\n");
  CHECK(t.entries().size() == 2);
  CHECK(t.at(0) == GazeTransform{});
  CHECK(t.at(2).rot_deg == 10);
  CHECK(t.at(4).dx_deg == 0.5);
  CHECK(t.at(5).dx_deg == 1.5);
  CHECK(t.at(1000).dy_deg == -2);

  try {
    parse_gaze_trace("0,0,0,0\n1,0,zero,0\n", "g.csv");
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.stage() == "trace");
    CHECK(std::string(e.what()).find("g.csv:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_gaze_trace("0,0,0\n"), ValidationError);
  CHECK_THROWS_AS(parse_gaze_trace("-1,0,0,0\n"), ValidationError);
  CHECK_THROWS_AS(parse_gaze_trace("0,nan,0,0\n"), ValidationError);
  CHECK_THROWS_AS(read_gaze_trace("/nonexistent/trace.csv"), IoError);
}
