// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "spv/cli.hpp"
#include "spv/geometry.hpp"
#include "spv/image_io.hpp"
#include "spv/phosphene.hpp"
#include "spv/pipeline.hpp"
#include "spv/scenes.hpp"
#include "spv/service.hpp"
#include "spv/vision.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"
#include "support/ws_client.hpp"

using namespace spv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed sub-checks; the first few are reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failed_;
    if (failed_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {true, summary};
    return {false, std::to_string(failed_) + " failed: " + notes_};
  }

 private:
  int failed_ = 0;
  std::string notes_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Stimulus random_stimulus(std::mt19937_64& rng, std::size_t n, double hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  Stimulus s;
  for (std::size_t i = 0; i < n; ++i) s.amplitudes.push_back(u(rng));
  return s;
}

const AxonBundle& default_bundle() {
  static const AxonBundle b = build_bundle(AxonGrowthParams{});
  return b;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid{32, 20, 18, 11};
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (ModelKind kind : {ModelKind::Scoreboard, ModelKind::AxonMap}) {
    ModelParams m;
    m.kind = kind;
    m.eps = 0.0;
    const AxonBundle* bundle = kind == ModelKind::AxonMap ? &default_bundle() : nullptr;
    const SensitivityMap map = build_sensitivity_map(array, bundle, m, grid);
    const auto w = oracle::dense_weights(array, bundle, m, grid);
    std::vector<Stimulus> stims = {Stimulus{std::vector<double>(array.size(), 1.0)}};
    for (std::size_t e = 0; e < array.size(); ++e) {
      Stimulus s{std::vector<double>(array.size(), 0.0)};
      s.amplitudes[e] = 1.0;
      stims.push_back(s);
    }
    for (int k = 0; k < 20; ++k) stims.push_back(random_stimulus(rng, array.size()));
    for (const auto& s : stims) {
      for (double clamp : {1.0, 1e9}) {
        const Frame f = render_percept(map, s, clamp);
        const auto d = oracle::dense_render(w, array.size(), s.amplitudes, clamp);
        worst = std::max(worst, oracle::max_abs_diff(f.values(), d));
      }
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst <= 1e-12 && secs < 60.0,
          "max abs diff " + fmt(worst) + " (<= 1e-12), " + fmt(secs) + " s (< 60 s)"};
}

Outcome lambda_reduction() {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid;
  ModelParams sb;
  sb.kind = ModelKind::Scoreboard;
  ModelParams am;
  am.kind = ModelKind::AxonMap;
  am.lambda_um = 1.0;
  const SensitivityMap a = build_sensitivity_map(array, &default_bundle(), am, grid);
  const SensitivityMap b = build_sensitivity_map(array, nullptr, sb, grid);

  std::vector<Stimulus> stims = {Stimulus{std::vector<double>(array.size(), 1.0)}};
  for (std::size_t e = 0; e < array.size(); ++e) {
    Stimulus s{std::vector<double>(array.size(), 0.0)};
    s.amplitudes[e] = 1.0;
    stims.push_back(s);
  }
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) stims.push_back(random_stimulus(rng, array.size()));

  double worst = 0.0, all_ones = 0.0;
  for (std::size_t k = 0; k < stims.size(); ++k) {
    const double d = oracle::max_abs_diff(render_percept(a, stims[k]).values(),
                                          render_percept(b, stims[k]).values());
    if (k == 0) all_ones = d;
    worst = std::max(worst, d);
  }
  return {worst <= 0.05, "max per-pixel diff " + fmt(worst) + " (<= 0.05; all-ones stimulus " +
                             fmt(all_ones) + ")"};
}

Outcome linearity() {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> alpha(0.0, 2.0);
  double worst = 0.0, peak = 0.0;
  for (ModelKind kind : {ModelKind::Scoreboard, ModelKind::AxonMap}) {
    ModelParams m;
    m.kind = kind;
    const SensitivityMap map = build_sensitivity_map(
        array, kind == ModelKind::AxonMap ? &default_bundle() : nullptr, m, grid);
    for (int k = 0; k < 100; ++k) {
      const Stimulus s1 = random_stimulus(rng, array.size(), 0.15);
      const Stimulus s2 = random_stimulus(rng, array.size(), 0.15);
      const double c = alpha(rng);
      Stimulus sum, scaled;
      for (std::size_t i = 0; i < array.size(); ++i) {
        sum.amplitudes.push_back(s1.amplitudes[i] + s2.amplitudes[i]);
        scaled.amplitudes.push_back(c * s1.amplitudes[i]);
      }
      const double no_clamp = std::numeric_limits<double>::infinity();
      const Frame f1 = render_percept(map, s1, no_clamp), f2 = render_percept(map, s2, no_clamp);
      const Frame fs = render_percept(map, sum, no_clamp);
      const Frame fc = render_percept(map, scaled, no_clamp);
      for (std::size_t p = 0; p < f1.size(); ++p) {
        worst = std::max(worst, std::abs(fs.values()[p] - f1.values()[p] - f2.values()[p]));
        worst = std::max(worst, std::abs(fc.values()[p] - c * f1.values()[p]));
        peak = std::max(peak, fs.values()[p]);
      }
    }
  }
  return {worst <= 1e-6 && peak < 1.0,
          "max deviation " + fmt(worst) + " (<= 1e-6), peak " + fmt(peak) + " (unsaturated)"};
}

RetinalPoint rotate_about(RetinalPoint p, RetinalPoint c, double deg) {
  const double t = deg * std::acos(-1.0) / 180.0;
  const double dx = p.x_um - c.x_um, dy = p.y_um - c.y_um;
  return {c.x_um + std::cos(t) * dx - std::sin(t) * dy,
          c.y_um + std::sin(t) * dx + std::cos(t) * dy};
}

Outcome geometry_suite() {
  Checks c;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-90.0, 90.0);
  double rt = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const VisualFieldPoint p{u(rng), u(rng)};
    const VisualFieldPoint q = retina_to_visual_field(visual_field_to_retina(p));
    rt = std::max({rt, std::abs(q.x_deg - p.x_deg), std::abs(q.y_deg - p.y_deg)});
  }
  c.expect(rt <= 1e-9, "round trip " + fmt(rt));

  double rot = 0.0;
  for (double theta : {7.5, 45.0, 90.0, -120.0, 233.0}) {
    const RetinalPoint ctr{-250, 400};
    const ElectrodeArray base = build_grid_array({6, 10, 575, 0, ctr});
    const ElectrodeArray turned = build_grid_array({6, 10, 575, theta, ctr});
    for (std::size_t i = 0; i < base.size(); ++i) {
      rot = std::max(rot, distance(rotate_about(base[i].center, ctr, theta), turned[i].center));
    }
  }
  c.expect(rot <= 1e-6, "rotation " + fmt(rot) + " um");

  const AxonBundle& b = default_bundle();
  const RetinalPoint od = b.od_center();
  for (const auto& t : b.trajectories()) {
    for (std::size_t k = 1; k < t.points.size(); ++k) {
      c.expect(t.cum_len_um[k] > t.cum_len_um[k - 1], "arc length not increasing");
    }
    const int dir = bend_direction(t.phi0_deg);
    for (const auto& q : t.points) {
      if (q.x_um >= od.x_um) continue;
      if (dir > 0) c.expect(q.y_um >= -25.0, "superior fiber below raphe");
      if (dir < 0) c.expect(q.y_um <= 2 * od.y_um + 25.0, "inferior fiber above raphe");
    }
  }

  double mirror = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double phi0 = b[k].phi0_deg;
    if (phi0 == 180.0) continue;
    const AxonTrajectory m = grow_axon(-phi0, b.params(), od);
    if (m.points.size() != b[k].points.size()) {
      c.expect(false, "mirror length mismatch");
      continue;
    }
    for (std::size_t i = 0; i < m.points.size(); ++i) {
      mirror = std::max({mirror, std::abs(b[k].points[i].x_um - m.points[i].x_um),
                         std::abs(b[k].points[i].y_um - (2 * od.y_um - m.points[i].y_um))});
    }
  }
  c.expect(mirror <= 1e-6, "mirror " + fmt(mirror) + " um");
  return c.outcome("round trip " + fmt(rt) + ", rotation " + fmt(rot) + " um, mirror " +
                   fmt(mirror) + " um, monotone arcs, no raphe crossing (" +
                   std::to_string(b.size()) + " fibers)");
}

Outcome vision_suite() {
  Checks c;
  for (double v : {0.0, 0.3, 1.0}) {
    const Frame e = edge_enhance(Frame(17, 11, v));
    c.expect(std::all_of(e.values().begin(), e.values().end(), [](double x) { return x == 0.0; }),
             "uniform frame has edges");
  }

  Frame ramp(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) ramp.at(x, y) = (x * x + 3.0 * y) / 40.0;
  const double sobel = oracle::max_abs_diff(edge_enhance(ramp).values(), oracle::sobel(ramp).values());
  c.expect(sobel <= 1e-6, "sobel " + fmt(sobel));

  const Frame flat(9, 7, 0.37);
  c.expect(contrast_stretch(flat) == flat, "degenerate stretch changed the frame");
  // Empty tails: 5% of the pixels sit on each extreme, so p2 and p98 are the
  // minimum and maximum.
  Frame t(20, 20);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = i < 20 ? 0.2 : i < 40 ? 0.8 : u(rng);
  std::shuffle(t.values().begin(), t.values().end(), rng);
  const Frame once = contrast_stretch(t);
  const double idem =
      oracle::max_abs_diff(contrast_stretch(once).values(), once.values());
  c.expect(idem <= 1e-6, "stretch idempotence " + fmt(idem));

  const ElectrodeArray array = build_grid_array(GridLayout{});
  const EncoderConfig enc;
  for (double v : {0.0, 0.25, 1.0 / 3.0, 1.0}) {
    const Stimulus s = encode_frame(Frame(640, 480, v), array, enc, {});
    c.expect(std::all_of(s.amplitudes.begin(), s.amplitudes.end(),
                         [v](double a) { return a == v; }),
             "uniform encode not exact");
  }

  // Content moved by D pixels seen with gaze -D: identical; one pixel of
  // gaze error moves the result by at most the content's per-pixel change.
  const int w = 640, h = 480;
  const double px_per_deg = w / enc.source_fov_x_deg;
  Frame base(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) base.at(x, y) = 0.5 + 0.5 * std::sin(x * 0.05) * std::cos(y * 0.07);
  double gaze = 0.0, one_px = 0.0;
  for (int shift : {8, -24, 48}) {
    Frame moved(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) moved.at(x, y) = base.at(std::clamp(x - shift, 0, w - 1), y);
    const double d = shift / px_per_deg;
    const Stimulus a = encode_frame(moved, array, enc, {});
    const Stimulus b = encode_frame(base, array, enc, {-d, 0, 0});
    const Stimulus off = encode_frame(base, array, enc, {-d + 1.0 / px_per_deg, 0, 0});
    gaze = std::max(gaze, oracle::max_abs_diff(a.amplitudes, b.amplitudes));
    one_px = std::max(one_px, oracle::max_abs_diff(off.amplitudes, b.amplitudes));
  }
  c.expect(gaze <= 1e-9, "gaze consistency " + fmt(gaze));
  c.expect(one_px <= 0.025, "one-pixel gaze step " + fmt(one_px));
  return c.outcome("sobel " + fmt(sobel) + ", stretch idempotence " + fmt(idem) +
                   ", gaze " + fmt(gaze) + " (one-pixel step " + fmt(one_px) + ")");
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  return code;
}

Outcome performance() {
  TempDir dir;
  write_text(dir / "defaults.json", "{}");
  std::string out;
  if (run_cli({"bench", "--config", (dir / "defaults.json").string(), "--seconds", "5"}, &out) != 0) {
    return {false, "bench exited nonzero"};
  }
  const auto j = nlohmann::json::parse(out);
  const double fps = j["fps"], build_ms = j["build_ms"];
  const double p95 = j["stages"]["process_frame"]["p95_ms"];
  return {fps >= 30.0 && build_ms <= 10000.0 && p95 <= 33.0,
          std::string(j["model"]) + "/" + std::string(j["isa"]) + ": " + fmt(fps) +
              " fps (>= 30), build " + fmt(build_ms) + " ms (<= 10000), p95 " + fmt(p95) +
              " ms (<= 33)"};
}

Outcome determinism() {
  TempDir dir;
  write_text(dir / "c.json", R"({"preprocess": {"mode": "edges"}})");
  write_image(dir / "in.png", to_image(render_scene(SceneKind::Door, 320, 240, 0)));
  const auto in = dir / "in.raw";
  write_video_header(sidecar_path(in), {320, 240, 30});
  {
    RawVideoWriter wr(in);
    for (std::uint64_t t = 0; t < 12; ++t) wr.write(to_image(render_scene(SceneKind::Bar, 320, 240, t * 10)));
    wr.close();
  }
  write_text(dir / "g.csv", "0,0,0,0\n4,2.5,-1,5\n8,-3,0.5,-10\n");
  const std::string cfg = (dir / "c.json").string();
  for (const char* run : {"1", "2"}) {
    const std::string r = run;
    if (run_cli({"render", "--config", cfg, "--in", (dir / "in.png").string(), "--out",
                 (dir / ("r" + r + ".png")).string(), "--gaze", "1,-1,3"}) != 0 ||
        run_cli({"video", "--config", cfg, "--in", in.string(), "--out",
                 (dir / ("v" + r + ".raw")).string(), "--trace", (dir / "g.csv").string()}) != 0) {
      return {false, "cli run failed"};
    }
  }
  const std::string r1 = slurp(dir / "r1.png"), v1 = slurp(dir / "v1.raw");
  const bool same = r1 == slurp(dir / "r2.png") && v1 == slurp(dir / "v2.raw");
  const bool non_trivial = v1.find_first_not_of('\0') != std::string::npos;
  return {same && non_trivial && !r1.empty(),
          std::string(same ? "identical" : "different") + " render (" + std::to_string(r1.size()) +
              " B) and video (" + std::to_string(v1.size()) + " B) across two runs"};
}

Outcome protocol_conformance() {
  Checks c;
  service::ServiceOptions opts;  // default axon-map pipeline
  service::StreamServer server(opts);
  server.start("127.0.0.1", 0);
  std::size_t percepts = 0, dropped = 0;
  {
    WsClient ws(server.port());
    c.expect(ws.read().json().value("type", "") == "hello", "no hello");

    // Echo: black in, black out, same id.
    ws.send_frame({protocol::MessageType::InputFrame, 77, to_image(Frame(640, 480, 0.0))});
    const auto [meta, frame] = ws.read_percept();
    c.expect(meta["frame_id"] == 77 && frame.frame_id == 77, "echo id");
    c.expect(frame.type == protocol::MessageType::Percept, "echo type");
    c.expect(std::all_of(frame.image.pixels.begin(), frame.image.pixels.end(),
                         [](auto p) { return p == 0; }),
             "black frame gave light");

    // Burst: replies are an increasing subsequence ending at the last id,
    // every frame either answered or counted as dropped.
    const auto bytes = protocol::encode(
        {protocol::MessageType::InputFrame, 0, to_image(render_scene(SceneKind::Bar, 640, 480, 5))});
    for (std::uint32_t id = 1000; id < 1200; ++id) {
      auto b = bytes;
      for (int k = 0; k < 4; ++k) b[5 + k] = static_cast<std::uint8_t>(id >> (8 * k));
      ws.send_bytes(b);
    }
    std::vector<std::uint32_t> ids;
    while (ids.empty() || ids.back() != 1199) {
      const auto [m, f] = ws.read_percept();
      c.expect(m["frame_id"] == f.frame_id, "meta/binary id mismatch");
      ids.push_back(f.frame_id);
    }
    c.expect(std::is_sorted(ids.begin(), ids.end()) &&
                 std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
             "ids not increasing");
    ws.send_text(R"({"type":"get_stats"})");
    const auto stats = ws.read_until("stats");
    percepts = stats["frames_out"];
    dropped = stats["frames_dropped"];
    c.expect(stats["frames_in"] == 201, "frames_in " + stats["frames_in"].dump());
    c.expect(percepts == ids.size() + 1, "frames_out disagrees with replies");
    c.expect(percepts + dropped == 201, "out + dropped != in");

    ws.send_bytes({'S', 'P', 'V', 'F', 1, 0});
    const auto err = ws.read_until("error");
    c.expect(err["code"] == "bad_frame", "truncated frame gave " + err.dump());
    ws.send_frame({protocol::MessageType::InputFrame, 5, to_image(Frame(64, 48, 0.0))});
    c.expect(ws.read_percept().second.frame_id == 5, "session unusable after bad_frame");
  }
  server.stop();
  return c.outcome("echo ok; burst of 200: " + std::to_string(percepts - 1) + " answered, " +
                   std::to_string(dropped) + " dropped, ids increasing; bad_frame reported");
}

}  // namespace

/// Optional arguments restrict the run to the named criteria.
int main(int argc, char** argv) {
  const std::vector<std::string> only(argv + 1, argv + argc);
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"oracle-equivalence", oracle_equivalence},
      {"lambda-reduction", lambda_reduction},
      {"linearity-superposition", linearity},
      {"geometry-suite", geometry_suite},
      {"vision-suite", vision_suite},
      {"performance", performance},
      {"determinism", determinism},
      {"protocol-conformance", protocol_conformance},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
