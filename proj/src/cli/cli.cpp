#include "spv/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "spv/config.hpp"
#include "spv/errors.hpp"
#include "spv/image_io.hpp"
#include "spv/kernels.hpp"
#include "spv/scenes.hpp"
#include "spv/service.hpp"

namespace spv::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ValidationError("config", path.string() + ": not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  PipelineConfig cfg = config_from_json(doc);

  auto& mask_path = cfg.preprocess.mask_path;
  if (!mask_path.empty() && fs::path(mask_path).is_relative()) {
    mask_path = (path.parent_path() / mask_path).lexically_normal().string();
  }
  if (cfg.preprocess.kind == PreprocessKind::Mask && mask_path.empty()) {
    throw ValidationError("preprocess", "mode \"mask\" needs preprocess.mask_path");
  }
  validate(cfg);
  return cfg;
}

Frame load_mask(const PipelineConfig& cfg, const std::string& input_name) {
  fs::path p = cfg.preprocess.mask_path;
  if (fs::is_directory(p)) p /= input_name;
  return to_frame(read_image(p));
}

namespace {

GazeTransform parse_gaze(const std::string& s) {
  GazeTransform g;
  double* fields[] = {&g.dx_deg, &g.dy_deg, &g.rot_deg};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto comma = s.find(',', start);
    if ((i < 2) != (comma != std::string::npos)) {
      throw ValidationError("gaze", "expected DX,DY,ROT, got \"" + s + "\"");
    }
    const std::string part = s.substr(start, comma == std::string::npos ? s.npos : comma - start);
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[i]);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw ValidationError("gaze", "expected DX,DY,ROT, got \"" + s + "\"");
    }
    start = comma + 1;
  }
  validate(g);
  return g;
}

/// Pipeline with the mask for `input_name` installed when mask mode is on.
PipelineState build_for_input(PipelineConfig cfg, const std::string& input_name) {
  if (cfg.preprocess.kind == PreprocessKind::Mask) {
    cfg.preprocess.mask = std::make_shared<const Frame>(load_mask(cfg, input_name));
  }
  return build_pipeline(cfg);
}

fs::path montage_path(const fs::path& out) {
  fs::path p = out;
  p.replace_filename(out.stem().string() + ".montage" + out.extension().string());
  return p;
}

int cmd_render(const PipelineConfig& cfg, const fs::path& in_path, const fs::path& out_path,
               const std::string& gaze_text, bool montage) {
  const GazeTransform gaze = gaze_text.empty() ? GazeTransform{} : parse_gaze(gaze_text);
  const GrayImage input = read_image(in_path);
  const PipelineState state = build_for_input(cfg, in_path.filename().string());
  const Frame frame = to_frame(input);
  const FrameReport report = process_frame(state, frame, gaze);
  const GrayImage percept = to_image(report.percept);
  write_image(out_path, percept);

  if (montage) {
    const GrayImage pre = to_image(preprocess(frame, state.config().preprocess));
    const GrayImage panels[] = {input, pre, percept};
    write_image(montage_path(out_path), spv::montage(panels, input.height));
  }
  return kExitOk;
}

int cmd_video(const PipelineConfig& cfg, const fs::path& in_path, const fs::path& out_path,
              const std::string& trace_path) {
  const VideoHeader header = read_video_header(sidecar_path(in_path));
  GazeTrace trace({});
  if (!trace_path.empty()) {
    try {
      trace = read_gaze_trace(trace_path);
    } catch (const IoError& e) {
      // A named trace that cannot be read is a bad invocation, not an output failure.
      throw ValidationError("trace", e.what());
    }
  }

  const bool per_frame_mask = cfg.preprocess.kind == PreprocessKind::Mask &&
                              fs::is_directory(cfg.preprocess.mask_path);
  const PipelineState state = per_frame_mask ? build_pipeline(cfg) : build_for_input(cfg, "");

  RawVideoReader reader(in_path, header);
  RawVideoWriter writer(out_path);
  long long index = 0;
  while (auto image = reader.next()) {
    std::optional<Frame> mask;
    if (per_frame_mask) {
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.png", index);
      fs::path p = fs::path(cfg.preprocess.mask_path) / name;
      if (!fs::exists(p)) p.replace_extension(".pgm");
      mask = to_frame(read_image(p));
    }
    const FrameReport report =
        process_frame(state, to_frame(*image), trace.at(index), mask ? &*mask : nullptr);
    writer.write(to_image(report.percept));
    ++index;
  }
  writer.close();
  write_video_header(sidecar_path(out_path),
                     {cfg.grid.width, cfg.grid.height, header.fps});
  return kExitOk;
}

json stage_stats(std::vector<double> us) {
  if (us.empty()) return json::object();
  std::sort(us.begin(), us.end());
  double sum = 0.0;
  for (double v : us) sum += v;
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(us.size())));
  return {{"mean_ms", sum / static_cast<double>(us.size()) / 1000.0},
          {"p95_ms", us[std::max<std::size_t>(rank, 1) - 1] / 1000.0}};
}

int cmd_bench(const PipelineConfig& cfg, double seconds, std::ostream& out) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    throw ValidationError("bench", "--seconds must be >= 0");
  }
  if (cfg.preprocess.kind == PreprocessKind::Mask) {
    throw ValidationError("bench", "mask preprocessing is not benchmarked");
  }
  auto t0 = Clock::now();
  const PipelineState state = build_pipeline(cfg);
  const double build_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  // Synthetic input: one full sweep of the moving bar, rendered up front.
  std::vector<Frame> frames;
  for (std::uint64_t t = 0; t < 120; ++t) frames.push_back(render_scene(SceneKind::Bar, 640, 480, t));

  std::vector<double> pre, enc, ren, total;
  const auto budget = std::chrono::duration<double>(seconds);
  t0 = Clock::now();
  while (Clock::now() - t0 < budget) {
    const auto f0 = Clock::now();
    const FrameReport r = process_frame(state, frames[total.size() % frames.size()], {});
    total.push_back(std::chrono::duration<double, std::micro>(Clock::now() - f0).count());
    pre.push_back(r.timings.preprocess_us);
    enc.push_back(r.timings.encode_us);
    ren.push_back(r.timings.render_us);
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();

  const json report{
      {"model", model_kind_name(cfg.model.kind)},
      {"preprocess", preprocess_kind_name(cfg.preprocess.kind)},
      {"isa", kernels::isa_name(kernels::active_isa())},
      {"input", {{"scene", "bar"}, {"width", 640}, {"height", 480}}},
      {"build_ms", build_ms},
      {"map_entries", state.map().entry_count()},
      {"frames", total.size()},
      {"seconds", elapsed},
      {"fps", total.empty() ? 0.0 : static_cast<double>(total.size()) / elapsed},
      {"stages",
       total.empty() ? json::object()
                     : json{{"preprocess", stage_stats(pre)},
                            {"encode", stage_stats(enc)},
                            {"render", stage_stats(ren)},
                            {"process_frame", stage_stats(total)}}}};
  out << report.dump(2) << '\n';
  return kExitOk;
}

int cmd_export_map(const PipelineConfig& cfg, const fs::path& out_path, std::ostream& err) {
  const PipelineState state = build_pipeline(cfg);
  write_sensitivity_map(out_path, state.map());
  err << "wrote " << state.map().entry_count() << " entries for " << state.map().pixel_count()
      << " pixels to " << out_path.string() << '\n';
  return kExitOk;
}

int cmd_serve(const PipelineConfig& cfg, int port, const std::string& bind, std::ostream& err) {
  if (port < 0 || port > 65535) throw ValidationError("serve", "--port must be in [0, 65535]");
  service::ServiceOptions options;
  options.config = cfg;
  options.config.preprocess.mask = nullptr;  // masks arrive per session
  service::StreamServer server(options);
  server.start(bind, static_cast<std::uint16_t>(port));
  err << "listening on ws://" << bind << ":" << server.port() << '\n' << std::flush;

  boost::asio::io_context signals_ctx;
  boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) { server.stop(); });
  signals_ctx.run();
  err << "stopped\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulated prosthetic vision", "spv"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool show_config = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Config JSON")->required();
    sub->add_option("--set", overrides, "Override, dotted.path=value (repeatable)");
    sub->add_flag("--show-config", show_config, "Print the effective config to stderr");
  };

  std::string in_path, out_path, gaze, trace, bind = "127.0.0.1";
  bool montage = false;
  double seconds = 5.0;
  int port = -1;

  auto* render = app.add_subcommand("render", "Render one image");
  common(render);
  render->add_option("--in", in_path)->required();
  render->add_option("--out", out_path)->required();
  render->add_option("--gaze", gaze, "DX,DY,ROT in degrees");
  render->add_flag("--montage", montage,
                   "Also write original|preprocessed|percept to <out>.montage.<ext>");

  auto* video = app.add_subcommand("video", "Render a raw 8-bit video");
  common(video);
  video->add_option("--in", in_path)->required();
  video->add_option("--out", out_path)->required();
  video->add_option("--trace", trace, "Gaze CSV: frame_index,dx_deg,dy_deg,rot_deg");

  auto* bench = app.add_subcommand("bench", "Time the pipeline on a moving bar");
  common(bench);
  bench->add_option("--seconds", seconds);

  auto* export_map = app.add_subcommand("export-map", "Write the sensitivity map");
  common(export_map);
  export_map->add_option("--out", out_path)->required();

  auto* serve = app.add_subcommand("serve", "Stream percepts over WebSocket");
  common(serve);
  serve->add_option("--port", port)->required();
  serve->add_option("--bind", bind);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    const PipelineConfig cfg = load_config(config_path, overrides);
    if (show_config) err << config_to_json(cfg).dump(2) << '\n';
    if (*render) return cmd_render(cfg, in_path, out_path, gaze, montage);
    if (*video) return cmd_video(cfg, in_path, out_path, trace);
    if (*bench) return cmd_bench(cfg, seconds, out);
    if (*export_map) return cmd_export_map(cfg, out_path, err);
    if (*serve) return cmd_serve(cfg, port, bind, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace spv::cli
