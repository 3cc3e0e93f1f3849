#pragma once

// Live percept streaming over WebSocket.
//
// Each connection owns a Session: one pipeline snapshot, the current gaze and
// mask, counters, and a worker thread. Incoming messages are queued in arrival
// order and handled by the worker, so control messages and frames never
// interleave mid-frame. When a new input frame arrives while an older one is
// still queued, the older one is discarded and counted as dropped.
//
// Replies to a frame are a text message
//   {"type":"percept","frame_id":id,"generation":g,"process_us":t}
// immediately followed by the binary percept (msg_type 2, same frame_id).

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spv/pipeline.hpp"
#include "spv/protocol.hpp"
#include "spv/scenes.hpp"

namespace spv::service {

struct ServiceOptions {
  PipelineConfig config;
  std::size_t max_sessions = 16;
  /// Queued items per session before new messages are refused.
  std::size_t max_queue = 256;
};

struct Outgoing {
  bool binary = false;
  std::string data;
};

struct SessionCounters {
  std::uint64_t frames_in = 0;
  std::uint64_t frames_out = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t errors = 0;
};

class Session {
 public:
  /// Receives groups of messages that must go out back to back. Called from
  /// the worker thread.
  using Sink = std::function<void(std::vector<Outgoing>)>;

  Session(std::uint64_t id, PipelineState initial, Sink sink, std::size_t max_queue = 256);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Sends the greeting and starts the worker.
  void start();
  /// Stops the worker and discards queued work. Idempotent.
  void stop();

  void on_text(std::string text);
  void on_binary(std::span<const std::uint8_t> bytes);

  std::uint64_t id() const { return id_; }
  SessionCounters counters() const;

 private:
  struct Item {
    enum class Kind { Control, Frame, Mask } kind;
    std::string text;
    protocol::FrameMessage frame;
    std::chrono::steady_clock::time_point received;
  };

  void run();
  void handle_control(const std::string& text);
  void handle_frame(const protocol::FrameMessage& msg,
                    std::chrono::steady_clock::time_point received, bool from_scene);
  void send_error(const std::string& code, const std::string& detail);
  void send_json(const nlohmann::json& j);
  nlohmann::json stats_json();

  const std::uint64_t id_;
  Sink sink_;
  const std::size_t max_queue_;

  // Worker-owned.
  PipelineState state_;
  GazeTransform gaze_;
  std::shared_ptr<const Frame> mask_;
  std::optional<SceneKind> scene_;
  double scene_fps_ = 30.0;
  std::uint64_t scene_tick_ = 0;
  std::chrono::steady_clock::time_point next_scene_;
  std::deque<std::chrono::steady_clock::time_point> sent_times_;
  std::deque<StageTimings> recent_timings_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  SessionCounters counters_;
  bool stopping_ = false;
  std::mutex join_mu_;
  std::thread worker_;
};

class StreamServer {
 public:
  explicit StreamServer(ServiceOptions options);
  ~StreamServer();

  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  /// Builds the default pipeline, binds and serves on a background thread.
  /// Port 0 picks a free port; see port(). Throws IoError if binding fails.
  void start(const std::string& bind_address, std::uint16_t port);
  std::uint16_t port() const;
  std::size_t active_sessions() const;

  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spv::service
