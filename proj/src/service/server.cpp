#include "spv/service.hpp"

#include <algorithm>
#include <atomic>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "spv/config.hpp"
#include "spv/errors.hpp"
#include "spv/image_io.hpp"

namespace spv::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSceneWidth = 640;
constexpr int kSceneHeight = 480;
constexpr std::size_t kTimingWindow = 100;

std::string to_bytes(const std::vector<std::uint8_t>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Session

Session::Session(std::uint64_t id, PipelineState initial, Sink sink, std::size_t max_queue)
    : id_(id), sink_(std::move(sink)), max_queue_(max_queue), state_(std::move(initial)) {}

Session::~Session() { stop(); }

void Session::start() {
  send_json({{"type", "hello"},
             {"session_id", id_},
             {"generation", state_.generation()},
             {"config", config_to_json(state_.config())}});
  worker_ = std::thread([this] { run(); });
}

void Session::stop() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
    queue_.clear();
  }
  cv_.notify_all();
  // The io thread and StreamServer::stop may both get here.
  std::lock_guard join_lk(join_mu_);
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

SessionCounters Session::counters() const {
  std::lock_guard lk(mu_);
  return counters_;
}

void Session::on_text(std::string text) {
  {
    std::lock_guard lk(mu_);
    if (stopping_) return;
    if (queue_.size() >= max_queue_) {
      ++counters_.errors;
    } else {
      queue_.push_back({Item::Kind::Control, std::move(text), {}, Clock::now()});
      cv_.notify_one();
      return;
    }
  }
  send_error("overloaded", "message queue full");
}

void Session::on_binary(std::span<const std::uint8_t> bytes) {
  protocol::FrameMessage msg;
  try {
    msg = protocol::decode(bytes);
  } catch (const protocol::ProtocolError& e) {
    {
      std::lock_guard lk(mu_);
      ++counters_.errors;
    }
    send_error(e.code(), e.what());
    return;
  }
  if (msg.type == protocol::MessageType::Percept) {
    {
      std::lock_guard lk(mu_);
      ++counters_.errors;
    }
    send_error("bad_frame", "msg_type 2 is server-to-client only");
    return;
  }

  std::lock_guard lk(mu_);
  if (stopping_) return;
  const auto now = Clock::now();
  if (msg.type == protocol::MessageType::InputFrame) {
    ++counters_.frames_in;
    // Latest wins: a queued frame nobody has started on is superseded.
    const auto before = queue_.size();
    std::erase_if(queue_, [](const Item& it) { return it.kind == Item::Kind::Frame; });
    counters_.frames_dropped += before - queue_.size();
    queue_.push_back({Item::Kind::Frame, {}, std::move(msg), now});
  } else {
    queue_.push_back({Item::Kind::Mask, {}, std::move(msg), now});
  }
  cv_.notify_one();
}

void Session::run() {
  while (true) {
    std::unique_lock lk(mu_);
    auto ready = [this] { return stopping_ || !queue_.empty(); };
    bool have_item;
    if (scene_) {
      have_item = cv_.wait_until(lk, next_scene_, ready);
    } else {
      cv_.wait(lk, ready);
      have_item = true;
    }
    if (stopping_) return;

    if (!have_item) {
      lk.unlock();
      protocol::FrameMessage msg;
      msg.type = protocol::MessageType::InputFrame;
      msg.frame_id = static_cast<std::uint32_t>(scene_tick_);
      msg.image = to_image(render_scene(*scene_, kSceneWidth, kSceneHeight, scene_tick_));
      ++scene_tick_;
      next_scene_ += std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(1.0 / scene_fps_));
      // Fall behind gracefully instead of bursting to catch up.
      if (next_scene_ < Clock::now()) next_scene_ = Clock::now();
      handle_frame(msg, Clock::now(), /*from_scene=*/true);
      continue;
    }

    Item item = std::move(queue_.front());
    queue_.pop_front();
    lk.unlock();

    switch (item.kind) {
      case Item::Kind::Control:
        handle_control(item.text);
        break;
      case Item::Kind::Frame:
        handle_frame(item.frame, item.received, /*from_scene=*/false);
        break;
      case Item::Kind::Mask:
        mask_ = std::make_shared<const Frame>(to_frame(item.frame.image));
        send_json({{"type", "ack"},
                   {"request", "mask"},
                   {"frame_id", item.frame.frame_id},
                   {"width", item.frame.image.width},
                   {"height", item.frame.image.height}});
        break;
    }
  }
}

void Session::handle_frame(const protocol::FrameMessage& msg, Clock::time_point received,
                           bool from_scene) {
  FrameReport report;
  try {
    report = process_frame(state_, to_frame(msg.image), gaze_, mask_.get());
  } catch (const ValidationError& e) {
    {
      std::lock_guard lk(mu_);
      ++counters_.errors;
    }
    json err{{"type", "error"},
             {"code", "processing_failed"},
             {"detail", e.what()},
             {"frame_id", msg.frame_id}};
    sink_({{false, err.dump()}});
    return;
  }

  const auto now = Clock::now();
  sent_times_.push_back(now);
  while (!sent_times_.empty() && now - sent_times_.front() > std::chrono::seconds(1)) {
    sent_times_.pop_front();
  }
  recent_timings_.push_back(report.timings);
  if (recent_timings_.size() > kTimingWindow) recent_timings_.pop_front();

  std::vector<Outgoing> batch;
  if (from_scene) {
    batch.push_back({true, to_bytes(protocol::encode(msg))});
  }
  const json meta{
      {"type", "percept"},
      {"frame_id", msg.frame_id},
      {"generation", report.generation},
      {"source", from_scene ? "scene" : "client"},
      {"process_us", report.timings.total_us()},
      {"latency_us", std::chrono::duration<double, std::micro>(now - received).count()}};
  batch.push_back({false, meta.dump()});
  protocol::FrameMessage out{protocol::MessageType::Percept, msg.frame_id,
                             to_image(report.percept)};
  batch.push_back({true, to_bytes(protocol::encode(out))});

  if (!from_scene) {
    std::lock_guard lk(mu_);
    ++counters_.frames_out;
  }
  sink_(std::move(batch));
}

void Session::handle_control(const std::string& text) {
  const json msg = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (msg.is_discarded() || !msg.is_object() || !msg.contains("type") ||
      !msg["type"].is_string()) {
    send_error("bad_message", "control messages are JSON objects with a string \"type\"");
    return;
  }
  const std::string type = msg["type"].get<std::string>();
  auto nack = [&](const std::string& stage, const std::string& detail) {
    send_json({{"type", "nack"}, {"request", type}, {"stage", stage}, {"detail", detail}});
  };

  if (type == "set_config") {
    if (!msg.contains("config") || !msg["config"].is_object()) {
      nack("config", "set_config needs a \"config\" object");
      return;
    }
    try {
      json doc = config_to_json(state_.config());
      doc.merge_patch(msg["config"]);
      PipelineConfig cfg = config_from_json(doc);
      state_ = update_config(state_, cfg);
    } catch (const ValidationError& e) {
      nack(e.stage(), e.detail());
      return;
    } catch (const json::exception& e) {
      nack("config", e.what());
      return;
    }
    send_json({{"type", "ack"},
               {"request", type},
               {"generation", state_.generation()},
               {"config", config_to_json(state_.config())}});
  } else if (type == "set_gaze") {
    GazeTransform g = gaze_;
    for (auto [key, field] : {std::pair{"dx_deg", &g.dx_deg}, std::pair{"dy_deg", &g.dy_deg},
                              std::pair{"rot_deg", &g.rot_deg}}) {
      if (!msg.contains(key)) continue;
      if (!msg[key].is_number()) {
        nack("gaze", std::string(key) + " must be a number");
        return;
      }
      *field = msg[key].get<double>();
    }
    try {
      validate(g);
    } catch (const ValidationError& e) {
      nack(e.stage(), e.detail());
      return;
    }
    gaze_ = g;
    send_json({{"type", "ack"},
               {"request", type},
               {"dx_deg", g.dx_deg},
               {"dy_deg", g.dy_deg},
               {"rot_deg", g.rot_deg}});
  } else if (type == "get_stats") {
    send_json(stats_json());
  } else if (type == "select_scene") {
    if (!msg.contains("scene") || !msg["scene"].is_string()) {
      nack("scene", "select_scene needs a \"scene\" string");
      return;
    }
    double fps = 30.0;
    if (msg.contains("fps")) {
      if (!msg["fps"].is_number()) {
        nack("scene", "fps must be a number");
        return;
      }
      fps = msg["fps"].get<double>();
    }
    if (!(fps > 0.0 && fps <= 120.0)) {
      nack("scene", "fps must be in (0, 120]");
      return;
    }
    try {
      scene_ = parse_scene(msg["scene"].get<std::string>());
    } catch (const ValidationError& e) {
      nack(e.stage(), e.detail());
      return;
    }
    scene_fps_ = fps;
    scene_tick_ = 0;
    next_scene_ = Clock::now();
    send_json({{"type", "ack"},
               {"request", type},
               {"scene", scene_ ? std::string(scene_name(*scene_)) : "off"},
               {"fps", fps}});
  } else {
    send_error("unknown_type", "unknown control message type \"" + type + "\"");
  }
}

json Session::stats_json() {
  const auto now = Clock::now();
  while (!sent_times_.empty() && now - sent_times_.front() > std::chrono::seconds(1)) {
    sent_times_.pop_front();
  }
  StageTimings mean;
  for (const auto& t : recent_timings_) {
    mean.preprocess_us += t.preprocess_us;
    mean.encode_us += t.encode_us;
    mean.render_us += t.render_us;
  }
  if (!recent_timings_.empty()) {
    const double n = static_cast<double>(recent_timings_.size());
    mean.preprocess_us /= n;
    mean.encode_us /= n;
    mean.render_us /= n;
  }
  const SessionCounters c = counters();
  return {{"type", "stats"},
          {"session_id", id_},
          {"frames_in", c.frames_in},
          {"frames_out", c.frames_out},
          {"frames_dropped", c.frames_dropped},
          {"errors", c.errors},
          {"scene_frames", scene_tick_},
          {"generation", state_.generation()},
          {"fps", static_cast<double>(sent_times_.size())},
          {"timings_us",
           {{"preprocess", mean.preprocess_us},
            {"encode", mean.encode_us},
            {"render", mean.render_us},
            {"total", mean.total_us()}}}};
}

void Session::send_error(const std::string& code, const std::string& detail) {
  send_json({{"type", "error"}, {"code", code}, {"detail", detail}});
}

void Session::send_json(const json& j) { sink_({{false, j.dump()}}); }

// ---------------------------------------------------------------------------
// Transport

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::function<std::unique_ptr<Session>(Session::Sink)> make,
             std::atomic<std::size_t>& active, std::size_t max_sessions)
      : ws_(std::move(socket)),
        make_session_(std::move(make)),
        active_(active),
        max_sessions_(max_sessions) {}

  ~Connection() { release(); }

  void run() {
    http::async_read(ws_.next_layer(), buffer_, req_,
                     beast::bind_front_handler(&Connection::on_request, shared_from_this()));
  }

  /// Stops the session worker and starts a close handshake (or drops the
  /// socket if the upgrade never completed). Safe from any thread.
  void shutdown() {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(mu_);
      s = session_;
    }
    if (s) s->stop();
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->closed_ = true;
      if (!self->accepted_) {
        self->ws_.next_layer().close();
        return;
      }
      self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {
        self->ws_.next_layer().close();
      });
    });
  }

  /// Only once the io thread has stopped.
  void force_close() {
    beast::error_code ignored;
    ws_.next_layer().socket().close(ignored);
  }

 private:
  void on_request(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (!websocket::is_upgrade(req_)) {
      reject(http::status::bad_request, "expected a WebSocket upgrade");
      return;
    }
    if (active_.fetch_add(1) >= max_sessions_) {
      active_.fetch_sub(1);
      reject(http::status::service_unavailable, "session limit reached");
      return;
    }
    counted_ = true;
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 * 1024 * 1024);
    ws_.async_accept(req_,
                     beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  void reject(http::status status, const std::string& reason) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, "text/plain");
    res->body() = reason;
    res->prepare_payload();
    res->keep_alive(false);
    http::async_write(ws_.next_layer(), *res,
                      [self = shared_from_this(), res](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send,
                                                                 ignored);
                      });
  }

  void on_accept(beast::error_code ec) {
    if (ec) {
      release();
      return;
    }
    accepted_ = true;
    std::weak_ptr<Connection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    auto sink = [weak, executor](std::vector<Outgoing> batch) {
      net::post(executor, [weak, batch = std::move(batch)]() mutable {
        if (auto self = weak.lock()) self->enqueue(std::move(batch));
      });
    };
    {
      std::lock_guard lk(mu_);
      session_ = make_session_(std::move(sink));
    }
    session_->start();
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec || !session_) {
      release();
      return;
    }
    const auto data = buffer_.cdata();
    if (ws_.got_text()) {
      session_->on_text(beast::buffers_to_string(data));
    } else {
      session_->on_binary({static_cast<const std::uint8_t*>(data.data()), data.size()});
    }
    buffer_.consume(buffer_.size());
    do_read();
  }

  void enqueue(std::vector<Outgoing> batch) {
    if (closed_) return;
    // A client that stops reading must not grow memory without bound.
    if (outbox_.size() > 1024) return;
    for (auto& m : batch) outbox_.push_back(std::move(m));
    if (!writing_) do_write();
  }

  void do_write() {
    writing_ = true;
    ws_.binary(outbox_.front().binary);
    ws_.async_write(net::buffer(outbox_.front().data),
                    beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      release();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) do_write();
  }

  void release() {
    closed_ = true;
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(mu_);
      s = std::move(session_);
    }
    if (s) s->stop();
    if (counted_) {
      counted_ = false;
      active_.fetch_sub(1);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::function<std::unique_ptr<Session>(Session::Sink)> make_session_;
  std::atomic<std::size_t>& active_;
  const std::size_t max_sessions_;
  bool counted_ = false;
  bool accepted_ = false;
  bool closed_ = false;
  bool writing_ = false;
  std::deque<Outgoing> outbox_;

  std::mutex mu_;
  std::shared_ptr<Session> session_;
};

}  // namespace

struct StreamServer::Impl {
  ServiceOptions options;
  std::optional<PipelineState> initial;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::atomic<std::size_t> active{0};
  std::atomic<std::uint64_t> next_id{1};
  std::uint16_t port = 0;

  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
  bool io_done = false;
  std::vector<std::weak_ptr<Connection>> connections;

  void do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket s) {
      if (ec) return;  // acceptor closed
      // Replies are a small text message followed by the frame; without this
      // the second write waits out the peer's delayed ACK.
      s.set_option(tcp::no_delay(true), ec);
      auto make = [this](Session::Sink sink) {
        return std::make_unique<Session>(next_id.fetch_add(1), *initial, std::move(sink),
                                         options.max_queue);
      };
      auto conn = std::make_shared<Connection>(std::move(s), make, active, options.max_sessions);
      {
        std::lock_guard lk(mu);
        std::erase_if(connections, [](const auto& w) { return w.expired(); });
        connections.push_back(conn);
      }
      conn->run();
      do_accept();
    });
  }
};

StreamServer::StreamServer(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start(const std::string& bind_address, std::uint16_t port) {
  Impl& s = *impl_;
  s.initial = build_pipeline(s.options.config);

  beast::error_code ec;
  const auto address = net::ip::make_address(bind_address, ec);
  if (ec) throw ValidationError("serve", "bad bind address \"" + bind_address + "\"");
  const tcp::endpoint endpoint{address, port};
  s.acceptor.open(endpoint.protocol(), ec);
  if (!ec) s.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(endpoint, ec);
  if (!ec) s.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("cannot listen on " + bind_address + ":" + std::to_string(port) + ": " +
                  ec.message());
  }
  s.port = s.acceptor.local_endpoint().port();
  s.do_accept();
  s.thread = std::thread([&s] {
    s.ioc.run();
    {
      std::lock_guard lk(s.mu);
      s.io_done = true;
    }
    s.stopped_cv.notify_all();
  });
}

std::uint16_t StreamServer::port() const { return impl_->port; }

std::size_t StreamServer::active_sessions() const { return impl_->active.load(); }

void StreamServer::stop() {
  Impl& s = *impl_;
  if (!s.thread.joinable()) return;
  net::post(s.ioc, [&s] {
    beast::error_code ignored;
    s.acceptor.close(ignored);
  });
  std::vector<std::shared_ptr<Connection>> live;
  {
    std::lock_guard lk(s.mu);
    for (auto& w : s.connections) {
      if (auto c = w.lock()) live.push_back(std::move(c));
    }
    s.connections.clear();
  }
  for (auto& c : live) c->shutdown();
  {
    // Let close handshakes finish; the io thread returns once nothing is left.
    std::unique_lock lk(s.mu);
    s.stopped_cv.wait_for(lk, std::chrono::seconds(1), [&s] { return s.io_done; });
  }
  s.ioc.stop();
  s.thread.join();
  for (auto& c : live) c->force_close();
  live.clear();
  {
    std::lock_guard lk(s.mu);
    s.stopped = true;
  }
  s.stopped_cv.notify_all();
}

void StreamServer::wait() {
  std::unique_lock lk(impl_->mu);
  impl_->stopped_cv.wait(lk, [this] { return impl_->stopped; });
}

}  // namespace spv::service
