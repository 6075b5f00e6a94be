#pragma once

// Eigen must be seen before httplib: <resolv.h> defines a macro named _res.
#include "realtime.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "synth.hpp"

namespace eegattn::service {

/// One consumer's bounded message queue. A subscriber that falls more than
/// `capacity` messages behind is dropped rather than allowed to stall the
/// producer.
class Subscriber {
 public:
  explicit Subscriber(std::size_t capacity) : cap_(capacity) {}

  /// Returns false once the subscriber has been dropped.
  bool offer(std::string msg) {
    std::lock_guard lk(m_);
    if (closed_) return false;
    if (q_.size() >= cap_) {
      closed_ = true;
      overflowed_ = true;
      cv_.notify_all();
      return false;
    }
    q_.push_back(std::move(msg));
    cv_.notify_one();
    return true;
  }

  /// Waits up to `timeout` for the next message. Empty optional on timeout or close.
  std::optional<std::string> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lk(m_);
    cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    auto s = std::move(q_.front());
    q_.pop_front();
    return s;
  }

  void close() {
    std::lock_guard lk(m_);
    closed_ = true;
    cv_.notify_all();
  }
  bool closed() const {
    std::lock_guard lk(m_);
    return closed_ && q_.empty();
  }
  bool overflowed() const {
    std::lock_guard lk(m_);
    return overflowed_;
  }
  std::size_t pending() const {
    std::lock_guard lk(m_);
    return q_.size();
  }

 private:
  std::size_t cap_;
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::string> q_;
  bool closed_ = false, overflowed_ = false;
};

class Broadcaster {
 public:
  explicit Broadcaster(std::size_t queue_capacity = 256) : cap_(queue_capacity) {}

  std::shared_ptr<Subscriber> subscribe() {
    auto s = std::make_shared<Subscriber>(cap_);
    std::lock_guard lk(m_);
    subs_.push_back(s);
    return s;
  }

  void publish(const nlohmann::json& msg) {
    const auto text = msg.dump();
    std::lock_guard lk(m_);
    std::erase_if(subs_, [&](const std::shared_ptr<Subscriber>& s) { return !s->offer(text); });
  }

  void close_all() {
    std::lock_guard lk(m_);
    for (auto& s : subs_) s->close();
    subs_.clear();
  }

  std::size_t subscriber_count() const {
    std::lock_guard lk(m_);
    return subs_.size();
  }

 private:
  std::size_t cap_;
  mutable std::mutex m_;
  std::vector<std::shared_ptr<Subscriber>> subs_;
};

inline nlohmann::json error_message(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

inline nlohmann::json ack(const std::string& action, nlohmann::json extra = nlohmann::json::object()) {
  extra["type"] = "ack";
  extra["action"] = action;
  return extra;
}

inline nlohmann::json policy_json(const realtime::AlertPolicy& p) {
  return {{"consecutive_required", p.consecutive_required}, {"cooldown", p.effective_cooldown()}, {"min_duration_s", p.min_duration_s}};
}

struct SessionOptions {
  double playback_rate = 1.0;  // 1 = real time; <= 0 runs unpaced
  realtime::DurationConvention convention = realtime::DurationConvention::StepsOnly;
  std::size_t tick_every = 25;  // samples between watchdog checks
};

/// Drives an engine from a sample source on a background thread and fans the
/// resulting messages out to subscribers. Control calls may come from any
/// thread; the engine itself is only touched under the session mutex.
class Session {
 public:
  Session(realtime::Engine engine, std::unique_ptr<synth::SampleSource> source, SessionOptions opt = {},
          std::size_t queue_capacity = 256)
      : engine_(std::move(engine)), source_(std::move(source)), opt_(opt), bus_(queue_capacity) {}

  ~Session() { stop(); }

  Broadcaster& bus() { return bus_; }

  /// Applies one inbound {type:"control", action:...} message and returns the reply.
  nlohmann::json control(const nlohmann::json& msg) {
    if (!msg.is_object() || msg.value("type", std::string()) != "control" || !msg.contains("action") ||
        !msg["action"].is_string())
      return error_message("ParseError", "expected {\"type\":\"control\",\"action\":...}");
    const auto action = msg["action"].get<std::string>();
    try {
      if (action == "start") {
        if (running_) return error_message("InvalidConfig", "session already running");
        start();
        return ack(action);
      }
      if (action == "stop") {
        if (!running_) return error_message("InvalidConfig", "session is not running");
        stop();
        return ack(action);
      }
      if (action == "set_policy") {
        std::lock_guard lk(m_);
        auto p = engine_.policy();
        if (msg.contains("consecutive_required")) p.consecutive_required = msg["consecutive_required"].get<std::size_t>();
        if (msg.contains("cooldown")) p.cooldown = msg["cooldown"].get<std::size_t>();
        if (msg.contains("min_duration_s")) p.min_duration_s = msg["min_duration_s"].get<double>();
        engine_.set_policy(p);
        return ack(action, {{"policy", policy_json(p)}});
      }
      if (action == "set_phase") {
        const auto ph = realtime::phase_from_string(msg.at("phase").get<std::string>());
        std::lock_guard lk(m_);
        engine_.set_phase(ph);
        return ack(action, {{"phase", realtime::to_string(ph)}});
      }
      if (action == "ack") {
        std::lock_guard lk(m_);
        ++acknowledged_;
        return ack(action, {{"acknowledged", acknowledged_}});
      }
      return error_message("ParseError", "unknown control action '" + action + "'");
    } catch (const Error& e) {
      return error_message(std::string(to_string(e.code())), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error_message("ParseError", e.what());
    }
  }

  void start() {
    if (running_.exchange(true)) return;
    {
      std::lock_guard lk(m_);
      if (!engine_.has_model()) {
        running_ = false;
        throw Error(ErrorCode::ModelMissing, "no trained model is loaded");
      }
    }
    if (worker_.joinable()) worker_.join();
    worker_ = std::thread([this] { run(); });
    bus_.publish(status());
  }

  void stop() {
    running_ = false;
    if (worker_.joinable()) worker_.join();
  }

  /// Blocks until the source is exhausted or stop() is called.
  void wait() {
    if (worker_.joinable()) worker_.join();
  }

  bool running() const { return running_; }

  nlohmann::json status() const {
    std::lock_guard lk(m_);
    return {{"type", "status"},
            {"state", running_ ? "running" : "stopped"},
            {"phase", realtime::to_string(engine_.phase())},
            {"policy", policy_json(engine_.policy())},
            {"segments", engine_.log().size()}};
  }

  nlohmann::json summary() const {
    std::lock_guard lk(m_);
    if (engine_.log().empty()) return error_message("EmptySession", "no segments have been classified yet");
    return realtime::to_json(engine_.summary(opt_.convention));
  }

  std::vector<realtime::LogEntry> log() const {
    std::lock_guard lk(m_);
    return engine_.log();
  }

 private:
  void run() {
    std::optional<synth::Pacer> pacer;
    if (opt_.playback_rate > 0) pacer.emplace(source_->sample_rate(), opt_.playback_rate);
    std::size_t i = 0;
    while (running_) {
      auto s = source_->try_next();
      if (!s) break;
      if (pacer) pacer->wait_for(i);
      std::vector<realtime::EngineEvent> evs;
      std::optional<realtime::EngineEvent> warn;
      {
        std::lock_guard lk(m_);
        evs = engine_.push(std::span<const synth::SampleEvent>(&*s, 1));
        if (++i % opt_.tick_every == 0) warn = engine_.tick();
      }
      if (warn) bus_.publish(realtime::to_json(*warn));
      for (const auto& e : evs) bus_.publish(realtime::to_json(e));
    }
    running_ = false;
    bus_.publish(status());
    const auto s = summary();
    bus_.publish(s);
  }

  mutable std::mutex m_;
  realtime::Engine engine_;
  std::unique_ptr<synth::SampleSource> source_;
  SessionOptions opt_;
  Broadcaster bus_;
  std::atomic<bool> running_{false};
  std::thread worker_;
  std::size_t acknowledged_ = 0;
};

/// HTTP front end: GET /events streams server-sent events, POST /control
/// takes a JSON control message, GET /summary and GET /status return JSON.
class Server {
 public:
  explicit Server(Session& session) : session_(session) {
    // httplib's default adds SO_REUSEPORT, which lets a second server share a busy port
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    http_.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = session_.bus().subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, sub](std::size_t, httplib::DataSink& sink) {
        if (!sink.is_writable()) return false;
        if (stopping_) {
          sink.done();
          return true;
        }
        auto msg = sub->pop(std::chrono::milliseconds(200));
        if (!msg) {
          if (sub->closed()) {
            sink.done();
            return true;
          }
          static constexpr char keepalive[] = ": keepalive\n\n";
          return sink.write(keepalive, sizeof keepalive - 1);
        }
        const auto frame = "data: " + *msg + "\n\n";
        return sink.write(frame.data(), frame.size());
      });
    });
    http_.Post("/control", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json reply;
      try {
        reply = session_.control(nlohmann::json::parse(req.body));
      } catch (const nlohmann::json::exception& e) {
        reply = error_message("ParseError", e.what());
      }
      res.status = reply["type"] == "error" ? 400 : 200;
      res.set_content(reply.dump(), "application/json");
    });
    http_.Get("/summary", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = session_.summary();
      res.status = s["type"] == "error" ? 409 : 200;
      res.set_content(s.dump(), "application/json");
    });
    http_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(session_.status().dump(), "application/json");
    });
  }

  ~Server() { stop(); }

  /// Binds and starts serving on a background thread. Port 0 picks a free port.
  int start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) bound = http_.bind_to_any_port(host);
    else if (!http_.bind_to_port(host, port)) bound = -1;
    if (bound < 0)
      throw Error(ErrorCode::PortUnavailable, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return bound;
  }

  void stop() {
    stopping_ = true;
    session_.bus().close_all();
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  Session& session_;
  httplib::Server http_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
};

}  // namespace eegattn::service
