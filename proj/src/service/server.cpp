#include "xsib/service/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <mutex>

#include "xsib/core/container.hpp"
#include "xsib/core/transform.hpp"

namespace xsib {

void to_json(nlohmann::json& j, const RigidTransform2D& t) { j = {{"x", t.x}, {"z", t.z}, {"yaw", t.yaw}}; }

void from_json(const nlohmann::json& j, RigidTransform2D& t) {
  t.x = j.value("x", 0.0);
  t.z = j.value("z", 0.0);
  t.yaw = j.value("yaw", 0.0);
}

}  // namespace xsib

namespace xsib::service {

using nlohmann::json;

void to_json(json& j, const PoseEntry& e) {
  j = {{"id", e.id}, {"sequence", e.sequence}, {"frame", e.frame}, {"label", e.label}};
}

PoseLibrary::PoseLibrary(std::shared_ptr<const Dataset> data, int stride) : data_(std::move(data)) {
  if (!data_) return;
  if (stride < 1) throw ConfigError("pose library stride must be >= 1");
  for (int s = 0; s < static_cast<int>(data_->sequences.size()); ++s) {
    std::string name = "seq" + std::to_string(s);
    if (s < static_cast<int>(data_->meta.size()) && data_->meta[s].is_object() && data_->meta[s].contains("name")) {
      name = data_->meta[s]["name"].get<std::string>();
    }
    for (int f = 0; f < data_->sequences[s].frames(); f += stride) {
      entries_.push_back({std::to_string(s) + ":" + std::to_string(f), s, f, name + " @" + std::to_string(f)});
    }
  }
}

std::vector<PoseEntry> PoseLibrary::search(const std::string& query, std::size_t limit) const {
  std::vector<PoseEntry> out;
  for (const auto& e : entries_) {
    if (out.size() >= limit) break;
    if (query.empty() || e.id.find(query) != std::string::npos || e.label.find(query) != std::string::npos) {
      out.push_back(e);
    }
  }
  return out;
}

std::array<Pose, 2> PoseLibrary::lookup(const std::string& id) const {
  const auto colon = id.find(':');
  int s = -1, f = -1;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(id);
    std::size_t used = 0;
    s = std::stoi(id.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(id);
    f = std::stoi(id.substr(colon + 1), &used);
    if (used != id.size() - colon - 1) throw std::invalid_argument(id);
  } catch (const std::logic_error&) {
    throw ConfigError("pose id '" + id + "' is not sequence:frame");
  }
  const auto one = clip(s, f, 1);
  return {one.pose(0, 0), one.pose(0, 1)};
}

MotionWindow PoseLibrary::clip(int sequence, int start, int frames) const {
  if (!data_) throw NotFoundError("no pose library loaded");
  if (sequence < 0 || sequence >= static_cast<int>(data_->sequences.size())) {
    throw NotFoundError("sequence " + std::to_string(sequence) + " not in the library");
  }
  const auto& seq = data_->sequences[sequence];
  if (start < 0 || frames < 1 || start + frames > seq.frames()) {
    throw NotFoundError("frames [" + std::to_string(start) + ", " + std::to_string(start + frames) +
                        ") outside sequence " + std::to_string(sequence) + " of " + std::to_string(seq.frames()));
  }
  return seq.slice(start, frames);
}

SessionManager::SessionManager(PoseLibrary poses) : poses_(std::move(poses)) {}

void SessionManager::add_model(const std::string& id, std::shared_ptr<const train::ModelBundle> model) {
  if (!model) throw ConfigError("null model");
  std::unique_lock lock(mutex_);
  models_[id] = std::move(model);
}

std::shared_ptr<const train::ModelBundle> SessionManager::model(const std::string& id) const {
  std::shared_lock lock(mutex_);
  if (id.empty()) {
    if (models_.size() == 1) return models_.begin()->second;
    throw ConfigError("checkpoint id required: " + std::to_string(models_.size()) + " models loaded");
  }
  const auto it = models_.find(id);
  if (it == models_.end()) throw NotFoundError("checkpoint '" + id + "' not loaded");
  return it->second;
}

std::vector<std::string> SessionManager::model_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : models_) ids.push_back(id);
  return ids;
}

std::string SessionManager::create(const json& request) {
  const auto m = model(request.value("checkpoint", std::string{}));
  if (request.contains("skeleton")) {
    const json mine = m->skeleton();
    if (request["skeleton"] != mine) throw ConfigError("skeleton does not match checkpoint");
  }
  const int T = m->config().generator.window;
  int sequence = 0, start = 0;
  if (request.contains("initial")) {
    sequence = request["initial"].value("sequence", 0);
    start = request["initial"].value("start", 0);
  }
  const MotionWindow initial = poses_.clip(sequence, start, T);
  RolloutConfig rc;
  if (request.contains("rollout")) rc = request["rollout"].get<RolloutConfig>();
  const auto seed = request.value("seed", std::uint64_t{0});

  std::unique_lock lock(mutex_);
  const std::string id = "s" + std::to_string(next_id_++);
  sessions_[id] = std::make_shared<Session>(id, m, initial, seed, rc);
  return id;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("session '" + id + "' not found");
  return it->second;
}

bool SessionManager::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionManager::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::vector<KeyposeTarget> parse_keyposes(const json& request, const PoseLibrary& library,
                                          const std::array<Pose, 2>& fallback, int root_joint) {
  if (!request.contains("keyposes") || !request["keyposes"].is_array()) throw ConfigError("keyposes array required");
  const double threshold = request.value("threshold", 0.1);
  const int max_segments = request.value("max_segments", 60);
  std::array<Pose, 2> prev = fallback;
  std::vector<KeyposeTarget> out;
  for (const auto& k : request["keyposes"]) {
    const auto poses = k.contains("pose") ? library.lookup(k["pose"].get<std::string>()) : prev;
    prev = poses;
    auto target = KeyposeTarget::from_poses(poses, root_joint, threshold, max_segments);
    if (k.contains("roots")) {
      const auto& roots = k["roots"];
      if (!roots.is_array() || roots.size() != 2) throw ConfigError("roots must hold two transforms");
      for (int c = 0; c < 2; ++c)
        if (!roots[c].is_null()) target.set_root(c, roots[c].get<RigidTransform2D>());
    }
    target.validate();
    out.push_back(target);
  }
  return out;
}

std::vector<KeyposeTarget> SessionManager::parse_keyposes(const Session& session, const json& request) const {
  const auto window = session.window();
  const int last = window.frames() - 1;
  return service::parse_keyposes(request, poses_, {window.pose(last, 0), window.pose(last, 1)},
                                 session.model().skeleton().root_joint());
}

KeyposeEdit SessionManager::parse_edit(const json& request) const {
  KeyposeEdit e;
  if (request.contains("roots")) {
    const auto& roots = request["roots"];
    if (!roots.is_array() || roots.size() != 2) throw ConfigError("roots must hold two transforms");
    for (int c = 0; c < 2; ++c)
      if (!roots[c].is_null()) e.roots[c] = roots[c].get<RigidTransform2D>();
  }
  if (request.contains("pose")) e.poses = poses_.lookup(request["pose"].get<std::string>());
  return e;
}

json session_summary(const Session& session) {
  json keyposes = json::array();
  for (const auto& k : session.keyposes()) {
    keyposes.push_back({{"roots", k.root_transform},
                        {"threshold", k.arrival_threshold},
                        {"max_segments", k.max_segments}});
  }
  const auto tl = session.timeline();
  return {{"session_id", session.id()},
          {"rollout", session.config()},
          {"keyposes", keyposes},
          {"active_keypose", session.active_keypose()},
          {"steps", tl.size()},
          {"status", tl.empty() ? "new" : to_string(tl.back().status)},
          {"finished", session.finished()}};
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const NotFoundError& e) {
    reply(res, 404, {{"error", "not_found"}, {"message", e.what()}});
  } catch (const RangeError& e) {
    reply(res, 422, {{"error", "range"}, {"message", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
  } catch (const Error& e) {
    reply(res, 400, {{"error", "invalid"}, {"message", e.what()}});
  }
}

json body_json(const httplib::Request& req) { return req.body.empty() ? json::object() : json::parse(req.body); }

std::string sse_event(const RolloutStep& s) {
  std::string out;
  if (s.index >= 0) out += "id: " + std::to_string(s.index) + "\n";
  out += "event: step\ndata: " + json(s).dump() + "\n\n";
  return out;
}

}  // namespace

HttpServer::HttpServer(SessionManager& manager, int threads)
    : manager_(manager), server_(std::make_unique<httplib::Server>()) {
  const auto n = static_cast<std::size_t>(std::max(threads, 2));
  server_->new_task_queue = [n] { return new httplib::ThreadPool(n); };
  routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::routes() {
  auto& s = *server_;
  auto& m = manager_;

  s.Get("/health", [&m](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"models", m.model_ids()}, {"sessions", m.size()}});
  });

  s.Get("/poses", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto query = req.has_param("query") ? req.get_param_value("query") : std::string{};
      const std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : 100;
      json items = json::array();
      for (const auto& e : m.poses().search(query, limit)) {
        json j = e;
        j["frames"] = encode_frames(m.poses().clip(e.sequence, e.frame, 1));
        items.push_back(j);
      }
      reply(res, 200, {{"poses", items}, {"total", m.poses().size()}});
    });
  });

  s.Post("/sessions", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = m.create(body_json(req));
      reply(res, 201, {{"session_id", id}});
    });
  });

  s.Get(R"(/sessions/([^/]+))", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, session_summary(*m.get(req.matches[1]))); });
  });

  s.Delete(R"(/sessions/([^/]+))", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!m.remove(req.matches[1])) throw NotFoundError("session not found");
      reply(res, 200, {{"deleted", std::string(req.matches[1])}});
    });
  });

  s.Post(R"(/sessions/([^/]+)/keyposes)", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = m.get(req.matches[1]);
      session->set_keyposes(m.parse_keyposes(*session, body_json(req)));
      reply(res, 200, session_summary(*session));
    });
  });

  s.Patch(R"(/sessions/([^/]+)/keyposes/(-?\d+))", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = m.get(req.matches[1]);
      const int k = std::stoi(req.matches[2]);
      const bool applied = session->edit_keypose(k, m.parse_edit(body_json(req)));
      reply(res, 200, {{"applied", applied}, {"queued", !applied}, {"index", k}});
    });
  });

  s.Post(R"(/sessions/([^/]+)/step)", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = m.get(req.matches[1]);
      reply(res, 200, json(session->step()));
    });
  });

  s.Get(R"(/sessions/([^/]+)/stream)", [&m](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = m.get(req.matches[1]);
      long long from = 0;
      if (req.has_header("Last-Event-ID")) from = std::stoll(req.get_header_value("Last-Event-ID")) + 1;
      if (req.has_param("from")) from = std::stoll(req.get_param_value("from"));
      const long long max_steps = req.has_param("max_steps") ? std::stoll(req.get_param_value("max_steps")) : -1;
      struct Cursor {
        long long next;
        long long stepped = 0;
      };
      auto cursor = std::make_shared<Cursor>(Cursor{from});
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [session, cursor, max_steps](std::size_t, httplib::DataSink& sink) {
            // Replay what the client missed, then synthesize live.
            auto missed = session->timeline(cursor->next);
            if (!missed.empty()) {
              for (const auto& st : missed) {
                const auto ev = sse_event(st);
                if (!sink.write(ev.data(), ev.size())) return false;
              }
              cursor->next += static_cast<long long>(missed.size());
              return true;
            }
            if (session->finished() || (max_steps >= 0 && cursor->stepped >= max_steps)) {
              const std::string end = "event: end\ndata: " + session_summary(*session).dump() + "\n\n";
              sink.write(end.data(), end.size());
              sink.done();
              return true;
            }
            const auto st = session->step();
            ++cursor->stepped;
            if (st.index >= 0) {
              cursor->next = st.index + 1;
            }
            const auto ev = sse_event(st);
            return sink.write(ev.data(), ev.size());
          });
    });
  });
}

}  // namespace xsib::service
