#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsib/core/errors.hpp"
#include "xsib/service/session.hpp"

namespace httplib {
class Server;
}

namespace xsib {
void to_json(nlohmann::json& j, const RigidTransform2D& t);
void from_json(const nlohmann::json& j, RigidTransform2D& t);
}  // namespace xsib

namespace xsib::service {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

struct PoseEntry {
  std::string id;  // "sequence:frame"
  int sequence = 0;
  int frame = 0;
  std::string label;
};
void to_json(nlohmann::json& j, const PoseEntry& e);

/// Browsable keypose pairs sampled from a dataset every `stride` frames.
class PoseLibrary {
 public:
  PoseLibrary() = default;
  PoseLibrary(std::shared_ptr<const Dataset> data, int stride = 15);

  /// Entries whose id or label contains `query` (all when empty), in order.
  std::vector<PoseEntry> search(const std::string& query, std::size_t limit = 100) const;
  /// Any "sequence:frame" inside the dataset resolves, not only listed ones.
  std::array<Pose, 2> lookup(const std::string& id) const;
  /// `frames` world-space frames of a sequence; NotFoundError when out of range.
  MotionWindow clip(int sequence, int start, int frames) const;

  const Dataset* data() const { return data_.get(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<PoseEntry> entries_;
};

/// Keypose list from {keyposes: [{pose?, roots?}], threshold?, max_segments?}.
/// `pose` is a library id; a missing one reuses the previous entry's pair,
/// starting from `fallback`. `roots` holds two transforms or nulls.
std::vector<KeyposeTarget> parse_keyposes(const nlohmann::json& request, const PoseLibrary& library,
                                          const std::array<Pose, 2>& fallback, int root_joint);

/// Owns the loaded models and the live sessions. Lookups take a shared lock,
/// so one session's synthesis never holds up requests on another.
class SessionManager {
 public:
  explicit SessionManager(PoseLibrary poses);

  void add_model(const std::string& id, std::shared_ptr<const train::ModelBundle> model);
  /// An empty id picks the only model when exactly one is loaded.
  std::shared_ptr<const train::ModelBundle> model(const std::string& id) const;
  std::vector<std::string> model_ids() const;

  /// Request: {checkpoint?, seed?, skeleton?, initial? {sequence, start},
  /// rollout?}. Returns the new session id.
  std::string create(const nlohmann::json& request);
  std::shared_ptr<Session> get(const std::string& id) const;
  bool remove(const std::string& id);
  std::size_t size() const;

  /// {keyposes: [{pose?, roots?}], threshold?, max_segments?}. A missing pose
  /// reuses the previous entry's pair, or the session's last frame.
  std::vector<KeyposeTarget> parse_keyposes(const Session& session, const nlohmann::json& request) const;
  KeyposeEdit parse_edit(const nlohmann::json& request) const;

  const PoseLibrary& poses() const { return poses_; }

 private:
  PoseLibrary poses_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const train::ModelBundle>> models_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  unsigned long long next_id_ = 1;
};

nlohmann::json session_summary(const Session& session);

/// HTTP front end. Routes:
///   POST   /sessions                      -> {session_id}
///   GET    /sessions/{id}
///   DELETE /sessions/{id}
///   POST   /sessions/{id}/keyposes
///   PATCH  /sessions/{id}/keyposes/{k}    -> {applied}
///   POST   /sessions/{id}/step            -> RolloutStep
///   GET    /sessions/{id}/stream?from=N   -> text/event-stream, one step per event
///   GET    /poses?query=&limit=
///   GET    /health
class HttpServer {
 public:
  explicit HttpServer(SessionManager& manager, int threads = 16);
  ~HttpServer();

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  void routes();

  SessionManager& manager_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace xsib::service
