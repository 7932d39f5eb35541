#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fafscreen/grid.hpp"
#include "fafscreen/image.hpp"
#include "fafscreen/svm.hpp"

namespace httplib {
class Server;
}

namespace faf::service {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct Classification {
  std::string model_id;
  Label label = Label::Healthy;
  double decision_value = 0.0;
  double signed_distance = 0.0;
};

/// Session state. Invariant: features only with a grid, classification only
/// with features.
struct SessionState {
  std::string id;
  std::string image_file;
  int width = 0;
  int height = 0;
  std::optional<GridSpec> grid;
  std::optional<FeatureVector> features;
  std::optional<std::array<SectorStats, kSectorCount>> sector_stats;
  std::optional<Classification> classification;
  std::string created_at;
  std::string updated_at;

  nlohmann::json to_json() const;
  nlohmann::json summary_json() const;
};

/// Parses {cx, cy, r1, r2, r3, laterality[, flip_nasal]}; throws
/// InvalidArgument on schema or invariant violations.
GridSpec grid_from_json(const nlohmann::json& body);
nlohmann::json grid_to_json(const GridSpec& grid);
/// Ring radii, diagonal angles and sector label anchors for client drawing.
nlohmann::json overlay_json(const GridSpec& grid);

/// Directory-backed session store: one directory per session holding the
/// uploaded image, state.json and an append-only events.jsonl log. State is
/// rebuilt at startup by replaying each log.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  /// Validates and stores the image; returns the new session state.
  SessionState create(std::span<const std::uint8_t> image_bytes);
  SessionState set_grid(const std::string& id, const GridSpec& grid);
  SessionState set_classification(const std::string& id, const Classification& result);

  std::optional<SessionState> get(const std::string& id) const;
  std::vector<SessionState> list() const;
  FafImage image(const std::string& id) const;
  /// Rebuilds one session purely from its event log.
  SessionState replay(const std::string& id) const;

 private:
  struct Entry {
    mutable std::mutex mutex;
    SessionState state;
    std::shared_ptr<const FafImage> image;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void append_event(const std::string& id, const nlohmann::json& event) const;
  void persist_state(const SessionState& state) const;
  static void apply_event(SessionState& state, const FafImage& image, const nlohmann::json& event);

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Read-only model files (<model_id>.json) in a directory, loaded at startup
/// and on demand.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir);

  std::shared_ptr<const SvmModel> get(const std::string& model_id);
  nlohmann::json list();

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const SvmModel>> models_;
};

/// Request handlers, independent of the HTTP transport.
class ScreenService {
 public:
  ScreenService(std::filesystem::path data_dir, std::filesystem::path models_dir);

  Response create_session(std::span<const std::uint8_t> image_bytes);
  Response session_image(const std::string& id);
  Response put_grid(const std::string& id, const std::string& body);
  Response classify(const std::string& id, const std::string& body);
  Response get_session(const std::string& id);
  Response list_sessions();
  Response list_models();

  SessionStore& store() noexcept { return store_; }

 private:
  SessionStore store_;
  ModelRegistry models_;
};

/// Installs the /api routes (and an optional static asset mount) on `server`.
void bind_routes(httplib::Server& server, ScreenService& service,
                 const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace faf::service
