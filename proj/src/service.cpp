#include "fafscreen/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <regex>

#include "fafscreen/dataset_io.hpp"
#include "fafscreen/text_format.hpp"

namespace faf::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string random_id() {
  std::random_device rd;
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G';
}

Response json_response(int status, const json& body) { return {status, "application/json", dump_json(body)}; }

Response error_response(int status, std::string_view kind, std::string_view message, json extra = json::object()) {
  json err = {{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  return json_response(status, {{"error", err}});
}

json stats_json(const std::array<SectorStats, kSectorCount>& stats) {
  json out = json::object();
  for (const auto& s : stats)
    out[std::string(to_string(s.sector))] = {{"mean", s.mean}, {"std", s.std}, {"pixel_count", s.count}};
  return out;
}

json classification_json(const Classification& c) {
  return {{"model_id", c.model_id},
          {"label", c.label == Label::Diseased ? 1 : -1},
          {"decision_value", c.decision_value},
          {"signed_distance", c.signed_distance}};
}

bool valid_model_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9._-]+");
  return !id.empty() && id.front() != '.' && std::regex_match(id, pattern);
}

}  // namespace

// ---------------------------------------------------------------- JSON views

GridSpec grid_from_json(const json& body) {
  if (!body.is_object()) throw InvalidArgument("grid: body must be a JSON object");
  GridSpec g;
  const auto number = [&](const char* key) {
    if (!body.contains(key) || !body[key].is_number())
      throw InvalidArgument(std::string("grid: field '") + key + "' must be a number");
    return body[key].get<double>();
  };
  g.center_x = number("cx");
  g.center_y = number("cy");
  g.r1 = number("r1");
  g.r2 = number("r2");
  g.r3 = number("r3");
  if (!body.contains("laterality") || !body["laterality"].is_string())
    throw InvalidArgument("grid: field 'laterality' must be \"OD\" or \"OS\"");
  const auto lat = parse_laterality(body["laterality"].get<std::string>());
  if (!lat || *lat == Laterality::Unknown) throw InvalidArgument("grid: laterality must be OD or OS");
  g.laterality = *lat;
  if (body.contains("flip_nasal")) {
    if (!body["flip_nasal"].is_boolean()) throw InvalidArgument("grid: flip_nasal must be boolean");
    g.flip_nasal = body["flip_nasal"].get<bool>();
  }
  g.validate();
  return g;
}

json grid_to_json(const GridSpec& g) {
  return {{"cx", g.center_x}, {"cy", g.center_y}, {"r1", g.r1},           {"r2", g.r2},
          {"r3", g.r3},       {"laterality", std::string(to_string(g.laterality))}, {"flip_nasal", g.flip_nasal}};
}

json overlay_json(const GridSpec& g) {
  const double nasal_dir = g.nasal_is_right() ? 1.0 : -1.0;
  const double inner = 0.5 * (g.r1 + g.r2);
  const double outer = 0.5 * (g.r2 + g.r3);
  auto labels = json::array();
  const auto anchor = [&](SectorId s, double dx, double dy) {
    labels.push_back({{"sector", std::string(to_string(s))}, {"x", g.center_x + dx}, {"y", g.center_y + dy}});
  };
  anchor(SectorId::CSF, 0, 0);
  anchor(SectorId::TIM, -nasal_dir * inner, 0);
  anchor(SectorId::SIM, 0, -inner);
  anchor(SectorId::NIM, nasal_dir * inner, 0);
  anchor(SectorId::IIM, 0, inner);
  anchor(SectorId::TOM, -nasal_dir * outer, 0);
  anchor(SectorId::SOM, 0, -outer);
  anchor(SectorId::NOM, nasal_dir * outer, 0);
  anchor(SectorId::IOM, 0, outer);
  return {{"center", {{"x", g.center_x}, {"y", g.center_y}}},
          {"radii", {g.r1, g.r2, g.r3}},
          // Image coordinates (y down), degrees clockwise from +x.
          {"diagonal_angles_deg", {45.0, 135.0, 225.0, 315.0}},
          {"diagonals_from_radius", g.r1},
          {"nasal_side", g.nasal_is_right() ? "right" : "left"},
          {"laterality", std::string(to_string(g.laterality))},
          {"labels", labels}};
}

json SessionState::to_json() const {
  json j = {{"session_id", id},   {"width", width},           {"height", height},
            {"image_file", image_file}, {"created_at", created_at}, {"updated_at", updated_at}};
  j["grid"] = grid ? grid_to_json(*grid) : json(nullptr);
  j["features"] = features ? json(features->values) : json(nullptr);
  j["sector_stats"] = sector_stats ? stats_json(*sector_stats) : json(nullptr);
  j["classification"] = classification ? classification_json(*classification) : json(nullptr);
  return j;
}

json SessionState::summary_json() const {
  return {{"session_id", id},
          {"width", width},
          {"height", height},
          {"has_grid", grid.has_value()},
          {"has_features", features.has_value()},
          {"classification", classification ? classification_json(*classification) : json(nullptr)},
          {"created_at", created_at},
          {"updated_at", updated_at}};
}

// ---------------------------------------------------------------- store

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  for (const auto& dir : fs::directory_iterator(root_)) {
    if (!dir.is_directory() || !fs::exists(dir.path() / "events.jsonl")) continue;
    const std::string id = dir.path().filename().string();
    try {
      auto entry = std::make_shared<Entry>();
      entry->state = replay(id);
      entry->image = std::make_shared<const FafImage>(load_image_file(root_ / id / entry->state.image_file));
      sessions_[id] = std::move(entry);
    } catch (const std::exception& e) {
      std::cerr << "skipping session " << id << ": " << e.what() << "\n";
    }
  }
}

void SessionStore::apply_event(SessionState& state, const FafImage& image, const json& event) {
  const auto type = event.at("type").get<std::string>();
  state.updated_at = event.at("at").get<std::string>();
  if (type == "created") {
    state.image_file = event.at("image_file").get<std::string>();
    state.width = event.at("width").get<int>();
    state.height = event.at("height").get<int>();
    state.created_at = state.updated_at;
  } else if (type == "grid") {
    const auto grid = grid_from_json(event.at("grid"));
    state.features = compute_features(image, grid);
    state.sector_stats = sector_statistics(image, grid);
    state.grid = grid;
    state.classification.reset();
  } else if (type == "classified") {
    Classification c;
    c.model_id = event.at("model_id").get<std::string>();
    c.label = event.at("label").get<int>() > 0 ? Label::Diseased : Label::Healthy;
    c.decision_value = event.at("decision_value").get<double>();
    c.signed_distance = event.at("signed_distance").get<double>();
    state.classification = c;
  } else {
    throw DataError("unknown session event '" + type + "'");
  }
}

SessionState SessionStore::replay(const std::string& id) const {
  const auto dir = root_ / id;
  std::ifstream in(dir / "events.jsonl");
  if (!in) throw DataError("session " + id + ": missing event log");
  SessionState state;
  state.id = id;
  std::shared_ptr<const FafImage> image;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto event = json::parse(line);
    if (!image) {
      if (event.at("type") != "created") throw DataError("session " + id + ": log must start with 'created'");
      image = std::make_shared<const FafImage>(load_image_file(dir / event.at("image_file").get<std::string>()));
    }
    apply_event(state, *image, event);
  }
  if (!image) throw DataError("session " + id + ": empty event log");
  return state;
}

void SessionStore::append_event(const std::string& id, const json& event) const {
  std::ofstream out(root_ / id / "events.jsonl", std::ios::app | std::ios::binary);
  out << dump_json(event) << "\n";
  if (!out) throw Error("session " + id + ": failed to append event");
}

void SessionStore::persist_state(const SessionState& state) const {
  const auto path = root_ / state.id / "state.json";
  const auto tmp = root_ / state.id / "state.json.tmp";
  write_text_file(tmp, dump_json(state.to_json(), 1) + "\n");
  fs::rename(tmp, path);
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

SessionState SessionStore::create(std::span<const std::uint8_t> image_bytes) {
  auto image = std::make_shared<const FafImage>(load_image(image_bytes));
  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::unique_lock lock(mutex_);
    do {
      id = random_id();
    } while (sessions_.count(id) || fs::exists(root_ / id));
    fs::create_directories(root_ / id);
    sessions_[id] = entry;
  }
  std::lock_guard guard(entry->mutex);
  const std::string file = is_png(image_bytes) ? "image.png" : "image.pgm";
  write_file(root_ / id / file, image_bytes);
  const json event = {{"type", "created"},
                      {"at", now_iso()},
                      {"image_file", file},
                      {"width", image->width()},
                      {"height", image->height()}};
  entry->state.id = id;
  entry->image = image;
  apply_event(entry->state, *image, event);
  append_event(id, event);
  persist_state(entry->state);
  return entry->state;
}

SessionState SessionStore::set_grid(const std::string& id, const GridSpec& grid) {
  auto entry = find(id);
  if (!entry) throw std::out_of_range("unknown session " + id);
  std::lock_guard guard(entry->mutex);
  const json event = {{"type", "grid"}, {"at", now_iso()}, {"grid", grid_to_json(grid)}};
  SessionState next = entry->state;
  apply_event(next, *entry->image, event);  // throws EmptySectorError without touching state
  append_event(id, event);
  entry->state = std::move(next);
  persist_state(entry->state);
  return entry->state;
}

SessionState SessionStore::set_classification(const std::string& id, const Classification& result) {
  auto entry = find(id);
  if (!entry) throw std::out_of_range("unknown session " + id);
  std::lock_guard guard(entry->mutex);
  if (!entry->state.features) throw std::logic_error("classification requires features");
  const json event = {{"type", "classified"},
                      {"at", now_iso()},
                      {"model_id", result.model_id},
                      {"label", result.label == Label::Diseased ? 1 : -1},
                      {"decision_value", result.decision_value},
                      {"signed_distance", result.signed_distance}};
  apply_event(entry->state, *entry->image, event);
  append_event(id, event);
  persist_state(entry->state);
  return entry->state;
}

std::optional<SessionState> SessionStore::get(const std::string& id) const {
  auto entry = find(id);
  if (!entry) return std::nullopt;
  std::lock_guard guard(entry->mutex);
  return entry->state;
}

std::vector<SessionState> SessionStore::list() const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, e] : sessions_) entries.push_back(e);
  }
  std::vector<SessionState> out;
  for (const auto& e : entries) {
    std::lock_guard guard(e->mutex);
    out.push_back(e->state);
  }
  return out;
}

FafImage SessionStore::image(const std::string& id) const {
  auto entry = find(id);
  if (!entry) throw std::out_of_range("unknown session " + id);
  return *entry->image;
}

// ---------------------------------------------------------------- models

ModelRegistry::ModelRegistry(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) return;
  for (const auto& f : fs::directory_iterator(dir_)) {
    if (f.path().extension() != ".json") continue;
    try {
      get(f.path().stem().string());
    } catch (const std::exception& e) {
      std::cerr << "skipping model " << f.path() << ": " << e.what() << "\n";
    }
  }
}

std::shared_ptr<const SvmModel> ModelRegistry::get(const std::string& model_id) {
  if (!valid_model_id(model_id)) return nullptr;
  std::lock_guard guard(mutex_);
  if (auto it = models_.find(model_id); it != models_.end()) return it->second;
  const auto path = dir_ / (model_id + ".json");
  if (!fs::exists(path)) return nullptr;
  auto model = std::make_shared<const SvmModel>(load_model(read_text_file(path)));
  models_[model_id] = model;
  return model;
}

json ModelRegistry::list() {
  if (fs::is_directory(dir_))
    for (const auto& f : fs::directory_iterator(dir_))
      if (f.path().extension() == ".json") {
        try {
          get(f.path().stem().string());
        } catch (const std::exception&) {
        }
      }
  std::lock_guard guard(mutex_);
  auto arr = json::array();
  for (const auto& [id, m] : models_)
    arr.push_back({{"model_id", id},
                   {"kernel", std::string(to_string(m->kernel.kind))},
                   {"scale_factor", m->kernel.scale_factor},
                   {"C", m->C},
                   {"standardize", m->standardization.has_value()},
                   {"dimension", m->dimension()},
                   {"support_vectors", m->support_vectors.size()}});
  return arr;
}

// ---------------------------------------------------------------- handlers

ScreenService::ScreenService(fs::path data_dir, fs::path models_dir)
    : store_(std::move(data_dir)), models_(std::move(models_dir)) {}

Response ScreenService::create_session(std::span<const std::uint8_t> image_bytes) {
  if (image_bytes.empty()) return error_response(400, "SchemaError", "missing image upload");
  try {
    const auto s = store_.create(image_bytes);
    return json_response(201, {{"session_id", s.id}, {"width", s.width}, {"height", s.height}});
  } catch (const DataError& e) {
    return error_response(400, e.kind(), e.what());
  }
}

Response ScreenService::session_image(const std::string& id) {
  try {
    const auto png = render_display_png(store_.image(id));
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const std::out_of_range&) {
    return error_response(404, "NotFound", "unknown session " + id);
  }
}

Response ScreenService::put_grid(const std::string& id, const std::string& body) {
  GridSpec grid;
  try {
    grid = grid_from_json(json::parse(body));
  } catch (const json::exception& e) {
    return error_response(400, "SchemaError", std::string("invalid JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, "SchemaError", e.what());
  }
  try {
    const auto s = store_.set_grid(id, grid);
    return json_response(200, {{"session_id", id},
                               {"features", s.features->values},
                               {"sector_stats", stats_json(*s.sector_stats)},
                               {"overlay", overlay_json(grid)}});
  } catch (const std::out_of_range&) {
    return error_response(404, "NotFound", "unknown session " + id);
  } catch (const EmptySectorError& e) {
    return error_response(422, e.kind(), e.what(), {{"sector", std::string(to_string(e.sector()))}});
  }
}

Response ScreenService::classify(const std::string& id, const std::string& body) {
  std::string model_id;
  try {
    const auto j = json::parse(body);
    if (!j.is_object() || !j.contains("model_id") || !j["model_id"].is_string())
      return error_response(400, "SchemaError", "body must be {\"model_id\": string}");
    model_id = j["model_id"].get<std::string>();
  } catch (const json::exception& e) {
    return error_response(400, "SchemaError", std::string("invalid JSON: ") + e.what());
  }
  const auto state = store_.get(id);
  if (!state) return error_response(404, "NotFound", "unknown session " + id);
  std::shared_ptr<const SvmModel> model;
  try {
    model = models_.get(model_id);
  } catch (const DataError& e) {
    return error_response(404, "NotFound", "model " + model_id + " unreadable: " + e.what());
  }
  if (!model) return error_response(404, "NotFound", "unknown model " + model_id);
  if (!state->features) return error_response(409, "Conflict", "place a valid grid before classifying");
  try {
    const auto x = to_vector(*state->features);
    Classification c;
    c.model_id = model_id;
    c.decision_value = decision_value(*model, x);
    c.label = c.decision_value >= 0.0 ? Label::Diseased : Label::Healthy;
    c.signed_distance = -c.decision_value / rkhs_weight_norm(*model);
    store_.set_classification(id, c);
    return json_response(200, classification_json(c));
  } catch (const DataError& e) {
    return error_response(400, e.kind(), e.what());
  }
}

Response ScreenService::get_session(const std::string& id) {
  const auto s = store_.get(id);
  if (!s) return error_response(404, "NotFound", "unknown session " + id);
  return json_response(200, s->to_json());
}

Response ScreenService::list_sessions() {
  auto arr = json::array();
  for (const auto& s : store_.list()) arr.push_back(s.summary_json());
  return json_response(200, {{"sessions", arr}});
}

Response ScreenService::list_models() { return json_response(200, {{"models", models_.list()}}); }

// ---------------------------------------------------------------- transport

void bind_routes(httplib::Server& server, ScreenService& service, const std::optional<fs::path>& static_dir) {
  const auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Post("/api/sessions", [&service, send](const httplib::Request& req, httplib::Response& res) {
    std::string bytes;
    if (req.is_multipart_form_data()) {
      if (req.has_file("image")) bytes = req.get_file_value("image").content;
    } else {
      bytes = req.body;
    }
    send(res, service.create_session(
                  std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size())));
  });
  server.Get(R"(/api/sessions/([0-9a-f]+)/image)", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.session_image(req.matches[1]));
  });
  server.Put(R"(/api/sessions/([0-9a-f]+)/grid)", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.put_grid(req.matches[1], req.body));
  });
  server.Post(R"(/api/sessions/([0-9a-f]+)/classify)",
              [&service, send](const httplib::Request& req, httplib::Response& res) {
                send(res, service.classify(req.matches[1], req.body));
              });
  server.Get(R"(/api/sessions/([0-9a-f]+))", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.get_session(req.matches[1]));
  });
  server.Get("/api/sessions", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.list_sessions());
  });
  server.Get("/api/models", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.list_models());
  });
  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace faf::service
