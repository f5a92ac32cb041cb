#include "tdc/service.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "tdc/error.hpp"
#include "tdc/rng.hpp"

namespace tdc {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- store

SessionStore::SessionStore(std::size_t capacity, Clock clock, std::chrono::seconds min_age,
                           std::uint64_t id_key)
    : capacity_(capacity), clock_(std::move(clock)), min_age_(min_age), id_key_(id_key) {
  if (capacity_ == 0) throw Error(ErrorKind::InvalidArgument, "store capacity must be positive");
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
  if (id_key_ == 0) id_key_ = (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();
}

std::optional<std::string> SessionStore::put(SequenceSet set, SetDescriptor descriptor) {
  std::lock_guard lock(mu_);
  const auto now = clock_();
  if (lru_.size() >= capacity_) {
    auto victim = lru_.end();
    for (auto it = lru_.rbegin(); it != lru_.rend(); ++it) {
      if (now - it->second.uploaded >= min_age_) {
        victim = std::prev(it.base());
        break;
      }
    }
    if (victim == lru_.end()) return std::nullopt;
    index_.erase(victim->first);
    lru_.erase(victim);
  }
  // mix64 is a bijection, so distinct counters give distinct ids.
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(mix64(id_key_ ^ ++counter_)));
  std::string id = buf;
  lru_.emplace_front(id, Entry{std::move(set), std::move(descriptor), now});
  index_[id] = lru_.begin();
  return id;
}

std::optional<SessionStore::Entry> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return lru_.size();
}

// ---------------------------------------------------------------- json

namespace {

ApiResponse reply(int status, const json& body) {
  return {status, body.dump()};
}

ApiResponse error_reply(int status, const std::string& kind, const std::string& message,
                        const std::string& field = {}) {
  json err = {{"kind", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return reply(status, {{"schema_version", kApiSchemaVersion}, {"error", err}});
}

ApiResponse error_reply(int status, const Error& e, const std::string& field = {}) {
  std::string msg = e.what();
  std::string prefix = std::string(to_string(e.kind())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  return error_reply(status, std::string(to_string(e.kind())), msg, field);
}

json descriptor_json(const SetDescriptor& d) {
  json ngrams = json::object();
  for (const auto& [k, v] : d.ngram_freqs) ngrams[k] = v;
  return {{"min_len", d.min_len},       {"max_len", d.max_len},
          {"median_len", d.median_len}, {"stdev_len", d.stdev_len},
          {"outlier_count", d.outlier_count}, {"unique_count", d.unique_count},
          {"ngrams", ngrams}};
}

json params_json(const GAParams& p) {
  const auto& m = p.mutation_probability;
  return {{"increment", p.increment},
          {"mutation_probability", {m.substitution, m.deletion, m.insertion}},
          {"mutation_number", p.mutation_number},
          {"parent_fraction", p.parent_fraction},
          {"start_population_factor", p.start_population_factor}};
}

struct BadField {
  std::string field;
  std::string message;
};

double number_field(const json& obj, const char* name, const std::string& path) {
  auto it = obj.find(name);
  if (it == obj.end()) throw BadField{path + "." + name, "missing field"};
  if (!it->is_number()) throw BadField{path + "." + name, "must be a number"};
  return it->get<double>();
}

GAParams params_from_json(const json& obj, const std::string& path) {
  if (!obj.is_object()) throw BadField{path, "must be an object"};
  static const std::vector<std::string> known = {"increment", "mutation_probability", "mutation_number",
                                                 "parent_fraction", "start_population_factor"};
  for (const auto& [k, v] : obj.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw BadField{path + "." + k, "unknown field"};
  }
  GAParams p;
  p.increment = number_field(obj, "increment", path);
  auto mp = obj.find("mutation_probability");
  if (mp == obj.end()) throw BadField{path + ".mutation_probability", "missing field"};
  if (mp->is_number()) {
    double v = mp->get<double>();
    p.mutation_probability = {v, v, v};
  } else if (mp->is_array() && mp->size() == 3 && (*mp)[0].is_number() && (*mp)[1].is_number() &&
             (*mp)[2].is_number()) {
    p.mutation_probability = {(*mp)[0].get<double>(), (*mp)[1].get<double>(), (*mp)[2].get<double>()};
  } else {
    throw BadField{path + ".mutation_probability", "must be a number or an array of 3 numbers"};
  }
  double mn = number_field(obj, "mutation_number", path);
  p.mutation_number = static_cast<int>(mn);
  if (p.mutation_number != mn) throw BadField{path + ".mutation_number", "must be an integer"};
  p.parent_fraction = number_field(obj, "parent_fraction", path);
  p.start_population_factor = number_field(obj, "start_population_factor", path);
  try {
    validate(p);
  } catch (const Error& e) {
    throw BadField{path, e.what()};
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------- service

struct Service::Http {
  httplib::Server server;
};

Service::Service(ServiceConfig config, std::optional<ModelBundle> bundle, SessionStore::Clock clock)
    : config_(std::move(config)),
      bundle_(std::move(bundle)),
      store_(config_.store_capacity, std::move(clock)),
      http_(std::make_unique<Http>()) {
  if (bundle_) {
    predictor_ = make_predictor(*bundle_, config_.ensemble, config_.neighbors);
    vocabulary_ = bundle_->models.front().schema.kind == SchemaKind::PePlusPs
                      ? &bundle_->models.front().schema.vocabulary
                      : nullptr;
  }

  auto& srv = http_->server;
  // Oversized bodies get a JSON 413 from the handler; the transport limit only
  // guards against absurd payloads.
  srv.set_payload_max_length(config_.upload_limit * 2 + 4096);
  auto wire = [](const ApiResponse& r, httplib::Response& res) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  srv.Post("/api/sets", [this, wire](const httplib::Request& req, httplib::Response& res) {
    wire(upload(req.body), res);
  });
  srv.Post("/api/recommendations", [this, wire](const httplib::Request& req, httplib::Response& res) {
    wire(recommendations(req.body), res);
  });
  srv.Get("/api/health", [this, wire](const httplib::Request&, httplib::Response& res) { wire(health(), res); });
  if (!config_.static_dir.empty()) {
    if (!std::filesystem::is_directory(config_.static_dir)) {
      throw Error(ErrorKind::IoError, "static directory not found: " + config_.static_dir);
    }
    srv.set_mount_point("/", config_.static_dir);
  }
}

Service::~Service() { stop(); }

ApiResponse Service::upload(const std::string& body) {
  if (body.size() > config_.upload_limit) {
    return error_reply(413, "PayloadTooLarge",
                       "upload exceeds " + std::to_string(config_.upload_limit) + " bytes");
  }
  SequenceSet set;
  try {
    set = parse_sequence_file(body, "upload");
  } catch (const Error& e) {
    return error_reply(400, e);
  }
  SetDescriptor d = compute_descriptor(set);
  json warnings = json::array();
  if (d.unique_count == 1) warnings.push_back("the set holds a single distinct sequence");
  if (vocabulary_) {
    const auto& vocab = *vocabulary_;
    std::size_t unseen = 0;
    for (const auto& [k, v] : d.ngram_freqs) {
      if (std::find(vocab.begin(), vocab.end(), k) == vocab.end()) ++unseen;
    }
    if (unseen > 0) {
      warnings.push_back(std::to_string(unseen) + " n-gram(s) are not in the model vocabulary and are ignored");
    }
  }
  json descriptor = descriptor_json(d);
  auto id = store_.put(std::move(set), std::move(d));
  if (!id) return error_reply(503, "StoreFull", "session store is full; retry later");
  return reply(201, {{"schema_version", kApiSchemaVersion},
                     {"set_id", *id},
                     {"descriptor", descriptor},
                     {"warnings", warnings}});
}

ApiResponse Service::recommendations(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, "MalformedRequest", e.what());
  }
  if (!req.is_object()) return error_reply(400, "MalformedRequest", "body must be an object");
  for (const auto& [k, v] : req.items()) {
    if (k != "set_id" && k != "objectives" && k != "grid" && k != "show_all") {
      return error_reply(400, "MalformedRequest", "unknown field", k);
    }
  }
  if (!req.contains("set_id") || !req["set_id"].is_string()) {
    return error_reply(400, "MalformedRequest", "set_id must be a string", "set_id");
  }
  bool show_all = false;
  if (req.contains("show_all")) {
    if (!req["show_all"].is_boolean()) return error_reply(400, "MalformedRequest", "must be a boolean", "show_all");
    show_all = req["show_all"].get<bool>();
  }

  ObjectiveSpec spec = ObjectiveSpec::defaults();
  if (req.contains("objectives")) {
    const auto& objs = req["objectives"];
    if (!objs.is_array()) return error_reply(400, "MalformedRequest", "must be an array", "objectives");
    spec.objectives.clear();
    for (std::size_t i = 0; i < objs.size(); ++i) {
      std::string field = "objectives[" + std::to_string(i) + "]";
      if (!objs[i].is_string()) return error_reply(400, "MalformedRequest", "must be a string", field);
      try {
        spec.objectives.push_back(parse_objective(objs[i].get<std::string>()));
      } catch (const Error& e) {
        return error_reply(422, e, field);
      }
    }
    if (spec.objectives.empty()) {
      return error_reply(422, "InvalidObjective", "at least one objective is required", "objectives");
    }
  }

  std::vector<GAParams> grid;
  if (req.contains("grid")) {
    const auto& g = req["grid"];
    if (!g.is_array() || g.empty()) return error_reply(400, "MalformedRequest", "must be a non-empty array", "grid");
    try {
      for (std::size_t i = 0; i < g.size(); ++i) grid.push_back(params_from_json(g[i], "grid[" + std::to_string(i) + "]"));
    } catch (const BadField& bad) {
      return error_reply(400, "MalformedRequest", bad.message, bad.field);
    }
  } else {
    grid = default_recommendation_grid();
  }

  if (!predictor_) return error_reply(503, "NoModel", "no model is loaded");
  auto entry = store_.get(req["set_id"].get<std::string>());
  if (!entry) return error_reply(404, "UnknownSet", "unknown set_id", "set_id");

  Recommendation rec;
  try {
    rec = recommend(entry->set, *predictor_, grid, spec, show_all);
  } catch (const Error& e) {
    return error_reply(422, e);
  }

  json rows = json::array();
  for (const auto& row : rec.rows) {
    json r = params_json(row.params);
    for (const auto& c : recommendation_output_columns()) {
      r[c] = row.predicted[static_cast<std::size_t>(*parse_target(c))];
    }
    r["nondominated"] = row.nondominated;
    rows.push_back(std::move(r));
  }
  json objectives = json::array();
  for (const auto& o : spec.objectives) objectives.push_back(format_objective(o));
  json out = {{"schema_version", kApiSchemaVersion}, {"objectives", objectives}, {"rows", rows}};
  if (rec.scatter) {
    json pts = json::array();
    for (const auto& p : *rec.scatter) pts.push_back({{"x", p.x}, {"y", p.y}, {"nondominated", p.nondominated}});
    out["scatter"] = pts;
  }
  out["model_info"] = {{"family", predictor_->family()}, {"corpus_hash", bundle_->corpus_hash}};
  return reply(200, out);
}

ApiResponse Service::health() const {
  json out = {{"schema_version", kApiSchemaVersion},
              {"status", "ok"},
              {"model_loaded", predictor_ != nullptr},
              {"corpus_hash", bundle_ ? json(bundle_->corpus_hash) : json(nullptr)}};
  return reply(200, out);
}

int Service::bind() {
  if (config_.port == 0) return http_->server.bind_to_any_port(config_.host);
  return http_->server.bind_to_port(config_.host, config_.port) ? config_.port : -1;
}

bool Service::listen_after_bind() { return http_->server.listen_after_bind(); }

void Service::stop() {
  if (http_) http_->server.stop();
}

void Service::wait_until_ready() const { http_->server.wait_until_ready(); }

}  // namespace tdc
