#pragma once

// HTTP facade: set upload, recommendations over the loaded surrogate model,
// health. Bodies are JSON; unknown request fields are rejected.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "tdc/models.hpp"
#include "tdc/recommend.hpp"
#include "tdc/seqcore.hpp"

namespace tdc {

inline constexpr int kApiSchemaVersion = 1;

class SessionStore {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  struct Entry {
    SequenceSet set;
    SetDescriptor descriptor;
    std::chrono::steady_clock::time_point uploaded;
  };

  /// `clock` defaults to steady_clock::now. Entries younger than `min_age`
  /// are never evicted.
  explicit SessionStore(std::size_t capacity, Clock clock = {},
                        std::chrono::seconds min_age = std::chrono::minutes(10),
                        std::uint64_t id_key = 0);

  /// Returns the new id, or nullopt when the store is full of entries too
  /// young to evict.
  std::optional<std::string> put(SequenceSet set, SetDescriptor descriptor);
  /// Marks the entry as most recently used.
  std::optional<Entry> get(const std::string& id);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  using Item = std::pair<std::string, Entry>;

  std::size_t capacity_;
  Clock clock_;
  std::chrono::seconds min_age_;
  std::uint64_t id_key_;
  std::uint64_t counter_ = 0;
  mutable std::mutex mu_;
  std::list<Item> lru_;  // front = most recent
  std::unordered_map<std::string, std::list<Item>::iterator> index_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t store_capacity = 256;
  std::size_t upload_limit = 1 << 20;
  /// Directory served at "/"; empty disables static files.
  std::string static_dir;
  /// For "each" bundles: "knn" or "average".
  std::string ensemble = "knn";
  std::size_t neighbors = kDefaultNeighbors;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

class Service {
 public:
  /// `bundle` may be empty (no model configured). Errors: InvalidArgument on
  /// an unknown ensemble name.
  Service(ServiceConfig config, std::optional<ModelBundle> bundle, SessionStore::Clock clock = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse upload(const std::string& body);
  ApiResponse recommendations(const std::string& body);
  ApiResponse health() const;

  /// Binds config.host:config.port (port 0 picks a free one) and returns the
  /// bound port, or -1.
  int bind();
  /// Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  SessionStore& store() { return store_; }

 private:
  struct Http;

  ServiceConfig config_;
  std::optional<ModelBundle> bundle_;
  const std::vector<std::string>* vocabulary_ = nullptr;
  std::unique_ptr<Predictor> predictor_;
  SessionStore store_;
  std::unique_ptr<Http> http_;
};

}  // namespace tdc
