#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "tdc/service.hpp"

using namespace tdc;
using json = nlohmann::json;

namespace {

const ModelBundle& general_bundle() {
  static const ModelBundle b = [] {
    auto samples = fixture::corpus(3, 30, 8);
    return ModelBundle{"general", "cafe", {train_general(samples, fixture::quick_options())}};
  }();
  return b;
}

/// Runs a service on a free port for the lifetime of the object.
struct Running {
  Service service;
  std::thread thread;
  int port = -1;

  Running(ServiceConfig cfg, std::optional<ModelBundle> bundle) : service(with_any_port(cfg), std::move(bundle)) {
    port = service.bind();
    REQUIRE(port > 0);
    thread = std::thread([this] { service.listen_after_bind(); });
    service.wait_until_ready();
  }
  ~Running() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }

  static ServiceConfig with_any_port(ServiceConfig c) {
    c.port = 0;
    return c;
  }
};

json body(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("session store: ids, lru, minimum age") {
  auto now = std::chrono::steady_clock::time_point{};
  SessionStore store(2, [&] { return now; });
  auto set = parse_sequence_file("A\n");
  auto d = compute_descriptor(set);
  auto a = store.put(set, d);
  auto b = store.put(set, d);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a != *b);
  // full and nobody old enough
  now += std::chrono::minutes(5);
  CHECK_FALSE(store.put(set, d).has_value());
  CHECK(store.size() == 2);
  // touching a makes b the least recently used
  now += std::chrono::minutes(6);
  CHECK(store.get(*a).has_value());
  auto c = store.put(set, d);
  REQUIRE(c);
  CHECK_FALSE(store.get(*b).has_value());
  CHECK(store.get(*a).has_value());
  // b was evicted although a is older: LRU order wins among evictable entries,
  // and c is too young to go.
  now += std::chrono::minutes(1);
  auto e = store.put(set, d);
  REQUIRE(e);
  CHECK_FALSE(store.get(*a).has_value());
  CHECK(store.get(*c).has_value());
}

TEST_CASE("service handlers without http") {
  Service svc(ServiceConfig{}, general_bundle());
  auto h = json::parse(svc.health().body);
  CHECK(h["status"] == "ok");
  CHECK(h["model_loaded"] == true);
  CHECK(h["corpus_hash"] == "cafe");
  CHECK(svc.health().body == svc.health().body);

  auto up = svc.upload("A,B\nA,C\n");
  CHECK(up.status == 201);
  auto uj = json::parse(up.body);
  CHECK(uj["descriptor"]["unique_count"] == 2);
  CHECK(uj["schema_version"] == kApiSchemaVersion);
  auto up2 = svc.upload("A,B\nA,C\n");
  CHECK(json::parse(up2.body)["set_id"] != uj["set_id"]);

  auto empty = svc.upload("");
  CHECK(empty.status == 400);
  CHECK(json::parse(empty.body)["error"]["kind"] == "EmptyFile");
  auto bad = svc.upload("A,B\nA,,B\n");
  CHECK(bad.status == 400);
  CHECK(json::parse(bad.body)["error"]["message"].get<std::string>().find("line 2") != std::string::npos);

  std::string id = uj["set_id"];
  json req = {{"set_id", id}, {"objectives", {"dbi:min", "elapsed_seconds:min"}}, {"show_all", true}};
  auto r1 = svc.recommendations(req.dump());
  CHECK(r1.status == 200);
  auto rj = json::parse(r1.body);
  CHECK(rj.contains("scatter"));
  CHECK(rj["rows"].size() == 324);
  CHECK(rj["model_info"]["family"] == "general");
  CHECK(rj["model_info"]["corpus_hash"] == "cafe");
  CHECK(svc.recommendations(req.dump()).body == r1.body);

  std::vector<std::string> keys;
  auto ordered = nlohmann::ordered_json::parse(r1.body);
  for (auto& [k, v] : ordered["rows"][0].items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"increment", "mutation_probability", "mutation_number", "parent_fraction",
                                         "start_population_factor", "chi", "dbi", "non_clustered", "num_clusters",
                                         "elapsed_seconds", "nondominated"});

  json filtered = {{"set_id", id}, {"objectives", {"chi:max"}}, {"show_all", false}};
  auto fj = json::parse(svc.recommendations(filtered.dump()).body);
  CHECK_FALSE(fj.contains("scatter"));
  for (const auto& row : fj["rows"]) CHECK(row["nondominated"] == true);

  json grid = {{"set_id", id},
               {"grid", {{{"increment", 3}, {"mutation_probability", {0.1, 0.1, 0.1}}, {"mutation_number", 4},
                          {"parent_fraction", 0.3}, {"start_population_factor", 1.2}}}}};
  auto gj = json::parse(svc.recommendations(grid.dump()).body);
  CHECK(gj["rows"].size() == 1);
  CHECK(gj["objectives"].size() == 5);

  json foo = {{"set_id", id}, {"objectives", {"dbi:min", "foo"}}};
  auto f = svc.recommendations(foo.dump());
  CHECK(f.status == 422);
  CHECK(json::parse(f.body)["error"]["field"] == "objectives[1]");
  CHECK(json::parse(f.body)["error"]["message"].get<std::string>().find("foo") != std::string::npos);

  CHECK(svc.recommendations(json{{"set_id", "nope"}}.dump()).status == 404);
  CHECK(svc.recommendations(json{{"set_id", id}, {"extra", 1}}.dump()).status == 400);
  CHECK(svc.recommendations("{").status == 400);
  json badgrid = {{"set_id", id}, {"grid", {{{"increment", 3}}}}};
  CHECK(svc.recommendations(badgrid.dump()).status == 400);
}

TEST_CASE("service without a model") {
  Service svc(ServiceConfig{}, std::nullopt);
  auto h = json::parse(svc.health().body);
  CHECK(h["model_loaded"] == false);
  auto up = json::parse(svc.upload("A\n").body);
  CHECK(svc.recommendations(json{{"set_id", up["set_id"]}}.dump()).status == 503);
}

TEST_CASE("service over http") {
  auto dir = std::filesystem::temp_directory_path() / "tdc_static_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "index.html") << "<html>console</html>";
  ServiceConfig cfg;
  cfg.static_dir = dir.string();
  cfg.upload_limit = 64;
  Running run(cfg, general_bundle());
  auto cli = run.client();

  auto h = cli.Get("/api/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(body(h)["model_loaded"] == true);

  auto up = cli.Post("/api/sets", "A,B\nB,C\n", "text/plain");
  REQUIRE(up);
  CHECK(up->status == 201);
  std::string id = body(up)["set_id"];

  auto big = cli.Post("/api/sets", std::string(100, 'A'), "text/plain");
  REQUIRE(big);
  CHECK(big->status == 413);

  json req = {{"set_id", id}, {"objectives", {"dbi:min", "elapsed_seconds:min"}}, {"show_all", false}};
  auto rec = cli.Post("/api/recommendations", req.dump(), "application/json");
  REQUIRE(rec);
  CHECK(rec->status == 200);
  CHECK(body(rec).contains("scatter"));

  auto idx = cli.Get("/");
  REQUIRE(idx);
  CHECK(idx->status == 200);
  CHECK(idx->body.find("console") != std::string::npos);
  std::filesystem::remove_all(dir);
}
