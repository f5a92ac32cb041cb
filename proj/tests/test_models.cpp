#include <doctest.h>

#include <cmath>
#include <map>

#include "tdc/error.hpp"
#include "fixtures.hpp"
#include "tdc/models.hpp"

using namespace tdc;
using fixture::corpus;
using fixture::quick_options;
using fixture::random_params;

namespace {

bool throws_kind(ErrorKind k, auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == k;
  }
  return false;
}

}  // namespace

TEST_CASE("targets") {
  CHECK(target_name(Target::Chi) == "chi");
  CHECK(parse_target("non_clustered") == Target::NonClustered);
  CHECK_FALSE(parse_target("foo").has_value());
  RunOutcome o{1.5, 3, 20, 0.5, 4};
  CHECK(outcome_vector(o) == OutcomeVector{1.5, 3, 20, 0.5, 4});
}

TEST_CASE("feature schemas") {
  FeatureSchema pe;
  CHECK(pe.size() == 7);
  CHECK(pe.feature_names() == ga_feature_names());
  FeatureSchema ps{SchemaKind::PePlusPs, {"A", "A B"}};
  CHECK(ps.size() == 7 + 6 + 2);
  CHECK(ps.feature_names().back() == "ng:A B");
  GAParams p;
  CHECK(throws_kind(ErrorKind::SchemaMismatch, [&] { ps.features(p, nullptr); }));
  SetDescriptor d;
  d.ngram_freqs = {{"A", 0.25}, {"Z", 0.75}};
  auto f = ps.features(p, &d);
  CHECK(f[13] == 0.25);
  CHECK(f[14] == 0.0);
}

TEST_CASE("train each / general") {
  auto samples = corpus(3, 40, 1);
  std::vector<std::string> warnings;
  auto opts = quick_options();
  opts.warn = [&](const std::string& w) { warnings.push_back(w); };
  auto small = samples;
  small.resize(40 * 2 + 5);  // third set has 5 rows
  auto each = train_each(small, opts);
  REQUIRE(each.size() == 2);
  CHECK(each[0].name == "set0");
  CHECK(each[1].name == "set1");
  CHECK(each[0].descriptor.has_value());
  CHECK(warnings.size() == 1);

  auto general = train_general(samples, opts);
  CHECK(general.schema.kind == SchemaKind::PePlusPs);
  CHECK(std::is_sorted(general.schema.vocabulary.begin(), general.schema.vocabulary.end()));
  auto again = train_general(samples, opts);
  CHECK(again == general);

  std::vector<TrainingSample> one(samples.begin(), samples.begin() + 40);
  CHECK(throws_kind(ErrorKind::TooFewSets, [&] { train_general(one, opts); }));
}

TEST_CASE("ensemble identities") {
  auto samples = corpus(4, 30, 2);
  auto each = train_each(samples, quick_options());
  REQUIRE(each.size() == 4);
  std::vector<const SurrogateModel*> all;
  for (const auto& m : each) all.push_back(&m);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto p = random_params(rng);
    const auto& d = samples[uniform_index(rng, samples.size())].descriptor;
    CHECK(predict_knn_ensemble(all, d, all.size(), p) == predict_average_ensemble(all, p));
    CHECK(predict_average_ensemble({all[1]}, p) == each[1].predict(p));
  }
  std::vector<const SurrogateModel*> reversed(all.rbegin(), all.rend());
  GAParams p;
  CHECK(predict_average_ensemble(reversed, p) == predict_average_ensemble(all, p));
  CHECK(throws_kind(ErrorKind::NoModels, [&] { predict_average_ensemble({}, p); }));
  CHECK(throws_kind(ErrorKind::InvalidK, [&] { nearest_models(all, samples[0].descriptor, 5); }));

  // a set's own descriptor is its nearest neighbour
  auto near = nearest_models(all, *each[2].descriptor, 1);
  CHECK(near == std::vector<std::size_t>{2});
}

TEST_CASE("model file round trip") {
  auto samples = corpus(2, 30, 3);
  ModelBundle each{"each", corpus_hash(samples_to_csv(samples)), train_each(samples, quick_options())};
  auto text = serialize(each);
  CHECK(deserialize(text) == each);
  CHECK(serialize(deserialize(text)) == text);

  ModelBundle general{"general", "abc", {train_general(samples, quick_options())}};
  CHECK(deserialize(serialize(general)) == general);

  CHECK(throws_kind(ErrorKind::SchemaMismatch, [] { deserialize("nonsense\n"); }));
  CHECK(throws_kind(ErrorKind::SchemaMismatch, [&] { deserialize(text.substr(0, text.size() / 2)); }));
}

TEST_CASE("evaluation and importance") {
  auto samples = corpus(4, 40, 4);
  auto [train, test] = split_by_set(samples, {0.7, 1});
  ModelBundle each{"each", "h", train_each(train, quick_options())};
  ModelBundle general{"general", "h", {train_general(train, quick_options())}};
  auto reports = evaluate_families(&each, &general, train, test);
  REQUIRE(reports.size() == 4);
  CHECK(reports[0].family == "each");
  CHECK(reports[1].family == "average");
  CHECK(reports[2].family == "knn");
  CHECK(reports[3].family == "general");
  for (const auto& r : reports) {
    for (const auto& t : r.targets) {
      REQUIRE(t.test_mape.has_value());
      CHECK(std::isfinite(t.test_mape->value));
    }
  }
  auto table = format_mape_table(reports);
  CHECK(table.substr(0, table.find('\n')) == "family,chi,dbi,elapsed_seconds,non_clustered,num_clusters");
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);

  auto imp = feature_importance(general.models[0], Target::NonClustered);
  REQUIRE_FALSE(imp.empty());
  CHECK(imp.front().first == "increment");
  double sum = 0;
  for (std::size_t i = 0; i < imp.size(); ++i) {
    sum += imp[i].second;
    if (i) CHECK(imp[i - 1].second >= imp[i].second);
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("mape of a constant target") {
  TrainingSample s;
  s.outcome = {1, 2, 3, 4, 0};
  auto r = evaluate("x", [](const TrainingSample&) { return OutcomeVector{1, 2, 3, 4, 0}; }, {s}, {s});
  CHECK(r.targets[0].test_mape->value == 0.0);
  CHECK_FALSE(r.targets[4].test_mape.has_value());
}
