// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Detail lines start with two spaces.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <sys/wait.h>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/harness.hpp"
#include "tdc/models.hpp"
#include "tdc/recommend.hpp"

#ifndef TDC_CLI_PATH
#error "TDC_CLI_PATH must name the tdc executable"
#endif

namespace fs = std::filesystem;
using namespace tdc;

namespace {

int g_failed = 0;

void detail(const std::string& text) { std::printf("  %s\n", text.c_str()); }

void report(const std::string& name, bool ok, const std::string& why) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), why.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  std::pair<bool, std::string> r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, " [%.1fs]", secs);
  report(name, r.first, r.second + buf);
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ------------------------------------------------------------------ oracles

std::pair<bool, std::string> oracle_suites() {
  std::vector<std::string> bad;
  Rng rng(20240601);

  std::size_t lev_bad = 0;
  for (int i = 0; i < 500; ++i) {
    auto a = oracle::random_sequence(rng, 5, 0, 12);
    auto b = oracle::random_sequence(rng, 5, 0, 12);
    lev_bad += levenshtein(a, b) != oracle::levenshtein(a, b);
  }
  if (lev_bad) bad.push_back("levenshtein " + std::to_string(lev_bad) + "/500");

  std::size_t front_bad = 0;
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<EvaluatedTemplate> all;
    std::size_t n = 1 + uniform_index(rng, 50);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = oracle::random_sequence(rng, 4, 1, 8);
      all.push_back({t, {t.size(), uniform_index(rng, 10)}});
    }
    auto got = pareto_front(all), want = oracle::pareto_front(all);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].tpl == want[i].tpl && got[i].objectives == want[i].objectives;
    }
    front_bad += !same;
  }
  if (front_bad) bad.push_back("pareto_front " + std::to_string(front_bad) + "/200");

  std::size_t mark_bad = 0;
  for (int inst = 0; inst < 200; ++inst) {
    ObjectiveSpec spec;
    for (Target t : kAllTargets) {
      if (uniform_index(rng, 2)) {
        spec.objectives.push_back({t, uniform_index(rng, 2) ? Direction::Minimize : Direction::Maximize});
      }
    }
    if (spec.objectives.empty()) spec.objectives.push_back({Target::Dbi, Direction::Minimize});
    std::vector<RecommendationRow> rows(1 + uniform_index(rng, 40));
    for (auto& r : rows) {
      for (auto& v : r.predicted) v = inst % 2 ? uniform_real(rng, 0, 10) : static_cast<double>(uniform_int(rng, 0, 5));
    }
    mark_nondominated(rows, spec);
    std::vector<std::vector<double>> costs;
    for (const auto& r : rows) {
      std::vector<double> c;
      for (const auto& o : spec.objectives) {
        double v = r.predicted[static_cast<std::size_t>(o.target)];
        c.push_back(o.direction == Direction::Minimize ? v : -v);
      }
      costs.push_back(c);
    }
    auto want = oracle::nondominated(costs);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].nondominated != want[i]) {
        ++mark_bad;
        break;
      }
    }
  }
  if (mark_bad) bad.push_back("mark_nondominated " + std::to_string(mark_bad) + "/200");

  std::size_t chi_bad = 0, chi_checked = 0;
  while (chi_checked < 300) {
    std::size_t n = 3 + uniform_index(rng, 6);  // <= 8 templates
    std::vector<Template> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back(oracle::random_sequence(rng, 3, 1, 6));
    std::size_t k = 2 + uniform_index(rng, n - 2);
    if (k >= n) continue;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Clustering c;
    c.medoids.assign(order.begin(), order.begin() + static_cast<long>(k));
    std::set<Template> meds;
    for (auto m : c.medoids) meds.insert(items[m]);
    if (meds.size() != k) continue;
    c.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.assignment[i] = uniform_index(rng, k);
    for (std::size_t m = 0; m < k; ++m) c.assignment[c.medoids[m]] = m;
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(b), 1e-300); };
    chi_bad += !close(chi(items, c), oracle::chi(items, c)) || !close(dbi(items, c), oracle::dbi(items, c));
    ++chi_checked;
  }
  if (chi_bad) bad.push_back("chi/dbi " + std::to_string(chi_bad) + "/300");

  std::size_t cart_bad = 0;
  for (int inst = 0; inst < 300; ++inst) {
    std::size_t n = 2 + uniform_index(rng, 11);  // <= 12 rows
    std::size_t nf = 1 + uniform_index(rng, 4);
    FeatureMatrix X(nf);
    std::vector<double> y;
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> row(nf);
      for (auto& v : row) v = inst % 2 ? uniform_real(rng, 0, 1) : static_cast<double>(uniform_int(rng, 0, 3));
      X.add_row(row);
      y.push_back(uniform_real(rng, -100, 100));
    }
    ForestHyperparams hp;
    hp.feature_fraction = 1.0;
    hp.max_depth = 1 + static_cast<int>(uniform_index(rng, 6));
    hp.min_samples_split = 2 + static_cast<int>(uniform_index(rng, 3));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng tree_rng(0);
    auto tree = train_tree(X, y, rows, hp, tree_rng);
    double mse = 0;
    for (std::size_t r = 0; r < n; ++r) mse += std::pow(tree.predict(X.row(r)) - y[r], 2) / static_cast<double>(n);
    double want = oracle::ExhaustiveTree(X, y, hp.max_depth, hp.min_samples_split).training_mse();
    cart_bad += std::abs(mse - want) > 1e-9 * std::max(1.0, want);
  }
  if (cart_bad) bad.push_back("cart " + std::to_string(cart_bad) + "/300");

  if (!bad.empty()) {
    std::string why = "mismatches:";
    for (const auto& b : bad) why += " " + b;
    return {false, why};
  }
  return {true, "levenshtein 500/500, pareto_front 200/200, mark_nondominated 200/200, chi/dbi 300/300, cart 300/300"};
}

// --------------------------------------------------------- ensemble identities

std::pair<bool, std::string> ensemble_identities() {
  auto samples = fixture::corpus(5, 40, 77);
  auto models = train_each(samples, fixture::quick_options());
  std::vector<const SurrogateModel*> all;
  for (const auto& m : models) all.push_back(&m);
  Rng rng(5);
  int knn_eq = 0, one_eq = 0;
  for (int i = 0; i < 50; ++i) {
    auto p = fixture::random_params(rng);
    const auto& d = samples[uniform_index(rng, samples.size())].descriptor;
    knn_eq += predict_knn_ensemble(all, d, all.size(), p) == predict_average_ensemble(all, p);
    const auto& member = models[uniform_index(rng, models.size())];
    one_eq += predict_average_ensemble({&member}, p) == member.predict(p);
  }
  bool ok = knn_eq == 50 && one_eq == 50;
  return {ok, "knn(k=n)==average " + std::to_string(knn_eq) + "/50, average(n=1)==member " +
                  std::to_string(one_eq) + "/50 (bitwise)"};
}

// ------------------------------------------------------------------- mape

std::pair<bool, std::string> mape_unit() {
  std::vector<double> t = {100, 200}, p = {110, 180};
  double v = mape(t, p).value;
  double z = mape(t, t).value;
  return {v == 10.0 && z == 0.0, "mape([100,200],[110,180]) = " + csv::format_double(v) + ", mape(y,y) = " +
                                     csv::format_double(z)};
}

// ------------------------------------------------------------- determinism

struct Cmd {
  int status = 0;
  std::string err;
};

Cmd cli(const std::string& args, const fs::path& dir) {
  fs::path err = dir / "stderr.txt";
  std::string line = "cd '" + dir.string() + "' && '" TDC_CLI_PATH "' " + args + " 2> '" + err.string() + "'";
  int rc = std::system(line.c_str());
  Cmd c;
  c.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  c.err = read_file(err.string());
  return c;
}

/// CSV text with the named column removed from every row.
std::string drop_column(const std::string& text, const std::string& column) {
  auto rows = csv::lines(text);
  if (rows.empty()) return text;
  auto header = csv::split(rows[0]);
  auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw Error(ErrorKind::SchemaMismatch, "no column " + column);
  auto idx = static_cast<std::size_t>(it - header.begin());
  std::string out;
  for (const auto& r : rows) {
    auto f = csv::split(r);
    f.erase(f.begin() + static_cast<long>(idx));
    out += csv::join(f) + "\n";
  }
  return out;
}

std::pair<bool, std::string> determinism() {
  fs::path dir = fs::temp_directory_path() / ("tdc_accept_det_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<std::string> bad;
  auto must = [&](const std::string& args) {
    auto c = cli(args, dir);
    if (c.status != 0) throw Error(ErrorKind::IoError, "`tdc " + args + "` failed: " + c.err);
  };
  auto file = [&](const std::string& name) { return read_file((dir / name).string()); };

  must("generate --template A,B,C,D --template E,F,G --mutation-p 0.2 --size 30 --seed 4 -o a.txt");
  must("generate --template A,C,E --mutation-p 0.1 --size 30 --seed 5 -o b.txt");
  must("generate --template A,C,E --mutation-p 0.1 --size 30 --seed 5 -o b2.txt");
  if (file("b.txt") != file("b2.txt")) bad.push_back("generate");

  for (int i = 0; i < 2; ++i) {
    must("tdc a.txt --seed 7 --krange 2:6 -o tdc" + std::to_string(i) + ".csv --graph g" + std::to_string(i) +
         ".json");
  }
  if (drop_column(file("tdc0.csv"), "elapsed_seconds") != drop_column(file("tdc1.csv"), "elapsed_seconds") ||
      file("g0.json") != file("g1.json")) {
    bad.push_back("tdc");
  }

  must("sweep a.txt b.txt --seed 3 --values-per-param 2 -o s0.csv");
  must("sweep a.txt b.txt --seed 3 --values-per-param 2 -o s1.csv --jobs 2");
  if (drop_column(file("s0.csv"), "elapsed_seconds") != drop_column(file("s1.csv"), "elapsed_seconds")) {
    bad.push_back("sweep");
  }

  for (int i = 0; i < 2; ++i) {
    must("train --samples s0.csv --family general --seed 9 --min-samples-per-set 5 -o gen" + std::to_string(i) +
         ".model");
    must("train --samples s0.csv --family each --seed 9 --min-samples-per-set 5 -o each" + std::to_string(i) +
         ".model");
  }
  if (file("gen0.model") != file("gen1.model") || file("each0.model") != file("each1.model")) {
    bad.push_back("train");
  }
  fs::remove_all(dir);
  if (!bad.empty()) {
    std::string why = "outputs differ for:";
    for (const auto& b : bad) why += " " + b;
    return {false, why};
  }
  return {true, "generate, tdc (+graph), sweep (jobs 1 vs 2), train (each, general) identical modulo elapsed_seconds"};
}

// ---------------------------------------------------------- desk pipeline

struct Corpus {
  std::vector<TrainingSample> train, test;
  ModelBundle each, general;
  std::vector<EvalReport> reports;
};

std::vector<std::string> random_template(Rng& rng, const std::vector<std::string>& states) {
  std::size_t len = 3 + uniform_index(rng, 4);
  std::vector<std::string> t;
  for (std::size_t i = 0; i < len; ++i) t.push_back(states[uniform_index(rng, states.size())]);
  return t;
}

std::vector<SequenceSet> desk_sets(std::uint64_t corpus_seed) {
  const std::vector<std::string> states = {"adm", "ther", "surg", "card", "neur", "icu", "rehab", "dis"};
  Rng rng(derive_seed(corpus_seed, 100));
  std::vector<SequenceSet> sets;
  for (int i = 0; i < 6; ++i) {
    GeneratorConfig g;
    std::size_t n_templates = 1 + static_cast<std::size_t>(i % 3);
    for (std::size_t t = 0; t < n_templates; ++t) g.templates.push_back(random_template(rng, states));
    g.mutation_probability = 0.1 + 0.1 * static_cast<double>(i / 2);  // 0.1, 0.2, 0.3
    g.set_size = 40;
    g.seed = derive_seed(corpus_seed, static_cast<std::uint64_t>(i));
    g.name = "tpl" + std::to_string(i);
    sets.push_back(generate_set(g));
  }
  for (int i = 0; i < 2; ++i) {
    RandomSetConfig r;
    r.alphabet = states;
    r.min_length = 2;
    r.max_length = 8;
    r.set_size = 40;
    r.seed = derive_seed(corpus_seed, static_cast<std::uint64_t>(10 + i));
    r.name = "rnd" + std::to_string(i);
    sets.push_back(generate_random_set(r));
  }
  return sets;
}

Corpus build_corpus(std::uint64_t corpus_seed) {
  auto sets = desk_sets(corpus_seed);
  ParamGrid grid = build_grid(3, GridRanges{}, corpus_seed);
  SweepOptions so;
  so.master_seed = corpus_seed;
  so.jobs = jobs();
  auto samples = sweep_sets(sets, grid, so);
  Corpus c;
  std::tie(c.train, c.test) = split_by_set(samples, {0.7, corpus_seed});
  TrainOptions to;
  to.hp_grid = default_hp_grid(corpus_seed);
  to.seed = corpus_seed;
  to.jobs = jobs();
  std::string hash = corpus_hash(samples_to_csv(samples));
  c.each = {"each", hash, train_each(c.train, to)};
  c.general = {"general", hash, {train_general(c.train, to)}};
  c.reports = evaluate_families(&c.each, &c.general, c.train, c.test, kDefaultNeighbors);
  return c;
}

double mean_test_mape(const EvalReport& r) {
  double s = 0;
  for (const auto& t : r.targets) s += t.test_mape ? t.test_mape->value : NAN;
  return s / static_cast<double>(kNumTargets);
}

const EvalReport& family(const Corpus& c, const std::string& name) {
  for (const auto& r : c.reports) {
    if (r.family == name) return r;
  }
  throw Error(ErrorKind::NoModels, "no report for " + name);
}

/// Per set: targets on which the set's own model has strictly lower test
/// error than the mean of the set's training rows. Error is MAPE, or MSE when
/// every test truth is zero; two exact fits count as a win.
std::map<std::string, int> beats_constant(const Corpus& c) {
  std::map<std::string, int> wins;
  for (const auto& m : c.each.models) {
    std::vector<const TrainingSample*> tr, te;
    for (const auto& s : c.train) {
      if (s.set_name == m.name) tr.push_back(&s);
    }
    for (const auto& s : c.test) {
      if (s.set_name == m.name) te.push_back(&s);
    }
    int w = 0;
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      double mean = 0;
      for (auto* s : tr) mean += outcome_vector(s->outcome)[t] / static_cast<double>(tr.size());
      std::vector<double> truth, model_pred, const_pred;
      for (auto* s : te) {
        truth.push_back(outcome_vector(s->outcome)[t]);
        model_pred.push_back(m.predict(s->params)[t]);
        const_pred.push_back(mean);
      }
      auto err = [&](const std::vector<double>& pred) {
        try {
          return mape(truth, pred).value;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::AllTargetsZero) throw;
          double s = 0;
          for (std::size_t i = 0; i < truth.size(); ++i) s += std::pow(truth[i] - pred[i], 2);
          return s / static_cast<double>(truth.size());
        }
      };
      double em = err(model_pred), ec = err(const_pred);
      w += em < ec || (em == 0 && ec == 0);
      if (std::getenv("TDC_ACCEPT_VERBOSE")) detail("    " + m.name + " " + target_name(kAllTargets[t]) + " model " + fmt(em) + " const " + fmt(ec));
    }
    wins[m.name] = w;
  }
  return wins;
}

std::vector<Corpus> g_corpora;

std::pair<bool, std::string> desk_pipeline() {
  const std::array<std::uint64_t, 3> seeds = {101, 202, 303};
  bool a_ok = true, c_ok = true;
  int b_hold = 0;
  for (auto seed : seeds) {
    g_corpora.push_back(build_corpus(seed));
    const Corpus& c = g_corpora.back();
    detail("corpus seed " + std::to_string(seed) + ": " + std::to_string(c.train.size() + c.test.size()) +
           " runs, " + std::to_string(c.each.models.size()) + " per-set models");
    std::istringstream table(format_mape_table(c.reports));
    for (std::string line; std::getline(table, line);) detail("  " + line);
    for (const auto& r : c.reports) {
      for (const auto& t : r.targets) {
        if (!t.test_mape || !std::isfinite(t.test_mape->value)) a_ok = false;
      }
    }
    double g = mean_test_mape(family(c, "general")), av = mean_test_mape(family(c, "average"));
    bool b = g <= av;
    b_hold += b;
    detail("  (b) mean test MAPE general " + fmt(g, 2) + " vs average " + fmt(av, 2) + (b ? " holds" : " fails"));
    std::string wins = "  (c) wins over constant mean:";
    for (const auto& [name, w] : beats_constant(c)) {
      wins += " " + name + "=" + std::to_string(w) + "/5";
      if (w < 4) c_ok = false;
    }
    detail(wins);
  }
  bool ok = a_ok && b_hold >= 2 && c_ok;
  return {ok, std::string("(a) all MAPEs finite: ") + (a_ok ? "yes" : "no") + "; (b) general <= average in " +
                  std::to_string(b_hold) + "/3 corpora (need 2); (c) every per-set model wins >= 4/5: " +
                  (c_ok ? "yes" : "no")};
}

// ------------------------------------------------------------------ recovery

std::pair<bool, std::string> recovery() {
  GeneratorConfig g;
  g.templates = {{"adm", "ther", "dis"}, {"surg", "icu", "rehab", "out"}, {"card", "neur"}};
  g.mutation_probability = 0.1;
  g.set_size = 40;
  g.seed = 42;
  auto set = generate_set(g);
  std::map<std::size_t, int> histogram;
  int hits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto r = run_tdc(set, GAParams{}, KRange{}, StoppingConfig{}, derive_seed(7, s));
    histogram[static_cast<std::size_t>(r.outcome.num_clusters)]++;
    hits += r.outcome.num_clusters == 3;
  }
  std::string h;
  for (const auto& [k, n] : histogram) h += " k=" + std::to_string(k) + ":" + std::to_string(n);
  return {hits >= 16, "kbest = 3 in " + std::to_string(hits) + "/20 runs (need 16); distribution" + h};
}

// ---------------------------------------------------------------- importance

std::pair<bool, std::string> importance_sanity() {
  if (g_corpora.empty()) g_corpora.push_back(build_corpus(101));
  auto train = g_corpora.front().train;
  Rng rng(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (auto& s : train) s.outcome.chi = s.params.start_population_factor + noise(rng);
  TrainOptions to;
  to.hp_grid = default_hp_grid(1);
  to.seed = 1;
  to.jobs = jobs();
  auto model = train_general(train, to);
  auto ranked = feature_importance(model, Target::Chi);
  if (ranked.empty()) return {false, "no splits in the chi forest"};
  std::string top;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
    top += (i ? ", " : "") + ranked[i].first + " " + fmt(ranked[i].second);
  }
  return {ranked.front().first == "start_population_factor", "top features: " + top};
}

// ------------------------------------------------------ recommend table

std::pair<bool, std::string> recommend_contract() {
  std::vector<RecommendationRow> rows(2);
  rows[0].predicted[static_cast<std::size_t>(Target::Dbi)] = 4.02;
  rows[0].predicted[static_cast<std::size_t>(Target::ElapsedSeconds)] = 19.04;
  rows[1].predicted[static_cast<std::size_t>(Target::Dbi)] = 4.2;
  rows[1].predicted[static_cast<std::size_t>(Target::ElapsedSeconds)] = 20.26;
  mark_nondominated(rows, parse_objectives("dbi:min,elapsed_seconds:min"));
  bool flags_ok = rows[0].nondominated && !rows[1].nondominated;

  if (g_corpora.empty()) g_corpora.push_back(build_corpus(101));
  fs::path dir = fs::temp_directory_path() / ("tdc_accept_rec_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  save_bundle(g_corpora.front().general, (dir / "general.model").string());
  write_file_atomic((dir / "new.txt").string(), "adm,ther,dis\nadm,surg,dis\ncard,rehab\nadm,ther\n");
  auto c = cli("recommend --model general.model new.txt --objectives dbi:min,elapsed_seconds:min --show-all -o rec.csv",
               dir);
  if (c.status != 0) return {false, "recommend failed: " + c.err};
  auto text = read_file((dir / "rec.csv").string());
  bool scatter = fs::exists(dir / "rec.scatter.csv");
  fs::remove_all(dir);

  auto header = csv::split(csv::lines(text).at(0));
  const std::vector<std::string> data_cols = {"increment", "mutation_probability", "mutation_number",
                                              "parent_fraction", "start_population_factor", "chi",
                                              "dbi", "non_clustered", "num_clusters", "elapsed_seconds"};
  std::vector<std::string> inner(header.begin() + 1, header.end() - 1);
  bool cols_ok = header.front() == "#" && header.back() == "nondominated" && inner == data_cols;
  return {flags_ok && cols_ok && scatter,
          std::string("columns ") + (cols_ok ? "match" : "differ") + "; (4.02,19.04)/(4.2,20.26) flagged " +
              (rows[0].nondominated ? "nondominated" : "dominated") + "/" +
              (rows[1].nondominated ? "nondominated" : "dominated") + "; scatter file " +
              (scatter ? "written" : "missing")};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by name.
  std::set<std::string> only(argv + 1, argv + argc);
  auto pick = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    if (only.empty() || only.count(name)) run(name, body);
  };
  pick("oracle-suites", oracle_suites);
  pick("ensemble-identities", ensemble_identities);
  pick("mape-unit", mape_unit);
  pick("determinism", determinism);
  pick("desk-pipeline", desk_pipeline);
  pick("recovery", recovery);
  pick("importance-sanity", importance_sanity);
  pick("recommend-format", recommend_contract);
  std::printf("%d criterion(s) failed\n", g_failed);
  return g_failed ? 1 : 0;
}
