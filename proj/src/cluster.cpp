#include "tdc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/rng.hpp"

namespace tdc {

namespace {

double sq(double x) { return x * x; }

double dist(const Template& a, const Template& b) {
  return static_cast<double>(levenshtein(a, b));
}

}  // namespace

std::size_t within_distance(const std::vector<Template>& items, const Clustering& c) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    total += levenshtein(items[i], items[c.medoids[c.assignment[i]]]);
  }
  return total;
}

Clustering kmedoids(const std::vector<Template>& items, std::size_t k, std::uint64_t seed,
                    KMedoidsTrace* trace) {
  // Work on distinct templates with multiplicities so medoids are pairwise
  // distinct and no cluster can lose its own medoid.
  std::vector<std::size_t> distinct_first;  // item index of each distinct template
  std::vector<std::size_t> weight;
  std::vector<std::size_t> item_to_distinct(items.size());
  {
    std::map<Template, std::size_t> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto [it, inserted] = seen.emplace(items[i], distinct_first.size());
      if (inserted) {
        distinct_first.push_back(i);
        weight.push_back(0);
      }
      item_to_distinct[i] = it->second;
      ++weight[it->second];
    }
  }
  const std::size_t d = distinct_first.size();
  if (k < 1 || k > d) {
    throw Error(ErrorKind::InvalidK, "k=" + std::to_string(k) + " outside [1, " +
                                         std::to_string(d) + "] distinct items");
  }

  std::vector<std::size_t> dm(d * d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      dm[a * d + b] = dm[b * d + a] = levenshtein(items[distinct_first[a]], items[distinct_first[b]]);
    }
  }
  auto D = [&](std::size_t a, std::size_t b) { return dm[a * d + b]; };

  // k-means++ style seeding: next medoid drawn with probability proportional
  // to the squared distance to the nearest chosen medoid.
  Rng rng(seed);
  std::vector<std::size_t> medoids{uniform_index(rng, d)};
  std::vector<double> nearest(d);
  while (medoids.size() < k) {
    double total = 0;
    for (std::size_t x = 0; x < d; ++x) {
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (std::size_t m : medoids) best = std::min(best, D(x, m));
      nearest[x] = sq(static_cast<double>(best)) * static_cast<double>(weight[x]);
      total += nearest[x];
    }
    double r = uniform_real(rng, 0.0, total);
    std::size_t pick = d;
    for (std::size_t x = 0; x < d; ++x) {
      if (nearest[x] <= 0) continue;
      pick = x;
      if (r < nearest[x]) break;
      r -= nearest[x];
    }
    medoids.push_back(pick);
  }

  std::vector<std::size_t> assign(d);
  auto assign_all = [&] {
    std::size_t within = 0;
    for (std::size_t x = 0; x < d; ++x) {
      std::size_t best = 0;
      for (std::size_t m = 1; m < k; ++m) {
        if (D(x, medoids[m]) < D(x, medoids[best])) best = m;
      }
      assign[x] = best;
      within += D(x, medoids[best]) * weight[x];
    }
    return within;
  };

  for (int round = 0; round < 100; ++round) {
    std::size_t within = assign_all();
    if (trace) trace->within_per_round.push_back(within);
    bool changed = false;
    for (std::size_t m = 0; m < k; ++m) {
      auto cost_of = [&](std::size_t candidate) {
        std::size_t c = 0;
        for (std::size_t x = 0; x < d; ++x) {
          if (assign[x] == m) c += D(candidate, x) * weight[x];
        }
        return c;
      };
      std::size_t best = medoids[m];
      std::size_t best_cost = cost_of(best);
      for (std::size_t x = 0; x < d; ++x) {
        if (assign[x] != m || x == medoids[m]) continue;
        std::size_t c = cost_of(x);
        if (c < best_cost) {
          best = x;
          best_cost = c;
        }
      }
      if (best != medoids[m]) {
        medoids[m] = best;
        changed = true;
      }
    }
    if (!changed) break;
    if (round == 99) assign_all();
  }

  Clustering result;
  for (std::size_t m : medoids) result.medoids.push_back(distinct_first[m]);
  result.assignment.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) result.assignment[i] = assign[item_to_distinct[i]];
  return result;
}

std::size_t one_medoid(const std::vector<Template>& items) {
  if (items.empty()) throw Error(ErrorKind::InvalidArgument, "one_medoid of empty list");
  std::size_t best = 0;
  std::size_t best_cost = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::size_t cost = 0;
    for (std::size_t j = 0; j < items.size(); ++j) cost += levenshtein(items[i], items[j]);
    if (cost < best_cost) {
      best = i;
      best_cost = cost;
    }
  }
  return best;
}

double chi(const std::vector<Template>& items, const Clustering& c) {
  const std::size_t n = items.size();
  const std::size_t k = c.k();
  if (k < 2 || n <= k) {
    throw Error(ErrorKind::DegenerateClustering,
                "CHI needs k >= 2 and n > k (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  const Template& global = items[one_medoid(items)];
  std::vector<std::size_t> sizes(k, 0);
  double within = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ++sizes[c.assignment[i]];
    within += sq(dist(items[i], items[c.medoids[c.assignment[i]]]));
  }
  if (within == 0) return kChiSentinelMax;
  double between = 0;
  for (std::size_t m = 0; m < k; ++m) {
    between += static_cast<double>(sizes[m]) * sq(dist(items[c.medoids[m]], global));
  }
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

double dbi(const std::vector<Template>& items, const Clustering& c) {
  const std::size_t k = c.k();
  if (k < 2) throw Error(ErrorKind::DegenerateClustering, "DBI needs k >= 2");
  std::vector<double> scatter(k, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::size_t m = c.assignment[i];
    scatter[m] += dist(items[i], items[c.medoids[m]]);
    ++sizes[m];
  }
  for (std::size_t m = 0; m < k; ++m) {
    if (sizes[m] > 0) scatter[m] /= static_cast<double>(sizes[m]);
  }
  double total = 0;
  for (std::size_t a = 0; a < k; ++a) {
    double worst = 0;
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      double sep = dist(items[c.medoids[a]], items[c.medoids[b]]);
      if (sep == 0) throw Error(ErrorKind::CoincidentMedoids, "medoids " + std::to_string(a) +
                                                                  " and " + std::to_string(b) + " coincide");
      worst = std::max(worst, (scatter[a] + scatter[b]) / sep);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

std::size_t pick_k(const std::vector<KScore>& table) {
  if (table.empty()) throw Error(ErrorKind::InvalidKRange, "empty k range");
  const std::size_t m = table.size();
  if (m == 1) return table[0].k;
  for (std::size_t i = 0; i < m; ++i) {
    bool above_left = i == 0 || table[i].chi > table[i - 1].chi;
    bool above_right = i + 1 == m || table[i].chi > table[i + 1].chi;
    if (above_left && above_right) return table[i].k;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (table[i].dbi < table[best].dbi) best = i;
  }
  return table[best].k;
}

KSelection select_k(const std::vector<Template>& items, const std::vector<std::size_t>& krange,
                    std::uint64_t seed) {
  std::map<Template, int> distinct;
  for (const auto& t : items) distinct[t];
  if (krange.empty()) throw Error(ErrorKind::InvalidKRange, "empty k range");
  for (std::size_t i = 0; i < krange.size(); ++i) {
    if (krange[i] < 2 || krange[i] > distinct.size() || (i > 0 && krange[i] <= krange[i - 1])) {
      throw Error(ErrorKind::InvalidKRange, "k range must be ascending within [2, " +
                                                std::to_string(distinct.size()) + "]");
    }
  }
  KSelection sel;
  std::vector<Clustering> clusterings;
  for (std::size_t k : krange) {
    Clustering c = kmedoids(items, k, derive_seed(seed, k));
    // n == k means every cluster is a singleton: zero within-dispersion.
    double chi_value = items.size() > k ? chi(items, c) : kChiSentinelMax;
    sel.table.push_back({k, chi_value, dbi(items, c)});
    clusterings.push_back(std::move(c));
  }
  sel.kbest = pick_k(sel.table);
  for (std::size_t i = 0; i < krange.size(); ++i) {
    if (krange[i] == sel.kbest) sel.clustering = clusterings[i];
  }
  return sel;
}

SequenceAssignment assign_sequences(const SequenceSet& set,
                                    const std::vector<Template>& representatives) {
  if (representatives.empty()) throw Error(ErrorKind::InvalidArgument, "no representatives");
  SequenceAssignment out;
  out.clusters.resize(representatives.size());
  for (std::size_t s = 0; s < set.sequences.size(); ++s) {
    const auto& seq = set.sequences[s];
    std::size_t best = representatives.size();
    std::size_t best_d = 0;
    for (std::size_t r = 0; r < representatives.size(); ++r) {
      if (!fits(seq, representatives[r])) continue;
      std::size_t d = levenshtein(seq, representatives[r]);
      if (best == representatives.size() || d < best_d) {
        best = r;
        best_d = d;
      }
    }
    if (best == representatives.size()) {
      out.non_clustered.push_back(s);
    } else {
      out.clusters[best].push_back(s);
    }
  }
  return out;
}

std::vector<std::size_t> KRange::values() const {
  std::vector<std::size_t> v;
  for (std::size_t k = lo; k <= hi; ++k) v.push_back(k);
  return v;
}

KRange parse_krange(const std::string& text) {
  auto parse = [&](const std::string& s) -> std::size_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorKind::InvalidKRange, "bad k range '" + text + "'");
    }
    return std::stoul(s);
  };
  KRange r;
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    r.lo = r.hi = parse(text);
  } else {
    r.lo = parse(text.substr(0, colon));
    r.hi = parse(text.substr(colon + 1));
  }
  if (r.lo < 2 || r.hi < r.lo) throw Error(ErrorKind::InvalidKRange, "k range must satisfy 2 <= lo <= hi");
  return r;
}

TdcResult run_tdc(const SequenceSet& set, const GAParams& params, const KRange& krange,
                  const StoppingConfig& stop, std::uint64_t seed) {
  if (krange.lo < 2 || krange.hi < krange.lo) {
    throw Error(ErrorKind::InvalidKRange, "k range must satisfy 2 <= lo <= hi");
  }
  TdcResult r;
  r.ga = run_ga(set, params, stop, seed);
  r.outcome.elapsed_seconds = r.ga.elapsed_seconds;

  std::vector<Template> templates;
  for (const auto& e : r.ga.front) templates.push_back(e.tpl);
  const std::size_t n = templates.size();

  if (n < krange.lo) {
    r.degenerate = true;
    r.degenerate_reason = std::string(to_string(ErrorKind::FrontTooSmall)) + ": front has " +
                          std::to_string(n) + " templates, k range starts at " +
                          std::to_string(krange.lo);
    r.representatives = {templates[one_medoid(templates)]};
    r.assignment = assign_sequences(set, r.representatives);
    r.outcome.num_clusters = 1;
    r.outcome.chi = kChiDegenerate;
    r.outcome.dbi = kDbiDegenerate;
    r.outcome.non_clustered = static_cast<int>(r.assignment.non_clustered.size());
    return r;
  }

  // k = n only when the front is exactly krange.lo templates long; otherwise
  // keep k < n so CHI stays finite.
  std::size_t hi = std::min(krange.hi, n - 1);
  std::vector<std::size_t> ks;
  if (hi < krange.lo) {
    ks = {n};
  } else {
    for (std::size_t k = krange.lo; k <= hi; ++k) ks.push_back(k);
  }
  KSelection sel = select_k(templates, ks, derive_seed(seed, 2));
  r.k_table = sel.table;
  for (std::size_t m : sel.clustering.medoids) r.representatives.push_back(templates[m]);
  r.assignment = assign_sequences(set, r.representatives);

  r.outcome.num_clusters = static_cast<int>(sel.kbest);
  for (const auto& row : sel.table) {
    if (row.k == sel.kbest) {
      r.outcome.chi = row.chi;
      r.outcome.dbi = row.dbi;
    }
  }
  r.outcome.non_clustered = static_cast<int>(r.assignment.non_clustered.size());
  return r;
}

std::string format_mutation_probs(const MutationProbs& m) {
  return csv::format_double(m.substitution) + ";" + csv::format_double(m.deletion) + ";" +
         csv::format_double(m.insertion);
}

MutationProbs parse_mutation_probs(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t sep = text.find_first_of(";,", start);
    parts.push_back(text.substr(start, sep == std::string::npos ? std::string::npos : sep - start));
    if (sep == std::string::npos) break;
    start = sep + 1;
  }
  if (parts.size() == 1) parts = {parts[0], parts[0], parts[0]};
  if (parts.size() != 3) {
    throw Error(ErrorKind::InvalidParams, "mutation probability needs 1 or 3 values: '" + text + "'");
  }
  try {
    return {csv::parse_double(parts[0], "mutation_probability"),
            csv::parse_double(parts[1], "mutation_probability"),
            csv::parse_double(parts[2], "mutation_probability")};
  } catch (const Error& e) {
    throw Error(ErrorKind::InvalidParams, e.what());
  }
}

namespace {

std::vector<Sequence> cluster_members(const SequenceSet& set, const std::vector<std::size_t>& idx) {
  std::vector<Sequence> out;
  for (std::size_t i : idx) out.push_back(set.sequences[i]);
  return out;
}

}  // namespace

std::string cluster_graphs_dot(const SequenceSet& set, const TdcResult& result) {
  std::string out;
  for (std::size_t c = 0; c < result.assignment.clusters.size(); ++c) {
    auto edges = transition_graph(set.alphabet, cluster_members(set, result.assignment.clusters[c]));
    out += transition_graph_dot(edges, "cluster_" + std::to_string(c));
  }
  return out;
}

std::string cluster_graphs_json(const SequenceSet& set, const TdcResult& result) {
  using json = nlohmann::ordered_json;
  json clusters = json::array();
  for (std::size_t c = 0; c < result.assignment.clusters.size(); ++c) {
    const auto& members = result.assignment.clusters[c];
    json rep = json::array();
    for (StateId s : result.representatives[c]) rep.push_back(set.alphabet.name(s));
    json edges = json::array();
    for (const auto& e : transition_graph(set.alphabet, cluster_members(set, members))) {
      edges.push_back({{"from", e.from}, {"to", e.to}, {"count", e.count}});
    }
    clusters.push_back({{"representative", rep}, {"size", members.size()}, {"edges", edges}});
  }
  json out = {{"clusters", clusters}, {"non_clustered", result.assignment.non_clustered}};
  return out.dump(2) + "\n";
}

std::string ga_params_csv_header() {
  return "increment,mutation_probability,mutation_number,parent_fraction,start_population_factor";
}

std::string ga_params_csv(const GAParams& p) {
  return csv::format_double(p.increment) + "," + format_mutation_probs(p.mutation_probability) + "," +
         std::to_string(p.mutation_number) + "," + csv::format_double(p.parent_fraction) + "," +
         csv::format_double(p.start_population_factor);
}

std::string run_outcome_csv_header() {
  return ga_params_csv_header() + ",elapsed_seconds,num_clusters,chi,dbi,non_clustered";
}

std::string run_outcome_csv(const GAParams& p, const RunOutcome& o) {
  return ga_params_csv(p) + "," + csv::format_double(o.elapsed_seconds) + "," +
         std::to_string(o.num_clusters) + "," + csv::format_double(o.chi) + "," +
         csv::format_double(o.dbi) + "," + std::to_string(o.non_clustered);
}

}  // namespace tdc
