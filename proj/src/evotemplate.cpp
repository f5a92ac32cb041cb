#include "tdc/evotemplate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "tdc/error.hpp"

namespace tdc {

namespace {

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

/// Distinct input sequences with multiplicities; evaluation cost scales with
/// the number of distinct sequences only.
struct WeightedSet {
  std::vector<Sequence> sequences;
  std::vector<std::size_t> counts;

  explicit WeightedSet(const SequenceSet& set) {
    std::map<Sequence, std::size_t> tally;
    for (const auto& s : set.sequences) ++tally[s];
    for (auto& [s, c] : tally) {
      sequences.push_back(s);
      counts.push_back(c);
    }
  }

  std::size_t aligning(const Template& tpl) const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      if (fits(sequences[i], tpl)) total += counts[i];
    }
    return total;
  }
};

Template crossover(const Template& a, const Template& b, std::size_t length_cap, Rng& rng) {
  // One cut point per parent: child = a[0, i) + b[j, |b|), with j chosen so
  // the child stays within the length cap.
  auto i = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(a.size())));
  std::size_t j_min = i + b.size() > length_cap ? i + b.size() - length_cap : 0;
  Template child(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i));
  if (j_min < b.size()) {
    auto j = static_cast<std::size_t>(
        uniform_int(rng, static_cast<int>(j_min), static_cast<int>(b.size()) - 1));
    child.insert(child.end(), b.begin() + static_cast<std::ptrdiff_t>(j), b.end());
  }
  return child;
}

}  // namespace

void validate(const GAParams& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidParams, what); };
  if (!(p.increment >= 1.0) || !std::isfinite(p.increment)) fail("increment must be >= 1");
  const auto& m = p.mutation_probability;
  if (!in_unit(m.substitution) || !in_unit(m.deletion) || !in_unit(m.insertion)) {
    fail("each mutation probability must be in [0,1]");
  }
  if (m.total() > 1.0 + 1e-12) fail("mutation probabilities must sum to at most 1");
  if (p.mutation_number < 0) fail("mutation number must be >= 0");
  if (!(p.parent_fraction > 0.0 && p.parent_fraction <= 1.0)) fail("parent fraction must be in (0,1]");
  if (!(p.start_population_factor > 0.0) || !std::isfinite(p.start_population_factor)) {
    fail("start population factor must be > 0");
  }
}

void validate(const StoppingConfig& s) {
  if (!(s.epsilon > 0.0) || s.patience < 1 || s.max_generations < 1) {
    throw Error(ErrorKind::InvalidParams, "stopping config values must be positive");
  }
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  return a.length <= b.length && a.aligning >= b.aligning &&
         (a.length < b.length || a.aligning > b.aligning);
}

std::vector<EvaluatedTemplate> pareto_front(const std::vector<EvaluatedTemplate>& evaluated) {
  if (evaluated.empty()) throw Error(ErrorKind::InvalidArgument, "pareto_front of empty list");
  // In 2-D, a point is non-dominated iff it has the best aligning among all
  // points of length <= its own, with ties on aligning resolved towards the
  // shorter template.
  std::vector<std::size_t> order(evaluated.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto& a = evaluated[x].objectives;
    const auto& b = evaluated[y].objectives;
    if (a.length != b.length) return a.length < b.length;
    return a.aligning > b.aligning;
  });
  std::vector<bool> keep(evaluated.size(), false);
  bool have_best = false;
  std::size_t best_aligning = 0;
  for (std::size_t idx : order) {
    const auto& o = evaluated[idx].objectives;
    if (!have_best || o.aligning > best_aligning) {
      keep[idx] = true;
      best_aligning = o.aligning;
      have_best = true;
    }
  }
  std::vector<EvaluatedTemplate> front;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (keep[i]) front.push_back(evaluated[i]);
  }
  return front;
}

double front_change_metric(const std::vector<ObjectiveVector>& front) {
  if (front.empty()) throw Error(ErrorKind::InvalidArgument, "empty front");
  double total = 0;
  for (const auto& o : front) {
    total += std::hypot(static_cast<double>(o.length), static_cast<double>(o.aligning));
  }
  return total;
}

std::size_t template_length_cap(const SequenceSet& set, const GAParams& params) {
  return static_cast<std::size_t>(
      std::floor(params.increment * static_cast<double>(set.max_length()) + 1e-9));
}

std::size_t population_size(const SequenceSet& set, const GAParams& params) {
  double raw = params.start_population_factor * static_cast<double>(set.size());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

std::vector<Template> init_population(const SequenceSet& set, const GAParams& params,
                                      std::uint64_t seed) {
  if (set.sequences.empty()) throw Error(ErrorKind::InvalidParams, "empty sequence set");
  if (!(params.increment >= 1.0)) throw Error(ErrorKind::InvalidParams, "increment must be >= 1");
  const std::size_t min_len = set.max_length();
  const std::size_t cap = template_length_cap(set, params);
  const std::size_t k = set.alphabet.size();
  Rng rng(seed);
  std::vector<Template> pop(population_size(set, params));
  for (auto& t : pop) {
    t.resize(static_cast<std::size_t>(
        uniform_int(rng, static_cast<int>(min_len), static_cast<int>(cap))));
    for (auto& s : t) s = static_cast<StateId>(uniform_index(rng, k));
  }
  return pop;
}

Template mutate(const Template& tpl, const GAParams& params, std::size_t alphabet_size,
                std::size_t length_cap, Rng& rng) {
  Template out = tpl;
  if (out.empty() || params.mutation_number <= 0) return out;
  const auto& p = params.mutation_probability;
  int m = uniform_int(rng, 0, params.mutation_number);
  for (int i = 0; i < m; ++i) {
    double u = uniform_real(rng);
    if (u < p.substitution) {
      std::size_t pos = uniform_index(rng, out.size());
      out[pos] = static_cast<StateId>(uniform_index(rng, alphabet_size));
    } else if (u < p.substitution + p.deletion) {
      std::size_t pos = uniform_index(rng, out.size());
      if (out.size() > 1) out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
    } else if (u < p.total()) {
      std::size_t pos = uniform_index(rng, out.size() + 1);
      auto state = static_cast<StateId>(uniform_index(rng, alphabet_size));
      if (out.size() < length_cap) out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), state);
    }
  }
  return out;
}

std::vector<int> nondomination_ranks(const std::vector<ObjectiveVector>& objs) {
  std::vector<std::size_t> order(objs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Every dominator of a point precedes it in this order.
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (objs[x].length != objs[y].length) return objs[x].length < objs[y].length;
    if (objs[x].aligning != objs[y].aligning) return objs[x].aligning > objs[y].aligning;
    return x < y;
  });
  std::vector<int> rank(objs.size(), 0);
  for (std::size_t a = 0; a < order.size(); ++a) {
    std::size_t p = order[a];
    for (std::size_t b = 0; b < a; ++b) {
      std::size_t q = order[b];
      if (rank[q] + 1 > rank[p] && dominates(objs[q], objs[p])) rank[p] = rank[q] + 1;
    }
  }
  return rank;
}

GAResult run_ga(const SequenceSet& set, const GAParams& params, const StoppingConfig& stop,
                std::uint64_t seed) {
  validate(params);
  validate(stop);
  if (set.sequences.empty()) throw Error(ErrorKind::InvalidParams, "empty sequence set");
  const auto started = std::chrono::steady_clock::now();

  const WeightedSet weighted(set);
  const std::size_t cap = template_length_cap(set, params);
  const std::size_t k = set.alphabet.size();
  const std::size_t pop_size = population_size(set, params);
  const std::size_t n_parents = std::min(
      pop_size, std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(
                                             params.parent_fraction * static_cast<double>(pop_size) - 1e-9))));

  std::vector<Template> population = init_population(set, params, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));

  GAResult result;
  result.seed = seed;
  double previous_metric = -1.0;
  int stagnant = 0;
  std::vector<EvaluatedTemplate> evaluated;
  std::vector<ObjectiveVector> objs;

  for (;;) {
    evaluated.clear();
    objs.clear();
    for (auto& t : population) {
      ObjectiveVector o{t.size(), weighted.aligning(t)};
      objs.push_back(o);
      evaluated.push_back({std::move(t), o});
    }
    result.front = pareto_front(evaluated);
    ++result.generations;

    std::vector<ObjectiveVector> front_objs;
    std::size_t best = 0;
    for (const auto& e : result.front) {
      front_objs.push_back(e.objectives);
      best = std::max(best, e.objectives.aligning);
    }
    result.best_aligning_history.push_back(best);

    double metric = front_change_metric(front_objs);
    if (previous_metric >= 0.0) {
      double rel = std::abs(metric - previous_metric) / std::max(metric, 1.0);
      stagnant = rel < stop.epsilon ? stagnant + 1 : 0;
    }
    previous_metric = metric;
    if (stagnant >= stop.patience || result.generations >= stop.max_generations) break;

    // Parents: best-ranked share of the population.
    auto ranks = nondomination_ranks(objs);
    std::vector<std::size_t> order(evaluated.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (ranks[x] != ranks[y]) return ranks[x] < ranks[y];
      if (objs[x].aligning != objs[y].aligning) return objs[x].aligning > objs[y].aligning;
      return objs[x].length < objs[y].length;
    });

    std::vector<Template> next;
    next.reserve(pop_size);
    for (const auto& e : result.front) next.push_back(e.tpl);
    while (next.size() < pop_size) {
      std::size_t ia = uniform_index(rng, n_parents);
      std::size_t ib = ia;
      if (n_parents > 1) {
        ib = uniform_index(rng, n_parents - 1);
        if (ib >= ia) ++ib;
      }
      Template child = crossover(evaluated[order[ia]].tpl, evaluated[order[ib]].tpl, cap, rng);
      next.push_back(mutate(child, params, k, cap, rng));
    }
    population = std::move(next);
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace tdc
