#pragma once

// Synthetic training corpora for model-level tests.

#include <string>
#include <vector>

#include "tdc/models.hpp"

namespace fixture {

using namespace tdc;

inline GAParams random_params(Rng& rng) {
  GAParams p;
  p.increment = uniform_real(rng, 1, 8);
  p.mutation_probability = {uniform_real(rng, 0, 0.3), uniform_real(rng, 0, 0.3), uniform_real(rng, 0, 0.3)};
  p.mutation_number = uniform_int(rng, 0, 6);
  p.parent_fraction = uniform_real(rng, 0.05, 0.5);
  p.start_population_factor = uniform_real(rng, 1, 3);
  return p;
}

/// Synthetic corpus: outcomes are smooth functions of the parameters plus a
/// per-set offset, so forests have something to learn.
inline std::vector<TrainingSample> corpus(std::size_t sets, std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingSample> out;
  for (std::size_t s = 0; s < sets; ++s) {
    GeneratorConfig g;
    g.templates = {{"A", "B", "C"}, {"C", "D"}};
    if (s % 2) g.templates.push_back({"E", "F", "A", "B"});
    g.mutation_probability = 0.1 + 0.05 * static_cast<double>(s % 3);
    g.set_size = 20;
    g.seed = seed + s;
    SetDescriptor d = compute_descriptor(generate_set(g));
    for (std::size_t r = 0; r < rows; ++r) {
      TrainingSample t;
      t.set_name = "set" + std::to_string(s);
      t.seed = r;
      t.params = random_params(rng);
      t.descriptor = d;
      const double off = 1.0 + static_cast<double>(s);
      t.outcome.elapsed_seconds = 0.01 * t.params.start_population_factor * t.params.increment * off;
      t.outcome.num_clusters = 2 + t.params.mutation_number / 3;
      t.outcome.chi = 10 * t.params.parent_fraction + off;
      t.outcome.dbi = 0.5 + t.params.mutation_probability.deletion * off;
      t.outcome.non_clustered = static_cast<int>(3 * t.params.increment);
      out.push_back(t);
    }
  }
  return out;
}

inline TrainOptions quick_options() {
  TrainOptions o;
  o.hp_grid = make_hp_grid({8}, {4, 8}, {2}, 1.0 / 3.0, 0);
  o.seed = 3;
  return o;
}

}  // namespace fixture
