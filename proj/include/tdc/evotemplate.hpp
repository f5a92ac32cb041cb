#pragma once

// Multi-objective genetic search for templates: minimize template length,
// maximize the number of input sequences that fit the template.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tdc/align.hpp"
#include "tdc/rng.hpp"
#include "tdc/seqcore.hpp"

namespace tdc {

struct MutationProbs {
  double substitution = 0.1;
  double deletion = 0.1;
  double insertion = 0.1;

  double total() const { return substitution + deletion + insertion; }
  auto operator<=>(const MutationProbs&) const = default;
};

struct GAParams {
  /// Templates may be at most floor(increment * longest input sequence) long.
  double increment = 3.0;
  MutationProbs mutation_probability;
  /// Upper bound of mutations applied to one offspring.
  int mutation_number = 4;
  /// Share of the ranked population used as parents.
  double parent_fraction = 0.3;
  /// Population size = ceil(start_population_factor * |S|).
  double start_population_factor = 1.2;

  bool operator==(const GAParams&) const = default;
};

/// Throws InvalidParams if any bound is violated.
void validate(const GAParams& params);

struct ObjectiveVector {
  std::size_t length = 0;    // minimize
  std::size_t aligning = 0;  // maximize

  bool operator==(const ObjectiveVector&) const = default;
};

struct EvaluatedTemplate {
  Template tpl;
  ObjectiveVector objectives;
};

struct StoppingConfig {
  /// Minimum relative change of the front metric that counts as progress.
  double epsilon = 1e-3;
  int patience = 5;
  int max_generations = 200;
};

void validate(const StoppingConfig& stop);

struct GAResult {
  std::vector<EvaluatedTemplate> front;
  int generations = 0;
  double elapsed_seconds = 0;
  std::uint64_t seed = 0;
  /// Largest aligning number on the front after each generation.
  std::vector<std::size_t> best_aligning_history;
};

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Members not dominated by any other; one representative (the first seen)
/// per distinct objective vector. Input order is preserved.
std::vector<EvaluatedTemplate> pareto_front(const std::vector<EvaluatedTemplate>& evaluated);

/// Sum of Euclidean norms of the front's objective vectors.
double front_change_metric(const std::vector<ObjectiveVector>& front);

std::size_t template_length_cap(const SequenceSet& set, const GAParams& params);
std::size_t population_size(const SequenceSet& set, const GAParams& params);

std::vector<Template> init_population(const SequenceSet& set, const GAParams& params,
                                      std::uint64_t seed);

/// Applies up to params.mutation_number random edits; keeps 1 <= length <= cap.
Template mutate(const Template& tpl, const GAParams& params, std::size_t alphabet_size,
                std::size_t length_cap, Rng& rng);

/// Non-domination rank of each vector (0 = first front).
std::vector<int> nondomination_ranks(const std::vector<ObjectiveVector>& objs);

GAResult run_ga(const SequenceSet& set, const GAParams& params, const StoppingConfig& stop,
                std::uint64_t seed);

}  // namespace tdc
