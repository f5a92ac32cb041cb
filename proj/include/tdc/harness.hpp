#pragma once

// Parameter grids, sweeps of TDC runs over a sequence set, the training-sample
// CSV and train/test splitting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tdc/cluster.hpp"
#include "tdc/seqcore.hpp"

namespace tdc {

struct ParamGrid {
  std::vector<double> increment;
  std::vector<MutationProbs> mutation_probability;
  std::vector<int> mutation_number;
  std::vector<double> parent_fraction;
  std::vector<double> start_population_factor;

  std::size_t size() const;
  /// Point `index` of the Cartesian product in lexicographic order
  /// (increment most significant).
  GAParams at(std::size_t index) const;
};

struct Range {
  double lo = 0;
  double hi = 0;
};

struct GridRanges {
  Range increment{1.0, 8.0};
  Range mutation_probability{0.0, 0.4};  // per component
  Range mutation_number{0, 6};           // integers
  Range parent_fraction{0.05, 0.5};
  Range start_population_factor{1.0, 3.0};
};

/// Draws `values_per_param` distinct values per dimension (rounded to two
/// decimals, ascending). Errors: InvalidRange.
ParamGrid build_grid(std::size_t values_per_param, const GridRanges& ranges, std::uint64_t seed);

/// One row of the surrogate training corpus.
struct TrainingSample {
  std::string set_name;
  std::uint64_t seed = 0;
  GAParams params;
  SetDescriptor descriptor;
  RunOutcome outcome;

  bool operator==(const TrainingSample&) const = default;
};

struct SweepOptions {
  KRange krange;
  StoppingConfig stop;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;
  /// Called after each completed run with (completed, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Seed used for grid point `index` of a sweep.
std::uint64_t run_seed(std::uint64_t master_seed, std::size_t index);

/// One run_tdc per grid point; samples are returned in grid order.
std::vector<TrainingSample> sweep(const SequenceSet& set, const ParamGrid& grid,
                                  const SweepOptions& options);

/// sweep() over several sets; set `name` uses master seed
/// derive_seed(options.master_seed, fnv1a(name)). Set names must be unique.
std::vector<TrainingSample> sweep_sets(const std::vector<SequenceSet>& sets, const ParamGrid& grid,
                                       const SweepOptions& options);

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

/// Seeded shuffle; the first ceil(fraction * n) rows go to train (clamped so
/// both parts are non-empty). Errors: TooFewSamples, InvalidArgument.
std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split(
    const std::vector<TrainingSample>& samples, const SplitSpec& spec);

/// split() applied to each set separately (sets in order of first
/// appearance), concatenated.
std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split_by_set(
    const std::vector<TrainingSample>& samples, const SplitSpec& spec);

/// Fixed CSV columns preceding the n-gram columns.
std::vector<std::string> sample_fixed_columns();
/// Target columns, in RunOutcome field order.
const std::vector<std::string>& outcome_columns();

std::string samples_to_csv(const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> samples_from_csv(const std::string& text);

void persist(const std::vector<TrainingSample>& samples, const std::string& path);
std::vector<TrainingSample> load(const std::string& path);

/// Writes `contents` to `path` through a temporary file so a failure never
/// leaves a partial file behind. Errors: IoError.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace tdc
