#include "tdc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/parallel.hpp"
#include "tdc/rng.hpp"

namespace tdc {

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

void check_range(const Range& r, const std::string& name, double min_lo, bool lo_exclusive,
                 double max_hi) {
  bool ok = std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi &&
            (lo_exclusive ? r.lo > min_lo : r.lo >= min_lo) && r.hi <= max_hi;
  if (!ok) {
    throw Error(ErrorKind::InvalidRange, name + " range [" + csv::format_double(r.lo) + ", " +
                                             csv::format_double(r.hi) + "] is invalid");
  }
}

/// Draws distinct values with `draw` until `count` are collected.
template <typename T, typename Draw>
std::vector<T> distinct_values(std::size_t count, const std::string& name, Draw draw) {
  std::set<T> values;
  std::size_t attempts = 0;
  const std::size_t limit = 1000 * count + 1000;
  while (values.size() < count) {
    if (++attempts > limit) {
      throw Error(ErrorKind::InvalidRange,
                  name + " range cannot supply " + std::to_string(count) + " distinct values");
    }
    if (auto v = draw()) values.insert(*v);
  }
  return {values.begin(), values.end()};
}

}  // namespace

std::size_t ParamGrid::size() const {
  return increment.size() * mutation_probability.size() * mutation_number.size() *
         parent_fraction.size() * start_population_factor.size();
}

GAParams ParamGrid::at(std::size_t index) const {
  if (index >= size()) throw Error(ErrorKind::InvalidArgument, "grid index out of range");
  GAParams p;
  p.start_population_factor = start_population_factor[index % start_population_factor.size()];
  index /= start_population_factor.size();
  p.parent_fraction = parent_fraction[index % parent_fraction.size()];
  index /= parent_fraction.size();
  p.mutation_number = mutation_number[index % mutation_number.size()];
  index /= mutation_number.size();
  p.mutation_probability = mutation_probability[index % mutation_probability.size()];
  index /= mutation_probability.size();
  p.increment = increment[index];
  return p;
}

ParamGrid build_grid(std::size_t values_per_param, const GridRanges& ranges, std::uint64_t seed) {
  if (values_per_param < 1) throw Error(ErrorKind::InvalidRange, "values per parameter must be >= 1");
  check_range(ranges.increment, "increment", 1.0, false, 1e6);
  check_range(ranges.mutation_probability, "mutation_probability", 0.0, false, 1.0);
  check_range(ranges.mutation_number, "mutation_number", 0.0, false, 1e6);
  check_range(ranges.parent_fraction, "parent_fraction", 0.0, true, 1.0);
  check_range(ranges.start_population_factor, "start_population_factor", 0.0, true, 1e6);

  auto real_dim = [&](const Range& r, const std::string& name, std::uint64_t stream) {
    Rng rng(derive_seed(seed, stream));
    return distinct_values<double>(values_per_param, name, [&]() -> std::optional<double> {
      double v = round2(uniform_real(rng, r.lo, r.hi));
      if (v < r.lo || v > r.hi) return std::nullopt;
      return v;
    });
  };

  ParamGrid g;
  g.increment = real_dim(ranges.increment, "increment", 0);
  {
    Rng rng(derive_seed(seed, 1));
    const Range& r = ranges.mutation_probability;
    g.mutation_probability = distinct_values<MutationProbs>(
        values_per_param, "mutation_probability", [&]() -> std::optional<MutationProbs> {
          double c[3];
          for (double& x : c) {
            x = round2(uniform_real(rng, r.lo, r.hi));
            if (x < r.lo || x > r.hi) return std::nullopt;
          }
          double sum = c[0] + c[1] + c[2];
          if (sum > 1.0) {
            for (double& x : c) x = std::floor(x / sum * 100.0) / 100.0;
          }
          return MutationProbs{c[0], c[1], c[2]};
        });
  }
  {
    Rng rng(derive_seed(seed, 2));
    int lo = static_cast<int>(std::ceil(ranges.mutation_number.lo));
    int hi = static_cast<int>(std::floor(ranges.mutation_number.hi));
    if (hi < lo || static_cast<std::size_t>(hi - lo + 1) < values_per_param) {
      throw Error(ErrorKind::InvalidRange, "mutation_number range cannot supply " +
                                               std::to_string(values_per_param) + " distinct integers");
    }
    g.mutation_number = distinct_values<int>(values_per_param, "mutation_number",
                                             [&]() -> std::optional<int> { return uniform_int(rng, lo, hi); });
  }
  g.parent_fraction = real_dim(ranges.parent_fraction, "parent_fraction", 3);
  g.start_population_factor = real_dim(ranges.start_population_factor, "start_population_factor", 4);
  return g;
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, index);
}

std::vector<TrainingSample> sweep(const SequenceSet& set, const ParamGrid& grid,
                                  const SweepOptions& options) {
  const std::size_t n = grid.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty parameter grid");
  const SetDescriptor descriptor = compute_descriptor(set);
  std::vector<TrainingSample> samples(n);
  std::mutex progress_mutex;
  std::size_t done = 0;

  parallel_for(n, options.jobs, [&](std::size_t i) {
    TrainingSample& s = samples[i];
    s.set_name = set.name;
    s.seed = run_seed(options.master_seed, i);
    s.params = grid.at(i);
    s.descriptor = descriptor;
    try {
      s.outcome = run_tdc(set, s.params, options.krange, options.stop, s.seed).outcome;
    } catch (const Error&) {
      // Recorded as a degenerate sample; a sweep never aborts on one run.
      s.outcome = RunOutcome{};
      s.outcome.non_clustered = static_cast<int>(set.size());
    }
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(++done, n);
    }
  });
  return samples;
}

std::vector<TrainingSample> sweep_sets(const std::vector<SequenceSet>& sets, const ParamGrid& grid,
                                       const SweepOptions& options) {
  std::set<std::string> names;
  std::vector<TrainingSample> all;
  for (const auto& set : sets) {
    if (!names.insert(set.name).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate set name '" + set.name + "'");
    }
    SweepOptions o = options;
    o.master_seed = derive_seed(options.master_seed, fnv1a(set.name));
    auto part = sweep(set, grid, o);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split(
    const std::vector<TrainingSample>& samples, const SplitSpec& spec) {
  if (samples.size() < 2) throw Error(ErrorKind::TooFewSamples, "split needs at least 2 samples");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train fraction must be in (0,1)");
  }
  const std::size_t n = samples.size();
  auto n_train = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  // Fisher-Yates with our own index draw so the permutation does not depend on
  // the standard library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
  }
  return out;
}

std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split_by_set(
    const std::vector<TrainingSample>& samples, const SplitSpec& spec) {
  std::vector<std::string> names;
  std::map<std::string, std::vector<TrainingSample>> by_set;
  for (const auto& s : samples) {
    auto& bucket = by_set[s.set_name];
    if (bucket.empty()) names.push_back(s.set_name);
    bucket.push_back(s);
  }
  std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> out;
  for (const auto& name : names) {
    auto part = split(by_set[name], SplitSpec{spec.train_fraction, derive_seed(spec.seed, fnv1a(name))});
    out.first.insert(out.first.end(), part.first.begin(), part.first.end());
    out.second.insert(out.second.end(), part.second.begin(), part.second.end());
  }
  return out;
}

std::vector<std::string> sample_fixed_columns() {
  std::vector<std::string> cols = {"set_name", "seed",           "increment",       "p_sub",
                                   "p_del",    "p_ins",          "mutation_number", "parent_fraction",
                                   "start_population_factor"};
  for (const auto& c : descriptor_length_columns()) cols.push_back(c);
  return cols;
}

const std::vector<std::string>& outcome_columns() {
  static const std::vector<std::string> cols = {"elapsed_seconds", "num_clusters", "chi", "dbi",
                                                "non_clustered"};
  return cols;
}

std::string samples_to_csv(const std::vector<TrainingSample>& samples) {
  std::set<std::string> vocab;
  for (const auto& s : samples) {
    for (const auto& [k, v] : s.descriptor.ngram_freqs) vocab.insert(k);
  }
  std::vector<std::string> header = sample_fixed_columns();
  for (const auto& k : vocab) header.push_back(ngram_column(k));
  for (const auto& c : outcome_columns()) header.push_back(c);

  std::string out = csv::join(header) + "\n";
  auto f = [](double v) { return csv::format_double(v); };
  for (const auto& s : samples) {
    if (!Alphabet::valid_token(s.set_name)) {
      throw Error(ErrorKind::InvalidArgument, "set name '" + s.set_name + "' is not CSV-safe");
    }
    const auto& p = s.params;
    std::vector<std::string> row = {s.set_name,
                                    std::to_string(s.seed),
                                    f(p.increment),
                                    f(p.mutation_probability.substitution),
                                    f(p.mutation_probability.deletion),
                                    f(p.mutation_probability.insertion),
                                    std::to_string(p.mutation_number),
                                    f(p.parent_fraction),
                                    f(p.start_population_factor)};
    for (double v : descriptor_length_values(s.descriptor)) row.push_back(f(v));
    for (const auto& k : vocab) {
      auto it = s.descriptor.ngram_freqs.find(k);
      row.push_back(f(it == s.descriptor.ngram_freqs.end() ? 0.0 : it->second));
    }
    const auto& o = s.outcome;
    row.push_back(f(o.elapsed_seconds));
    row.push_back(std::to_string(o.num_clusters));
    row.push_back(f(o.chi));
    row.push_back(f(o.dbi));
    row.push_back(std::to_string(o.non_clustered));
    out += csv::join(row) + "\n";
  }
  return out;
}

std::vector<TrainingSample> samples_from_csv(const std::string& text) {
  auto rows = csv::lines(text);
  if (rows.empty()) throw Error(ErrorKind::SchemaMismatch, "missing header");
  auto header = csv::split(rows[0]);

  const auto fixed = sample_fixed_columns();
  const auto& outs = outcome_columns();
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (i >= header.size()) throw Error(ErrorKind::SchemaMismatch, "missing column '" + fixed[i] + "'");
    if (header[i] != fixed[i]) {
      throw Error(ErrorKind::SchemaMismatch,
                  "unexpected column '" + header[i] + "' (expected '" + fixed[i] + "')");
    }
  }
  std::vector<std::string> ngram_keys;
  std::size_t col = fixed.size();
  for (; col < header.size() && header[col].rfind("ng:", 0) == 0; ++col) {
    ngram_keys.push_back(header[col].substr(3));
  }
  for (std::size_t j = 0; j < outs.size(); ++j, ++col) {
    if (col >= header.size()) throw Error(ErrorKind::SchemaMismatch, "missing column '" + outs[j] + "'");
    if (header[col] != outs[j]) {
      throw Error(ErrorKind::SchemaMismatch, "unknown column '" + header[col] + "'");
    }
  }
  if (col < header.size()) throw Error(ErrorKind::SchemaMismatch, "unknown column '" + header[col] + "'");

  std::vector<TrainingSample> samples;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    auto f = csv::split(rows[r]);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::SchemaMismatch, "row " + std::to_string(r + 1) + " has " +
                                                 std::to_string(f.size()) + " fields, expected " +
                                                 std::to_string(header.size()));
    }
    auto num = [&](std::size_t i) { return csv::parse_double(f[i], header[i]); };
    auto integer = [&](std::size_t i) {
      double v = num(i);
      if (v != std::floor(v)) throw Error(ErrorKind::SchemaMismatch, "column '" + header[i] + "' must be an integer");
      return static_cast<int>(v);
    };
    TrainingSample s;
    s.set_name = f[0];
    try {
      std::size_t used = 0;
      s.seed = std::stoull(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorKind::SchemaMismatch, "column 'seed': bad integer '" + f[1] + "'");
    }
    s.params.increment = num(2);
    s.params.mutation_probability = {num(3), num(4), num(5)};
    s.params.mutation_number = integer(6);
    s.params.parent_fraction = num(7);
    s.params.start_population_factor = num(8);
    s.descriptor.min_len = integer(9);
    s.descriptor.max_len = integer(10);
    s.descriptor.median_len = num(11);
    s.descriptor.stdev_len = num(12);
    s.descriptor.outlier_count = integer(13);
    s.descriptor.unique_count = integer(14);
    for (std::size_t k = 0; k < ngram_keys.size(); ++k) {
      double v = num(fixed.size() + k);
      if (v != 0.0) s.descriptor.ngram_freqs[ngram_keys[k]] = v;
    }
    std::size_t o = fixed.size() + ngram_keys.size();
    s.outcome.elapsed_seconds = num(o);
    s.outcome.num_clusters = integer(o + 1);
    s.outcome.chi = num(o + 2);
    s.outcome.dbi = num(o + 3);
    s.outcome.non_clustered = integer(o + 4);
    samples.push_back(std::move(s));
  }
  return samples;
}

void persist(const std::vector<TrainingSample>& samples, const std::string& path) {
  write_file_atomic(path, samples_to_csv(samples));
}

std::vector<TrainingSample> load(const std::string& path) { return samples_from_csv(read_file(path)); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    out << contents;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw Error(ErrorKind::IoError, "write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw Error(ErrorKind::IoError, "cannot move output into place at '" + path + "': " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tdc
