#pragma once

// Sequences of states, sequence sets, set descriptors and the synthetic set
// generator.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tdc {

using StateId = std::uint16_t;

/// A sequence of states, stored as ids into an Alphabet.
using Sequence = std::vector<StateId>;
using SequenceView = std::span<const StateId>;

inline constexpr std::size_t kDefaultMaxSequenceLength = 64;

/// Interning table for state tokens. Ids are assigned in first-seen order.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(const std::vector<std::string>& tokens);

  /// Returns the id of `token`, adding it if new. Throws InvalidArgument for
  /// empty tokens or tokens containing commas or whitespace.
  StateId intern(std::string_view token);
  std::optional<StateId> find(std::string_view token) const;
  const std::string& name(StateId id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  static bool valid_token(std::string_view token);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, StateId> index_;
};

struct SequenceSet {
  std::string name;
  Alphabet alphabet;
  std::vector<Sequence> sequences;

  std::size_t size() const noexcept { return sequences.size(); }
  std::size_t max_length() const;
  std::vector<std::string> names_of(SequenceView seq) const;
};

/// Parses one sequence per non-empty line; tokens separated by commas and/or
/// whitespace. Errors: EmptyFile, MalformedLine (with 1-based line number).
SequenceSet parse_sequence_file(std::string_view text, std::string name = "set",
                                std::size_t max_length = kDefaultMaxSequenceLength);

/// Inverse of parse_sequence_file (comma separated, trailing newline).
std::string format_sequence_file(const SequenceSet& set);

/// Descriptor of a sequence set (the set-level regression features).
struct SetDescriptor {
  int min_len = 0;
  int max_len = 0;
  double median_len = 0;
  double stdev_len = 0;  // population formula
  int outlier_count = 0;
  int unique_count = 0;
  /// Key is the n-gram's tokens joined by a single space ("A" or "A B").
  /// Frequencies are relative within each order; absent keys mean 0.
  std::map<std::string, double> ngram_freqs;

  bool operator==(const SetDescriptor&) const = default;
};

/// Names of the fixed (non n-gram) descriptor columns in CSV order.
const std::vector<std::string>& descriptor_length_columns();

/// The fixed columns as numbers, same order as descriptor_length_columns().
std::vector<double> descriptor_length_values(const SetDescriptor& d);

/// CSV column name used for an n-gram key.
std::string ngram_column(const std::string& key);

/// Type-7 quantile (linear interpolation) of an ascending range.
double quantile_sorted(std::span<const double> sorted, double p);

SetDescriptor compute_descriptor(const SequenceSet& set);

/// Header line and value line (no trailing newline on either).
std::pair<std::string, std::string> descriptor_csv(const SetDescriptor& d);

struct GeneratorConfig {
  std::vector<std::vector<std::string>> templates;
  double mutation_probability = 0.0;
  std::size_t set_size = 1;
  std::uint64_t seed = 0;
  /// Extra states available to substitutions/insertions beyond the template
  /// states.
  std::vector<std::string> extra_states;
  std::string name = "generated";
};

/// Generates a set by mutating uniformly-chosen templates position by
/// position. Errors: InvalidArgument, DegenerateResult.
SequenceSet generate_set(const GeneratorConfig& cfg);

struct RandomSetConfig {
  std::vector<std::string> alphabet;
  std::size_t min_length = 1;
  std::size_t max_length = 12;
  std::size_t set_size = 1;
  std::uint64_t seed = 0;
  std::string name = "random";
};

/// Sequences with uniform length and uniform states (the "random set" kind).
SequenceSet generate_random_set(const RandomSetConfig& cfg);

}  // namespace tdc
