#pragma once

// Edit distance, template fit and the per-cluster transition graph.

#include <cstddef>
#include <string>
#include <vector>

#include "tdc/seqcore.hpp"

namespace tdc {

/// A candidate common supersequence over the working alphabet.
using Template = Sequence;

/// Unit-cost insert/delete/substitute distance, O(min(|a|,|b|)) memory.
std::size_t levenshtein(SequenceView a, SequenceView b);

/// True iff `seq` is a (not necessarily contiguous) subsequence of `tpl`.
bool fits(SequenceView seq, SequenceView tpl);

/// Number of sequences of `set` (with multiplicity) that fit `tpl`.
std::size_t aligning_number(const SequenceSet& set, SequenceView tpl);

struct TransitionEdge {
  std::string from;
  std::string to;
  std::size_t count = 0;

  bool operator==(const TransitionEdge&) const = default;
};

/// Counts adjacent state pairs across the cluster. Sorted by descending count,
/// then by (from, to).
std::vector<TransitionEdge> transition_graph(const Alphabet& alphabet,
                                             const std::vector<Sequence>& cluster);

std::string transition_graph_dot(const std::vector<TransitionEdge>& edges,
                                 const std::string& graph_name);

}  // namespace tdc
