#include "tdc/align.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "tdc/error.hpp"

namespace tdc {

std::size_t levenshtein(SequenceView a, SequenceView b) {
  if (a.size() < b.size()) std::swap(a, b);
  // b is the shorter one; row holds distances from a[0..i) to b[0..j).
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

bool fits(SequenceView seq, SequenceView tpl) {
  if (seq.size() > tpl.size()) return false;
  std::size_t i = 0;
  for (std::size_t j = 0; j < tpl.size() && i < seq.size(); ++j) {
    if (tpl[j] == seq[i]) ++i;
  }
  return i == seq.size();
}

std::size_t aligning_number(const SequenceSet& set, SequenceView tpl) {
  return static_cast<std::size_t>(std::count_if(
      set.sequences.begin(), set.sequences.end(), [&](const Sequence& s) { return fits(s, tpl); }));
}

std::vector<TransitionEdge> transition_graph(const Alphabet& alphabet,
                                             const std::vector<Sequence>& cluster) {
  if (cluster.empty()) throw Error(ErrorKind::InvalidArgument, "empty cluster");
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& seq : cluster) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      ++counts[{alphabet.name(seq[i]), alphabet.name(seq[i + 1])}];
    }
  }
  std::vector<TransitionEdge> edges;
  edges.reserve(counts.size());
  for (auto& [key, c] : counts) edges.push_back({key.first, key.second, c});
  // counts is already ordered by (from, to); a stable sort keeps that as the
  // secondary key.
  std::stable_sort(edges.begin(), edges.end(),
                   [](const auto& x, const auto& y) { return x.count > y.count; });
  return edges;
}

std::string transition_graph_dot(const std::vector<TransitionEdge>& edges,
                                 const std::string& graph_name) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::string out = "digraph " + quote(graph_name) + " {\n";
  for (const auto& e : edges) {
    out += "  " + quote(e.from) + " -> " + quote(e.to) + " [label=" + std::to_string(e.count) +
           ", weight=" + std::to_string(e.count) + "];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace tdc
