#pragma once

// Clustering of templates under edit distance (k-medoids), CHI / DBI cluster
// validity, choice of the cluster count and the end-to-end TDC pipeline.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tdc/align.hpp"
#include "tdc/evotemplate.hpp"

namespace tdc {

/// CHI value reported when the within-cluster dispersion is zero.
inline constexpr double kChiSentinelMax = 1e6;
/// CHI / DBI recorded for a degenerate run (front too small to cluster).
/// Degenerate runs are also the only runs with num_clusters == 1.
inline constexpr double kChiDegenerate = 0.0;
inline constexpr double kDbiDegenerate = 0.0;

struct Clustering {
  /// Item index of each medoid.
  std::vector<std::size_t> medoids;
  /// Cluster index of each item.
  std::vector<std::size_t> assignment;

  std::size_t k() const noexcept { return medoids.size(); }
};

/// Sum of distances from every item to its cluster's medoid.
std::size_t within_distance(const std::vector<Template>& items, const Clustering& c);

struct KMedoidsTrace {
  std::vector<std::size_t> within_per_round;
};

/// Voronoi-iteration k-medoids under Levenshtein distance with k-means++ style
/// seeding. Medoids are pairwise distinct templates. Errors: InvalidK.
Clustering kmedoids(const std::vector<Template>& items, std::size_t k, std::uint64_t seed,
                    KMedoidsTrace* trace = nullptr);

/// Index of the item minimizing summed distance to all items (lowest index on
/// ties).
std::size_t one_medoid(const std::vector<Template>& items);

/// Calinski-Harabasz ratio with medoids in place of centroids and squared edit
/// distance. Errors: DegenerateClustering when k < 2 or n <= k.
double chi(const std::vector<Template>& items, const Clustering& c);

/// Davies-Bouldin index with medoids and plain edit distance.
/// Errors: DegenerateClustering (k < 2), CoincidentMedoids.
double dbi(const std::vector<Template>& items, const Clustering& c);

struct KScore {
  std::size_t k = 0;
  double chi = 0;
  double dbi = 0;
};

struct KSelection {
  std::size_t kbest = 0;
  std::vector<KScore> table;
  Clustering clustering;  // at kbest
};

/// First local maximum of CHI over the (ascending) k range; falls back to
/// the DBI argmin. Errors: InvalidKRange.
std::size_t pick_k(const std::vector<KScore>& table);

KSelection select_k(const std::vector<Template>& items, const std::vector<std::size_t>& krange,
                    std::uint64_t seed);

struct SequenceAssignment {
  std::vector<std::vector<std::size_t>> clusters;  // sequence indices per representative
  std::vector<std::size_t> non_clustered;
};

/// Each sequence joins the nearest representative it fits (lower index on
/// ties); sequences fitting none are reported as non-clustered.
SequenceAssignment assign_sequences(const SequenceSet& set,
                                    const std::vector<Template>& representatives);

struct RunOutcome {
  double elapsed_seconds = 0;
  int num_clusters = 1;
  double chi = kChiDegenerate;
  double dbi = kDbiDegenerate;
  int non_clustered = 0;

  bool operator==(const RunOutcome&) const = default;
};

struct KRange {
  std::size_t lo = 2;
  std::size_t hi = 6;

  std::vector<std::size_t> values() const;
};

/// Parses "lo:hi" (inclusive) or a single "k".
KRange parse_krange(const std::string& text);

struct TdcResult {
  RunOutcome outcome;
  GAResult ga;
  std::vector<Template> representatives;
  SequenceAssignment assignment;
  std::vector<KScore> k_table;
  bool degenerate = false;
  std::string degenerate_reason;
};

/// GA -> choice of k over the front -> k-medoids -> assignment of the input
/// sequences. A front with fewer distinct templates than krange.lo yields a
/// degenerate outcome (num_clusters = 1, sentinel metrics) instead of an error.
TdcResult run_tdc(const SequenceSet& set, const GAParams& params, const KRange& krange,
                  const StoppingConfig& stop, std::uint64_t seed);

/// Transition graph of every cluster of a run, one digraph per representative.
std::string cluster_graphs_dot(const SequenceSet& set, const TdcResult& result);
/// {"clusters":[{"representative":[...],"size":n,"edges":[{"from","to","count"}]}],
///  "non_clustered":[...]} with sequence indices.
std::string cluster_graphs_json(const SequenceSet& set, const TdcResult& result);

/// The five GA parameter fields as CSV (mutation probabilities joined by ';').
std::string ga_params_csv_header();
std::string ga_params_csv(const GAParams& p);
std::string format_mutation_probs(const MutationProbs& m);
MutationProbs parse_mutation_probs(const std::string& text);

/// Header and row: five GA parameter fields, then the five outcome fields.
std::string run_outcome_csv_header();
std::string run_outcome_csv(const GAParams& p, const RunOutcome& o);

}  // namespace tdc
