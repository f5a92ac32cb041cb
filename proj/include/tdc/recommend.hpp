#pragma once

// Predicted outcomes over a candidate GA parameter grid for a new set, with
// the non-dominated configurations flagged under chosen objectives.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tdc/harness.hpp"
#include "tdc/models.hpp"

namespace tdc {

enum class Direction { Minimize, Maximize };

struct Objective {
  Target target;
  Direction direction;

  bool operator==(const Objective&) const = default;
};

Direction default_direction(Target t);

struct ObjectiveSpec {
  std::vector<Objective> objectives;

  /// chi maximized; the other four minimized.
  static ObjectiveSpec defaults();
};

/// "name" or "name:min" / "name:max". Errors: InvalidObjective naming the
/// offending field.
Objective parse_objective(const std::string& text);
/// Comma separated list of parse_objective items.
ObjectiveSpec parse_objectives(const std::string& text);
std::string format_objective(const Objective& o);

/// General bundles predict with their single model; "each" bundles with the
/// named ensemble ("knn" or "average"). The bundle must outlive the result.
/// Errors: NoModels, InvalidArgument.
std::unique_ptr<Predictor> make_predictor(const ModelBundle& bundle, const std::string& ensemble = "knn",
                                          std::size_t neighbors = kDefaultNeighbors);

struct RecommendationRow {
  GAParams params;
  OutcomeVector predicted{};
  bool nondominated = false;
};

std::vector<GAParams> grid_points(const ParamGrid& grid);
/// Fixed candidate grid used when none is supplied (324 points).
std::vector<GAParams> default_recommendation_grid();
/// Header ga_params_csv_header() then one GAParams per row. Errors:
/// SchemaMismatch, InvalidParams.
std::vector<GAParams> grid_from_csv(const std::string& text);
std::string grid_to_csv(const std::vector<GAParams>& grid);

/// One row per grid point, flags unset. Errors: SchemaMismatch when the
/// predictor needs a descriptor and none is given.
std::vector<RecommendationRow> predict_grid(const Predictor& model, const SetDescriptor* descriptor,
                                            const std::vector<GAParams>& grid);

/// A row is flagged unless another row is at least as good on every objective
/// and strictly better on one. Rows with equal objective tuples share a flag.
void mark_nondominated(std::vector<RecommendationRow>& rows, const ObjectiveSpec& spec);

struct ScatterPoint {
  double x = 0;
  double y = 0;
  bool nondominated = false;
};

struct Recommendation {
  SetDescriptor descriptor;
  ObjectiveSpec spec;
  std::vector<RecommendationRow> rows;
  /// Present iff exactly two objectives are selected.
  std::optional<std::vector<ScatterPoint>> scatter;
};

/// descriptor -> predict_grid -> mark_nondominated -> sort by the first
/// objective (best first); show_all == false keeps flagged rows only.
Recommendation recommend(const SequenceSet& set, const Predictor& model, const std::vector<GAParams>& grid,
                         const ObjectiveSpec& spec, bool show_all);

/// Parses the sequence file text first.
Recommendation recommend_text(const std::string& sequence_file, const Predictor& model,
                              const std::vector<GAParams>& grid, const ObjectiveSpec& spec, bool show_all);

/// Input columns then output columns, in the prototype table's order.
const std::vector<std::string>& recommendation_input_columns();
const std::vector<std::string>& recommendation_output_columns();

/// "#", the 5 input and 5 output columns, then "nondominated".
std::string recommendation_csv(const Recommendation& r);
std::string scatter_csv(const Recommendation& r);

}  // namespace tdc
