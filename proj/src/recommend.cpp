#include "tdc/recommend.hpp"

#include <algorithm>
#include <cstdio>

#include "tdc/csv.hpp"
#include "tdc/error.hpp"

namespace tdc {

Direction default_direction(Target t) {
  return t == Target::Chi ? Direction::Maximize : Direction::Minimize;
}

ObjectiveSpec ObjectiveSpec::defaults() {
  ObjectiveSpec s;
  for (Target t : kAllTargets) s.objectives.push_back({t, default_direction(t)});
  return s;
}

Objective parse_objective(const std::string& text) {
  auto colon = text.find(':');
  std::string name = text.substr(0, colon);
  auto target = parse_target(name);
  if (!target) throw Error(ErrorKind::InvalidObjective, "unknown target '" + name + "'");
  if (colon == std::string::npos) return {*target, default_direction(*target)};
  std::string dir = text.substr(colon + 1);
  if (dir == "min") return {*target, Direction::Minimize};
  if (dir == "max") return {*target, Direction::Maximize};
  throw Error(ErrorKind::InvalidObjective, "unknown direction '" + dir + "' for target '" + name + "'");
}

ObjectiveSpec parse_objectives(const std::string& text) {
  ObjectiveSpec spec;
  for (const auto& item : csv::split(text)) spec.objectives.push_back(parse_objective(item));
  return spec;
}

std::string format_objective(const Objective& o) {
  return target_name(o.target) + (o.direction == Direction::Minimize ? ":min" : ":max");
}

std::unique_ptr<Predictor> make_predictor(const ModelBundle& bundle, const std::string& ensemble,
                                          std::size_t neighbors) {
  if (bundle.models.empty()) throw Error(ErrorKind::NoModels, "model file holds no models");
  if (bundle.family == "general") return std::make_unique<ModelPredictor>(bundle.models.front(), "general");
  std::vector<const SurrogateModel*> ptrs;
  for (const auto& m : bundle.models) ptrs.push_back(&m);
  if (ensemble == "average") return std::make_unique<AverageEnsemble>(ptrs);
  if (ensemble == "knn") {
    if (neighbors == 0) throw Error(ErrorKind::InvalidArgument, "neighbors must be positive");
    return std::make_unique<KnnEnsemble>(ptrs, std::min(neighbors, ptrs.size()));
  }
  throw Error(ErrorKind::InvalidArgument, "unknown ensemble '" + ensemble + "'");
}

std::vector<GAParams> grid_points(const ParamGrid& grid) {
  std::vector<GAParams> points;
  points.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) points.push_back(grid.at(i));
  return points;
}

std::vector<GAParams> default_recommendation_grid() {
  ParamGrid g;
  g.increment = {1, 3, 5, 8};
  g.mutation_probability = {{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}};
  g.mutation_number = {2, 4, 6};
  g.parent_fraction = {0.1, 0.3, 0.5};
  g.start_population_factor = {1.2, 2, 3};
  return grid_points(g);
}

std::vector<GAParams> grid_from_csv(const std::string& text) {
  auto rows = csv::lines(text);
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, "grid file has no header");
  if (rows[0] != ga_params_csv_header()) {
    throw Error(ErrorKind::SchemaMismatch, "grid header must be '" + ga_params_csv_header() + "'");
  }
  std::vector<GAParams> grid;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto f = csv::split(rows[i]);
    if (f.size() != 5) {
      throw Error(ErrorKind::SchemaMismatch, "grid line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    GAParams p;
    p.increment = csv::parse_double(f[0], "increment");
    p.mutation_probability = parse_mutation_probs(f[1]);
    double mn = csv::parse_double(f[2], "mutation_number");
    p.mutation_number = static_cast<int>(mn);
    if (p.mutation_number != mn) throw Error(ErrorKind::InvalidParams, "mutation_number must be an integer");
    p.parent_fraction = csv::parse_double(f[3], "parent_fraction");
    p.start_population_factor = csv::parse_double(f[4], "start_population_factor");
    validate(p);
    grid.push_back(p);
  }
  if (grid.empty()) throw Error(ErrorKind::EmptyFile, "grid file has no rows");
  return grid;
}

std::string grid_to_csv(const std::vector<GAParams>& grid) {
  std::string out = ga_params_csv_header() + "\n";
  for (const auto& p : grid) out += ga_params_csv(p) + "\n";
  return out;
}

std::vector<RecommendationRow> predict_grid(const Predictor& model, const SetDescriptor* descriptor,
                                            const std::vector<GAParams>& grid) {
  if (model.needs_descriptor() && !descriptor) {
    throw Error(ErrorKind::SchemaMismatch, model.family() + " model needs a set descriptor");
  }
  std::vector<RecommendationRow> rows;
  rows.reserve(grid.size());
  for (const auto& p : grid) rows.push_back({p, model.predict(p, descriptor), false});
  return rows;
}

namespace {

void check_spec(const ObjectiveSpec& spec) {
  if (spec.objectives.empty()) throw Error(ErrorKind::InvalidObjective, "at least one objective is required");
}

/// Objective values as "smaller is better".
std::vector<double> costs(const RecommendationRow& row, const ObjectiveSpec& spec) {
  std::vector<double> c;
  for (const auto& o : spec.objectives) {
    double v = row.predicted[static_cast<std::size_t>(o.target)];
    c.push_back(o.direction == Direction::Minimize ? v : -v);
  }
  return c;
}

}  // namespace

void mark_nondominated(std::vector<RecommendationRow>& rows, const ObjectiveSpec& spec) {
  check_spec(spec);
  std::vector<std::vector<double>> c;
  c.reserve(rows.size());
  for (const auto& r : rows) c.push_back(costs(r, spec));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < rows.size() && !dominated; ++j) {
      if (i == j) continue;
      bool no_worse = true, better = false;
      for (std::size_t k = 0; k < c[i].size(); ++k) {
        if (c[j][k] > c[i][k]) no_worse = false;
        if (c[j][k] < c[i][k]) better = true;
      }
      dominated = no_worse && better;
    }
    rows[i].nondominated = !dominated;
  }
}

Recommendation recommend(const SequenceSet& set, const Predictor& model, const std::vector<GAParams>& grid,
                         const ObjectiveSpec& spec, bool show_all) {
  check_spec(spec);
  Recommendation r;
  r.spec = spec;
  r.descriptor = compute_descriptor(set);
  r.rows = predict_grid(model, &r.descriptor, grid);
  mark_nondominated(r.rows, spec);

  const Objective first = spec.objectives.front();
  const auto idx = static_cast<std::size_t>(first.target);
  std::stable_sort(r.rows.begin(), r.rows.end(), [&](const auto& a, const auto& b) {
    return first.direction == Direction::Minimize ? a.predicted[idx] < b.predicted[idx]
                                                  : a.predicted[idx] > b.predicted[idx];
  });

  if (spec.objectives.size() == 2) {
    std::vector<ScatterPoint> pts;
    const auto ix = static_cast<std::size_t>(spec.objectives[0].target);
    const auto iy = static_cast<std::size_t>(spec.objectives[1].target);
    for (const auto& row : r.rows) pts.push_back({row.predicted[ix], row.predicted[iy], row.nondominated});
    r.scatter = std::move(pts);
  }
  if (!show_all) {
    std::erase_if(r.rows, [](const RecommendationRow& row) { return !row.nondominated; });
  }
  return r;
}

Recommendation recommend_text(const std::string& sequence_file, const Predictor& model,
                              const std::vector<GAParams>& grid, const ObjectiveSpec& spec, bool show_all) {
  return recommend(parse_sequence_file(sequence_file, "upload"), model, grid, spec, show_all);
}

const std::vector<std::string>& recommendation_input_columns() {
  static const std::vector<std::string> cols = {"increment", "mutation_probability", "mutation_number",
                                                "parent_fraction", "start_population_factor"};
  return cols;
}

const std::vector<std::string>& recommendation_output_columns() {
  static const std::vector<std::string> cols = {"chi", "dbi", "non_clustered", "num_clusters",
                                                "elapsed_seconds"};
  return cols;
}

namespace {

std::string sig4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string recommendation_csv(const Recommendation& r) {
  std::vector<std::string> header = {"#"};
  for (const auto& c : recommendation_input_columns()) header.push_back(c);
  for (const auto& c : recommendation_output_columns()) header.push_back(c);
  header.push_back("nondominated");
  std::string out = csv::join(header) + "\n";
  std::size_t n = 0;
  for (const auto& row : r.rows) {
    std::vector<std::string> f = {std::to_string(++n)};
    for (const auto& part : csv::split(ga_params_csv(row.params))) f.push_back(part);
    for (const auto& c : recommendation_output_columns()) {
      f.push_back(sig4(row.predicted[static_cast<std::size_t>(*parse_target(c))]));
    }
    f.push_back(row.nondominated ? "1" : "0");
    out += csv::join(f) + "\n";
  }
  return out;
}

std::string scatter_csv(const Recommendation& r) {
  if (!r.scatter) return {};
  std::string out = format_objective(r.spec.objectives[0]) + "," + format_objective(r.spec.objectives[1]) +
                    ",nondominated\n";
  for (const auto& p : *r.scatter) {
    out += csv::format_double(p.x) + "," + csv::format_double(p.y) + "," + (p.nondominated ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace tdc
