#pragma once

// Surrogate models over TDC runs: per-set forests, the general forest over
// GA parameters plus set descriptors, average and nearest-sets ensembles,
// hyperparameter grid search, persistence, evaluation and feature importance.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdc/cluster.hpp"
#include "tdc/forest.hpp"
#include "tdc/harness.hpp"

namespace tdc {

enum class Target { ElapsedSeconds = 0, NumClusters, Chi, Dbi, NonClustered };
inline constexpr std::size_t kNumTargets = 5;
inline constexpr std::array<Target, kNumTargets> kAllTargets = {
    Target::ElapsedSeconds, Target::NumClusters, Target::Chi, Target::Dbi, Target::NonClustered};

const std::string& target_name(Target t);
std::optional<Target> parse_target(const std::string& name);

using OutcomeVector = std::array<double, kNumTargets>;
OutcomeVector outcome_vector(const RunOutcome& o);

enum class SchemaKind { PeOnly, PePlusPs };

/// Column layout of the regression inputs. PePlusPs freezes the n-gram
/// vocabulary seen at training time; unseen n-grams read as 0.
struct FeatureSchema {
  SchemaKind kind = SchemaKind::PeOnly;
  std::vector<std::string> vocabulary;

  std::vector<std::string> feature_names() const;
  std::size_t size() const;
  /// Errors: SchemaMismatch when a PePlusPs schema gets no descriptor.
  std::vector<double> features(const GAParams& p, const SetDescriptor* d) const;

  bool operator==(const FeatureSchema&) const = default;
};

/// The seven GA parameter columns (probability triple flattened).
const std::vector<std::string>& ga_feature_names();

/// One forest per target, sharing schema and hyperparameters.
struct SurrogateModel {
  std::string name;
  FeatureSchema schema;
  ForestHyperparams hp;
  std::array<RandomForest, kNumTargets> forests;
  /// Descriptor of the training set (per-set models only); used by the
  /// nearest-sets ensemble.
  std::optional<SetDescriptor> descriptor;

  OutcomeVector predict(const GAParams& p, const SetDescriptor* d = nullptr) const;

  bool operator==(const SurrogateModel&) const = default;
};

struct TargetData {
  FeatureMatrix X;
  std::array<std::vector<double>, kNumTargets> y;
};

TargetData make_target_data(const FeatureSchema& schema, const std::vector<TrainingSample>& samples);

/// Cartesian product of the three tuned hyperparameters.
std::vector<ForestHyperparams> make_hp_grid(const std::vector<int>& n_trees,
                                            const std::vector<int>& max_depth,
                                            const std::vector<int>& min_samples_split,
                                            double feature_fraction, std::uint64_t seed);
std::vector<ForestHyperparams> default_hp_grid(std::uint64_t seed);

/// Mean validation MAPE over the targets for which it is defined.
double validation_score(const SurrogateModel& model, const TargetData& validation);

/// Exhaustive search; lowest mean validation MAPE wins, ties go to fewer
/// trees, then shallower depth, then grid order.
ForestHyperparams grid_search(const TargetData& train, const TargetData& validation,
                              const std::vector<ForestHyperparams>& hp_grid, unsigned jobs = 1);

SurrogateModel fit_model(std::string name, const FeatureSchema& schema, const TargetData& data,
                         const ForestHyperparams& hp, unsigned jobs = 1);

struct TrainOptions {
  std::vector<ForestHyperparams> hp_grid = default_hp_grid(0);
  /// Share of the given samples used for fitting during grid search; the
  /// rest validates. The chosen configuration is refit on all samples.
  double search_train_fraction = 0.7;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::size_t min_samples_per_set = 10;
  std::function<void(const std::string&)> warn;
};

/// One PE-only model per set (sorted by set name). Sets with too few samples
/// are skipped with a warning.
std::vector<SurrogateModel> train_each(const std::vector<TrainingSample>& samples,
                                       const TrainOptions& options);

/// One PE+PS model over all samples. Errors: TooFewSets.
SurrogateModel train_general(const std::vector<TrainingSample>& samples, const TrainOptions& options);

/// Unweighted mean over models (summed in name order).
/// Errors: NoModels.
OutcomeVector predict_average_ensemble(const std::vector<const SurrogateModel*>& models,
                                       const GAParams& p);

/// Standardized descriptor space used to compare sets.
class DescriptorSpace {
 public:
  explicit DescriptorSpace(const std::vector<SetDescriptor>& training);
  std::vector<double> embed(const SetDescriptor& d) const;
  double distance(const SetDescriptor& a, const SetDescriptor& b) const;

 private:
  std::vector<std::string> vocabulary_;
  std::vector<double> mean_;
  std::vector<double> scale_;  // 0 for constant columns
  std::vector<double> raw(const SetDescriptor& d) const;
};

/// Indices of the k models whose training descriptors are closest to
/// `target` (ties by set name). Errors: InvalidK.
std::vector<std::size_t> nearest_models(const std::vector<const SurrogateModel*>& models,
                                        const SetDescriptor& target, std::size_t k);

OutcomeVector predict_knn_ensemble(const std::vector<const SurrogateModel*>& models,
                                   const SetDescriptor& target, std::size_t k, const GAParams& p);

/// Anything that maps GA parameters (and possibly a set descriptor) to the
/// five predicted outcomes.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string family() const = 0;
  virtual bool needs_descriptor() const = 0;
  virtual OutcomeVector predict(const GAParams& p, const SetDescriptor* d) const = 0;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(const SurrogateModel& model, std::string family);
  std::string family() const override { return family_; }
  bool needs_descriptor() const override { return model_.schema.kind == SchemaKind::PePlusPs; }
  OutcomeVector predict(const GAParams& p, const SetDescriptor* d) const override;

 private:
  const SurrogateModel& model_;
  std::string family_;
};

class AverageEnsemble final : public Predictor {
 public:
  explicit AverageEnsemble(std::vector<const SurrogateModel*> models);
  std::string family() const override { return "average"; }
  bool needs_descriptor() const override { return false; }
  OutcomeVector predict(const GAParams& p, const SetDescriptor* d) const override;

 private:
  std::vector<const SurrogateModel*> models_;
};

class KnnEnsemble final : public Predictor {
 public:
  KnnEnsemble(std::vector<const SurrogateModel*> models, std::size_t k);
  std::string family() const override { return "knn"; }
  bool needs_descriptor() const override { return true; }
  OutcomeVector predict(const GAParams& p, const SetDescriptor* d) const override;

 private:
  std::vector<const SurrogateModel*> models_;
  std::size_t k_;
};

inline constexpr std::size_t kDefaultNeighbors = 3;

/// Models plus provenance, as stored on disk.
struct ModelBundle {
  std::string family;  // "each" or "general"
  std::string corpus_hash;
  std::vector<SurrogateModel> models;

  bool operator==(const ModelBundle&) const = default;
};

/// FNV-1a of the training CSV text, hex encoded.
std::string corpus_hash(const std::string& csv_text);

std::string serialize(const ModelBundle& bundle);
/// Errors: SchemaMismatch on a malformed or wrong-version file.
ModelBundle deserialize(const std::string& text);
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

struct TargetEval {
  std::optional<MapeResult> train_mape;  // empty when every true value is 0
  std::optional<MapeResult> test_mape;
  double residual_mean = 0;  // test residuals, true - predicted
  double residual_stdev = 0;
};

struct EvalReport {
  std::string family;
  std::array<TargetEval, kNumTargets> targets;
};

using SamplePredictor = std::function<OutcomeVector(const TrainingSample&)>;

EvalReport evaluate(const std::string& family, const SamplePredictor& predict,
                    const std::vector<TrainingSample>& train, const std::vector<TrainingSample>& test);

/// Reports for the available families. Ensembles predict a set's rows from
/// the other sets' models only.
std::vector<EvalReport> evaluate_families(const ModelBundle* each, const ModelBundle* general,
                                          const std::vector<TrainingSample>& train,
                                          const std::vector<TrainingSample>& test,
                                          std::size_t neighbors = kDefaultNeighbors);

/// Table with one row per family and the test MAPE of each target.
std::string format_mape_table(const std::vector<EvalReport>& reports);

/// (feature, normalized score) in descending order; empty when the forest
/// has no split.
std::vector<std::pair<std::string, double>> feature_importance(const SurrogateModel& model, Target t);

}  // namespace tdc
