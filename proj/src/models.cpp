#include "tdc/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <type_traits>

#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/parallel.hpp"
#include "tdc/rng.hpp"

namespace tdc {

namespace {

const std::array<std::string, kNumTargets> kTargetNames = {"elapsed_seconds", "num_clusters", "chi",
                                                           "dbi", "non_clustered"};

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

const std::string& target_name(Target t) { return kTargetNames[static_cast<std::size_t>(t)]; }

std::optional<Target> parse_target(const std::string& name) {
  for (std::size_t i = 0; i < kNumTargets; ++i) {
    if (kTargetNames[i] == name) return kAllTargets[i];
  }
  return std::nullopt;
}

OutcomeVector outcome_vector(const RunOutcome& o) {
  return {o.elapsed_seconds, static_cast<double>(o.num_clusters), o.chi, o.dbi,
          static_cast<double>(o.non_clustered)};
}

const std::vector<std::string>& ga_feature_names() {
  static const std::vector<std::string> names = {"increment",       "p_sub",           "p_del",
                                                 "p_ins",           "mutation_number", "parent_fraction",
                                                 "start_population_factor"};
  return names;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names = ga_feature_names();
  if (kind == SchemaKind::PePlusPs) {
    for (const auto& c : descriptor_length_columns()) names.push_back(c);
    for (const auto& k : vocabulary) names.push_back(ngram_column(k));
  }
  return names;
}

std::size_t FeatureSchema::size() const {
  std::size_t n = ga_feature_names().size();
  if (kind == SchemaKind::PePlusPs) n += descriptor_length_columns().size() + vocabulary.size();
  return n;
}

std::vector<double> FeatureSchema::features(const GAParams& p, const SetDescriptor* d) const {
  std::vector<double> x = {p.increment,
                           p.mutation_probability.substitution,
                           p.mutation_probability.deletion,
                           p.mutation_probability.insertion,
                           static_cast<double>(p.mutation_number),
                           p.parent_fraction,
                           p.start_population_factor};
  if (kind == SchemaKind::PePlusPs) {
    if (!d) throw Error(ErrorKind::SchemaMismatch, "model needs a set descriptor");
    for (double v : descriptor_length_values(*d)) x.push_back(v);
    for (const auto& k : vocabulary) {
      auto it = d->ngram_freqs.find(k);
      x.push_back(it == d->ngram_freqs.end() ? 0.0 : it->second);
    }
  }
  return x;
}

OutcomeVector SurrogateModel::predict(const GAParams& p, const SetDescriptor* d) const {
  auto x = schema.features(p, d);
  OutcomeVector out{};
  for (std::size_t t = 0; t < kNumTargets; ++t) out[t] = forests[t].predict(x);
  return out;
}

TargetData make_target_data(const FeatureSchema& schema, const std::vector<TrainingSample>& samples) {
  TargetData data{FeatureMatrix(schema.size()), {}};
  for (const auto& s : samples) {
    data.X.add_row(schema.features(s.params, &s.descriptor));
    auto y = outcome_vector(s.outcome);
    for (std::size_t t = 0; t < kNumTargets; ++t) data.y[t].push_back(y[t]);
  }
  return data;
}

std::vector<ForestHyperparams> make_hp_grid(const std::vector<int>& n_trees,
                                            const std::vector<int>& max_depth,
                                            const std::vector<int>& min_samples_split,
                                            double feature_fraction, std::uint64_t seed) {
  std::vector<ForestHyperparams> grid;
  for (int t : n_trees) {
    for (int d : max_depth) {
      for (int m : min_samples_split) {
        ForestHyperparams hp{t, d, m, feature_fraction, seed};
        validate(hp);
        grid.push_back(hp);
      }
    }
  }
  if (grid.empty()) throw Error(ErrorKind::InvalidParams, "empty hyperparameter grid");
  return grid;
}

std::vector<ForestHyperparams> default_hp_grid(std::uint64_t seed) {
  return make_hp_grid({50, 100}, {3, 6, 12}, {2, 16, 48}, 1.0 / 3.0, seed);
}

SurrogateModel fit_model(std::string name, const FeatureSchema& schema, const TargetData& data,
                         const ForestHyperparams& hp, unsigned jobs) {
  SurrogateModel m;
  m.name = std::move(name);
  m.schema = schema;
  m.hp = hp;
  for (std::size_t t = 0; t < kNumTargets; ++t) {
    ForestHyperparams per_target = hp;
    per_target.seed = derive_seed(hp.seed, t);
    m.forests[t] = train_forest(data.X, data.y[t], per_target, jobs);
  }
  return m;
}

double validation_score(const SurrogateModel& model, const TargetData& validation) {
  double total = 0;
  int defined = 0;
  for (std::size_t t = 0; t < kNumTargets; ++t) {
    std::vector<double> pred;
    pred.reserve(validation.X.rows());
    for (std::size_t r = 0; r < validation.X.rows(); ++r) pred.push_back(model.forests[t].predict(validation.X.row(r)));
    try {
      total += mape(validation.y[t], pred).value;
      ++defined;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AllTargetsZero) throw;
    }
  }
  return defined ? total / defined : std::numeric_limits<double>::infinity();
}

ForestHyperparams grid_search(const TargetData& train, const TargetData& validation,
                              const std::vector<ForestHyperparams>& hp_grid, unsigned jobs) {
  if (hp_grid.empty()) throw Error(ErrorKind::InvalidParams, "empty hyperparameter grid");
  if (train.X.rows() == 0 || validation.X.rows() == 0) {
    throw Error(ErrorKind::EmptyTraining, "grid search needs non-empty partitions");
  }
  std::vector<double> scores(hp_grid.size());
  parallel_for(hp_grid.size(), jobs, [&](std::size_t i) {
    scores[i] = validation_score(fit_model("search", FeatureSchema{}, train, hp_grid[i]), validation);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < hp_grid.size(); ++i) {
    const auto& a = hp_grid[i];
    const auto& b = hp_grid[best];
    if (std::tie(scores[i], a.n_trees, a.max_depth) < std::tie(scores[best], b.n_trees, b.max_depth)) best = i;
  }
  return hp_grid[best];
}

namespace {

SurrogateModel train_one(const std::string& name, const FeatureSchema& schema,
                         const std::vector<TrainingSample>& samples, const TrainOptions& options) {
  const std::uint64_t seed = derive_seed(options.seed, fnv1a(name));
  auto [fit, validation] = split(samples, SplitSpec{options.search_train_fraction, seed});
  std::vector<ForestHyperparams> grid = options.hp_grid;
  for (auto& hp : grid) hp.seed = seed;

  // grid_search fits through fit_model with an empty schema; only the data
  // layout matters there.
  ForestHyperparams best =
      grid_search(make_target_data(schema, fit), make_target_data(schema, validation), grid, options.jobs);
  return fit_model(name, schema, make_target_data(schema, samples), best, options.jobs);
}

}  // namespace

std::vector<SurrogateModel> train_each(const std::vector<TrainingSample>& samples,
                                       const TrainOptions& options) {
  std::map<std::string, std::vector<TrainingSample>> by_set;
  for (const auto& s : samples) by_set[s.set_name].push_back(s);
  std::vector<SurrogateModel> models;
  for (const auto& [name, rows] : by_set) {
    if (rows.size() < options.min_samples_per_set) {
      if (options.warn) {
        options.warn(std::string(to_string(ErrorKind::TooFewSamples)) + ": set '" + name + "' has " +
                     std::to_string(rows.size()) + " samples, skipped");
      }
      continue;
    }
    SurrogateModel m = train_one(name, FeatureSchema{SchemaKind::PeOnly, {}}, rows, options);
    m.descriptor = rows.front().descriptor;
    models.push_back(std::move(m));
  }
  return models;
}

SurrogateModel train_general(const std::vector<TrainingSample>& samples, const TrainOptions& options) {
  std::set<std::string> sets;
  std::set<std::string> vocab;
  for (const auto& s : samples) {
    sets.insert(s.set_name);
    for (const auto& [k, v] : s.descriptor.ngram_freqs) vocab.insert(k);
  }
  if (sets.size() < 2) {
    throw Error(ErrorKind::TooFewSets, "general model needs samples from at least 2 sets, got " +
                                           std::to_string(sets.size()));
  }
  FeatureSchema schema{SchemaKind::PePlusPs, {vocab.begin(), vocab.end()}};
  return train_one("general", schema, samples, options);
}

OutcomeVector predict_average_ensemble(const std::vector<const SurrogateModel*>& models,
                                       const GAParams& p) {
  if (models.empty()) throw Error(ErrorKind::NoModels, "ensemble has no models");
  std::vector<const SurrogateModel*> ordered = models;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SurrogateModel* a, const SurrogateModel* b) { return a->name < b->name; });
  OutcomeVector sum{};
  for (const auto* m : ordered) {
    auto y = m->predict(p, nullptr);
    for (std::size_t t = 0; t < kNumTargets; ++t) sum[t] += y[t];
  }
  for (double& v : sum) v /= static_cast<double>(ordered.size());
  return sum;
}

DescriptorSpace::DescriptorSpace(const std::vector<SetDescriptor>& training) {
  if (training.empty()) throw Error(ErrorKind::NoModels, "no training descriptors");
  std::set<std::string> vocab;
  for (const auto& d : training) {
    for (const auto& [k, v] : d.ngram_freqs) vocab.insert(k);
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
  const std::size_t dims = descriptor_length_columns().size() + vocabulary_.size();
  mean_.assign(dims, 0.0);
  scale_.assign(dims, 0.0);
  const double n = static_cast<double>(training.size());
  std::vector<std::vector<double>> rows;
  for (const auto& d : training) rows.push_back(raw(d));
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dims; ++j) mean_[j] += r[j] / n;
  }
  for (std::size_t j = 0; j < dims; ++j) {
    double var = 0;
    for (const auto& r : rows) var += (r[j] - mean_[j]) * (r[j] - mean_[j]);
    double sd = std::sqrt(var / n);
    scale_[j] = sd > 0 ? 1.0 / sd : 0.0;
  }
}

std::vector<double> DescriptorSpace::raw(const SetDescriptor& d) const {
  std::vector<double> r = descriptor_length_values(d);
  for (const auto& k : vocabulary_) {
    auto it = d.ngram_freqs.find(k);
    r.push_back(it == d.ngram_freqs.end() ? 0.0 : it->second);
  }
  return r;
}

std::vector<double> DescriptorSpace::embed(const SetDescriptor& d) const {
  std::vector<double> r = raw(d);
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean_[j]) * scale_[j];
  return r;
}

double DescriptorSpace::distance(const SetDescriptor& a, const SetDescriptor& b) const {
  auto x = embed(a), y = embed(b);
  double s = 0;
  for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
  return std::sqrt(s);
}

std::vector<std::size_t> nearest_models(const std::vector<const SurrogateModel*>& models,
                                        const SetDescriptor& target, std::size_t k) {
  if (models.empty()) throw Error(ErrorKind::NoModels, "ensemble has no models");
  if (k < 1 || k > models.size()) {
    throw Error(ErrorKind::InvalidK, "k=" + std::to_string(k) + " outside [1, " +
                                         std::to_string(models.size()) + "]");
  }
  std::vector<SetDescriptor> training;
  for (const auto* m : models) {
    if (!m->descriptor) throw Error(ErrorKind::SchemaMismatch, "model '" + m->name + "' has no set descriptor");
    training.push_back(*m->descriptor);
  }
  DescriptorSpace space(training);
  auto t = space.embed(target);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto e = space.embed(training[i]);
    double s = 0;
    for (std::size_t j = 0; j < e.size(); ++j) s += (e[j] - t[j]) * (e[j] - t[j]);
    dist.emplace_back(s, i);
  }
  std::sort(dist.begin(), dist.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return models[a.second]->name < models[b.second]->name;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
  return out;
}

OutcomeVector predict_knn_ensemble(const std::vector<const SurrogateModel*>& models,
                                   const SetDescriptor& target, std::size_t k, const GAParams& p) {
  std::vector<const SurrogateModel*> chosen;
  for (std::size_t i : nearest_models(models, target, k)) chosen.push_back(models[i]);
  return predict_average_ensemble(chosen, p);
}

ModelPredictor::ModelPredictor(const SurrogateModel& model, std::string family)
    : model_(model), family_(std::move(family)) {}

OutcomeVector ModelPredictor::predict(const GAParams& p, const SetDescriptor* d) const {
  return model_.predict(p, d);
}

AverageEnsemble::AverageEnsemble(std::vector<const SurrogateModel*> models) : models_(std::move(models)) {
  if (models_.empty()) throw Error(ErrorKind::NoModels, "ensemble has no models");
}

OutcomeVector AverageEnsemble::predict(const GAParams& p, const SetDescriptor*) const {
  return predict_average_ensemble(models_, p);
}

KnnEnsemble::KnnEnsemble(std::vector<const SurrogateModel*> models, std::size_t k)
    : models_(std::move(models)), k_(k) {
  if (models_.empty()) throw Error(ErrorKind::NoModels, "ensemble has no models");
  if (k_ < 1 || k_ > models_.size()) throw Error(ErrorKind::InvalidK, "neighbor count out of range");
}

OutcomeVector KnnEnsemble::predict(const GAParams& p, const SetDescriptor* d) const {
  if (!d) throw Error(ErrorKind::SchemaMismatch, "nearest-sets ensemble needs a set descriptor");
  return predict_knn_ensemble(models_, *d, k_, p);
}

std::string corpus_hash(const std::string& csv_text) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(csv_text)));
  return buf;
}

// ---------------------------------------------------------------------------
// Persistence: line-oriented text, doubles as hex floats for exact round trip.

namespace {

constexpr const char* kMagic = "tdc-surrogate-model";
constexpr int kVersion = 1;

void write_descriptor(std::string& out, const std::optional<SetDescriptor>& d) {
  if (!d) {
    out += "descriptor none\n";
    return;
  }
  out += "descriptor " + std::to_string(d->min_len) + " " + std::to_string(d->max_len) + " " +
         hex(d->median_len) + " " + hex(d->stdev_len) + " " + std::to_string(d->outlier_count) + " " +
         std::to_string(d->unique_count) + " " + std::to_string(d->ngram_freqs.size()) + "\n";
  for (const auto& [k, v] : d->ngram_freqs) out += "ngram " + hex(v) + " " + k + "\n";
}

class Reader {
 public:
  explicit Reader(const std::string& text) : lines_(csv::lines(text)) {}

  std::istringstream next(const std::string& keyword) {
    std::string rest = next_raw(keyword);
    return std::istringstream(rest);
  }

  /// Remainder of the next line after "<keyword> ".
  std::string next_raw(const std::string& keyword) {
    if (pos_ >= lines_.size()) fail("unexpected end of file, expected '" + keyword + "'");
    const std::string& line = lines_[pos_++];
    if (line != keyword && line.rfind(keyword + " ", 0) != 0) {
      fail("line " + std::to_string(pos_) + ": expected '" + keyword + "'");
    }
    return line.size() > keyword.size() ? line.substr(keyword.size() + 1) : std::string();
  }

  std::string next_line() {
    if (pos_ >= lines_.size()) fail("unexpected end of file");
    return lines_[pos_++];
  }

  [[noreturn]] static void fail(const std::string& why) { throw Error(ErrorKind::SchemaMismatch, why); }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

template <typename T>
T read(std::istringstream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) Reader::fail(std::string("missing ") + what);
  if constexpr (std::is_same_v<T, double>) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) Reader::fail(std::string("bad number for ") + what);
    return v;
  } else {
    try {
      std::size_t used = 0;
      auto v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return static_cast<T>(v);
    } catch (const std::exception&) {
      Reader::fail(std::string("bad integer for ") + what);
    }
  }
}

std::uint64_t read_u64(std::istringstream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) Reader::fail(std::string("missing ") + what);
  try {
    std::size_t used = 0;
    auto v = std::stoull(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    Reader::fail(std::string("bad integer for ") + what);
  }
}

}  // namespace

std::string serialize(const ModelBundle& bundle) {
  std::string out = std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  out += "family " + bundle.family + "\n";
  out += "corpus_hash " + bundle.corpus_hash + "\n";
  out += "models " + std::to_string(bundle.models.size()) + "\n";
  for (const auto& m : bundle.models) {
    out += "model " + m.name + "\n";
    out += std::string("schema ") + (m.schema.kind == SchemaKind::PeOnly ? "pe_only" : "pe_plus_ps") + " " +
           std::to_string(m.schema.vocabulary.size()) + "\n";
    for (const auto& k : m.schema.vocabulary) out += "vocab " + k + "\n";
    out += "hyperparams " + std::to_string(m.hp.n_trees) + " " + std::to_string(m.hp.max_depth) + " " +
           std::to_string(m.hp.min_samples_split) + " " + hex(m.hp.feature_fraction) + " " +
           std::to_string(m.hp.seed) + "\n";
    write_descriptor(out, m.descriptor);
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      const auto& f = m.forests[t];
      out += "forest " + kTargetNames[t] + " " + std::to_string(f.trees().size()) + "\n";
      out += "importance";
      for (double v : f.raw_importance()) out += " " + hex(v);
      out += "\n";
      for (const auto& tree : f.trees()) {
        out += "tree " + std::to_string(tree.nodes().size()) + "\n";
        for (const auto& n : tree.nodes()) {
          if (n.is_leaf()) {
            out += "L " + hex(n.value) + "\n";
          } else {
            out += "S " + std::to_string(n.feature) + " " + hex(n.threshold) + " " + hex(n.value) + " " +
                   std::to_string(n.right) + "\n";
          }
        }
      }
    }
  }
  out += "end\n";
  return out;
}

ModelBundle deserialize(const std::string& text) {
  Reader r(text);
  {
    auto in = r.next(kMagic);
    int version = read<int>(in, "version");
    if (version != kVersion) Reader::fail("unsupported model file version " + std::to_string(version));
  }
  ModelBundle b;
  b.family = r.next_raw("family");
  b.corpus_hash = r.next_raw("corpus_hash");
  auto models_line = r.next("models");
  auto n_models = read<std::size_t>(models_line, "model count");
  for (std::size_t i = 0; i < n_models; ++i) {
    SurrogateModel m;
    m.name = r.next_raw("model");
    auto schema = r.next("schema");
    std::string kind;
    schema >> kind;
    if (kind == "pe_only") {
      m.schema.kind = SchemaKind::PeOnly;
    } else if (kind == "pe_plus_ps") {
      m.schema.kind = SchemaKind::PePlusPs;
    } else {
      Reader::fail("unknown schema '" + kind + "'");
    }
    auto n_vocab = read<std::size_t>(schema, "vocabulary size");
    for (std::size_t v = 0; v < n_vocab; ++v) m.schema.vocabulary.push_back(r.next_raw("vocab"));

    auto hp = r.next("hyperparams");
    m.hp.n_trees = read<int>(hp, "n_trees");
    m.hp.max_depth = read<int>(hp, "max_depth");
    m.hp.min_samples_split = read<int>(hp, "min_samples_split");
    m.hp.feature_fraction = read<double>(hp, "feature_fraction");
    m.hp.seed = read_u64(hp, "seed");

    std::string desc = r.next_raw("descriptor");
    if (desc != "none") {
      std::istringstream in(desc);
      SetDescriptor d;
      d.min_len = read<int>(in, "min_len");
      d.max_len = read<int>(in, "max_len");
      d.median_len = read<double>(in, "median_len");
      d.stdev_len = read<double>(in, "stdev_len");
      d.outlier_count = read<int>(in, "outlier_count");
      d.unique_count = read<int>(in, "unique_count");
      auto n_ngrams = read<std::size_t>(in, "ngram count");
      for (std::size_t g = 0; g < n_ngrams; ++g) {
        std::string line = r.next_raw("ngram");
        auto space = line.find(' ');
        if (space == std::string::npos) Reader::fail("bad ngram line");
        std::istringstream v(line.substr(0, space));
        d.ngram_freqs[line.substr(space + 1)] = read<double>(v, "ngram frequency");
      }
      m.descriptor = d;
    }

    const std::size_t n_features = m.schema.size();
    for (std::size_t t = 0; t < kNumTargets; ++t) {
      auto head = r.next("forest");
      std::string name;
      head >> name;
      if (name != kTargetNames[t]) Reader::fail("expected forest for '" + kTargetNames[t] + "', found '" + name + "'");
      auto n_trees = read<std::size_t>(head, "tree count");
      auto imp_line = r.next("importance");
      std::vector<double> importance;
      for (std::size_t f = 0; f < n_features; ++f) importance.push_back(read<double>(imp_line, "importance"));
      std::vector<RegressionTree> trees;
      for (std::size_t k = 0; k < n_trees; ++k) {
        auto tree_head = r.next("tree");
        auto n_nodes = read<std::size_t>(tree_head, "node count");
        std::vector<TreeNode> nodes;
        for (std::size_t j = 0; j < n_nodes; ++j) {
          std::string line = r.next_line();
          std::istringstream in(line);
          std::string tag;
          in >> tag;
          TreeNode node;
          if (tag == "L") {
            node.value = read<double>(in, "leaf value");
          } else if (tag == "S") {
            node.feature = read<int>(in, "feature");
            node.threshold = read<double>(in, "threshold");
            node.value = read<double>(in, "node value");
            node.right = read<int>(in, "right child");
            if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features ||
                node.right <= static_cast<int>(j) + 1 || static_cast<std::size_t>(node.right) >= n_nodes) {
              Reader::fail("inconsistent tree node");
            }
          } else {
            Reader::fail("bad tree node '" + line + "'");
          }
          nodes.push_back(node);
        }
        if (nodes.empty()) Reader::fail("empty tree");
        trees.emplace_back(std::move(nodes));
      }
      if (trees.empty()) Reader::fail("empty forest");
      m.forests[t] = RandomForest(std::move(trees), std::move(importance));
    }
    b.models.push_back(std::move(m));
  }
  r.next_raw("end");
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  write_file_atomic(path, serialize(bundle));
}

ModelBundle load_bundle(const std::string& path) { return deserialize(read_file(path)); }

// ---------------------------------------------------------------------------

EvalReport evaluate(const std::string& family, const SamplePredictor& predict,
                    const std::vector<TrainingSample>& train, const std::vector<TrainingSample>& test) {
  EvalReport report;
  report.family = family;
  auto run = [&](const std::vector<TrainingSample>& rows) {
    std::array<std::vector<double>, kNumTargets> truth, pred;
    for (const auto& s : rows) {
      auto y = outcome_vector(s.outcome);
      auto p = predict(s);
      for (std::size_t t = 0; t < kNumTargets; ++t) {
        truth[t].push_back(y[t]);
        pred[t].push_back(p[t]);
      }
    }
    return std::pair{truth, pred};
  };
  auto safe_mape = [](const std::vector<double>& t, const std::vector<double>& p) -> std::optional<MapeResult> {
    if (t.empty()) return std::nullopt;
    try {
      return mape(t, p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AllTargetsZero) throw;
      return std::nullopt;
    }
  };
  auto [train_true, train_pred] = run(train);
  auto [test_true, test_pred] = run(test);
  for (std::size_t t = 0; t < kNumTargets; ++t) {
    TargetEval& e = report.targets[t];
    e.train_mape = safe_mape(train_true[t], train_pred[t]);
    e.test_mape = safe_mape(test_true[t], test_pred[t]);
    const double n = static_cast<double>(test_true[t].size());
    if (n > 0) {
      double mean = 0;
      for (std::size_t i = 0; i < test_true[t].size(); ++i) mean += (test_true[t][i] - test_pred[t][i]) / n;
      double var = 0;
      for (std::size_t i = 0; i < test_true[t].size(); ++i) {
        double r = test_true[t][i] - test_pred[t][i] - mean;
        var += r * r / n;
      }
      e.residual_mean = mean;
      e.residual_stdev = std::sqrt(var);
    }
  }
  return report;
}

std::vector<EvalReport> evaluate_families(const ModelBundle* each, const ModelBundle* general,
                                          const std::vector<TrainingSample>& train,
                                          const std::vector<TrainingSample>& test, std::size_t neighbors) {
  std::vector<EvalReport> reports;
  if (each) {
    std::map<std::string, const SurrogateModel*> by_name;
    for (const auto& m : each->models) by_name[m.name] = &m;
    auto own = [&](const TrainingSample& s) {
      auto it = by_name.find(s.set_name);
      if (it == by_name.end()) throw Error(ErrorKind::NoModels, "no per-set model for '" + s.set_name + "'");
      return it->second;
    };
    reports.push_back(evaluate("each", [&](const TrainingSample& s) { return own(s)->predict(s.params); },
                               train, test));
    if (each->models.size() >= 2) {
      auto others = [&](const std::string& name) {
        std::vector<const SurrogateModel*> v;
        for (const auto& m : each->models) {
          if (m.name != name) v.push_back(&m);
        }
        return v;
      };
      reports.push_back(evaluate(
          "average", [&](const TrainingSample& s) { return predict_average_ensemble(others(s.set_name), s.params); },
          train, test));

      // Neighbor sets depend only on the held-out set; cache them.
      std::map<std::string, std::vector<const SurrogateModel*>> chosen;
      auto knn = [&](const TrainingSample& s) {
        auto it = chosen.find(s.set_name);
        if (it == chosen.end()) {
          auto pool = others(s.set_name);
          std::size_t k = std::min(neighbors, pool.size());
          std::vector<const SurrogateModel*> picked;
          for (std::size_t i : nearest_models(pool, s.descriptor, k)) picked.push_back(pool[i]);
          it = chosen.emplace(s.set_name, std::move(picked)).first;
        }
        return predict_average_ensemble(it->second, s.params);
      };
      reports.push_back(evaluate("knn", knn, train, test));
    }
  }
  if (general) {
    if (general->models.size() != 1) throw Error(ErrorKind::SchemaMismatch, "general bundle must hold one model");
    const SurrogateModel& g = general->models.front();
    reports.push_back(evaluate("general", [&](const TrainingSample& s) { return g.predict(s.params, &s.descriptor); },
                               train, test));
  }
  return reports;
}

std::string format_mape_table(const std::vector<EvalReport>& reports) {
  static const std::array<Target, kNumTargets> order = {Target::Chi, Target::Dbi, Target::ElapsedSeconds,
                                                        Target::NonClustered, Target::NumClusters};
  std::string out = "family";
  for (Target t : order) out += "," + target_name(t);
  out += "\n";
  for (const auto& r : reports) {
    out += r.family;
    for (Target t : order) {
      const auto& m = r.targets[static_cast<std::size_t>(t)].test_mape;
      char buf[32];
      if (m) {
        std::snprintf(buf, sizeof buf, "%.2f", m->value);
      } else {
        std::snprintf(buf, sizeof buf, "n/a");
      }
      out += std::string(",") + buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<std::pair<std::string, double>> feature_importance(const SurrogateModel& model, Target t) {
  auto scores = model.forests[static_cast<std::size_t>(t)].importance();
  auto names = model.schema.feature_names();
  std::vector<std::pair<std::string, double>> out;
  if (std::all_of(scores.begin(), scores.end(), [](double v) { return v == 0.0; })) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.emplace_back(names.at(i), scores[i]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace tdc
