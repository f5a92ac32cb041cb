// tdc: generate sets, run the miner, sweep parameters, train and query
// surrogate models, serve the HTTP API.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdc/cluster.hpp"
#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/harness.hpp"
#include "tdc/models.hpp"
#include "tdc/recommend.hpp"
#include "tdc/seqcore.hpp"
#include "tdc/service.hpp"

namespace fs = std::filesystem;
using namespace tdc;

namespace {

// Files written by the current command; removed if it fails.
std::vector<std::string> g_outputs;

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  g_outputs.push_back(path);
  write_file_atomic(path, text);
}

std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Range parse_range(const std::string& text, const std::string& flag) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidRange, flag + " expects lo:hi");
  return {csv::parse_double(text.substr(0, colon), flag), csv::parse_double(text.substr(colon + 1), flag)};
}

SequenceSet read_set(const std::string& path) {
  return parse_sequence_file(read_file(path), fs::path(path).stem().string());
}

struct GaFlags {
  double increment = 3.0;
  std::string mutation_prob = "0.1,0.1,0.1";
  int mutation_number = 4;
  double parent_fraction = 0.3;
  double start_pop_factor = 1.2;

  void add(CLI::App* cmd) {
    cmd->add_option("--increment", increment, "template length cap factor")->capture_default_str();
    cmd->add_option("--mutation-prob", mutation_prob, "p_sub,p_del,p_ins (or one value for all)")
        ->capture_default_str();
    cmd->add_option("--mutation-number", mutation_number, "max mutations per offspring")->capture_default_str();
    cmd->add_option("--parent-fraction", parent_fraction)->capture_default_str();
    cmd->add_option("--start-pop-factor", start_pop_factor)->capture_default_str();
  }

  GAParams params() const {
    GAParams p;
    p.increment = increment;
    p.mutation_probability = parse_mutation_probs(mutation_prob);
    p.mutation_number = mutation_number;
    p.parent_fraction = parent_fraction;
    p.start_population_factor = start_pop_factor;
    validate(p);
    return p;
  }
};

struct StopFlags {
  StoppingConfig stop;
  std::string krange = "2:6";

  void add(CLI::App* cmd) {
    cmd->add_option("--krange", krange, "cluster counts tried, lo:hi")->capture_default_str();
    cmd->add_option("--epsilon", stop.epsilon, "relative front change counted as progress")
        ->capture_default_str();
    cmd->add_option("--patience", stop.patience, "generations without progress before stopping")
        ->capture_default_str();
    cmd->add_option("--max-generations", stop.max_generations)->capture_default_str();
  }
};

struct SplitFlags {
  double train_fraction = 0.7;

  void add(CLI::App* cmd) {
    cmd->add_option("--train-fraction", train_fraction,
                    "per-set share of rows used for training; 1 trains on every row")
        ->capture_default_str();
  }

  std::vector<TrainingSample> train_rows(const std::vector<TrainingSample>& all, std::uint64_t seed) const {
    if (train_fraction == 1.0) return all;
    return split_by_set(all, {train_fraction, seed}).first;
  }
};

ModelBundle load_checked(const std::string& path, const std::string& family, const std::string& hash) {
  ModelBundle b = load_bundle(path);
  if (b.family != family) {
    throw Error(ErrorKind::SchemaMismatch, path + " holds a '" + b.family + "' model, expected '" + family + "'");
  }
  if (b.corpus_hash != hash) {
    throw Error(ErrorKind::SchemaMismatch, path + " was trained on a different samples file");
  }
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Template-based clustering of state sequences and surrogate models of its outcomes"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out;
  unsigned jobs = 1;
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "random seed")->required(); };
  auto add_out = [&](CLI::App* cmd) { cmd->add_option("-o,--output", out, "output file (default stdout)"); };
  auto add_jobs = [&](CLI::App* cmd) { cmd->add_option("--jobs", jobs, "worker threads")->capture_default_str(); };

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic sequence file");
  std::vector<std::string> templates;
  double gen_p = 0.1;
  std::size_t set_size = 0;
  std::string extra_states, gen_name = "generated", random_alphabet;
  std::size_t min_len = 1, max_len = 12;
  generate->add_option("--template", templates, "template states, e.g. A,B,C (repeatable)");
  generate->add_option("--mutation-p", gen_p, "per-position mutation probability")->capture_default_str();
  generate->add_option("--size", set_size, "number of sequences")->required();
  generate->add_option("--extra-states", extra_states, "states usable only by mutations");
  generate->add_option("--name", gen_name)->capture_default_str();
  generate->add_option("--random-alphabet", random_alphabet, "uniform random sequences over these states");
  generate->add_option("--min-len", min_len, "random mode only")->capture_default_str();
  generate->add_option("--max-len", max_len, "random mode only")->capture_default_str();
  add_seed(generate);
  add_out(generate);

  // describe
  auto* describe = app.add_subcommand("describe", "descriptor of a sequence file as CSV");
  std::string input;
  describe->add_option("input", input, "sequence file")->required();
  add_out(describe);

  // tdc
  auto* tdc_cmd = app.add_subcommand("tdc", "run the template miner on one set");
  GaFlags ga;
  StopFlags stop;
  std::string graph_path, graph_format;
  tdc_cmd->add_option("input", input, "sequence file")->required();
  ga.add(tdc_cmd);
  stop.add(tdc_cmd);
  tdc_cmd->add_option("--graph", graph_path, "write per-cluster transition graphs here");
  tdc_cmd->add_option("--graph-format", graph_format, "dot or json (default from the file extension)")
      ->check(CLI::IsMember({"dot", "json"}));
  add_seed(tdc_cmd);
  add_out(tdc_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run the miner over a parameter grid");
  std::vector<std::string> inputs;
  std::size_t values_per_param = 3;
  GridRanges ranges;
  std::string r_inc = "1:8", r_prob = "0:0.4", r_num = "0:6", r_par = "0.05:0.5", r_spf = "1:3";
  bool progress = false;
  sweep_cmd->add_option("inputs", inputs, "sequence files (set name = file stem)")->required();
  sweep_cmd->add_option("--values-per-param", values_per_param)->capture_default_str();
  sweep_cmd->add_option("--increment-range", r_inc)->capture_default_str();
  sweep_cmd->add_option("--mutation-prob-range", r_prob)->capture_default_str();
  sweep_cmd->add_option("--mutation-number-range", r_num)->capture_default_str();
  sweep_cmd->add_option("--parent-fraction-range", r_par)->capture_default_str();
  sweep_cmd->add_option("--start-pop-factor-range", r_spf)->capture_default_str();
  sweep_cmd->add_flag("--progress", progress, "report progress on stderr");
  stop.add(sweep_cmd);
  add_jobs(sweep_cmd);
  add_seed(sweep_cmd);
  add_out(sweep_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "fit surrogate models on a samples file");
  std::string samples_path, family;
  std::size_t min_per_set = 10;
  SplitFlags split_flags;
  train_cmd->add_option("--samples", samples_path)->required();
  train_cmd->add_option("--family", family)->required()->check(CLI::IsMember({"each", "general"}));
  train_cmd->add_option("--min-samples-per-set", min_per_set)->capture_default_str();
  split_flags.add(train_cmd);
  add_jobs(train_cmd);
  add_seed(train_cmd);
  train_cmd->add_option("-o,--output", out, "model file")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "test-set MAPE of each model family");
  std::string each_path, general_path;
  std::size_t neighbors = kDefaultNeighbors;
  eval_cmd->add_option("--samples", samples_path)->required();
  eval_cmd->add_option("--each", each_path, "per-set model file");
  eval_cmd->add_option("--general", general_path, "general model file");
  eval_cmd->add_option("--neighbors", neighbors, "sets used by the nearest-sets ensemble")->capture_default_str();
  split_flags.add(eval_cmd);
  add_seed(eval_cmd);
  add_out(eval_cmd);

  // importance
  auto* imp_cmd = app.add_subcommand("importance", "ranked feature importance");
  std::string model_path, target_name_opt, set_name;
  imp_cmd->add_option("--model", model_path)->required();
  imp_cmd->add_option("--target", target_name_opt, "one of the five outcome columns (default all)");
  imp_cmd->add_option("--set", set_name, "restrict a per-set model file to one set");
  add_out(imp_cmd);

  // recommend
  auto* rec_cmd = app.add_subcommand("recommend", "predicted outcomes over a grid with the best rows flagged");
  std::string objectives, grid_path, scatter_path, ensemble = "knn";
  bool show_all = false;
  rec_cmd->add_option("--model", model_path)->required();
  rec_cmd->add_option("input", input, "sequence file")->required();
  rec_cmd->add_option("--objectives", objectives, "e.g. dbi:min,elapsed_seconds:min (default all five)");
  rec_cmd->add_option("--grid", grid_path, "CSV of candidate parameters (default built-in grid)");
  rec_cmd->add_flag("--show-all", show_all, "keep dominated rows too");
  rec_cmd->add_option("--ensemble", ensemble, "for per-set model files")
      ->check(CLI::IsMember({"knn", "average"}))
      ->capture_default_str();
  rec_cmd->add_option("--neighbors", neighbors)->capture_default_str();
  rec_cmd->add_option("--scatter", scatter_path, "scatter CSV (two objectives only)");
  add_out(rec_cmd);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  ServiceConfig scfg;
  scfg.static_dir = TDC_DEFAULT_STATIC_DIR;
  serve_cmd->add_option("--model", model_path, "model file")->envname("TDC_MODEL");
  serve_cmd->add_option("--host", scfg.host)->envname("TDC_HOST")->capture_default_str();
  serve_cmd->add_option("--port", scfg.port)->envname("TDC_PORT")->capture_default_str();
  serve_cmd->add_option("--store-capacity", scfg.store_capacity)->envname("TDC_STORE_CAPACITY")
      ->capture_default_str();
  serve_cmd->add_option("--upload-limit", scfg.upload_limit, "bytes")->envname("TDC_UPLOAD_LIMIT")
      ->capture_default_str();
  serve_cmd->add_option("--static-dir", scfg.static_dir, "assets served at /")->envname("TDC_STATIC_DIR")
      ->capture_default_str();
  serve_cmd->add_option("--ensemble", scfg.ensemble)->check(CLI::IsMember({"knn", "average"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: InvalidArgument: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*generate) {
      SequenceSet set;
      if (!random_alphabet.empty()) {
        RandomSetConfig cfg;
        cfg.alphabet = tokens(random_alphabet);
        cfg.min_length = min_len;
        cfg.max_length = max_len;
        cfg.set_size = set_size;
        cfg.seed = seed;
        cfg.name = gen_name;
        set = generate_random_set(cfg);
      } else {
        if (templates.empty()) throw Error(ErrorKind::InvalidArgument, "give --template or --random-alphabet");
        GeneratorConfig cfg;
        for (const auto& t : templates) cfg.templates.push_back(tokens(t));
        cfg.mutation_probability = gen_p;
        cfg.set_size = set_size;
        cfg.seed = seed;
        cfg.extra_states = tokens(extra_states);
        cfg.name = gen_name;
        set = generate_set(cfg);
      }
      emit(out, format_sequence_file(set));
    } else if (*describe) {
      auto [header, row] = descriptor_csv(compute_descriptor(read_set(input)));
      emit(out, header + "\n" + row + "\n");
    } else if (*tdc_cmd) {
      SequenceSet set = read_set(input);
      TdcResult r = run_tdc(set, ga.params(), parse_krange(stop.krange), stop.stop, seed);
      emit(out, run_outcome_csv_header() + "\n" + run_outcome_csv(ga.params(), r.outcome) + "\n");
      if (!graph_path.empty()) {
        std::string fmt = graph_format;
        if (fmt.empty()) fmt = fs::path(graph_path).extension() == ".json" ? "json" : "dot";
        emit(graph_path, fmt == "json" ? cluster_graphs_json(set, r) : cluster_graphs_dot(set, r));
      }
    } else if (*sweep_cmd) {
      ranges.increment = parse_range(r_inc, "--increment-range");
      ranges.mutation_probability = parse_range(r_prob, "--mutation-prob-range");
      ranges.mutation_number = parse_range(r_num, "--mutation-number-range");
      ranges.parent_fraction = parse_range(r_par, "--parent-fraction-range");
      ranges.start_population_factor = parse_range(r_spf, "--start-pop-factor-range");
      std::vector<SequenceSet> sets;
      for (const auto& path : inputs) sets.push_back(read_set(path));
      ParamGrid grid = build_grid(values_per_param, ranges, seed);
      SweepOptions opts;
      opts.krange = parse_krange(stop.krange);
      opts.stop = stop.stop;
      opts.master_seed = seed;
      opts.jobs = jobs;
      if (progress) {
        opts.progress = [](std::size_t done, std::size_t total) {
          if (done == total || done % 50 == 0) std::cerr << "progress: " << done << "/" << total << "\n";
        };
      }
      emit(out, samples_to_csv(sweep_sets(sets, grid, opts)));
    } else if (*train_cmd) {
      std::string text = read_file(samples_path);
      auto rows = split_flags.train_rows(samples_from_csv(text), seed);
      TrainOptions opts;
      opts.hp_grid = default_hp_grid(seed);
      opts.seed = seed;
      opts.jobs = jobs;
      opts.min_samples_per_set = min_per_set;
      opts.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
      ModelBundle bundle{family, corpus_hash(text), {}};
      if (family == "each") {
        bundle.models = train_each(rows, opts);
      } else {
        bundle.models.push_back(train_general(rows, opts));
      }
      g_outputs.push_back(out);
      save_bundle(bundle, out);
    } else if (*eval_cmd) {
      if (each_path.empty() && general_path.empty()) {
        throw Error(ErrorKind::InvalidArgument, "give --each and/or --general");
      }
      if (split_flags.train_fraction == 1.0) {
        throw Error(ErrorKind::InvalidArgument, "evaluation needs held-out rows; use --train-fraction < 1");
      }
      std::string text = read_file(samples_path);
      std::string hash = corpus_hash(text);
      auto [train, test] = split_by_set(samples_from_csv(text), {split_flags.train_fraction, seed});
      std::optional<ModelBundle> each, general;
      if (!each_path.empty()) each = load_checked(each_path, "each", hash);
      if (!general_path.empty()) general = load_checked(general_path, "general", hash);
      auto reports = evaluate_families(each ? &*each : nullptr, general ? &*general : nullptr, train, test,
                                       neighbors);
      emit(out, format_mape_table(reports));
    } else if (*imp_cmd) {
      ModelBundle bundle = load_bundle(model_path);
      std::vector<Target> targets(kAllTargets.begin(), kAllTargets.end());
      if (!target_name_opt.empty()) {
        auto t = parse_target(target_name_opt);
        if (!t) throw Error(ErrorKind::InvalidArgument, "unknown target '" + target_name_opt + "'");
        targets = {*t};
      }
      std::string text = "model,target,rank,feature,importance\n";
      bool matched = false;
      for (const auto& m : bundle.models) {
        if (!set_name.empty() && m.name != set_name) continue;
        matched = true;
        for (Target t : targets) {
          std::size_t rank = 0;
          for (const auto& [feature, score] : feature_importance(m, t)) {
            text += csv::join({m.name, target_name(t), std::to_string(++rank), feature,
                               csv::format_double(score)}) +
                    "\n";
          }
        }
      }
      if (!matched) throw Error(ErrorKind::InvalidArgument, "no model named '" + set_name + "'");
      emit(out, text);
    } else if (*rec_cmd) {
      ModelBundle bundle = load_bundle(model_path);
      auto predictor = make_predictor(bundle, ensemble, neighbors);
      ObjectiveSpec spec = objectives.empty() ? ObjectiveSpec::defaults() : parse_objectives(objectives);
      auto grid = grid_path.empty() ? default_recommendation_grid() : grid_from_csv(read_file(grid_path));
      Recommendation rec = recommend(read_set(input), *predictor, grid, spec, show_all);
      emit(out, recommendation_csv(rec));
      if (rec.scatter) {
        std::string path = scatter_path;
        if (path.empty() && !out.empty() && out != "-") {
          path = fs::path(out).replace_extension(".scatter.csv").string();
        }
        if (!path.empty()) emit(path, scatter_csv(rec));
      } else if (!scatter_path.empty()) {
        std::cerr << "warning: scatter data needs exactly two objectives; --scatter ignored\n";
      }
    } else if (*serve_cmd) {
      std::optional<ModelBundle> bundle;
      if (!model_path.empty()) bundle = load_bundle(model_path);
      Service service(scfg, std::move(bundle));
      int port = service.bind();
      if (port < 0) throw Error(ErrorKind::IoError, "cannot bind " + scfg.host + ":" + std::to_string(scfg.port));
      std::cerr << "listening on " << scfg.host << ":" << port << "\n";
      if (!service.listen_after_bind()) throw Error(ErrorKind::IoError, "server stopped unexpectedly");
    }
  } catch (const Error& e) {
    for (const auto& path : g_outputs) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    for (const auto& path : g_outputs) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
