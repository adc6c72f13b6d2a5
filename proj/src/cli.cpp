#include "mlem/cli.hpp"

#include "mlem/importance.hpp"
#include "mlem/io.hpp"
#include "mlem/pair_sampler.hpp"
#include "mlem/serialize.hpp"
#include "mlem/synth.hpp"
#include "mlem/trainer.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace mlem {

namespace fs = std::filesystem;

namespace {

Index require_m(const Json& j) {
  if (!j.contains("m")) throw InputError("ground truth file lacks 'm'");
  return j.at("m").get<Index>();
}

int default_threads() {
  if (const char* env = std::getenv("MLEM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

Json mean_std(std::span<const double> xs) {
  Json j;
  j["mean"] = mean_of(xs);
  j["std"] = population_std(xs);
  j["count"] = xs.size();
  return j;
}

/// Flags shared by fit and univariate.
struct TrainingFlags {
  std::string features;
  std::string reps;
  std::string variant = "mlem";
  std::string batch_size = "4096";
  double softrank_eps = 1.0;
  double learning_rate = 0.1;
  int patience = 50;
  int max_steps = 1000;
  std::int64_t eval_cap = 200000;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::string out;
  int threads = default_threads();

  void add_to(CLI::App& app) {
    app.add_option("--features", features, "feature CSV")->required();
    app.add_option("--reps", reps, "representation matrix (MLEMREPR binary or CSV)")->required();
    app.add_option("--variant", variant, "mlem or frrsai")
        ->check(CLI::IsMember({"mlem", "frrsai"}));
    app.add_option("--batch-size", batch_size, "'auto' or a positive integer");
    app.add_option("--softrank-eps", softrank_eps, "soft-rank regularization strength");
    app.add_option("--lr", learning_rate, "learning rate");
    app.add_option("--patience", patience, "early-stopping patience (steps)");
    app.add_option("--max-steps", max_steps, "maximum optimizer steps");
    app.add_option("--eval-cap", eval_cap, "max held-out pairs scored");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--train-fraction", train_fraction, "holdout training fraction");
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--threads", threads, "worker threads (default $MLEM_THREADS or 1)");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.learning_rate = learning_rate;
    c.patience = patience;
    c.max_steps = max_steps;
    c.softrank.regularization = softrank_eps;
    c.eval_cap = eval_cap;
    c.seed = seed;
    return c;
  }
};

struct LoadedData {
  FeatureTable table;
  RepresentationSet reps;
};

LoadedData load_data(const std::string& features, const std::string& reps_path) {
  FeatureTable table = load_feature_table(features);
  RepresentationSet reps = load_representations(reps_path);
  if (table.num_stimuli() != reps.num_stimuli()) {
    throw InputError("feature table has " + std::to_string(table.num_stimuli()) +
                     " stimuli but representations have " + std::to_string(reps.num_stimuli()));
  }
  return {std::move(table), std::move(reps)};
}

/// Resolves --batch-size; records the selection procedure in `report`.
Index resolve_batch_size(const std::string& flag, const FeatureTable& table, std::uint64_t seed,
                         Json& report, Json& warnings) {
  if (flag != "auto") {
    std::int64_t b = 0;
    try {
      std::size_t used = 0;
      b = std::stoll(flag, &used);
      if (used != flag.size()) throw std::invalid_argument(flag);
    } catch (const std::exception&) {
      throw InputError("--batch-size must be 'auto' or a positive integer");
    }
    if (b < 2) throw InputError("--batch-size must be at least 2");
    return b;
  }
  Rng rng(mix_seed(seed, 6));
  const BatchSizeParams params;
  const BatchSizeResult r = select_batch_size(table, params, rng);
  Json sel;
  sel["num_probe_batches"] = params.num_probe_batches;
  sel["initial_size"] = params.initial_size;
  sel["growth"] = params.growth;
  sel["std_threshold"] = params.std_threshold;
  sel["selected"] = r.batch_size;
  sel["threshold_met"] = r.threshold_met;
  sel["sizes_tried"] = r.sizes_tried;
  sel["max_std"] = r.max_std;
  report["batch_size_selection"] = std::move(sel);
  if (!r.threshold_met) {
    warnings.push_back("batch-size threshold never met; using the cap of " +
                       std::to_string(r.batch_size) + " pairs");
  }
  return r.batch_size;
}

std::optional<Eigen::MatrixXd> load_ground_truth(const std::string& path) {
  if (path.empty()) return std::nullopt;
  const Json j = Json::parse(read_file(path));
  if (j.contains("W_GT")) {
    const auto m = require_m(j);
    return matrix_from_json(j.at("W_GT"), m, m);
  }
  return model_from_json(j).weights;
}

bool convergence_failed(const TrainTrace& t) {
  return t.stop_reason == StopReason::MaxSteps && t.best_objective < 0.05;
}

Json fold_json(std::size_t index, const FoldResult& f,
               const std::optional<Eigen::MatrixXd>& ground_truth) {
  Json j;
  j["fold"] = index;
  j["n_train"] = f.split.train.size();
  j["n_test"] = f.split.test.size();
  j["test_spearman"] = f.test_score;
  j["steps_to_converge"] = f.fit.trace.steps_to_converge;
  j["stop_reason"] = std::string(to_string(f.fit.trace.stop_reason));
  j["best_objective"] = f.fit.trace.best_objective;
  if (ground_truth) {
    j["frobenius_to_ground_truth"] = frobenius_distance(f.fit.model.weights, *ground_truth);
  }
  j["weights"] = model_to_json(f.fit.model);
  j["trace"] = trace_to_json(f.fit.trace);
  return j;
}

int cmd_simulate(Index n, Index m, Index d, double noise, int seeds, std::uint64_t seed_base,
                 const std::string& out, const std::string& format) {
  if (seeds < 1) throw InputError("--seeds must be positive");
  const fs::path root(out);
  for (int s = 0; s < seeds; ++s) {
    SynthConfig cfg;
    cfg.n = n;
    cfg.m = m;
    cfg.d = d;
    cfg.noise_level = noise;
    cfg.seed = seed_base + static_cast<std::uint64_t>(s);
    const SyntheticDataset ds = generate_dataset(cfg);
    const fs::path dir = root / ("seed_" + std::to_string(cfg.seed));
    write_file_atomic(dir / "features.csv", format_feature_csv(ds.features));
    write_file_atomic(dir / "features.schema.json", format_schema_json(ds.features));
    if (format == "csv") {
      write_file_atomic(dir / "reps.csv", format_representations_csv(ds.representations));
    } else {
      write_file_atomic(dir / "reps.bin", format_representations_binary(ds.representations));
    }
    write_file_atomic(dir / "ground_truth.json", dump(ground_truth_to_json(ds)));
    std::cerr << "wrote " << dir.string() << " (MDS max relative error "
              << ds.embedding.max_relative_error << ")\n";
    if (ds.embedding.truncated) {
      std::cerr << "warning: seed " << cfg.seed << ": " << ds.embedding.positive_eigenvalues
                << " positive eigenvalues truncated to d = " << d
                << "; max relative distance error " << ds.embedding.max_relative_error << "\n";
    }
    if (ds.embedding.negative_mass > 0.01) {
      std::cerr << "warning: seed " << cfg.seed << ": ground-truth distances are not Euclidean ("
                << ds.embedding.negative_mass << " of eigenvalue mass is negative)\n";
    }
  }
  return kExitOk;
}

int cmd_fit(const TrainingFlags& flags, const std::string& split, int k,
            const std::string& ground_truth_path) {
  const LoadedData data = load_data(flags.features, flags.reps);
  const auto variant = parse_model_variant(flags.variant);
  const auto ground_truth = load_ground_truth(ground_truth_path);
  if (ground_truth && ground_truth->rows() != data.table.num_features()) {
    throw InputError("ground truth dimension does not match the feature table");
  }

  Json report;
  Json warnings = Json::array();
  report["tool"] = "mlem";
  report["version"] = kVersion;
  report["command"] = "fit";
  TrainConfig config = flags.config();
  config.batch_size = resolve_batch_size(flags.batch_size, data.table, flags.seed, report, warnings);
  config.validate();

  Json cfg;
  cfg["features"] = flags.features;
  cfg["reps"] = flags.reps;
  cfg["variant"] = flags.variant;
  cfg["split"] = split;
  if (split == "kfold") {
    cfg["k"] = k;
  } else {
    cfg["train_fraction"] = flags.train_fraction;
  }
  cfg["batch_size_flag"] = flags.batch_size;
  cfg["batch_size"] = config.batch_size;
  cfg["softrank_eps"] = config.softrank.regularization;
  cfg["learning_rate"] = config.learning_rate;
  cfg["weight_decay"] = config.weight_decay;
  cfg["adam_beta1"] = config.adam_beta1;
  cfg["adam_beta2"] = config.adam_beta2;
  cfg["adam_eps"] = config.adam_eps;
  cfg["patience"] = config.patience;
  cfg["max_steps"] = config.max_steps;
  cfg["improvement_tol"] = config.improvement_tol;
  cfg["eval_cap"] = config.eval_cap;
  cfg["seed"] = config.seed;
  if (!ground_truth_path.empty()) cfg["ground_truth"] = ground_truth_path;
  report["config"] = std::move(cfg);

  std::vector<FoldResult> folds;
  if (split == "kfold") {
    CrossValidation cv = cross_validate(data.table, data.reps, variant, config, k, flags.seed,
                                        flags.threads);
    folds = std::move(cv.folds);
  } else {
    SplitSpec spec;
    spec.train_fraction = flags.train_fraction;
    spec.seed = flags.seed;
    folds.push_back(fit(data.table, data.reps, variant, config, spec));
  }

  const fs::path out(flags.out);
  Json results = Json::array();
  std::vector<double> scores, steps, frob;
  bool failed = false;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    results.push_back(fold_json(f, folds[f], ground_truth));
    scores.push_back(folds[f].test_score);
    steps.push_back(folds[f].fit.trace.steps_to_converge);
    if (ground_truth) frob.push_back(frobenius_distance(folds[f].fit.model.weights, *ground_truth));
    if (convergence_failed(folds[f].fit.trace)) {
      failed = true;
      warnings.push_back("fold " + std::to_string(f) +
                         " hit max_steps with best objective below 0.05");
    }
    const std::string name =
        folds.size() == 1 ? "model.json" : "model_fold" + std::to_string(f) + ".json";
    write_file_atomic(out / name, dump(model_to_json(folds[f].fit.model)));
  }
  report["results"] = std::move(results);
  Json summary;
  summary["test_spearman"] = mean_std(scores);
  summary["steps_to_converge"] = mean_std(steps);
  if (ground_truth) summary["frobenius_to_ground_truth"] = mean_std(frob);
  report["summary"] = std::move(summary);
  report["warnings"] = std::move(warnings);
  write_file_atomic(out / "report.json", dump(report));

  std::cerr << "test spearman " << mean_of(scores) << " +/- " << population_std(scores)
            << " over " << folds.size() << " fold(s)\n";
  return failed ? kExitConvergence : kExitOk;
}

int cmd_importance(const std::string& model_path, const std::string& features,
                   const std::string& reps_path, int n_perm, std::uint64_t seed,
                   std::int64_t max_pairs, std::optional<std::uint64_t> test_split_seed,
                   double train_fraction, const std::string& out) {
  const TrainedModel model = model_from_json(Json::parse(read_file(model_path)));
  const LoadedData data = load_data(features, reps_path);
  if (model.feature_names != data.table.feature_names()) {
    throw InputError("model feature names do not match the feature table");
  }
  if (max_pairs < 2) throw InputError("--max-pairs must be at least 2");

  std::vector<Index> stimuli;
  if (test_split_seed) {
    SplitSpec spec;
    spec.train_fraction = train_fraction;
    spec.seed = *test_split_seed;
    stimuli = make_splits(data.table.num_stimuli(), spec).front().test;
  } else {
    stimuli.resize(static_cast<std::size_t>(data.table.num_stimuli()));
    std::iota(stimuli.begin(), stimuli.end(), Index{0});
  }
  const auto pairs = held_out_pairs(stimuli, max_pairs, seed);
  const PairBatch batch = assemble_batch(data.table, data.reps, pairs);
  const ImportanceReport report = permutation_importance(model, batch, n_perm, seed);

  Json j;
  j["tool"] = "mlem";
  j["version"] = kVersion;
  j["command"] = "importance";
  Json cfg;
  cfg["model"] = model_path;
  cfg["features"] = features;
  cfg["reps"] = reps_path;
  cfg["n_perm"] = n_perm;
  cfg["seed"] = seed;
  cfg["max_pairs"] = max_pairs;
  if (test_split_seed) {
    cfg["test_split_seed"] = *test_split_seed;
    cfg["train_fraction"] = train_fraction;
  }
  j["config"] = std::move(cfg);
  j["variant"] = std::string(to_string(model.variant));
  j["importance"] = importance_to_json(report);

  const fs::path dir(out);
  write_file_atomic(dir / "importance.json", dump(j));
  write_file_atomic(dir / "importance.csv", importance_csv(report));
  std::cerr << "baseline spearman " << report.baseline << " on " << report.n_pairs << " pairs\n";
  return kExitOk;
}

/// One comparable unit: a model (fold) with optional steps and importance.
struct Subject {
  std::string source;
  std::optional<Eigen::MatrixXd> weights;
  std::vector<std::string> feature_names;
  std::optional<int> steps;
  std::optional<ImportanceReport> importance;
};

std::vector<Subject> load_subjects(const std::string& path) {
  const Json j = Json::parse(read_file(path));
  std::vector<Subject> out;
  if (j.contains("results")) {
    for (const auto& r : j.at("results")) {
      Subject s;
      s.source = path + "#fold" + std::to_string(r.at("fold").get<int>());
      const TrainedModel model = model_from_json(r.at("weights"));
      s.weights = model.weights;
      s.feature_names = model.feature_names;
      s.steps = r.at("steps_to_converge").get<int>();
      out.push_back(std::move(s));
    }
  } else if (j.contains("importance")) {
    Subject s;
    s.source = path;
    s.importance = importance_from_json(j.at("importance"));
    s.feature_names = s.importance->feature_names;
    out.push_back(std::move(s));
  } else if (j.contains("entries")) {
    Subject s;
    s.source = path;
    s.importance = importance_from_json(j);
    s.feature_names = s.importance->feature_names;
    out.push_back(std::move(s));
  } else if (j.contains("W_GT")) {
    Subject s;
    s.source = path;
    const Index m = require_m(j);
    s.weights = matrix_from_json(j.at("W_GT"), m, m);
    s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    out.push_back(std::move(s));
  } else {
    Subject s;
    s.source = path;
    const TrainedModel model = model_from_json(j);
    s.weights = model.weights;
    s.feature_names = model.feature_names;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Subject> load_all(const std::vector<std::string>& paths) {
  std::vector<Subject> out;
  for (const auto& p : paths) {
    auto s = load_subjects(p);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

Vector<double> aligned_importance(const ImportanceReport& r, const std::vector<std::string>& names) {
  Vector<double> v(static_cast<Index>(names.size()));
  for (std::size_t t = 0; t < names.size(); ++t) {
    auto it = std::find_if(r.entries.begin(), r.entries.end(),
                           [&](const ImportanceEntry& e) { return e.name == names[t]; });
    if (it == r.entries.end()) throw InputError("importance entry '" + names[t] + "' missing");
    v(static_cast<Index>(t)) = it->importance;
  }
  return v;
}

int cmd_compare(const std::vector<std::string>& a_paths, const std::vector<std::string>& b_paths,
                const std::vector<std::string>& gt_paths, const std::string& out) {
  const auto A = load_all(a_paths);
  const auto B = load_all(b_paths);
  const auto GT = load_all(gt_paths);
  if (A.empty()) throw InputError("nothing to compare");
  if (!B.empty() && B.size() != A.size()) {
    throw InputError("--a and --b resolve to different numbers of models (" +
                     std::to_string(A.size()) + " vs " + std::to_string(B.size()) + ")");
  }
  // One ground truth per A entry, or one per input file when files hold several folds.
  auto gt_for = [&](std::size_t idx) -> const Subject* {
    if (GT.empty()) return nullptr;
    if (GT.size() == 1) return &GT[0];
    if (GT.size() == A.size()) return &GT[idx];
    if (GT.size() == a_paths.size()) {
      const std::size_t per = A.size() / a_paths.size();
      return &GT[idx / per];
    }
    throw InputError("number of ground-truth files does not match the compared models");
  };

  std::map<std::string, std::vector<double>> agg;
  Json pairs = Json::array();
  for (std::size_t i = 0; i < A.size(); ++i) {
    Json p;
    p["index"] = i;
    p["a"] = A[i].source;
    const Subject* b = B.empty() ? nullptr : &B[i];
    if (b) {
      p["b"] = b->source;
      if (A[i].feature_names != b->feature_names) throw InputError("mismatched feature sets");
    }
    const Subject* gt = gt_for(i);
    if (gt) {
      p["ground_truth"] = gt->source;
      if (gt->feature_names != A[i].feature_names) {
        throw InputError("ground truth features do not match compared models");
      }
    }
    auto record = [&](const std::string& key, double v) {
      p[key] = v;
      agg[key].push_back(v);
    };
    if (b && A[i].weights && b->weights) {
      record("frobenius_a_b", frobenius_distance(*A[i].weights, *b->weights));
    }
    if (gt && gt->weights) {
      if (A[i].weights) record("frobenius_a_ground_truth", frobenius_distance(*A[i].weights, *gt->weights));
      if (b && b->weights) record("frobenius_b_ground_truth", frobenius_distance(*b->weights, *gt->weights));
    }
    if (b && A[i].importance && b->importance) {
      const auto names = interaction_names(A[i].feature_names);
      record("weighted_tau", weighted_tau(aligned_importance(*A[i].importance, names),
                                          aligned_importance(*b->importance, names)));
    }
    if (A[i].steps) record("steps_a", *A[i].steps);
    if (b && b->steps) record("steps_b", *b->steps);
    pairs.push_back(std::move(p));
  }

  Json j;
  j["tool"] = "mlem";
  j["version"] = kVersion;
  j["command"] = "compare";
  Json cfg;
  cfg["a"] = a_paths;
  cfg["b"] = b_paths;
  cfg["ground_truth"] = gt_paths;
  j["config"] = std::move(cfg);
  j["pairs"] = std::move(pairs);
  Json aggregate = Json::object();
  for (const auto& [key, values] : agg) aggregate[key] = mean_std(values);
  j["aggregate"] = std::move(aggregate);
  write_file_atomic(out, dump(j));
  return kExitOk;
}

std::vector<Index> parse_units(const std::string& spec, Index d) {
  std::vector<Index> units;
  if (spec == "all") {
    for (Index u = 0; u < d; ++u) units.push_back(u);
    return units;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const long long u = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      units.push_back(u);
    } catch (const std::exception&) {
      throw InputError("--units must be 'all' or a comma-separated list of indices");
    }
  }
  if (units.empty()) throw InputError("--units is empty");
  return units;
}

int cmd_univariate(const TrainingFlags& flags, const std::string& units_flag) {
  const LoadedData data = load_data(flags.features, flags.reps);
  const auto variant = parse_model_variant(flags.variant);
  const auto units = parse_units(units_flag, data.reps.dim());

  Json report;
  Json warnings = Json::array();
  report["tool"] = "mlem";
  report["version"] = kVersion;
  report["command"] = "univariate";
  TrainConfig config = flags.config();
  config.batch_size = resolve_batch_size(flags.batch_size, data.table, flags.seed, report, warnings);
  config.validate();
  SplitSpec spec;
  spec.train_fraction = flags.train_fraction;
  spec.seed = flags.seed;

  const UnivariateResult r =
      univariate_analysis(data.table, data.reps, units, variant, config, spec, flags.threads);

  Json cfg;
  cfg["features"] = flags.features;
  cfg["reps"] = flags.reps;
  cfg["variant"] = flags.variant;
  cfg["units"] = units_flag;
  cfg["train_fraction"] = flags.train_fraction;
  cfg["batch_size"] = config.batch_size;
  cfg["softrank_eps"] = config.softrank.regularization;
  cfg["learning_rate"] = config.learning_rate;
  cfg["patience"] = config.patience;
  cfg["max_steps"] = config.max_steps;
  cfg["seed"] = config.seed;
  report["config"] = std::move(cfg);

  std::string csv = "unit,test_spearman,steps_to_converge\n";
  std::vector<double> scores;
  Json rows = Json::array();
  for (const auto& u : r.units) {
    csv += std::to_string(u.unit) + "," + format_double(u.test_score) + "," +
           std::to_string(u.steps_to_converge) + "\n";
    if (!std::isnan(u.test_score)) scores.push_back(u.test_score);
    Json row;
    row["unit"] = u.unit;
    row["test_spearman"] = u.test_score;
    row["steps_to_converge"] = u.steps_to_converge;
    rows.push_back(std::move(row));
  }
  Json multi;
  multi["test_spearman"] = r.multivariate.test_score;
  multi["steps_to_converge"] = r.multivariate.fit.trace.steps_to_converge;
  multi["weights"] = model_to_json(r.multivariate.fit.model);
  report["multivariate"] = std::move(multi);
  report["units"] = std::move(rows);
  Json summary = mean_std(scores);
  summary["max"] = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  report["univariate_summary"] = std::move(summary);
  report["warnings"] = std::move(warnings);

  const fs::path dir(flags.out);
  write_file_atomic(dir / "univariate.csv", csv);
  write_file_atomic(dir / "univariate.json", dump(report));
  std::cerr << "multivariate " << r.multivariate.test_score << ", best unit "
            << (scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end())) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Metric learning encoding models: fit, inspect and simulate"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "generate synthetic datasets with a known metric");
  Index n = 256, m = 16, d = 768;
  double noise = 0.0;
  int seeds = 1;
  std::uint64_t seed_base = 0;
  std::string sim_out, sim_format = "binary";
  sim->add_option("--n", n, "stimuli");
  sim->add_option("--m", m, "binary features");
  sim->add_option("--d", d, "embedding dimension");
  sim->add_option("--noise", noise, "noise level");
  sim->add_option("--seeds", seeds, "number of datasets (seeds seed-base, seed-base+1, ...)");
  sim->add_option("--seed-base", seed_base, "first seed");
  sim->add_option("--format", sim_format, "representation format")
      ->check(CLI::IsMember({"binary", "csv"}));
  sim->add_option("--out", sim_out, "output directory")->required();

  auto* fitc = app.add_subcommand("fit", "train MLEM or FR-RSA-I and score held-out pairs");
  TrainingFlags fit_flags;
  fit_flags.add_to(*fitc);
  std::string split = "holdout", ground_truth;
  int k = 5;
  fitc->add_option("--split", split, "holdout or kfold")->check(CLI::IsMember({"holdout", "kfold"}));
  fitc->add_option("--k", k, "folds for kfold");
  fitc->add_option("--ground-truth", ground_truth, "ground_truth.json or model JSON to compare against");

  auto* imp = app.add_subcommand("importance", "permutation importance of features and interactions");
  std::string model_path, imp_features, imp_reps, imp_out;
  int n_perm = 10;
  std::uint64_t imp_seed = 0;
  std::int64_t max_pairs = 200000;
  std::optional<std::uint64_t> test_split_seed;
  double imp_train_fraction = 0.8;
  imp->add_option("--model", model_path, "model JSON")->required();
  imp->add_option("--features", imp_features, "feature CSV")->required();
  imp->add_option("--reps", imp_reps, "representation matrix")->required();
  imp->add_option("--n-perm", n_perm, "permutations per entry");
  imp->add_option("--seed", imp_seed, "random seed");
  imp->add_option("--max-pairs", max_pairs, "pairs scored (uniform subsample above this)");
  imp->add_option("--test-split-seed", test_split_seed,
                  "restrict to the held-out stimuli of the holdout split with this seed");
  imp->add_option("--train-fraction", imp_train_fraction, "holdout training fraction");
  imp->add_option("--out", imp_out, "output directory")->required();

  auto* cmp = app.add_subcommand("compare", "Frobenius distances, weighted tau and convergence steps");
  std::vector<std::string> a_paths, b_paths, gt_paths;
  std::string cmp_out;
  cmp->add_option("--a", a_paths, "reports, models or importance files")->required();
  cmp->add_option("--b", b_paths, "files paired with --a by position");
  cmp->add_option("--ground-truth", gt_paths, "ground_truth.json file(s)");
  cmp->add_option("--out", cmp_out, "output JSON path")->required();

  auto* uni = app.add_subcommand("univariate", "one model per representation unit vs multivariate");
  TrainingFlags uni_flags;
  uni_flags.add_to(*uni);
  std::string units = "all";
  uni->add_option("--units", units, "'all' or comma-separated unit indices");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (sim->parsed()) return cmd_simulate(n, m, d, noise, seeds, seed_base, sim_out, sim_format);
    if (fitc->parsed()) return cmd_fit(fit_flags, split, k, ground_truth);
    if (imp->parsed()) {
      return cmd_importance(model_path, imp_features, imp_reps, n_perm, imp_seed, max_pairs,
                            test_split_seed, imp_train_fraction, imp_out);
    }
    if (cmp->parsed()) return cmd_compare(a_paths, b_paths, gt_paths, cmp_out);
    if (uni->parsed()) return cmd_univariate(uni_flags, units);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const NumericalError& e) {
    std::cerr << "optimization failed: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitInvalidInput;
}

}  // namespace mlem
