#include "mlem/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace mlem {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw InputError("learning rate must be positive");
  if (patience < 1) throw InputError("patience must be at least 1");
  if (max_steps < 1) throw InputError("max_steps must be at least 1");
  if (batch_size < 2) throw InputError("batch size must be at least 2");
  if (!(softrank.regularization > 0)) throw InputError("soft-rank regularization must be positive");
  if (weight_decay != 0.0) throw InputError("weight decay is fixed at 0");
  if (eval_cap < 1) throw InputError("evaluation cap must be positive");
}

std::string_view to_string(StopReason r) {
  return r == StopReason::Patience ? "patience" : "max_steps";
}

TrainedModel TrainedModel::from_params(ModelVariant variant, Eigen::MatrixXd params,
                                       std::vector<std::string> feature_names) {
  TrainedModel model;
  model.variant = variant;
  model.weights = model_weights(MetricParams<double>{params, variant});
  model.params = std::move(params);
  model.feature_names = std::move(feature_names);
  return model;
}

TrainedModel TrainedModel::from_weights(ModelVariant variant, const Eigen::MatrixXd& weights,
                                        std::vector<std::string> feature_names) {
  if (weights.rows() != weights.cols()) throw InputError("weight matrix must be square");
  TrainedModel model;
  model.variant = variant;
  model.weights = normalize_frobenius(weights);
  model.feature_names = std::move(feature_names);
  return model;
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& feature_distances) const {
  return predict_distances(weights, feature_distances, variant);
}

ScaledTargets minmax_scale(const Eigen::VectorXd& values, MinMaxState& state) {
  ScaledTargets out;
  if (values.size() == 0) return out;
  state.min = std::min(state.min, values.minCoeff());
  state.max = std::max(state.max, values.maxCoeff());
  const double range = state.max - state.min;
  if (!(range > 0)) {
    out.values = Eigen::VectorXd::Zero(values.size());
    out.degenerate = true;
    return out;
  }
  out.values = ((values.array() - state.min) / range).max(0.0).min(1.0);
  return out;
}

void adamw_step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad, AdamState& state,
                const TrainConfig& config) {
  if (grad.rows() != params.rows() || grad.cols() != params.cols()) {
    throw InputError("gradient shape does not match parameters");
  }
  if (!grad.allFinite()) {
    throw NumericalError("non-finite gradient at optimizer step " +
                         std::to_string(state.step + 1) + " (max |g| = " +
                         std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
  }
  if (state.step == 0) {
    state.first = Eigen::MatrixXd::Zero(params.rows(), params.cols());
    state.second = Eigen::MatrixXd::Zero(params.rows(), params.cols());
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  params *= 1.0 - config.learning_rate * config.weight_decay;
  state.first = b1 * state.first + (1.0 - b1) * grad;
  state.second = b2 * state.second + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  params.array() -= config.learning_rate * (state.first.array() / c1) /
                    ((state.second.array() / c2).sqrt() + config.adam_eps);
}

Eigen::MatrixXd initial_params(Index m, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(m));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd A(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) A(i, j) = dist(rng);
  }
  return A;
}

namespace {

constexpr int kMaxConsecutiveSkips = 100;

bool rows_identical(const RepresentationSet& reps, std::span<const Index> rows) {
  for (std::size_t t = 1; t < rows.size(); ++t) {
    if (reps.matrix().row(rows[t]) != reps.matrix().row(rows[0])) return false;
  }
  return true;
}

}  // namespace

FitResult fit_on(const FeatureTable& table, const RepresentationSet& reps,
                 std::span<const Index> train, ModelVariant variant, const TrainConfig& config) {
  config.validate();
  if (table.num_stimuli() != reps.num_stimuli()) {
    throw InputError("feature table and representations disagree on stimulus count");
  }
  const auto n_train = static_cast<Index>(train.size());
  if (n_train < 2) throw InputError("need at least 2 training stimuli");
  if (rows_identical(reps, train)) {
    throw DegenerateError("all training representations are identical; neural distances are constant");
  }

  const Index m = table.num_features();
  MetricParams<double> params{initial_params(m, mix_seed(config.seed, 1)), variant};
  Rng rng(mix_seed(config.seed, 2));
  const Index b = std::min(config.batch_size, num_pairs(n_train));

  MinMaxState scaler;
  AdamState adam;
  TrainTrace trace;
  Eigen::MatrixXd best_params = params.A;
  int since_improvement = 0;
  int consecutive_skips = 0;
  int step = 0;

  while (step < config.max_steps) {
    const auto pairs = remap_pairs(sample_pairs(n_train, b, rng), train);
    const PairBatch batch = assemble_batch(table, reps, pairs);
    const ScaledTargets targets = minmax_scale(batch.neural_distances, scaler);
    const bool flat = targets.degenerate ||
                      targets.values.maxCoeff() == targets.values.minCoeff();
    if (flat) {
      ++trace.skipped_batches;
      if (++consecutive_skips > kMaxConsecutiveSkips) {
        throw DegenerateError("training impossible: sampled batches have constant neural distances");
      }
      continue;
    }
    consecutive_skips = 0;
    ++step;

    const Objective<double> obj =
        objective_and_gradient(params, batch.feature_distances, targets.values, config.softrank);
    if (obj.value > trace.best_objective + config.improvement_tol) {
      trace.best_objective = obj.value;
      trace.best_step = step;
      best_params = params.A;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    trace.records.push_back({step, obj.value, trace.best_objective});

    if (since_improvement >= config.patience) {
      trace.stop_reason = StopReason::Patience;
      break;
    }
    if (step == config.max_steps) {
      trace.stop_reason = StopReason::MaxSteps;
      break;
    }
    adamw_step(params.A, -obj.gradient, adam, config);
  }
  trace.steps_to_converge = step;

  FitResult result;
  result.model = TrainedModel::from_params(variant, std::move(best_params), table.feature_names());
  result.trace = std::move(trace);
  return result;
}

std::vector<Split> make_splits(Index n, const SplitSpec& spec) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(mix_seed(spec.seed, 3));
  std::shuffle(perm.begin(), perm.end(), rng);

  auto sorted = [](std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
  };

  std::vector<Split> splits;
  if (spec.mode == SplitSpec::Mode::Holdout) {
    if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) {
      throw InputError("train fraction must lie in (0, 1)");
    }
    const auto n_train = static_cast<Index>(std::llround(spec.train_fraction * static_cast<double>(n)));
    if (n_train < 2 || n - n_train < 2) {
      throw InputError("holdout split leaves fewer than 2 stimuli on one side");
    }
    splits.push_back({sorted({perm.begin(), perm.begin() + n_train}),
                      sorted({perm.begin() + n_train, perm.end()})});
    return splits;
  }

  const Index k = spec.k;
  if (k < 2) throw InputError("k-fold needs k >= 2");
  if (n < k) throw InputError("fewer stimuli than folds");
  for (Index f = 0; f < k; ++f) {
    const Index lo = f * n / k;
    const Index hi = (f + 1) * n / k;
    if (hi - lo < 2) throw InputError("fold too small to form test pairs");
    Split s;
    s.test = sorted({perm.begin() + lo, perm.begin() + hi});
    std::vector<Index> rest(perm.begin(), perm.begin() + lo);
    rest.insert(rest.end(), perm.begin() + hi, perm.end());
    s.train = sorted(std::move(rest));
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<StimulusPair> held_out_pairs(std::span<const Index> stimuli, Index cap,
                                         std::uint64_t seed) {
  const auto n = static_cast<Index>(stimuli.size());
  if (n < 2) throw DegenerateError("need at least 2 held-out stimuli");
  if (num_pairs(n) <= cap) return remap_pairs(all_pairs(n), stimuli);
  Rng rng(mix_seed(seed, 4));
  return remap_pairs(sample_pairs(n, cap, rng), stimuli);
}

double evaluate(const TrainedModel& model, const FeatureTable& table,
                const RepresentationSet& reps, std::span<const Index> test, Index eval_cap,
                std::uint64_t seed) {
  const auto pairs = held_out_pairs(test, eval_cap, seed);
  const PairBatch batch = assemble_batch(table, reps, pairs);
  return spearman_exact(model.predict(batch.feature_distances), batch.neural_distances);
}

FoldResult fit(const FeatureTable& table, const RepresentationSet& reps, ModelVariant variant,
               const TrainConfig& config, const SplitSpec& split) {
  auto splits = make_splits(table.num_stimuli(), split);
  FoldResult out;
  out.split = std::move(splits.front());
  out.fit = fit_on(table, reps, out.split.train, variant, config);
  out.test_score = evaluate(out.fit.model, table, reps, out.split.test, config.eval_cap, config.seed);
  return out;
}

CrossValidation cross_validate(const FeatureTable& table, const RepresentationSet& reps,
                               ModelVariant variant, const TrainConfig& config, int k,
                               std::uint64_t seed, int threads) {
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::KFold;
  spec.k = k;
  spec.seed = seed;
  auto splits = make_splits(table.num_stimuli(), spec);

  CrossValidation cv;
  cv.folds.resize(splits.size());
  parallel_for(static_cast<Index>(splits.size()), threads, [&](Index f) {
    FoldResult& fold = cv.folds[static_cast<std::size_t>(f)];
    fold.split = std::move(splits[static_cast<std::size_t>(f)]);
    fold.fit = fit_on(table, reps, fold.split.train, variant, config);
    fold.test_score = evaluate(fold.fit.model, table, reps, fold.split.test, config.eval_cap,
                               config.seed);
  });
  std::vector<double> scores;
  for (const auto& f : cv.folds) scores.push_back(f.test_score);
  cv.mean = mean_of(scores);
  cv.std_dev = population_std(scores);
  return cv;
}

UnivariateResult univariate_analysis(const FeatureTable& table, const RepresentationSet& reps,
                                     std::span<const Index> units, ModelVariant variant,
                                     const TrainConfig& config, const SplitSpec& split,
                                     int threads) {
  for (Index u : units) {
    if (u < 0 || u >= reps.dim()) {
      throw InputError("unit index " + std::to_string(u) + " out of range [0, " +
                       std::to_string(reps.dim()) + ")");
    }
  }
  UnivariateResult out;
  out.multivariate = fit(table, reps, variant, config, split);
  const Split& s = out.multivariate.split;
  out.units.resize(units.size());
  parallel_for(static_cast<Index>(units.size()), threads, [&](Index t) {
    const Index u = units[static_cast<std::size_t>(t)];
    UnitResult& r = out.units[static_cast<std::size_t>(t)];
    r.unit = u;
    const RepresentationSet slice = univariate_slice(reps, u);
    try {
      const FitResult f = fit_on(table, slice, s.train, variant, config);
      r.steps_to_converge = f.trace.steps_to_converge;
      r.test_score = evaluate(f.model, table, slice, s.test, config.eval_cap, config.seed);
    } catch (const DegenerateError&) {
      // Constant unit: no ranking information.
      r.test_score = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return out;
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& body) {
  if (threads <= 1 || count <= 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (Index i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_workers = static_cast<Index>(std::min<Index>(threads, count));
  for (Index t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace mlem
