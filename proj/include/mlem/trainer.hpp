#pragma once

#include "mlem/data_model.hpp"
#include "mlem/metric_model.hpp"
#include "mlem/pair_sampler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mlem {

struct TrainConfig {
  double learning_rate = 0.1;
  int patience = 50;
  int max_steps = 1000;
  Index batch_size = 4096;
  SoftRankConfig softrank;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  /// An objective counts as an improvement only above best + this.
  double improvement_tol = 1e-5;
  /// Held-out pairs beyond this are uniformly subsampled.
  Index eval_cap = 200000;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopReason { Patience, MaxSteps };

std::string_view to_string(StopReason r);

struct TraceRecord {
  int step = 0;
  double objective = 0;
  double best = 0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  int steps_to_converge = 0;
  StopReason stop_reason = StopReason::MaxSteps;
  double best_objective = -std::numeric_limits<double>::infinity();
  int best_step = 0;
  int skipped_batches = 0;
};

struct TrainedModel {
  ModelVariant variant = ModelVariant::Mlem;
  /// Unconstrained parameters at the best step.
  Eigen::MatrixXd params;
  /// Frobenius-normalized weights derived from `params`.
  Eigen::MatrixXd weights;
  std::vector<std::string> feature_names;

  static TrainedModel from_params(ModelVariant variant, Eigen::MatrixXd params,
                                  std::vector<std::string> feature_names);
  /// A model defined directly by its (normalized on construction) weights.
  static TrainedModel from_weights(ModelVariant variant, const Eigen::MatrixXd& weights,
                                   std::vector<std::string> feature_names);

  Eigen::VectorXd predict(const Eigen::MatrixXd& feature_distances) const;
};

struct MinMaxState {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  bool initialized() const { return min <= max; }
};

struct ScaledTargets {
  Eigen::VectorXd values;
  bool degenerate = false;
};

/// Widens the running extremes with `values`, then maps into [0, 1].
ScaledTargets minmax_scale(const Eigen::VectorXd& values, MinMaxState& state);

struct AdamState {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;
  long step = 0;
};

/// One AdamW step minimizing along `grad`; callers maximizing pass -grad.
void adamw_step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad, AdamState& state,
                const TrainConfig& config);

/// Initial parameters: uniform in [-1/sqrt(m), 1/sqrt(m)].
Eigen::MatrixXd initial_params(Index m, std::uint64_t seed);

struct FitResult {
  TrainedModel model;
  TrainTrace trace;
};

/// Trains on pairs drawn among `train` stimuli only.
FitResult fit_on(const FeatureTable& table, const RepresentationSet& reps,
                 std::span<const Index> train, ModelVariant variant, const TrainConfig& config);

struct SplitSpec {
  enum class Mode { Holdout, KFold };
  Mode mode = Mode::Holdout;
  double train_fraction = 0.8;
  int k = 5;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Stimulus-level splits: one for Holdout, k for KFold.
std::vector<Split> make_splits(Index n, const SplitSpec& spec);

/// Exact Spearman between predictions and neural distances over the pairs of
/// `test` stimuli, subsampled uniformly to `eval_cap` pairs when larger.
double evaluate(const TrainedModel& model, const FeatureTable& table,
                const RepresentationSet& reps, std::span<const Index> test,
                Index eval_cap = 200000, std::uint64_t seed = 0);

/// Pairs among `stimuli`, capped as in evaluate().
std::vector<StimulusPair> held_out_pairs(std::span<const Index> stimuli, Index cap,
                                         std::uint64_t seed);

struct FoldResult {
  FitResult fit;
  Split split;
  double test_score = 0;
};

/// Holdout: trains on the first split and scores its test stimuli.
FoldResult fit(const FeatureTable& table, const RepresentationSet& reps, ModelVariant variant,
               const TrainConfig& config, const SplitSpec& split);

struct CrossValidation {
  std::vector<FoldResult> folds;
  double mean = 0;
  /// Population standard deviation across folds.
  double std_dev = 0;
};

CrossValidation cross_validate(const FeatureTable& table, const RepresentationSet& reps,
                               ModelVariant variant, const TrainConfig& config, int k,
                               std::uint64_t seed, int threads = 1);

struct UnitResult {
  Index unit = 0;
  double test_score = 0;
  int steps_to_converge = 0;
};

struct UnivariateResult {
  std::vector<UnitResult> units;
  FoldResult multivariate;
};

/// One model per representation unit plus the multivariate reference, all on
/// the same holdout split.
UnivariateResult univariate_analysis(const FeatureTable& table, const RepresentationSet& reps,
                                     std::span<const Index> units, ModelVariant variant,
                                     const TrainConfig& config, const SplitSpec& split,
                                     int threads = 1);

/// Runs body(0..count-1) on up to `threads` workers.
void parallel_for(Index count, int threads, const std::function<void(Index)>& body);

double mean_of(std::span<const double> xs);
double population_std(std::span<const double> xs);

}  // namespace mlem
