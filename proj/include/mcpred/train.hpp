#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcpred/model.hpp"
#include "mcpred/nn/gradcheck.hpp"
#include "mcpred/nn/parameters.hpp"
#include "mcpred/text.hpp"
#include "mcpred/types.hpp"
#include "mcpred/vocabulary.hpp"

namespace mcpred::train {

struct TrainConfig {
  std::size_t batch_size = 100;
  double lr_main = 1e-4;
  double lr_text = 1e-5;
  double lambda = 1e-6;
  std::size_t epochs = 10;
  // Stop after this many epochs without a dev improvement; 0 disables.
  std::size_t patience = 0;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t threads = 1;

  void validate() const;
};

// mean(-log Pr(gold)) + lambda * sum of squared parameter values.
// Throws NumericError for a non-finite log-probability and
// std::invalid_argument for an empty batch.
double compute_loss(std::span<const double> gold_log_probs, const nn::ParameterStore& params, double lambda);

struct OptimizerState {
  std::vector<nn::Tensor> m;
  std::vector<nn::Tensor> v;
  std::size_t step = 0;

  explicit OptimizerState(const nn::ParameterStore& params);
};

// Bias-corrected Adam. Text-encoder parameters step with lr_text, all
// others with lr_main. Throws std::invalid_argument on a shape mismatch.
void adam_step(nn::ParameterStore& params, const nn::GradientSet& grads, OptimizerState& state,
               const TrainConfig& config);

struct BatchLoss {
  double data_loss = 0.0;  // mean negative gold log-probability
  double loss = 0.0;       // data_loss + lambda * |params|^2
};

// Loss of a batch and its gradient (including the L2 term) into `grads`,
// which is zeroed first. Per-sample gradients are reduced in batch order
// regardless of thread count. `dropout_seed` of nullopt disables dropout.
BatchLoss batch_gradient(const model::Model& model, std::span<const model::EncodedSample* const> batch,
                         double lambda, nn::GradientSet& grads, std::optional<std::uint64_t> dropout_seed,
                         std::size_t threads = 1);

// Dropout-free loss of a batch, no gradient.
double batch_loss(const model::Model& model, std::span<const model::EncodedSample* const> batch, double lambda);

// Fraction of samples whose predicted candidate equals the gold index.
// Throws DataError("no samples") on an empty corpus.
double evaluate_accuracy(const model::Model& model, const std::vector<model::EncodedSample>& samples,
                         std::size_t threads = 1);

// Finite-difference check of the dropout-free batch loss (L2 term
// included) over every parameter of the model.
nn::GradCheckResult check_gradients(model::Model& model, const std::vector<model::EncodedSample>& samples,
                                    double lambda, double epsilon = 1e-5);

struct MetricsRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_accuracy;  // filled on the last step of an epoch
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

struct TrainResult {
  std::vector<MetricsRow> metrics;
  double best_dev_accuracy = -1.0;  // -1 without a dev set
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

using ProgressFn = std::function<void(std::size_t epoch, double mean_loss, std::optional<double> dev_accuracy)>;

// Trains in place. With a dev set the model ends holding the parameters of
// the best dev epoch; without one it keeps the final parameters. Throws
// NumericError("non-finite loss at step N") on divergence.
TrainResult train_model(model::Model& model, const std::vector<model::EncodedSample>& train_set,
                        const std::vector<model::EncodedSample>* dev_set, const TrainConfig& config,
                        const ProgressFn& progress = {});

struct TrainedModel {
  model::Model model;
  Vocabulary vocab;
  TrainResult result;
};

// Builds the vocabulary from the training samples, initialises a model
// from the "init" sub-stream of the seed, and trains it.
TrainedModel train(const std::vector<Sample>& train_samples, const std::vector<Sample>* dev_samples,
                   const ModelConfig& model_config, const TrainConfig& train_config,
                   const ProgressFn& progress = {}, std::size_t min_count = 1);

// ---- ablation sweeps --------------------------------------------------------

enum class SweepAxis { score_variant, attention_variant, mask_set, chain_text };

SweepAxis parse_sweep_axis(std::string_view text);
std::string_view to_string(SweepAxis axis);

struct AblationRow {
  std::string cell;
  double accuracy = 0.0;        // percent
  std::optional<double> delta;  // percentage points vs the reference row; none on the reference row
};

struct AblationReport {
  SweepAxis axis = SweepAxis::score_variant;
  std::vector<AblationRow> rows;

  // "cell,accuracy,delta" with the reference row's delta written as "/".
  std::string to_csv() const;
};

// Mask cells in table order: All, -V, -N, -J, -R, -V(self), -V(others),
// -V&N, -V&R, -N&J, -R&J.
std::vector<std::pair<std::string, text::MaskSet>> mask_sweep_cells();

// Trains one model per cell for the score, attention and chain/text axes
// and evaluates each on `eval_samples`; rows of the first two are sorted
// best first. The mask axis trains once with the base config and only
// varies the evaluation inputs.
AblationReport run_ablation(SweepAxis axis, const std::vector<Sample>& train_samples,
                            const std::vector<Sample>& eval_samples, const ModelConfig& base_model,
                            const TrainConfig& base_train, const ProgressFn& progress = {});

// Evaluates one trained model under every mask cell; deltas are relative to "All".
AblationReport run_mask_ablation(const model::Model& model, const Vocabulary& vocab,
                                 const std::vector<Sample>& eval_samples, std::size_t threads = 1);

}  // namespace mcpred::train
