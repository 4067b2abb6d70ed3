#include "mcpred/train.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mcpred/errors.hpp"
#include "mcpred/random.hpp"

namespace mcpred::train {

using model::EncodedSample;
using model::Model;

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch-size must be positive");
  if (!(lr_main > 0.0) || !(lr_text > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (threads == 0) throw ConfigError("threads must be at least 1");
}

double compute_loss(std::span<const double> gold_log_probs, const nn::ParameterStore& params, double lambda) {
  if (gold_log_probs.empty()) throw std::invalid_argument("compute_loss: empty batch");
  double sum = 0.0;
  for (double lp : gold_log_probs) {
    if (!std::isfinite(lp)) throw NumericError("non-finite gold log-probability");
    sum -= lp;
  }
  const double data = sum / static_cast<double>(gold_log_probs.size());
  return lambda == 0.0 ? data : data + lambda * params.squared_norm();
}

OptimizerState::OptimizerState(const nn::ParameterStore& params) {
  for (const auto& p : params.all()) {
    m.emplace_back(p.value.shape(), std::vector<double>(p.value.size(), 0.0));
    v.emplace_back(p.value.shape(), std::vector<double>(p.value.size(), 0.0));
  }
}

void adam_step(nn::ParameterStore& params, const nn::GradientSet& grads, OptimizerState& state,
               const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t id = 0; id < params.size(); ++id) {
    nn::Tensor& theta = params[id].value;
    const nn::Tensor& g = grads[id];
    if (!g.same_shape(theta) || !state.m[id].same_shape(theta)) {
      throw std::invalid_argument("adam_step: shape mismatch for " + params[id].name);
    }
    const double lr = params[id].group == nn::ParamGroup::text ? config.lr_text : config.lr_main;
    nn::Tensor& m = state.m[id];
    nn::Tensor& v = state.v[id];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

namespace {

// -log Pr(gold) of one sample, its gradient scaled by `weight` into `grads`.
double sample_gradient(const Model& model, const EncodedSample& sample, double weight, nn::GradientSet& grads,
                       std::optional<std::uint64_t> dropout_seed) {
  nn::Tape tape;
  const nn::Binder bind(tape, model.params(), &grads);
  Rng rng(dropout_seed.value_or(0));
  const nn::DropoutContext drop{dropout_seed ? model.config().dropout : 0.0, dropout_seed ? &rng : nullptr};
  const auto result = model.forward(bind, sample, drop);
  const nn::Var log_prob = nn::log_softmax_at(result.logits, static_cast<std::size_t>(sample.answer));
  const double lp = log_prob.value().item();
  tape.backward(nn::scale(log_prob, -weight));
  return lp;
}

// Runs fn(i, worker) for i in [0, count) on `threads` workers; fn(i, .) for
// consecutive i is reduced through `commit(i, worker)` strictly in index order.
template <typename Work, typename Commit>
void ordered_parallel(std::size_t count, std::size_t threads, Work work, Commit commit) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      work(i, 0);
      commit(i, 0);
    }
    return;
  }
  const std::size_t workers = std::min(threads, count);
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next = 0;
  bool failed = false;
  std::exception_ptr error;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) {
            work(i, w);
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return next == i || failed; });
            if (failed) return;
            commit(i, w);
            ++next;
            cv.notify_all();
          }
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          failed = true;
          cv.notify_all();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

BatchLoss batch_gradient(const Model& model, std::span<const EncodedSample* const> batch, double lambda,
                         nn::GradientSet& grads, std::optional<std::uint64_t> dropout_seed, std::size_t threads) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  grads.zero();
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::vector<double> log_probs(batch.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, batch.size()));
  std::vector<nn::GradientSet> scratch;
  scratch.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) scratch.emplace_back(model.params());

  ordered_parallel(
      batch.size(), workers,
      [&](std::size_t i, std::size_t w) {
        std::optional<std::uint64_t> seed;
        if (dropout_seed) seed = derive_seed(*dropout_seed, "sample", i);
        log_probs[i] = sample_gradient(model, *batch[i], weight, scratch[w], seed);
      },
      [&](std::size_t, std::size_t w) { grads.absorb(scratch[w]); });

  BatchLoss out;
  out.data_loss = compute_loss(log_probs, model.params(), 0.0);
  out.loss = compute_loss(log_probs, model.params(), lambda);
  if (lambda != 0.0) {
    const auto& params = model.params();
    for (std::size_t id = 0; id < params.size(); ++id) {
      nn::Tensor& g = grads.sink(id);
      const nn::Tensor& theta = params[id].value;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * lambda * theta[k];
    }
  }
  return out;
}

double batch_loss(const Model& model, std::span<const EncodedSample* const> batch, double lambda) {
  std::vector<double> log_probs;
  for (const EncodedSample* s : batch) {
    nn::Tape tape(false);
    const nn::Binder bind(tape, model.params(), nullptr);
    const auto result = model.forward(bind, *s, nn::DropoutContext{});
    log_probs.push_back(nn::log_softmax_at(result.logits, static_cast<std::size_t>(s->answer)).value().item());
  }
  return compute_loss(log_probs, model.params(), lambda);
}

double evaluate_accuracy(const Model& model, const std::vector<EncodedSample>& samples, std::size_t threads) {
  if (samples.empty()) throw DataError("no samples");
  std::vector<char> correct(samples.size(), 0);
  ordered_parallel(
      samples.size(), threads,
      [&](std::size_t i, std::size_t) {
        const auto b = model::score_sample(model, samples[i]);
        correct[i] = static_cast<int>(b.prediction) == samples[i].answer ? 1 : 0;
      },
      [](std::size_t, std::size_t) {});
  const auto hits = static_cast<double>(std::count(correct.begin(), correct.end(), 1));
  return hits / static_cast<double>(samples.size());
}

nn::GradCheckResult check_gradients(Model& model, const std::vector<EncodedSample>& samples, double lambda,
                                    double epsilon) {
  if (samples.empty()) throw DataError("no samples");
  std::vector<const EncodedSample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  nn::GradientSet grads(model.params());
  batch_gradient(model, batch, lambda, grads, std::nullopt);
  return nn::finite_difference_check([&] { return batch_loss(model, batch, lambda); }, model.params(), grads,
                                     epsilon);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "step,epoch,train_loss,dev_accuracy\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.epoch << ',' << fmt::format("{:.17g}", r.train_loss) << ',';
    if (r.dev_accuracy) out << fmt::format("{:.17g}", *r.dev_accuracy);
    out << '\n';
  }
}

TrainResult train_model(Model& model, const std::vector<EncodedSample>& train_set,
                        const std::vector<EncodedSample>* dev_set, const TrainConfig& config,
                        const ProgressFn& progress) {
  config.validate();
  if (train_set.empty()) throw DataError("no samples");
  auto& params = model.params();
  OptimizerState state(params);
  nn::GradientSet grads(params);
  TrainResult result;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<nn::Tensor> best;
  std::size_t step = 0, since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const EncodedSample*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&train_set[order[k]]);
      ++step;
      const auto bl = batch_gradient(model, batch, config.lambda, grads, derive_seed(config.seed, "dropout", step),
                                     config.threads);
      if (!std::isfinite(bl.loss) || !grads.all_finite()) {
        throw NumericError("non-finite loss at step " + std::to_string(step));
      }
      adam_step(params, grads, state, config);
      result.metrics.push_back({step, epoch, bl.loss, std::nullopt});
      loss_sum += bl.loss;
      ++batches;
    }
    result.epochs_run = epoch;
    std::optional<double> dev_acc;
    if (dev_set != nullptr && !dev_set->empty()) {
      dev_acc = evaluate_accuracy(model, *dev_set, config.threads);
      result.metrics.back().dev_accuracy = dev_acc;
      if (*dev_acc > result.best_dev_accuracy) {
        result.best_dev_accuracy = *dev_acc;
        result.best_epoch = epoch;
        since_best = 0;
        best.clear();
        for (const auto& p : params.all()) best.push_back(p.value);
      } else {
        ++since_best;
      }
    }
    if (progress) progress(epoch, loss_sum / static_cast<double>(batches), dev_acc);
    if (config.patience > 0 && since_best >= config.patience) break;
  }
  if (!best.empty()) {
    for (std::size_t id = 0; id < params.size(); ++id) params[id].value = best[id];
  } else {
    result.best_epoch = result.epochs_run;
  }
  return result;
}

TrainedModel train(const std::vector<Sample>& train_samples, const std::vector<Sample>* dev_samples,
                   const ModelConfig& model_config, const TrainConfig& train_config, const ProgressFn& progress,
                   std::size_t min_count) {
  Vocabulary vocab = build_vocabulary(train_samples, min_count);
  Model model(model_config, vocab.size(), derive_seed(train_config.seed, "init"));
  const auto train_set = model::encode_corpus(train_samples, vocab, model_config);
  std::vector<EncodedSample> dev_set;
  if (dev_samples != nullptr) dev_set = model::encode_corpus(*dev_samples, vocab, model_config);
  auto result = train_model(model, train_set, dev_samples ? &dev_set : nullptr, train_config, progress);
  return TrainedModel{std::move(model), std::move(vocab), std::move(result)};
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "score" || text == "score_variant") return SweepAxis::score_variant;
  if (text == "attention" || text == "attention_variant") return SweepAxis::attention_variant;
  if (text == "mask" || text == "mask_set") return SweepAxis::mask_set;
  if (text == "chain-text" || text == "chain_text") return SweepAxis::chain_text;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected score|attention|mask|chain-text)");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::score_variant: return "score";
    case SweepAxis::attention_variant: return "attention";
    case SweepAxis::mask_set: return "mask";
    case SweepAxis::chain_text: return "chain-text";
  }
  return "score";
}

std::string AblationReport::to_csv() const {
  std::ostringstream out;
  out << "cell,accuracy,delta\n";
  for (const auto& r : rows) {
    out << r.cell << ',' << fmt::format("{:.2f}", r.accuracy) << ',';
    out << (r.delta ? fmt::format("{:.2f}", *r.delta) : std::string("/")) << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::string, text::MaskSet>> mask_sweep_cells() {
  auto m = [](std::string_view csv) { return text::MaskSet::parse(csv); };
  return {
      {"All", m("")},         {"-V", m("V")},
      {"-N", m("N")},         {"-J", m("J")},
      {"-R", m("R")},         {"-V(self)", m("V_self")},
      {"-V(others)", m("V_others")}, {"-V&N", m("V,N")},
      {"-V&R", m("V,R")},     {"-N&J", m("N,J")},
      {"-R&J", m("R,J")},
  };
}

namespace {

// Deltas against the best row, which is marked as the reference.
void delta_against_best(std::vector<AblationRow>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].accuracy > rows[best].accuracy) best = i;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == best) {
      rows[i].delta.reset();
    } else {
      rows[i].delta = rows[i].accuracy - rows[best].accuracy;
    }
  }
}

double train_and_evaluate(const std::vector<Sample>& train_samples, const std::vector<Sample>& eval_samples,
                          const ModelConfig& model_config, const TrainConfig& train_config,
                          const ProgressFn& progress) {
  auto trained = train(train_samples, &eval_samples, model_config, train_config, progress);
  const auto eval_set = model::encode_corpus(eval_samples, trained.vocab, model_config);
  return 100.0 * evaluate_accuracy(trained.model, eval_set, train_config.threads);
}

}  // namespace

AblationReport run_mask_ablation(const Model& model, const Vocabulary& vocab, const std::vector<Sample>& eval_samples,
                                 std::size_t threads) {
  AblationReport report;
  report.axis = SweepAxis::mask_set;
  for (const auto& [label, mask] : mask_sweep_cells()) {
    const auto eval_set = model::encode_corpus(eval_samples, vocab, model.config(), mask);
    report.rows.push_back({label, 100.0 * evaluate_accuracy(model, eval_set, threads), std::nullopt});
  }
  const double reference = report.rows.front().accuracy;
  for (std::size_t i = 1; i < report.rows.size(); ++i) report.rows[i].delta = report.rows[i].accuracy - reference;
  return report;
}

AblationReport run_ablation(SweepAxis axis, const std::vector<Sample>& train_samples,
                            const std::vector<Sample>& eval_samples, const ModelConfig& base_model,
                            const TrainConfig& base_train, const ProgressFn& progress) {
  AblationReport report;
  report.axis = axis;
  switch (axis) {
    case SweepAxis::score_variant: {
      static constexpr std::pair<ScoreVariant, const char*> cells[] = {
          {ScoreVariant::E, "E-Score"}, {ScoreVariant::C, "C-Score"},
          {ScoreVariant::M, "M-Score"}, {ScoreVariant::L, "L-Score"}};
      for (const auto& [variant, label] : cells) {
        ModelConfig cfg = base_model;
        cfg.score_variant = variant;
        report.rows.push_back({label, train_and_evaluate(train_samples, eval_samples, cfg, base_train, progress), {}});
      }
      std::stable_sort(report.rows.begin(), report.rows.end(),
                       [](const AblationRow& a, const AblationRow& b) { return a.accuracy > b.accuracy; });
      delta_against_best(report.rows);
      break;
    }
    case SweepAxis::attention_variant: {
      static constexpr std::pair<AttentionVariant, const char*> cells[] = {
          {AttentionVariant::scaled_dot, "scaled-dot"}, {AttentionVariant::dot, "dot"},
          {AttentionVariant::additive, "additive"}, {AttentionVariant::avg, "avg"}};
      for (const auto& [variant, label] : cells) {
        ModelConfig cfg = base_model;
        cfg.attention_variant = variant;
        report.rows.push_back({label, train_and_evaluate(train_samples, eval_samples, cfg, base_train, progress), {}});
      }
      std::stable_sort(report.rows.begin(), report.rows.end(),
                       [](const AblationRow& a, const AblationRow& b) { return a.accuracy > b.accuracy; });
      delta_against_best(report.rows);
      break;
    }
    case SweepAxis::chain_text: {
      static constexpr struct {
        bool multi;
        bool text;
        const char* label;
      } cells[] = {{false, false, "single/no-text"},
                   {true, false, "multi/no-text"},
                   {false, true, "single/text"},
                   {true, true, "multi/text"}};
      for (const auto& cell : cells) {
        ModelConfig cfg = base_model;
        cfg.multi_chain = cell.multi;
        cfg.use_text = cell.text;
        report.rows.push_back(
            {cell.label, train_and_evaluate(train_samples, eval_samples, cfg, base_train, progress), {}});
      }
      delta_against_best(report.rows);
      break;
    }
    case SweepAxis::mask_set: {
      auto trained = train(train_samples, &eval_samples, base_model, base_train, progress);
      report = run_mask_ablation(trained.model, trained.vocab, eval_samples, base_train.threads);
      break;
    }
  }
  return report;
}

}  // namespace mcpred::train
