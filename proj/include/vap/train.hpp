#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "vap/ingest.hpp"
#include "vap/model.hpp"

namespace vap {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 3.63e-4;
  double weight_decay = 0.001;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  int effective_batch = 256;
  int accumulation_steps = 16;
  int early_stopping_epochs = 5;
  double loss_lambda = 1.0;  // weight of the future-VAD term
  int max_epochs = 200;
  std::uint64_t seed = 0;
  std::string variant = "Baseline1";
  double window_s = kWindowSeconds;
  double train_hop_s = kWindowSeconds;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int micro_batch() const { return effective_batch / accumulation_steps; }

  void validate() const {
    require<ConfigError>(learning_rate > 0 && weight_decay >= 0, "rates must be positive");
    require<ConfigError>(plateau_factor > 0 && plateau_factor < 1, "plateau factor in (0,1)");
    require<ConfigError>(plateau_patience >= 1 && early_stopping_epochs >= 1,
                         "patience values must be >= 1");
    require<ConfigError>(effective_batch >= 1 && accumulation_steps >= 1 &&
                             effective_batch % accumulation_steps == 0,
                         "effective batch must be micro_batch * accumulation_steps");
    require<ConfigError>(loss_lambda >= 0, "loss lambda must be >= 0");
    require<ConfigError>(max_epochs >= 1, "max_epochs must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

template <typename S>
struct MultitaskLoss {
  Var<S> total;       // vap_ce + lambda * future_bce
  Var<S> vap_ce;      // cross-entropy over the 256 states
  Var<S> future_bce;  // binary cross-entropy on the 2 s-ahead activity
};

// Mean-reduced over unmasked frames; throws on a fully masked window.
template <typename S>
MultitaskLoss<S> multitask_loss(const ModelOutput<S>& output, const std::vector<int>& target_vap,
                                const Tensor<S>& target_future,
                                const std::vector<std::uint8_t>& mask, S lambda) {
  MultitaskLoss<S> loss;
  loss.vap_ce = softmax_cross_entropy(output.vap_logits, target_vap, mask);
  loss.future_bce = bce_with_logits(output.future_logits, target_future, mask);
  loss.total = lambda == S(0) ? loss.vap_ce : add(loss.vap_ce, scale(loss.future_bce, lambda));
  return loss;
}

// ---------------------------------------------------------------------------
// Optimizer and schedules
// ---------------------------------------------------------------------------

// Adam with decoupled weight decay. Parameters with untouched gradients are
// treated as having zero gradient.
template <typename S>
class AdamW {
 public:
  AdamW(std::vector<ParamRef<S>>& params, const TrainConfig& config)
      : params_(&params),
        lr_(static_cast<S>(config.learning_rate)),
        weight_decay_(static_cast<S>(config.weight_decay)),
        beta1_(static_cast<S>(config.adam_beta1)),
        beta2_(static_cast<S>(config.adam_beta2)),
        eps_(static_cast<S>(config.adam_eps)) {
    for (const auto& p : params) {
      m_.emplace_back(p.var->value.shape);
      v_.emplace_back(p.var->value.shape);
    }
  }

  S learning_rate() const { return lr_; }
  void set_learning_rate(S lr) { lr_ = lr; }

  void step() {
    ++t_;
    const S bc1 = S(1) - std::pow(beta1_, static_cast<S>(t_));
    const S bc2 = S(1) - std::pow(beta2_, static_cast<S>(t_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
      auto& p = (*params_)[i].var;
      const bool has_grad = !p->grad.data.empty();
      for (std::size_t k = 0; k < p->value.data.size(); ++k) {
        const S g = has_grad ? p->grad.data[k] : S(0);
        m_[i].data[k] = beta1_ * m_[i].data[k] + (S(1) - beta1_) * g;
        v_[i].data[k] = beta2_ * v_[i].data[k] + (S(1) - beta2_) * g * g;
        const S m_hat = m_[i].data[k] / bc1;
        const S v_hat = v_[i].data[k] / bc2;
        p->value.data[k] -=
            lr_ * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay_ * p->value.data[k]);
      }
    }
  }

  void zero_grad() {
    for (auto& p : *params_) p.var->grad = Tensor<S>();
  }

 private:
  std::vector<ParamRef<S>>* params_;
  std::vector<Tensor<S>> m_, v_;
  long t_ = 0;
  S lr_;
  S weight_decay_, beta1_, beta2_, eps_;
};

// Halve-on-stall schedule: fires only after `patience` consecutive
// non-improving checks, then resets its counter.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double factor, int patience) : factor_(factor), patience_(patience) {}

  // returns true when the learning rate was reduced at this check
  bool check(double metric, double& learning_rate) {
    if (metric < best_) {
      best_ = metric;
      stale_ = 0;
      return false;
    }
    if (++stale_ >= patience_) {
      learning_rate *= factor_;
      stale_ = 0;
      return true;
    }
    return false;
  }

 private:
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

// ---------------------------------------------------------------------------
// Dataset split
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<int> train, val, test;
};

// Dialogue-granularity split (windows of one dialogue never cross splits).
// Sizes are floor(ratio * n) with the remainder assigned to train.
inline DatasetSplit split_dataset(int n_dialogues, std::array<double, 3> ratios,
                                  std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  require<ConfigError>(std::abs(sum - 1.0) < 1e-9, "split ratios must sum to 1");
  int n_val = static_cast<int>(std::floor(ratios[1] * n_dialogues));
  int n_test = static_cast<int>(std::floor(ratios[2] * n_dialogues));
  int n_train = n_dialogues - n_val - n_test;
  int needed = (ratios[0] > 0 ? 1 : 0) + (ratios[1] > 0 ? 1 : 0) + (ratios[2] > 0 ? 1 : 0);
  require<ConfigError>(n_dialogues >= needed, "fewer dialogues than requested splits");
  std::vector<int> order(static_cast<std::size_t>(n_dialogues));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x5eedf00dull);
  rng.shuffle(order);
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

// ---------------------------------------------------------------------------
// Window dataset (windows built on demand; dialogues stay compact in RAM)
// ---------------------------------------------------------------------------

template <typename S>
class WindowDataset {
 public:
  WindowDataset() = default;
  WindowDataset(std::vector<LoadedDialogue> dialogues, double window_s, double hop_s,
                const BinLayout& layout = BinLayout::standard())
      : dialogues_(std::move(dialogues)), window_s_(window_s), layout_(layout) {
    for (std::size_t d = 0; d < dialogues_.size(); ++d)
      for (int start : window_starts(dialogues_[d].frames(), dialogues_[d].frame_rate_hz,
                                     window_s, hop_s, layout.total_frames))
        index_.push_back({static_cast<int>(d), start});
  }

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  DialogueWindow<S> get(std::size_t i) const {
    const auto& [d, start] = index_[i];
    return build_window<S>(dialogues_[static_cast<std::size_t>(d)], start, window_s_, layout_);
  }

  const std::vector<LoadedDialogue>& dialogues() const { return dialogues_; }

 private:
  std::vector<LoadedDialogue> dialogues_;
  double window_s_ = kWindowSeconds;
  BinLayout layout_ = BinLayout::standard();
  std::vector<std::pair<int, int>> index_;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  long step = 0;  // optimizer updates so far
  double train_total = 0, train_ce = 0, train_bce = 0;
  double val_total = 0, val_ce = 0, val_bce = 0;
  double learning_rate = 0;
};

struct TrainOutcome {
  std::vector<EpochStats> epochs;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  long updates = 0;
  bool stopped_early = false;
};

inline void write_metrics_header(std::ostream& out) {
  out << "epoch,step,split,loss_total,loss_vap_ce,loss_future_bce,lr\n";
}

inline void write_metrics_row(std::ostream& out, int epoch, long step, const char* split,
                              double total, double ce, double bce, double lr) {
  out << epoch << ',' << step << ',' << split << ',' << total << ',' << ce << ',' << bce << ','
      << lr << '\n';
}

// AdamW + gradient accumulation + plateau schedule + early stopping. The best
// validation weights are restored into the model before returning; when
// checkpoint_path is set they are also written there.
template <typename S>
TrainOutcome train_loop(VapModel<S>& model, const TrainConfig& config,
                        const WindowDataset<S>& train_set, const WindowDataset<S>& val_set,
                        std::ostream* metrics = nullptr,
                        const std::string& checkpoint_path = "") {
  config.validate();
  require<ConfigError>(!train_set.empty() && !val_set.empty(),
                       "train and validation sets must be non-empty");
  AdamW<S> optimizer(model.params(), config);
  ReduceOnPlateau scheduler(config.plateau_factor, config.plateau_patience);
  TrainOutcome outcome;
  if (metrics) write_metrics_header(*metrics);

  const int micro = config.micro_batch();
  std::vector<Tensor<S>> best_weights;
  int stale_epochs = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(config.seed) ^ static_cast<std::uint64_t>(epoch + 1));
    shuffle_rng.shuffle(order);

    double sum_total = 0, sum_ce = 0, sum_bce = 0;
    optimizer.zero_grad();
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_n = std::min<std::size_t>(
          static_cast<std::size_t>(config.effective_batch), order.size() - cursor);
      const S inv = S(1) / static_cast<S>(batch_n);
      std::size_t done = 0;
      while (done < batch_n) {
        const std::size_t micro_n = std::min<std::size_t>(static_cast<std::size_t>(micro),
                                                          batch_n - done);
        for (std::size_t k = 0; k < micro_n; ++k) {
          const std::size_t w = order[cursor + done + k];
          DialogueWindow<S> window = train_set.get(w);
          ModelOutput<S> out = model.predict(window.input);
          MultitaskLoss<S> loss =
              multitask_loss(out, window.target_vap, window.target_future, window.mask,
                             static_cast<S>(config.loss_lambda));
          const double total = static_cast<double>(loss.total->value.data[0]);
          if (!std::isfinite(total))
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch window " + std::to_string(cursor + done + k) +
                                " (dialogue " + window.dialogue_id + ", seed " +
                                std::to_string(config.seed) + ")");
          sum_total += total;
          sum_ce += static_cast<double>(loss.vap_ce->value.data[0]);
          sum_bce += static_cast<double>(loss.future_bce->value.data[0]);
          backward(scale(loss.total, inv));
        }
        done += micro_n;
      }
      optimizer.step();
      optimizer.zero_grad();
      ++outcome.updates;
      cursor += batch_n;
    }

    // validation
    double val_total = 0, val_ce = 0, val_bce = 0;
    {
      NoGradGuard guard;
      for (std::size_t w = 0; w < val_set.size(); ++w) {
        DialogueWindow<S> window = val_set.get(w);
        ModelOutput<S> out = model.predict(window.input);
        // losses on plain values (no graph)
        auto logits = make_constant(out.vap_logits->value);
        auto future = make_constant(out.future_logits->value);
        val_ce += static_cast<double>(
            softmax_cross_entropy(logits, window.target_vap, window.mask)->value.data[0]);
        val_bce += static_cast<double>(
            bce_with_logits(future, window.target_future, window.mask)->value.data[0]);
      }
      val_ce /= static_cast<double>(val_set.size());
      val_bce /= static_cast<double>(val_set.size());
      val_total = val_ce + config.loss_lambda * val_bce;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.step = outcome.updates;
    stats.train_total = sum_total / static_cast<double>(train_set.size());
    stats.train_ce = sum_ce / static_cast<double>(train_set.size());
    stats.train_bce = sum_bce / static_cast<double>(train_set.size());
    stats.val_total = val_total;
    stats.val_ce = val_ce;
    stats.val_bce = val_bce;
    stats.learning_rate = static_cast<double>(optimizer.learning_rate());
    outcome.epochs.push_back(stats);
    if (metrics) {
      write_metrics_row(*metrics, epoch, outcome.updates, "train", stats.train_total,
                        stats.train_ce, stats.train_bce, stats.learning_rate);
      write_metrics_row(*metrics, epoch, outcome.updates, "val", val_total, val_ce, val_bce,
                        stats.learning_rate);
      metrics->flush();
    }

    if (val_total < outcome.best_val_loss) {
      outcome.best_val_loss = val_total;
      outcome.best_epoch = epoch;
      stale_epochs = 0;
      best_weights.clear();
      for (const auto& p : model.params()) best_weights.push_back(p.var->value);
    } else {
      ++stale_epochs;
    }

    double lr = static_cast<double>(optimizer.learning_rate());
    scheduler.check(val_total, lr);
    optimizer.set_learning_rate(static_cast<S>(lr));

    if (stale_epochs >= config.early_stopping_epochs) {
      outcome.stopped_early = true;
      break;
    }
  }

  if (!best_weights.empty())
    for (std::size_t i = 0; i < model.params().size(); ++i)
      model.params()[i].var->value = best_weights[i];
  if (!checkpoint_path.empty()) {
    nlohmann::json extra;
    extra["training"] = {{"best_val_loss", outcome.best_val_loss},
                         {"best_epoch", outcome.best_epoch},
                         {"epochs_run", outcome.epochs.size()},
                         {"updates", outcome.updates},
                         {"loss_lambda", config.loss_lambda},
                         {"seed", config.seed},
                         {"stopped_early", outcome.stopped_early}};
    model.save(checkpoint_path, extra);
  }
  return outcome;
}

}  // namespace vap
