#pragma once

// Training loop: per sample draw t, plan and corrupt, drop DEL rows, apply
// conditional dropout, evaluate the weighted loss; one optimizer step per
// batch. fit() adds shuffling, validation cross-entropies, a JSON-lines log
// and resumable checkpoints.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "griddd/checkpoint.hpp"
#include "griddd/dataset.hpp"
#include "griddd/forward_process.hpp"
#include "griddd/neural_denoiser.hpp"
#include "griddd/optimizer.hpp"
#include "griddd/schedules.hpp"

namespace griddd {

struct TrainConfig {
  ScheduleParams schedule;
  SizeParams size;
  LossWeights weights;
  double rho = 0.1;
  nn::AdamConfig adam;
  int batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> guide_properties;
  int checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::string checkpoint_path;
  std::string log_path;
  int validation_samples = 1;  // corrupted draws per validation record
  bool fixed_size = false;      // edit-free plans (padding variant)
};

struct StepMetrics {
  long step = 0;
  std::vector<int> t_drawn;
  LossTerms loss;  // batch means
};

struct ValidationMetrics {
  double xce = 0.0;
  double ece = 0.0;
};

struct EpochSummary {
  int epoch = 0;
  LossTerms mean_loss;
  std::optional<ValidationMetrics> validation;
};

/// Mean and standard deviation of each named property, for guide normalization.
inline std::pair<std::vector<double>, std::vector<double>> guide_normalization(
    const std::vector<DatasetRecord>& records, const std::vector<std::string>& names) {
  std::vector<double> mean(names.size(), 0.0), sd(names.size(), 1.0);
  if (records.empty() || names.empty()) return {mean, sd};
  for (std::size_t k = 0; k < names.size(); ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& r : records) {
      const double v = property_vector(r, {names[k]})(0);
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(records.size());
    mean[k] = s / n;
    const double var = std::max(0.0, s2 / n - mean[k] * mean[k]);
    sd[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return {mean, sd};
}

class Trainer {
 public:
  Trainer(NeuralDenoiser& model, TrainConfig cfg, DatasetStats stats)
      : model_(&model),
        cfg_(std::move(cfg)),
        stats_(std::move(stats)),
        sched_(cfg_.schedule),
        opt_(model.parameters(), cfg_.adam),
        rng_(cfg_.seed) {
    if (model.config().T != cfg_.schedule.T) throw CompatibilityError("model and schedule disagree on T");
    if (cfg_.batch_size < 1) throw ConfigError("batch size must be positive", "batch_size");
    if (cfg_.epochs < 0) throw ConfigError("epochs must be non-negative", "epochs");
    if (static_cast<int>(cfg_.guide_properties.size()) != model.config().guide_dim)
      throw CompatibilityError("guide property count does not match the model's guide_dim");
    if (cfg_.size.n_max < stats_.n_max) throw ConfigError("n_max is smaller than the largest dataset graph", "n_max");
  }

  const ScheduleSet& schedule() const { return sched_; }
  const nn::Adam& optimizer() const { return opt_; }
  long steps() const { return step_; }
  int epochs_done() const { return epoch_; }

  /// Corrupted training sample at a uniformly drawn t (or a fixed one).
  TrainingExample make_example(const DatasetRecord& rec, Rng& rng, bool dropout = true, int fixed_t = 0) const {
    const int T = sched_.T();
    const int t = fixed_t > 0 ? fixed_t : std::uniform_int_distribution<int>(1, T)(rng);
    const ForwardPlan plan = cfg_.fixed_size ? make_identity_plan(rec.graph)
                                             : make_forward_plan(rec.graph, sched_, cfg_.size, rec.marginals, rng);
    const CorruptedSample cs = corrupt_with_targets(rec.graph, plan, t, sched_, stats_.noise(), rng);
    const CategorySpace& space = rec.graph.space();
    const int n = cs.state.size();
    std::vector<bool> keep(static_cast<std::size_t>(n));
    std::vector<int> kept;
    for (int i = 0; i < n; ++i) {
      keep[static_cast<std::size_t>(i)] = cs.state.node(i) != space.node_del();
      if (keep[static_cast<std::size_t>(i)]) kept.push_back(i);
    }
    TrainingExample ex;
    ex.input = cs.state.select(keep);
    const int m = ex.input.size();
    for (int a = 0; a < m; ++a) {
      const int i = kept[static_cast<std::size_t>(a)];
      ex.targets.nodes.push_back(cs.node_targets[static_cast<std::size_t>(i)]);
      ex.targets.times.push_back(cs.state.activation(i));
      for (int b = 0; b < m; ++b) ex.targets.edges.push_back(cs.edge_target(i, kept[static_cast<std::size_t>(b)]));
    }
    ex.n_del = ex.input.count_nodes(space.node_del_star());
    ex.count_input = strip_marked_nodes(ex.input, DeletionMark::del_star);
    ex.include_del = sched_.zeta_prime(t) > 0.0 && cfg_.weights.del != 0.0;
    GuideVector y = GuideVector::none();
    if (!cfg_.guide_properties.empty()) y = GuideVector::of(property_vector(rec, cfg_.guide_properties));
    ex.guide = dropout && !y.placeholder ? apply_conditional_dropout(y, cfg_.rho, rng) : y;
    return ex;
  }

  StepMetrics train_step(const std::vector<const DatasetRecord*>& batch, Rng& rng) {
    if (batch.empty()) throw Error("empty batch");
    auto& ps = model_->parameters();
    ps.zero_grad();
    StepMetrics m;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const DatasetRecord* rec : batch) {
      const TrainingExample ex = make_example(*rec, rng);
      m.t_drawn.push_back(ex.input.timestep());
      nn::Tape tp;
      const LossVars l = model_->training_loss(tp, ex, cfg_.weights);
      const double total = tp.scalar(l.total);
      if (!std::isfinite(total)) throw Error("non-finite loss at step " + std::to_string(step_) + ", t = " +
                                             std::to_string(ex.input.timestep()) + ", sample " +
                                             graph_to_json(ex.input).dump());
      tp.backward(nn::scale(tp, l.total, scale));
      m.loss.x += scale * tp.scalar(l.x);
      m.loss.e += scale * tp.scalar(l.e);
      m.loss.s += scale * tp.scalar(l.s);
      m.loss.del += scale * tp.scalar(l.del);
      m.loss.total += scale * total;
    }
    if (!ps.all_finite()) throw Error("non-finite gradient at step " + std::to_string(step_));
    opt_.step(ps);
    m.step = ++step_;
    return m;
  }

  /// Mean node and edge cross-entropies on corrupted validation samples
  /// drawn from a fixed stream.
  ValidationMetrics validate(const std::vector<DatasetRecord>& records) const {
    ValidationMetrics v;
    if (records.empty()) return v;
    Rng rng = derive_rng(cfg_.seed, 0x76616c);
    double xs = 0.0, es = 0.0;
    long count = 0;
    for (const auto& r : records)
      for (int k = 0; k < cfg_.validation_samples; ++k) {
        const TrainingExample ex = make_example(r, rng, false);
        const DenoiserOutput out = model_->predict(ex.input, ex.guide);
        const LossTerms l = compute_loss(out, ex.targets, Eigen::VectorXd::Ones(1), 0, {1.0, 1.0, 0.0, 0.0}, false);
        xs += l.x;
        es += l.e;
        ++count;
      }
    v.xce = xs / static_cast<double>(count);
    v.ece = es / static_cast<double>(count);
    return v;
  }

  json train_state() const {
    return {{"epoch", epoch_}, {"step", step_}, {"rng", rng_state(rng_)}, {"seed", cfg_.seed}};
  }

  /// Continues from a checkpoint written by fit() with the same configuration.
  void resume(const Checkpoint& ck) {
    if (!ck.optimizer) throw CompatibilityError("checkpoint has no optimizer state");
    auto& dst = model_->parameters().all();
    const auto& src = ck.model->parameters().all();
    if (dst.size() != src.size()) throw CompatibilityError("checkpoint parameters do not match the model");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i].name != src[i].name || dst[i].value.rows() != src[i].value.rows() ||
          dst[i].value.cols() != src[i].value.cols())
        throw CompatibilityError("checkpoint parameter mismatch at " + dst[i].name);
      dst[i].value = src[i].value;
    }
    opt_ = *ck.optimizer;
    try {
      epoch_ = ck.train_state.at("epoch").get<int>();
      step_ = ck.train_state.at("step").get<long>();
      restore_rng_state(rng_, ck.train_state.at("rng").get<std::string>());
    } catch (const json::exception& e) {
      throw CompatibilityError(std::string("checkpoint train state: ") + e.what());
    }
  }

  /// Runs epochs up to cfg.epochs (continuing after resume()).
  std::vector<EpochSummary> fit(const std::vector<DatasetRecord>& train, const std::vector<DatasetRecord>& val = {},
                                const json& run_config = {}) {
    if (train.empty()) throw Error("cannot fit on an empty dataset");
    std::ofstream log;
    if (!cfg_.log_path.empty()) {
      log.open(cfg_.log_path, step_ > 0 ? std::ios::app : std::ios::trunc);
      if (!log) throw Error("cannot write training log " + cfg_.log_path);
    }
    const auto start = std::chrono::steady_clock::now();
    std::vector<EpochSummary> out;
    std::vector<std::size_t> order(train.size());
    while (epoch_ < cfg_.epochs) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng_);
      EpochSummary es;
      es.epoch = epoch_ + 1;
      int batches = 0;
      for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg_.batch_size)) {
        std::vector<const DatasetRecord*> batch;
        for (std::size_t k = b; k < std::min(order.size(), b + static_cast<std::size_t>(cfg_.batch_size)); ++k)
          batch.push_back(&train[order[k]]);
        const StepMetrics m = train_step(batch, rng_);
        es.mean_loss.x += m.loss.x;
        es.mean_loss.e += m.loss.e;
        es.mean_loss.s += m.loss.s;
        es.mean_loss.del += m.loss.del;
        es.mean_loss.total += m.loss.total;
        ++batches;
        if (log) {
          const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          log << json{{"step", m.step},
                      {"epoch", es.epoch},
                      {"t_drawn", m.t_drawn},
                      {"loss", {{"x", m.loss.x}, {"e", m.loss.e}, {"s", m.loss.s}, {"del", m.loss.del}, {"total", m.loss.total}}},
                      {"wall_time", wall}}
                     .dump()
              << '\n';
        }
      }
      for (double* v : {&es.mean_loss.x, &es.mean_loss.e, &es.mean_loss.s, &es.mean_loss.del, &es.mean_loss.total})
        *v /= batches;
      ++epoch_;
      if (!val.empty()) es.validation = validate(val);
      out.push_back(es);
      const bool periodic = cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0;
      if (!cfg_.checkpoint_path.empty() && (periodic || epoch_ == cfg_.epochs))
        save_checkpoint(cfg_.checkpoint_path, *model_, &opt_, train_state(), run_config);
    }
    if (cfg_.epochs == 0 && !cfg_.checkpoint_path.empty())
      save_checkpoint(cfg_.checkpoint_path, *model_, &opt_, train_state(), run_config);
    return out;
  }

 private:
  NeuralDenoiser* model_;
  TrainConfig cfg_;
  DatasetStats stats_;
  ScheduleSet sched_;
  nn::Adam opt_;
  Rng rng_;
  long step_ = 0;
  int epoch_ = 0;
};

}  // namespace griddd
