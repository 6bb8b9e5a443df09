#pragma once

// Run configuration: one JSON document with sections schedule, model,
// train, sample, eval, dataset and a top-level seed. Missing keys take the
// defaults below; unknown keys are rejected with the offending key path.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "griddd/checkpoint.hpp"
#include "griddd/dataset.hpp"
#include "griddd/optimizer.hpp"
#include "griddd/schedules.hpp"
#include "griddd/trainer.hpp"

namespace griddd {

struct ModelSection {
  int hidden = 64;
  int layers = 2;
  int count_hidden = 16;
  int count_layers = 1;
  int max_del_count = 4;
};

struct TrainSection {
  LossWeights weights;
  double rho = 0.1;
  double lr = 3e-4;
  double clip_norm = 1.0;
  int batch_size = 16;
  int epochs = 10;
  std::vector<std::string> guide;
  int checkpoint_every = 0;
  int validation_samples = 1;
  bool padding = false;
  std::string checkpoint = "checkpoint.json";
  std::string log = "train_log.jsonl";
};

struct SampleSection {
  int count = 100;
  int size = 0;  // 0: drawn from the training size distribution
  double guidance_scale = 2.0;
  bool argmax_times = false;
  bool argmax_count = false;
  int jobs = 1;
};

struct EvalSection {
  std::string property = "mw";
  int targets = 20;
  int samples_per_target = 10;
  int steps = 100;  // capped at T when not given
  int candidates = 20;
  double delta = 0.4;
  double success_lo = 0.0;
  double success_hi = 0.0;
};

struct DatasetSection {
  std::string path;  // empty: generate the toy family
  std::vector<std::string> atoms{"C", "O"};
  std::vector<std::string> bonds{"no-bond", "single"};
  ToySpec toy;
  double train_frac = 0.8;
  double val_frac = 0.1;
  std::string stats_cache;
};

struct RunConfig {
  ScheduleParams schedule;
  SizeParams size;  // n_max = 0 takes the largest dataset graph
  ModelSection model;
  TrainSection train;
  SampleSection sample;
  EvalSection eval;
  DatasetSection dataset;
  std::uint64_t seed = 0;

  RunConfig() {
    schedule.T = 50;
    schedule.D = 25.0;
    size.n_max = 0;
  }
};

namespace detail {

// Reads declared keys of one JSON object and rejects the rest.
class SectionReader {
 public:
  SectionReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError("section must be a JSON object", prefix_.empty() ? "<root>" : prefix_);
  }

  template <class T>
  bool get(const std::string& key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type for configuration key", path(key));
    }
    return true;
  }

  const json* section(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key())) throw ConfigError("unknown configuration key", path(it.key()));
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> known_;
};

inline void require(bool ok, const std::string& what, const std::string& key) {
  if (!ok) throw ConfigError(what, key);
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::SectionReader root(j, "");
  root.get("seed", c.seed);
  if (const json* s = root.section("schedule")) {
    detail::SectionReader r(*s, "schedule");
    r.get("T", c.schedule.T);
    c.schedule.D = c.schedule.T / 2.0;
    r.get("w", c.schedule.w);
    r.get("D", c.schedule.D);
    r.get("nu_nodes", c.schedule.nu_nodes);
    r.get("nu_edges", c.schedule.nu_edges);
    r.get("offset", c.schedule.offset);
    r.get("p_min", c.size.p_min);
    r.get("p_max", c.size.p_max);
    r.get("n_max", c.size.n_max);
    r.finish();
  }
  if (const json* s = root.section("model")) {
    detail::SectionReader r(*s, "model");
    r.get("hidden", c.model.hidden);
    r.get("layers", c.model.layers);
    r.get("count_hidden", c.model.count_hidden);
    r.get("count_layers", c.model.count_layers);
    r.get("max_del_count", c.model.max_del_count);
    r.finish();
  }
  if (const json* s = root.section("train")) {
    detail::SectionReader r(*s, "train");
    r.get("lambda_x", c.train.weights.x);
    r.get("lambda_e", c.train.weights.e);
    r.get("lambda_s", c.train.weights.s);
    r.get("lambda_del", c.train.weights.del);
    r.get("rho", c.train.rho);
    r.get("lr", c.train.lr);
    r.get("clip_norm", c.train.clip_norm);
    r.get("batch_size", c.train.batch_size);
    r.get("epochs", c.train.epochs);
    r.get("guide", c.train.guide);
    r.get("checkpoint_every", c.train.checkpoint_every);
    r.get("validation_samples", c.train.validation_samples);
    r.get("padding", c.train.padding);
    r.get("checkpoint", c.train.checkpoint);
    r.get("log", c.train.log);
    r.finish();
  }
  if (const json* s = root.section("sample")) {
    detail::SectionReader r(*s, "sample");
    r.get("count", c.sample.count);
    r.get("size", c.sample.size);
    r.get("guidance_scale", c.sample.guidance_scale);
    r.get("argmax_times", c.sample.argmax_times);
    r.get("argmax_count", c.sample.argmax_count);
    r.get("jobs", c.sample.jobs);
    r.finish();
  }
  c.eval.steps = std::min(c.eval.steps, c.schedule.T);
  if (const json* s = root.section("eval")) {
    detail::SectionReader r(*s, "eval");
    r.get("property", c.eval.property);
    r.get("targets", c.eval.targets);
    r.get("samples_per_target", c.eval.samples_per_target);
    r.get("steps", c.eval.steps);
    r.get("candidates", c.eval.candidates);
    r.get("delta", c.eval.delta);
    r.get("success_lo", c.eval.success_lo);
    r.get("success_hi", c.eval.success_hi);
    r.finish();
  }
  if (const json* s = root.section("dataset")) {
    detail::SectionReader r(*s, "dataset");
    r.get("path", c.dataset.path);
    r.get("atoms", c.dataset.atoms);
    r.get("bonds", c.dataset.bonds);
    r.get("train_frac", c.dataset.train_frac);
    r.get("val_frac", c.dataset.val_frac);
    r.get("stats_cache", c.dataset.stats_cache);
    if (const json* t = r.section("toy")) {
      detail::SectionReader tr(*t, "dataset.toy");
      tr.get("family", c.dataset.toy.family);
      tr.get("max_nodes", c.dataset.toy.max_nodes);
      tr.get("weighting", c.dataset.toy.weighting);
      tr.get("samples", c.dataset.toy.samples);
      tr.finish();
    }
    r.finish();
  }
  root.finish();
  c.dataset.toy.atoms = c.dataset.atoms;
  c.dataset.toy.bonds = c.dataset.bonds;

  using detail::require;
  require(c.schedule.T >= 2, "T must be at least 2", "schedule.T");
  require(c.schedule.w > 0.0, "w must be positive", "schedule.w");
  require(c.schedule.D >= 0.0, "D must be non-negative", "schedule.D");
  require(c.schedule.nu_nodes > 0.0, "nu_nodes must be positive", "schedule.nu_nodes");
  require(c.schedule.nu_edges > 0.0, "nu_edges must be positive", "schedule.nu_edges");
  require(c.size.p_min > 0.0 && c.size.p_min <= c.size.p_max, "need 0 < p_min <= p_max", "schedule.p_min");
  require(c.size.n_max >= 0, "n_max must be non-negative", "schedule.n_max");
  require(c.model.hidden > 0 && c.model.layers >= 0, "model sizes must be positive", "model.hidden");
  require(c.model.count_hidden > 0 && c.model.count_layers >= 0, "count sizes must be positive", "model.count_hidden");
  require(c.model.max_del_count >= 1, "max_del_count must be at least 1", "model.max_del_count");
  require(c.train.rho >= 0.0 && c.train.rho <= 1.0, "rho must lie in [0, 1]", "train.rho");
  require(c.train.lr > 0.0, "learning rate must be positive", "train.lr");
  require(c.train.batch_size >= 1, "batch size must be positive", "train.batch_size");
  require(c.train.epochs >= 0, "epochs must be non-negative", "train.epochs");
  require(c.train.validation_samples >= 1, "validation_samples must be positive", "train.validation_samples");
  require(c.sample.count >= 0, "count must be non-negative", "sample.count");
  require(c.sample.size >= 0, "size must be non-negative", "sample.size");
  require(c.sample.jobs >= 1, "jobs must be positive", "sample.jobs");
  require(c.eval.property == "mw" || c.eval.property == "n", "property must be \"mw\" or \"n\"", "eval.property");
  require(c.eval.steps >= 0 && c.eval.steps <= c.schedule.T, "steps must lie in [0, T]", "eval.steps");
  require(c.eval.candidates >= 1, "candidates must be positive", "eval.candidates");
  require(c.dataset.train_frac > 0.0 && c.dataset.val_frac >= 0.0 && c.dataset.train_frac + c.dataset.val_frac <= 1.0,
          "split fractions must be positive and sum to at most 1", "dataset.train_frac");
  return c;
}

inline json config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"schedule",
           {{"T", c.schedule.T},
            {"w", c.schedule.w},
            {"D", c.schedule.D},
            {"nu_nodes", c.schedule.nu_nodes},
            {"nu_edges", c.schedule.nu_edges},
            {"offset", c.schedule.offset},
            {"p_min", c.size.p_min},
            {"p_max", c.size.p_max},
            {"n_max", c.size.n_max}}},
          {"model",
           {{"hidden", c.model.hidden},
            {"layers", c.model.layers},
            {"count_hidden", c.model.count_hidden},
            {"count_layers", c.model.count_layers},
            {"max_del_count", c.model.max_del_count}}},
          {"train",
           {{"lambda_x", c.train.weights.x},
            {"lambda_e", c.train.weights.e},
            {"lambda_s", c.train.weights.s},
            {"lambda_del", c.train.weights.del},
            {"rho", c.train.rho},
            {"lr", c.train.lr},
            {"clip_norm", c.train.clip_norm},
            {"batch_size", c.train.batch_size},
            {"epochs", c.train.epochs},
            {"guide", c.train.guide},
            {"checkpoint_every", c.train.checkpoint_every},
            {"validation_samples", c.train.validation_samples},
            {"padding", c.train.padding},
            {"checkpoint", c.train.checkpoint},
            {"log", c.train.log}}},
          {"sample",
           {{"count", c.sample.count},
            {"size", c.sample.size},
            {"guidance_scale", c.sample.guidance_scale},
            {"argmax_times", c.sample.argmax_times},
            {"argmax_count", c.sample.argmax_count},
            {"jobs", c.sample.jobs}}},
          {"eval",
           {{"property", c.eval.property},
            {"targets", c.eval.targets},
            {"samples_per_target", c.eval.samples_per_target},
            {"steps", c.eval.steps},
            {"candidates", c.eval.candidates},
            {"delta", c.eval.delta},
            {"success_lo", c.eval.success_lo},
            {"success_hi", c.eval.success_hi}}},
          {"dataset",
           {{"path", c.dataset.path},
            {"atoms", c.dataset.atoms},
            {"bonds", c.dataset.bonds},
            {"train_frac", c.dataset.train_frac},
            {"val_frac", c.dataset.val_frac},
            {"stats_cache", c.dataset.stats_cache},
            {"toy",
             {{"family", c.dataset.toy.family},
              {"max_nodes", c.dataset.toy.max_nodes},
              {"weighting", c.dataset.toy.weighting},
              {"samples", c.dataset.toy.samples}}}}}};
}

inline RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = load_json_file(path);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what(), "<file>");
  }
  return config_from_json(j);
}

/// Trainer settings derived from a run configuration.
inline TrainConfig train_config_from(const RunConfig& c, int n_max) {
  TrainConfig t;
  t.schedule = c.schedule;
  t.size = c.size;
  t.size.n_max = n_max;
  t.weights = c.train.weights;
  t.rho = c.train.rho;
  t.adam.lr = c.train.lr;
  t.adam.clip_norm = c.train.clip_norm;
  t.batch_size = c.train.batch_size;
  t.epochs = c.train.epochs;
  t.seed = c.seed;
  t.guide_properties = c.train.guide;
  t.checkpoint_every = c.train.checkpoint_every;
  t.checkpoint_path = c.train.checkpoint;
  t.log_path = c.train.log;
  t.validation_samples = c.train.validation_samples;
  t.fixed_size = c.train.padding;
  return t;
}

}  // namespace griddd
