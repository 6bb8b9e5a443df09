#pragma once

// Reverse process: from a noise latent of chosen size down to t = 0, with
// DEL* reinsertion, activation-time deletions and classifier-free guidance;
// plus the corrupt-then-denoise optimization mode.

#include <chrono>
#include <exception>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "griddd/denoiser.hpp"
#include "griddd/forward_process.hpp"
#include "griddd/graph.hpp"
#include "griddd/posterior.hpp"
#include "griddd/random.hpp"
#include "griddd/schedules.hpp"

namespace griddd {

struct SampleConfig {
  int initial_size = 0;                   // > 0: explicit n^T
  std::vector<double> size_distribution;  // used when initial_size == 0, indexed by n
  GuideVector guide;                      // placeholder: unconditional
  double guidance_scale = 2.0;
  bool argmax_times = false;
  bool argmax_count = false;
  bool fixed_size = false;  // no reinsertions and no deletions (padding variant)
  std::uint64_t seed = 0;
};

struct SampleDiagnostics {
  std::vector<int> sizes;  // size after each step, from t = start down to 1
  int conflicts = 0;       // steps with both a reinsertion and a deletion
  int insertions = 0;      // DEL* rows reinserted (deletions undone)
  int deletions = 0;       // rows removed at their activation time
  int guidance_fallbacks = 0;
  bool degenerate = false;
  double wall_seconds = 0.0;
};

struct SampleResult {
  GraphState graph;
  SampleDiagnostics diagnostics;
};

class Sampler {
 public:
  Sampler(const Denoiser& model, ScheduleSet sched, NoiseMarginals noise, CategorySpacePtr space)
      : model_(&model),
        sched_(std::move(sched)),
        noise_(std::move(noise)),
        space_(std::move(space)),
        nodes_(sched_, Channel::nodes, noise_.node),
        edges_(sched_, Channel::edges, noise_.edge) {
    if (model.num_timesteps() != sched_.T()) throw CompatibilityError("model and schedule disagree on T");
  }
  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  /// Noise latent G^T: labels and edges drawn from the dataset marginals.
  GraphState initial_latent(int n, Rng& rng) const {
    if (n < 1) throw ConfigError("initial size must be at least 1", "size");
    GraphState g(space_, sched_.T());
    for (int i = 0; i < n; ++i) g.add_node(sample_categorical(noise_.node, rng), 0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.set_edge(i, j, sample_categorical(noise_.edge, rng));
    return g;
  }

  SampleResult sample(const SampleConfig& cfg) const {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(cfg.seed);
    int n = cfg.initial_size;
    if (n <= 0) {
      if (cfg.size_distribution.empty()) throw ConfigError("no initial size and no size distribution", "size");
      n = sample_categorical(cfg.size_distribution, rng);
    }
    SampleResult r = run_chain(initial_latent(n, rng), sched_.T(), cfg, rng);
    r.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

  /// Reverse chain from an explicit state at step t_start (no DEL or DEL* rows).
  SampleResult run_chain(GraphState g, int t_start, const SampleConfig& cfg, Rng& rng) const {
    if (t_start < 0 || t_start > sched_.T()) throw ConfigError("start step out of range", "steps");
    if (g.has_reserved()) throw Error("reverse chain starts from a graph without DEL/DEL* rows");
    const CategorySpace& cs = *space_;
    SampleResult r;
    // Scale 0 is the unconditional sampler on every head.
    const GuideVector guide = cfg.guidance_scale == 0.0 ? GuideVector::none() : cfg.guide;
    const bool guided = !guide.placeholder && cfg.guidance_scale != 1.0;
    for (int t = t_start; t >= 1; --t) {
      g.set_timestep(t);
      if (g.empty()) {
        r.diagnostics.degenerate = true;
        break;
      }
      // (1) Reinsert DEL* nodes.
      int k = 0;
      if (!cfg.fixed_size) {
        const Eigen::VectorXd count = model_->predict_del_count(g, guide);
        k = cfg.argmax_count ? argmax(count) : sample_categorical(count, rng);
      }
      for (int q = 0; q < k; ++q) {
        const int idx = g.add_node(0, 0);
        g = apply_node_deletion_mark(g, idx, DeletionMark::del_star);
      }
      r.diagnostics.insertions += k;

      // (2) Predict, with guidance on the category heads.
      DenoiserOutput out = model_->predict(g, guide);
      if (guided) {
        const DenoiserOutput un = model_->predict(g, GuideVector::none());
        for (Eigen::Index i = 0; i < out.node_probs.rows(); ++i) {
          const auto gp = guided_prediction(out.node_probs.row(i).transpose(), un.node_probs.row(i).transpose(),
                                            cfg.guidance_scale);
          out.node_probs.row(i) = gp.p.transpose();
          r.diagnostics.guidance_fallbacks += gp.fell_back;
        }
        for (Eigen::Index i = 0; i < out.edge_probs.rows(); ++i) {
          const auto gp = guided_prediction(out.edge_probs.row(i).transpose(), un.edge_probs.row(i).transpose(),
                                            cfg.guidance_scale);
          out.edge_probs.row(i) = gp.p.transpose();
          r.diagnostics.guidance_fallbacks += gp.fell_back;
        }
      }

      // (3) Activation times; rows activated at t leave the graph.
      const int n = g.size();
      std::vector<int> s_hat(static_cast<std::size_t>(n));
      std::vector<bool> keep(static_cast<std::size_t>(n));
      int removed = 0;
      for (int i = 0; i < n; ++i) {
        int s = 0;
        if (!cfg.fixed_size) {
          const Eigen::VectorXd p = out.time_probs.row(i).head(t + 1).transpose();
          s = p.sum() > 0.0 ? (cfg.argmax_times ? argmax(p) : sample_categorical(p, rng)) : 0;
        }
        s_hat[static_cast<std::size_t>(i)] = s;
        keep[static_cast<std::size_t>(i)] = s < t;
        removed += s == t;
      }
      if (k > 0 && removed > 0) ++r.diagnostics.conflicts;
      r.diagnostics.deletions += removed;

      // (4) Per-node and per-edge reverse posteriors.
      GraphState next(space_, t - 1);
      std::vector<int> idx;
      for (int i = 0; i < n; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        const Eigen::VectorXd p = nodes_.posterior({g.node(i), s_hat[static_cast<std::size_t>(i)], t, out.node(i)});
        next.add_node(sample_categorical(p, rng), s_hat[static_cast<std::size_t>(i)]);
        idx.push_back(i);
      }
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
          const int i = idx[a], j = idx[b];
          const Eigen::VectorXd p = edge_reverse_posterior(edges_, g.edge(i, j), s_hat[static_cast<std::size_t>(i)],
                                                           s_hat[static_cast<std::size_t>(j)], t, out.edge(i, j));
          next.set_edge(static_cast<int>(a), static_cast<int>(b), sample_categorical(p, rng));
        }
      g = std::move(next);
      r.diagnostics.sizes.push_back(g.size());
      if (g.empty()) {
        r.diagnostics.degenerate = true;
        break;
      }
    }
    g.set_timestep(0);
    for (int i = 0; i < g.size(); ++i) g.set_activation(i, 0);
    if (g.has_reserved() || !(g.space() == cs)) throw Error("internal error: reserved category in a final sample");
    r.graph = std::move(g);
    return r;
  }

  /// Corrupts the source for `steps` steps with a training-style plan and
  /// denoises back, once per candidate with independent streams.
  std::vector<SampleResult> optimize(const GraphState& source, int steps, int candidates, const SizeParams& size,
                                     const SampleConfig& cfg) const {
    if (steps < 0 || steps > sched_.T()) throw ConfigError("corruption steps must lie in [0, T]", "steps");
    if (candidates < 1) throw ConfigError("at least one candidate is required", "candidates");
    std::vector<SampleResult> out;
    for (int c = 0; c < candidates; ++c) {
      const auto start = std::chrono::steady_clock::now();
      Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(c));
      SampleResult r;
      if (steps == 0) {
        r.graph = source;
      } else {
        const ForwardPlan plan = make_forward_plan(source, sched_, size, compute_sample_marginals(source), rng);
        GraphState g = corrupt(source, plan, steps, sched_, noise_, rng);
        g = strip_marked_nodes(strip_marked_nodes(g, DeletionMark::del), DeletionMark::del_star);
        for (int i = 0; i < g.size(); ++i) g.set_activation(i, 0);
        r = run_chain(std::move(g), steps, cfg, rng);
      }
      r.diagnostics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.push_back(std::move(r));
    }
    return out;
  }

  /// Independent chains, split over `jobs` worker threads; results are in config order.
  std::vector<SampleResult> sample_batch(const std::vector<SampleConfig>& configs, int jobs = 1) const {
    std::vector<SampleResult> out(configs.size());
    if (configs.empty()) return out;
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
    if (jobs == 1) {
      for (std::size_t k = 0; k < configs.size(); ++k) out[k] = sample(configs[k]);
      return out;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        try {
          for (std::size_t k = static_cast<std::size_t>(w); k < configs.size(); k += static_cast<std::size_t>(jobs))
            out[k] = sample(configs[k]);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& th : workers) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  const ScheduleSet& schedule() const { return sched_; }
  const NoiseMarginals& noise() const { return noise_; }

 private:
  static int argmax(const Eigen::VectorXd& p) {
    Eigen::Index k = 0;
    p.maxCoeff(&k);
    return static_cast<int>(k);
  }

  const Denoiser* model_;
  ScheduleSet sched_;
  NoiseMarginals noise_;
  CategorySpacePtr space_;
  PosteriorKernels nodes_;
  PosteriorKernels edges_;
};

}  // namespace griddd
