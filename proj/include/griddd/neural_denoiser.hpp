#pragma once

// Trainable graph denoiser: edge-conditioned attention layers with FiLM
// modulation by a global feature u (time features, size features, guide),
// node/time/edge heads, and a separate counter network for DEL* reinsertion.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "griddd/autograd.hpp"
#include "griddd/denoiser.hpp"
#include "griddd/error.hpp"
#include "griddd/graph.hpp"

namespace griddd {

struct ModelConfig {
  int num_node_types = 2;
  int num_edge_types = 2;
  int T = 50;
  int n_max = 4;
  int hidden = 32;
  int layers = 2;
  int count_hidden = 16;
  int count_layers = 1;
  int max_del_count = 4;
  int guide_dim = 0;
  std::vector<double> guide_mean;
  std::vector<double> guide_std;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

namespace detail {

constexpr int kTimeFeatures = 5;
constexpr int kSizeFeatures = 2;

inline Eigen::MatrixXd time_features(int t, int T) {
  const double x = static_cast<double>(t) / T;
  Eigen::MatrixXd f(1, kTimeFeatures);
  f << x, std::sin(std::numbers::pi * x), std::cos(std::numbers::pi * x), std::sin(2 * std::numbers::pi * x),
      std::cos(2 * std::numbers::pi * x);
  return f;
}

/// Stack of attention layers shared by the main and counter networks.
class GraphTrunk {
 public:
  GraphTrunk() = default;
  GraphTrunk(std::string prefix, int node_in, int edge_in, int u_in, int hidden, int layers)
      : prefix_(std::move(prefix)), node_in_(node_in), edge_in_(edge_in), u_in_(u_in), h_(hidden), layers_(layers) {}

  void init(nn::ParameterSet& ps, Rng& rng) const {
    auto lin = [&](const std::string& name, int in, int out) {
      ps.add(prefix_ + name + ".w", in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
      ps.add_zero(prefix_ + name + ".b", 1, out);
    };
    auto mat = [&](const std::string& name, int in, int out, double gain = 1.0) {
      ps.add(prefix_ + name, in, out, gain / std::sqrt(static_cast<double>(in)), rng);
    };
    lin("in.x", node_in_, h_);
    lin("in.e", edge_in_, h_);
    lin("in.u", u_in_, h_);
    for (int l = 0; l < layers_; ++l) {
      const std::string p = "l" + std::to_string(l) + ".";
      for (const char* m : {"q", "k", "v", "e_mul", "e_add", "e_out", "x_out"}) mat(p + m, h_, h_);
      for (const char* m : {"u_emul", "u_eadd", "u_xmul", "u_xadd"}) mat(p + m, h_, h_, 0.1);
      lin(p + "x_mlp1", h_, h_);
      lin(p + "x_mlp2", h_, h_);
      lin(p + "e_mlp1", h_, h_);
      lin(p + "e_mlp2", h_, h_);
      lin(p + "u_upd", 3 * h_, h_);
    }
  }

  struct Out {
    nn::Var x, e, u;
  };

  Out forward(nn::Tape& tp, nn::ParameterSet& ps, const Eigen::MatrixXd& X, const Eigen::MatrixXd& E, nn::Var u,
              Eigen::Index n) const {
    auto P = [&](const std::string& name) { return tp.param(ps.at(prefix_ + name)); };
    auto linear = [&](nn::Var in, const std::string& name) {
      return nn::add_row(tp, nn::matmul(tp, in, P(name + ".w")), P(name + ".b"));
    };
    nn::Var x = nn::silu(tp, linear(tp.constant(X), "in.x"));
    nn::Var e = nn::silu(tp, linear(tp.constant(E), "in.e"));
    nn::Var g = nn::silu(tp, linear(u, "in.u"));
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h_));
    for (int l = 0; l < layers_; ++l) {
      const std::string p = "l" + std::to_string(l) + ".";
      const nn::Var q = nn::matmul(tp, x, P(p + "q"));
      const nn::Var k = nn::matmul(tp, x, P(p + "k"));
      const nn::Var v = nn::matmul(tp, x, P(p + "v"));
      nn::Var y = nn::scale(tp, nn::pair_product(tp, q, k), inv_sqrt_h);
      const nn::Var e_mul = nn::add_scalar(tp, nn::matmul(tp, e, P(p + "e_mul")), 1.0);
      y = nn::add(tp, nn::mul(tp, y, e_mul), nn::matmul(tp, e, P(p + "e_add")));

      nn::Var e_new = nn::matmul(tp, y, P(p + "e_out"));
      e_new = nn::mul_row(tp, e_new, nn::add_scalar(tp, nn::matmul(tp, g, P(p + "u_emul")), 1.0));
      e_new = nn::add_row(tp, e_new, nn::matmul(tp, g, P(p + "u_eadd")));

      const nn::Var attn = nn::neighbor_softmax(tp, y, n);
      nn::Var x_new = nn::aggregate(tp, attn, v);
      x_new = nn::mul_row(tp, x_new, nn::add_scalar(tp, nn::matmul(tp, g, P(p + "u_xmul")), 1.0));
      x_new = nn::add_row(tp, x_new, nn::matmul(tp, g, P(p + "u_xadd")));

      x = nn::layer_norm(tp, nn::add(tp, x, nn::matmul(tp, x_new, P(p + "x_out"))));
      x = nn::layer_norm(tp, nn::add(tp, x, linear(nn::silu(tp, linear(x, p + "x_mlp1")), p + "x_mlp2")));
      e = nn::layer_norm(tp, nn::add(tp, e, e_new));
      e = nn::layer_norm(tp, nn::add(tp, e, linear(nn::silu(tp, linear(e, p + "e_mlp1")), p + "e_mlp2")));

      const nn::Var pooled = nn::concat_cols(tp, nn::concat_cols(tp, g, nn::mean_pool(tp, x)), nn::mean_pool(tp, e));
      g = nn::layer_norm(tp, nn::add(tp, g, nn::silu(tp, linear(pooled, p + "u_upd"))));
    }
    return {x, e, g};
  }

  int hidden() const { return h_; }

 private:
  std::string prefix_;
  int node_in_ = 0, edge_in_ = 0, u_in_ = 0, h_ = 0, layers_ = 0;
};

}  // namespace detail

/// Logit variables of one forward pass.
struct NetworkLogits {
  nn::Var node, edge, time;
};

/// One supervised sample: the main network sees `input` (DEL* rows kept), the
/// counter sees `count_input` (DEL* rows stripped) and predicts `n_del`.
struct TrainingExample {
  GraphState input;
  GraphState count_input;
  LossTargets targets;
  int n_del = 0;
  bool include_del = false;
  GuideVector guide;
};

struct LossVars {
  nn::Var x, e, s, del, total;
};

class NeuralDenoiser : public Denoiser {
 public:
  NeuralDenoiser(CategorySpacePtr space, ModelConfig cfg) : space_(std::move(space)), cfg_(std::move(cfg)) {
    validate();
    Rng rng(cfg_.init_seed);
    main_.init(params_, rng);
    init_head("head.x", cfg_.num_node_types, rng);
    init_head("head.s", cfg_.T + 1, rng);
    init_head("head.e", cfg_.num_edge_types, rng);
    count_.init(params_, rng);
    const int hc = cfg_.count_hidden;
    params_.add("count.head1.w", hc, hc, 1.0 / std::sqrt(static_cast<double>(hc)), rng);
    params_.add_zero("count.head1.b", 1, hc);
    params_.add("count.head2.w", hc, cfg_.max_del_count + 1, 1.0 / std::sqrt(static_cast<double>(hc)), rng);
    params_.add_zero("count.head2.b", 1, cfg_.max_del_count + 1);
    params_.add("guide.placeholder", 1, std::max(cfg_.guide_dim, 0), 1.0, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const CategorySpacePtr& space() const { return space_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  int num_timesteps() const override { return cfg_.T; }

  /// Global input row: time features, size features, normalized guide.
  Eigen::MatrixXd global_input(const GraphState& g, const GuideVector& guide, nn::Tape* tp, nn::Var* placeholder) const {
    const int d = cfg_.guide_dim;
    Eigen::MatrixXd u(1, detail::kTimeFeatures + detail::kSizeFeatures + d);
    u.leftCols(detail::kTimeFeatures) = detail::time_features(g.timestep(), cfg_.T);
    u(0, detail::kTimeFeatures) = static_cast<double>(g.size()) / cfg_.n_max;
    u(0, detail::kTimeFeatures + 1) = static_cast<double>(g.count_nodes(space_->node_del_star())) / cfg_.n_max;
    if (d > 0) {
      if (guide.placeholder) {
        u.rightCols(d).setZero();
        if (tp)
          *placeholder = tp->param(const_cast<nn::ParameterSet&>(params_).at("guide.placeholder"));
        else
          u.rightCols(d) = params_.at("guide.placeholder").value;
      } else {
        if (guide.y.size() != d) throw CompatibilityError("guide vector has wrong dimension");
        for (int k = 0; k < d; ++k)
          u(0, detail::kTimeFeatures + detail::kSizeFeatures + k) =
              (guide.y(k) - cfg_.guide_mean[static_cast<std::size_t>(k)]) / cfg_.guide_std[static_cast<std::size_t>(k)];
      }
    }
    return u;
  }

  /// Main network on a graph that may hold DEL* rows.
  NetworkLogits forward(nn::Tape& tp, const GraphState& g, const GuideVector& guide) {
    check_graph(g);
    const Eigen::Index n = g.size();
    const auto trunk = main_.forward(tp, params_, g.node_one_hot(), g.edge_one_hot(), global_var(tp, g, guide), n);
    auto P = [&](const std::string& name) { return tp.param(params_.at(name)); };
    auto head = [&](nn::Var in, const std::string& name) {
      nn::Var h = nn::silu(tp, nn::add_row(tp, nn::matmul(tp, in, P(name + "1.w")), P(name + "1.b")));
      return nn::add_row(tp, nn::matmul(tp, h, P(name + "2.w")), P(name + "2.b"));
    };
    return {head(trunk.x, "head.x"), nn::symmetrize_pairs(tp, head(trunk.e, "head.e"), n), head(trunk.x, "head.s")};
  }

  /// Counter network on a graph without DEL/DEL* rows; returns logits 1 x (K+1).
  nn::Var count_forward(nn::Tape& tp, const GraphState& g, const GuideVector& guide) {
    check_graph(g);
    if (g.count_nodes(space_->node_del_star()) > 0) throw Error("counter input holds DEL* rows");
    const auto out = count_.forward(tp, params_, g.node_one_hot(), g.edge_one_hot(), global_var(tp, g, guide), g.size());
    auto P = [&](const std::string& name) { return tp.param(params_.at(name)); };
    nn::Var h = nn::silu(tp, nn::add_row(tp, nn::matmul(tp, out.u, P("count.head1.w")), P("count.head1.b")));
    return nn::add_row(tp, nn::matmul(tp, h, P("count.head2.w")), P("count.head2.b"));
  }

  LossVars training_loss(nn::Tape& tp, const TrainingExample& ex, const LossWeights& w) {
    const int n = ex.input.size();
    const auto& tg = ex.targets;
    if (static_cast<int>(tg.nodes.size()) != n || static_cast<int>(tg.times.size()) != n ||
        static_cast<int>(tg.edges.size()) != n * n)
      throw Error("training targets do not match the input graph");
    const NetworkLogits l = forward(tp, ex.input, ex.guide);
    std::vector<int> edges = tg.edges;
    for (int i = 0; i < n; ++i) edges[static_cast<std::size_t>(i * n + i)] = -1;
    LossVars out;
    out.x = nn::cross_entropy(tp, l.node, tg.nodes);
    out.e = nn::cross_entropy(tp, l.edge, edges);
    out.s = nn::cross_entropy(tp, l.time, tg.times);
    out.total = nn::add(tp, nn::scale(tp, out.x, w.x),
                        nn::add(tp, nn::scale(tp, out.e, w.e), nn::scale(tp, out.s, w.s)));
    if (ex.include_del) {
      if (ex.n_del < 0) throw Error("negative DEL* count");
      // Counts beyond the head's range train its top class.
      out.del = nn::cross_entropy(tp, count_forward(tp, ex.count_input, ex.guide), {std::min(ex.n_del, cfg_.max_del_count)});
      out.total = nn::add(tp, out.total, nn::scale(tp, out.del, w.del));
    } else {
      out.del = tp.constant(nn::Mat::Zero(1, 1));
    }
    return out;
  }

  DenoiserOutput predict(const GraphState& g, const GuideVector& guide) const override {
    nn::Tape tp;
    auto* self = const_cast<NeuralDenoiser*>(this);
    const NetworkLogits l = self->forward(tp, g, guide);
    return {nn::softmax_rows(tp.value(l.node)), nn::softmax_rows(tp.value(l.edge)), nn::softmax_rows(tp.value(l.time))};
  }

  Eigen::VectorXd predict_del_count(const GraphState& g, const GuideVector& guide) const override {
    nn::Tape tp;
    auto* self = const_cast<NeuralDenoiser*>(this);
    const nn::Var l = self->count_forward(tp, g, guide);
    return nn::softmax_row(tp.value(l).row(0)).transpose();
  }

 private:
  void validate() const {
    if (cfg_.num_node_types != space_->num_node_types() || cfg_.num_edge_types != space_->num_edge_types())
      throw CompatibilityError("model category counts do not match the category space");
    if (cfg_.T < 2 || cfg_.hidden < 1 || cfg_.layers < 0 || cfg_.count_hidden < 1 || cfg_.count_layers < 0 ||
        cfg_.max_del_count < 0 || cfg_.n_max < 1 || cfg_.guide_dim < 0)
      throw ConfigError("invalid model shape", "model");
    if (static_cast<int>(cfg_.guide_mean.size()) != cfg_.guide_dim ||
        static_cast<int>(cfg_.guide_std.size()) != cfg_.guide_dim)
      throw ConfigError("guide normalization must match guide_dim", "model.guide");
    for (double s : cfg_.guide_std)
      if (!(s > 0.0)) throw ConfigError("guide scale must be positive", "model.guide");
  }

  void check_graph(const GraphState& g) const {
    if (!(g.space() == *space_)) throw CompatibilityError("graph category space differs from the model's");
    if (g.timestep() < 1 || g.timestep() > cfg_.T) throw Error("denoiser needs 1 <= t <= T");
    if (g.count_nodes(space_->node_del()) > 0) throw Error("denoiser input holds DEL rows");
  }

  void init_head(const std::string& name, int out, Rng& rng) {
    const int h = cfg_.hidden;
    params_.add(name + "1.w", h, h, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    params_.add_zero(name + "1.b", 1, h);
    params_.add(name + "2.w", h, out, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    params_.add_zero(name + "2.b", 1, out);
  }

  /// Global input as a variable; a placeholder guide enters through its parameter.
  nn::Var global_var(nn::Tape& tp, const GraphState& g, const GuideVector& guide) {
    nn::Var placeholder;
    const Eigen::MatrixXd u = global_input(g, guide, &tp, &placeholder);
    if (placeholder.id < 0) return tp.constant(u);
    const int fixed = detail::kTimeFeatures + detail::kSizeFeatures;
    return nn::concat_cols(tp, tp.constant(u.leftCols(fixed)), placeholder);
  }

  CategorySpacePtr space_;
  ModelConfig cfg_;
  nn::ParameterSet params_;
  detail::GraphTrunk main_{"main.", cfg_.num_node_types + 2, cfg_.num_edge_types + 2,
                           detail::kTimeFeatures + detail::kSizeFeatures + cfg_.guide_dim, cfg_.hidden, cfg_.layers};
  detail::GraphTrunk count_{"count.", cfg_.num_node_types + 2, cfg_.num_edge_types + 2,
                            detail::kTimeFeatures + detail::kSizeFeatures + cfg_.guide_dim, cfg_.count_hidden,
                            cfg_.count_layers};
};

}  // namespace griddd
