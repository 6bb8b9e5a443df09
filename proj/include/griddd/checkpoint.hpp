#pragma once

// Checkpoint document (JSON):
//   format: "griddd-checkpoint", version: 1
//   space: {node_types, edge_types}
//   model: ModelConfig fields
//   parameters: [{name, rows, cols, data (row-major)}]
//   optimizer: {kind: "adam", lr, beta1, beta2, eps, clip_norm, steps, m: [...], v: [...]}   (optional)
//   train_state: trainer bookkeeping (optional)
//   run_config: echo of the run configuration (optional)

#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "griddd/error.hpp"
#include "griddd/neural_denoiser.hpp"
#include "griddd/optimizer.hpp"

namespace griddd {

using json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "griddd-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline json model_config_to_json(const ModelConfig& c) {
  return {{"num_node_types", c.num_node_types}, {"num_edge_types", c.num_edge_types}, {"T", c.T},
          {"n_max", c.n_max}, {"hidden", c.hidden}, {"layers", c.layers}, {"count_hidden", c.count_hidden},
          {"count_layers", c.count_layers}, {"max_del_count", c.max_del_count}, {"guide_dim", c.guide_dim},
          {"guide_mean", c.guide_mean}, {"guide_std", c.guide_std}, {"init_seed", c.init_seed}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.num_node_types = j.at("num_node_types").get<int>();
    c.num_edge_types = j.at("num_edge_types").get<int>();
    c.T = j.at("T").get<int>();
    c.n_max = j.at("n_max").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.count_hidden = j.at("count_hidden").get<int>();
    c.count_layers = j.at("count_layers").get<int>();
    c.max_del_count = j.at("max_del_count").get<int>();
    c.guide_dim = j.at("guide_dim").get<int>();
    c.guide_mean = j.at("guide_mean").get<std::vector<double>>();
    c.guide_std = j.at("guide_std").get<std::vector<double>>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw CompatibilityError(std::string("checkpoint model section: ") + e.what());
  }
  return c;
}

inline json matrix_to_json(const nn::Mat& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline void matrix_from_json(const json& j, nn::Mat& m, const std::string& what) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows != m.rows() || cols != m.cols()) throw CompatibilityError("shape mismatch for " + what);
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw CompatibilityError("data length mismatch for " + what);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
}

struct Checkpoint {
  std::shared_ptr<NeuralDenoiser> model;
  std::optional<nn::Adam> optimizer;
  json train_state;
  json run_config;
};

inline json checkpoint_to_json(const NeuralDenoiser& model, const nn::Adam* opt = nullptr, const json& train_state = {},
                               const json& run_config = {}) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["space"] = {{"node_types", model.space()->node_types()}, {"edge_types", model.space()->edge_types()}};
  j["model"] = model_config_to_json(model.config());
  json params = json::array();
  for (const auto& p : model.parameters().all()) {
    json e = matrix_to_json(p.value);
    e["name"] = p.name;
    params.push_back(std::move(e));
  }
  j["parameters"] = std::move(params);
  if (opt) {
    const auto& c = opt->config();
    json m = json::array(), v = json::array();
    for (const auto& x : opt->first_moments()) m.push_back(matrix_to_json(x));
    for (const auto& x : opt->second_moments()) v.push_back(matrix_to_json(x));
    j["optimizer"] = {{"kind", "adam"}, {"lr", c.lr},   {"beta1", c.beta1},     {"beta2", c.beta2},
                      {"eps", c.eps},   {"clip_norm", c.clip_norm}, {"steps", opt->steps()}, {"m", m}, {"v", v}};
  }
  if (!train_state.is_null()) j["train_state"] = train_state;
  if (!run_config.is_null()) j["run_config"] = run_config;
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw CompatibilityError("not a checkpoint document");
  if (j.value("version", 0) != kCheckpointVersion) throw CompatibilityError("unsupported checkpoint version");
  Checkpoint ck;
  try {
    auto space = make_space(j.at("space").at("node_types").get<std::vector<std::string>>(),
                            j.at("space").at("edge_types").get<std::vector<std::string>>());
    ck.model = std::make_shared<NeuralDenoiser>(space, model_config_from_json(j.at("model")));
    auto& params = ck.model->parameters().all();
    const json& arr = j.at("parameters");
    if (arr.size() != params.size()) throw CompatibilityError("parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (arr[i].at("name").get<std::string>() != params[i].name)
        throw CompatibilityError("parameter order mismatch at " + params[i].name);
      matrix_from_json(arr[i], params[i].value, params[i].name);
    }
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      nn::AdamConfig c{o.at("lr").get<double>(), o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                       o.at("eps").get<double>(), o.at("clip_norm").get<double>()};
      nn::Adam opt(ck.model->parameters(), c);
      opt.set_steps(o.at("steps").get<long>());
      for (std::size_t i = 0; i < params.size(); ++i) {
        matrix_from_json(o.at("m").at(i), opt.first_moments()[i], params[i].name + " (m)");
        matrix_from_json(o.at("v").at(i), opt.second_moments()[i], params[i].name + " (v)");
      }
      ck.optimizer = std::move(opt);
    }
  } catch (const json::exception& e) {
    throw CompatibilityError(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.contains("train_state")) ck.train_state = j.at("train_state");
  if (j.contains("run_config")) ck.run_config = j.at("run_config");
  return ck;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump() << '\n';
  if (!out) throw Error("write failed for " + path);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("malformed JSON in " + path + ": " + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const NeuralDenoiser& model, const nn::Adam* opt = nullptr,
                            const json& train_state = {}, const json& run_config = {}) {
  save_json_file(path, checkpoint_to_json(model, opt, train_state, run_config));
}

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(load_json_file(path)); }

}  // namespace griddd
