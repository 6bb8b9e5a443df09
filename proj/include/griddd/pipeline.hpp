#pragma once

// End-to-end helpers shared by the command-line tool and the acceptance
// checks: dataset loading, training runs, checkpoint bundles and sampling.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "griddd/chem_metrics.hpp"
#include "griddd/config.hpp"
#include "griddd/dataset.hpp"
#include "griddd/neural_denoiser.hpp"
#include "griddd/padding.hpp"
#include "griddd/sampler.hpp"
#include "griddd/trainer.hpp"

namespace griddd {

struct LoadedData {
  CategorySpacePtr space;
  std::vector<DatasetRecord> records;
};

inline LoadedData load_run_dataset(const RunConfig& c) {
  LoadedData d;
  if (c.dataset.path.empty()) {
    Rng rng = derive_rng(c.seed, 0x746f79);
    d.records = generate_toy_dataset(c.dataset.toy, rng);
    d.space = d.records.empty() ? make_space(c.dataset.atoms, c.dataset.bonds) : d.records.front().graph.space_ptr();
  } else {
    d.space = make_space(c.dataset.atoms, c.dataset.bonds);
    d.records = load_jsonl(c.dataset.path, d.space);
  }
  return d;
}

inline std::function<double(const GraphState&)> property_function(const std::string& name) {
  if (name == "mw") {
    const ValenceTable table = ValenceTable::standard();
    return [table](const GraphState& g) { return molecular_weight(g, table); };
  }
  if (name == "n") return [](const GraphState& g) { return static_cast<double>(g.size()); };
  throw ConfigError("unknown property '" + name + "'", "eval.property");
}

/// A trained network with what sampling needs: schedule, noise marginals
/// and the size distribution of the (unpadded) data.
struct ModelBundle {
  std::shared_ptr<NeuralDenoiser> model;
  ScheduleParams schedule;
  DatasetStats stats;       // of the records the network was trained on
  DatasetStats data_stats;  // of the original records
  bool padding = false;
  CategorySpacePtr data_space;
  std::vector<std::string> guide;
  json run_config;
};

struct TrainedRun {
  ModelBundle bundle;
  std::vector<EpochSummary> epochs;
  DatasetSplits splits;
};

inline json bundle_metadata(const RunConfig& c, const DatasetStats& stats, const DatasetStats& data_stats,
                            const CategorySpace& data_space) {
  return {{"config", config_to_json(c)},
          {"stats", stats_to_json(stats)},
          {"data_stats", stats_to_json(data_stats)},
          {"data_space", {{"node_types", data_space.node_types()}, {"edge_types", data_space.edge_types()}}}};
}

/// Trains on the configured split; writes the checkpoint and log named in
/// the config unless they are empty.
inline TrainedRun train_run(const RunConfig& c, const LoadedData& d) {
  if (d.records.empty()) throw Error("cannot fit on an empty dataset");
  TrainedRun out;
  out.splits = split_dataset(d.records, c.dataset.train_frac, c.dataset.val_frac);
  if (out.splits.train.empty()) throw Error("training split is empty");
  const DatasetStats data_stats = c.dataset.stats_cache.empty()
                                      ? compute_dataset_stats(d.records)
                                      : cached_dataset_stats(d.records, c.dataset.stats_cache);
  const int n_max = c.size.n_max > 0 ? c.size.n_max : data_stats.n_max;
  if (n_max < data_stats.n_max) throw ConfigError("n_max is smaller than the largest dataset graph", "schedule.n_max");

  std::vector<DatasetRecord> train = out.splits.train, val = out.splits.val;
  CategorySpacePtr space = d.space;
  if (c.train.padding) {
    space = padded_space(*d.space);
    train = pad_records(train, n_max, space);
    val = pad_records(val, n_max, space);
  }
  const DatasetStats stats = c.train.padding ? compute_dataset_stats(pad_records(d.records, n_max, space)) : data_stats;

  ModelConfig mc;
  mc.num_node_types = space->num_node_types();
  mc.num_edge_types = space->num_edge_types();
  mc.T = c.schedule.T;
  mc.n_max = n_max;
  mc.hidden = c.model.hidden;
  mc.layers = c.model.layers;
  mc.count_hidden = c.model.count_hidden;
  mc.count_layers = c.model.count_layers;
  mc.max_del_count = c.model.max_del_count;
  mc.guide_dim = static_cast<int>(c.train.guide.size());
  std::tie(mc.guide_mean, mc.guide_std) = guide_normalization(out.splits.train, c.train.guide);
  mc.init_seed = derive_rng(c.seed, 0x696e6974)();

  auto model = std::make_shared<NeuralDenoiser>(space, mc);
  TrainConfig tc = train_config_from(c, n_max);
  const json meta = bundle_metadata(c, stats, data_stats, *d.space);
  Trainer trainer(*model, tc, stats);
  out.epochs = trainer.fit(train, val, meta);

  ModelBundle& b = out.bundle;
  b.model = model;
  b.schedule = c.schedule;
  b.stats = stats;
  b.data_stats = data_stats;
  b.padding = c.train.padding;
  b.data_space = d.space;
  b.guide = c.train.guide;
  b.run_config = meta;
  return out;
}

inline ModelBundle load_model_bundle(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  ModelBundle b;
  b.model = ck.model;
  try {
    const json& meta = ck.run_config;
    const RunConfig c = config_from_json(meta.at("config"));
    b.schedule = c.schedule;
    b.stats = stats_from_json(meta.at("stats"));
    b.data_stats = stats_from_json(meta.at("data_stats"));
    b.padding = c.train.padding;
    b.guide = c.train.guide;
    b.data_space = make_space(meta.at("data_space").at("node_types").get<std::vector<std::string>>(),
                              meta.at("data_space").at("edge_types").get<std::vector<std::string>>());
    b.run_config = meta;
  } catch (const json::exception& e) {
    throw CompatibilityError(std::string("checkpoint lacks run metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("checkpoint carries an invalid configuration: ") + e.what());
  }
  if (b.schedule.T != b.model->config().T) throw CompatibilityError("checkpoint schedule and model disagree on T");
  if (static_cast<int>(b.guide.size()) != b.model->config().guide_dim)
    throw CompatibilityError("checkpoint guide names and model disagree");
  return b;
}

/// Maps a sampled graph back to the data space (drops PAD rows).
inline GraphState finalize_sample(const ModelBundle& b, const GraphState& g) {
  return b.padding ? unpad_graph(g, b.data_space) : g;
}

inline std::unique_ptr<Sampler> make_sampler(const ModelBundle& b) {
  return std::make_unique<Sampler>(*b.model, ScheduleSet(b.schedule), b.stats.noise(), b.model->space());
}

/// Guide vector from name=value pairs; names must match the model's guide.
inline GuideVector guide_from(const ModelBundle& b, const std::map<std::string, double>& values) {
  if (values.empty()) return GuideVector::none();
  Eigen::VectorXd y(static_cast<Eigen::Index>(b.guide.size()));
  for (std::size_t k = 0; k < b.guide.size(); ++k) {
    const auto it = values.find(b.guide[k]);
    if (it == values.end()) throw ConfigError("guide value missing for '" + b.guide[k] + "'", "guide");
    y(static_cast<Eigen::Index>(k)) = it->second;
  }
  for (const auto& [name, v] : values)
    if (std::find(b.guide.begin(), b.guide.end(), name) == b.guide.end())
      throw CompatibilityError("model was not trained with guide '" + name + "'");
  return GuideVector::of(y);
}

/// Chain settings: size 0 draws from the data size distribution; the
/// padding variant always starts at the padded size.
inline SampleConfig sample_config_for(const ModelBundle& b, int size, const GuideVector& guide, double scale,
                                      std::uint64_t seed) {
  SampleConfig s;
  s.guide = guide;
  s.guidance_scale = scale;
  s.seed = seed;
  if (b.padding) {
    s.initial_size = b.model->config().n_max;
    s.fixed_size = true;
  } else if (size > 0) {
    s.initial_size = size;
  } else {
    s.size_distribution = b.data_stats.size_distribution;
  }
  return s;
}

inline std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t index) { return derive_rng(seed, index)(); }

}  // namespace griddd
