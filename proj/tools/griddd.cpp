// griddd: train, sample, corrupt, optimize and eval commands.
// Exit codes: 0 ok, 2 configuration error, 3 compatibility error, 4 runtime error.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "griddd/pipeline.hpp"

namespace {

using namespace griddd;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::map<std::string, double> parse_guides(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("guide must look like name=value", "guide");
    try {
      std::size_t used = 0;
      const double v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      out[item.substr(0, eq)] = v;
    } catch (const std::logic_error&) {
      throw ConfigError("guide value is not a number: " + item, "guide");
    }
  }
  return out;
}

json diagnostics_to_json(const SampleDiagnostics& d) {
  return {{"sizes", d.sizes},
          {"conflicts", d.conflicts},
          {"insertions", d.insertions},
          {"deletions", d.deletions},
          {"guidance_fallbacks", d.guidance_fallbacks},
          {"degenerate", d.degenerate},
          {"wall_seconds", d.wall_seconds}};
}

json record_json(const GraphState& g, std::map<std::string, double> props) {
  const ValenceTable table = ValenceTable::standard();
  props["n"] = g.size();
  bool known = true;
  for (const auto& a : g.space().node_types()) known = known && table.mass.count(a);
  if (known) props["mw"] = molecular_weight(g, table);
  return record_to_json(DatasetRecord{g, props, {}});
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, checkpoint, log, report;
};

int cmd_train(const TrainArgs& a) {
  RunConfig c = load_config(a.config);
  if (!a.checkpoint.empty()) c.train.checkpoint = a.checkpoint;
  if (!a.log.empty()) c.train.log = a.log;
  const LoadedData d = load_run_dataset(c);
  const TrainedRun run = train_run(c, d);
  json epochs = json::array();
  for (const auto& e : run.epochs) {
    json row{{"epoch", e.epoch},
             {"loss", {{"x", e.mean_loss.x}, {"e", e.mean_loss.e}, {"s", e.mean_loss.s}, {"del", e.mean_loss.del},
                       {"total", e.mean_loss.total}}}};
    if (e.validation) row["validation"] = {{"xce", e.validation->xce}, {"ece", e.validation->ece}};
    epochs.push_back(row);
  }
  const json report{{"command", "train"},
                    {"config", config_to_json(c)},
                    {"dataset", {{"records", d.records.size()}, {"hash", dataset_hash(d.records)}}},
                    {"checkpoint", c.train.checkpoint},
                    {"epochs", epochs}};
  if (!a.report.empty()) save_json_file(a.report, report);
  std::cout << report.dump(2) << '\n';
  return 0;
}

struct SampleArgs {
  std::string config, checkpoint, out = "samples.jsonl", diagnostics, trajectories;
  int count = -1;
  int size = 0;
  bool size_from_data = false;
  std::vector<std::string> guides;
  std::optional<double> scale;
  int jobs = 0;
};

int cmd_sample(const SampleArgs& a) {
  const RunConfig c = load_config(a.config);
  const ModelBundle b = load_model_bundle(a.checkpoint);
  const auto sampler = make_sampler(b);
  const int count = a.count >= 0 ? a.count : c.sample.count;
  const int size = a.size_from_data ? 0 : (a.size > 0 ? a.size : c.sample.size);
  const double scale = a.scale.value_or(c.sample.guidance_scale);
  const auto guide_values = parse_guides(a.guides);
  const GuideVector guide = guide_from(b, guide_values);
  std::vector<SampleConfig> cfgs;
  for (int k = 0; k < count; ++k) {
    SampleConfig s = sample_config_for(b, size, guide, scale, chain_seed(c.seed, static_cast<std::uint64_t>(k)));
    s.argmax_times = c.sample.argmax_times;
    s.argmax_count = c.sample.argmax_count;
    cfgs.push_back(s);
  }
  const auto results = sampler->sample_batch(cfgs, a.jobs > 0 ? a.jobs : c.sample.jobs);

  std::map<std::string, double> targets;
  for (const auto& [k, v] : guide_values) targets["target_" + k] = v;
  auto out = open_output(a.out);
  json chains = json::array();
  int conflicts = 0, degenerate = 0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const GraphState g = finalize_sample(b, results[k].graph);
    out << record_json(g, targets).dump() << '\n';
    json row = diagnostics_to_json(results[k].diagnostics);
    row["chain"] = k;
    row["seed"] = cfgs[k].seed;
    row["final_size"] = g.size();
    chains.push_back(row);
    conflicts += results[k].diagnostics.conflicts;
    degenerate += results[k].diagnostics.degenerate;
  }
  const json diag{{"command", "sample"},
                  {"config", config_to_json(c)},
                  {"checkpoint", a.checkpoint},
                  {"count", count},
                  {"initial_size", size},
                  {"guidance_scale", scale},
                  {"guide", guide_values},
                  {"summary", {{"conflicts", conflicts}, {"degenerate", degenerate}}},
                  {"chains", chains}};
  if (!a.diagnostics.empty()) save_json_file(a.diagnostics, diag);
  if (!a.trajectories.empty()) {
    auto csv = open_output(a.trajectories);
    csv << "chain,step,size\n";
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& sizes = results[k].diagnostics.sizes;
      for (std::size_t s = 0; s < sizes.size(); ++s) csv << k << ',' << s + 1 << ',' << sizes[s] << '\n';
    }
  }
  std::cout << json{{"samples", count}, {"out", a.out}, {"conflicts", conflicts}, {"degenerate", degenerate}}.dump()
            << '\n';
  return 0;
}

struct CorruptArgs {
  std::string config, dataset, out = "corrupted.jsonl";
  int t = -1;
};

int cmd_corrupt(const CorruptArgs& a) {
  RunConfig c = load_config(a.config);
  if (!a.dataset.empty()) c.dataset.path = a.dataset;
  if (a.t < 0 || a.t > c.schedule.T) throw ConfigError("--t must lie in [0, T]", "t");
  const LoadedData d = load_run_dataset(c);
  if (d.records.empty()) throw Error("dataset is empty");
  const DatasetStats stats = compute_dataset_stats(d.records);
  const ScheduleSet sched(c.schedule);
  SizeParams size = c.size;
  if (size.n_max == 0) size.n_max = stats.n_max;
  auto out = open_output(a.out);
  for (std::size_t k = 0; k < d.records.size(); ++k) {
    Rng rng = derive_rng(c.seed, k);
    const auto& r = d.records[k];
    const ForwardPlan plan = make_forward_plan(r.graph, sched, size, r.marginals, rng);
    const GraphState g = corrupt(r.graph, plan, a.t, sched, stats.noise(), rng);
    json line = graph_to_json(g);
    std::vector<int> activation;
    for (int i = 0; i < g.size(); ++i) activation.push_back(g.activation(i));
    line["t"] = a.t;
    line["n0"] = plan.n0;
    line["nT"] = plan.nT;
    line["delta"] = plan.delta;
    line["edit_times"] = plan.edit_times;
    line["activation"] = activation;
    line["del"] = g.count_nodes(g.space().node_del());
    line["del_star"] = g.count_nodes(g.space().node_del_star());
    out << line.dump() << '\n';
  }
  std::cout << json{{"records", d.records.size()}, {"t", a.t}, {"out", a.out}}.dump() << '\n';
  return 0;
}

struct OptimizeArgs {
  std::string config, checkpoint, seeds, out = "optimize_report.json";
  int steps = -1, candidates = -1, jobs = 0;
  std::optional<double> delta, target, scale;
};

int cmd_optimize(const OptimizeArgs& a) {
  const RunConfig c = load_config(a.config);
  const ModelBundle b = load_model_bundle(a.checkpoint);
  if (b.padding) throw CompatibilityError("optimization needs a model with insertions and deletions");
  const auto sampler = make_sampler(b);
  const auto seeds = load_jsonl(a.seeds, b.data_space);
  const int steps = a.steps >= 0 ? a.steps : c.eval.steps;
  const int candidates = a.candidates > 0 ? a.candidates : c.eval.candidates;
  OptimizationCriteria crit;
  crit.delta = a.delta.value_or(c.eval.delta);
  crit.success_lo = c.eval.success_lo;
  crit.success_hi = c.eval.success_hi;
  const auto property = property_function(c.eval.property);
  GuideVector guide = GuideVector::none();
  if (a.target) guide = guide_from(b, {{c.eval.property, *a.target}});
  SizeParams size = c.size;
  size.n_max = b.model->config().n_max;

  std::vector<GraphState> sources;
  std::vector<std::vector<GraphState>> cands(seeds.size());
  for (const auto& r : seeds) sources.push_back(r.graph);
  const int jobs = std::max(1, a.jobs > 0 ? a.jobs : c.sample.jobs);
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&, w] {
      try {
        for (std::size_t s = static_cast<std::size_t>(w); s < sources.size(); s += static_cast<std::size_t>(jobs)) {
          SampleConfig sc;
          sc.guide = guide;
          sc.guidance_scale = a.scale.value_or(c.sample.guidance_scale);
          sc.seed = chain_seed(c.seed, s);
          for (auto& r : sampler->optimize(sources[s], steps, candidates, size, sc)) cands[s].push_back(r.graph);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& th : workers) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const OptimizationReport rep = optimization_protocol(sources, cands, property, crit);
  json rows = json::array();
  for (std::size_t s = 0; s < rep.seeds.size(); ++s) {
    const auto& o = rep.seeds[s];
    rows.push_back({{"seed", s},
                    {"source_property", property(sources[s])},
                    {"improvement", o.improvement},
                    {"similarity", o.similarity},
                    {"passed", o.passed},
                    {"success", o.success}});
  }
  const json report{{"protocol", "optimization"},
                    {"config", config_to_json(c)},
                    {"params",
                     {{"steps", steps},
                      {"candidates", candidates},
                      {"delta", crit.delta},
                      {"property", c.eval.property},
                      {"target", a.target ? json(*a.target) : json(nullptr)},
                      {"success_window", {crit.success_lo, crit.success_hi}},
                      {"failed_seeds_contribute", 0.0}}},
                    {"seeds", rows},
                    {"aggregates",
                     {{"mean_improvement", rep.mean_improvement},
                      {"std_improvement", rep.std_improvement},
                      {"mean_similarity", rep.mean_similarity},
                      {"pass_rate", rep.pass_rate},
                      {"success_rate", rep.success_rate},
                      {"diversity", rep.diversity}}}};
  save_json_file(a.out, report);
  std::cout << report.at("aggregates").dump(2) << '\n';
  return 0;
}

struct EvalArgs {
  std::vector<std::string> samples;
  std::string train_report, out, csv, property = "mw";
};

int cmd_eval(const EvalArgs& a) {
  const ValenceTable table = ValenceTable::standard();
  const auto property = property_function(a.property);
  const std::string target_key = "target_" + a.property;
  std::vector<std::string> atoms;
  for (const auto& [label, v] : table.max_valence) atoms.push_back(label);
  std::vector<std::string> bonds;
  for (const auto& [label, order] : table.bond_order) bonds.push_back(label);
  const auto space = make_space(atoms, bonds);
  std::vector<AblationRow> rows;
  json models = json::array();
  for (const auto& path : a.samples) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read samples " + path);
    std::string line;
    std::vector<GraphState> graphs;
    std::vector<std::optional<double>> targets;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(line);
        json rec = j;
        std::optional<double> target;
        if (rec.contains("properties")) {
          if (rec["properties"].contains(target_key)) target = rec["properties"][target_key].get<double>();
          rec["properties"] = json::object();
        }
        graphs.push_back(record_from_json(rec, space).graph);
        targets.push_back(target);
      } catch (const json::exception& e) {
        throw Error(path + " line " + std::to_string(line_no) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(path + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    int valid = 0, connected_valid = 0, with_target = 0, valid_with_target = 0;
    double err = 0.0;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      const bool v = check_validity(graphs[k], table).valid;
      connected_valid += v;
      valid += check_validity(graphs[k], table, false).valid;
      if (targets[k]) {
        ++with_target;
        if (v) {
          ++valid_with_target;
          err += std::abs(*targets[k] - property(graphs[k]));
        }
      }
    }
    std::vector<Fingerprint> fps;
    for (const auto& g : graphs)
      if (check_validity(g, table).valid) fps.push_back(fingerprint(g));
    double diversity = 0.0;
    if (fps.size() >= 2) {
      long pairs = 0;
      for (std::size_t i = 0; i < fps.size(); ++i)
        for (std::size_t j = i + 1; j < fps.size(); ++j, ++pairs) diversity += 1.0 - tanimoto(fps[i], fps[j]);
      diversity /= static_cast<double>(pairs);
    }
    double xce = 0.0, ece = 0.0;
    if (!a.train_report.empty()) {
      const json tr = load_json_file(a.train_report);
      for (const auto& e : tr.at("epochs"))
        if (e.contains("validation")) {
          xce = e.at("validation").at("xce").get<double>();
          ece = e.at("validation").at("ece").get<double>();
        }
    }
    rows.push_back(ablation_row(path, graphs, table, xce, ece));
    const ComponentStats cs = component_stats(graphs);
    const double n = static_cast<double>(graphs.size());
    models.push_back({{"samples_file", path},
                      {"count", graphs.size()},
                      {"validity", n > 0 ? connected_valid / n : 0.0},
                      {"validity_valence_only", n > 0 ? valid / n : 0.0},
                      {"avg_nc", cs.avg_nc},
                      {"max_nc", cs.max_nc},
                      {"nsc", cs.nsc},
                      {"mae", valid_with_target > 0 ? json(err / valid_with_target) : json(nullptr)},
                      {"mae_samples", valid_with_target},
                      {"targeted_samples", with_target},
                      {"diversity", diversity},
                      {"xce", xce},
                      {"ece", ece}});
  }
  const json report{{"command", "eval"}, {"property", a.property}, {"models", models}, {"table", ablation_to_json(rows)}};
  if (!a.out.empty()) save_json_file(a.out, report);
  if (!a.csv.empty()) {
    auto csv = open_output(a.csv);
    csv << "samples,count,validity,avg_nc,max_nc,nsc,mae,diversity,xce,ece\n";
    for (const auto& m : models)
      csv << m["samples_file"].get<std::string>() << ',' << m["count"] << ',' << m["validity"] << ',' << m["avg_nc"]
          << ',' << m["max_nc"] << ',' << m["nsc"] << ',' << (m["mae"].is_null() ? std::string() : m["mae"].dump())
          << ',' << m["diversity"] << ',' << m["xce"] << ',' << m["ece"] << '\n';
  }
  std::cout << ablation_table(rows);
  for (const auto& m : models)
    std::cout << m["samples_file"].get<std::string>() << ": MAE "
              << (m["mae"].is_null() ? std::string("undefined") : m["mae"].dump()) << ", validity "
              << m["validity"].dump() << ", diversity " << m["diversity"].dump() << '\n';
  return 0;
}

int report_error(const std::string& kind, const std::string& message, int code, const std::string& key = {}) {
  json e{{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!key.empty()) e["key"] = key;
  std::cerr << e.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph diffusion with node insertion and deletion"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a denoiser; writes checkpoint and log");
  train->add_option("--config", ta.config, "Run configuration JSON")->required();
  train->add_option("--checkpoint", ta.checkpoint, "Checkpoint path (overrides train.checkpoint)");
  train->add_option("--log", ta.log, "Training log path (overrides train.log)");
  train->add_option("--report", ta.report, "Write the training report here");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample graphs from a checkpoint");
  sample->add_option("--config", sa.config, "Run configuration JSON")->required();
  sample->add_option("--checkpoint", sa.checkpoint, "Checkpoint path")->required();
  sample->add_option("--count", sa.count, "Number of chains (overrides sample.count)");
  auto* size_opt = sample->add_option("--size", sa.size, "Initial latent size")->check(CLI::PositiveNumber);
  sample->add_flag("--size-from-data", sa.size_from_data, "Draw initial sizes from the data")->excludes(size_opt);
  sample->add_option("--guide", sa.guides, "Guide value name=value (repeatable)");
  sample->add_option("--guidance-scale", sa.scale, "Guidance scale");
  sample->add_option("--out", sa.out, "Samples JSONL");
  sample->add_option("--diagnostics", sa.diagnostics, "Diagnostics JSON");
  sample->add_option("--trajectories", sa.trajectories, "Size trajectories CSV");
  sample->add_option("--jobs", sa.jobs, "Worker threads")->check(CLI::NonNegativeNumber);

  CorruptArgs ca;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Run the forward process on a dataset");
  corrupt_cmd->add_option("--config", ca.config, "Run configuration JSON")->required();
  corrupt_cmd->add_option("--dataset", ca.dataset, "Dataset JSONL (overrides dataset.path)");
  corrupt_cmd->add_option("--t", ca.t, "Corruption step")->required();
  corrupt_cmd->add_option("--out", ca.out, "Output JSONL");

  OptimizeArgs oa;
  auto* optimize = app.add_subcommand("optimize", "Corrupt-then-denoise property optimization");
  optimize->add_option("--config", oa.config, "Run configuration JSON")->required();
  optimize->add_option("--checkpoint", oa.checkpoint, "Checkpoint path")->required();
  optimize->add_option("--seeds", oa.seeds, "Seed graphs JSONL")->required();
  optimize->add_option("--steps", oa.steps, "Corruption steps");
  optimize->add_option("--candidates", oa.candidates, "Candidates per seed");
  optimize->add_option("--delta", oa.delta, "Similarity threshold");
  optimize->add_option("--target", oa.target, "Guide target for the evaluated property");
  optimize->add_option("--guidance-scale", oa.scale, "Guidance scale");
  optimize->add_option("--out", oa.out, "Report JSON");
  optimize->add_option("--jobs", oa.jobs, "Worker threads")->check(CLI::NonNegativeNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Aggregate metrics over sample files");
  eval->add_option("--samples", ea.samples, "Samples JSONL (repeatable)")->required();
  eval->add_option("--train-report", ea.train_report, "Training report for XCE/ECE");
  eval->add_option("--property", ea.property, "Property for MAE (mw or n)");
  eval->add_option("--out", ea.out, "Report JSON");
  eval->add_option("--csv", ea.csv, "Per-metric CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*train) return cmd_train(ta);
    if (*sample) return cmd_sample(sa);
    if (*corrupt_cmd) return cmd_corrupt(ca);
    if (*optimize) return cmd_optimize(oa);
    if (*eval) return cmd_eval(ea);
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), 2, e.key());
  } catch (const CompatibilityError& e) {
    return report_error("compatibility", e.what(), 3);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 4);
  }
  return 0;
}
