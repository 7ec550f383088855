#include "mgmn/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgmn/checkpoint.hpp"
#include "mgmn/dataset.hpp"
#include "mgmn/evaluation.hpp"
#include "mgmn/ged.hpp"
#include "mgmn/log.hpp"
#include "mgmn/training.hpp"

#ifndef MGMN_VERSION
#define MGMN_VERSION "unknown"
#endif

namespace mgmn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Records what a command did, written before the work starts and
/// completed when it ends.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv, fs::path out)
      : path_(std::move(out) / "manifest.json") {
    doc_["command"] = std::move(command);
    doc_["argv"] = std::move(argv);
    doc_["code_version"] = MGMN_VERSION;
    doc_["started_at"] = utc_now();
    doc_["status"] = "running";
  }

  void set_config(json config) { doc_["config"] = std::move(config); }
  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
  void add_checksum(const fs::path& file) {
    if (fs::exists(file)) doc_["checksums"][file.string()] = file_checksum(file);
  }
  void begin() { write_json(path_, doc_); }
  void finish(bool ok) {
    doc_["finished_at"] = utc_now();
    doc_["status"] = ok ? "ok" : "failed";
    write_json(path_, doc_);
  }

 private:
  fs::path path_;
  json doc_;
};

void add_dataset_checksums(RunManifest& m, const fs::path& dir) {
  const DatasetPaths p = DatasetPaths::in(dir);
  m.add_checksum(p.graphs);
  m.add_checksum(p.pairs);
  m.add_checksum(p.split);
}

const Graph& pick_graph(const std::vector<Graph>& graphs, const std::string& id, const fs::path& file) {
  if (id.empty()) return graphs.front();
  for (const Graph& g : graphs) {
    if (g.id == id) return g;
  }
  throw DatasetError(file.string() + ": no graph with id '" + id + "'");
}

struct Common {
  std::uint64_t seed = 0;
  fs::path out;
};

struct GenArgs {
  std::string kind;
  GedDatasetOptions ged;
  CloneDatasetOptions clone;
  std::optional<int> min_nodes;
  std::optional<int> max_nodes;
};

struct GedArgs {
  fs::path g1;
  fs::path g2;
  std::string id1;
  std::string id2;
  int budget = 10;
  int timeout_ms = 10000;
};

struct ModelFlags {
  std::optional<std::string> task;
  std::optional<std::string> mode;
  std::optional<std::string> sgnn_agg;
  std::optional<std::string> ngmn_agg;
  std::optional<int> perspectives;
  std::optional<int> gcn_layers;
  std::optional<int> gcn_dim;
  std::optional<double> dropout;
  bool normalize_attention = false;
};

struct TrainArgs {
  fs::path data;
  fs::path config;
  fs::path resume;
  ModelFlags model;
  std::optional<double> lr;
  std::optional<int> epochs;
  std::optional<int> iterations;
  std::optional<int> batch;
  std::optional<int> val_every;
  std::optional<std::size_t> val_limit;
  std::optional<double> clip;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  std::string split = "test";
  std::vector<int> k = {10, 20};
  std::size_t max_queries = 0;
  bool all_pairs = false;
};

struct ScoreArgs {
  fs::path checkpoint;
  fs::path g1;
  fs::path g2;
  std::string id1;
  std::string id2;
};

int cmd_gen(const GenArgs& a, const Common& c, RunManifest& m) {
  json config;
  Dataset ds;
  if (a.kind == "ged") {
    GedDatasetOptions o = a.ged;
    o.seed = c.seed;
    if (a.min_nodes) o.min_nodes = *a.min_nodes;
    if (a.max_nodes) o.max_nodes = *a.max_nodes;
    config = {{"kind", "ged"}, {"graphs", o.graphs}, {"min_nodes", o.min_nodes}, {"max_nodes", o.max_nodes},
              {"edge_prob", o.edge_prob}, {"labels", o.labels}, {"self_pairs", o.self_pairs},
              {"node_budget", o.node_budget}};
    m.set_config(config);
    m.set_seed(c.seed);
    m.begin();
    ds = gen_ged_dataset(o);
  } else {
    CloneDatasetOptions o = a.clone;
    o.seed = c.seed;
    if (a.min_nodes) o.min_nodes = *a.min_nodes;
    if (a.max_nodes) o.max_nodes = *a.max_nodes;
    config = {{"kind", "clone"}, {"groups", o.groups}, {"variants", o.variants}, {"budget", o.budget},
              {"min_nodes", o.min_nodes}, {"max_nodes", o.max_nodes}};
    m.set_config(config);
    m.set_seed(c.seed);
    m.begin();
    ds = gen_clone_dataset(o);
  }
  save_dataset(ds, c.out);
  add_dataset_checksums(m, c.out);
  std::cout << "wrote " << ds.graphs.size() << " graphs and " << ds.pairs.size() << " pairs to "
            << c.out.string() << '\n';
  return 0;
}

int cmd_ged(const GedArgs& a, const Common&, RunManifest& m) {
  m.set_config({{"g1", a.g1.string()}, {"g2", a.g2.string()}, {"id1", a.id1}, {"id2", a.id2},
                {"node_budget", a.budget}, {"timeout_ms", a.timeout_ms}});
  m.add_checksum(a.g1);
  m.add_checksum(a.g2);
  m.begin();
  const auto graphs1 = read_graphs(a.g1);
  const auto graphs2 = read_graphs(a.g2);
  GedOptions o;
  o.node_budget = a.budget;
  o.timeout = std::chrono::milliseconds(a.timeout_ms);
  const GedResult r = ged_exact(pick_graph(graphs1, a.id1, a.g1), pick_graph(graphs2, a.id2, a.g2), o);
  std::printf("distance %.10g\nsimilarity %.10g\nnodes_expanded %lld\n", r.distance, r.normalized_similarity,
              static_cast<long long>(r.nodes_expanded));
  return 0;
}

ModelConfig apply_flags(ModelConfig c, const ModelFlags& f) {
  if (f.task) c.task = parse_task(*f.task);
  if (f.mode) c.mode = parse_mode(*f.mode);
  if (f.sgnn_agg) c.sgnn_aggregator = parse_aggregator(*f.sgnn_agg);
  if (f.ngmn_agg) c.ngmn_aggregator = parse_aggregator(*f.ngmn_agg);
  if (f.perspectives) c.perspectives = *f.perspectives;
  if (f.gcn_layers) c.gcn_layers = *f.gcn_layers;
  if (f.gcn_dim) c.gcn_dim = *f.gcn_dim;
  if (f.dropout) c.dropout = *f.dropout;
  if (f.normalize_attention) c.normalize_attention = true;
  return c;
}

int cmd_train(const TrainArgs& a, const Common& c, std::optional<std::uint64_t> seed_flag, RunManifest& m) {
  json file = json::object();
  if (!a.config.empty()) file = read_json(a.config);
  ModelConfig mc = model_config_from_json(file.value("model", json::object()));
  mc = apply_flags(mc, a.model);
  TrainConfig tc = train_config_from_json(file.value("train", json::object()));
  tc.task = mc.task;
  if (seed_flag) tc.seed = *seed_flag;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.iterations) tc.iterations = *a.iterations;
  if (a.batch) tc.batch_size = *a.batch;
  if (a.val_every) tc.val_every = *a.val_every;
  if (a.val_limit) tc.val_pair_limit = *a.val_limit;
  if (a.clip) tc.clip_norm = *a.clip;
  tc.checkpoint_dir = c.out;

  const Dataset ds = load_dataset(a.data);
  if (ds.graphs.empty()) throw DatasetError("dataset has no graphs");
  mc.input_dim = ds.feature_dim();
  mc.validate();
  tc.validate();

  m.set_config({{"model", to_json(mc)}, {"train", to_json(tc)}, {"data", a.data.string()},
                {"resume", a.resume.string()}});
  m.set_seed(tc.seed);
  add_dataset_checksums(m, a.data);
  m.begin();

  Model model(mc, tc.seed);
  Trainer trainer(model, ds, tc);
  if (!a.resume.empty()) trainer.load_state(a.resume);
  const TrainReport report = trainer.run();
  json r;
  r["steps"] = report.steps;
  r["best_step"] = report.best_step;
  r["best_val_loss"] = std::isfinite(report.best_val_loss) ? json(report.best_val_loss) : json(nullptr);
  r["log_records"] = report.log.size();
  write_json(c.out / "train_report.json", r);
  std::cout << "best validation loss " << report.best_val_loss << " at step " << report.best_step << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& a, const Common& c, RunManifest& m) {
  EvalOptions o;
  o.split = a.split;
  o.k_values = a.k;
  o.max_queries = a.max_queries;
  o.query_against_train = !a.all_pairs;
  m.set_config({{"checkpoint", a.checkpoint.string()}, {"data", a.data.string()}, {"split", o.split},
                {"k_values", o.k_values}, {"max_queries", o.max_queries}, {"all_pairs", a.all_pairs}});
  m.add_checksum(a.checkpoint);
  add_dataset_checksums(m, a.data);
  m.begin();
  const Model model = load_model(a.checkpoint);
  const Dataset ds = load_dataset(a.data);
  EvalReport report = evaluate(model, ds, o);
  report.checkpoint_id = a.checkpoint.filename().string() + "@" + file_checksum(a.checkpoint);
  write_json(c.out / "eval.json", to_json(report));
  for (const auto& [name, value] : report.metrics) std::printf("%s %.6g\n", name.c_str(), value);
  return 0;
}

int cmd_score(const ScoreArgs& a, const Common&, RunManifest& m) {
  m.set_config({{"checkpoint", a.checkpoint.string()}, {"g1", a.g1.string()}, {"g2", a.g2.string()},
                {"id1", a.id1}, {"id2", a.id2}});
  m.add_checksum(a.checkpoint);
  m.add_checksum(a.g1);
  m.add_checksum(a.g2);
  m.begin();
  const Model model = load_model(a.checkpoint);
  const auto graphs1 = read_graphs(a.g1);
  const auto graphs2 = read_graphs(a.g2);
  const Graph& g1 = pick_graph(graphs1, a.id1, a.g1);
  const Graph& g2 = pick_graph(graphs2, a.id2, a.g2);
  check_feature_width(g1, model.config().input_dim);
  check_feature_width(g2, model.config().input_dim);
  NoGradGuard no_grad;
  Rng unused(0);
  const double score = forward_pair(prepare(g1), prepare(g2), model, false, unused).item();
  std::printf("%.6f\n", score);
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  const std::size_t errors_before = log::error_count();
  CLI::App app{"Multilevel graph matching networks for graph similarity"};
  app.set_version_flag("--version", MGMN_VERSION);
  app.require_subcommand(1);

  Common common;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  std::map<const CLI::App*, std::string> default_out;
  auto add_common = [&](CLI::App* sub, const std::string& fallback) {
    sub->add_option("--seed", seed_flag, "random seed");
    sub->add_option("--out", out_flag, "output directory (default: " + fallback + ")");
    default_out[sub] = fallback;
  };

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("kind", gen.kind, "ged or clone")->required()->check(CLI::IsMember({"ged", "clone"}));
  gen_cmd->add_option("--graphs", gen.ged.graphs, "number of graphs (ged)");
  gen_cmd->add_option("--min-nodes", gen.min_nodes, "smallest graph");
  gen_cmd->add_option("--max-nodes", gen.max_nodes, "largest graph");
  gen_cmd->add_option("--edge-prob", gen.ged.edge_prob, "edge probability (ged)");
  gen_cmd->add_option("--labels", gen.ged.labels, "node label categories (ged)");
  gen_cmd->add_flag("--self-pairs", gen.ged.self_pairs, "also store every (G, G) pair (ged)");
  gen_cmd->add_option("--budget", gen.clone.budget, "edits per variant (clone)");
  gen_cmd->add_option("--groups", gen.clone.groups, "source functions (clone)");
  gen_cmd->add_option("--variants", gen.clone.variants, "variants per function (clone)");
  add_common(gen_cmd, "data");

  GedArgs ged;
  auto* ged_cmd = app.add_subcommand("ged", "exact graph edit distance of two graphs");
  ged_cmd->add_option("g1", ged.g1, "graphs.jsonl-format file")->required();
  ged_cmd->add_option("g2", ged.g2, "graphs.jsonl-format file")->required();
  ged_cmd->add_option("--id1", ged.id1, "graph id in g1 (default: first record)");
  ged_cmd->add_option("--id2", ged.id2, "graph id in g2 (default: first record)");
  ged_cmd->add_option("--node-budget", ged.budget, "largest graph accepted");
  ged_cmd->add_option("--timeout-ms", ged.timeout_ms, "search time limit");
  add_common(ged_cmd, "run");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--data", train.data, "dataset directory")->required();
  train_cmd->add_option("--config", train.config, "JSON config {\"model\": {...}, \"train\": {...}}");
  train_cmd->add_option("--resume", train.resume, "trainer state to continue from");
  train_cmd->add_option("--task", train.model.task, "classification or regression");
  train_cmd->add_option("--mode", train.model.mode, "sgnn, ngmn or mgmn");
  train_cmd->add_option("--sgnn-agg", train.model.sgnn_agg, "max, fcmax or bilstm");
  train_cmd->add_option("--ngmn-agg", train.model.ngmn_agg, "max, fcmax or bilstm");
  train_cmd->add_option("--perspectives", train.model.perspectives, "matching perspectives");
  train_cmd->add_option("--gcn-layers", train.model.gcn_layers, "GCN depth");
  train_cmd->add_option("--gcn-dim", train.model.gcn_dim, "node embedding width");
  train_cmd->add_option("--dropout", train.model.dropout, "GCN dropout rate");
  train_cmd->add_flag("--normalize-attention", train.model.normalize_attention,
                      "divide attention weights by their row sum");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--epochs", train.epochs, "classification epochs");
  train_cmd->add_option("--iterations", train.iterations, "regression iterations");
  train_cmd->add_option("--batch", train.batch, "regression batch size");
  train_cmd->add_option("--val-every", train.val_every, "regression validation cadence");
  train_cmd->add_option("--val-limit", train.val_limit, "cap on validation pairs");
  train_cmd->add_option("--clip", train.clip, "gradient norm clip (0 = off)");
  add_common(train_cmd, "run");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "dataset directory")->required();
  eval_cmd->add_option("--split", eval.split, "train, val or test");
  eval_cmd->add_option("--k", eval.k, "precision-at-k cut-offs")->delimiter(',');
  eval_cmd->add_option("--max-queries", eval.max_queries, "cap on regression queries");
  eval_cmd->add_flag("--all-pairs", eval.all_pairs, "score stored pairs inside the split instead of queries");
  add_common(eval_cmd, "run");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "similarity score of two graphs");
  score_cmd->add_option("--checkpoint", score.checkpoint, "model checkpoint")->required();
  score_cmd->add_option("g1", score.g1, "graphs.jsonl-format file")->required();
  score_cmd->add_option("g2", score.g2, "graphs.jsonl-format file")->required();
  score_cmd->add_option("--id1", score.id1, "graph id in g1 (default: first record)");
  score_cmd->add_option("--id2", score.id2, "graph id in g2 (default: first record)");
  add_common(score_cmd, "run");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) log::error(e.what());
    return code;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (seed_flag) common.seed = *seed_flag;
  common.out = out_flag.value_or(default_out[sub]);
  std::vector<std::string> argv_copy(args.begin(), args.end());
  bool ok = false;
  try {
    fs::create_directories(common.out);
    RunManifest manifest(sub->get_name(), argv_copy, common.out);
    try {
      if (sub == gen_cmd) {
        cmd_gen(gen, common, manifest);
      } else if (sub == ged_cmd) {
        cmd_ged(ged, common, manifest);
      } else if (sub == train_cmd) {
        cmd_train(train, common, seed_flag, manifest);
      } else if (sub == eval_cmd) {
        cmd_eval(eval, common, manifest);
      } else {
        cmd_score(score, common, manifest);
      }
      ok = log::error_count() == errors_before;
    } catch (const std::exception& e) {
      log::error(e.what());
    }
    manifest.finish(ok);
  } catch (const std::exception& e) {
    log::error(e.what());
  }
  return log::error_count() == errors_before ? 0 : 1;
}

}  // namespace mgmn::cli
