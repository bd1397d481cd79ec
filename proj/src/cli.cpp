#include "chatgnn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "chatgnn/analysis.hpp"
#include "chatgnn/data_io.hpp"
#include "chatgnn/errors.hpp"
#include "chatgnn/gradcheck.hpp"
#include "chatgnn/model.hpp"
#include "chatgnn/rng.hpp"
#include "chatgnn/trainer.hpp"

namespace chatgnn::cli {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kOnOff{"on", "off"};

struct ModelFlags {
  std::size_t layers = 4;
  std::size_t hidden = 64;
  std::string layer_norm = "on";
  std::string projection = "off";
  std::string directed = "off";
  std::string kind = "chat";
  std::string wrap = "chat";
};

struct TrainFlags {
  double lr = 3e-3;
  double weight_decay = 1e-4;
  std::size_t max_epochs = 5000;
  std::size_t patience = 500;
  std::size_t warmup = 200;
  long split = -1;
  std::uint64_t seed = 0;
  std::string metric = "accuracy";
};

void add_model_flags(CLI::App* app, ModelFlags& f, bool with_depth) {
  if (with_depth) {
    app->add_option("--layers", f.layers, "Message-passing layers")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
        ->capture_default_str();
    app->add_option("--hidden", f.hidden, "Hidden width D")
        ->check(CLI::Range(std::size_t{1}, std::size_t{4096}))
        ->capture_default_str();
  }
  app->add_option("--layer-norm", f.layer_norm, "Layer norm after each layer")
      ->check(CLI::IsMember(kOnOff))
      ->capture_default_str();
  app->add_option("--projection", f.projection, "Separate self/neighbour projections")
      ->check(CLI::IsMember(kOnOff))
      ->capture_default_str();
  app->add_option("--directed", f.directed, "Two-direction message passing")
      ->check(CLI::IsMember(kOnOff))
      ->capture_default_str();
  app->add_option("--baseline-wrap", f.wrap,
                  "Comparison layers: chat wrapper (residual, norm) or plain relu stack")
      ->check(CLI::IsMember({"chat", "plain"}))
      ->capture_default_str();
}

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_split) {
  app->add_option("--lr", f.lr, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--weight-decay", f.weight_decay, "Coupled L2 weight decay")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--max-epochs", f.max_epochs)
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}))
      ->capture_default_str();
  app->add_option("--patience", f.patience)->capture_default_str();
  app->add_option("--warmup", f.warmup)->capture_default_str();
  if (with_split) {
    app->add_option("--split", f.split, "Split index, -1 for all")
        ->check(CLI::Range(-1L, 1000000L))
        ->capture_default_str();
  }
  app->add_option("--seed", f.seed, "Model initialisation seed")->capture_default_str();
  app->add_option("--metric", f.metric, "Test and early-stopping metric")
      ->check(CLI::IsMember({"accuracy", "roc_auc"}))
      ->capture_default_str();
}

ModelConfig model_config(const ModelFlags& f, const Dataset& data, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.in_features = data.features.cols();
  cfg.classes = data.num_classes;
  cfg.hidden = f.hidden;
  cfg.layers = f.layers;
  cfg.use_layer_norm = f.layer_norm == "on";
  cfg.use_projection = f.projection == "on";
  cfg.directed_mode = f.directed == "on";
  cfg.layer_kind = layer_kind_from_string(f.kind);
  cfg.baseline_wrap = baseline_wrap_from_string(f.wrap);
  cfg.seed = seed;
  cfg.validate();
  if (cfg.directed_mode && !data.graph.directed()) {
    throw std::invalid_argument("--directed on needs a dataset with \"directed\": true");
  }
  return cfg;
}

TrainConfig train_config(const TrainFlags& f) {
  TrainConfig cfg;
  cfg.lr = f.lr;
  cfg.weight_decay = f.weight_decay;
  cfg.max_epochs = f.max_epochs;
  cfg.patience = f.patience;
  cfg.warmup = f.warmup;
  cfg.test_metric = metric_from_string(f.metric);
  cfg.stop_metric = cfg.test_metric;
  cfg.validate();
  return cfg;
}

std::vector<std::size_t> requested_splits(long split, const Dataset& data) {
  if (data.splits.empty()) throw std::invalid_argument("dataset '" + data.name + "' has no splits");
  if (split < 0) {
    std::vector<std::size_t> all(data.splits.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  if (static_cast<std::size_t>(split) >= data.splits.size()) {
    throw std::invalid_argument("--split " + std::to_string(split) + " but dataset has " +
                                std::to_string(data.splits.size()) + " splits");
  }
  return {static_cast<std::size_t>(split)};
}

// "chatgnn <sub>" followed by every option except the output path as
// name=value, so identical runs written to different places stay identical.
std::vector<std::string> echo_flags(const CLI::App* sub) {
  std::vector<std::string> lines{"chatgnn " + sub->get_name()};
  std::istringstream in(sub->config_to_str(true, false));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line.front() == '[' || line.rfind("out=", 0) == 0) continue;
    lines.push_back(line);
  }
  return lines;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---- subcommands -----------------------------------------------------------

struct TrainCmd {
  std::string dataset;
  fs::path out;
  ModelFlags model;
  TrainFlags train;
};

int do_train(const TrainCmd& c, const CLI::App* sub) {
  const Dataset data = load_dataset(c.dataset);
  const TrainConfig tc = train_config(c.train);
  const auto splits = requested_splits(c.train.split, data);
  ensure_directory(c.out);
  const auto comments = echo_flags(sub);

  std::vector<double> per_split;
  for (std::size_t s : splits) {
    const ModelConfig mc = model_config(c.model, data, c.train.seed + s);
    const TrainResult r = train(init_model(mc), data, s, tc);
    const std::string suffix = "split" + std::to_string(s);
    save_checkpoint(r.best_model, c.out / ("checkpoint_" + suffix + ".json"));
    auto split_comments = comments;
    split_comments.push_back("split=" + std::to_string(s) + " model_seed=" +
                             std::to_string(mc.seed) + " best_epoch=" +
                             std::to_string(r.best_epoch));
    write_metrics_csv(r.history, c.out / ("metrics_" + suffix + ".csv"), split_comments);
    per_split.push_back(r.best_test);
    std::cout << "split " << s << ": best epoch " << r.best_epoch << ", val " << std::fixed
              << std::setprecision(4) << r.best_val << ", test " << r.best_test << '\n';
  }
  write_summary(per_split, c.out / "summary.txt", c.train.metric, comments);
  std::cout << c.train.metric << ' ' << format_mean_std(per_split) << '\n';
  return kExitOk;
}

struct EvalCmd {
  std::string dataset;
  std::string checkpoint;
  std::size_t split = 0;
  std::string part = "test";
  std::string metric = "accuracy";
};

int do_eval(const EvalCmd& c) {
  const Dataset data = load_dataset(c.dataset);
  const ChatGnnModel model = load_checkpoint(c.checkpoint);
  requested_splits(static_cast<long>(c.split), data);
  const Split& s = data.splits[c.split];
  const auto& mask = c.part == "train" ? s.train : c.part == "val" ? s.val : s.test;
  const double value = evaluate(model, data, mask, metric_from_string(c.metric));
  std::cout << std::setprecision(6) << std::fixed << value << '\n';
  return kExitOk;
}

struct DepthSweepCmd {
  std::string dataset;
  fs::path out;
  std::vector<std::string> models{"chat", "gcn"};
  std::vector<std::size_t> depths{2, 4, 8, 16, 32};
  ModelFlags model;
  TrainFlags train;
};

int do_depth_sweep(const DepthSweepCmd& c, const CLI::App* sub) {
  const Dataset data = load_dataset(c.dataset);
  const TrainConfig tc = train_config(c.train);
  const auto splits = requested_splits(c.train.split, data);
  std::ofstream out = open_output(c.out);
  for (const auto& line : echo_flags(sub)) out << "# " << line << '\n';
  out << "model,layers,mean,std,splits\n";
  for (const auto& kind : c.models) {
    for (std::size_t depth : c.depths) {
      ModelFlags mf = c.model;
      mf.kind = kind;
      mf.layers = depth;
      std::vector<double> scores;
      for (std::size_t s : splits) {
        const ModelConfig mc = model_config(mf, data, c.train.seed + s);
        scores.push_back(train(init_model(mc), data, s, tc).best_test);
      }
      out << kind << ',' << depth << ',' << std::setprecision(6) << mean_of(scores) << ','
          << sample_sd(scores) << ',' << scores.size() << '\n';
      std::cout << kind << " L=" << depth << ": " << format_mean_std(scores) << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + c.out.string() + "'");
  return kExitOk;
}

struct DirichletCmd {
  std::string model = "chat";
  std::size_t rows = 10;
  std::size_t cols = 10;
  std::size_t depth = 1000;
  std::uint64_t seed = 0;
  fs::path out;
};

int do_dirichlet(const DirichletCmd& c, const CLI::App* sub) {
  const EnergyTrace trace =
      energy_decay_experiment(layer_kind_from_string(c.model), c.depth, c.rows, c.cols, c.seed);
  if (c.out.has_parent_path()) ensure_directory(c.out.parent_path());
  write_energy_csv(trace, c.out, echo_flags(sub));
  return kExitOk;
}

struct AttentionCmd {
  std::string dataset;
  std::string checkpoint;
  std::vector<NodeId> nodes;
  std::size_t num_nodes = 5;
  std::size_t first_layer = 0;
  std::size_t last_layer = 5;
  std::uint64_t seed = 0;
  fs::path out;
};

int do_attention(const AttentionCmd& c, const CLI::App* sub) {
  const Dataset data = load_dataset(c.dataset);
  const ChatGnnModel model = load_checkpoint(c.checkpoint);
  std::vector<NodeId> nodes = c.nodes;
  if (nodes.empty()) {
    // Draw among nodes that have at least two neighbours to compare.
    std::vector<NodeId> eligible;
    for (NodeId v = 0; v < data.num_nodes(); ++v)
      if (data.graph.degree(v) >= 2) eligible.push_back(v);
    Rng rng(c.seed);
    rng.shuffle(std::span<NodeId>(eligible));
    eligible.resize(std::min(eligible.size(), c.num_nodes));
    nodes = eligible;
  }
  std::vector<NodeId> skipped;
  const auto dumps = attention_cosine(model, data, nodes, c.first_layer, c.last_layer, &skipped);
  for (NodeId v : skipped) std::cerr << "node " << v << " skipped: fewer than two neighbours\n";
  std::ofstream out = open_output(c.out);
  out << cosine_dump_to_string(dumps, echo_flags(sub)) << '\n';
  if (!out) throw IoError("failed writing '" + c.out.string() + "'");
  return kExitOk;
}

struct GradcheckCmd {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
};

int do_gradcheck(const GradcheckCmd& c) {
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(c.instances, c.seed)) {
    std::cout << std::left << std::setw(28) << r.name << (r.passed() ? "PASS" : "FAIL")
              << "  worst " << std::scientific << std::setprecision(2) << r.worst_error
              << " (tol " << r.tolerance << "), " << r.failures << '/' << r.instances
              << " failed, " << r.redraws << " redraws\n"
              << std::defaultfloat;
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitRuntimeError;
}

struct SynthCmd {
  SyntheticSpec spec;
  fs::path out;
};

int do_synth(const SynthCmd& c) {
  const Dataset data = make_synthetic_dataset(c.spec);
  if (c.out.has_parent_path()) ensure_directory(c.out.parent_path());
  save_dataset(data, c.out);
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Channel-attentive graph neural network toolkit", "chatgnn"};
  app.require_subcommand(1, 1);

  TrainCmd train_cmd;
  auto* train_sub = app.add_subcommand("train", "Train on one or all splits of a dataset");
  train_sub->add_option("--dataset", train_cmd.dataset)->required()->check(CLI::ExistingFile);
  train_sub->add_option("--out", train_cmd.out, "Output directory")->required();
  train_sub->add_option("--model", train_cmd.model.kind, "Layer kind")
      ->check(CLI::IsMember({"chat", "gcn", "scalar_attention", "freq_gate"}))
      ->capture_default_str();
  add_model_flags(train_sub, train_cmd.model, true);
  add_train_flags(train_sub, train_cmd.train, true);

  EvalCmd eval_cmd;
  auto* eval_sub = app.add_subcommand("eval", "Evaluate a checkpoint on one split part");
  eval_sub->add_option("--dataset", eval_cmd.dataset)->required()->check(CLI::ExistingFile);
  eval_sub->add_option("--checkpoint", eval_cmd.checkpoint)->required()->check(CLI::ExistingFile);
  eval_sub->add_option("--split", eval_cmd.split)->capture_default_str();
  eval_sub->add_option("--part", eval_cmd.part)
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_sub->add_option("--metric", eval_cmd.metric)
      ->check(CLI::IsMember({"accuracy", "roc_auc"}))
      ->capture_default_str();

  DepthSweepCmd sweep_cmd;
  sweep_cmd.model.hidden = 32;
  auto* sweep_sub = app.add_subcommand("depth-sweep", "Mean test metric against depth per model");
  sweep_sub->add_option("--dataset", sweep_cmd.dataset)->required()->check(CLI::ExistingFile);
  sweep_sub->add_option("--out", sweep_cmd.out, "CSV path")->required();
  sweep_sub->add_option("--models", sweep_cmd.models)
      ->delimiter(',')
      ->check(CLI::IsMember({"chat", "gcn", "scalar_attention", "freq_gate"}))
      ->capture_default_str();
  sweep_sub->add_option("--depths", sweep_cmd.depths)
      ->delimiter(',')
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
      ->capture_default_str();
  sweep_cmd.model.wrap = "plain";
  add_model_flags(sweep_sub, sweep_cmd.model, false);
  sweep_sub->add_option("--hidden", sweep_cmd.model.hidden)
      ->check(CLI::Range(std::size_t{1}, std::size_t{4096}))
      ->capture_default_str();
  add_train_flags(sweep_sub, sweep_cmd.train, true);

  DirichletCmd dir_cmd;
  auto* dir_sub = app.add_subcommand("dirichlet", "Dirichlet energy against depth on a grid");
  dir_sub->add_option("--model", dir_cmd.model)
      ->check(CLI::IsMember({"chat", "gcn", "scalar_attention", "freq_gate"}))
      ->capture_default_str();
  dir_sub->add_option("--rows", dir_cmd.rows)
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
      ->capture_default_str();
  dir_sub->add_option("--cols", dir_cmd.cols)
      ->check(CLI::Range(std::size_t{1}, std::size_t{10000}))
      ->capture_default_str();
  dir_sub->add_option("--depth", dir_cmd.depth)
      ->check(CLI::Range(std::size_t{0}, kMaxEnergyLayers))
      ->capture_default_str();
  dir_sub->add_option("--seed", dir_cmd.seed)->capture_default_str();
  dir_sub->add_option("--out", dir_cmd.out, "CSV path")->required();

  AttentionCmd att_cmd;
  auto* att_sub = app.add_subcommand("attention", "Cosine similarity of channel weights");
  att_sub->add_option("--dataset", att_cmd.dataset)->required()->check(CLI::ExistingFile);
  att_sub->add_option("--checkpoint", att_cmd.checkpoint)->required()->check(CLI::ExistingFile);
  att_sub->add_option("--nodes", att_cmd.nodes, "Explicit node ids (default: random draw)")
      ->delimiter(',');
  att_sub->add_option("--num-nodes", att_cmd.num_nodes)->capture_default_str();
  att_sub->add_option("--first-layer", att_cmd.first_layer)->capture_default_str();
  att_sub->add_option("--last-layer", att_cmd.last_layer, "Exclusive")->capture_default_str();
  att_sub->add_option("--seed", att_cmd.seed)->capture_default_str();
  att_sub->add_option("--out", att_cmd.out, "JSON path")->required();

  GradcheckCmd gc_cmd;
  auto* gc_sub = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc_sub->add_option("--instances", gc_cmd.instances)
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}))
      ->capture_default_str();
  gc_sub->add_option("--seed", gc_cmd.seed)->capture_default_str();

  SynthCmd synth_cmd;
  auto* synth_sub = app.add_subcommand("synth", "Write a synthetic heterophilous dataset");
  synth_sub->add_option("--out", synth_cmd.out, "Dataset path")->required();
  synth_sub->add_option("--name", synth_cmd.spec.name)->capture_default_str();
  synth_sub->add_option("--nodes", synth_cmd.spec.num_nodes)
      ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}))
      ->capture_default_str();
  synth_sub->add_option("--classes", synth_cmd.spec.num_classes)
      ->check(CLI::Range(std::size_t{2}, std::size_t{1000}))
      ->capture_default_str();
  synth_sub->add_option("--features", synth_cmd.spec.num_features)
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}))
      ->capture_default_str();
  synth_sub->add_option("--homophily", synth_cmd.spec.homophily)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_sub->add_option("--degree", synth_cmd.spec.average_degree)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth_sub->add_option("--splits", synth_cmd.spec.num_splits)->capture_default_str();
  synth_sub->add_option("--seed", synth_cmd.spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsageError;
  }

  try {
    if (*train_sub) return do_train(train_cmd, train_sub);
    if (*eval_sub) return do_eval(eval_cmd);
    if (*sweep_sub) return do_depth_sweep(sweep_cmd, sweep_sub);
    if (*dir_sub) return do_dirichlet(dir_cmd, dir_sub);
    if (*att_sub) return do_attention(att_cmd, att_sub);
    if (*gc_sub) return do_gradcheck(gc_cmd);
    if (*synth_sub) return do_synth(synth_cmd);
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid " << e.field() << ": " << e.what() << '\n';
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitUsageError;
}

}  // namespace chatgnn::cli
