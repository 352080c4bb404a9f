// gad: command-line front end over the C API.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gad/gad.h"

using nlohmann::json;

namespace {

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  if (s == nullptr) return {};
  std::string out(s);
  gad_string_free(s);
  return out;
}

int report(gad_status st) {
  if (st == GAD_OK) return 0;
  std::cerr << "error: " << gad_status_name(st);
  if (*gad_last_error() != '\0') std::cerr << ": " << gad_last_error();
  std::cerr << "\n";
  return st == GAD_ERR_TRIALS_FAILED ? 2 : 1;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

// Flags shared by every experiment-style subcommand. Unset flags leave the
// config file (or library defaults) alone.
struct ExperimentFlags {
  std::string config;
  std::string edges, features, labels;
  std::optional<std::size_t> num_nodes;
  std::optional<double> avg_degree, anomaly_fraction, delta;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::string> paradigm, encoder, activation, regime;
  std::optional<int> layers, hidden, epochs, pretrain_epochs, hop_k, workers;
  std::optional<std::size_t> n_anom, n_norm;
  std::optional<double> train_ratio, lr, shuffle_ratio, mask_ratio;
  std::uint64_t seed = 0;
  int trials = 10;
  std::string out = "results";

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--edges", edges, "Edge list file");
    app->add_option("--features", features, "Feature CSV file");
    app->add_option("--labels", labels, "Label file");
    app->add_option("--num-nodes", num_nodes, "Synthetic graph size");
    app->add_option("--avg-degree", avg_degree, "Synthetic average degree");
    app->add_option("--anomaly-fraction", anomaly_fraction, "Synthetic anomaly fraction");
    app->add_option("--delta", delta, "Synthetic contextual shift");
    app->add_option("--data-seed", data_seed, "Synthetic generator seed");
    app->add_option("--paradigm", paradigm, "dgi, graphmae or end2end");
    app->add_option("--encoder", encoder, "gcn or gin");
    app->add_option("--layers", layers, "Encoder layers");
    app->add_option("--hidden", hidden, "Hidden dimension");
    app->add_option("--activation", activation, "relu, leaky_relu, tanh, prelu, identity");
    app->add_option("--regime", regime, "semi or full");
    app->add_option("--n-anom", n_anom, "Labeled anomalies (semi)");
    app->add_option("--n-norm", n_norm, "Labeled normals (semi)");
    app->add_option("--train-ratio", train_ratio, "Training ratio (full)");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--pretrain-epochs", pretrain_epochs, "Pre-training epochs");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--hop-k", hop_k, "Largest hop for R_k");
    app->add_option("--shuffle-ratio", shuffle_ratio, "DGI corruption ratio");
    app->add_option("--mask-ratio", mask_ratio, "GraphMAE mask ratio");
    app->add_option("--workers", workers, "Concurrent trials");
    app->add_option("--seed", seed, "Base seed")->capture_default_str();
    app->add_option("--trials", trials, "Number of trials")->capture_default_str();
    app->add_option("--out", out, "Output directory")->capture_default_str();
  }

  json build(const CLI::App* app) const {
    json j = config.empty() ? json::object() : read_json_file(config);
    auto set = [&](const char* flag) { return app->count(flag) > 0; };
    if (!edges.empty() || !features.empty() || !labels.empty()) {
      j["dataset"] = {{"edges", edges}, {"features", features}, {"labels", labels}};
    }
    if (!j.contains("dataset")) j["dataset"] = {{"synthetic", json::object()}};
    if (j["dataset"].contains("synthetic")) {
      json& s = j["dataset"]["synthetic"];
      if (num_nodes) s["num_nodes"] = *num_nodes;
      if (avg_degree) {
        s.erase("p_intra");
        s.erase("p_inter");
        s["avg_degree"] = *avg_degree;
      }
      if (anomaly_fraction) s["anomaly_fraction"] = *anomaly_fraction;
      if (delta) s["delta"] = *delta;
      if (data_seed) s["seed"] = *data_seed;
    }
    if (paradigm) j["paradigm"] = *paradigm;
    if (encoder) j["encoder"]["kind"] = *encoder;
    if (layers) j["encoder"]["layers"] = *layers;
    if (hidden) j["encoder"]["hidden"] = *hidden;
    if (activation) j["encoder"]["activation"] = *activation;
    if (regime) j["split"]["regime"] = *regime;
    if (n_anom) j["split"]["n_anom"] = *n_anom;
    if (n_norm) j["split"]["n_norm"] = *n_norm;
    if (train_ratio) j["split"]["train_ratio"] = *train_ratio;
    if (epochs) j["epochs"] = *epochs;
    if (pretrain_epochs) j["pretrain_epochs"] = *pretrain_epochs;
    if (lr) j["lr"] = *lr;
    if (hop_k) j["hop_k"] = *hop_k;
    if (shuffle_ratio) j["dgi"]["shuffle_ratio"] = *shuffle_ratio;
    if (mask_ratio) j["graphmae"]["mask_ratio"] = *mask_ratio;
    if (workers) j["workers"] = *workers;
    if (set("--seed") || !j.contains("seed")) j["seed"] = seed;
    if (set("--trials") || !j.contains("trials")) j["trials"] = trials;
    if (set("--out") || !j.contains("out")) j["out"] = out;
    return j;
  }
};

struct Experiment {
  gad_experiment* handle = nullptr;
  ~Experiment() { gad_experiment_free(handle); }
};

gad_status create(const json& config, Experiment& e) {
  return gad_experiment_create(config.dump().c_str(), &e.handle);
}

void print_summary(const std::string& aggregate_text, double seconds) {
  const json a = json::parse(aggregate_text);
  std::cout << "config " << a.value("config_hash", "") << "\n";
  if (a.contains("metrics")) {
    for (const auto& [name, m] : a["metrics"].items()) {
      std::printf("%-10s mean %.4f  std %.4f\n", name.c_str(), m.value("mean", 0.0), m.value("std", 0.0));
    }
  }
  if (a.contains("warning")) std::cout << "warning: " << a["warning"].get<std::string>() << "\n";
  std::printf("wall time %.1fs\n", seconds);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph anomaly detection experiments"};
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  auto* run = app.add_subcommand("run", "Run all trials of one configuration");
  run_flags.attach(run);

  ExperimentFlags grid_flags;
  std::vector<std::string> grid_kind, grid_act;
  std::vector<int> grid_layers, grid_hidden, grid_epochs;
  std::vector<double> grid_lr;
  auto* grid = app.add_subcommand("grid", "Grid search selected on validation AUPRC");
  grid_flags.attach(grid);
  grid->add_option("--grid-kind", grid_kind, "Encoder kinds")->delimiter(',');
  grid->add_option("--grid-layers", grid_layers, "Layer counts")->delimiter(',');
  grid->add_option("--grid-hidden", grid_hidden, "Hidden sizes")->delimiter(',');
  grid->add_option("--grid-activation", grid_act, "Activations")->delimiter(',');
  grid->add_option("--grid-lr", grid_lr, "Learning rates")->delimiter(',');
  grid->add_option("--grid-epochs", grid_epochs, "Epoch counts")->delimiter(',');

  ExperimentFlags ablate_flags;
  std::vector<double> ratios{0.25, 0.5, 0.75, 1.0};
  auto* ablate = app.add_subcommand("ablate-shuffle", "DGI shuffle-ratio ablation");
  ablate_flags.attach(ablate);
  ablate->add_option("--ratios", ratios, "Shuffle ratios")->delimiter(',')->capture_default_str();

  ExperimentFlags sweep_flags;
  std::vector<std::size_t> counts{1, 5, 20};
  auto* sweep = app.add_subcommand("sweep-labels", "Sweep the number of labeled anomalies");
  sweep_flags.attach(sweep);
  sweep->add_option("--counts", counts, "Labeled anomaly counts")->delimiter(',')->capture_default_str();

  ExperimentFlags diag_flags;
  std::vector<std::size_t> diag_counts;
  int diag_trials = 10;
  auto* diagnose = app.add_subcommand("diagnose", "Graph statistics and k-hop reachability");
  diag_flags.attach(diagnose);
  diagnose->add_option("--counts", diag_counts, "Labeled anomaly counts for an R_k table")->delimiter(',');
  diagnose->add_option("--diag-trials", diag_trials, "Splits per count")->capture_default_str();

  ExperimentFlags gen_flags;
  std::string gen_prefix;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic graph to disk");
  gen_flags.attach(gen);
  gen->add_option("--prefix", gen_prefix, "Output prefix for .edges/.features.csv/.labels")->required();

  std::string gl_config;
  std::uint64_t gl_seed = 0;
  int gl_trials = 5;
  std::string gl_out = "results";
  auto* gl = app.add_subcommand("graph-level", "Graph-level anomaly detection");
  gl->add_option("--config", gl_config, "JSON config file");
  gl->add_option("--seed", gl_seed, "Base seed")->capture_default_str();
  gl->add_option("--trials", gl_trials, "Number of trials")->capture_default_str();
  gl->add_option("--out", gl_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (run->parsed()) {
      Experiment e;
      if (auto st = create(run_flags.build(run), e); st != GAD_OK) return report(st);
      char* agg = nullptr;
      const gad_status st = gad_experiment_run(e.handle, &agg);
      if (agg != nullptr) print_summary(take(agg), elapsed(t0));
      return report(st);
    }
    if (grid->parsed()) {
      json j = grid_flags.build(grid);
      auto put = [&](const char* key, const auto& v) {
        if (!v.empty()) j["grid"][key] = v;
      };
      put("kind", grid_kind);
      put("layers", grid_layers);
      put("hidden", grid_hidden);
      put("activation", grid_act);
      put("lr", grid_lr);
      put("epochs", grid_epochs);
      if (!j.contains("grid")) j["grid"] = json::object();
      Experiment e;
      if (auto st = create(j, e); st != GAD_OK) return report(st);
      char* best = nullptr;
      char* table = nullptr;
      const gad_status st = gad_experiment_grid(e.handle, &best, &table);
      std::cout << take(table);
      if (best != nullptr) std::cout << take(best) << "\n";
      std::printf("wall time %.1fs\n", elapsed(t0));
      return report(st);
    }
    if (ablate->parsed()) {
      json j = ablate_flags.build(ablate);
      Experiment e;
      if (auto st = create(j, e); st != GAD_OK) return report(st);
      char* csv = nullptr;
      const gad_status st = gad_experiment_ablate_shuffle(e.handle, ratios.data(), ratios.size(), &csv);
      std::cout << take(csv);
      return report(st);
    }
    if (sweep->parsed()) {
      json j = sweep_flags.build(sweep);
      Experiment e;
      if (auto st = create(j, e); st != GAD_OK) return report(st);
      char* csv = nullptr;
      const gad_status st = gad_experiment_sweep_labels(e.handle, counts.data(), counts.size(), &csv);
      std::cout << take(csv);
      return report(st);
    }
    if (diagnose->parsed() || gen->parsed()) {
      const bool diag = diagnose->parsed();
      const json j = diag ? diag_flags.build(diagnose) : gen_flags.build(gen);
      const json& d = j.at("dataset");
      gad_graph* g = nullptr;
      gad_status st = d.contains("synthetic")
                          ? gad_graph_generate(d["synthetic"].dump().c_str(), &g)
                          : gad_graph_load(d.value("edges", "").c_str(), d.value("features", "").c_str(),
                                           d.value("labels", "").c_str(), &g);
      if (st != GAD_OK) return report(st);
      if (diag) {
        json opts = {{"k", j.value("hop_k", 3)},
                     {"seed", j.value("seed", std::uint64_t{0})},
                     {"n_anom", j.contains("split") ? j["split"].value("n_anom", std::size_t{20}) : 20},
                     {"counts", diag_counts},
                     {"trials", diag_trials}};
        char* text = nullptr;
        st = gad_diagnose(g, opts.dump().c_str(), &text);
        if (text != nullptr) std::cout << take(text) << "\n";
      } else {
        st = gad_graph_save(g, (gen_prefix + ".edges").c_str(), (gen_prefix + ".features.csv").c_str(),
                            (gen_prefix + ".labels").c_str());
        if (st == GAD_OK) {
          std::size_t n = 0, m = 0;
          gad_graph_size(g, &n, &m);
          std::cout << "wrote " << n << " nodes, " << m << " edges to " << gen_prefix << ".*\n";
        }
      }
      gad_graph_free(g);
      return report(st);
    }
    if (gl->parsed()) {
      json j = gl_config.empty() ? json::object() : read_json_file(gl_config);
      if (gl->count("--seed") || !j.contains("seed")) j["seed"] = gl_seed;
      if (gl->count("--trials") || !j.contains("trials")) j["trials"] = gl_trials;
      if (gl->count("--out") || !j.contains("out")) j["out"] = gl_out;
      char* text = nullptr;
      const gad_status st = gad_graph_level_run(j.dump().c_str(), &text);
      if (text != nullptr) std::cout << take(text) << "\n";
      return report(st);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
