#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "detector.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace gad {

using nlohmann::json;

Paradigm parse_paradigm(std::string_view name) {
  if (name == "dgi") return Paradigm::kDgi;
  if (name == "graphmae") return Paradigm::kGraphMae;
  if (name == "end2end") return Paradigm::kEnd2End;
  fail(ErrorCode::kInvalidArgument, "unknown paradigm '" + std::string(name) + "'");
}

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::kDgi: return "dgi";
    case Paradigm::kGraphMae: return "graphmae";
    case Paradigm::kEnd2End: return "end2end";
  }
  return "?";
}

Graph DatasetSource::materialize() const {
  if (synthetic) return generate_synthetic(*synthetic);
  return load_dataset(edges, features, labels);
}

std::size_t Grid::size() const {
  auto n = [](std::size_t k) { return k == 0 ? std::size_t{1} : k; };
  return n(kind.size()) * n(layers.size()) * n(hidden.size()) * n(activation.size()) *
         n(lr.size()) * n(epochs.size());
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, std::string_view where) {
  require(j.is_object(), ErrorCode::kParse, std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    require(ok, ErrorCode::kParse, "unknown field '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("field '") + key + "': " + e.what());
  }
}

SyntheticSpec synthetic_from_json(const json& j) {
  reject_unknown(j, {"num_nodes", "num_blocks", "p_intra", "p_inter", "avg_degree", "anomaly_fraction",
                     "structural_share", "clique_size", "contextual", "structural", "delta",
                     "feature_dim", "seed"},
                 "dataset.synthetic");
  SyntheticSpec s;
  s.num_nodes = get_or<std::size_t>(j, "num_nodes", s.num_nodes);
  if (j.contains("avg_degree")) {
    require(!j.contains("p_intra") && !j.contains("p_inter"), ErrorCode::kParse,
            "give either avg_degree or p_intra/p_inter");
    s = SyntheticSpec::sparse_benchmark(s.num_nodes, get_or<double>(j, "avg_degree", 4.0), 0);
  }
  s.num_blocks = get_or<int>(j, "num_blocks", s.num_blocks);
  s.p_intra = get_or<double>(j, "p_intra", s.p_intra);
  s.p_inter = get_or<double>(j, "p_inter", s.p_inter);
  s.anomaly_fraction = get_or<double>(j, "anomaly_fraction", s.anomaly_fraction);
  s.structural_share = get_or<double>(j, "structural_share", s.structural_share);
  s.clique_size = get_or<int>(j, "clique_size", s.clique_size);
  s.contextual = get_or<bool>(j, "contextual", s.contextual);
  s.structural = get_or<bool>(j, "structural", s.structural);
  s.delta = get_or<double>(j, "delta", s.delta);
  s.feature_dim = get_or<int>(j, "feature_dim", s.feature_dim);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  s.validate();
  return s;
}

json synthetic_to_json(const SyntheticSpec& s) {
  return {{"num_nodes", s.num_nodes},       {"num_blocks", s.num_blocks},
          {"p_intra", s.p_intra},           {"p_inter", s.p_inter},
          {"anomaly_fraction", s.anomaly_fraction}, {"structural_share", s.structural_share},
          {"clique_size", s.clique_size},   {"contextual", s.contextual},
          {"structural", s.structural},     {"delta", s.delta},
          {"feature_dim", s.feature_dim},   {"seed", s.seed}};
}

template <typename T, typename F>
std::vector<T> list_or_empty(const json& j, const char* key, F convert) {
  std::vector<T> out;
  if (!j.contains(key)) return out;
  require(j.at(key).is_array() && !j.at(key).empty(), ErrorCode::kParse,
          std::string("grid.") + key + " must be a non-empty array");
  for (const auto& v : j.at(key)) out.push_back(convert(v));
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  reject_unknown(j, {"dataset", "paradigm", "encoder", "split", "epochs", "pretrain_epochs", "lr",
                     "trials", "seed", "hop_k", "eval_every", "dgi", "graphmae", "grid", "out", "workers"},
                 "config");
  ExperimentConfig c;
  require(j.contains("dataset"), ErrorCode::kParse, "config needs a dataset");
  const json& d = j.at("dataset");
  reject_unknown(d, {"synthetic", "edges", "features", "labels"}, "dataset");
  if (d.contains("synthetic")) {
    c.dataset.synthetic = synthetic_from_json(d.at("synthetic"));
  } else {
    require(d.contains("edges") && d.contains("features") && d.contains("labels"), ErrorCode::kParse,
            "dataset needs either synthetic or edges/features/labels");
    c.dataset.edges = d.at("edges").get<std::string>();
    c.dataset.features = d.at("features").get<std::string>();
    c.dataset.labels = d.at("labels").get<std::string>();
  }
  c.paradigm = parse_paradigm(get_or<std::string>(j, "paradigm", "dgi"));

  const json enc = j.value("encoder", json::object());
  reject_unknown(enc, {"kind", "layers", "hidden", "activation"}, "encoder");
  c.encoder.kind = parse_encoder_kind(get_or<std::string>(enc, "kind", "gcn"));
  c.encoder.num_layers = get_or<int>(enc, "layers", 2);
  c.encoder.hidden_dim = get_or<int>(enc, "hidden", 32);
  // PReLU is the DGI convention when no activation is given.
  c.encoder.activation = parse_activation(
      get_or<std::string>(enc, "activation", c.paradigm == Paradigm::kDgi ? "prelu" : "relu"));

  const json split = j.value("split", json::object());
  reject_unknown(split, {"regime", "n_anom", "n_norm", "val_anom", "val_norm", "train_ratio"}, "split");
  const auto regime = get_or<std::string>(split, "regime", "semi");
  require(regime == "semi" || regime == "full", ErrorCode::kParse, "split.regime must be semi or full");
  c.split.semi = regime == "semi";
  c.split.semi_options.n_anom = get_or<std::size_t>(split, "n_anom", 20);
  c.split.semi_options.n_norm = get_or<std::size_t>(split, "n_norm", 80);
  c.split.semi_options.val_anom = get_or<std::size_t>(split, "val_anom", 20);
  c.split.semi_options.val_norm = get_or<std::size_t>(split, "val_norm", 80);
  c.split.train_ratio = get_or<double>(split, "train_ratio", 0.4);

  c.epochs = get_or<int>(j, "epochs", c.epochs);
  c.pretrain_epochs = get_or<int>(j, "pretrain_epochs", c.epochs);
  c.lr = get_or<double>(j, "lr", c.lr);
  c.trials = get_or<int>(j, "trials", c.trials);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.hop_k = get_or<int>(j, "hop_k", c.hop_k);
  c.eval_every = get_or<int>(j, "eval_every", c.eval_every);
  const json dgi = j.value("dgi", json::object());
  reject_unknown(dgi, {"shuffle_ratio"}, "dgi");
  c.dgi.shuffle_ratio = get_or<double>(dgi, "shuffle_ratio", 1.0);
  const json mae = j.value("graphmae", json::object());
  reject_unknown(mae, {"mask_ratio", "gamma"}, "graphmae");
  c.mae.mask_ratio = get_or<double>(mae, "mask_ratio", 0.5);
  c.mae.gamma = get_or<double>(mae, "gamma", 2.0);

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"kind", "layers", "hidden", "activation", "lr", "epochs"}, "grid");
    Grid grid;
    grid.kind = list_or_empty<EncoderKind>(g, "kind", [](const json& v) { return parse_encoder_kind(v.get<std::string>()); });
    grid.layers = list_or_empty<int>(g, "layers", [](const json& v) { return v.get<int>(); });
    grid.hidden = list_or_empty<int>(g, "hidden", [](const json& v) { return v.get<int>(); });
    grid.activation = list_or_empty<Activation>(g, "activation", [](const json& v) { return parse_activation(v.get<std::string>()); });
    grid.lr = list_or_empty<double>(g, "lr", [](const json& v) { return v.get<double>(); });
    grid.epochs = list_or_empty<int>(g, "epochs", [](const json& v) { return v.get<int>(); });
    c.grid = grid;
  }
  c.out = get_or<std::string>(j, "out", "");
  c.workers = get_or<int>(j, "workers", 1);

  require(c.epochs >= 1 && c.pretrain_epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(c.lr > 0.0, ErrorCode::kInvalidArgument, "lr must be positive");
  require(c.trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  require(c.hop_k >= 1, ErrorCode::kInvalidArgument, "hop_k must be >= 1");
  require(c.eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  require(c.workers >= 1, ErrorCode::kInvalidArgument, "workers must be >= 1");
  c.dgi.validate();
  c.mae.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  if (dataset.synthetic) {
    j["dataset"] = {{"synthetic", synthetic_to_json(*dataset.synthetic)}};
  } else {
    j["dataset"] = {{"edges", dataset.edges.string()},
                    {"features", dataset.features.string()},
                    {"labels", dataset.labels.string()}};
  }
  j["paradigm"] = to_string(paradigm);
  j["encoder"] = {{"kind", to_string(encoder.kind)},
                  {"layers", encoder.num_layers},
                  {"hidden", encoder.hidden_dim},
                  {"activation", to_string(encoder.activation)}};
  if (split.semi) {
    j["split"] = {{"regime", "semi"},
                  {"n_anom", split.semi_options.n_anom},
                  {"n_norm", split.semi_options.n_norm},
                  {"val_anom", split.semi_options.val_anom},
                  {"val_norm", split.semi_options.val_norm}};
  } else {
    j["split"] = {{"regime", "full"}, {"train_ratio", split.train_ratio}};
  }
  j["epochs"] = epochs;
  j["pretrain_epochs"] = pretrain_epochs;
  j["lr"] = lr;
  j["trials"] = trials;
  j["seed"] = seed;
  j["hop_k"] = hop_k;
  j["eval_every"] = eval_every;
  j["dgi"] = {{"shuffle_ratio", dgi.shuffle_ratio}};
  j["graphmae"] = {{"mask_ratio", mae.mask_ratio}, {"gamma", mae.gamma}};
  if (grid) {
    json g = json::object();
    auto names = [](const auto& xs) {
      json a = json::array();
      for (auto x : xs) a.push_back(to_string(x));
      return a;
    };
    if (!grid->kind.empty()) g["kind"] = names(grid->kind);
    if (!grid->layers.empty()) g["layers"] = grid->layers;
    if (!grid->hidden.empty()) g["hidden"] = grid->hidden;
    if (!grid->activation.empty()) g["activation"] = names(grid->activation);
    if (!grid->lr.empty()) g["lr"] = grid->lr;
    if (!grid->epochs.empty()) g["epochs"] = grid->epochs;
    j["grid"] = g;
  }
  return j;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

std::optional<double> TrialResult::far_rank() const {
  double total = 0.0;
  std::size_t count = 0;
  for (HopBucket b : {HopBucket::kThree, HopBucket::kFourPlus}) {
    if (auto it = hop_ranks.find(b); it != hop_ranks.end()) {
      total += it->second.mean * static_cast<double>(it->second.count);
      count += it->second.count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

json TrialResult::to_json() const {
  json j;
  j["trial"] = trial;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["ok"] = ok;
  if (!ok) {
    j["error"] = error;
    return j;
  }
  j["auroc"] = auroc;
  j["auprc"] = auprc;
  j["val_auroc"] = val_auroc;
  j["val_auprc"] = val_auprc;
  json hr = json::object();
  for (const auto& [b, r] : hop_ranks) hr[std::string(to_string(b))] = {{"mean", r.mean}, {"count", r.count}};
  j["hop_rank"] = hr;
  if (auto f = far_rank()) j["far_rank"] = *f;
  j["R"] = reachability.ratios;
  return j;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(trials.begin(), trials.end(), [](const TrialResult& t) { return t.ok; });
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

TrialResult run_trial(const ExperimentConfig& config, const Graph& graph, const PropagationOps& ops,
                      int trial) {
  TrialResult r;
  r.trial = trial;
  r.seed = config.seed + static_cast<std::uint64_t>(trial);
  r.config_hash = config.hash();
  const auto start = std::chrono::steady_clock::now();
  try {
    Rng rng(r.seed);
    const SplitSpec split = config.split.semi
                                ? make_semi_split(graph, config.split.semi_options, rng.next_u64())
                                : make_full_split(graph, config.split.train_ratio, rng.next_u64());
    EncoderConfig enc = config.encoder;
    enc.input_dim = static_cast<int>(graph.features().cols());
    const TrainOptions train{config.epochs, config.lr, 0, config.eval_every};

    Encoder encoder;
    Classifier classifier;
    if (config.paradigm == Paradigm::kEnd2End) {
      TrainOptions t = train;
      t.seed = rng.next_u64();
      End2EndResult e = end2end_run(enc, graph, ops, split, t);
      r.train_losses = e.losses;
      encoder = std::move(e.encoder);
      classifier = std::move(e.classifier);
    } else {
      PretrainOptions po;
      po.objective = config.paradigm == Paradigm::kDgi ? Objective::kDgi : Objective::kGraphMae;
      po.epochs = config.pretrain_epochs;
      po.lr = config.lr;
      po.seed = rng.next_u64();
      po.dgi = config.dgi;
      po.mae = config.mae;
      PretrainResult pre = pretrain_run(graph, ops, enc, po);
      r.pretrain_losses = pre.losses;
      TrainOptions t = train;
      t.seed = rng.next_u64();
      FinetuneResult ft = finetune_run(pre.encoder, graph, ops, split, t);
      r.train_losses = ft.fit.losses;
      encoder = std::move(pre.encoder);
      classifier = std::move(ft.fit.classifier);
    }

    const Matrix h = encoder.embed(ops, graph.features());
    const auto val_nodes = split.val_nodes();
    const LabeledRows val = labeled_rows(graph, val_nodes);
    const auto val_scores = score_rows(classifier, h, val.rows);
    const auto val_pos = std::count(val.labels.begin(), val.labels.end(), 1);
    if (val_pos > 0 && val_pos < static_cast<std::ptrdiff_t>(val.labels.size())) {
      r.val_auroc = auroc(val_scores, val.labels);
      r.val_auprc = auprc(val_scores, val.labels);
    }

    r.test_nodes = split.test;
    const LabeledRows test = labeled_rows(graph, split.test);
    r.test_labels = test.labels;
    r.test_scores = score_rows(classifier, h, test.rows);
    r.auroc = auroc(r.test_scores, r.test_labels);
    r.auprc = auprc(r.test_scores, r.test_labels);

    // Unlabeled anomalies: every anomaly outside the training set.
    std::vector<NodeId> unlabeled = split.val_anomalies;
    std::vector<RankedAnomaly> ranked;
    for (std::size_t i = 0; i < split.test.size(); ++i)
      if (r.test_labels[i] == 1) unlabeled.push_back(split.test[i]);
    r.reachability = k_hop_reachable_ratio(graph, split.train_anomalies, unlabeled, config.hop_k);
    const std::size_t offset = split.val_anomalies.size();
    std::size_t k = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i)
      if (r.test_labels[i] == 1) ranked.push_back({i, r.reachability.hops[offset + k++]});
    r.hop_ranks = hop_avg_rank(r.test_scores, ranked);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json aggregate_trials(const ExperimentConfig& config, const std::vector<TrialResult>& trials) {
  std::map<std::string, std::vector<double>> metric;
  std::map<std::string, std::vector<double>> hop_means;
  std::map<std::string, std::size_t> hop_counts;
  std::vector<double> far;
  std::vector<std::vector<double>> ratios;
  json failed = json::array();
  json per_trial = json::array();
  for (const auto& t : trials) {
    if (!t.ok) {
      failed.push_back({{"trial", t.trial}, {"error", t.error}});
      continue;
    }
    metric["auroc"].push_back(t.auroc);
    metric["auprc"].push_back(t.auprc);
    metric["val_auroc"].push_back(t.val_auroc);
    metric["val_auprc"].push_back(t.val_auprc);
    for (const auto& [b, r] : t.hop_ranks) {
      hop_means[std::string(to_string(b))].push_back(r.mean);
      hop_counts[std::string(to_string(b))] += r.count;
    }
    if (auto f = t.far_rank()) far.push_back(*f);
    ratios.push_back(t.reachability.ratios);
    per_trial.push_back({{"trial", t.trial}, {"seed", t.seed}, {"auroc", t.auroc}, {"auprc", t.auprc}});
  }
  json j;
  j["config_hash"] = config.hash();
  j["config"] = config.to_json();
  j["trials_requested"] = trials.size();
  j["trials_completed"] = trials.size() - failed.size();
  j["failed"] = failed;
  if (!failed.empty()) j["warning"] = "aggregate covers completed trials only";
  json m = json::object();
  for (const auto& [name, values] : metric) m[name] = {{"mean", mean_of(values)}, {"std", sample_std(values)}};
  j["metrics"] = m;
  json hr = json::object();
  for (const auto& [name, values] : hop_means)
    hr[name] = {{"mean", mean_of(values)}, {"std", sample_std(values)}, {"trials", values.size()},
                {"anomalies", hop_counts[name]}};
  j["hop_rank"] = hr;
  if (!far.empty()) j["far_rank"] = {{"mean", mean_of(far)}, {"std", sample_std(far)}, {"trials", far.size()}};
  json r_mean = json::array();
  if (!ratios.empty()) {
    for (std::size_t k = 0; k < ratios.front().size(); ++k) {
      std::vector<double> col;
      for (const auto& row : ratios) col.push_back(row[k]);
      r_mean.push_back(mean_of(col));
    }
  }
  j["R_mean"] = r_mean;
  j["trials"] = per_trial;
  return j;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string curve_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i + 1 << ',' << losses[i] << '\n';
  return os.str();
}

void write_trial(const std::filesystem::path& dir, const TrialResult& t) {
  write_file_atomic(dir / "result.json", t.to_json().dump(2) + "\n");
  if (!t.ok) return;
  std::ostringstream scores;
  scores.precision(17);
  scores << "node_id,score,label\n";
  for (std::size_t i = 0; i < t.test_nodes.size(); ++i)
    scores << t.test_nodes[i] << ',' << t.test_scores[i] << ',' << t.test_labels[i] << '\n';
  write_file_atomic(dir / "scores.csv", scores.str());
  write_file_atomic(dir / "losses.csv", curve_csv(t.pretrain_losses.empty() ? t.train_losses : t.pretrain_losses));
  if (!t.pretrain_losses.empty()) write_file_atomic(dir / "classifier_losses.csv", curve_csv(t.train_losses));
  write_file_atomic(dir / "reachability.json", t.reachability.to_json().dump(2) + "\n");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, config.dataset.materialize());
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Graph& graph) {
  const PropagationOps ops = PropagationOps::from(graph);
  ExperimentResult result;
  result.config_hash = config.hash();
  result.trials.resize(static_cast<std::size_t>(config.trials));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < config.trials; t = next++)
      result.trials[static_cast<std::size_t>(t)] = run_trial(config, graph, ops, t);
  };
  const int n_workers = std::min(config.workers, config.trials);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& t : result.trials) {
    if (!t.ok) std::cerr << "warning: trial " << t.trial << " failed: " << t.error << '\n';
  }

  result.aggregate = aggregate_trials(config, result.trials);
  if (!config.out.empty()) {
    const auto dir = config.out / result.config_hash;
    for (const auto& t : result.trials) write_trial(dir / ("trial_" + std::to_string(t.trial)), t);
    write_file_atomic(dir / "aggregate.json", result.aggregate.dump(2) + "\n");
  }
  return result;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config) {
  require(config.grid.has_value(), ErrorCode::kInvalidArgument, "config has no grid");
  const Grid& g = *config.grid;
  auto or_default = [](const auto& xs, auto fallback) {
    using T = typename std::decay_t<decltype(xs)>::value_type;
    return xs.empty() ? std::vector<T>{fallback} : xs;
  };
  std::vector<ExperimentConfig> out;
  for (EncoderKind kind : or_default(g.kind, config.encoder.kind))
    for (int layers : or_default(g.layers, config.encoder.num_layers))
      for (int hidden : or_default(g.hidden, config.encoder.hidden_dim))
        for (Activation act : or_default(g.activation, config.encoder.activation))
          for (double lr : or_default(g.lr, config.lr))
            for (int epochs : or_default(g.epochs, config.epochs)) {
              ExperimentConfig c = config;
              c.grid.reset();
              c.encoder.kind = kind;
              c.encoder.num_layers = layers;
              c.encoder.hidden_dim = hidden;
              c.encoder.activation = act;
              c.lr = lr;
              c.epochs = epochs;
              c.pretrain_epochs = epochs;
              out.push_back(std::move(c));
            }
  return out;
}

std::size_t select_best(const std::vector<GridRow>& rows) {
  require(!rows.empty(), ErrorCode::kInvalidArgument, "empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const GridRow& a = rows[i];
    const GridRow& b = rows[best];
    const auto key_a = std::make_tuple(-a.val_auprc, -a.val_auroc, a.hidden, a.layers, a.index);
    const auto key_b = std::make_tuple(-b.val_auprc, -b.val_auroc, b.hidden, b.layers, b.index);
    if (key_a < key_b) best = i;
  }
  return best;
}

std::string GridResult::csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "index,kind,layers,hidden,activation,lr,epochs,val_auprc,val_auroc,selected\n";
  for (const auto& r : table) {
    os << r.index << ',' << to_string(r.kind) << ',' << r.layers << ',' << r.hidden << ','
       << to_string(r.activation) << ',' << r.lr << ',' << r.epochs << ',' << r.val_auprc << ','
       << r.val_auroc << ',' << (r.index == table[best].index ? 1 : 0) << '\n';
  }
  return os.str();
}

GridResult grid_search(const ExperimentConfig& config) {
  const auto configs = expand_grid(config);
  require(!configs.empty(), ErrorCode::kInvalidArgument, "empty grid");
  const Graph graph = config.dataset.materialize();
  GridResult g;
  std::vector<ExperimentResult> results;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentResult r = run_experiment(configs[i], graph);
    const json& m = r.aggregate.at("metrics");
    GridRow row;
    row.index = i;
    row.kind = configs[i].encoder.kind;
    row.layers = configs[i].encoder.num_layers;
    row.hidden = configs[i].encoder.hidden_dim;
    row.activation = configs[i].encoder.activation;
    row.lr = configs[i].lr;
    row.epochs = configs[i].epochs;
    row.val_auprc = m.contains("val_auprc") ? m["val_auprc"]["mean"].get<double>() : 0.0;
    row.val_auroc = m.contains("val_auroc") ? m["val_auroc"]["mean"].get<double>() : 0.0;
    g.table.push_back(row);
    results.push_back(std::move(r));
  }
  g.best = select_best(g.table);
  g.best_config = configs[g.best];
  g.best_result = std::move(results[g.best]);
  if (!config.out.empty()) {
    const auto dir = config.out / config.hash();
    write_file_atomic(dir / "grid.csv", g.csv());
    json best = {{"index", g.best},
                 {"config_hash", g.best_config.hash()},
                 {"config", g.best_config.to_json()},
                 {"selection_key", "val_auprc"},
                 {"val_auprc", g.table[g.best].val_auprc},
                 {"val_auroc", g.table[g.best].val_auroc},
                 {"test", g.best_result.aggregate.at("metrics")}};
    write_file_atomic(dir / "best.json", best.dump(2) + "\n");
  }
  return g;
}

std::vector<SweepRow> ablation_shuffle_ratio(const ExperimentConfig& config,
                                             const std::vector<double>& ratios) {
  require(config.paradigm == Paradigm::kDgi, ErrorCode::kInvalidArgument,
          "shuffle-ratio ablation needs the dgi paradigm");
  require(!ratios.empty(), ErrorCode::kInvalidArgument, "no ratios given");
  for (double r : ratios)
    require(r >= 0.0 && r <= 1.0, ErrorCode::kInvalidArgument, "shuffle ratio outside [0, 1]");
  const Graph graph = config.dataset.materialize();
  std::vector<SweepRow> rows;
  for (double r : ratios) {
    ExperimentConfig c = config;
    c.dgi.shuffle_ratio = r;
    rows.push_back({r, run_experiment(c, graph)});
  }
  if (!config.out.empty()) write_file_atomic(config.out / config.hash() / "ablate_shuffle.csv", ablation_csv(rows));
  return rows;
}

namespace {

double metric_mean(const ExperimentResult& r, const char* name) {
  const json& m = r.aggregate.at("metrics");
  return m.contains(name) ? m.at(name).at("mean").get<double>() : std::nan("");
}

double metric_std(const ExperimentResult& r, const char* name) {
  const json& m = r.aggregate.at("metrics");
  return m.contains(name) ? m.at(name).at("std").get<double>() : std::nan("");
}

}  // namespace

std::string ablation_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "ratio,mean_auroc,std_auroc,mean_auprc,std_auprc\n";
  for (const auto& r : rows)
    os << r.key << ',' << metric_mean(r.result, "auroc") << ',' << metric_std(r.result, "auroc") << ','
       << metric_mean(r.result, "auprc") << ',' << metric_std(r.result, "auprc") << '\n';
  return os.str();
}

std::vector<SweepRow> sweep_labeled_anomalies(const ExperimentConfig& config,
                                              const std::vector<std::size_t>& counts) {
  require(config.split.semi, ErrorCode::kInvalidArgument, "label sweep needs the semi regime");
  require(!counts.empty(), ErrorCode::kInvalidArgument, "no counts given");
  const Graph graph = config.dataset.materialize();
  const std::size_t n_anom = graph.nodes_with_label(Label::kAnomaly).size();
  for (std::size_t c : counts) {
    require(c >= 1 && c + config.split.semi_options.val_anom < n_anom, ErrorCode::kInvalidArgument,
            "count " + std::to_string(c) + " exceeds available anomalies (" + std::to_string(n_anom) +
                " including validation)");
  }
  std::vector<SweepRow> rows;
  for (std::size_t c : counts) {
    ExperimentConfig cfg = config;
    cfg.split.semi_options.n_anom = c;
    cfg.hop_k = std::max(cfg.hop_k, 2);
    rows.push_back({static_cast<double>(c), run_experiment(cfg, graph)});
  }
  if (!config.out.empty()) write_file_atomic(config.out / config.hash() / "sweep_labels.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "count,mean_auroc,mean_auprc,mean_r2\n";
  for (const auto& r : rows) {
    const json& rm = r.result.aggregate.at("R_mean");
    const double r2 = rm.size() >= 2 ? rm[1].get<double>() : std::nan("");
    os << static_cast<std::size_t>(r.key) << ',' << metric_mean(r.result, "auroc") << ','
       << metric_mean(r.result, "auprc") << ',' << r2 << '\n';
  }
  return os.str();
}

json diagnose(const Graph& g, const SemiSplitOptions& split, int max_k, std::uint64_t seed,
              const std::vector<std::size_t>& counts, int trials) {
  json j;
  j["num_nodes"] = g.num_nodes();
  j["num_edges"] = g.num_edges();
  const GraphStats s = graph_stats(g);
  j["density"] = s.density;
  j["avg_degree"] = s.avg_degree;
  j["avg_degree_anomaly"] = s.avg_degree_anomaly ? json(*s.avg_degree_anomaly) : json(nullptr);
  j["density_class"] = to_string(classify_density(s).cls);
  const auto anomalies = g.nodes_with_label(Label::kAnomaly);
  j["num_anomalies"] = anomalies.size();
  if (anomalies.size() > split.n_anom && split.n_anom > 0) {
    SemiSplitOptions o = split;
    o.val_anom = 0;
    o.val_norm = 0;
    const SplitSpec sp = make_semi_split(g, o, seed);
    std::vector<NodeId> unlabeled;
    for (NodeId u : anomalies)
      if (!std::binary_search(sp.train_anomalies.begin(), sp.train_anomalies.end(), u)) unlabeled.push_back(u);
    j["reachability"] = k_hop_reachable_ratio(g, sp.train_anomalies, unlabeled, max_k).to_json();
  }
  if (!counts.empty()) {
    json table = json::array();
    for (const auto& [c, r2] : reachability_vs_labels(g, anomalies, counts, trials, seed))
      table.push_back({{"count", c}, {"mean_R2", r2}});
    j["reachability_vs_labels"] = table;
  }
  return j;
}

json run_graph_level(const json& config) {
  reject_unknown(config, {"collection", "target_class", "keep_fraction", "mode", "objective", "encoder",
                          "train_ratio", "epochs", "pretrain_epochs", "lr", "trials", "seed", "out",
                          "dgi", "graphmae"},
                 "graph-level config");
  require(config.contains("collection"), ErrorCode::kParse, "graph-level config needs a collection");
  const json& src = config.at("collection");
  reject_unknown(src, {"manifest", "synthetic"}, "collection");
  GraphCollection base;
  if (src.contains("manifest")) {
    base = load_collection(src.at("manifest").get<std::string>());
  } else {
    const json s = src.value("synthetic", json::object());
    reject_unknown(s, {"graphs_per_class", "min_nodes", "max_nodes", "feature_dim", "seed"}, "collection.synthetic");
    SyntheticCollectionSpec spec;
    spec.graphs_per_class = get_or<std::size_t>(s, "graphs_per_class", spec.graphs_per_class);
    spec.min_nodes = get_or<std::size_t>(s, "min_nodes", spec.min_nodes);
    spec.max_nodes = get_or<std::size_t>(s, "max_nodes", spec.max_nodes);
    spec.feature_dim = get_or<int>(s, "feature_dim", spec.feature_dim);
    spec.seed = get_or<std::uint64_t>(s, "seed", spec.seed);
    base = generate_collection(spec);
  }
  const int target = get_or<int>(config, "target_class", 0);
  const double keep = get_or<double>(config, "keep_fraction", 0.10);
  const auto mode = get_or<std::string>(config, "mode", "pretrain");
  require(mode == "pretrain" || mode == "end2end", ErrorCode::kParse, "mode must be pretrain or end2end");
  GraphLevelOptions o;
  o.mode = mode == "pretrain" ? GraphLevelMode::kPretrainFinetune : GraphLevelMode::kEnd2End;
  o.objective = parse_objective(get_or<std::string>(config, "objective", "dgi"));
  const json enc = config.value("encoder", json::object());
  reject_unknown(enc, {"kind", "layers", "hidden", "activation"}, "encoder");
  o.encoder.kind = parse_encoder_kind(get_or<std::string>(enc, "kind", "gin"));
  o.encoder.num_layers = get_or<int>(enc, "layers", 2);
  o.encoder.hidden_dim = get_or<int>(enc, "hidden", 32);
  o.encoder.activation = parse_activation(get_or<std::string>(enc, "activation", "relu"));
  o.train_ratio = get_or<double>(config, "train_ratio", 0.05);
  o.epochs = get_or<int>(config, "epochs", 200);
  o.pretrain_epochs = get_or<int>(config, "pretrain_epochs", 100);
  o.lr = get_or<double>(config, "lr", 0.005);
  const json dgi = config.value("dgi", json::object());
  o.dgi.shuffle_ratio = get_or<double>(dgi, "shuffle_ratio", 1.0);
  const json mae = config.value("graphmae", json::object());
  o.mae.mask_ratio = get_or<double>(mae, "mask_ratio", 0.5);
  o.mae.gamma = get_or<double>(mae, "gamma", 2.0);
  const int trials = get_or<int>(config, "trials", 5);
  const auto seed = get_or<std::uint64_t>(config, "seed", 0);
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");

  std::vector<double> aurocs, auprcs;
  json per_trial = json::array();
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(t);
    const GraphCollection labeled = downsample_class(base, target, keep, s);
    o.seed = s;
    const GraphLevelResult r = graphlevel_pipeline(labeled, o);
    aurocs.push_back(r.auroc);
    auprcs.push_back(r.auprc);
    per_trial.push_back({{"trial", t}, {"seed", s}, {"auroc", r.auroc}, {"auprc", r.auprc},
                         {"val_auprc", r.val_auprc}, {"n_train", r.n_train}, {"n_val", r.n_val},
                         {"n_test", r.n_test}, {"n_anomalies", std::count(labeled.labels.begin(), labeled.labels.end(), 1)}});
  }
  json canonical = config;
  canonical.erase("out");
  json out;
  out["config_hash"] = fnv1a_hex(canonical.dump());
  out["metrics"] = {{"auroc", {{"mean", mean_of(aurocs)}, {"std", sample_std(aurocs)}}},
                    {"auprc", {{"mean", mean_of(auprcs)}, {"std", sample_std(auprcs)}}}};
  out["trials"] = per_trial;
  if (config.contains("out")) {
    const std::filesystem::path dir = std::filesystem::path(config.at("out").get<std::string>()) / out["config_hash"].get<std::string>();
    write_file_atomic(dir / "aggregate.json", out.dump(2) + "\n");
  }
  return out;
}

}  // namespace gad
