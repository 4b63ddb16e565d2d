#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kmemir/kmemir.hpp"

namespace kmemir::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestSchema = "kmemir.manifest/1";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,      // I/O and anything unexpected
  kUsage = 2,
  kParse = 3,
  kNumeric = 4,
  kInterrupted = 5,  // grid stopped early on request; resumable
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::parse: return kParse;
    case ErrorKind::numeric: return kNumeric;
    case ErrorKind::io: return kFailure;
  }
  return kFailure;
}

struct Options {
  // synth
  std::size_t bags = 100;
  std::size_t min_instances = 5;
  std::size_t max_instances = 15;
  std::size_t dim = 3;
  double noise_scale = 0.1;
  double noise_skew = 0.0;

  // data
  std::string data;
  std::string train;
  std::string heldout;
  std::string stacked;

  // first stage
  std::string first_stage = "mlp";
  std::size_t hidden = 128;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double l2 = 1e-4;
  std::string activation = "relu";
  bool no_standardize = false;
  double ridge_penalty = 1e-6;

  // second stage
  std::vector<std::string> algorithms;
  std::int64_t stacking_folds = 50;
  std::string heldout_model = "final-retrain";
  double theta = 10.0;
  double lambda = 1e-3;
  std::vector<double> thetas;
  std::vector<double> lambdas;

  // protocol and output
  std::size_t outer_folds = 5;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  std::string loss_scale = "raw";
  unsigned threads = 1;
  std::string out;
  bool resume = false;
  std::size_t stop_after_cells = 0;

  FirstStageConfig first_stage_config() const {
    if (first_stage == "ridge") return RidgeConfig{ridge_penalty};
    if (first_stage != "mlp") throw usage_error("--first-stage must be 'mlp' or 'ridge'");
    MlpConfig c;
    c.hidden_units = hidden;
    c.learning_rate = learning_rate;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.l2_penalty = l2;
    c.activation = parse_activation(activation);
    c.standardize_features = !no_standardize;
    c.validate();
    return c;
  }

  AlgorithmSpec algorithm(const std::string& name) const {
    AlgorithmSpec spec;
    spec.kind = parse_algorithm(name);
    spec.pipeline.first_stage = first_stage_config();
    spec.pipeline.stacking_folds = stacking_folds;
    spec.pipeline.heldout_model = parse_heldout_model(heldout_model);
    spec.theta = theta;
    spec.lambda = lambda;
    if (is_kme(spec.kind)) {
      spec.kernel().validate();
      if (!(lambda >= 0.0)) throw usage_error("--lambda must be >= 0");
      if (stacking_folds < 2) throw usage_error("--stacking-folds must be at least 2");
    }
    return spec;
  }

  CvProtocol protocol() const {
    CvProtocol p{outer_folds, repetitions, seed};
    p.validate();
    return p;
  }
};

namespace detail {

inline void add_first_stage_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--first-stage", o.first_stage, "Instance regressor: mlp or ridge")
      ->check(CLI::IsMember({"mlp", "ridge"}))
      ->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "MLP hidden units")->capture_default_str();
  cmd->add_option("--learning-rate", o.learning_rate, "MLP step size")->capture_default_str();
  cmd->add_option("--epochs", o.epochs, "MLP epochs")->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "MLP mini-batch size")->capture_default_str();
  cmd->add_option("--l2", o.l2, "MLP weight decay")->capture_default_str();
  cmd->add_option("--activation", o.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  cmd->add_flag("--no-standardize", o.no_standardize, "Do not standardize MLP inputs");
  cmd->add_option("--ridge-penalty", o.ridge_penalty, "Ridge first-stage penalty")->capture_default_str();
}

inline void add_second_stage_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--stacking-folds,-D", o.stacking_folds, "Out-of-fold stacking folds (clamped to bag count)")
      ->capture_default_str();
  cmd->add_option("--heldout-model", o.heldout_model, "final-retrain or fold-average")
      ->check(CLI::IsMember({"final-retrain", "fold-average"}))
      ->capture_default_str();
}

inline void add_protocol_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--outer-folds", o.outer_folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--repetitions", o.repetitions, "Cross-validation repetitions")->capture_default_str();
  cmd->add_option("--loss-scale", o.loss_scale, "raw or x100 (presentation only)")
      ->check(CLI::IsMember({"raw", "x100"}))
      ->capture_default_str();
}

inline void add_common_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  cmd->add_option("--out", o.out, "Output directory for artifacts and manifest");
}

inline Dataset read_dataset(const std::string& path) {
  if (path == "-") return read_canonical_csv(std::cin, "<stdin>");
  return load_canonical_csv(path);
}

inline std::filesystem::path prepare_out(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw io_error("cannot create output directory '" + out + "': " + ec.message());
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw io_error("failed writing '" + path.string() + "'");
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Replayable argument list: everything but --out and --threads.
inline std::vector<std::string> replay_args(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--out" || a == "--threads") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--threads=", 0) == 0 || a == "--resume") continue;
    if (a == "--stop-after-cells") {
      ++i;
      continue;
    }
    if (a.rfind("--stop-after-cells=", 0) == 0) continue;
    kept.push_back(a);
  }
  return kept;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const std::vector<std::string>& args, const nlohmann::json& config,
                           const nlohmann::json& inputs, const std::vector<std::string>& outputs) {
  nlohmann::json m = {{"schema", kManifestSchema},
                      {"tool_version", kToolVersion},
                      {"command", command},
                      {"args", replay_args(args)},
                      {"config", config},
                      {"inputs", inputs},
                      {"outputs", outputs}};
  write_text(dir / "manifest.json", dump(m));
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Commands

inline int cmd_synth(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  SyntheticConfig c{o.bags, o.min_instances, o.max_instances, o.dim, o.noise_scale, o.noise_skew, o.seed};
  const Dataset data = generate_synthetic(c);
  if (o.out.empty()) {
    write_canonical_csv(out, data);
    return kOk;
  }
  const auto dir = detail::prepare_out(o.out);
  save_canonical_csv((dir / "dataset.csv").string(), data);
  const nlohmann::json config = {{"num_bags", c.num_bags},       {"instances_min", c.instances_min},
                                 {"instances_max", c.instances_max}, {"dim", c.dim},
                                 {"noise_scale", c.noise_scale}, {"noise_skew", c.noise_skew},
                                 {"seed", c.seed}};
  detail::write_manifest(dir, "synth", args, config, nlohmann::json::object(), {"dataset.csv"});
  out << "wrote " << data.size() << " bags (" << data.total_instances() << " instances) to "
      << (dir / "dataset.csv").string() << '\n';
  return kOk;
}

inline int cmd_cv(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset data = detail::read_dataset(o.data);
  const CvProtocol protocol = o.protocol();
  const LossScale scale = parse_loss_scale(o.loss_scale);
  std::vector<std::string> names = o.algorithms;
  if (names.empty()) names.push_back("instance-mean");
  std::vector<AlgorithmSpec> specs;
  for (const auto& n : names) specs.push_back(o.algorithm(n));

  std::vector<CvResult> results;
  for (const auto& spec : specs) {
    results.push_back(with_context(to_string(spec.kind), [&] {
      return cross_validate(data, spec, protocol, scale, o.threads);
    }));
  }
  out << render_table(results);

  if (!o.out.empty()) {
    const auto dir = detail::prepare_out(o.out);
    nlohmann::json doc = {{"schema", "kmemir.cv_results/1"}, {"results", nlohmann::json::array()}};
    nlohmann::json config = nlohmann::json::array();
    for (const auto& r : results) {
      doc["results"].push_back(result_to_json(r));
      config.push_back(r.config_snapshot);
    }
    detail::write_text(dir / "result.json", detail::dump(doc));
    detail::write_manifest(dir, "cv", args, config, {{"data", o.data}}, {"result.json"});
  }
  return kOk;
}

inline int cmd_grid(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset data = detail::read_dataset(o.data);
  const CvProtocol protocol = o.protocol();
  const LossScale scale = parse_loss_scale(o.loss_scale);
  const AlgorithmSpec base = o.algorithm(o.algorithms.empty() ? "kme-rbf" : o.algorithms.front());
  if (!is_kme(base.kind)) throw usage_error("grid search needs --algorithm kme-rbf or kme-inv");
  GridSpec grid = GridSpec::defaults();
  if (!o.thetas.empty()) grid.thetas = o.thetas;
  if (!o.lambdas.empty()) grid.lambdas = o.lambdas;
  grid.validate();

  nlohmann::json ledger_config = base.snapshot();
  ledger_config.erase("kernel");
  ledger_config.erase("lambda");
  ledger_config["kernel_kind"] = to_string(base.kernel().kind);
  ledger_config["protocol"] = protocol;
  ledger_config["loss_scale"] = to_string(scale);

  GridHooks hooks;
  hooks.max_new_cells = o.stop_after_cells;
  std::ofstream ledger;
  std::filesystem::path dir;
  if (!o.out.empty()) {
    dir = detail::prepare_out(o.out);
    const auto ledger_path = dir / "cells.jsonl";
    if (o.resume && std::filesystem::exists(ledger_path)) {
      std::ifstream in(ledger_path);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
          // A torn final line from an interrupted write is dropped.
          break;
        }
        if (line_no == 1) {
          if (j.value("config", nlohmann::json{}) != ledger_config) {
            throw usage_error("cell ledger in '" + o.out + "' was written with a different configuration");
          }
          continue;
        }
        hooks.completed.push_back(cell_from_json(j));
      }
      out << "resuming: " << hooks.completed.size() << " of " << grid.size() << " cells already complete\n";
    }
    // Rewrite the ledger with the recovered cells, then append as we go.
    ledger.open(ledger_path, std::ios::binary | std::ios::trunc);
    if (!ledger) throw io_error("cannot write '" + ledger_path.string() + "'");
    ledger << nlohmann::json{{"ledger", "kmemir.grid_cells/1"}, {"config", ledger_config}}.dump() << '\n';
    for (const auto& cell : hooks.completed) ledger << cell_to_json(cell).dump() << '\n';
    ledger.flush();
    hooks.on_cell = [&](const GridCell& cell) {
      ledger << cell_to_json(cell).dump() << '\n';
      ledger.flush();
    };
    nlohmann::json config = base.snapshot();
    config["protocol"] = protocol;
    config["thetas"] = grid.thetas;
    config["lambdas"] = grid.lambdas;
    detail::write_manifest(dir, "grid", args, config, {{"data", o.data}},
                           {"grid.csv", "result.json", "cells.jsonl"});
  }

  const GridResult result = grid_search(data, grid, base, protocol, scale, o.threads, hooks);
  if (!result.complete()) {
    out << "stopped early; resume with --resume\n";
    return kInterrupted;
  }

  const GridCell& best = result.best_cell();
  const Dispersion spread = grid_dispersion(result);
  out << "evaluated " << result.cells.size() << " grid points (" << spread.failed << " failed)\n";
  out << "best theta=" << format_double(best.theta) << " lambda=" << format_double(best.lambda)
      << " mean_rmse=" << format_double(best.result->mean_rmse) << " reported=" << format_double(best.result->reported_mean())
      << " (" << to_string(scale) << ")\n";
  out << "mean_rmse over grid: min=" << format_double(spread.min) << " median=" << format_double(spread.median)
      << " mean=" << format_double(spread.mean) << " max=" << format_double(spread.max)
      << " stddev=" << format_double(spread.stddev) << '\n';

  if (!o.out.empty()) {
    std::ostringstream csv;
    write_grid_csv(csv, result);
    detail::write_text(dir / "grid.csv", csv.str());
    nlohmann::json doc = {{"schema", "kmemir.grid_result/1"},
                          {"best", {{"theta", best.theta}, {"lambda", best.lambda}}},
                          {"best_result", result_to_json(*best.result)},
                          {"dispersion", dispersion_to_json(spread)},
                          {"grid_points", result.cells.size()}};
    detail::write_text(dir / "result.json", detail::dump(doc));
  }
  return kOk;
}

inline int cmd_stack(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset data = detail::read_dataset(o.data);
  const AlgorithmSpec spec = o.algorithm("kme-rbf");
  const FoldPlan plan = make_folds(data, spec.pipeline.stacking_folds, derive_seed(o.seed, {tag("stacking-folds")}));
  const StackedPredictions stacked = stack(data, plan, spec.pipeline.first_stage, o.seed, o.threads);
  if (o.out.empty()) {
    write_bag_predictions_csv(out, stacked.bags);
    return kOk;
  }
  const auto dir = detail::prepare_out(o.out);
  std::ostringstream csv;
  write_bag_predictions_csv(csv, stacked.bags);
  detail::write_text(dir / "stacked.csv", csv.str());
  nlohmann::json config = {{"first_stage", first_stage_to_json(spec.pipeline.first_stage)},
                           {"stacking_folds", plan.num_folds},
                           {"seed", o.seed}};
  detail::write_manifest(dir, "stack", args, config, {{"data", o.data}}, {"stacked.csv"});
  out << "wrote " << stacked.bags.total() << " out-of-fold predictions for " << stacked.bags.size() << " bags\n";
  return kOk;
}

inline int cmd_predict(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const Dataset train = detail::read_dataset(o.train);
  const Dataset heldout = detail::read_dataset(o.heldout);
  const AlgorithmSpec spec = o.algorithm(o.algorithms.empty() ? "kme-rbf" : o.algorithms.front());

  Eigen::VectorXd predictions;
  nlohmann::json model;
  if (spec.kind == AlgorithmKind::label_mean) {
    predictions = spec.runner()(train, heldout, o.seed);
  } else if (!is_kme(spec.kind)) {
    const Aggregator agg = spec.kind == AlgorithmKind::instance_mean ? Aggregator::mean : Aggregator::median;
    const InstanceRegressor f = train_final_model(train, spec.pipeline.first_stage, o.seed);
    const auto per_bag = predict_bags(f, heldout);
    predictions.resize(static_cast<Eigen::Index>(per_bag.size()));
    for (std::size_t i = 0; i < per_bag.size(); ++i) predictions[static_cast<Eigen::Index>(i)] = aggregate(per_bag[i], agg);
    model = regressor_to_json(f);
  } else {
    FirstStageOutput first;
    if (!o.stacked.empty()) {
      // Out-of-fold predictions come from a previous `stack` run; only the held-out side is trained here.
      std::ifstream in(o.stacked);
      if (!in) throw io_error("cannot open '" + o.stacked + "'");
      first.train = align_to_dataset(read_bag_predictions_csv(in, o.stacked), train);
      first.train_labels = train.labels();
      if (spec.pipeline.heldout_model != HeldoutModel::final_retrain) {
        throw usage_error("--stacked requires --heldout-model final-retrain");
      }
      first.heldout = predict_bags(train_final_model(train, spec.pipeline.first_stage, o.seed), heldout);
    } else {
      first = run_first_stage(train, heldout, spec.pipeline, o.seed, o.threads);
    }
    const auto fitted = with_context("kme-krr fit", [&] {
      return fit(first.train, first.train_labels, spec.kernel(), spec.lambda, o.threads);
    });
    predictions = predict(fitted, first.heldout, o.threads);
    model = model_to_json(fitted);
  }

  std::ostringstream csv;
  csv << "bag_id,prediction\n";
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    csv << heldout[i].id << ',' << format_double(predictions[static_cast<Eigen::Index>(i)]) << '\n';
  }
  if (o.out.empty()) {
    out << csv.str();
    return kOk;
  }
  const auto dir = detail::prepare_out(o.out);
  detail::write_text(dir / "predictions.csv", csv.str());
  std::vector<std::string> outputs = {"predictions.csv"};
  if (!model.is_null()) {
    detail::write_text(dir / "model.json", detail::dump(model));
    outputs.push_back("model.json");
  }
  nlohmann::json config = spec.snapshot();
  config["seed"] = o.seed;
  detail::write_manifest(dir, "predict", args, config,
                         {{"train", o.train}, {"heldout", o.heldout}, {"stacked", o.stacked}}, outputs);
  const Eigen::VectorXd labels = heldout.labels();
  out << "rmse on held-out labels: " << format_double(rmse(predictions, labels)) << '\n';
  return kOk;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

inline int cmd_rerun(const std::string& manifest_path, const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw io_error("cannot open manifest '" + manifest_path + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(manifest_path + ": " + e.what());
  }
  if (m.value("schema", "") != kManifestSchema) throw parse_error(manifest_path + ": not a kmemir manifest");
  std::vector<std::string> args = {m.at("command").get<std::string>()};
  for (const auto& a : m.at("args")) args.push_back(a.get<std::string>());
  const std::string target = o.out.empty() ? std::filesystem::path(manifest_path).parent_path().string() : o.out;
  args.push_back("--out");
  args.push_back(target.empty() ? "." : target);
  args.push_back("--threads");
  args.push_back(std::to_string(o.threads));
  if (o.resume) args.push_back("--resume");
  return run(std::move(args), out, err);
}

// ----------------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple instance regression with kernel mean embeddings of instance predictions", "kmemir"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic bag dataset");
  synth->add_option("--bags", o.bags, "Number of bags")->capture_default_str();
  synth->add_option("--min-instances", o.min_instances, "Fewest instances per bag")->capture_default_str();
  synth->add_option("--max-instances", o.max_instances, "Most instances per bag")->capture_default_str();
  synth->add_option("--d", o.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--noise-scale", o.noise_scale, "Scale of the feature-1 noise")->capture_default_str();
  synth->add_option("--noise-skew", o.noise_skew, "Skew-normal shape of the feature-1 noise")->capture_default_str();
  detail::add_common_options(synth, o);

  auto* cv = app.add_subcommand("cv", "Repeated k-fold cross-validation of one or more algorithms");
  cv->add_option("--data", o.data, "Canonical CSV dataset ('-' for stdin)")->required();
  cv->add_option("--algorithm", o.algorithms,
                 "instance-mean, instance-median, kme-rbf, kme-inv or label-mean (repeatable)");
  cv->add_option("--theta", o.theta, "Kernel parameter")->capture_default_str();
  cv->add_option("--lambda", o.lambda, "Ridge weight decay")->capture_default_str();
  detail::add_first_stage_options(cv, o);
  detail::add_second_stage_options(cv, o);
  detail::add_protocol_options(cv, o);
  detail::add_common_options(cv, o);

  auto* grid = app.add_subcommand("grid", "Cross-validated (theta, lambda) grid search");
  grid->add_option("--data", o.data, "Canonical CSV dataset ('-' for stdin)")->required();
  grid->add_option("--algorithm", o.algorithms, "kme-rbf or kme-inv")->expected(1);
  grid->add_option("--thetas", o.thetas, "Kernel parameters (default 10,20,...,140)")->delimiter(',');
  grid->add_option("--lambdas", o.lambdas, "Weight decays (default 1e-1,...,1e-16)")->delimiter(',');
  grid->add_flag("--resume", o.resume, "Reuse completed cells from <out>/cells.jsonl");
  grid->add_option("--stop-after-cells", o.stop_after_cells, "Stop after evaluating this many new cells");
  detail::add_first_stage_options(grid, o);
  detail::add_second_stage_options(grid, o);
  detail::add_protocol_options(grid, o);
  detail::add_common_options(grid, o);

  auto* stack_cmd = app.add_subcommand("stack", "Write out-of-fold instance predictions");
  stack_cmd->add_option("--data", o.data, "Canonical CSV dataset ('-' for stdin)")->required();
  detail::add_first_stage_options(stack_cmd, o);
  detail::add_second_stage_options(stack_cmd, o);
  detail::add_common_options(stack_cmd, o);

  auto* predict_cmd = app.add_subcommand("predict", "Train on one dataset and predict the bags of another");
  predict_cmd->add_option("--train", o.train, "Training dataset")->required();
  predict_cmd->add_option("--heldout", o.heldout, "Held-out dataset")->required();
  predict_cmd->add_option("--stacked", o.stacked, "Out-of-fold predictions from `stack` to reuse");
  predict_cmd->add_option("--algorithm", o.algorithms, "Algorithm (default kme-rbf)")->expected(1);
  predict_cmd->add_option("--theta", o.theta, "Kernel parameter")->capture_default_str();
  predict_cmd->add_option("--lambda", o.lambda, "Ridge weight decay")->capture_default_str();
  detail::add_first_stage_options(predict_cmd, o);
  detail::add_second_stage_options(predict_cmd, o);
  detail::add_common_options(predict_cmd, o);

  std::string manifest_path;
  auto* rerun = app.add_subcommand("rerun", "Re-run a command from its manifest.json");
  rerun->add_option("manifest", manifest_path, "Path to manifest.json")->required();
  rerun->add_option("--out", o.out, "Output directory (default: the manifest's directory)");
  rerun->add_option("--threads", o.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  rerun->add_flag("--resume", o.resume, "Resume an interrupted grid search");

  std::vector<std::string> sub_args(args.begin() + (args.empty() ? 0 : 1), args.end());
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(o, sub_args, out);
    if (*cv) return cmd_cv(o, sub_args, out);
    if (*grid) return cmd_grid(o, sub_args, out);
    if (*stack_cmd) return cmd_stack(o, sub_args, out);
    if (*predict_cmd) return cmd_predict(o, sub_args, out);
    if (*rerun) return cmd_rerun(manifest_path, o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace kmemir::cli
