#include "kinflow/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kinflow/evaluation.hpp"

namespace kinflow {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path prepare_out_dir(const std::string& out_dir, const RunConfig& config) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  write_text(dir / "config.resolved.cfg", config.echo());
  return dir;
}

}  // namespace

int cmd_gen_data(const RunConfig& config, const std::string& out_dir) {
  const KinematicTree tree = config.load_tree();
  const fs::path dir = prepare_out_dir(out_dir, config);
  save_skeleton((dir / "skeleton.json").string(), tree);
  const struct {
    const char* name;
    int count;
    std::uint64_t salt;
  } splits[] = {{"train.bin", config.data.n_train, 0},
                {"val.bin", config.data.n_val, 1},
                {"test.bin", config.data.n_test, 2}};
  for (const auto& split : splits) {
    const Dataset d = generate_split(tree, config.noise, config.data.seed, split.salt,
                                     split.count, config.threads);
    write_dataset((dir / split.name).string(), d);
    std::cout << split.name << ": " << d.size() << " samples\n";
  }
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& data_dir, const std::string& out_dir,
              const std::string& baseline, bool quiet) {
  const KinematicTree tree = config.load_tree();
  const fs::path data(data_dir);
  const Dataset train_set = read_dataset((data / "train.bin").string(), tree);
  const Dataset val_set = read_dataset((data / "val.bin").string(), tree);
  const fs::path dir = prepare_out_dir(out_dir, config);

  std::ofstream csv(dir / "metrics.csv");
  csv << metrics_csv_header() << "\n";
  EpochHook hook = [&](const EpochMetrics& m) {
    csv << metrics_csv_row(m) << "\n";
    csv.flush();
    if (!quiet)
      std::cout << "epoch " << m.epoch << " total=" << m.train.total
                << " val_mpjpe=" << m.val_mpjpe_mm << " mm\n";
  };

  TrainResult result;
  if (baseline == "mlp") {
    MlpParams mlp = make_mlp_baseline(tree, config.model.mlp_hidden, config.model.mlp_layers,
                                      config.training.seed);
    result = train_mlp_baseline(mlp, tree, train_set, val_set, config.training, config.echo(),
                                hook);
  } else if (baseline.empty()) {
    FlowIkModel model(config.model.kind, config.model_dims());
    result = train_run(model, tree, train_set, val_set, config.training, config.echo(), hook);
  } else {
    throw std::runtime_error("unknown baseline '" + baseline + "' (expected: mlp)");
  }
  save_checkpoint((dir / "checkpoint.bin").string(), result.best);
  save_checkpoint((dir / "checkpoint_last.bin").string(), result.last);
  std::cout << "best epoch " << result.best.epoch
            << " val_mpjpe=" << result.best.history.back().val_mpjpe_mm << " mm\n";
  return 0;
}

namespace {

std::unique_ptr<IkSolver> make_solver(const std::string& solver, const std::string& checkpoint,
                                      const KinematicTree& tree) {
  if (solver == "analytic") return std::make_unique<AnalyticSolver>();
  if (checkpoint.empty())
    throw std::runtime_error("solver '" + solver + "' needs --checkpoint");
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.tree_hash != tree.hash())
    throw std::runtime_error("checkpoint was trained for a different skeleton");
  if (solver == "flow") {
    std::shared_ptr<const FlowIkModel> model = restore_flow_model(ck);
    return std::make_unique<FlowSolver>(std::move(model));
  }
  if (solver == "mlp") return std::make_unique<MlpSolver>(restore_mlp_baseline(ck, tree));
  throw std::runtime_error("unknown solver '" + solver + "' (analytic | flow | mlp)");
}

}  // namespace

int cmd_eval(const RunConfig& config, const std::string& solver,
             const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out_dir) {
  const KinematicTree tree = config.load_tree();
  const Dataset dataset = read_dataset(dataset_path, tree);
  const auto ik = make_solver(solver, checkpoint_path, tree);
  const MetricReport report = evaluate_solver(*ik, tree, dataset);
  const fs::path dir = prepare_out_dir(out_dir, config);
  write_text(dir / "report.json", report.to_json() + "\n");
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& config,
              const std::vector<std::pair<std::string, std::string>>& checkpoints,
              const std::string& out_dir) {
  const KinematicTree tree = config.load_tree();
  std::vector<std::unique_ptr<IkSolver>> owned;
  owned.push_back(std::make_unique<AnalyticSolver>());
  for (const auto& [label, path] : checkpoints) {
    const Checkpoint ck = load_checkpoint(path);
    if (ck.tree_hash != tree.hash())
      throw std::runtime_error("checkpoint '" + path + "' was trained for a different skeleton");
    std::unique_ptr<IkSolver> solver;
    if (ck.model_type == "flow") {
      std::shared_ptr<const FlowIkModel> model = restore_flow_model(ck);
      solver = std::make_unique<FlowSolver>(std::move(model));
    } else {
      solver = std::make_unique<MlpSolver>(restore_mlp_baseline(ck, tree));
    }
    // labels give sweep rows stable solver names regardless of model type
    class Labeled final : public IkSolver {
     public:
      Labeled(std::string name, std::unique_ptr<IkSolver> inner)
          : name_(std::move(name)), inner_(std::move(inner)) {}
      std::string name() const override { return name_; }
      ad::Mat solve(const KinematicTree& tree, const BatchView& batch) const override {
        return inner_->solve(tree, batch);
      }

     private:
      std::string name_;
      std::unique_ptr<IkSolver> inner_;
    };
    owned.push_back(std::make_unique<Labeled>(label, std::move(solver)));
  }
  std::vector<const IkSolver*> solvers;
  for (const auto& s : owned) solvers.push_back(s.get());
  const auto rows = noise_sweep(solvers, tree, config.sweep_config(), config.noise);
  const fs::path dir = prepare_out_dir(out_dir, config);
  write_text(dir / "sweep.csv", sweep_csv(rows));
  std::cout << "sweep.csv: " << rows.size() << " rows\n";
  return 0;
}

int cmd_grad_check(int components) {
  bool all_pass = true;
  for (ModelKind kind : {ModelKind::one_stage, ModelKind::twist_and_swing}) {
    for (const TermCheck& check : run_gradient_battery(kind, components)) {
      all_pass = all_pass && check.pass;
      std::printf("[%s] %-18s %s  worst rel err %.3e over %d components\n",
                  to_string(kind).c_str(), check.name.c_str(),
                  check.pass ? "PASS" : "FAIL", check.worst_rel_err, check.components);
    }
  }
  return all_pass ? 0 : 1;
}

int cmd_inspect(const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  std::size_t count = 0;
  for (const auto& p : ck.params) count += static_cast<std::size_t>(p.size());
  std::cout << "model_type: " << ck.model_type << "\n";
  if (ck.model_type == "flow") {
    std::cout << "kind: " << to_string(ck.kind) << "\n"
              << "dims: K=" << ck.dims.joints << " Dz=" << ck.dims.z_dim
              << " Dsw=" << ck.dims.z_swing_dim << " blocks=" << ck.dims.blocks
              << " hidden=" << ck.dims.hidden << "\n";
  } else {
    std::cout << "mlp: hidden=" << ck.mlp_hidden << " layers=" << ck.mlp_layers << "\n";
  }
  std::cout << "parameters: " << count << "\n"
            << "epoch: " << ck.epoch << " (adam steps " << ck.adam_steps << ")\n"
            << "tree_hash: " << ck.tree_hash << "\n";
  if (!ck.history.empty()) {
    const EpochMetrics& last = ck.history.back();
    std::cout << "last metrics: total=" << last.train.total
              << " val_mpjpe=" << last.val_mpjpe_mm << " mm, val_pa=" << last.val_pa_mpjpe_mm
              << " mm, val_rot=" << last.val_rot_deg << " deg\n";
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"bidirectional invertible-network inverse kinematics toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set,set", overrides,
                    "dotted-key overrides, e.g. training.lr=1e-4 (flags win over the file)");
    cmd->add_option("--threads", threads, "worker threads");
    if (needs_out)
      cmd->add_option("--out", out_dir,
                      "output directory (default: $KINFLOW_OUT/<command>)");
  };

  auto resolve_out = [&](const std::string& command) {
    if (!out_dir.empty()) return out_dir;
    const char* root = std::getenv("KINFLOW_OUT");
    if (!root || !*root)
      throw std::runtime_error("--out not given and KINFLOW_OUT is not set");
    return (fs::path(root) / command).string();
  };

  auto resolve_config = [&]() {
    if (threads > 0) overrides.push_back("threads=" + std::to_string(threads));
    return parse_config(config_path, overrides);
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate train/val/test datasets");
  add_common(gen, true);

  CLI::App* train = app.add_subcommand("train", "train the flow model or the mlp baseline");
  std::string data_dir, baseline;
  bool quiet = false;
  add_common(train, true);
  train->add_option("--data", data_dir, "directory with train.bin/val.bin")->required();
  train->add_option("--baseline", baseline, "train a baseline instead (mlp)");
  train->add_flag("--quiet", quiet, "suppress per-epoch lines");

  CLI::App* evalc = app.add_subcommand("eval", "evaluate a solver on a dataset");
  std::string solver = "flow", checkpoint, dataset_path;
  add_common(evalc, true);
  evalc->add_option("--solver", solver, "analytic | flow | mlp");
  evalc->add_option("--checkpoint", checkpoint, "checkpoint for learned solvers");
  evalc->add_option("--data", dataset_path, "dataset file")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "noise robustness sweep (csv)");
  std::vector<std::string> sweep_cks;
  add_common(sweep, true);
  sweep->add_option("--solver-checkpoint", sweep_cks,
                    "label=checkpoint.bin entries; analytic is always included");

  CLI::App* grad = app.add_subcommand("grad-check", "finite-difference gradient battery");
  int components = 160;
  grad->add_option("--components", components, "sampled components per term");

  CLI::App* inspect = app.add_subcommand("inspect", "summarize a checkpoint");
  std::string inspect_path;
  inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(resolve_config(), resolve_out("gen-data"));
    if (train->parsed())
      return cmd_train(resolve_config(), data_dir, resolve_out("train"), baseline, quiet);
    if (evalc->parsed())
      return cmd_eval(resolve_config(), solver, checkpoint, dataset_path, resolve_out("eval"));
    if (sweep->parsed()) {
      std::vector<std::pair<std::string, std::string>> cks;
      for (const std::string& entry : sweep_cks) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
          throw std::runtime_error("--solver-checkpoint expects label=path, got '" + entry + "'");
        cks.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
      }
      return cmd_sweep(resolve_config(), cks, resolve_out("sweep"));
    }
    if (grad->parsed()) return cmd_grad_check(components);
    if (inspect->parsed()) return cmd_inspect(inspect_path);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace kinflow
