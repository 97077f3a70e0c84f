#include "kinflow/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kinflow/evaluation.hpp"

namespace kinflow {

using namespace ad;

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (clip_norm <= 0.0) throw std::invalid_argument("TrainConfig: clip_norm must be positive");
  for (int e : decay_epochs)
    if (e <= 0 || e >= epochs)
      throw std::invalid_argument("TrainConfig: decay epochs must lie inside (0, epochs)");
}

double TrainConfig::lr_at_epoch(int epoch_1based) const {
  double out = lr;
  for (int e : decay_epochs)
    if (epoch_1based >= e) out *= decay_factor;
  return out;
}

LossReport& LossReport::operator+=(const LossReport& o) {
  inverse += o.inverse;
  forward += o.forward;
  independence += o.independence;
  boundary_inverse += o.boundary_inverse;
  boundary_forward += o.boundary_forward;
  swing += o.swing;
  padding += o.padding;
  total += o.total;
  grad_norm += o.grad_norm;
  return *this;
}

LossReport& LossReport::operator/=(double n) {
  inverse /= n;
  forward /= n;
  independence /= n;
  boundary_inverse /= n;
  boundary_forward /= n;
  swing /= n;
  padding /= n;
  total /= n;
  grad_norm /= n;
  return *this;
}

TrainableIkModel::Lifted FlowModelAdapter::lift(Tape& tape, bool trainable) const {
  auto state = std::make_shared<FlowIkModel::Lifted>(model_->lift(tape, trainable));
  return {state};
}

FlowIkModel::IkOut FlowModelAdapter::ik(Tape& tape, const Lifted& vars, Var p, Var phi, Var s,
                                        Var beta) const {
  return model_->ik(tape, *std::static_pointer_cast<FlowIkModel::Lifted>(vars.state), p, phi,
                    s, beta);
}

FlowIkModel::FkOut FlowModelAdapter::fk(Tape& tape, const Lifted& vars, Var rot, Var z,
                                        Var z_swing, Var beta) const {
  return model_->fk(tape, *std::static_pointer_cast<FlowIkModel::Lifted>(vars.state), rot, z,
                    z_swing, beta);
}

LossReport train_step(TrainableIkModel& model, const KinematicTree& tree,
                      const BatchView& batch, const TrainConfig& config, Rng& rng,
                      Adam& adam) {
  const Eigen::Index n = batch.p_obs.rows();
  Tape tape;
  auto vars = model.lift(tape, true);
  Var beta = tape.constant(batch.beta);
  const Mat ones = Mat::Ones(n, batch.confidence.cols());
  const Mat bone_vecs = bone_vectors(tree, batch.beta);

  LossTerms terms;
  std::vector<Var> pad_losses;

  // (1) inverse pass on the noisy observation
  auto inv = model.ik(tape, vars, tape.constant(batch.p_obs), tape.constant(batch.twists_obs),
                      tape.constant(batch.confidence), beta);
  terms.inverse = loss_inverse(tape, tree, inv.rot, batch.rot_gt, batch.p_gt, bone_vecs);
  if (model.has_swing_stage())
    terms.swing = loss_swing(tape, inv.swing, batch.swing_gt);
  if (!config.ablation.disable_independence)
    terms.independence =
        loss_independence(tape, inv.rot, inv.z, batch.rot_gt, rng, config.kernel);

  // (2) forward pass with the detached inverse latents
  if (!config.ablation.disable_forward_training) {
    Var z_det = tape.detach(inv.z);
    Var z_sw_det = model.has_swing_stage() ? tape.detach(inv.z_swing) : Var();
    auto fwd = model.fk(tape, vars, tape.constant(batch.rot_gt), z_det, z_sw_det, beta);
    terms.forward = loss_forward(tape, fwd.p, fwd.phi, batch.p_obs, batch.twists_obs);
    if (fwd.pads.valid()) pad_losses.push_back(loss_padding(tape, fwd.pads));
    if (model.has_swing_stage()) {
      Var fwd_swing_term = loss_swing(tape, fwd.swing, inv.swing.value());
      terms.swing = terms.swing.valid() ? add(terms.swing, fwd_swing_term) : fwd_swing_term;
    }
  }

  // (3) + (4) zero-error boundary passes on clean ground truth
  if (!config.ablation.disable_boundary) {
    auto bnd_inv = model.ik(tape, vars, tape.constant(batch.p_gt),
                            tape.constant(batch.twists_gt), tape.constant(ones), beta);
    terms.boundary_inverse = boundary_inverse_term(tape, bnd_inv, batch.rot_gt);
    if (!config.ablation.disable_forward_training) {
      Var zero = tape.constant(Mat::Zero(n, model.z_dim()));
      Var zero_sw =
          model.has_swing_stage() ? tape.constant(Mat::Zero(n, model.z_swing_dim())) : Var();
      auto bnd_fwd = model.fk(tape, vars, tape.constant(batch.rot_gt), zero, zero_sw, beta);
      terms.boundary_forward = boundary_forward_term(tape, bnd_fwd, batch.p_gt, batch.twists_gt);
      if (bnd_fwd.pads.valid()) pad_losses.push_back(loss_padding(tape, bnd_fwd.pads));
    }
  }

  for (const Var& p : pad_losses)
    terms.padding = terms.padding.valid() ? add(terms.padding, p) : p;

  Var total = total_loss(tape, terms, config.weights);
  std::vector<Mat*> params = model.params();
  std::vector<Mat> grads;
  grads.reserve(params.size());
  if (!params.empty()) {
    tape.backward(total);
    for (Mat* p : params) grads.push_back(tape.grad_by_storage(p));
  }

  LossReport report;
  auto value_or_zero = [](const Var& v) { return v.valid() ? v.value()(0, 0) : 0.0; };
  report.inverse = value_or_zero(terms.inverse);
  report.forward = value_or_zero(terms.forward);
  report.independence = value_or_zero(terms.independence);
  report.boundary_inverse = value_or_zero(terms.boundary_inverse);
  report.boundary_forward = value_or_zero(terms.boundary_forward);
  report.swing = value_or_zero(terms.swing);
  report.padding = value_or_zero(terms.padding);
  report.total = total.value()(0, 0);
  if (!grads.empty()) {
    report.grad_norm = global_grad_norm(grads);
    clip_global_norm(grads, config.clip_norm);
    adam.step(grads);
  }
  return report;
}

namespace {

Checkpoint snapshot_flow(const FlowIkModel& model, const Adam& adam, std::uint64_t tree_hash,
                         int epoch, const std::string& config_echo,
                         const std::vector<EpochMetrics>& history) {
  Checkpoint ck;
  ck.model_type = "flow";
  ck.kind = model.kind();
  ck.dims = model.dims();
  ck.tree_hash = tree_hash;
  ck.epoch = epoch;
  ck.config_echo = config_echo;
  ck.history = history;
  for (const Mat* p : const_cast<FlowIkModel&>(model).param_ptrs()) ck.params.push_back(*p);
  ck.adam_m = const_cast<Adam&>(adam).moment1();
  ck.adam_v = const_cast<Adam&>(adam).moment2();
  ck.adam_steps = adam.steps();
  ck.adam_lr = adam.lr();
  return ck;
}

Checkpoint snapshot_mlp(MlpParams& mlp, const Adam& adam, std::uint64_t tree_hash, int epoch,
                        const std::string& config_echo,
                        const std::vector<EpochMetrics>& history) {
  Checkpoint ck;
  ck.model_type = "mlp";
  ck.mlp_hidden = static_cast<int>(mlp.weights.front().cols());
  ck.mlp_layers = static_cast<int>(mlp.weights.size());
  ck.tree_hash = tree_hash;
  ck.epoch = epoch;
  ck.config_echo = config_echo;
  ck.history = history;
  for (const Mat* p : mlp.param_ptrs()) ck.params.push_back(*p);
  ck.adam_m = const_cast<Adam&>(adam).moment1();
  ck.adam_v = const_cast<Adam&>(adam).moment2();
  ck.adam_steps = adam.steps();
  ck.adam_lr = adam.lr();
  return ck;
}

EpochMetrics validate_epoch(const IkSolver& solver, const KinematicTree& tree,
                            const Dataset& val_set, int epoch, const LossReport& train_mean,
                            double lr) {
  EpochMetrics m;
  m.epoch = epoch;
  m.train = train_mean;
  m.lr = lr;
  const MetricReport r = evaluate_solver(solver, tree, val_set);
  m.val_mpjpe_mm = r.mpjpe_mm;
  m.val_pa_mpjpe_mm = r.pa_mpjpe_mm;
  m.val_rot_deg = r.rot_deg;
  return m;
}

std::vector<std::vector<int>> epoch_batches(int n, int batch_size, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int at = 0; at < n; at += batch_size) {
    const int end = std::min(n, at + batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

}  // namespace

TrainResult train_run(FlowIkModel& model, const KinematicTree& tree, const Dataset& train_set,
                      const Dataset& val_set, const TrainConfig& config,
                      const std::string& config_echo, const EpochHook& hook) {
  config.validate();
  if (train_set.tree_hash != tree.hash() || val_set.tree_hash != tree.hash())
    throw std::runtime_error("train_run: dataset/skeleton hash mismatch");
  if (train_set.size() == 0) throw std::invalid_argument("train_run: empty training set");

  FlowModelAdapter adapter(model);
  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  Adam adam(model.param_ptrs(), adam_cfg);
  Rng shuffle_rng(splitmix64(config.seed ^ 0x73687566ULL));
  Rng step_rng(splitmix64(config.seed + 0x9e3779b97f4a7c15ULL));

  const std::shared_ptr<const FlowIkModel> alias(&model, [](const FlowIkModel*) {});
  FlowSolver solver(alias);

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.set_lr(config.lr_at_epoch(epoch));
    LossReport mean;
    const auto batches = epoch_batches(train_set.size(), config.batch_size, shuffle_rng);
    for (const auto& idx : batches) {
      const BatchView batch = make_batch(tree, train_set, idx);
      mean += train_step(adapter, tree, batch, config, step_rng, adam);
    }
    mean /= static_cast<double>(batches.size());
    EpochMetrics m = validate_epoch(solver, tree, val_set, epoch, mean, adam.lr());
    result.history.push_back(m);
    if (hook) hook(m);
    if (m.val_mpjpe_mm < best_val) {
      best_val = m.val_mpjpe_mm;
      result.best = snapshot_flow(model, adam, tree.hash(), epoch, config_echo, result.history);
    }
  }
  result.last = snapshot_flow(model, adam, tree.hash(), config.epochs, config_echo,
                              result.history);
  if (result.best.params.empty()) result.best = result.last;
  return result;
}

MlpParams make_mlp_baseline(const KinematicTree& tree, int hidden, int layers,
                            std::uint64_t seed) {
  const int K = tree.joint_count();
  const int in = 3 * K + 2 * (K - 1) + K + tree.beta_dim();
  Rng rng(seed);
  std::vector<int> hidden_dims(static_cast<std::size_t>(std::max(0, layers - 1)), hidden);
  return make_mlp(in, hidden_dims, 6 * K, MlpParams::Output::identity, rng);
}

Mat mlp_baseline_input(const BatchView& batch) {
  Mat in(batch.p_obs.rows(), batch.p_obs.cols() + batch.twists_obs.cols() +
                                 batch.confidence.cols() + batch.beta.cols());
  in << batch.p_obs, batch.twists_obs, batch.confidence, batch.beta;
  return in;
}

TrainResult train_mlp_baseline(MlpParams& mlp, const KinematicTree& tree,
                               const Dataset& train_set, const Dataset& val_set,
                               const TrainConfig& config, const std::string& config_echo,
                               const EpochHook& hook) {
  config.validate();
  if (train_set.tree_hash != tree.hash() || val_set.tree_hash != tree.hash())
    throw std::runtime_error("train_mlp_baseline: dataset/skeleton hash mismatch");

  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  Adam adam(mlp.param_ptrs(), adam_cfg);
  Rng shuffle_rng(splitmix64(config.seed ^ 0x73687566ULL));

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.set_lr(config.lr_at_epoch(epoch));
    LossReport mean;
    const auto batches = epoch_batches(train_set.size(), config.batch_size, shuffle_rng);
    for (const auto& idx : batches) {
      const BatchView batch = make_batch(tree, train_set, idx);
      Tape tape;
      MlpVars vars = lift_mlp(tape, mlp, true);
      Var rot = mlp_apply(vars, tape.constant(mlp_baseline_input(batch)));
      Var loss = loss_inverse(tape, tree, rot, batch.rot_gt, batch.p_gt,
                              bone_vectors(tree, batch.beta));
      tape.backward(loss);
      std::vector<Mat*> params = mlp.param_ptrs();
      std::vector<Mat> grads;
      for (Mat* p : params) grads.push_back(tape.grad_by_storage(p));
      LossReport report;
      report.inverse = loss.value()(0, 0);
      report.total = report.inverse;
      report.grad_norm = global_grad_norm(grads);
      clip_global_norm(grads, config.clip_norm);
      adam.step(grads);
      mean += report;
    }
    mean /= static_cast<double>(batches.size());
    MlpSolver fresh(mlp);
    EpochMetrics m = validate_epoch(fresh, tree, val_set, epoch, mean, adam.lr());
    result.history.push_back(m);
    if (hook) hook(m);
    if (m.val_mpjpe_mm < best_val) {
      best_val = m.val_mpjpe_mm;
      result.best = snapshot_mlp(mlp, adam, tree.hash(), epoch, config_echo, result.history);
    }
  }
  result.last = snapshot_mlp(mlp, adam, tree.hash(), config.epochs, config_echo,
                             result.history);
  if (result.best.params.empty()) result.best = result.last;
  return result;
}

// ---- checkpoint io ----

namespace {
constexpr char kCkMagic[4] = {'K', 'F', 'C', 'K'};
constexpr std::uint32_t kCkVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

nlohmann::json metrics_to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"lr", m.lr},
          {"inverse", m.train.inverse},
          {"forward", m.train.forward},
          {"independence", m.train.independence},
          {"boundary_inverse", m.train.boundary_inverse},
          {"boundary_forward", m.train.boundary_forward},
          {"swing", m.train.swing},
          {"padding", m.train.padding},
          {"total", m.train.total},
          {"grad_norm", m.train.grad_norm},
          {"val_mpjpe_mm", m.val_mpjpe_mm},
          {"val_pa_mpjpe_mm", m.val_pa_mpjpe_mm},
          {"val_rot_deg", m.val_rot_deg}};
}

EpochMetrics metrics_from_json(const nlohmann::json& j) {
  EpochMetrics m;
  m.epoch = j.at("epoch").get<int>();
  m.lr = j.at("lr").get<double>();
  m.train.inverse = j.at("inverse").get<double>();
  m.train.forward = j.at("forward").get<double>();
  m.train.independence = j.at("independence").get<double>();
  m.train.boundary_inverse = j.at("boundary_inverse").get<double>();
  m.train.boundary_forward = j.at("boundary_forward").get<double>();
  m.train.swing = j.at("swing").get<double>();
  m.train.padding = j.at("padding").get<double>();
  m.train.total = j.at("total").get<double>();
  m.train.grad_norm = j.at("grad_norm").get<double>();
  m.val_mpjpe_mm = j.at("val_mpjpe_mm").get<double>();
  m.val_pa_mpjpe_mm = j.at("val_pa_mpjpe_mm").get<double>();
  m.val_rot_deg = j.at("val_rot_deg").get<double>();
  return m;
}

void put_blob(std::ostream& out, const std::vector<Mat>& mats) {
  for (const Mat& m : mats)
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

void get_blob(std::istream& in, std::vector<Mat>& mats) {
  for (Mat& m : mats) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw std::runtime_error("checkpoint: truncated parameter blob");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCkMagic, 4);
  put_u32(out, kCkVersion);
  nlohmann::json j;
  j["model_type"] = ck.model_type;
  j["kind"] = to_string(ck.kind);
  j["dims"] = {{"joints", ck.dims.joints},     {"beta_dim", ck.dims.beta_dim},
               {"z_dim", ck.dims.z_dim},       {"z_swing_dim", ck.dims.z_swing_dim},
               {"blocks", ck.dims.blocks},     {"hidden", ck.dims.hidden},
               {"perm_seed", ck.dims.perm_seed}, {"init_seed", ck.dims.init_seed}};
  j["mlp_hidden"] = ck.mlp_hidden;
  j["mlp_layers"] = ck.mlp_layers;
  j["tree_hash"] = ck.tree_hash;
  j["epoch"] = ck.epoch;
  j["config_echo"] = ck.config_echo;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& m : ck.history) hist.push_back(metrics_to_json(m));
  j["history"] = hist;
  nlohmann::json shapes = nlohmann::json::array();
  for (const Mat& m : ck.params) shapes.push_back({m.rows(), m.cols()});
  j["param_shapes"] = shapes;
  j["adam_steps"] = ck.adam_steps;
  j["adam_lr"] = ck.adam_lr;
  const std::string hs = j.dump();
  put_u64(out, hs.size());
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  put_blob(out, ck.params);
  put_blob(out, ck.adam_m);
  put_blob(out, ck.adam_v);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: not a kinflow checkpoint (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kCkVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t len = get_u64(in);
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: corrupt header: " + std::string(e.what()));
  }
  Checkpoint ck;
  ck.model_type = j.at("model_type").get<std::string>();
  ck.kind = model_kind_from_string(j.at("kind").get<std::string>());
  const auto& d = j.at("dims");
  ck.dims.joints = d.at("joints").get<int>();
  ck.dims.beta_dim = d.at("beta_dim").get<int>();
  ck.dims.z_dim = d.at("z_dim").get<int>();
  ck.dims.z_swing_dim = d.at("z_swing_dim").get<int>();
  ck.dims.blocks = d.at("blocks").get<int>();
  ck.dims.hidden = d.at("hidden").get<int>();
  ck.dims.perm_seed = d.at("perm_seed").get<std::uint64_t>();
  ck.dims.init_seed = d.at("init_seed").get<std::uint64_t>();
  ck.mlp_hidden = j.at("mlp_hidden").get<int>();
  ck.mlp_layers = j.at("mlp_layers").get<int>();
  ck.tree_hash = j.at("tree_hash").get<std::uint64_t>();
  ck.epoch = j.at("epoch").get<int>();
  ck.config_echo = j.at("config_echo").get<std::string>();
  for (const auto& h : j.at("history")) ck.history.push_back(metrics_from_json(h));
  for (const auto& s : j.at("param_shapes"))
    ck.params.push_back(Mat::Zero(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>()));
  ck.adam_m = ck.params;  // same shapes
  ck.adam_v = ck.params;
  ck.adam_steps = j.at("adam_steps").get<std::int64_t>();
  ck.adam_lr = j.at("adam_lr").get<double>();
  get_blob(in, ck.params);
  get_blob(in, ck.adam_m);
  get_blob(in, ck.adam_v);
  return ck;
}

void adopt_params(FlowIkModel& model, const Checkpoint& ck) {
  if (ck.model_type != "flow")
    throw std::runtime_error("adopt_params: checkpoint does not hold a flow model");
  if (model.kind() != ck.kind)
    throw std::runtime_error("adopt_params: checkpoint kind " + to_string(ck.kind) +
                             " does not match model kind " + to_string(model.kind()));
  std::vector<Mat*> params = model.param_ptrs();
  if (params.size() != ck.params.size())
    throw std::runtime_error("adopt_params: parameter count mismatch (layout differs)");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != ck.params[i].rows() || params[i]->cols() != ck.params[i].cols())
      throw std::runtime_error("adopt_params: parameter shape mismatch (layout differs)");
    *params[i] = ck.params[i];
  }
}

std::unique_ptr<FlowIkModel> restore_flow_model(const Checkpoint& ck) {
  if (ck.model_type != "flow")
    throw std::runtime_error("restore_flow_model: not a flow checkpoint");
  auto model = std::make_unique<FlowIkModel>(ck.kind, ck.dims);
  adopt_params(*model, ck);
  return model;
}

MlpParams restore_mlp_baseline(const Checkpoint& ck, const KinematicTree& tree) {
  if (ck.model_type != "mlp")
    throw std::runtime_error("restore_mlp_baseline: not an mlp checkpoint");
  MlpParams mlp = make_mlp_baseline(tree, ck.mlp_hidden, ck.mlp_layers, 0);
  std::vector<Mat*> params = mlp.param_ptrs();
  if (params.size() != ck.params.size())
    throw std::runtime_error("restore_mlp_baseline: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != ck.params[i].rows() || params[i]->cols() != ck.params[i].cols())
      throw std::runtime_error("restore_mlp_baseline: parameter shape mismatch");
    *params[i] = ck.params[i];
  }
  return mlp;
}

std::string metrics_csv_header() {
  return "epoch,lr,inverse,forward,independence,boundary_inverse,boundary_forward,swing,"
         "padding,total,grad_norm,val_mpjpe_mm,val_pa_mpjpe_mm,val_rot_deg";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream out;
  out.precision(17);
  out << m.epoch << "," << m.lr << "," << m.train.inverse << "," << m.train.forward << ","
      << m.train.independence << "," << m.train.boundary_inverse << ","
      << m.train.boundary_forward << "," << m.train.swing << "," << m.train.padding << ","
      << m.train.total << "," << m.train.grad_norm << "," << m.val_mpjpe_mm << ","
      << m.val_pa_mpjpe_mm << "," << m.val_rot_deg;
  return out.str();
}

}  // namespace kinflow
