#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kinflow/data.hpp"
#include "kinflow/flow.hpp"
#include "kinflow/losses.hpp"
#include "kinflow/optim.hpp"

namespace kinflow {

struct AblationFlags {
  bool disable_independence = false;
  bool disable_boundary = false;
  bool disable_forward_training = false;  // inverse-only training
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  std::vector<int> decay_epochs = {30, 40};  // 1-based; lr *= decay_factor at each
  double decay_factor = 0.1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  LossWeights weights;
  MmdKernel kernel;
  AblationFlags ablation;

  void validate() const;
  double lr_at_epoch(int epoch_1based) const;
};

struct LossReport {
  double inverse = 0, forward = 0, independence = 0, boundary_inverse = 0,
         boundary_forward = 0, swing = 0, padding = 0, total = 0;
  double grad_norm = 0;

  LossReport& operator+=(const LossReport& o);
  LossReport& operator/=(double n);
};

// What a training step needs from a model: both tape directions plus the
// parameter list. FlowIkModel implements it; tests may substitute oracles.
class TrainableIkModel {
 public:
  struct Lifted {
    std::shared_ptr<void> state;
  };
  virtual ~TrainableIkModel() = default;
  virtual Lifted lift(ad::Tape& tape, bool trainable) const = 0;
  virtual FlowIkModel::IkOut ik(ad::Tape& tape, const Lifted& vars, ad::Var p, ad::Var phi,
                                ad::Var s, ad::Var beta) const = 0;
  virtual FlowIkModel::FkOut fk(ad::Tape& tape, const Lifted& vars, ad::Var rot, ad::Var z,
                                ad::Var z_swing, ad::Var beta) const = 0;
  virtual std::vector<ad::Mat*> params() = 0;
  virtual bool has_swing_stage() const = 0;
  virtual int z_dim() const = 0;
  virtual int z_swing_dim() const = 0;
};

// Adapter exposing a FlowIkModel to the trainer.
class FlowModelAdapter final : public TrainableIkModel {
 public:
  explicit FlowModelAdapter(FlowIkModel& model) : model_(&model) {}
  Lifted lift(ad::Tape& tape, bool trainable) const override;
  FlowIkModel::IkOut ik(ad::Tape& tape, const Lifted& vars, ad::Var p, ad::Var phi, ad::Var s,
                        ad::Var beta) const override;
  FlowIkModel::FkOut fk(ad::Tape& tape, const Lifted& vars, ad::Var rot, ad::Var z,
                        ad::Var z_swing, ad::Var beta) const override;
  std::vector<ad::Mat*> params() override { return model_->param_ptrs(); }
  bool has_swing_stage() const override { return model_->has_swing_stage(); }
  int z_dim() const override { return model_->layout().Dz; }
  int z_swing_dim() const override { return model_->layout().Dsw; }

 private:
  FlowIkModel* model_;
};

// One optimizer update on one mini-batch: inverse pass (rotation, FK,
// swing, independence terms), forward pass on the detached inverse
// latents, both zero-error boundary passes, padding penalty; gradients of
// everything accumulate into a single Adam step. Ablation flags drop the
// corresponding passes. Throws on non-finite losses (step rejected).
LossReport train_step(TrainableIkModel& model, const KinematicTree& tree,
                      const BatchView& batch, const TrainConfig& config, Rng& rng,
                      Adam& adam);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  LossReport train;
  double lr = 0;
  double val_mpjpe_mm = 0;
  double val_pa_mpjpe_mm = 0;
  double val_rot_deg = 0;
};

struct Checkpoint {
  std::string model_type;  // "flow" | "mlp"
  ModelKind kind = ModelKind::one_stage;  // flow only
  ModelDims dims;                          // flow only
  int mlp_hidden = 512;                    // mlp only
  int mlp_layers = 3;                      // mlp only
  std::uint64_t tree_hash = 0;
  int epoch = 0;
  std::string config_echo;
  std::vector<EpochMetrics> history;
  std::vector<ad::Mat> params;
  std::vector<ad::Mat> adam_m, adam_v;
  std::int64_t adam_steps = 0;
  double adam_lr = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model a checkpoint was trained on; throws on layout or
// model-type mismatch.
std::unique_ptr<FlowIkModel> restore_flow_model(const Checkpoint& ck);
void adopt_params(FlowIkModel& model, const Checkpoint& ck);
MlpParams restore_mlp_baseline(const Checkpoint& ck, const KinematicTree& tree);

using EpochHook = std::function<void(const EpochMetrics&)>;

struct TrainResult {
  Checkpoint best;      // lowest validation MPJPE
  Checkpoint last;
  std::vector<EpochMetrics> history;
};

// Full run: seeded shuffling, the step-decay schedule, per-epoch
// validation, best-checkpoint retention.
TrainResult train_run(FlowIkModel& model, const KinematicTree& tree, const Dataset& train_set,
                      const Dataset& val_set, const TrainConfig& config,
                      const std::string& config_echo = "", const EpochHook& hook = {});

// Feed-forward baseline: [p, phi, s, beta] -> rotations, trained with the
// inverse loss only, same schedule.
TrainResult train_mlp_baseline(MlpParams& mlp, const KinematicTree& tree,
                               const Dataset& train_set, const Dataset& val_set,
                               const TrainConfig& config, const std::string& config_echo = "",
                               const EpochHook& hook = {});

MlpParams make_mlp_baseline(const KinematicTree& tree, int hidden, int layers,
                            std::uint64_t seed);
ad::Mat mlp_baseline_input(const BatchView& batch);

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

}  // namespace kinflow
