#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinflow/autodiff.hpp"
#include "kinflow/mlp.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

// Raised when a scale net output leaves the sane range before clamping.
struct FlowDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Affine coupling block (two coupling layers). The scale nets feed a
// smooth clamp before exponentiation, so one coupling can stretch a
// coordinate by at most e^kScaleClamp; raw outputs beyond kScaleOverflow
// mean an upstream explosion and abort with FlowDivergence.
struct CouplingBlock {
  MlpParams s1, t1, s2, t2;
  int width = 0;
  int half = 0;
  int cond_dim = 0;

  static constexpr double kScaleClamp = 2.0;
  static constexpr double kScaleOverflow = 40.0;

  void validate() const;
  std::vector<ad::Mat*> param_ptrs();
};

CouplingBlock make_coupling_block(int width, int cond_dim, int hidden, Rng& rng);

struct CouplingVars {
  MlpVars s1, t1, s2, t2;
  int width = 0;
  int half = 0;
};

CouplingVars lift_block(ad::Tape& tape, const CouplingBlock& block, bool trainable);

// v1 = u1 .* exp(s2(u2, beta)) + t2(u2, beta)
// v2 = u2 .* exp(s1(v1, beta)) + t1(v1, beta)
// `cond` is invalid for an unconditioned block.
ad::Var coupling_forward(const CouplingVars& vars, ad::Var u, ad::Var cond);
ad::Var coupling_inverse(const CouplingVars& vars, ad::Var v, ad::Var cond);

// Stack of coupling blocks, each preceded by a fixed seeded coordinate
// permutation so the half/half split mixes across blocks.
struct InvertibleNet {
  int width = 0;
  int cond_dim = 0;
  std::vector<CouplingBlock> blocks;
  std::vector<std::vector<int>> perms;  // applied before each block (forward)

  std::vector<ad::Mat*> param_ptrs();
  std::size_t param_count() const;
  void validate() const;
};

InvertibleNet make_invertible_net(int width, int cond_dim, int n_blocks, int hidden,
                                  std::uint64_t perm_seed, Rng& param_rng);

struct NetVars {
  std::vector<CouplingVars> blocks;
  const InvertibleNet* net = nullptr;
};

NetVars lift_net(ad::Tape& tape, const InvertibleNet& net, bool trainable);
ad::Var net_forward(const NetVars& vars, ad::Var x, ad::Var cond);
ad::Var net_inverse(const NetVars& vars, ad::Var y, ad::Var cond);

enum class ModelKind { one_stage, twist_and_swing };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelDims {
  int joints = 16;      // K
  int beta_dim = 10;
  int z_dim = 32;       // D_z
  int z_swing_dim = 32; // D_sw (twist-and-swing only)
  int blocks = 8;
  int hidden = 512;
  std::uint64_t perm_seed = 7;
  std::uint64_t init_seed = 1;
};

// Slot layout of the position-side ("y") and rotation-side ("x") vectors.
struct ModelLayout {
  int K = 0, Dz = 0, Dsw = 0;
  int p_dim = 0;        // 3K
  int phi_dim = 0;      // 2(K-1)
  int s_dim = 0;        // K
  int rot_dim = 0;      // 6K
  int valid_in = 0;     // 6K - 2
  int pad_one_stage = 0;   // Dz + 2
  int pad_g1 = 0;          // net1 width - (p + s)
  int pad_g2 = 0;          // net2 width - (rot + phi)
  int width_one_stage = 0; // 6K + Dz
  int total_dim = 0;       // full bijection width

  void validate(ModelKind kind) const;  // throws on inconsistent bookkeeping
};

ModelLayout make_layout(ModelKind kind, const ModelDims& dims);

// The conditional bidirectional FK/IK flow. The forward direction maps the
// rotation side [R, z] to the position side [p, phi, s, padding]; the
// inverse direction is the IK map. one_stage uses a single conditioned net;
// twist_and_swing chains a conditioned positions<->swing net with an
// unconditioned (swing, twist)<->rotation net.
class FlowIkModel {
 public:
  FlowIkModel(ModelKind kind, const ModelDims& dims);

  ModelKind kind() const { return kind_; }
  const ModelDims& dims() const { return dims_; }
  const ModelLayout& layout() const { return layout_; }
  bool has_swing_stage() const { return kind_ == ModelKind::twist_and_swing; }

  std::vector<ad::Mat*> param_ptrs();
  std::size_t param_count() const;

  struct Lifted {
    NetVars net1;
    std::optional<NetVars> net2;
  };
  Lifted lift(ad::Tape& tape, bool trainable) const;

  struct IkOut {
    ad::Var rot;     // n x 6K
    ad::Var z;       // n x Dz
    ad::Var z_swing; // twist_and_swing only
    ad::Var swing;   // n x 6K intermediate swing, twist_and_swing only
  };
  struct FkOut {
    ad::Var p;          // n x 3K
    ad::Var phi;        // n x 2(K-1)
    ad::Var s;          // n x K
    ad::Var pads;       // concatenated padding outputs
    ad::Var swing;      // forward-pass swing, twist_and_swing only
  };

  IkOut ik(ad::Tape& tape, const Lifted& vars, ad::Var p, ad::Var phi, ad::Var s,
           ad::Var beta) const;
  FkOut fk(ad::Tape& tape, const Lifted& vars, ad::Var rot, ad::Var z, ad::Var z_swing,
           ad::Var beta) const;

  // Full-width bijection (pads and latents included) used by the
  // round-trip checks: Y <-> X with total_dim() columns each.
  ad::Var forward_full(ad::Tape& tape, const Lifted& vars, ad::Var x, ad::Var beta) const;
  ad::Var inverse_full(ad::Tape& tape, const Lifted& vars, ad::Var y, ad::Var beta) const;
  int total_dim() const { return layout_.total_dim; }

  // Convenience inference wrappers (fresh tape, constants, no gradients).
  struct IkResult {
    ad::Mat rot, z, z_swing, swing;
  };
  IkResult ik_eval(const ad::Mat& p, const ad::Mat& phi, const ad::Mat& s,
                   const ad::Mat& beta) const;
  struct FkResult {
    ad::Mat p, phi, s, pads, swing;
  };
  FkResult fk_eval(const ad::Mat& rot, const ad::Mat& z, const ad::Mat& z_swing,
                   const ad::Mat& beta) const;

  InvertibleNet& net1() { return net1_; }
  std::optional<InvertibleNet>& net2() { return net2_; }
  const InvertibleNet& net1() const { return net1_; }
  const std::optional<InvertibleNet>& net2() const { return net2_; }

 private:
  ModelKind kind_;
  ModelDims dims_;
  ModelLayout layout_;
  InvertibleNet net1_;
  std::optional<InvertibleNet> net2_;
};

// One-stage packing [p, phi, s, 0_M]; throws on dimension mismatch.
ad::Mat pack_inverse_input(const ModelLayout& layout, const ad::Mat& p, const ad::Mat& phi,
                           const ad::Mat& s);
void unpack_inverse_input(const ModelLayout& layout, const ad::Mat& packed, ad::Mat& p,
                          ad::Mat& phi, ad::Mat& s);

}  // namespace kinflow
