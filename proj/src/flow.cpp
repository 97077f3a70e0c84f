#include "kinflow/flow.hpp"

#include <numeric>

namespace kinflow {

using namespace ad;

void CouplingBlock::validate() const {
  if (width < 2 || half < 1 || half >= width)
    throw std::invalid_argument("CouplingBlock: bad split");
  const int d1 = half, d2 = width - half;
  auto expect = [](const MlpParams& m, int in, int out, const char* name) {
    m.validate();
    if (m.in_dim() != in || m.out_dim() != out)
      throw std::invalid_argument(std::string("CouplingBlock: ") + name + " dim mismatch");
  };
  expect(s2, d2 + cond_dim, d1, "s2");
  expect(t2, d2 + cond_dim, d1, "t2");
  expect(s1, d1 + cond_dim, d2, "s1");
  expect(t1, d1 + cond_dim, d2, "t1");
  if (t1.output != MlpParams::Output::tanh || t2.output != MlpParams::Output::tanh)
    throw std::invalid_argument("CouplingBlock: translation nets must end in tanh");
}

std::vector<Mat*> CouplingBlock::param_ptrs() {
  std::vector<Mat*> out;
  for (MlpParams* m : {&s1, &t1, &s2, &t2})
    for (Mat* p : m->param_ptrs()) out.push_back(p);
  return out;
}

CouplingBlock make_coupling_block(int width, int cond_dim, int hidden, Rng& rng) {
  CouplingBlock b;
  b.width = width;
  b.half = width / 2;
  b.cond_dim = cond_dim;
  const int d1 = b.half, d2 = width - b.half;
  const std::vector<int> h = {hidden, hidden};
  b.s2 = make_mlp(d2 + cond_dim, h, d1, MlpParams::Output::identity, rng);
  b.t2 = make_mlp(d2 + cond_dim, h, d1, MlpParams::Output::tanh, rng);
  b.s1 = make_mlp(d1 + cond_dim, h, d2, MlpParams::Output::identity, rng);
  b.t1 = make_mlp(d1 + cond_dim, h, d2, MlpParams::Output::tanh, rng);
  // Zero the last layer of every conditioner: the stack starts as an exact
  // identity (up to permutations), so deep stacks cannot amplify either
  // direction at initialization.
  for (MlpParams* m : {&b.s1, &b.t1, &b.s2, &b.t2}) m->weights.back().setZero();
  b.validate();
  return b;
}

CouplingVars lift_block(Tape& tape, const CouplingBlock& block, bool trainable) {
  CouplingVars v;
  v.width = block.width;
  v.half = block.half;
  v.s1 = lift_mlp(tape, block.s1, trainable);
  v.t1 = lift_mlp(tape, block.t1, trainable);
  v.s2 = lift_mlp(tape, block.s2, trainable);
  v.t2 = lift_mlp(tape, block.t2, trainable);
  return v;
}

namespace {

Var with_condition(Var part, Var cond) {
  return cond.valid() ? hcat({part, cond}) : part;
}

Var clamped_scale(const MlpVars& net, Var in) {
  Var raw = mlp_apply(net, in);
  if (!raw.value().allFinite())
    throw FlowDivergence("coupling scale net produced non-finite outputs");
  Var clamped = soft_clamp(raw, CouplingBlock::kScaleClamp);
  // the exponentiated value is what must stay sane; raw conditioner spikes
  // are recoverable transients under the clamp
  const double peak = clamped.value().array().abs().maxCoeff();
  if (peak > CouplingBlock::kScaleOverflow)
    throw FlowDivergence("coupling exp argument " + std::to_string(peak) +
                         " exceeds overflow bound");
  return clamped;
}

std::vector<int> inverse_perm(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  return inv;
}

}  // namespace

Var coupling_forward(const CouplingVars& vars, Var u, Var cond) {
  if (u.cols() != vars.width) throw std::invalid_argument("coupling_forward: width mismatch");
  Var u1 = slice_cols(u, 0, vars.half);
  Var u2 = slice_cols(u, vars.half, vars.width - vars.half);
  Var c2 = with_condition(u2, cond);
  Var v1 = add(cmul(u1, vexp(clamped_scale(vars.s2, c2))), mlp_apply(vars.t2, c2));
  Var c1 = with_condition(v1, cond);
  Var v2 = add(cmul(u2, vexp(clamped_scale(vars.s1, c1))), mlp_apply(vars.t1, c1));
  return hcat({v1, v2});
}

Var coupling_inverse(const CouplingVars& vars, Var v, Var cond) {
  if (v.cols() != vars.width) throw std::invalid_argument("coupling_inverse: width mismatch");
  Var v1 = slice_cols(v, 0, vars.half);
  Var v2 = slice_cols(v, vars.half, vars.width - vars.half);
  Var c1 = with_condition(v1, cond);
  Var u2 = cmul(sub(v2, mlp_apply(vars.t1, c1)), vexp(scale(clamped_scale(vars.s1, c1), -1.0)));
  Var c2 = with_condition(u2, cond);
  Var u1 = cmul(sub(v1, mlp_apply(vars.t2, c2)), vexp(scale(clamped_scale(vars.s2, c2), -1.0)));
  return hcat({u1, u2});
}

std::vector<Mat*> InvertibleNet::param_ptrs() {
  std::vector<Mat*> out;
  for (auto& b : blocks)
    for (Mat* p : b.param_ptrs()) out.push_back(p);
  return out;
}

std::size_t InvertibleNet::param_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks)
    n += b.s1.param_count() + b.t1.param_count() + b.s2.param_count() + b.t2.param_count();
  return n;
}

void InvertibleNet::validate() const {
  if (blocks.empty() || blocks.size() != perms.size())
    throw std::invalid_argument("InvertibleNet: blocks/perms mismatch");
  for (const auto& b : blocks) {
    b.validate();
    if (b.width != width || b.cond_dim != cond_dim)
      throw std::invalid_argument("InvertibleNet: block width/cond mismatch");
  }
  for (const auto& p : perms) {
    if (static_cast<int>(p.size()) != width)
      throw std::invalid_argument("InvertibleNet: bad permutation size");
    std::vector<bool> seen(p.size(), false);
    for (int idx : p) {
      if (idx < 0 || idx >= width || seen[static_cast<std::size_t>(idx)])
        throw std::invalid_argument("InvertibleNet: not a permutation");
      seen[static_cast<std::size_t>(idx)] = true;
    }
  }
}

InvertibleNet make_invertible_net(int width, int cond_dim, int n_blocks, int hidden,
                                  std::uint64_t perm_seed, Rng& param_rng) {
  InvertibleNet net;
  net.width = width;
  net.cond_dim = cond_dim;
  Rng perm_rng(perm_seed);
  for (int i = 0; i < n_blocks; ++i) {
    net.blocks.push_back(make_coupling_block(width, cond_dim, hidden, param_rng));
    std::vector<int> perm(static_cast<std::size_t>(width));
    std::iota(perm.begin(), perm.end(), 0);
    perm_rng.shuffle(perm);
    net.perms.push_back(std::move(perm));
  }
  net.validate();
  return net;
}

NetVars lift_net(Tape& tape, const InvertibleNet& net, bool trainable) {
  NetVars v;
  v.net = &net;
  for (const auto& b : net.blocks) v.blocks.push_back(lift_block(tape, b, trainable));
  return v;
}

Var net_forward(const NetVars& vars, Var x, Var cond) {
  const InvertibleNet& net = *vars.net;
  if (x.cols() != net.width) throw std::invalid_argument("net_forward: width mismatch");
  if (net.cond_dim > 0 && (!cond.valid() || cond.cols() != net.cond_dim))
    throw std::invalid_argument("net_forward: condition mismatch");
  Var h = x;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    h = permute_cols(h, net.perms[i]);
    h = coupling_forward(vars.blocks[i], h, net.cond_dim > 0 ? cond : Var());
  }
  return h;
}

Var net_inverse(const NetVars& vars, Var y, Var cond) {
  const InvertibleNet& net = *vars.net;
  if (y.cols() != net.width) throw std::invalid_argument("net_inverse: width mismatch");
  if (net.cond_dim > 0 && (!cond.valid() || cond.cols() != net.cond_dim))
    throw std::invalid_argument("net_inverse: condition mismatch");
  Var h = y;
  for (std::size_t i = net.blocks.size(); i-- > 0;) {
    h = coupling_inverse(vars.blocks[i], h, net.cond_dim > 0 ? cond : Var());
    h = permute_cols(h, inverse_perm(net.perms[i]));
  }
  return h;
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::one_stage ? "one_stage" : "twist_and_swing";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "one_stage") return ModelKind::one_stage;
  if (s == "twist_and_swing") return ModelKind::twist_and_swing;
  throw std::invalid_argument("unknown model kind: " + s);
}

ModelLayout make_layout(ModelKind kind, const ModelDims& dims) {
  ModelLayout l;
  l.K = dims.joints;
  l.Dz = dims.z_dim;
  l.Dsw = dims.z_swing_dim;
  l.p_dim = 3 * l.K;
  l.phi_dim = 2 * (l.K - 1);
  l.s_dim = l.K;
  l.rot_dim = 6 * l.K;
  l.valid_in = l.p_dim + l.phi_dim + l.s_dim;  // 6K - 2
  l.width_one_stage = l.rot_dim + l.Dz;
  l.pad_one_stage = l.width_one_stage - l.valid_in;  // Dz + 2
  l.pad_g1 = (l.rot_dim + l.Dsw) - (l.p_dim + l.s_dim);
  l.pad_g2 = (l.rot_dim + l.Dz) - (l.rot_dim + l.phi_dim);
  l.total_dim = kind == ModelKind::one_stage ? l.width_one_stage : l.rot_dim + l.Dz + l.Dsw;
  l.validate(kind);
  return l;
}

void ModelLayout::validate(ModelKind kind) const {
  if (K < 2 || Dz < 0 || Dsw < 0) throw std::invalid_argument("ModelLayout: bad dims");
  if (valid_in != 6 * K - 2) throw std::invalid_argument("ModelLayout: valid input dim broken");
  if (kind == ModelKind::one_stage) {
    if (pad_one_stage != Dz + 2 || valid_in + pad_one_stage != width_one_stage)
      throw std::invalid_argument("ModelLayout: one-stage padding identity violated");
  } else {
    if (pad_g1 < 0 || pad_g2 < 0)
      throw std::invalid_argument("ModelLayout: negative padding (Dz must be >= 2K-2)");
    if (p_dim + s_dim + pad_g1 != rot_dim + Dsw || rot_dim + phi_dim + pad_g2 != rot_dim + Dz)
      throw std::invalid_argument("ModelLayout: twist-and-swing widths inconsistent");
  }
}

FlowIkModel::FlowIkModel(ModelKind kind, const ModelDims& dims)
    : kind_(kind), dims_(dims), layout_(make_layout(kind, dims)) {
  Rng rng(dims.init_seed);
  if (kind_ == ModelKind::one_stage) {
    net1_ = make_invertible_net(layout_.width_one_stage, dims.beta_dim, dims.blocks,
                                dims.hidden, dims.perm_seed, rng);
  } else {
    net1_ = make_invertible_net(layout_.rot_dim + layout_.Dsw, dims.beta_dim, dims.blocks,
                                dims.hidden, dims.perm_seed, rng);
    // the second stage maps (swing, twist) to rotations and drops the shape
    // condition
    net2_ = make_invertible_net(layout_.rot_dim + layout_.Dz, 0, dims.blocks, dims.hidden,
                                dims.perm_seed + 1, rng);
  }
}

std::vector<Mat*> FlowIkModel::param_ptrs() {
  std::vector<Mat*> out = net1_.param_ptrs();
  if (net2_)
    for (Mat* p : net2_->param_ptrs()) out.push_back(p);
  return out;
}

std::size_t FlowIkModel::param_count() const {
  return net1_.param_count() + (net2_ ? net2_->param_count() : 0);
}

FlowIkModel::Lifted FlowIkModel::lift(Tape& tape, bool trainable) const {
  Lifted l;
  l.net1 = lift_net(tape, net1_, trainable);
  if (net2_) l.net2 = lift_net(tape, *net2_, trainable);
  return l;
}

FlowIkModel::IkOut FlowIkModel::ik(Tape& tape, const Lifted& vars, Var p, Var phi, Var s,
                                   Var beta) const {
  const ModelLayout& L = layout_;
  if (p.cols() != L.p_dim || phi.cols() != L.phi_dim || s.cols() != L.s_dim)
    throw std::invalid_argument("FlowIkModel::ik: input dim mismatch");
  const Eigen::Index n = p.rows();
  IkOut out;
  if (kind_ == ModelKind::one_stage) {
    Var pad = tape.constant(Mat::Zero(n, L.pad_one_stage));
    Var x = net_inverse(vars.net1, hcat({p, phi, s, pad}), beta);
    out.rot = slice_cols(x, 0, L.rot_dim);
    out.z = slice_cols(x, L.rot_dim, L.Dz);
  } else {
    Var pad1 = tape.constant(Mat::Zero(n, L.pad_g1));
    Var x1 = net_inverse(vars.net1, hcat({p, s, pad1}), beta);
    out.swing = slice_cols(x1, 0, L.rot_dim);
    out.z_swing = slice_cols(x1, L.rot_dim, L.Dsw);
    Var pad2 = tape.constant(Mat::Zero(n, L.pad_g2));
    Var x2 = net_inverse(*vars.net2, hcat({out.swing, phi, pad2}), Var());
    out.rot = slice_cols(x2, 0, L.rot_dim);
    out.z = slice_cols(x2, L.rot_dim, L.Dz);
  }
  return out;
}

FlowIkModel::FkOut FlowIkModel::fk(Tape& tape, const Lifted& vars, Var rot, Var z, Var z_swing,
                                   Var beta) const {
  const ModelLayout& L = layout_;
  if (rot.cols() != L.rot_dim || z.cols() != L.Dz)
    throw std::invalid_argument("FlowIkModel::fk: input dim mismatch");
  (void)tape;
  FkOut out;
  if (kind_ == ModelKind::one_stage) {
    Var y = net_forward(vars.net1, hcat({rot, z}), beta);
    out.p = slice_cols(y, 0, L.p_dim);
    out.phi = slice_cols(y, L.p_dim, L.phi_dim);
    out.s = slice_cols(y, L.p_dim + L.phi_dim, L.s_dim);
    out.pads = slice_cols(y, L.valid_in, L.pad_one_stage);
  } else {
    if (!z_swing.valid() || z_swing.cols() != L.Dsw)
      throw std::invalid_argument("FlowIkModel::fk: missing swing latent");
    Var y2 = net_forward(*vars.net2, hcat({rot, z}), Var());
    out.swing = slice_cols(y2, 0, L.rot_dim);
    out.phi = slice_cols(y2, L.rot_dim, L.phi_dim);
    Var pad2 = slice_cols(y2, L.rot_dim + L.phi_dim, L.pad_g2);
    Var y1 = net_forward(vars.net1, hcat({out.swing, z_swing}), beta);
    out.p = slice_cols(y1, 0, L.p_dim);
    out.s = slice_cols(y1, L.p_dim, L.s_dim);
    Var pad1 = slice_cols(y1, L.p_dim + L.s_dim, L.pad_g1);
    out.pads = hcat({pad1, pad2});
  }
  return out;
}

// Full-width layouts: one_stage Y = [p, phi, s, pad], X = [rot, z];
// twist_and_swing Y = [p, phi, s, pad1, pad2], X = [rot, z, z_swing].
Var FlowIkModel::inverse_full(Tape& tape, const Lifted& vars, Var y, Var beta) const {
  const ModelLayout& L = layout_;
  if (y.cols() != L.total_dim) throw std::invalid_argument("inverse_full: width mismatch");
  (void)tape;
  if (kind_ == ModelKind::one_stage) return net_inverse(vars.net1, y, beta);
  Var p = slice_cols(y, 0, L.p_dim);
  Var phi = slice_cols(y, L.p_dim, L.phi_dim);
  Var s = slice_cols(y, L.p_dim + L.phi_dim, L.s_dim);
  Var pad1 = slice_cols(y, L.valid_in, L.pad_g1);
  Var pad2 = slice_cols(y, L.valid_in + L.pad_g1, L.pad_g2);
  Var x1 = net_inverse(vars.net1, hcat({p, s, pad1}), beta);
  Var swing = slice_cols(x1, 0, L.rot_dim);
  Var z_swing = slice_cols(x1, L.rot_dim, L.Dsw);
  Var x2 = net_inverse(*vars.net2, hcat({swing, phi, pad2}), Var());
  return hcat({x2, z_swing});  // [rot, z, z_swing]
}

Var FlowIkModel::forward_full(Tape& tape, const Lifted& vars, Var x, Var beta) const {
  const ModelLayout& L = layout_;
  if (x.cols() != L.total_dim) throw std::invalid_argument("forward_full: width mismatch");
  (void)tape;
  if (kind_ == ModelKind::one_stage) return net_forward(vars.net1, x, beta);
  Var rot_z = slice_cols(x, 0, L.rot_dim + L.Dz);
  Var z_swing = slice_cols(x, L.rot_dim + L.Dz, L.Dsw);
  Var y2 = net_forward(*vars.net2, rot_z, Var());
  Var swing = slice_cols(y2, 0, L.rot_dim);
  Var phi = slice_cols(y2, L.rot_dim, L.phi_dim);
  Var pad2 = slice_cols(y2, L.rot_dim + L.phi_dim, L.pad_g2);
  Var y1 = net_forward(vars.net1, hcat({swing, z_swing}), beta);
  Var p = slice_cols(y1, 0, L.p_dim);
  Var s = slice_cols(y1, L.p_dim, L.s_dim);
  Var pad1 = slice_cols(y1, L.p_dim + L.s_dim, L.pad_g1);
  return hcat({p, phi, s, pad1, pad2});
}

FlowIkModel::IkResult FlowIkModel::ik_eval(const Mat& p, const Mat& phi, const Mat& s,
                                           const Mat& beta) const {
  Tape tape;
  Lifted vars = lift(tape, false);
  IkOut out = ik(tape, vars, tape.constant(p), tape.constant(phi), tape.constant(s),
                 tape.constant(beta));
  IkResult r;
  r.rot = out.rot.value();
  r.z = out.z.value();
  if (out.z_swing.valid()) r.z_swing = out.z_swing.value();
  if (out.swing.valid()) r.swing = out.swing.value();
  return r;
}

FlowIkModel::FkResult FlowIkModel::fk_eval(const Mat& rot, const Mat& z, const Mat& z_swing,
                                           const Mat& beta) const {
  Tape tape;
  Lifted vars = lift(tape, false);
  Var zsw = has_swing_stage() ? tape.constant(z_swing) : Var();
  FkOut out = fk(tape, vars, tape.constant(rot), tape.constant(z), zsw, tape.constant(beta));
  FkResult r;
  r.p = out.p.value();
  r.phi = out.phi.value();
  r.s = out.s.value();
  r.pads = out.pads.value();
  if (out.swing.valid()) r.swing = out.swing.value();
  return r;
}

Mat pack_inverse_input(const ModelLayout& layout, const Mat& p, const Mat& phi, const Mat& s) {
  if (p.cols() != layout.p_dim || phi.cols() != layout.phi_dim || s.cols() != layout.s_dim ||
      p.rows() != phi.rows() || p.rows() != s.rows())
    throw std::invalid_argument("pack_inverse_input: dim mismatch");
  Mat out = Mat::Zero(p.rows(), layout.width_one_stage);
  out.middleCols(0, layout.p_dim) = p;
  out.middleCols(layout.p_dim, layout.phi_dim) = phi;
  out.middleCols(layout.p_dim + layout.phi_dim, layout.s_dim) = s;
  return out;
}

void unpack_inverse_input(const ModelLayout& layout, const Mat& packed, Mat& p, Mat& phi,
                          Mat& s) {
  if (packed.cols() != layout.width_one_stage)
    throw std::invalid_argument("unpack_inverse_input: width mismatch");
  p = packed.middleCols(0, layout.p_dim);
  phi = packed.middleCols(layout.p_dim, layout.phi_dim);
  s = packed.middleCols(layout.p_dim + layout.phi_dim, layout.s_dim);
}

}  // namespace kinflow
