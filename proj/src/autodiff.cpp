#include "kinflow/autodiff.hpp"

#include <cmath>

namespace kinflow::ad {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::invalid_argument("op on invalid Var");
  return *a.tape();
}

}  // namespace

const Mat& Var::value() const {
  if (!valid()) throw std::logic_error("Var::value on invalid Var");
  return tape_->value_of(index_);
}

const Mat& Var::grad() const {
  if (!valid()) throw std::logic_error("Var::grad on invalid Var");
  return tape_->grad_of(index_);
}

Var Tape::append(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const Mat* storage) {
  Node n;
  n.external = storage;
  n.requires_grad = true;
  Var v = append(std::move(n));
  param_index_.emplace_back(storage, v.index());
  return v;
}

Mat Tape::grad_by_storage(const Mat* storage) const {
  for (const auto& [ptr, idx] : param_index_) {
    if (ptr == storage) {
      const Mat& g = nodes_[static_cast<std::size_t>(idx)].grad;
      if (g.size() == 0) return Mat::Zero(ptr->rows(), ptr->cols());
      return g;
    }
  }
  throw std::invalid_argument("grad_by_storage: not a param leaf of this tape");
}

Var Tape::input(Mat value) {
  Node n;
  n.storage = std::move(value);
  n.requires_grad = true;
  return append(std::move(n));
}

Var Tape::constant(Mat value) {
  Node n;
  n.storage = std::move(value);
  return append(std::move(n));
}

Var Tape::constant_ref(const Mat* storage) {
  Node n;
  n.external = storage;
  return append(std::move(n));
}

Var Tape::scalar(double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::make_node(Mat value, std::vector<Var> parents,
                    std::function<void(Tape&, const Mat&, const std::vector<Var>&)> backprop) {
  Node n;
  n.storage = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::invalid_argument("make_node: parent from another tape");
    if (nodes_[static_cast<std::size_t>(p.index())].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) {
    n.backprop = std::move(backprop);
    n.parents = std::move(parents);
  }
  return append(std::move(n));
}

const Mat& Tape::value_of(int index) const {
  const Node& n = nodes_[static_cast<std::size_t>(index)];
  return n.external ? *n.external : n.storage;
}

const Mat& Tape::grad_of(int index) const {
  return nodes_[static_cast<std::size_t>(index)].grad;
}

bool Tape::requires_grad(int index) const {
  return nodes_[static_cast<std::size_t>(index)].requires_grad;
}

void Tape::add_grad(Var v, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.index())];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
  n.touched = true;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss from another tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be scalar (1x1)");
  Node& last = nodes_[static_cast<std::size_t>(loss.index())];
  if (!last.requires_grad)
    throw std::invalid_argument("backward: loss does not depend on any differentiable input");
  last.grad = Mat::Ones(1, 1);
  last.touched = true;
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.touched || !n.backprop) continue;
    n.backprop(*this, n.grad, n.parents);
  }
}

void Tape::clear() {
  nodes_.clear();
  param_index_.clear();
}

// ---- ops ----

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
  Mat v = a.value() * b.value();
  return t.make_node(std::move(v), {a, b}, [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    if (tp.requires_grad(p[0].index())) tp.add_grad(p[0], g * p[1].value().transpose());
    if (tp.requires_grad(p[1].index())) tp.add_grad(p[1], p[0].value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "add");
  return t.make_node(a.value() + b.value(), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       tp.add_grad(p[0], g);
                       tp.add_grad(p[1], g);
                     });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "sub");
  return t.make_node(a.value() - b.value(), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       tp.add_grad(p[0], g);
                       tp.add_grad(p[1], -g);
                     });
}

Var cmul(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "cmul");
  return t.make_node(a.value().cwiseProduct(b.value()), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       if (tp.requires_grad(p[0].index()))
                         tp.add_grad(p[0], g.cwiseProduct(p[1].value()));
                       if (tp.requires_grad(p[1].index()))
                         tp.add_grad(p[1], g.cwiseProduct(p[0].value()));
                     });
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  return t.make_node(a.value() * c, {a},
                     [c](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       tp.add_grad(p[0], g * c);
                     });
}

Var add_rowvec(Var a, Var row) {
  Tape& t = tape_of(a);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
  Mat v = a.value().rowwise() + row.value().row(0);
  return t.make_node(std::move(v), {a, row},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       tp.add_grad(p[0], g);
                       if (tp.requires_grad(p[1].index()))
                         tp.add_grad(p[1], g.colwise().sum());
                     });
}

Var vexp(Var a) {
  Tape& t = tape_of(a);
  Mat v = a.value().array().exp().matrix();
  return t.make_node(v, {a}, [v](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    tp.add_grad(p[0], g.cwiseProduct(v));
  });
}

Var vtanh(Var a) {
  Tape& t = tape_of(a);
  Mat v = a.value().array().tanh().matrix();
  return t.make_node(v, {a}, [v](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    tp.add_grad(p[0], (g.array() * (1.0 - v.array().square())).matrix());
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Mat v = a.value().cwiseMax(0.0);
  return t.make_node(std::move(v), {a}, [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    // subgradient 0 at the kink
    Mat m = (p[0].value().array() > 0.0).cast<double>().matrix();
    tp.add_grad(p[0], g.cwiseProduct(m));
  });
}

namespace {
// Identity inside |x| <= limit/2, saturating smoothly (C^1) to +-limit
// outside; keeps moderate scales untouched while bounding exp() inputs.
inline double soft_clamp_value(double x, double limit) {
  const double knee = limit / 2.0;
  if (std::abs(x) <= knee) return x;
  const double span = limit - knee;
  return std::copysign(knee + span * std::tanh((std::abs(x) - knee) / span), x);
}
inline double soft_clamp_deriv(double x, double limit) {
  const double knee = limit / 2.0;
  if (std::abs(x) <= knee) return 1.0;
  const double span = limit - knee;
  const double t = std::tanh((std::abs(x) - knee) / span);
  return 1.0 - t * t;
}
}  // namespace

Var soft_clamp(Var a, double limit) {
  Tape& t = tape_of(a);
  Mat v = a.value().unaryExpr([limit](double x) { return soft_clamp_value(x, limit); });
  return t.make_node(std::move(v), {a},
                     [limit](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       Mat d = p[0].value().unaryExpr(
                           [limit](double x) { return soft_clamp_deriv(x, limit); });
                       tp.add_grad(p[0], g.cwiseProduct(d));
                     });
}

Var slice_cols(Var a, int start, int n) {
  Tape& t = tape_of(a);
  if (start < 0 || n < 0 || start + n > a.cols())
    throw std::invalid_argument("slice_cols: out of range");
  Mat v = a.value().middleCols(start, n);
  return t.make_node(std::move(v), {a},
                     [start, n](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       Mat full = Mat::Zero(p[0].rows(), p[0].cols());
                       full.middleCols(start, n) = g;
                       tp.add_grad(p[0], full);
                     });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: empty");
  Tape& t = tape_of(parts[0]);
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.make_node(std::move(v), parts,
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       Eigen::Index at = 0;
                       for (const Var& part : p) {
                         if (tp.requires_grad(part.index()))
                           tp.add_grad(part, g.middleCols(at, part.cols()));
                         at += part.cols();
                       }
                     });
}

Var permute_cols(Var a, const std::vector<int>& perm) {
  Tape& t = tape_of(a);
  if (static_cast<Eigen::Index>(perm.size()) != a.cols())
    throw std::invalid_argument("permute_cols: size mismatch");
  Mat v(a.rows(), a.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    v.col(static_cast<Eigen::Index>(j)) = a.value().col(perm[j]);
  return t.make_node(std::move(v), {a},
                     [perm](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       Mat out = Mat::Zero(p[0].rows(), p[0].cols());
                       for (std::size_t j = 0; j < perm.size(); ++j)
                         out.col(perm[j]) = g.col(static_cast<Eigen::Index>(j));
                       tp.add_grad(p[0], out);
                     });
}

Var rowwise_dot(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "rowwise_dot");
  Mat v = a.value().cwiseProduct(b.value()).rowwise().sum();
  return t.make_node(std::move(v), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       // g is n x 1
                       if (tp.requires_grad(p[0].index()))
                         tp.add_grad(p[0], p[1].value().array().colwise() * g.col(0).array());
                       if (tp.requires_grad(p[1].index()))
                         tp.add_grad(p[1], p[0].value().array().colwise() * g.col(0).array());
                     });
}

Var mul_colvec(Var a, Var col) {
  Tape& t = tape_of(a);
  if (col.cols() != 1 || col.rows() != a.rows())
    throw std::invalid_argument("mul_colvec: col must be rows(a) x 1");
  Mat v = a.value().array().colwise() * col.value().col(0).array();
  return t.make_node(std::move(v), {a, col},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       if (tp.requires_grad(p[0].index()))
                         tp.add_grad(p[0], g.array().colwise() * p[1].value().col(0).array());
                       if (tp.requires_grad(p[1].index()))
                         tp.add_grad(p[1], g.cwiseProduct(p[0].value()).rowwise().sum());
                     });
}

namespace {
inline void cross_rows(const Mat& a, const Mat& b, Mat& out) {
  out.col(0) = a.col(1).cwiseProduct(b.col(2)) - a.col(2).cwiseProduct(b.col(1));
  out.col(1) = a.col(2).cwiseProduct(b.col(0)) - a.col(0).cwiseProduct(b.col(2));
  out.col(2) = a.col(0).cwiseProduct(b.col(1)) - a.col(1).cwiseProduct(b.col(0));
}
}  // namespace

Var cross3(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "cross3");
  if (a.cols() != 3) throw std::invalid_argument("cross3: need 3 columns");
  Mat v(a.rows(), 3);
  cross_rows(a.value(), b.value(), v);
  return t.make_node(std::move(v), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       // d/da (a x b) pulled back: b x g; d/db: g x a
                       if (tp.requires_grad(p[0].index())) {
                         Mat da(g.rows(), 3);
                         cross_rows(p[1].value(), g, da);
                         tp.add_grad(p[0], da);
                       }
                       if (tp.requires_grad(p[1].index())) {
                         Mat db(g.rows(), 3);
                         cross_rows(g, p[0].value(), db);
                         tp.add_grad(p[1], db);
                       }
                     });
}

namespace {
// exact normalization for healthy rows, linear (bounded value and
// gradient) below this floor so degenerate rows cannot blow up a step
constexpr double kNormalizeEps = 1e-8;
}  // namespace

Var normalize_rows(Var a) {
  Tape& t = tape_of(a);
  Eigen::VectorXd norms = a.value().rowwise().norm().cwiseMax(kNormalizeEps);
  Mat v = a.value().array().colwise() / norms.array();
  return t.make_node(v, {a}, [v, norms](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    Eigen::VectorXd raw = p[0].value().rowwise().norm();
    // (I - y y^T) g / |a| rowwise; plain g / eps in the linear region
    Eigen::VectorXd dots = v.cwiseProduct(g).rowwise().sum();
    Mat out(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (raw(i) > kNormalizeEps) {
        out.row(i) = (g.row(i) - dots(i) * v.row(i)) / norms(i);
      } else {
        out.row(i) = g.row(i) / kNormalizeEps;
      }
    }
    tp.add_grad(p[0], out);
  });
}

Var mat3_mul(Var a, Var b) {
  Tape& t = tape_of(a);
  check_same_shape(a, b, "mat3_mul");
  if (a.cols() != 9) throw std::invalid_argument("mat3_mul: need 9 columns");
  const Eigen::Index n = a.rows();
  Mat v(n, 9);
  const Mat& A = a.value();
  const Mat& B = b.value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      v.col(3 * i + j) = A.col(3 * i + 0).cwiseProduct(B.col(0 + j)) +
                         A.col(3 * i + 1).cwiseProduct(B.col(3 + j)) +
                         A.col(3 * i + 2).cwiseProduct(B.col(6 + j));
  return t.make_node(std::move(v), {a, b},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       const Mat& A = p[0].value();
                       const Mat& B = p[1].value();
                       if (tp.requires_grad(p[0].index())) {
                         Mat da(g.rows(), 9);  // dA = G * B^T per row
                         for (int i = 0; i < 3; ++i)
                           for (int k = 0; k < 3; ++k)
                             da.col(3 * i + k) = g.col(3 * i + 0).cwiseProduct(B.col(3 * k + 0)) +
                                                 g.col(3 * i + 1).cwiseProduct(B.col(3 * k + 1)) +
                                                 g.col(3 * i + 2).cwiseProduct(B.col(3 * k + 2));
                         tp.add_grad(p[0], da);
                       }
                       if (tp.requires_grad(p[1].index())) {
                         Mat db(g.rows(), 9);  // dB = A^T * G per row
                         for (int k = 0; k < 3; ++k)
                           for (int j = 0; j < 3; ++j)
                             db.col(3 * k + j) = A.col(3 * 0 + k).cwiseProduct(g.col(3 * 0 + j)) +
                                                 A.col(3 * 1 + k).cwiseProduct(g.col(3 * 1 + j)) +
                                                 A.col(3 * 2 + k).cwiseProduct(g.col(3 * 2 + j));
                         tp.add_grad(p[1], db);
                       }
                     });
}

Var mat3_vec(Var m, Var v3) {
  Tape& t = tape_of(m);
  if (m.cols() != 9 || v3.cols() != 3 || m.rows() != v3.rows())
    throw std::invalid_argument("mat3_vec: need n x 9 and n x 3");
  const Mat& M = m.value();
  const Mat& V = v3.value();
  Mat out(m.rows(), 3);
  for (int i = 0; i < 3; ++i)
    out.col(i) = M.col(3 * i + 0).cwiseProduct(V.col(0)) +
                 M.col(3 * i + 1).cwiseProduct(V.col(1)) +
                 M.col(3 * i + 2).cwiseProduct(V.col(2));
  return t.make_node(std::move(out), {m, v3},
                     [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
                       const Mat& M = p[0].value();
                       const Mat& V = p[1].value();
                       if (tp.requires_grad(p[0].index())) {
                         Mat dm(g.rows(), 9);  // outer product g v^T per row
                         for (int i = 0; i < 3; ++i)
                           for (int j = 0; j < 3; ++j)
                             dm.col(3 * i + j) = g.col(i).cwiseProduct(V.col(j));
                         tp.add_grad(p[0], dm);
                       }
                       if (tp.requires_grad(p[1].index())) {
                         Mat dv(g.rows(), 3);  // M^T g per row
                         for (int j = 0; j < 3; ++j)
                           dv.col(j) = M.col(3 * 0 + j).cwiseProduct(g.col(0)) +
                                       M.col(3 * 1 + j).cwiseProduct(g.col(1)) +
                                       M.col(3 * 2 + j).cwiseProduct(g.col(2));
                         tp.add_grad(p[1], dv);
                       }
                     });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return t.make_node(std::move(v), {a}, [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    tp.add_grad(p[0], Mat::Constant(p[0].rows(), p[0].cols(), g(0, 0)));
  });
}

Var sum_sq(Var a) {
  Tape& t = tape_of(a);
  Mat v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  return t.make_node(std::move(v), {a}, [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    tp.add_grad(p[0], 2.0 * g(0, 0) * p[0].value());
  });
}

Var l1(Var a) {
  Tape& t = tape_of(a);
  Mat v(1, 1);
  v(0, 0) = a.value().array().abs().sum();
  return t.make_node(std::move(v), {a}, [](Tape& tp, const Mat& g, const std::vector<Var>& p) {
    tp.add_grad(p[0], g(0, 0) * p[0].value().array().sign().matrix());
  });
}

}  // namespace kinflow::ad
