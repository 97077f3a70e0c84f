#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace kinflow::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle into a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int index() const { return index_; }

  const Mat& value() const;
  const Mat& grad() const;  // zero-sized until backward() touched it
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
};

// Reverse-mode tape over dense double matrices. Convention throughout the
// project: rows index the batch, columns index the feature dimension.
// Nodes are appended in evaluation order, so creation order is a valid
// topological order and backward() is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable leaf backed by external storage (must outlive the tape).
  Var param(const Mat* storage);
  // Differentiable leaf holding a copy.
  Var input(Mat value);
  // Non-differentiable leaf.
  Var constant(Mat value);
  Var constant_ref(const Mat* storage);
  Var scalar(double value);

  // Detached copy of an existing node's value (stop-gradient).
  Var detach(Var v) { return constant(v.value()); }

  // Generic op node. `backprop` receives the node's accumulated gradient
  // and must add the parents' contributions via add_grad().
  Var make_node(Mat value, std::vector<Var> parents,
                std::function<void(Tape&, const Mat& grad, const std::vector<Var>& parents)> backprop);

  // Runs reverse accumulation from a 1x1 node.
  void backward(Var loss);

  const Mat& value_of(int index) const;
  const Mat& grad_of(int index) const;
  bool requires_grad(int index) const;
  void add_grad(Var v, const Mat& g);

  // Gradient of a param() leaf identified by its external storage; zeros
  // when backward never reached it.
  Mat grad_by_storage(const Mat* storage) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear();

 private:
  struct Node {
    Mat storage;                        // owned value (unused for *_ref leaves)
    const Mat* external = nullptr;      // external value storage, if any
    Mat grad;
    bool requires_grad = false;
    bool touched = false;  // gradient reached this node during backward
    std::function<void(Tape&, const Mat&, const std::vector<Var>&)> backprop;
    std::vector<Var> parents;
  };

  Var append(Node n);
  std::vector<Node> nodes_;
  std::vector<std::pair<const Mat*, int>> param_index_;
};

// ---- primitive ops ----

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);              // elementwise
Var scale(Var a, double c);
Var add_rowvec(Var a, Var row);      // row: 1 x cols, broadcast over rows
Var vexp(Var a);
Var vtanh(Var a);
Var relu(Var a);
Var soft_clamp(Var a, double limit); // limit * tanh(a / limit)
Var slice_cols(Var a, int start, int n);
Var hcat(const std::vector<Var>& parts);
Var permute_cols(Var a, const std::vector<int>& perm);  // out[:,j] = in[:,perm[j]]
Var rowwise_dot(Var a, Var b);       // n x m, n x m -> n x 1
Var mul_colvec(Var a, Var col);      // scale row i by col(i)
Var cross3(Var a, Var b);            // n x 3 rowwise cross product
Var normalize_rows(Var a);           // rowwise a / |a|
Var mat3_mul(Var a, Var b);          // n x 9 row-major 3x3 per row
Var mat3_vec(Var m, Var v);          // n x 9, n x 3 -> n x 3
Var sum(Var a);                      // -> 1 x 1
Var sum_sq(Var a);                   // sum of squares -> 1 x 1
Var l1(Var a);                       // sum |a|, subgradient 0 at kinks

}  // namespace kinflow::ad
