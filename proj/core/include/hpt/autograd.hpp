#pragma once

// Tape-based reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass. Parameters live outside
// the tape in a ParameterStore; a tape only references them, and backward()
// leaves their gradients on the tape until accumulate() adds them into a
// Gradients buffer. One tape per forward pass, discarded afterwards.

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hpt {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  std::size_t index = 0;
};

/// Owns every trainable tensor of a model, in a stable registration order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const;
  bool all_finite() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Gradient buffer aligned with a ParameterStore's indices.
class Gradients {
 public:
  explicit Gradients(const ParameterStore& store);

  Matrix& operator[](std::size_t i) { return grads_[i]; }
  const Matrix& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const noexcept { return grads_.size(); }

  void zero();
  void scale(double factor);
  double norm() const;
  void add(const Gradients& other);

 private:
  std::vector<Matrix> grads_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  bool has_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable input.
  Var constant(Matrix value);
  /// Differentiable input not owned by a ParameterStore (e.g. a probe embedding).
  Var input(Matrix value);
  /// Differentiable reference to a stored parameter; the value is not copied.
  Var param(const Parameter& p);

  Var push(Matrix value, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const;
  const Matrix& grad(int id) const;
  bool has_grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Gradient slot of a node, zero-initialised on first access.
  Matrix& grad_slot(int id);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and runs the tape in reverse.
  void backward(Var out);
  /// Adds parameter gradients into `grads` (multiplied by `factor`).
  void accumulate(Gradients& grads, double factor = 1.0) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* external = nullptr;
    Matrix grad;
    bool grad_ready = false;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    Backward backward;
  };
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  std::deque<Node> nodes_;
};

namespace ops {

Var matmul(Var a, Var b);            // a * b
Var matmul_nt(Var a, Var b);         // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var add_row(Var x, Var row);         // broadcast a 1 x n row over every row of x
Var relu(Var x);
Var gelu(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12);
Var softmax_rows(Var x);
Var gather_rows(Var table, std::span<const int> rows);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
Var sum(Var x);
Var mean_of(std::span<const Var> scalars);
Var transpose(Var x);

}  // namespace ops

}  // namespace hpt
