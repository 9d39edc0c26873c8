#include "hpt/autograd.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "hpt/error.hpp"

namespace hpt {

ParameterStore::ParameterStore(const ParameterStore& other) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this != &other) {
    ParameterStore copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Parameter& ParameterStore::add(std::string name, Matrix init) {
  if (find(name) != nullptr) {
    throw Error(ErrorKind::kInvalidConfig, "duplicate parameter '" + name + "'");
  }
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(init);
  p->index = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw Error(ErrorKind::kInvalidConfig, "no parameter named '" + std::string(name) + "'");
}

const Parameter& ParameterStore::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw Error(ErrorKind::kInvalidConfig, "no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

bool ParameterStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

Gradients::Gradients(const ParameterStore& store) {
  grads_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    grads_.push_back(Matrix::Zero(store[i].value.rows(), store[i].value.cols()));
  }
}

void Gradients::zero() {
  for (auto& g : grads_) g.setZero();
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) g *= factor;
}

double Gradients::norm() const {
  double sq = 0.0;
  for (const auto& g : grads_) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::has_grad() const { return tape_->has_grad(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Matrix value) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, std::vector<int> parents, Backward backward) {
  Node n;
  n.own = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(int id) const {
  const Node& n = node(id);
  return n.external != nullptr ? *n.external : n.own;
}

bool Tape::has_grad(int id) const { return node(id).grad_ready; }

const Matrix& Tape::grad(int id) const {
  static const Matrix kEmpty;
  const Node& n = node(id);
  return n.grad_ready ? n.grad : kEmpty;
}

Matrix& Tape::grad_slot(int id) {
  Node& n = node(id);
  if (!n.grad_ready) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.rows() != 1 || out.cols() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "backward() needs a 1x1 output");
  }
  grad_slot(out.id())(0, 0) += 1.0;
  for (int id = out.id(); id >= 0; --id) {
    Node& n = node(id);
    if (n.grad_ready && n.backward) n.backward(*this, id);
  }
}

void Tape::accumulate(Gradients& grads, double factor) const {
  for (const Node& n : nodes_) {
    if (n.param != nullptr && n.grad_ready) grads[n.param->index] += factor * n.grad;
  }
}

namespace ops {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "matmul inner dimensions differ");
  }
  const int ia = a.id();
  const int ib = b.id();
  return t.push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_slot(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.requires_grad(ib)) tp.grad_slot(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape();
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "matmul_nt inner dimensions differ");
  }
  const int ia = a.id();
  const int ib = b.id();
  return t.push(a.value() * b.value().transpose(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_slot(ia).noalias() += g * tp.value(ib);
    if (tp.requires_grad(ib)) tp.grad_slot(ib).noalias() += g.transpose() * tp.value(ia);
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_slot(ia) += g;
    if (tp.requires_grad(ib)) tp.grad_slot(ib) += g;
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_slot(ia) += g;
    if (tp.requires_grad(ib)) tp.grad_slot(ib) -= g;
  });
}

Var scale(Var a, double factor) {
  const int ia = a.id();
  return a.tape()->push(a.value() * factor, {ia}, [ia, factor](Tape& tp, int self) {
    tp.grad_slot(ia) += factor * tp.grad(self);
  });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "add_row expects a 1 x cols row");
  }
  const int ix = x.id();
  const int ir = row.id();
  Matrix out = x.value().rowwise() + row.value().row(0);
  return x.tape()->push(std::move(out), {ix, ir}, [ix, ir](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ix)) tp.grad_slot(ix) += g;
    if (tp.requires_grad(ir)) tp.grad_slot(ir) += g.colwise().sum();
  });
}

Var relu(Var x) {
  const int ix = x.id();
  return x.tape()->push(x.value().cwiseMax(0.0), {ix}, [ix](Tape& tp, int self) {
    const Matrix& v = tp.value(ix);
    tp.grad_slot(ix).array() += (v.array() > 0.0).cast<double>() * tp.grad(self).array();
  });
}

Var gelu(Var x) {
  // Exact erf form.
  const int ix = x.id();
  const Matrix& v = x.value();
  Matrix out = v.unaryExpr([](double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); });
  return x.tape()->push(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Matrix& v = tp.value(ix);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = v.unaryExpr([inv_sqrt_2pi](double z) {
      return 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2)) + z * inv_sqrt_2pi * std::exp(-0.5 * z * z);
    });
    tp.grad_slot(ix).array() += d.array() * tp.grad(self).array();
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& v = x.value();
  const Eigen::Index n = v.cols();
  if (gamma.cols() != n || beta.cols() != n || gamma.rows() != 1 || beta.rows() != 1) {
    throw Error(ErrorKind::kDimensionMismatch, "layer_norm gain/bias width");
  }
  // Keep normalised activations and inverse std for the backward pass.
  auto xhat = std::make_shared<Matrix>(v.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (v.row(r).array() - mu) * (*inv_std)(r);
  }
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  const int ix = x.id();
  const int ig = gamma.id();
  const int ib = beta.id();
  return x.tape()->push(std::move(out), {ix, ig, ib}, [ix, ig, ib, xhat, inv_std](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ig)) tp.grad_slot(ig) += (g.array() * xhat->array()).colwise().sum().matrix();
    if (tp.requires_grad(ib)) tp.grad_slot(ib) += g.colwise().sum();
    if (tp.requires_grad(ix)) {
      const RowVector gam = tp.value(ig).row(0);
      Matrix dxhat = g.array().rowwise() * gam.array();
      Matrix& gx = tp.grad_slot(ix);
      const double n = static_cast<double>(g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double mean_d = dxhat.row(r).mean();
        const double mean_dx = dxhat.row(r).dot(xhat->row(r)) / n;
        gx.row(r).array() += (*inv_std)(r) * (dxhat.row(r).array() - mean_d - xhat->row(r).array() * mean_dx);
      }
    }
  });
}

Var softmax_rows(Var x) {
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    out.row(r) = (v.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  const int ix = x.id();
  auto probs = std::make_shared<Matrix>(out);
  return x.tape()->push(std::move(out), {ix}, [ix, probs](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Eigen::VectorXd dots = (g.array() * probs->array()).rowwise().sum();
    tp.grad_slot(ix).array() += probs->array() * (g.array().colwise() - dots.array());
  });
}

Var gather_rows(Var table, std::span<const int> rows) {
  const Matrix& v = table.value();
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), v.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= v.rows()) {
      throw Error(ErrorKind::kIdOutOfRange, "row " + std::to_string(idx[i]) + " outside table of " +
                                                std::to_string(v.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = v.row(idx[i]);
  }
  const int it = table.id();
  return table.tape()->push(std::move(out), {it}, [it, idx = std::move(idx)](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix& gt = tp.grad_slot(it);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::kDimensionMismatch, "concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw Error(ErrorKind::kDimensionMismatch, "concat_rows width");
    offsets.push_back(rows);
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  Tape& t = *parts.front().tape();
  std::vector<int> parents = ids;
  return t.push(std::move(out), std::move(parents), [ids, offsets](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tp.requires_grad(ids[i])) continue;
      Matrix& gi = tp.grad_slot(ids[i]);
      gi += g.middleRows(offsets[i], gi.rows());
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::kDimensionMismatch, "concat_cols of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error(ErrorKind::kDimensionMismatch, "concat_cols height");
    offsets.push_back(cols);
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) out.middleCols(offsets[i], parts[i].cols()) = parts[i].value();
  Tape& t = *parts.front().tape();
  std::vector<int> parents = ids;
  return t.push(std::move(out), std::move(parents), [ids, offsets](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tp.requires_grad(ids[i])) continue;
      Matrix& gi = tp.grad_slot(ids[i]);
      gi += g.middleCols(offsets[i], gi.cols());
    }
  });
}

Var slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw Error(ErrorKind::kPositionOutOfRange, "slice_rows outside matrix");
  }
  const int ix = x.id();
  return x.tape()->push(x.value().middleRows(start, count), {ix}, [ix, start, count](Tape& tp, int self) {
    tp.grad_slot(ix).middleRows(start, count) += tp.grad(self);
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw Error(ErrorKind::kPositionOutOfRange, "slice_cols outside matrix");
  }
  const int ix = x.id();
  return x.tape()->push(x.value().middleCols(start, count), {ix}, [ix, start, count](Tape& tp, int self) {
    tp.grad_slot(ix).middleCols(start, count) += tp.grad(self);
  });
}

Var sum(Var x) {
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape()->push(std::move(out), {ix}, [ix](Tape& tp, int self) {
    tp.grad_slot(ix).array() += tp.grad(self)(0, 0);
  });
}

Var mean_of(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error(ErrorKind::kDimensionMismatch, "mean of nothing");
  std::vector<int> ids;
  double total = 0.0;
  for (const Var& s : scalars) {
    ids.push_back(s.id());
    total += s.scalar();
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  std::vector<int> parents = ids;
  return scalars.front().tape()->push(std::move(out), std::move(parents), [ids, inv](Tape& tp, int self) {
    const double g = tp.grad(self)(0, 0) * inv;
    for (int id : ids) {
      if (tp.requires_grad(id)) tp.grad_slot(id)(0, 0) += g;
    }
  });
}

Var transpose(Var x) {
  const int ix = x.id();
  return x.tape()->push(x.value().transpose(), {ix}, [ix](Tape& tp, int self) {
    tp.grad_slot(ix) += tp.grad(self).transpose();
  });
}

}  // namespace ops
}  // namespace hpt
