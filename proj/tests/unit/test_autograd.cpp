#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "hpt/autograd.hpp"
#include "hpt/error.hpp"
#include "support.hpp"

using namespace hpt;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

using Op = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d/dx of sum(op(inputs) .* probe) against central differences for
// every coordinate of every input.
void check_op(const Op& op, std::vector<Matrix> inputs, std::mt19937_64& rng) {
  Matrix probe;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.input(m));
    const Var out = op(tape, vars);
    probe = random_matrix(out.rows(), out.cols(), rng);
  }
  auto value = [&] {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.input(m));
    return (op(tape, vars).value().array() * probe.array()).sum();
  };
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.input(m));
  const Var out = op(tape, vars);
  // sum(out .* probe) as a sum of column dot products.
  const Var p = tape.constant(probe);
  Var acc;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const Var term = ops::matmul(ops::transpose(ops::slice_cols(out, c, 1)), ops::slice_cols(p, c, 1));
    acc = acc.valid() ? ops::add(acc, term) : term;
  }
  tape.backward(acc);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double fd = hpt::test::central_difference(value, inputs[k].data()[i]);
      const double an = vars[k].has_grad() ? vars[k].grad().data()[i] : 0.0;
      INFO("input " << k << " coordinate " << i);
      CHECK(hpt::test::relative_error(an, fd) < 1e-4);
    }
  }
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("every op matches finite differences") {
  std::mt19937_64 rng(1);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::matmul(v[0], v[1]); },
           {random_matrix(3, 4, rng), random_matrix(4, 2, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::matmul_nt(v[0], v[1]); },
           {random_matrix(3, 4, rng), random_matrix(5, 4, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::add(v[0], v[1]); },
           {random_matrix(2, 3, rng), random_matrix(2, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::sub(v[0], v[1]); },
           {random_matrix(2, 3, rng), random_matrix(2, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::scale(v[0], -1.7); }, {random_matrix(2, 2, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::add_row(v[0], v[1]); },
           {random_matrix(4, 3, rng), random_matrix(1, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::relu(v[0]); }, {random_matrix(3, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::gelu(v[0]); }, {random_matrix(3, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::layer_norm(v[0], v[1], v[2]); },
           {random_matrix(3, 5, rng), random_matrix(1, 5, rng), random_matrix(1, 5, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::softmax_rows(v[0]); }, {random_matrix(3, 4, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) {
    const std::vector<int> rows{2, 0, 2, 1};
    return ops::gather_rows(v[0], rows);
  }, {random_matrix(3, 2, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) {
    const std::vector<Var> parts{v[0], v[1]};
    return ops::concat_rows(parts);
  }, {random_matrix(2, 3, rng), random_matrix(1, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) {
    const std::vector<Var> parts{v[0], v[1]};
    return ops::concat_cols(parts);
  }, {random_matrix(2, 3, rng), random_matrix(2, 1, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::slice_rows(v[0], 1, 2); }, {random_matrix(4, 2, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::slice_cols(v[0], 1, 2); }, {random_matrix(2, 4, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::sum(v[0]); }, {random_matrix(3, 2, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) {
    const std::vector<Var> s{ops::sum(v[0]), ops::sum(v[1])};
    return ops::mean_of(s);
  }, {random_matrix(2, 2, rng), random_matrix(1, 3, rng)}, rng);
  check_op([](Tape&, const std::vector<Var>& v) { return ops::transpose(v[0]); }, {random_matrix(2, 3, rng)}, rng);
}

TEST_CASE("reused nodes accumulate") {
  Tape tape;
  Matrix x(1, 1);
  x(0, 0) = 3.0;
  const Var a = tape.input(x);
  const Var y = ops::matmul(a, a);  // x^2
  const Var z = ops::add(y, a);     // x^2 + x
  tape.backward(z);
  CHECK(a.grad()(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("parameters accumulate into gradients and constants stay inert") {
  ParameterStore store;
  Matrix w(2, 1);
  w << 1.0, -2.0;
  store.add("w", w);
  Gradients grads(store);
  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    Matrix xv(1, 2);
    xv << 3.0, 4.0;
    const Var x = tape.constant(xv);
    const Var out = ops::matmul(x, tape.param(store.at("w")));
    tape.backward(out);
    CHECK_FALSE(x.has_grad());
    tape.accumulate(grads, 0.5);
  }
  CHECK(grads[0](0, 0) == doctest::Approx(3.0));
  CHECK(grads[0](1, 0) == doctest::Approx(4.0));
  CHECK(grads.norm() == doctest::Approx(5.0));
  grads.scale(2.0);
  CHECK(grads[0](1, 0) == doctest::Approx(8.0));
  grads.zero();
  CHECK(grads.norm() == 0.0);
}

TEST_CASE("parameter store copies are deep") {
  ParameterStore a;
  a.add("x", Matrix::Ones(2, 2));
  ParameterStore b = a;
  b.at("x").value(0, 0) = 5.0;
  CHECK(a.at("x").value(0, 0) == 1.0);
  CHECK(a.scalar_count() == 4);
  CHECK(a.all_finite());
  a.at("x").value(1, 1) = std::nan("");
  CHECK_FALSE(a.all_finite());
  CHECK(a.find("y") == nullptr);
  CHECK_THROWS_AS(a.at("y"), Error);
}

TEST_CASE("index errors") {
  Tape tape;
  const Var t = tape.input(Matrix::Zero(3, 2));
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(ops::gather_rows(t, bad), Error);
  CHECK_THROWS_AS(ops::slice_rows(t, 2, 2), Error);
  CHECK_THROWS_AS(ops::slice_cols(t, -1, 1), Error);
}

}  // TEST_SUITE
