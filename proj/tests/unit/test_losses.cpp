#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "hpt/error.hpp"
#include "hpt/losses.hpp"
#include "support.hpp"

using namespace hpt;

namespace {

// Four-term interior of the factorised loss, evaluated in long double.
long double four_term(const std::vector<double>& s, const std::vector<int>& pos) {
  std::set<int> p(pos.begin(), pos.end());
  long double acc = 1.0L;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (p.count(static_cast<int>(i))) acc += std::exp(-static_cast<long double>(s[i]));
    else acc += std::exp(static_cast<long double>(s[i]));
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (p.count(static_cast<int>(i))) continue;
    for (int j : p) acc += std::exp(static_cast<long double>(s[i]) - s[static_cast<std::size_t>(j)]);
  }
  return std::log(acc);
}

long double direct_bce(const std::vector<double>& s, const std::vector<int>& pos) {
  std::set<int> p(pos.begin(), pos.end());
  long double total = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const long double sig = 1.0L / (1.0L + std::exp(-static_cast<long double>(s[i])));
    total -= p.count(static_cast<int>(i)) ? std::log(sig) : std::log(1.0L - sig);
  }
  return total;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> positives;
};

Instance random_instance(std::mt19937_64& rng, int max_labels = 20, bool proper = false) {
  std::uniform_int_distribution<int> size(proper ? 2 : 0, max_labels);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  Instance in;
  in.scores.resize(static_cast<std::size_t>(size(rng)));
  for (auto& s : in.scores) s = u(rng);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t i = 0; i < in.scores.size(); ++i) {
    if (coin(rng)) in.positives.push_back(static_cast<int>(i));
  }
  if (proper) {
    if (in.positives.empty()) in.positives.push_back(0);
    if (in.positives.size() == in.scores.size()) in.positives.pop_back();
  }
  return in;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("zmlce worked examples") {
  CHECK(zmlce({}, {}) == 0.0);
  const std::vector<double> zero{0.0};
  const std::vector<int> first{0};
  CHECK(zmlce(zero, first) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> s{2.0, 1.0};
  CHECK(std::abs(zmlce(s, first) - 1.44018969856119533049) < 1e-14);
  CHECK(std::abs(zmlce(s, first) - static_cast<double>(four_term(s, {0}))) < 1e-14);
}

TEST_CASE("zmlce equals the four-term single-log form") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const auto in = random_instance(rng);
    CHECK(std::abs(zmlce(in.scores, in.positives) - static_cast<double>(four_term(in.scores, in.positives))) < 1e-9);
  }
}

TEST_CASE("zmlce is overflow safe") {
  const std::vector<double> s{800.0, -800.0};
  const std::vector<int> pos{1};
  const double v = zmlce(s, pos);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1600.0));
  const std::vector<double> good{-800.0, 800.0};
  const std::vector<int> p2{1};
  CHECK(zmlce(good, p2) == 0.0);
}

TEST_CASE("zmlce rejects non-finite scores") {
  const std::vector<double> s{std::nan(""), 1.0};
  const std::vector<int> pos{0};
  try {
    zmlce(s, pos);
    FAIL("expected NonFiniteScore");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonFiniteScore);
  }
  CHECK_THROWS_AS(bce_loss(s, pos), Error);
}

TEST_CASE("zmlce gradient signs and finite differences") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    auto in = random_instance(rng, 12);
    const auto g = zmlce_gradient(in.scores, in.positives);
    std::set<int> p(in.positives.begin(), in.positives.end());
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
      if (p.count(static_cast<int>(i))) CHECK(g[i] < 0.0);
      else CHECK(g[i] > 0.0);
      const double fd = hpt::test::richardson_difference([&] { return zmlce(in.scores, in.positives); }, in.scores[i]);
      if (std::abs(g[i]) > 1e-7) CHECK(hpt::test::relative_error(g[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("zmlce vanishes as scores separate around zero") {
  const std::vector<double> s{30.0, -30.0, -30.0};
  const std::vector<int> pos{0};
  CHECK(zmlce(s, pos) < 3.0 * std::exp(-30.0) + 1e-15);
  CHECK(zmlce(s, pos) < 1e-9);
}

TEST_CASE("zmlce is not translation invariant") {
  std::mt19937_64 rng(3);
  const auto in = random_instance(rng, 10, true);
  auto shifted = in.scores;
  for (auto& s : shifted) s += 1.5;
  CHECK(std::abs(zmlce(in.scores, in.positives) - zmlce(shifted, in.positives)) > 1e-6);
}

TEST_CASE("bce examples and oracle") {
  const std::vector<double> zero{0.0};
  const std::vector<int> pos{0};
  CHECK(bce_loss(zero, pos) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(zero, {}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    auto in = random_instance(rng, 5);
    CHECK(std::abs(bce_loss(in.scores, in.positives) - static_cast<double>(direct_bce(in.scores, in.positives))) < 1e-9);
    const auto g = bce_gradient(in.scores, in.positives);
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
      const double fd = hpt::test::central_difference([&] { return bce_loss(in.scores, in.positives); }, in.scores[i]);
      CHECK(hpt::test::relative_error(g[i], fd) < 1e-4);
    }
  }
  const std::vector<double> big{-900.0};
  CHECK(bce_loss(big, pos) == doctest::Approx(900.0));
}

TEST_CASE("mlce reference") {
  const std::vector<double> s{1.5, -0.5};
  const std::vector<int> p{0};
  CHECK(mlce_reference(s, p) == doctest::Approx(std::log1p(std::exp(-0.5 - 1.5))).epsilon(1e-14));
  const std::vector<double> equal(5, 0.7);
  const std::vector<int> p2{0, 3};
  CHECK(mlce_reference(equal, p2) == doctest::Approx(std::log(1.0 + 2.0 * 3.0)).epsilon(1e-14));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto in = random_instance(rng, 8, true);
    std::set<int> pset(in.positives.begin(), in.positives.end());
    long double acc = 1.0L;
    for (std::size_t i = 0; i < in.scores.size(); ++i) {
      if (pset.count(static_cast<int>(i))) continue;
      for (int j : pset) acc += std::exp(static_cast<long double>(in.scores[i]) - in.scores[static_cast<std::size_t>(j)]);
    }
    CHECK(std::abs(mlce_reference(in.scores, in.positives) - static_cast<double>(std::log(acc))) < 1e-9);
  }
  const std::vector<int> all{0, 1};
  try {
    mlce_reference(s, all);
    FAIL("expected EmptyPartition");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyPartition);
  }
  CHECK_THROWS_AS(mlce_reference(s, {}), Error);
}

TEST_CASE("softmax cross entropy") {
  const std::vector<double> s{1.0, 2.0, 3.0};
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(softmax_cross_entropy(s, 0) == doctest::Approx(std::log(z) - 1.0).epsilon(1e-14));
  CHECK(log1p_sum_exp({}) == 0.0);
}

TEST_CASE("layerwise total") {
  LayerScoreSet empty;
  empty.scores.resize(2);
  empty.positives.resize(2);
  CHECK(layerwise_total(empty, 0.0, 2) == 0.0);

  LayerScoreSet two;
  two.scores = {{0.3, -1.0}, {2.0, 1.0, -4.0}};
  two.positives = {{0}, {1, 2}};
  const double a = zmlce(two.scores[0], two.positives[0]);
  const double b = zmlce(two.scores[1], two.positives[1]);
  CHECK(layerwise_total(two, 0.25, 2) == doctest::Approx(a + b + 0.25).epsilon(1e-15));

  try {
    layerwise_total(two, 0.0, 3);
    FAIL("expected LayerMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kLayerMismatch);
  }
  LayerScoreSet ragged;
  ragged.scores = {{1.0}};
  CHECK_THROWS_AS(layerwise_total(ragged, 0.0, 1), Error);
}

TEST_CASE("layerwise total matches recomputation from raw scores") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const int layers = 1 + t % 4;
    LayerScoreSet set;
    long double oracle = 0.0L;
    for (int m = 0; m < layers; ++m) {
      const auto in = random_instance(rng, 9);
      set.scores.push_back(in.scores);
      set.positives.push_back(in.positives);
      oracle += four_term(in.scores, in.positives);
    }
    const double mlm = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    oracle += mlm;
    CHECK(std::abs(layerwise_total(set, mlm, layers) - static_cast<double>(oracle)) < 1e-9);
  }
}

TEST_CASE("tape ops agree with the scalar losses") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    auto in = random_instance(rng, 10, true);
    Tape tape;
    Matrix row(1, static_cast<Eigen::Index>(in.scores.size()));
    for (std::size_t i = 0; i < in.scores.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = in.scores[i];
    const Var s = tape.input(row);
    const Var z = ops::zmlce(s, in.positives);
    CHECK(z.scalar() == doctest::Approx(zmlce(in.scores, in.positives)).epsilon(1e-15));
    tape.backward(z);
    const auto g = zmlce_gradient(in.scores, in.positives);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(s.grad()(0, static_cast<Eigen::Index>(i)) == doctest::Approx(g[i]));

    Tape tape2;
    const Var s2 = tape2.input(row);
    const Var b = ops::bce(s2, in.positives);
    CHECK(b.scalar() == doctest::Approx(bce_loss(in.scores, in.positives)).epsilon(1e-15));
  }
}

TEST_CASE("softmax cross entropy op averages rows and matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 2.0);
  Matrix logits(3, 6);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  const std::vector<int> targets{2, 0, 5};
  auto value = [&] {
    double total = 0.0;
    for (int r = 0; r < 3; ++r) {
      std::vector<double> row;
      for (int c = 0; c < 6; ++c) row.push_back(logits(r, c));
      total += softmax_cross_entropy(row, targets[static_cast<std::size_t>(r)]);
    }
    return total / 3.0;
  };
  Tape tape;
  const Var x = tape.input(logits);
  const Var l = ops::softmax_cross_entropy(x, targets);
  CHECK(l.scalar() == doctest::Approx(value()).epsilon(1e-14));
  tape.backward(l);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double fd = hpt::test::central_difference(value, logits.data()[i]);
    CHECK(hpt::test::relative_error(x.grad().data()[i], fd) < 1e-4);
  }
  const std::vector<int> bad{9, 0, 0};
  Tape t2;
  CHECK_THROWS_AS(ops::softmax_cross_entropy(t2.input(logits), bad), Error);
}

TEST_CASE("masking: empty text, determinism and counts") {
  const std::vector<int> empty;
  CHECK(mlm_masking(empty, 0.15, 1, 4, 5, 50).plan.empty());

  std::vector<int> ids(37);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = 5 + static_cast<int>(i % 20);
  const auto a = mlm_masking(ids, 0.15, 42, 4, 5, 50);
  const auto b = mlm_masking(ids, 0.15, 42, 4, 5, 50);
  CHECK(a.plan.positions == b.plan.positions);
  CHECK(a.corrupted == b.corrupted);
  CHECK(a.plan.positions.size() == static_cast<std::size_t>(std::ceil(0.15 * 37)));
  std::set<int> unique(a.plan.positions.begin(), a.plan.positions.end());
  CHECK(unique.size() == a.plan.positions.size());
  for (std::size_t k = 0; k < a.plan.positions.size(); ++k) {
    const int p = a.plan.positions[k];
    CHECK(p >= 0);
    CHECK(p < 37);
    CHECK(a.plan.original_ids[k] == ids[static_cast<std::size_t>(p)]);
    if (a.plan.replacement[k] == MaskReplacement::kMask) CHECK(a.corrupted[static_cast<std::size_t>(p)] == 4);
    if (a.plan.replacement[k] == MaskReplacement::kKeep) CHECK(a.corrupted[static_cast<std::size_t>(p)] == ids[static_cast<std::size_t>(p)]);
    if (a.plan.replacement[k] == MaskReplacement::kRandom) {
      CHECK(a.corrupted[static_cast<std::size_t>(p)] >= 5);
      CHECK(a.corrupted[static_cast<std::size_t>(p)] < 50);
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!unique.count(static_cast<int>(i))) CHECK(a.corrupted[i] == ids[i]);
  }
  CHECK(a.plan.sequence_positions(1).front() == a.plan.positions.front() + 1);
  CHECK(mlm_masking(ids, 0.0, 1, 4, 5, 50).plan.empty());
  CHECK(mlm_masking(ids, 1.0, 1, 4, 5, 50).plan.positions.size() == ids.size());
}

TEST_CASE("masking frequencies over many draws") {
  std::vector<int> ids(100, 7);
  double count = 0.0;
  long mask = 0, random = 0, keep = 0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const auto r = mlm_masking(ids, 0.15, static_cast<std::uint64_t>(s), 4, 5, 50);
    count += static_cast<double>(r.plan.positions.size());
    for (auto rep : r.plan.replacement) {
      mask += rep == MaskReplacement::kMask;
      random += rep == MaskReplacement::kRandom;
      keep += rep == MaskReplacement::kKeep;
    }
  }
  CHECK(std::abs(count / draws - 15.0) <= 0.5);
  const double total = static_cast<double>(mask + random + keep);
  CHECK(std::abs(mask / total - 0.8) < 0.01);
  CHECK(std::abs(random / total - 0.1) < 0.01);
  CHECK(std::abs(keep / total - 0.1) < 0.01);
}

TEST_CASE("all-mask policy") {
  std::vector<int> ids(40, 9);
  const auto r = mlm_masking(ids, 0.5, 3, 4, 5, 50, MaskPolicy{1.0, 0.0});
  for (auto rep : r.plan.replacement) CHECK(rep == MaskReplacement::kMask);
}

}  // TEST_SUITE
