#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hpt/autograd.hpp"
#include "hpt/hierarchy.hpp"

namespace hpt::test {

// Root -> {A, B}, A -> {A1, A2}, B -> {B1, B2}
inline std::vector<EdgeRecord> seven_node_records() {
  return {{"Root", "A"}, {"Root", "B"}, {"A", "A1"}, {"A", "A2"}, {"B", "B1"}, {"B", "B2"}};
}

inline LabelHierarchy seven_node_tree() {
  const auto r = seven_node_records();
  return LabelHierarchy::from_records(r);
}

// Random tree with `n` labels: label k hangs under Root or a uniformly chosen
// earlier label.
inline std::vector<EdgeRecord> random_tree_records(int n, std::mt19937_64& rng) {
  std::vector<EdgeRecord> r;
  for (int k = 0; k < n; ++k) {
    std::uniform_int_distribution<int> pick(-1, k - 1);
    const int p = pick(rng);
    r.push_back({p < 0 ? std::string("Root") : "n" + std::to_string(p), "n" + std::to_string(k)});
  }
  return r;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central difference of f at x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

// Richardson-extrapolated central difference, O(h^4) truncation error.
inline double richardson_difference(const std::function<double()>& f, double& x, double h = 1e-3) {
  const double coarse = central_difference(f, x, h);
  const double fine = central_difference(f, x, h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hpt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace hpt::test
