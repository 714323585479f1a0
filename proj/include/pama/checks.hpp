#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pama {

struct SuiteResult
{
  std::string name;
  bool passed = false;
  std::vector<std::string> details; // one line per sub-check
  double seconds = 0.0;
};

// Scalar prox of every theta against a grid search over [0, s + 1]: each of
// `samples` random pairs (nu in [1e-4, 1e2] log-uniform, s in [0, 10]) must reach
// a cost no worse than the best of
// `grid` evenly spaced points plus 1e-9.
SuiteResult prox_suite(int samples, int grid, std::uint64_t seed);

// Finite differences of the logistic and Laplace losses on `instances` random
// 20 x 15 problems (tolerance 1e-5), and the quadratic upper bound with the
// loss's Lipschitz constant on as many random pairs.
SuiteResult grad_suite(int instances, std::uint64_t seed);

// PAMA with invariant checking switched on for `runs` seeded 60 x 60 problems
// cycling through theta1, theta2, theta3.
SuiteResult descent_suite(int runs, std::uint64_t seed);

// Schatten-p versus column l2,p on `matrices` random matrices for p in
// {1/2, 2/3, 1}, plus the balanced-SVD witness against `trials` random
// refactorizations on a handful of low-rank matrices.
SuiteResult norms_suite(int matrices, int trials, std::uint64_t seed);

// Named suite with its default sizes; throws std::invalid_argument on an unknown name.
SuiteResult run_suite(std::string_view name, std::uint64_t seed);

} // namespace pama
