#pragma once

#include "pama/linalg.hpp"
#include "pama/loss.hpp"
#include "pama/theta.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pama {

enum class NoiseKind { Logistic, Laplace };
enum class SolverChoice { Pama, Palm, Both };

struct ExperimentConfig
{
  Eigen::Index n = 300;
  Eigen::Index m = 300;
  Eigen::Index r_star = 5;
  Eigen::Index rank_multiplier = 3;
  double sample_rate = 0.4;
  NoiseKind noise = NoiseKind::Logistic;
  double b = 2.0;
  std::vector<double> c_lambda = {0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
  int instances = 5;
  SolverChoice solver = SolverChoice::Both;
  ThetaSpec theta{ThetaKind::Theta1};
  double mu = 1e-8;
  int max_iter = 200;
  double eps1 = 5e-4;
  double eps2 = 1e-3;
  double eps3 = 5e-4;
  double eps4 = 1e-3;
  bool palm_smooth_only = false;
  std::uint64_t seed = 2024;
  int threads = 1;
  // Wall time is the only nondeterministic column; disabling it writes 0.
  bool record_time = true;
  std::filesystem::path output = "sweep_out";

  // Desk-scale defaults (300 x 300, r* = 5) or the 2000 x 2000, r* = 10 setting.
  static ExperimentConfig desk();
  static ExperimentConfig full_scale();

  // "key = value" lines; '#' starts a comment. Unknown keys are rejected.
  // A "preset = desk|full" line resets every field to that preset first.
  static ExperimentConfig parse(std::istream &is);
  static ExperimentConfig from_file(const std::filesystem::path &path);
  std::string to_text() const;

  void validate() const;
};

// M* = M_L M_R^T with entries of both factors uniform on [-1/2, 1/2].
Eigen::MatrixXd generate_truth(Eigen::Index n, Eigen::Index m, Eigen::Index r_star, Rng &rng);

// round(SR * n * m) uniform draws with replacement; each draw independently gets
// +1 with probability phi(M*_ij) and -1 otherwise.
ObservationSet sample_observations(const Eigen::MatrixXd &truth, double sample_rate,
                                   NoiseKind noise, double b, Rng &rng);

// ||X - M*||_F / ||M*||_F; throws std::invalid_argument when M* = 0.
double relative_error(const Eigen::MatrixXd &X, const Eigen::MatrixXd &truth);

// lambda = c * max_j ||Y_j|| with Y the observed sign matrix.
double lambda_scale(const ObservationSet &obs);

struct Problem
{
  Eigen::MatrixXd truth;
  SmoothLoss loss;
  std::uint64_t init_seed;
};

Problem make_problem(const ExperimentConfig &config, int instance);

struct RunRow
{
  std::string solver;
  double c_lambda = 0.0;
  int instance = 0;
  double re = 0.0;
  long rank = 0;
  double time_s = 0.0;
  int iters = 0;
  double objective = 0.0;
  std::string error; // empty on success
};

struct SummaryRow
{
  std::string solver;
  double c_lambda = 0.0;
  int runs = 0;
  double re = 0.0;
  double rank = 0.0;
  double time_s = 0.0;
  double iters = 0.0;
  double objective = 0.0;
};

struct SweepResult
{
  std::vector<RunRow> runs;       // sorted by (solver, c_lambda, instance)
  std::vector<SummaryRow> summary; // sorted by (solver, c_lambda)
};

SweepResult run_sweep(const ExperimentConfig &config);

void write_runs_csv(std::ostream &os, const std::vector<RunRow> &rows, bool with_time);
void write_summary_csv(std::ostream &os, const std::vector<SummaryRow> &rows, bool with_time);
void write_manifest(std::ostream &os, const ExperimentConfig &config);

// Writes runs.csv, summary.csv and manifest.txt under config.output.
void write_sweep(const ExperimentConfig &config, const SweepResult &result);

} // namespace pama
