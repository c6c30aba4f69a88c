#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stlmine/formula.hpp"
#include "stlmine/trajectory.hpp"

namespace stlmine {

/// Quantitative and boolean semantics over sampled trajectories.
///
/// An Evaluator owns reusable scratch buffers, so reusing one instance
/// across many evaluations avoids per-call allocation. Instances are not
/// thread safe; use one per thread.
///
/// Temporal windows are mapped to sample indices by dividing the bounds by
/// the trajectory's dt (lower bound rounded up, upper bound rounded down)
/// and clipping at the end of the trace. A window that contains no sample
/// for some required evaluation time raises std::runtime_error.
class Evaluator {
 public:
  double robustness(const Formula& f, const Trajectory& traj, std::size_t t = 0);
  bool satisfies(const Formula& f, const Trajectory& traj, std::size_t t = 0);

  /// rho(f, traj, 0) for each trajectory.
  void robustness_batch(const Formula& f, std::span<const Trajectory> trajs,
                        std::span<double> out);

 private:
  const double* eval_rho(const Formula::Node* n, long lo, long hi, std::size_t depth);
  const char* eval_sat(const Formula::Node* n, long lo, long hi, std::size_t depth);

  const Trajectory* traj_ = nullptr;
  std::vector<std::vector<double>> rho_bufs_;
  std::vector<std::vector<char>> sat_bufs_;
  std::vector<long> deque_;   // scratch for sliding min/max
  std::vector<long> prefix_;  // scratch for boolean window counts
};

double robustness(const Formula& f, const Trajectory& traj, std::size_t t = 0);
bool satisfies(const Formula& f, const Trajectory& traj, std::size_t t = 0);

}  // namespace stlmine
