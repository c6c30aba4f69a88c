#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stlmine/evaluate.hpp"
#include "stlmine/formula.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/trajectory.hpp"

namespace stlmine {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fixed anchor formulae and Monte-Carlo trajectories against which all
/// embeddings are computed. Trajectory values and robustness entries are
/// rounded to float32 at build time, so persistence is lossless and
/// embeddings computed before and after a save/load round trip are
/// bit-identical.
struct ReferenceSet {
  std::vector<Formula> anchors;
  std::vector<Trajectory> mc_trajectories;
  RowMajorXd anchor_rho;            // n_train x n_mc
  Eigen::VectorXd anchor_selfnorm;  // sqrt(mean_j rho^2)
  std::uint64_t seed = 0;

  std::size_t n_train() const { return anchors.size(); }
  std::size_t n_mc() const { return mc_trajectories.size(); }
};

/// Anchors whose robustness is identically ~0 on the MC set (self-norm
/// < 1e-9) are resampled so every embedding component is well defined.
ReferenceSet build_reference_set(std::size_t n_train, std::size_t n_mc,
                                 const FDistParams& fparams, const Mu0Params& mu0,
                                 std::uint64_t seed);

void save_reference_set(const ReferenceSet& R, const std::string& path);
ReferenceSet load_reference_set(const std::string& path);

/// Mean of the elementwise product, accumulated in one fixed left-to-right
/// scalar loop. Every kernel sum (kernel, gram, embed, database build) runs
/// through this function so all code paths produce bit-identical values.
double mean_dot(const double* a, const double* b, std::size_t n);

/// rho(f, xi_j, 0) for every MC trajectory, rounded to float32 precision.
/// Throws if any value is non-finite. With arctan=true the values pass
/// through atan() first (off by default; the kernel uses raw robustness).
Eigen::VectorXd rho_vector(const Formula& f, const ReferenceSet& R, Evaluator& ev,
                           bool arctan = false);

/// Normalized STL kernel: mean_j rho_f rho_g / sqrt(self_f * self_g).
double kernel(const Formula& f, const Formula& g, const ReferenceSet& R, bool arctan = false);

/// Pairwise normalized kernel matrix (set normalized=false for raw k-hat).
Eigen::MatrixXd kernel_gram(std::span<const Formula> fs, const ReferenceSet& R,
                            bool normalized = true, bool arctan = false);

/// Embedding components: normalized kernel of f against each anchor.
Eigen::VectorXd embed(const Formula& f, const ReferenceSet& R, bool arctan = false);

/// Same, for a precomputed rho vector (raw, not arctan-transformed).
Eigen::VectorXd embed_rho(const Eigen::VectorXd& rho, const ReferenceSet& R);

}  // namespace stlmine
