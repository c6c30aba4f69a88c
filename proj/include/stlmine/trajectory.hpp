#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stlmine {

/// Uniformly sampled multivariate signal. Values are stored channel-major,
/// so channel(d) is a contiguous span of n_points samples.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t dim, std::size_t n_points, double dt = 1.0);

  double value(std::size_t d, std::size_t t) const { return values_[d * n_points_ + t]; }
  double& value(std::size_t d, std::size_t t) { return values_[d * n_points_ + t]; }

  std::span<const double> channel(std::size_t d) const {
    return {values_.data() + d * n_points_, n_points_};
  }
  std::span<double> channel(std::size_t d) {
    return {values_.data() + d * n_points_, n_points_};
  }

  std::size_t dim() const { return dim_; }
  std::size_t n_points() const { return n_points_; }
  double dt() const { return dt_; }

 private:
  std::size_t dim_ = 0;
  std::size_t n_points_ = 0;
  double dt_ = 1.0;
  std::vector<double> values_;
};

struct LabeledDataset {
  std::vector<Trajectory> positives;
  std::vector<Trajectory> negatives;

  std::size_t size() const { return positives.size() + negatives.size(); }
  std::size_t dim() const;        // common dimension, 0 when empty
  std::size_t n_points() const;   // common length, 0 when empty
};

struct FoldSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Seeded stratified k-fold: each class is shuffled independently and dealt
/// round-robin across folds, so class ratios are preserved within one
/// trajectory. Throws if k < 2 or either class has fewer than k members.
std::vector<FoldSplit> stratified_kfold(const LabeledDataset& d, std::size_t k,
                                        std::uint64_t seed);

/// Seeded stratified holdout; train_fraction in (0, 1) applies per class,
/// rounded to the nearest count and clamped so both sides stay non-empty.
/// Throws if either class has fewer than two members.
FoldSplit stratified_holdout(const LabeledDataset& d, double train_fraction,
                             std::uint64_t seed);

/// CSV layout: header "traj_id,label,t,x0[,x1,...]" followed by one row per
/// sample. label is 1 (positive) or 0 (negative) and constant per traj_id;
/// t starts at 0 and increases by dt within each trajectory.
void write_dataset_csv(const LabeledDataset& data, const std::string& path);

/// Throws std::runtime_error on malformed files: bad header, ragged rows,
/// inconsistent labels, non-uniform time steps, or trajectories of unequal
/// length or dimension.
LabeledDataset read_dataset_csv(const std::string& path);

}  // namespace stlmine
