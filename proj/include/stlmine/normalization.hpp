#pragma once

#include <cstddef>
#include <vector>

#include "stlmine/formula.hpp"
#include "stlmine/trajectory.hpp"

namespace stlmine {

/// Per-dimension affine statistics pooled over positives and negatives.
struct DatasetStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }
};

DatasetStats compute_stats(const LabeledDataset& d);  // throws on zero variance

/// Returns the standardized dataset (each dimension pooled mean 0, std 1)
/// together with the stats needed to invert the transform.
std::pair<LabeledDataset, DatasetStats> normalize(const LabeledDataset& d);

LabeledDataset denormalize(const LabeledDataset& d, const DatasetStats& s);
Trajectory normalize_trajectory(const Trajectory& t, const DatasetStats& s);

/// Maps every atom threshold c on variable i to c*std_i + mean_i.
Formula denormalize_thresholds(const Formula& f, const DatasetStats& s);

/// Rewrites every interval [a, b] (expressed over the 100-point sampling
/// domain) to [floor(a*r), floor(a*r) + ceil((b-a)*r)] with r = n_test/100.
/// An infinite upper bound is treated as 100 and maps back to infinity when
/// the rescaled bound reaches the end of the trace.
Formula rescale_time_bounds(const Formula& f, std::size_t n_test);

}  // namespace stlmine
