#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stlmine/embedding.hpp"
#include "stlmine/evaluate.hpp"
#include "stlmine/formula.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/trajectory.hpp"
#include "stlmine/vectordb.hpp"

namespace stlmine {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t zero_pos = 0;  // positives with rho == 0
  std::size_t zero_neg = 0;  // negatives with rho == 0
};

struct ClassificationReport {
  double mcr = 0.0;
  std::optional<double> precision;  // absent when tp + fp == 0
  std::optional<double> recall;     // absent when tp + fn == 0
  ConfusionCounts counts;
};

/// Robustness-sign classification of a labeled dataset. A trajectory counts
/// as misclassified when rho <= 0 on a positive or rho >= 0 on a negative;
/// rho == 0 is excluded from the precision/recall counts.
ClassificationReport classify_metrics(const Formula& f, const LabeledDataset& data);

/// One-line canonical form: "mcr=... precision=... recall=... tp=... ..."
/// with "none" for undefined ratios; doubles in shortest round-trip form.
std::string summary_line(const ClassificationReport& r);

/// A hit is relevant to a query when their boolean verdicts agree on at
/// least a fraction omega (inclusive) of the probe trajectories.
bool relevant(const Formula& query, const Formula& hit, std::span<const Trajectory> trajs,
              double omega, Evaluator& ev);

/// AP@K over a binary relevance list (0 when nothing in the top K is
/// relevant). Throws when K == 0 or K exceeds the list length.
double ap_at_k(std::span<const char> rels, std::size_t k);

/// NDCG@K with binary gains; 1 when all gains are zero.
double ndcg_at_k(std::span<const double> gains, std::size_t k);

/// Linear-interpolated quantile of an unsorted sample (p in [0, 1]).
double quantile(std::vector<double> values, double p);

struct RetrievalEvalConfig {
  std::size_t n_queries = 200;
  FDistParams fdist;  // query sampler
  std::size_t max_query_nodes = 4;
  std::size_t k = 5;
  double omega = 0.9;
  std::size_t n_traj = 2000;  // probe trajectories for relevance
  Mu0Params mu0;
  std::uint32_t shard_level = 4;  // query shards at this max_nodes level
  std::uint64_t seed = 99;

  void validate() const;
};

struct RetrievalQueryRow {
  std::size_t index = 0;
  std::string query;
  std::size_t node_count = 0;
  std::size_t retrieved = 0;
  double ap = 0.0;
  double ndcg = 0.0;
  double top_kernel = 0.0;  // kernel between the query and the rank-1 hit
};

struct RetrievalReport {
  std::size_t k = 5;
  std::vector<RetrievalQueryRow> rows;

  double median_ap() const;
  double median_ndcg() const;
  double median_top_kernel() const;
  std::string to_csv() const;
  /// Quantile table (q25 / median / q75 / p99) per query-size bucket.
  std::string summary() const;
};

/// Samples queries from the formula distribution, retrieves top-k hits from
/// the database, and scores AP@k / NDCG@k under trajectory-agreement
/// relevance plus the kernel similarity of the best hit.
RetrievalReport retrieval_effectiveness(const SemanticDb& db, const ReferenceSet& ref,
                                        const RetrievalEvalConfig& cfg);

}  // namespace stlmine
