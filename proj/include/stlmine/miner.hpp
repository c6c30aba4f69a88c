#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stlmine/evaluate.hpp"
#include "stlmine/gp.hpp"
#include "stlmine/metrics.hpp"
#include "stlmine/normalization.hpp"
#include "stlmine/trajectory.hpp"
#include "stlmine/vectordb.hpp"

namespace stlmine {

/// Discriminative objective: (mean_p - mean_n) / (std_p + std_n + 1e-9)
/// over the robustness values of the two classes (population stds).
double objective_g(const Formula& f, const LabeledDataset& data, Evaluator& ev);

/// Exploration weight at iteration t (1-based): min(2 log(t^2 pi^2 / 0.6), cap).
double beta_schedule(std::size_t t, double cap = 16.0);

struct BoConfig {
  std::size_t maxiter = 50;
  double epsilon = 1e-3;
  std::size_t patience = 5;
  std::size_t burn_in = 10;
  std::size_t initial_batch = 10;
  /// Candidates evaluated per iteration (trace grows by at most q each
  /// round). Values above 1 trade GP refits for broader coverage within
  /// the same plateau budget.
  std::size_t q = 4;
  std::size_t retrieval_depth = 10;
  std::size_t candidate_pool = 4096;
  double beta_cap = 16.0;
  double beta_const = -1.0;  // fixed beta when >= 0, otherwise the schedule

  enum class Acquisition { CandidateSet, Gradient };
  Acquisition acquisition = Acquisition::CandidateSet;
  std::size_t grad_starts = 4;
  std::size_t grad_steps = 50;
  double grad_lr = 0.1;

  std::uint32_t shard_level = 4;  // mine over shards with this max_nodes
  GpConfig gp;

  void validate() const;
};

struct AcquireOptions {
  std::size_t q = 1;          // number of candidates returned
  std::size_t pool = 4096;    // size of the seeded row subsample
  std::uint64_t seed = 0;
  /// Rows always included in the pool (e.g. neighbors of evaluated points).
  std::vector<std::pair<std::size_t, std::size_t>> include_rows;
  /// Formula texts to skip (already evaluated or known unevaluable).
  const std::unordered_set<std::string>* exclude = nullptr;
};

struct AcquireResult {
  std::size_t shard = 0;
  std::size_t row = 0;
  std::string text;
  double ucb = 0.0;
};

/// Top-q unexcluded stored rows by UCB over a seeded subsample (without
/// replacement; pool >= stored rows means every row is a candidate) of the
/// selected shards plus opt.include_rows. Ties break on (shard, row).
std::vector<AcquireResult> acquire(const SemanticDb& db, const GpModel& gp, double beta,
                                   std::span<const ShardKey> keys, const AcquireOptions& opt);

struct TraceEntry {
  std::size_t iteration = 0;  // 0 for the initial batch
  std::string formula;        // normalized-domain text
  double g = 0.0;
  double best_g = 0.0;  // best value after this evaluation
};

struct MiningResult {
  // The winner maximizes G over the trace; near-ties (within 1e-9 relative)
  // are resolved by training misclassification rate, then size, then text.
  std::string best_text;  // best formula on the normalized 100-point domain
  Formula best_formula;   // thresholds denormalized, time bounds rescaled
  double best_g = 0.0;
  std::size_t iterations = 0;  // BO iterations run, excluding the initial batch
  std::string stop_reason;     // "converged", "maxiter" or "exhausted"
  std::vector<TraceEntry> trace;
  DatasetStats stats;
  ClassificationReport train_report;
  std::optional<ClassificationReport> test_report;
};

/// GP-UCB mining over the database. The dataset is standardized internally;
/// candidate formulae have their time bounds rescaled to the trace length
/// before every objective evaluation, and the returned formula is mapped
/// back to the raw data scale. Deterministic given (inputs, cfg, seed).
MiningResult mine(const LabeledDataset& train, const SemanticDb& db, const ReferenceSet& ref,
                  const BoConfig& cfg, std::uint64_t seed,
                  const LabeledDataset* test = nullptr);

/// Canonical text report: result fields, metrics and the full trace. No
/// timestamps; doubles print in shortest round-trip form, so two identical
/// runs produce byte-identical reports.
std::string mining_report(const MiningResult& r);

}  // namespace stlmine
