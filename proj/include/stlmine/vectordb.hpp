#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stlmine/embedding.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/templates.hpp"

namespace stlmine {

struct ShardKey {
  std::uint32_t n_vars = 1;
  std::uint32_t max_nodes = 4;

  friend bool operator==(const ShardKey&, const ShardKey&) = default;
};

struct QueryResult {
  std::string formula;
  double distance = 0.0;
  std::size_t rank = 0;
  // location of the hit, usable for stored_embedding()
  std::size_t shard = 0;
  std::size_t row = 0;
  std::uint32_t node_count = 0;
};

struct DbBuildConfig {
  std::size_t max_nodes = 4;  // M
  std::size_t max_vars = 2;   // N
  ParameterGrid grid{ParameterGrid::linspace(-4.0, 4.0, 10),
                     ParameterGrid::linspace(0.0, 100.0, 10)};
  double tau_sim = 0.9;
  std::size_t per_template_cap = 10000;
  /// Soft cap on kept formulae: no new template is started once reached
  /// (0 = unlimited). Bounds build time at desk scale.
  std::size_t max_total = 0;
  std::size_t signature_trajs = 100;
  Mu0Params mu0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Immutable after build/load. Shard granularity follows (n_vars,
/// max_nodes); a formula is stored in every shard whose node budget admits
/// it and whose n_vars matches its variable count exactly.
class SemanticDb {
 public:
  struct Shard {
    ShardKey key;
    std::vector<std::string> formulas;  // canonical grammar text
    std::vector<std::uint32_t> node_counts;
    RowMajorXf embeddings;  // |formulas| x dim

    bool has_ivf = false;
    RowMajorXf centroids;                           // nlist x dim
    std::vector<std::vector<std::uint32_t>> cells;  // nlist inverted lists
    std::uint32_t nprobe = 0;

    std::size_t size() const { return formulas.size(); }
  };

  std::size_t dim() const { return dim_; }
  const std::vector<Shard>& shards() const { return shards_; }
  const Shard* find(const ShardKey& key) const;
  std::size_t total() const;
  const std::string& manifest() const { return manifest_; }

  Eigen::VectorXd stored_embedding(std::size_t shard, std::size_t row) const;

  std::uint64_t seed() const { return seed_; }

 private:
  friend SemanticDb build_db(const DbBuildConfig&, const ReferenceSet&);
  friend void train_ivf(SemanticDb&, std::size_t, std::size_t, std::uint64_t);
  friend SemanticDb load_db(const std::string&);

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Shard> shards_;
  std::string manifest_;
};

/// Enumerate, instantiate, signature-filter (greedy, per template), embed,
/// deduplicate bit-identical embeddings, shard. Deterministic given cfg.
SemanticDb build_db(const DbBuildConfig& cfg, const ReferenceSet& R);

enum class SearchMode { Exact, Ivf };

/// k-nearest stored formulae over the union of the selected shards.
/// Ordering: ascending L2 distance, ties by (fewer nodes, lexicographic
/// text). IVF mode requires train_ivf first; nprobe_override replaces the
/// trained nprobe when nonzero.
std::vector<QueryResult> query(const SemanticDb& db, const Eigen::VectorXd& e, std::size_t k,
                               std::span<const ShardKey> keys,
                               SearchMode mode = SearchMode::Exact,
                               std::size_t nprobe_override = 0);

void save_db(const SemanticDb& db, const std::string& path);
SemanticDb load_db(const std::string& path);

/// Seeded k-means (fixed iteration count) per shard. Shards smaller than
/// nlist are left unindexed (exact scan stays their only mode); throws if
/// that leaves no shard trained.
void train_ivf(SemanticDb& db, std::size_t nlist, std::size_t nprobe,
               std::uint64_t seed = 7);

}  // namespace stlmine
