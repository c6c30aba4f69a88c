// stlmine command line tool: dataset generation, database construction,
// retrieval queries, retrieval-effectiveness evaluation and specification
// mining. Every run is deterministic given its seeds; report files echo the
// full effective configuration so experiments can be rebuilt from them.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stlmine/embedding.hpp"
#include "stlmine/metrics.hpp"
#include "stlmine/miner.hpp"
#include "stlmine/parser.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/templates.hpp"
#include "stlmine/threading.hpp"
#include "stlmine/trajectory.hpp"
#include "stlmine/vectordb.hpp"

using json = nlohmann::json;
using namespace stlmine;
using Clock = std::chrono::steady_clock;

namespace {

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Full effective configuration: defaults overlaid with the config file,
// then with explicit flags. Unknown keys are rejected so typos fail fast.
struct RunConfig {
  std::size_t threads = 0;

  struct {
    std::size_t n_train = 128;
    std::size_t n_mc = 2000;
    std::size_t max_vars = 2;
    std::uint64_t seed = 7;
  } reference;

  struct {
    std::size_t max_nodes = 4;
    std::size_t max_vars = 2;
    double tau_sim = 0.995;
    std::size_t per_template_cap = 4000;
    std::size_t max_total = 0;
    std::size_t signature_trajs = 100;
    std::uint64_t seed = 42;
    double value_lo = -4.0, value_hi = 4.0;
    std::size_t value_n = 10;
    double time_lo = 0.0, time_hi = 100.0;
    std::size_t time_n = 10;
  } db;

  struct {
    std::size_t n_pos = 100;
    std::size_t n_neg = 100;
    std::size_t n_points = 100;
    double x0 = 1.0;
    double drift = 0.03;
    double noise_std = 0.2;
    std::uint64_t seed = 2024;
  } gen;

  BoConfig bo;
  std::uint64_t bo_seed = 500;

  struct {
    std::size_t k = 5;
    std::uint64_t seed = 1000;
    double train_fraction = 0.8;
  } folds;

  RetrievalEvalConfig eval;
  std::size_t eval_max_vars = 2;
};

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const auto& a : allowed) known = known || a == k;
    if (!known) throw std::runtime_error("config: unknown key \"" + k + "\" in " + where);
  }
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void load_grid(const json& j, const std::string& where, double& lo, double& hi,
               std::size_t& n) {
  check_keys(j, {"lo", "hi", "n"}, where);
  get_to_if(j, "lo", lo);
  get_to_if(j, "hi", hi);
  get_to_if(j, "n", n);
}

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j = json::parse(in);
  check_keys(j, {"threads", "reference", "db", "gen", "bo", "folds", "eval"}, "top level");
  get_to_if(j, "threads", c.threads);
  if (j.contains("reference")) {
    const auto& r = j["reference"];
    check_keys(r, {"n_train", "n_mc", "max_vars", "seed"}, "reference");
    get_to_if(r, "n_train", c.reference.n_train);
    get_to_if(r, "n_mc", c.reference.n_mc);
    get_to_if(r, "max_vars", c.reference.max_vars);
    get_to_if(r, "seed", c.reference.seed);
  }
  if (j.contains("db")) {
    const auto& d = j["db"];
    check_keys(d,
               {"max_nodes", "max_vars", "tau_sim", "per_template_cap", "max_total",
                "signature_trajs", "seed", "value_grid", "time_grid"},
               "db");
    get_to_if(d, "max_nodes", c.db.max_nodes);
    get_to_if(d, "max_vars", c.db.max_vars);
    get_to_if(d, "tau_sim", c.db.tau_sim);
    get_to_if(d, "per_template_cap", c.db.per_template_cap);
    get_to_if(d, "max_total", c.db.max_total);
    get_to_if(d, "signature_trajs", c.db.signature_trajs);
    get_to_if(d, "seed", c.db.seed);
    if (d.contains("value_grid"))
      load_grid(d["value_grid"], "db.value_grid", c.db.value_lo, c.db.value_hi, c.db.value_n);
    if (d.contains("time_grid"))
      load_grid(d["time_grid"], "db.time_grid", c.db.time_lo, c.db.time_hi, c.db.time_n);
  }
  if (j.contains("gen")) {
    const auto& g = j["gen"];
    check_keys(g, {"n_pos", "n_neg", "n_points", "x0", "drift", "noise_std", "seed"}, "gen");
    get_to_if(g, "n_pos", c.gen.n_pos);
    get_to_if(g, "n_neg", c.gen.n_neg);
    get_to_if(g, "n_points", c.gen.n_points);
    get_to_if(g, "x0", c.gen.x0);
    get_to_if(g, "drift", c.gen.drift);
    get_to_if(g, "noise_std", c.gen.noise_std);
    get_to_if(g, "seed", c.gen.seed);
  }
  if (j.contains("bo")) {
    const auto& b = j["bo"];
    check_keys(b,
               {"maxiter", "epsilon", "patience", "burn_in", "initial_batch", "q",
                "retrieval_depth", "candidate_pool", "beta_cap", "beta_const", "acquisition",
                "shard_level", "seed"},
               "bo");
    get_to_if(b, "maxiter", c.bo.maxiter);
    get_to_if(b, "epsilon", c.bo.epsilon);
    get_to_if(b, "patience", c.bo.patience);
    get_to_if(b, "burn_in", c.bo.burn_in);
    get_to_if(b, "initial_batch", c.bo.initial_batch);
    get_to_if(b, "q", c.bo.q);
    get_to_if(b, "retrieval_depth", c.bo.retrieval_depth);
    get_to_if(b, "candidate_pool", c.bo.candidate_pool);
    get_to_if(b, "beta_cap", c.bo.beta_cap);
    get_to_if(b, "beta_const", c.bo.beta_const);
    get_to_if(b, "shard_level", c.bo.shard_level);
    get_to_if(b, "seed", c.bo_seed);
    if (b.contains("acquisition")) {
      std::string a = b["acquisition"];
      if (a == "candidate-set") c.bo.acquisition = BoConfig::Acquisition::CandidateSet;
      else if (a == "gradient") c.bo.acquisition = BoConfig::Acquisition::Gradient;
      else throw std::runtime_error("config: bo.acquisition must be candidate-set or gradient");
    }
  }
  if (j.contains("folds")) {
    const auto& f = j["folds"];
    check_keys(f, {"k", "seed", "train_fraction"}, "folds");
    get_to_if(f, "k", c.folds.k);
    get_to_if(f, "seed", c.folds.seed);
    get_to_if(f, "train_fraction", c.folds.train_fraction);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e,
               {"n_queries", "k", "omega", "n_traj", "max_query_nodes", "shard_level",
                "max_vars", "seed"},
               "eval");
    get_to_if(e, "n_queries", c.eval.n_queries);
    get_to_if(e, "k", c.eval.k);
    get_to_if(e, "omega", c.eval.omega);
    get_to_if(e, "n_traj", c.eval.n_traj);
    get_to_if(e, "max_query_nodes", c.eval.max_query_nodes);
    get_to_if(e, "shard_level", c.eval.shard_level);
    get_to_if(e, "max_vars", c.eval_max_vars);
    get_to_if(e, "seed", c.eval.seed);
  }
  return c;
}

json effective_config(const RunConfig& c) {
  json j;
  j["threads"] = c.threads;
  j["reference"] = {{"n_train", c.reference.n_train},
                    {"n_mc", c.reference.n_mc},
                    {"max_vars", c.reference.max_vars},
                    {"seed", c.reference.seed}};
  j["db"] = {{"max_nodes", c.db.max_nodes},
             {"max_vars", c.db.max_vars},
             {"tau_sim", c.db.tau_sim},
             {"per_template_cap", c.db.per_template_cap},
             {"max_total", c.db.max_total},
             {"signature_trajs", c.db.signature_trajs},
             {"seed", c.db.seed},
             {"value_grid", {{"lo", c.db.value_lo}, {"hi", c.db.value_hi}, {"n", c.db.value_n}}},
             {"time_grid", {{"lo", c.db.time_lo}, {"hi", c.db.time_hi}, {"n", c.db.time_n}}}};
  j["gen"] = {{"n_pos", c.gen.n_pos},     {"n_neg", c.gen.n_neg},
              {"n_points", c.gen.n_points}, {"x0", c.gen.x0},
              {"drift", c.gen.drift},     {"noise_std", c.gen.noise_std},
              {"seed", c.gen.seed}};
  j["bo"] = {{"maxiter", c.bo.maxiter},
             {"epsilon", c.bo.epsilon},
             {"patience", c.bo.patience},
             {"burn_in", c.bo.burn_in},
             {"initial_batch", c.bo.initial_batch},
             {"q", c.bo.q},
             {"retrieval_depth", c.bo.retrieval_depth},
             {"candidate_pool", c.bo.candidate_pool},
             {"beta_cap", c.bo.beta_cap},
             {"beta_const", c.bo.beta_const},
             {"acquisition", c.bo.acquisition == BoConfig::Acquisition::CandidateSet
                                 ? "candidate-set"
                                 : "gradient"},
             {"shard_level", c.bo.shard_level},
             {"seed", c.bo_seed}};
  j["folds"] = {{"k", c.folds.k}, {"seed", c.folds.seed},
                {"train_fraction", c.folds.train_fraction}};
  j["eval"] = {{"n_queries", c.eval.n_queries},
               {"k", c.eval.k},
               {"omega", c.eval.omega},
               {"n_traj", c.eval.n_traj},
               {"max_query_nodes", c.eval.max_query_nodes},
               {"shard_level", c.eval.shard_level},
               {"max_vars", c.eval_max_vars},
               {"seed", c.eval.seed}};
  return j;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  return static_cast<bool>(out);
}

ReferenceSet load_ref(const std::string& path) {
  if (path.empty()) throw std::runtime_error("--ref is required");
  return load_reference_set(path);
}

int cmd_gen_data(const RunConfig& c, const std::string& kind, const std::string& out,
                 bool verbose) {
  if (kind != "linear") {
    std::cerr << "gen-data: unknown kind \"" << kind << "\" (expected: linear)\n";
    return 2;
  }
  LinearGenConfig g;
  g.n_pos = c.gen.n_pos;
  g.n_neg = c.gen.n_neg;
  g.n_points = c.gen.n_points;
  g.x0 = c.gen.x0;
  g.drift = c.gen.drift;
  g.noise_std = c.gen.noise_std;
  LabeledDataset d = gen_linear_dataset(g, c.gen.seed);
  write_dataset_csv(d, out);
  json manifest;
  manifest["kind"] = kind;
  manifest["config"] = effective_config(c)["gen"];
  if (!write_file(out + ".manifest.json", manifest.dump(2) + "\n")) {
    std::cerr << "gen-data: failed to write manifest\n";
    return 1;
  }
  if (verbose)
    std::cout << "wrote " << d.positives.size() << "+" << d.negatives.size()
              << " trajectories to " << out << "\n";
  return 0;
}

int cmd_build_db(const RunConfig& c, const std::string& out, const std::string& ref_out,
                 bool verbose) {
  auto t0 = Clock::now();
  FDistParams fp;
  fp.max_vars = c.reference.max_vars;
  ReferenceSet R = build_reference_set(c.reference.n_train, c.reference.n_mc, fp, Mu0Params{},
                                       c.reference.seed);
  if (!ref_out.empty()) save_reference_set(R, ref_out);
  if (verbose)
    std::cout << "reference set: " << R.n_train() << " anchors x " << R.n_mc()
              << " trajectories (" << secs_since(t0) << "s)\n";

  DbBuildConfig cfg;
  cfg.max_nodes = c.db.max_nodes;
  cfg.max_vars = c.db.max_vars;
  cfg.tau_sim = c.db.tau_sim;
  cfg.per_template_cap = c.db.per_template_cap;
  cfg.max_total = c.db.max_total;
  cfg.signature_trajs = c.db.signature_trajs;
  cfg.seed = c.db.seed;
  cfg.grid = ParameterGrid{ParameterGrid::linspace(c.db.value_lo, c.db.value_hi, c.db.value_n),
                           ParameterGrid::linspace(c.db.time_lo, c.db.time_hi, c.db.time_n)};
  SemanticDb db = build_db(cfg, R);
  save_db(db, out);
  for (const auto& s : db.shards())
    std::cout << "shard (" << s.key.n_vars << "," << s.key.max_nodes << "): " << s.size()
              << " formulae\n";
  std::cout << "total " << db.total() << " formulae in " << secs_since(t0) << "s -> " << out
            << "\n";
  return 0;
}

int cmd_mine(const RunConfig& c, const std::string& data_path, const std::string& db_path,
             const std::string& ref_path, const std::string& report_path, bool single_fold,
             bool verbose) {
  LabeledDataset data = read_dataset_csv(data_path);
  SemanticDb db = load_db(db_path);
  ReferenceSet R = load_ref(ref_path);

  std::vector<FoldSplit> folds;
  if (single_fold)
    folds.push_back(stratified_holdout(data, c.folds.train_fraction, c.folds.seed));
  else
    folds = stratified_kfold(data, c.folds.k, c.folds.seed);

  std::string report = "config " + effective_config(c).dump() + "\n";
  double sum_mcr = 0, sum2_mcr = 0, sum_prec = 0, sum_rec = 0, sum2_prec = 0, sum2_rec = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    MiningResult res = mine(folds[f].train, db, R, c.bo, c.bo_seed + f, &folds[f].test);
    const auto& te = *res.test_report;
    double prec = te.precision.value_or(0.0), rec = te.recall.value_or(0.0);
    sum_mcr += te.mcr;
    sum2_mcr += te.mcr * te.mcr;
    sum_prec += prec;
    sum2_prec += prec * prec;
    sum_rec += rec;
    sum2_rec += rec * rec;
    std::printf("fold %zu: formula=%s  test mcr=%.4f prec=%.4f rec=%.4f (%s)\n", f,
                format_formula(res.best_formula).c_str(), te.mcr, prec, rec,
                res.stop_reason.c_str());
    report += "== fold " + std::to_string(f) + " ==\n" + mining_report(res);
    if (verbose) std::fputs(mining_report(res).c_str(), stdout);
  }
  auto mean_std = [&](double s, double s2) {
    double n = static_cast<double>(folds.size());
    double m = s / n;
    double v = s2 / n - m * m;
    return std::make_pair(m, std::sqrt(std::max(0.0, v)));
  };
  auto [m_mcr, s_mcr] = mean_std(sum_mcr, sum2_mcr);
  auto [m_prec, s_prec] = mean_std(sum_prec, sum2_prec);
  auto [m_rec, s_rec] = mean_std(sum_rec, sum2_rec);
  std::printf("test MCR %.4f +- %.4f | Prec %.4f +- %.4f | Rec %.4f +- %.4f over %zu folds\n",
              m_mcr, s_mcr, m_prec, s_prec, m_rec, s_rec, folds.size());
  char agg[256];
  std::snprintf(agg, sizeof(agg),
                "aggregate folds=%zu mcr=%.6f+-%.6f prec=%.6f+-%.6f rec=%.6f+-%.6f\n",
                folds.size(), m_mcr, s_mcr, m_prec, s_prec, m_rec, s_rec);
  report += agg;
  if (!write_file(report_path, report)) {
    std::cerr << "mine: failed to write report " << report_path << "\n";
    return 1;
  }
  return 0;
}

int cmd_query(const RunConfig& c, const std::string& db_path, const std::string& ref_path,
              const std::string& formula_text, std::size_t k, std::size_t max_nodes,
              bool ivf) {
  SemanticDb db = load_db(db_path);
  ReferenceSet R = load_ref(ref_path);
  Formula f = parse_formula(formula_text);
  Eigen::VectorXd e = embed(f, R);
  std::vector<ShardKey> keys;
  for (const auto& s : db.shards())
    if (s.key.max_nodes <= max_nodes) keys.push_back(s.key);
  if (keys.empty()) {
    std::cerr << "query: no shard with max_nodes <= " << max_nodes << "\n";
    return 2;
  }
  auto hits = query(db, e, k, keys, ivf ? SearchMode::Ivf : SearchMode::Exact);
  for (const auto& h : hits)
    std::printf("%2zu  %.9f  %s\n", h.rank, h.distance, h.formula.c_str());
  (void)c;
  return 0;
}

int cmd_eval_retrieval(const RunConfig& c, const std::string& db_path,
                       const std::string& ref_path, const std::string& out_csv,
                       const std::string& out_summary) {
  SemanticDb db = load_db(db_path);
  ReferenceSet R = load_ref(ref_path);
  RetrievalEvalConfig cfg = c.eval;
  cfg.fdist.max_vars = c.eval_max_vars;
  RetrievalReport rep = retrieval_effectiveness(db, R, cfg);
  std::string csv = "# config " + effective_config(c)["eval"].dump() + "\n" + rep.to_csv();
  if (!write_file(out_csv, csv)) {
    std::cerr << "eval-retrieval: failed to write " << out_csv << "\n";
    return 1;
  }
  std::string summary = rep.summary();
  if (!out_summary.empty() && !write_file(out_summary, summary)) {
    std::cerr << "eval-retrieval: failed to write " << out_summary << "\n";
    return 1;
  }
  std::fputs(summary.c_str(), stdout);
  std::printf("median AP@%zu=%.4f  median NDCG@%zu=%.4f  median top-hit kernel=%.4f\n", cfg.k,
              rep.median_ap(), cfg.k, rep.median_ndcg(), rep.median_top_kernel());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STL specification mining over a semantic vector database"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON configuration file (flags win)");
  app.add_option("--seed", seed_override, "Override the subcommand's primary seed");
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");
  app.add_flag("--verbose", verbose, "Chatty progress output");

  auto* gen = app.add_subcommand("gen-data", "Generate a benchmark dataset CSV");
  std::string gen_kind = "linear", gen_out;
  gen->add_option("--kind", gen_kind, "Dataset kind (linear)");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  auto* bdb = app.add_subcommand("build-db", "Build and save the semantic database");
  std::string bdb_out, bdb_ref_out;
  bdb->add_option("--out", bdb_out, "Output database path")->required();
  bdb->add_option("--ref-out", bdb_ref_out, "Also save the reference set here");

  auto* mine_cmd = app.add_subcommand("mine", "Mine a specification from labeled data");
  std::string mine_data, mine_db, mine_ref, mine_report = "mining_report.txt";
  bool mine_single = false;
  mine_cmd->add_option("--data", mine_data, "Dataset CSV")->required();
  mine_cmd->add_option("--db", mine_db, "Semantic database path")->required();
  mine_cmd->add_option("--ref", mine_ref, "Reference set path")->required();
  mine_cmd->add_option("--report", mine_report, "Report output path");
  mine_cmd->add_flag("--single-fold", mine_single, "One stratified holdout instead of 5-fold CV");

  auto* q = app.add_subcommand("query", "Retrieve nearest stored formulae");
  std::string q_db, q_ref, q_formula;
  std::size_t q_k = 5, q_max_nodes = 100;
  bool q_ivf = false;
  q->add_option("--db", q_db, "Semantic database path")->required();
  q->add_option("--ref", q_ref, "Reference set path")->required();
  q->add_option("--formula", q_formula, "Query formula text")->required();
  q->add_option("-k,--k", q_k, "Number of results");
  q->add_option("--max-nodes", q_max_nodes, "Restrict to shards at or below this node budget");
  q->add_flag("--ivf", q_ivf, "Use the trained inverted-file index");

  auto* ev = app.add_subcommand("eval-retrieval", "Run the retrieval effectiveness harness");
  std::string ev_db, ev_ref, ev_out = "retrieval_report.csv", ev_summary;
  ev->add_option("--db", ev_db, "Semantic database path")->required();
  ev->add_option("--ref", ev_ref, "Reference set path")->required();
  ev->add_option("--out", ev_out, "Per-query CSV output path");
  ev->add_option("--summary", ev_summary, "Quantile summary output path");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (threads != 0) cfg.threads = threads;
    set_thread_count(cfg.threads);
    if (gen->parsed()) {
      if (seed_override) cfg.gen.seed = *seed_override;
      return cmd_gen_data(cfg, gen_kind, gen_out, verbose);
    }
    if (bdb->parsed()) {
      if (seed_override) cfg.db.seed = *seed_override;
      return cmd_build_db(cfg, bdb_out, bdb_ref_out, verbose);
    }
    if (mine_cmd->parsed()) {
      if (seed_override) cfg.bo_seed = *seed_override;
      return cmd_mine(cfg, mine_data, mine_db, mine_ref, mine_report, mine_single, verbose);
    }
    if (q->parsed()) return cmd_query(cfg, q_db, q_ref, q_formula, q_k, q_max_nodes, q_ivf);
    if (ev->parsed()) {
      if (seed_override) cfg.eval.seed = *seed_override;
      return cmd_eval_retrieval(cfg, ev_db, ev_ref, ev_out, ev_summary);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
