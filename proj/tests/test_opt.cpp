#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "stlmine/gp.hpp"
#include "stlmine/metrics.hpp"
#include "stlmine/miner.hpp"
#include "stlmine/parser.hpp"
#include "stlmine/rng.hpp"

using namespace stlmine;

namespace {

const ReferenceSet& opt_ref() {
  static ReferenceSet R = [] {
    FDistParams fp;
    fp.max_vars = 3;
    return build_reference_set(8, 100, fp, Mu0Params{}, 6);
  }();
  return R;
}

const SemanticDb& opt_db() {
  static SemanticDb db = [] {
    DbBuildConfig cfg;
    cfg.max_nodes = 4;
    cfg.max_vars = 1;
    cfg.grid.values = ParameterGrid::linspace(-2.0, 2.0, 5);
    cfg.grid.times = {0.0, 50.0};
    cfg.per_template_cap = 30;
    cfg.signature_trajs = 40;
    cfg.seed = 33;
    return build_db(cfg, opt_ref());
  }();
  return db;
}

// noisy two-level 1-D dataset separable by sign
LabeledDataset separable_dataset(std::size_t n_per_class, std::size_t n_points,
                                 std::uint64_t seed = 11) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> offset(0.0, 0.3), jitter(0.0, 0.05);
  LabeledDataset d;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    Trajectory p(1, n_points, 1.0), n(1, n_points, 1.0);
    double op = offset(rng), on = offset(rng);
    for (std::size_t t = 0; t < n_points; ++t) {
      p.channel(0)[t] = 2.0 + op + jitter(rng);
      n.channel(0)[t] = -2.0 + on + jitter(rng);
    }
    d.positives.push_back(std::move(p));
    d.negatives.push_back(std::move(n));
  }
  return d;
}

Trajectory constant_traj(double value, std::size_t n_points = 1) {
  Trajectory t(1, n_points, 1.0);
  for (auto& v : t.channel(0)) v = value;
  return t;
}

}  // namespace

TEST_CASE("two-point GP matches the closed form with fixed hyperparameters") {
  GpConfig cfg;
  cfg.optimize_hyperparams = false;
  cfg.lengthscale = 1.0;
  cfg.signal_var = 1.0;
  cfg.noise = 1e-6;
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  GpModel m = GpModel::fit(X, y, cfg);

  // standardized targets: mean 1/2, population std 1/2 -> yt = (-1, 1)
  auto matern = [](double r) {
    double u = std::sqrt(5.0) * r;
    return (1.0 + u + u * u / 3.0) * std::exp(-u);
  };
  double d = 1.0 + 1e-6;
  double k01 = matern(1.0);

  {
    // midpoint: by symmetry the standardized mean is 0
    Eigen::VectorXd xq(1);
    xq << 0.5;
    auto [mean, var] = m.posterior(xq);
    double ks = matern(0.5);
    double var_t = 1.0 - 2.0 * ks * ks / (d + k01);
    CHECK(std::abs(mean - 0.5) <= 1e-9);
    CHECK(std::abs(var - 0.25 * var_t) <= 1e-9);
  }
  {
    // training point x = 0: K^-1 yt has a closed 2x2 form
    Eigen::VectorXd xq(1);
    xq << 0.0;
    auto [mean, var] = m.posterior(xq);
    double det = d * d - k01 * k01;
    double a0 = (d * -1.0 - k01 * 1.0) / det;
    double a1 = (-k01 * -1.0 + d * 1.0) / det;
    double mean_t = 1.0 * a0 + k01 * a1;
    double q0 = (d * 1.0 - k01 * k01) / det;        // first entry of K^-1 k
    double q1 = (-k01 * 1.0 + d * k01) / det;       // second entry
    double var_t = 1.0 - (1.0 * q0 + k01 * q1);
    CHECK(std::abs(mean - (0.5 + 0.5 * mean_t)) <= 1e-9);
    CHECK(std::abs(var - 0.25 * var_t) <= 1e-9);
  }
}

TEST_CASE("GP posterior equals the dense no-cache oracle on random problems") {
  auto rng = make_rng(91);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> npick(3, 50), dpick(1, 100);
  for (int rep = 0; rep < 20; ++rep) {
    int n = npick(rng), dd = dpick(rng);
    Eigen::MatrixXd X(n, dd);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < dd; ++j) X(i, j) = normal(rng);
      y(i) = normal(rng);
    }
    GpConfig cfg;
    GpModel m = GpModel::fit(X, y, cfg);
    oracle::DenseGp dense{X, y, m.lengthscale(), m.signal_var(), m.noise()};
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd xq(dd);
      for (int j = 0; j < dd; ++j) xq(j) = normal(rng);
      auto [mean, var] = m.posterior(xq);
      auto [omean, ovar] = dense.posterior(xq);
      CHECK(std::abs(mean - omean) <= 1e-8);
      CHECK(std::abs(var - ovar) <= 1e-8);
    }
  }
}

TEST_CASE("noiseless GP interpolates its training points") {
  // mean(x_i) - y_i = -noise * alpha_i exactly, so with the 1e-6 noise floor
  // the 1e-6 interpolation bound needs a well-conditioned kernel matrix:
  // points spread far apart relative to the lengthscale keep |alpha| ~ |y|.
  Eigen::MatrixXd X(12, 2);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    X(i, 0) = 6.0 * static_cast<double>(i);
    X(i, 1) = 0.7 * static_cast<double>(i);
    y(i) = 0.2 * std::sin(static_cast<double>(i)) + 0.1 * std::cos(2.0 * i);
  }
  GpConfig cfg;
  cfg.optimize_hyperparams = false;
  GpModel m = GpModel::fit(X, y, cfg);
  for (int i = 0; i < 12; ++i) {
    auto [mean, var] = m.posterior(X.row(i).transpose());
    CHECK(std::abs(mean - y(i)) <= 1e-6);
    CHECK(var >= 0.0);
    CHECK(var <= 1e-4);  // near the 1e-6 noise floor up to the target scale
  }
}

TEST_CASE("far from all data the posterior reverts to the prior") {
  Eigen::MatrixXd X(5, 2);
  X << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.5;
  Eigen::VectorXd y(5);
  y << 1.0, 2.0, 3.0, 4.0, 5.0;
  GpConfig cfg;
  cfg.optimize_hyperparams = false;
  cfg.lengthscale = 0.1;
  cfg.signal_var = 2.0;
  GpModel m = GpModel::fit(X, y, cfg);
  Eigen::VectorXd faraway(2);
  faraway << 100.0, -50.0;
  auto [mean, var] = m.posterior(faraway);
  double ymean = y.mean();
  double yvar = (y.array() - ymean).square().sum() / 5.0;
  CHECK(std::abs(mean - ymean) <= 1e-9);
  CHECK(std::abs(var - yvar * m.signal_var()) <= 1e-9);
}

TEST_CASE("UCB is monotone in beta and batch matches single evaluation") {
  auto rng = make_rng(93);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = normal(rng);
    y(i) = normal(rng);
  }
  GpModel m = GpModel::fit(X, y, GpConfig{});
  Eigen::MatrixXd Q(100, 3);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 3; ++j) Q(i, j) = 2.0 * normal(rng);
  Eigen::VectorXd bmean, bvar;
  m.posterior_batch(Q, bmean, bvar);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x = Q.row(i).transpose();
    auto [mean, var] = m.posterior(x);
    CHECK(std::abs(mean - bmean(i)) <= 1e-8);
    CHECK(std::abs(var - bvar(i)) <= 1e-8);
    double prev = -std::numeric_limits<double>::infinity();
    for (double beta : {0.0, 0.5, 1.0, 2.0, 4.0, 16.0, 256.0}) {
      double u = m.ucb(x, beta);
      CHECK(u >= prev - 1e-12);
      prev = u;
    }
  }
}

TEST_CASE("GP handles duplicate rows and validates inputs") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 1, 1, 1, 2, 2;  // duplicate first rows
  Eigen::VectorXd y(3);
  y << 1, 1, 2;
  GpModel m = GpModel::fit(X, y, GpConfig{});
  auto [mean, var] = m.posterior(Eigen::Vector2d(1.5, 1.5));
  CHECK(std::isfinite(mean));
  CHECK(var >= 0.0);
  CHECK_THROWS_AS(m.posterior(Eigen::VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(GpModel::fit(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), GpConfig{}),
                  std::invalid_argument);
  Eigen::VectorXd ybad(2);
  ybad << 1, 2;
  CHECK_THROWS_AS(GpModel::fit(X, ybad, GpConfig{}), std::invalid_argument);
}

TEST_CASE("gradient of the UCB surface matches finite differences") {
  auto rng = make_rng(94);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(15, 3);
  Eigen::VectorXd y(15);
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = normal(rng);
    y(i) = normal(rng);
  }
  GpModel m = GpModel::fit(X, y, GpConfig{});
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x(j) = normal(rng);
    for (double beta : {0.0, 2.0}) {
      Eigen::VectorXd g = m.ucb_gradient(x, beta);
      for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        double h = 1e-5;
        xp(j) += h;
        xm(j) -= h;
        double fd = (m.ucb(xp, beta) - m.ucb(xm, beta)) / (2 * h);
        CHECK(std::abs(g(j) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("objective G reproduces the hand-computed example exactly") {
  LabeledDataset d;
  d.positives = {constant_traj(1.0), constant_traj(3.0)};
  d.negatives = {constant_traj(-1.0), constant_traj(-3.0)};
  Formula f = parse_formula("x0 >= 0");
  Evaluator ev;
  double g = objective_g(f, d, ev);
  // means 2 and -2, population stds 1 and 1
  CHECK(g == (2.0 - (-2.0)) / (1.0 + 1.0 + 1e-9));
  CHECK(g == doctest::Approx(2.0).epsilon(1e-8));

  LabeledDataset swapped;
  swapped.positives = d.negatives;
  swapped.negatives = d.positives;
  CHECK(objective_g(f, swapped, ev) == -g);

  LabeledDataset constant;
  constant.positives = {constant_traj(1.0), constant_traj(1.0)};
  constant.negatives = {constant_traj(-1.0), constant_traj(-1.0)};
  double gc = objective_g(f, constant, ev);
  CHECK(gc == 2.0 / 1e-9);

  LabeledDataset empty;
  empty.positives = d.positives;
  CHECK_THROWS_AS(objective_g(f, empty, ev), std::invalid_argument);
}

TEST_CASE("objective G antisymmetry on random formulae") {
  Mu0Params mp;
  LabeledDataset d;
  for (std::uint64_t i = 0; i < 10; ++i) {
    d.positives.push_back(sample_mu0(mp, 2, derive_seed(201, i)));
    d.negatives.push_back(sample_mu0(mp, 2, derive_seed(202, i)));
  }
  LabeledDataset swapped;
  swapped.positives = d.negatives;
  swapped.negatives = d.positives;
  FDistParams fp;
  fp.max_vars = 2;
  Evaluator ev;
  std::size_t done = 0;
  for (std::uint64_t i = 0; done < 30; ++i) {
    Formula f = sample_formula(fp, derive_seed(203, i));
    try {
      double a = objective_g(f, d, ev);
      double b = objective_g(f, swapped, ev);
      CHECK(a == -b);
      ++done;
    } catch (const std::runtime_error&) {
    }
  }
}

TEST_CASE("beta schedule grows and saturates at the cap") {
  CHECK(beta_schedule(1) == doctest::Approx(2.0 * std::log(M_PI * M_PI / 0.6)).epsilon(1e-12));
  double prev = 0.0;
  for (std::size_t t = 1; t <= 40; ++t) {
    double b = beta_schedule(t);
    CHECK(b >= prev);
    CHECK(b <= 16.0);
    prev = b;
  }
  CHECK(beta_schedule(40) == 16.0);
  CHECK(beta_schedule(3, 4.0) == 4.0);
  CHECK_THROWS_AS(beta_schedule(0), std::invalid_argument);
}

TEST_CASE("acquisition extremes pick mean and variance maximizers") {
  const SemanticDb& db = opt_db();
  const auto* shard = db.find(ShardKey{1, 4});
  REQUIRE(shard != nullptr);
  REQUIRE(shard->size() >= 20);
  std::vector<ShardKey> keys{ShardKey{1, 4}};

  // train the GP on a handful of stored embeddings with synthetic targets
  std::size_t n_train = 8;
  Eigen::MatrixXd X(n_train, db.dim());
  Eigen::VectorXd y(n_train);
  std::size_t si = 0;
  for (std::size_t i = 0; i < db.shards().size(); ++i)
    if (db.shards()[i].key == ShardKey{1, 4}) si = i;
  for (std::size_t i = 0; i < n_train; ++i) {
    X.row(static_cast<long>(i)) = db.stored_embedding(si, i * 2).transpose();
    y(static_cast<long>(i)) = std::sin(static_cast<double>(i));
  }
  GpModel gp = GpModel::fit(X, y, GpConfig{});

  AcquireOptions opt;
  opt.pool = shard->size();  // full shard as candidate set
  opt.seed = 3;

  auto top_mean = acquire(db, gp, 0.0, keys, opt);
  REQUIRE(top_mean.size() == 1);
  auto top_var = acquire(db, gp, 1e12, keys, opt);
  REQUIRE(top_var.size() == 1);

  double best_mean = -1e300, best_sd = -1e300;
  for (std::size_t r = 0; r < shard->size(); ++r) {
    auto [mean, var] = gp.posterior(db.stored_embedding(si, r));
    best_mean = std::max(best_mean, mean);
    best_sd = std::max(best_sd, std::sqrt(std::max(var, 0.0)));
  }
  {
    auto [mean, var] = gp.posterior(db.stored_embedding(top_mean[0].shard, top_mean[0].row));
    CHECK(mean >= best_mean - 1e-8);
  }
  {
    auto [mean, var] = gp.posterior(db.stored_embedding(top_var[0].shard, top_var[0].row));
    CHECK(std::sqrt(std::max(var, 0.0)) >= best_sd - 1e-8);
  }

  // exclusion removes candidates
  std::unordered_set<std::string> exclude{top_mean[0].text};
  opt.exclude = &exclude;
  auto next = acquire(db, gp, 0.0, keys, opt);
  REQUIRE(next.size() == 1);
  CHECK(next[0].text != top_mean[0].text);
}

TEST_CASE("mining a separable dataset reaches zero training error") {
  const SemanticDb& db = opt_db();
  LabeledDataset d = separable_dataset(12, 100);
  BoConfig cfg;
  cfg.maxiter = 15;
  cfg.initial_batch = 5;
  cfg.burn_in = 5;
  MiningResult res = mine(d, db, opt_ref(), cfg, 17);

  CHECK(res.train_report.mcr == 0.0);
  REQUIRE(!res.trace.empty());
  CHECK(res.trace.size() <= cfg.initial_batch + cfg.q * cfg.maxiter);

  double best = -1e300;
  for (const auto& e : res.trace) {
    best = std::max(best, e.g);
    CHECK(e.best_g == best);  // non-decreasing best trace
  }
  CHECK(res.best_g <= best);
  CHECK(res.best_g >= best - 1e-9 * std::max(1.0, std::abs(best)));
  CHECK(parse_formula(res.best_text).node_count() <= 4);
  CHECK(res.best_formula.node_count() <= 4);

  // determinism
  MiningResult res2 = mine(d, db, opt_ref(), cfg, 17);
  CHECK(res2.best_text == res.best_text);
  CHECK(res2.best_g == res.best_g);
  REQUIRE(res2.trace.size() == res.trace.size());
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    CHECK(res2.trace[i].formula == res.trace[i].formula);
    CHECK(res2.trace[i].g == res.trace[i].g);
  }

  // a held-out set from the same construction classifies cleanly too
  LabeledDataset test = separable_dataset(6, 100, 23);
  MiningResult res3 = mine(d, db, opt_ref(), cfg, 17, &test);
  REQUIRE(res3.test_report.has_value());
  CHECK(res3.test_report->mcr == 0.0);
}

TEST_CASE("mining rejects impossible setups") {
  const SemanticDb& db = opt_db();
  LabeledDataset d = separable_dataset(5, 100);
  BoConfig cfg;
  cfg.shard_level = 5;  // db was built with max_nodes 4, so no level-5 shard
  CHECK_THROWS_AS(mine(d, db, opt_ref(), cfg, 1), std::invalid_argument);

  BoConfig bad;
  bad.initial_batch = 1;
  CHECK_THROWS_AS(mine(d, db, opt_ref(), bad, 1), std::invalid_argument);

  LabeledDataset onesided;
  onesided.positives = d.positives;
  CHECK_THROWS_AS(mine(onesided, db, opt_ref(), BoConfig{}, 1), std::invalid_argument);
}

TEST_CASE("classification metrics handle zeros and degenerate denominators") {
  LabeledDataset d;
  d.positives = {constant_traj(2.0), constant_traj(1.0)};
  d.negatives = {constant_traj(-1.0), constant_traj(-2.0)};
  Formula sep = parse_formula("x0 >= 0");
  auto rep = classify_metrics(sep, d);
  CHECK(rep.mcr == 0.0);
  CHECK(rep.precision.value() == 1.0);
  CHECK(rep.recall.value() == 1.0);
  CHECK(rep.counts.tp == 2);
  CHECK(rep.counts.tn == 2);

  Formula everything = parse_formula("x0 >= -100");
  auto rep2 = classify_metrics(everything, d);
  CHECK(rep2.recall.value() == 1.0);
  CHECK(rep2.precision.value() == 0.5);
  CHECK(rep2.mcr == 0.5);

  // rho == 0 cases: counted in MCR, excluded from the confusion counts
  LabeledDataset z;
  z.positives = {constant_traj(0.0)};
  z.negatives = {constant_traj(0.0)};
  auto rep3 = classify_metrics(sep, z);
  CHECK(rep3.mcr == 1.0);
  CHECK(rep3.counts.zero_pos == 1);
  CHECK(rep3.counts.zero_neg == 1);
  CHECK_FALSE(rep3.precision.has_value());
  CHECK_FALSE(rep3.recall.has_value());

  // MCR + accuracy = 1 with sign-correct plus zero cases as errors
  Formula half = parse_formula("x0 >= 1.5");
  auto rep4 = classify_metrics(half, d);
  double accuracy = static_cast<double>(rep4.counts.tp + rep4.counts.tn) / 4.0;
  CHECK(rep4.mcr + accuracy == 1.0);
}

TEST_CASE("relevance agreement boundary is inclusive") {
  std::vector<Trajectory> trajs;
  for (int v = 1; v <= 10; ++v) trajs.push_back(constant_traj(static_cast<double>(v)));
  Formula query = parse_formula("x0 >= 0");     // satisfied by all ten
  Formula hit = parse_formula("x0 <= 9.5");     // satisfied by nine of ten
  Evaluator ev;
  CHECK(relevant(query, query, trajs, 1.0, ev));
  CHECK(relevant(query, hit, trajs, 0.9, ev));       // agreement exactly 0.9
  CHECK_FALSE(relevant(query, hit, trajs, 0.91, ev));
  CHECK_FALSE(relevant(query, Formula::negation(query), trajs, 0.5, ev));
}

TEST_CASE("AP@K and NDCG@K formulas") {
  std::vector<char> r01{0, 1};
  CHECK(ap_at_k(r01, 2) == 0.5);
  std::vector<char> all1{1, 1, 1};
  CHECK(ap_at_k(all1, 3) == 1.0);
  std::vector<char> none{0, 0, 0};
  CHECK(ap_at_k(none, 3) == 0.0);
  std::vector<char> mixed{1, 0, 1, 0, 1};
  // P@1 = 1, P@3 = 2/3, P@5 = 3/5; AP = (1 + 2/3 + 3/5)/3
  CHECK(ap_at_k(mixed, 5) == doctest::Approx((1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(ap_at_k(r01, 3), std::invalid_argument);
  CHECK_THROWS_AS(ap_at_k(r01, 0), std::invalid_argument);

  std::vector<double> g10{1.0, 0.0};
  CHECK(ndcg_at_k(g10, 2) == 1.0);
  std::vector<double> g01{0.0, 1.0};
  CHECK(ndcg_at_k(g01, 2) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
  std::vector<double> zeros{0.0, 0.0};
  CHECK(ndcg_at_k(zeros, 2) == 1.0);
  // non-increasing relevance flags give NDCG exactly 1
  std::vector<double> ni{1.0, 1.0, 0.0, 0.0};
  CHECK(ndcg_at_k(ni, 4) == 1.0);
}

TEST_CASE("quantiles interpolate linearly") {
  std::vector<double> v{5.0, 1.0, 3.0, 2.0, 4.0};
  CHECK(quantile(v, 0.5) == 3.0);
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 5.0);
  CHECK(quantile(v, 0.25) == 2.0);
  CHECK(quantile(v, 0.125) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("retrieval effectiveness harness runs deterministically") {
  RetrievalEvalConfig cfg;
  cfg.n_queries = 8;
  cfg.k = 3;
  cfg.n_traj = 60;
  cfg.max_query_nodes = 4;
  cfg.fdist.max_vars = 1;
  cfg.seed = 12;
  RetrievalReport rep = retrieval_effectiveness(opt_db(), opt_ref(), cfg);
  REQUIRE(rep.rows.size() == 8);
  for (const auto& row : rep.rows) {
    CHECK(row.retrieved == 3);
    CHECK(row.ap >= 0.0);
    CHECK(row.ap <= 1.0);
    CHECK(row.ndcg >= 0.0);
    CHECK(row.ndcg <= 1.0 + 1e-12);
    CHECK(row.top_kernel <= 1.0 + 1e-9);
    CHECK(row.node_count <= 4);
  }
  CHECK(rep.summary().find("all") != std::string::npos);

  RetrievalReport rep2 = retrieval_effectiveness(opt_db(), opt_ref(), cfg);
  CHECK(rep.to_csv() == rep2.to_csv());
  CHECK(rep.summary() == rep2.summary());
}
