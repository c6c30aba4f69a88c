// Python bindings for the main operations: monitoring, sampling, embeddings,
// database search and mining. Trajectories cross the boundary as numpy
// arrays shaped (n_points,) or (n_points, dim); formulae as grammar text.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "stlmine/embedding.hpp"
#include "stlmine/evaluate.hpp"
#include "stlmine/metrics.hpp"
#include "stlmine/miner.hpp"
#include "stlmine/parser.hpp"
#include "stlmine/sampling.hpp"
#include "stlmine/trajectory.hpp"
#include "stlmine/vectordb.hpp"

namespace py = pybind11;
using namespace stlmine;

namespace {

Trajectory traj_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                           double dt) {
  if (a.ndim() == 1) {
    Trajectory t(1, static_cast<std::size_t>(a.shape(0)), dt);
    auto r = a.unchecked<1>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) t.value(0, static_cast<std::size_t>(i)) = r(i);
    return t;
  }
  if (a.ndim() == 2) {
    Trajectory t(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)), dt);
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
      for (py::ssize_t d = 0; d < a.shape(1); ++d)
        t.value(static_cast<std::size_t>(d), static_cast<std::size_t>(i)) = r(i, d);
    return t;
  }
  throw std::invalid_argument("trajectory array must be 1-D or 2-D");
}

py::array_t<double> traj_to_array(const Trajectory& t) {
  py::array_t<double> out({t.n_points(), t.dim()});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.n_points(); ++i)
    for (std::size_t d = 0; d < t.dim(); ++d)
      w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(d)) = t.value(d, i);
  return out;
}

LabeledDataset dataset_from_lists(const std::vector<py::array_t<double>>& pos,
                                  const std::vector<py::array_t<double>>& neg, double dt) {
  LabeledDataset d;
  for (const auto& a : pos) d.positives.push_back(traj_from_array(a, dt));
  for (const auto& a : neg) d.negatives.push_back(traj_from_array(a, dt));
  return d;
}

py::dict report_to_dict(const ClassificationReport& r) {
  py::dict out;
  out["mcr"] = r.mcr;
  out["precision"] = r.precision ? py::cast(*r.precision) : py::none();
  out["recall"] = r.recall ? py::cast(*r.recall) : py::none();
  out["tp"] = r.counts.tp;
  out["tn"] = r.counts.tn;
  out["fp"] = r.counts.fp;
  out["fn"] = r.counts.fn;
  return out;
}

}  // namespace

PYBIND11_MODULE(_stlmine, m) {
  m.doc() = "STL monitoring, semantic embeddings and specification mining";

  m.def("node_count",
        [](const std::string& f) { return parse_formula(f).node_count(); },
        py::arg("formula"), "Syntax-tree size of a formula");
  m.def("canonical",
        [](const std::string& f) { return format_formula(parse_formula(f)); },
        py::arg("formula"), "Canonical text form (also validates the syntax)");

  m.def(
      "robustness",
      [](const std::string& f, const py::array_t<double>& x, double dt, std::size_t t) {
        return robustness(parse_formula(f), traj_from_array(x, dt), t);
      },
      py::arg("formula"), py::arg("trajectory"), py::arg("dt") = 1.0, py::arg("t") = 0,
      "Quantitative robustness of a formula on a trajectory");
  m.def(
      "satisfies",
      [](const std::string& f, const py::array_t<double>& x, double dt, std::size_t t) {
        return satisfies(parse_formula(f), traj_from_array(x, dt), t);
      },
      py::arg("formula"), py::arg("trajectory"), py::arg("dt") = 1.0, py::arg("t") = 0,
      "Boolean satisfaction of a formula on a trajectory");

  m.def(
      "sample_mu0",
      [](std::size_t dim, std::uint64_t seed) { return traj_to_array(sample_mu0(Mu0Params{}, dim, seed)); },
      py::arg("dim") = 1, py::arg("seed") = 0,
      "One base-measure trajectory, shaped (100, dim)");

  m.def(
      "gen_linear",
      [](std::size_t n_pos, std::size_t n_neg, std::size_t n_points, std::uint64_t seed) {
        LinearGenConfig cfg;
        cfg.n_pos = n_pos;
        cfg.n_neg = n_neg;
        cfg.n_points = n_points;
        LabeledDataset d = gen_linear_dataset(cfg, seed);
        std::vector<py::array_t<double>> pos, neg;
        for (const auto& t : d.positives) pos.push_back(traj_to_array(t));
        for (const auto& t : d.negatives) neg.push_back(traj_to_array(t));
        return py::make_tuple(pos, neg);
      },
      py::arg("n_pos") = 100, py::arg("n_neg") = 100, py::arg("n_points") = 100,
      py::arg("seed") = 0, "Linear benchmark dataset as (positives, negatives) array lists");

  py::class_<ReferenceSet>(m, "ReferenceSet")
      .def_property_readonly("n_train", &ReferenceSet::n_train)
      .def_property_readonly("n_mc", &ReferenceSet::n_mc);
  m.def(
      "build_reference_set",
      [](std::size_t n_train, std::size_t n_mc, std::size_t max_vars, std::uint64_t seed) {
        FDistParams fp;
        fp.max_vars = max_vars;
        return build_reference_set(n_train, n_mc, fp, Mu0Params{}, seed);
      },
      py::arg("n_train") = 128, py::arg("n_mc") = 2000, py::arg("max_vars") = 2,
      py::arg("seed") = 7);
  m.def("save_reference_set",
        [](const ReferenceSet& r, const std::string& p) { save_reference_set(r, p); });
  m.def("load_reference_set",
        [](const std::string& p) { return load_reference_set(p); });

  m.def(
      "embed",
      [](const std::string& f, const ReferenceSet& R) {
        Eigen::VectorXd e = embed(parse_formula(f), R);
        py::array_t<double> out(static_cast<std::size_t>(e.size()));
        auto w = out.mutable_unchecked<1>();
        for (py::ssize_t i = 0; i < e.size(); ++i) w(i) = e(i);
        return out;
      },
      py::arg("formula"), py::arg("reference"), "Semantic embedding of a formula");
  m.def(
      "kernel",
      [](const std::string& f, const std::string& g, const ReferenceSet& R) {
        return kernel(parse_formula(f), parse_formula(g), R);
      },
      py::arg("f"), py::arg("g"), py::arg("reference"), "Normalized kernel similarity");

  py::class_<SemanticDb>(m, "SemanticDb")
      .def_property_readonly("total", &SemanticDb::total)
      .def("shard_sizes", [](const SemanticDb& db) {
        py::dict out;
        for (const auto& s : db.shards())
          out[py::make_tuple(s.key.n_vars, s.key.max_nodes)] = s.size();
        return out;
      });
  m.def(
      "build_db",
      [](const ReferenceSet& R, std::size_t max_nodes, std::size_t max_vars, double tau_sim,
         std::size_t per_template_cap, std::size_t signature_trajs, std::size_t value_n,
         std::size_t time_n, std::uint64_t seed) {
        DbBuildConfig cfg;
        cfg.max_nodes = max_nodes;
        cfg.max_vars = max_vars;
        cfg.tau_sim = tau_sim;
        cfg.per_template_cap = per_template_cap;
        cfg.signature_trajs = signature_trajs;
        cfg.grid = ParameterGrid{ParameterGrid::linspace(-4.0, 4.0, value_n),
                                 ParameterGrid::linspace(0.0, 100.0, time_n)};
        cfg.seed = seed;
        return build_db(cfg, R);
      },
      py::arg("reference"), py::arg("max_nodes") = 4, py::arg("max_vars") = 2,
      py::arg("tau_sim") = 0.9, py::arg("per_template_cap") = 10000,
      py::arg("signature_trajs") = 100, py::arg("value_n") = 10, py::arg("time_n") = 10,
      py::arg("seed") = 1);
  m.def("save_db", [](const SemanticDb& db, const std::string& p) { save_db(db, p); });
  m.def("load_db", [](const std::string& p) { return load_db(p); });
  m.def(
      "train_ivf",
      [](SemanticDb& db, std::size_t nlist, std::size_t nprobe, std::uint64_t seed) {
        train_ivf(db, nlist, nprobe, seed);
      },
      py::arg("db"), py::arg("nlist"), py::arg("nprobe"), py::arg("seed") = 7);

  m.def(
      "query",
      [](const SemanticDb& db, const ReferenceSet& R, const std::string& f, std::size_t k,
         std::size_t max_nodes, bool ivf) {
        Eigen::VectorXd e = embed(parse_formula(f), R);
        std::vector<ShardKey> keys;
        for (const auto& s : db.shards())
          if (s.key.max_nodes <= max_nodes) keys.push_back(s.key);
        auto hits = query(db, e, k, keys, ivf ? SearchMode::Ivf : SearchMode::Exact);
        py::list out;
        for (const auto& h : hits) out.append(py::make_tuple(h.formula, h.distance));
        return out;
      },
      py::arg("db"), py::arg("reference"), py::arg("formula"), py::arg("k") = 5,
      py::arg("max_nodes") = 100, py::arg("ivf") = false,
      "Top-k nearest stored formulae as (text, distance) pairs");

  m.def(
      "objective_g",
      [](const std::string& f, const std::vector<py::array_t<double>>& pos,
         const std::vector<py::array_t<double>>& neg, double dt) {
        Evaluator ev;
        return objective_g(parse_formula(f), dataset_from_lists(pos, neg, dt), ev);
      },
      py::arg("formula"), py::arg("positives"), py::arg("negatives"), py::arg("dt") = 1.0,
      "Discriminative objective on a labeled dataset");
  m.def(
      "classify",
      [](const std::string& f, const std::vector<py::array_t<double>>& pos,
         const std::vector<py::array_t<double>>& neg, double dt) {
        return report_to_dict(classify_metrics(parse_formula(f), dataset_from_lists(pos, neg, dt)));
      },
      py::arg("formula"), py::arg("positives"), py::arg("negatives"), py::arg("dt") = 1.0,
      "MCR / precision / recall of sign-of-robustness classification");

  m.def(
      "mine",
      [](const SemanticDb& db, const ReferenceSet& R,
         const std::vector<py::array_t<double>>& pos,
         const std::vector<py::array_t<double>>& neg, std::uint64_t seed, std::size_t maxiter,
         std::size_t q, double beta_const, std::size_t shard_level) {
        BoConfig bo;
        bo.maxiter = maxiter;
        bo.q = q;
        bo.beta_const = beta_const;
        bo.shard_level = static_cast<std::uint32_t>(shard_level);
        LabeledDataset d = dataset_from_lists(pos, neg, 1.0);
        MiningResult res = mine(d, db, R, bo, seed);
        py::dict out;
        out["formula"] = format_formula(res.best_formula);
        out["best_g"] = res.best_g;
        out["iterations"] = res.iterations;
        out["stop_reason"] = res.stop_reason;
        out["evaluations"] = res.trace.size();
        out["train"] = report_to_dict(res.train_report);
        return out;
      },
      py::arg("db"), py::arg("reference"), py::arg("positives"), py::arg("negatives"),
      py::arg("seed") = 500, py::arg("maxiter") = 50, py::arg("q") = 4,
      py::arg("beta_const") = -1.0, py::arg("shard_level") = 4,
      "GP-UCB mining; returns the best formula and its metrics");
}
