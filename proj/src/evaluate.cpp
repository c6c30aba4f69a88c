#include "stlmine/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stlmine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Window bounds as sample-index offsets, clipped to [0, n] (n acts as a
// "beyond the trace" sentinel).
struct Win {
  long lo;
  long hi;
};

Win index_window(const Interval& iv, double dt, std::size_t n_points) {
  constexpr double eps = 1e-9;
  const double n = static_cast<double>(n_points);
  Win w;
  double lo_d = std::ceil(iv.lo / dt - eps);
  w.lo = lo_d > n ? static_cast<long>(n_points) : static_cast<long>(lo_d);
  if (iv.unbounded()) {
    w.hi = static_cast<long>(n_points);
  } else {
    double hi_d = std::floor(iv.hi / dt + eps);
    w.hi = hi_d > n ? static_cast<long>(n_points) : hi_d < 0.0 ? -1 : static_cast<long>(hi_d);
  }
  return w;
}

[[noreturn]] void throw_empty_window(const Formula::Node* n, long t, std::size_t n_points) {
  const char* name = n->op == Op::Eventually ? "F" : n->op == Op::Globally ? "G" : "U";
  std::string msg = "empty time window: ";
  msg += name;
  msg += '[';
  msg += format_number(n->window.lo);
  msg += ',';
  msg += n->window.unbounded() ? "inf" : format_number(n->window.hi);
  msg += "] has no samples at t=" + std::to_string(t);
  msg += " (trace length " + std::to_string(n_points) + ")";
  throw std::runtime_error(msg);
}

void check_window(const Formula::Node* n, const Win& w, long hi, std::size_t n_points) {
  const long last = static_cast<long>(n_points) - 1;
  if (w.lo > w.hi) throw_empty_window(n, hi, n_points);
  if (hi + w.lo > last) throw_empty_window(n, hi, n_points);
}

void check_var(const Formula::Node* n, std::size_t dim) {
  if (n->pred.var >= dim)
    throw std::invalid_argument("formula references x" + std::to_string(n->pred.var) +
                                " but trajectory has " + std::to_string(dim) + " dimensions");
}

}  // namespace

// Scratch buffers are pooled per recursion depth. Children are evaluated
// before the current depth's buffer is acquired: growing the pool moves the
// inner vectors, so references into it must not be held across recursion
// (the heap blocks behind captured data() pointers do survive the move).
const double* Evaluator::eval_rho(const Formula::Node* n, long lo, long hi, std::size_t depth) {
  const std::size_t len = static_cast<std::size_t>(hi - lo + 1);
  const long last = static_cast<long>(traj_->n_points()) - 1;

  auto out = [&]() -> std::vector<double>& {
    if (depth >= rho_bufs_.size()) rho_bufs_.resize(depth + 1);
    auto& buf = rho_bufs_[depth];
    buf.resize(len);
    return buf;
  };

  switch (n->op) {
    case Op::True: {
      auto& buf = out();
      std::fill(buf.begin(), buf.end(), kInf);
      return buf.data();
    }
    case Op::Atom: {
      check_var(n, traj_->dim());
      const double* x = traj_->channel(n->pred.var).data();
      const double c = n->pred.threshold;
      auto& buf = out();
      if (n->pred.cmp == Cmp::Le)
        for (std::size_t i = 0; i < len; ++i) buf[i] = c - x[lo + static_cast<long>(i)];
      else
        for (std::size_t i = 0; i < len; ++i) buf[i] = x[lo + static_cast<long>(i)] - c;
      return buf.data();
    }
    case Op::Not: {
      const double* a = eval_rho(n->left.get(), lo, hi, depth + 1);
      auto& buf = out();
      for (std::size_t i = 0; i < len; ++i) buf[i] = -a[i];
      return buf.data();
    }
    case Op::And:
    case Op::Or: {
      const double* a = eval_rho(n->left.get(), lo, hi, depth + 1);
      const double* b = eval_rho(n->right.get(), lo, hi, depth + 2);
      auto& buf = out();
      if (n->op == Op::And)
        for (std::size_t i = 0; i < len; ++i) buf[i] = std::min(a[i], b[i]);
      else
        for (std::size_t i = 0; i < len; ++i) buf[i] = std::max(a[i], b[i]);
      return buf.data();
    }
    case Op::Eventually:
    case Op::Globally: {
      const Win w = index_window(n->window, traj_->dt(), traj_->n_points());
      check_window(n, w, hi, traj_->n_points());
      const long clo = lo + w.lo;
      const long chi = std::min(hi + w.hi, last);
      const double* a = eval_rho(n->left.get(), clo, chi, depth + 1);
      auto& buf = out();
      // sliding max (F) / min (G) with a monotonic deque of child indices
      const bool want_max = n->op == Op::Eventually;
      deque_.clear();
      std::size_t head = 0;
      long filled = clo - 1;
      for (long t = lo; t <= hi; ++t) {
        const long wlo = t + w.lo;
        const long whi = std::min(t + w.hi, last);
        while (filled < whi) {
          ++filled;
          const double v = a[filled - clo];
          while (deque_.size() > head) {
            const double back = a[deque_.back() - clo];
            if (want_max ? back <= v : back >= v) deque_.pop_back();
            else break;
          }
          deque_.push_back(filled);
        }
        while (deque_[head] < wlo) ++head;
        buf[t - lo] = a[deque_[head] - clo];
      }
      return buf.data();
    }
    case Op::Until: {
      const Win w = index_window(n->window, traj_->dt(), traj_->n_points());
      check_window(n, w, hi, traj_->n_points());
      const long chi = std::min(hi + w.hi, last);
      const double* l = eval_rho(n->left.get(), lo, chi, depth + 1);
      const double* r = eval_rho(n->right.get(), lo + w.lo, chi, depth + 2);
      auto& buf = out();
      for (long t = lo; t <= hi; ++t) {
        const long wlo = t + w.lo;
        const long whi = std::min(t + w.hi, last);
        double best = -kInf;
        double run_min_l = kInf;
        for (long t2 = t; t2 <= whi; ++t2) {
          run_min_l = std::min(run_min_l, l[t2 - lo]);
          if (t2 >= wlo) best = std::max(best, std::min(r[t2 - (lo + w.lo)], run_min_l));
        }
        buf[t - lo] = best;
      }
      return buf.data();
    }
  }
  throw std::logic_error("unreachable");
}

const char* Evaluator::eval_sat(const Formula::Node* n, long lo, long hi, std::size_t depth) {
  const std::size_t len = static_cast<std::size_t>(hi - lo + 1);
  const long last = static_cast<long>(traj_->n_points()) - 1;

  auto out = [&]() -> std::vector<char>& {
    if (depth >= sat_bufs_.size()) sat_bufs_.resize(depth + 1);
    auto& buf = sat_bufs_[depth];
    buf.resize(len);
    return buf;
  };

  switch (n->op) {
    case Op::True: {
      auto& buf = out();
      std::fill(buf.begin(), buf.end(), char(1));
      return buf.data();
    }
    case Op::Atom: {
      check_var(n, traj_->dim());
      const double* x = traj_->channel(n->pred.var).data();
      const double c = n->pred.threshold;
      auto& buf = out();
      if (n->pred.cmp == Cmp::Le)
        for (std::size_t i = 0; i < len; ++i) buf[i] = x[lo + static_cast<long>(i)] <= c;
      else
        for (std::size_t i = 0; i < len; ++i) buf[i] = x[lo + static_cast<long>(i)] >= c;
      return buf.data();
    }
    case Op::Not: {
      const char* a = eval_sat(n->left.get(), lo, hi, depth + 1);
      auto& buf = out();
      for (std::size_t i = 0; i < len; ++i) buf[i] = !a[i];
      return buf.data();
    }
    case Op::And:
    case Op::Or: {
      const char* a = eval_sat(n->left.get(), lo, hi, depth + 1);
      const char* b = eval_sat(n->right.get(), lo, hi, depth + 2);
      auto& buf = out();
      if (n->op == Op::And)
        for (std::size_t i = 0; i < len; ++i) buf[i] = a[i] && b[i];
      else
        for (std::size_t i = 0; i < len; ++i) buf[i] = a[i] || b[i];
      return buf.data();
    }
    case Op::Eventually:
    case Op::Globally: {
      const Win w = index_window(n->window, traj_->dt(), traj_->n_points());
      check_window(n, w, hi, traj_->n_points());
      const long clo = lo + w.lo;
      const long chi = std::min(hi + w.hi, last);
      const char* a = eval_sat(n->left.get(), clo, chi, depth + 1);
      auto& buf = out();
      // prefix sums make each window test an O(1) count query
      prefix_.resize(static_cast<std::size_t>(chi - clo + 1) + 1);
      prefix_[0] = 0;
      for (long i = clo; i <= chi; ++i)
        prefix_[i - clo + 1] = prefix_[i - clo] + (a[i - clo] != 0);
      const bool want_any = n->op == Op::Eventually;
      for (long t = lo; t <= hi; ++t) {
        const long wlo = t + w.lo;
        const long whi = std::min(t + w.hi, last);
        const long ones = prefix_[whi - clo + 1] - prefix_[wlo - clo];
        buf[t - lo] = want_any ? ones > 0 : ones == whi - wlo + 1;
      }
      return buf.data();
    }
    case Op::Until: {
      const Win w = index_window(n->window, traj_->dt(), traj_->n_points());
      check_window(n, w, hi, traj_->n_points());
      const long chi = std::min(hi + w.hi, last);
      const char* l = eval_sat(n->left.get(), lo, chi, depth + 1);
      const char* r = eval_sat(n->right.get(), lo + w.lo, chi, depth + 2);
      auto& buf = out();
      for (long t = lo; t <= hi; ++t) {
        const long wlo = t + w.lo;
        const long whi = std::min(t + w.hi, last);
        char ok = 0;
        // the "phi1 holds throughout" range is [t, t2] inclusive, mirroring
        // the inner min of the quantitative semantics
        for (long t2 = t; t2 <= whi; ++t2) {
          if (!l[t2 - lo]) break;
          if (t2 >= wlo && r[t2 - (lo + w.lo)]) { ok = 1; break; }
        }
        buf[t - lo] = ok;
      }
      return buf.data();
    }
  }
  throw std::logic_error("unreachable");
}

double Evaluator::robustness(const Formula& f, const Trajectory& traj, std::size_t t) {
  if (t >= traj.n_points())
    throw std::out_of_range("evaluation time " + std::to_string(t) +
                            " out of range (trace length " + std::to_string(traj.n_points()) +
                            ")");
  traj_ = &traj;
  return eval_rho(f.raw(), static_cast<long>(t), static_cast<long>(t), 0)[0];
}

bool Evaluator::satisfies(const Formula& f, const Trajectory& traj, std::size_t t) {
  if (t >= traj.n_points())
    throw std::out_of_range("evaluation time " + std::to_string(t) +
                            " out of range (trace length " + std::to_string(traj.n_points()) +
                            ")");
  traj_ = &traj;
  return eval_sat(f.raw(), static_cast<long>(t), static_cast<long>(t), 0)[0] != 0;
}

void Evaluator::robustness_batch(const Formula& f, std::span<const Trajectory> trajs,
                                 std::span<double> out) {
  for (std::size_t i = 0; i < trajs.size(); ++i) out[i] = robustness(f, trajs[i]);
}

double robustness(const Formula& f, const Trajectory& traj, std::size_t t) {
  Evaluator ev;
  return ev.robustness(f, traj, t);
}

bool satisfies(const Formula& f, const Trajectory& traj, std::size_t t) {
  Evaluator ev;
  return ev.satisfies(f, traj, t);
}

}  // namespace stlmine
