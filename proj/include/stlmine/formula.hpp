#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

namespace stlmine {

enum class Op : std::uint8_t {
  True,
  Atom,
  Not,
  And,
  Or,
  Eventually,
  Globally,
  Until,
};

enum class Cmp : std::uint8_t { Le, Ge };

struct AtomicPredicate {
  std::size_t var = 0;
  Cmp cmp = Cmp::Le;
  double threshold = 0.0;

  friend bool operator==(const AtomicPredicate&, const AtomicPredicate&) = default;
};

/// Closed time window [lo, hi] attached to a temporal operator.
/// hi may be infinity; bounds are in trace time units.
struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  Interval() = default;
  Interval(double lo, double hi);  // throws std::invalid_argument on bad bounds

  bool unbounded() const { return std::isinf(hi); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Immutable formula handle. Copies share subtrees, so passing and storing
/// Formula by value is cheap.
class Formula {
 public:
  struct Node;

  Formula();  // the constant "true"

  Op op() const;
  const AtomicPredicate& atom() const;     // valid when op() == Atom
  const Interval& window() const;          // valid for F, G, U
  Formula left() const;                    // unary operand or left operand
  Formula right() const;                   // valid for And, Or, Until

  std::size_t node_count() const;
  /// Number of distinct variables mentioned.
  std::size_t var_count() const;
  /// Smallest trajectory dimension this formula can be evaluated on
  /// (max variable index + 1, or 0 for variable-free formulae).
  std::size_t min_dim() const;

  const Node* raw() const { return node_.get(); }

  friend bool operator==(const Formula& a, const Formula& b);
  friend bool operator!=(const Formula& a, const Formula& b) { return !(a == b); }

  static Formula tt();
  static Formula atom(std::size_t var, Cmp cmp, double threshold);
  static Formula negation(Formula f);
  static Formula conjunction(Formula l, Formula r);
  static Formula disjunction(Formula l, Formula r);
  static Formula eventually(Interval w, Formula f);
  static Formula globally(Interval w, Formula f);
  static Formula until(Interval w, Formula l, Formula r);

 private:
  explicit Formula(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

struct Formula::Node {
  Op op = Op::True;
  AtomicPredicate pred;
  Interval window;
  std::shared_ptr<const Node> left;
  std::shared_ptr<const Node> right;
};

/// Canonical text form. Parsing the result yields a structurally
/// identical formula; thresholds and time bounds round-trip exactly.
std::string format_formula(const Formula& f);

/// Shortest decimal form of x that parses back to the same double.
std::string format_number(double x);

std::ostream& operator<<(std::ostream& os, const Formula& f);

}  // namespace stlmine
