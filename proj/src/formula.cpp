#include "stlmine/formula.hpp"

#include <charconv>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace stlmine {

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo >= 0.0)) throw std::invalid_argument("interval lower bound must be >= 0");
  if (!(hi > lo)) throw std::invalid_argument("interval upper bound must exceed lower bound");
}

namespace {

const std::shared_ptr<const Formula::Node>& true_node() {
  static const std::shared_ptr<const Formula::Node> node = std::make_shared<Formula::Node>();
  return node;
}

}  // namespace

Formula::Formula() : node_(true_node()) {}
Formula::Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Op Formula::op() const { return node_->op; }

const AtomicPredicate& Formula::atom() const {
  if (node_->op != Op::Atom) throw std::logic_error("atom() on non-atomic formula");
  return node_->pred;
}

const Interval& Formula::window() const {
  switch (node_->op) {
    case Op::Eventually:
    case Op::Globally:
    case Op::Until:
      return node_->window;
    default:
      throw std::logic_error("window() on non-temporal formula");
  }
}

Formula Formula::left() const {
  if (!node_->left) throw std::logic_error("left() on leaf formula");
  return Formula(node_->left);
}

Formula Formula::right() const {
  if (!node_->right) throw std::logic_error("right() on formula without right operand");
  return Formula(node_->right);
}

Formula Formula::tt() { return Formula(true_node()); }

Formula Formula::atom(std::size_t var, Cmp cmp, double threshold) {
  auto node = std::make_shared<Node>();
  node->op = Op::Atom;
  node->pred = AtomicPredicate{var, cmp, threshold};
  return Formula(std::move(node));
}

Formula Formula::negation(Formula f) {
  auto node = std::make_shared<Node>();
  node->op = Op::Not;
  node->left = f.node_;
  return Formula(std::move(node));
}

Formula Formula::conjunction(Formula l, Formula r) {
  auto node = std::make_shared<Node>();
  node->op = Op::And;
  node->left = l.node_;
  node->right = r.node_;
  return Formula(std::move(node));
}

Formula Formula::disjunction(Formula l, Formula r) {
  auto node = std::make_shared<Node>();
  node->op = Op::Or;
  node->left = l.node_;
  node->right = r.node_;
  return Formula(std::move(node));
}

Formula Formula::eventually(Interval w, Formula f) {
  auto node = std::make_shared<Node>();
  node->op = Op::Eventually;
  node->window = w;
  node->left = f.node_;
  return Formula(std::move(node));
}

Formula Formula::globally(Interval w, Formula f) {
  auto node = std::make_shared<Node>();
  node->op = Op::Globally;
  node->window = w;
  node->left = f.node_;
  return Formula(std::move(node));
}

Formula Formula::until(Interval w, Formula l, Formula r) {
  auto node = std::make_shared<Node>();
  node->op = Op::Until;
  node->window = w;
  node->left = l.node_;
  node->right = r.node_;
  return Formula(std::move(node));
}

namespace {

std::size_t count_nodes(const Formula::Node* n) {
  if (!n) return 0;
  return 1 + count_nodes(n->left.get()) + count_nodes(n->right.get());
}

void collect_vars(const Formula::Node* n, std::unordered_set<std::size_t>& vars) {
  if (!n) return;
  if (n->op == Op::Atom) vars.insert(n->pred.var);
  collect_vars(n->left.get(), vars);
  collect_vars(n->right.get(), vars);
}

std::size_t max_var_plus_one(const Formula::Node* n) {
  if (!n) return 0;
  std::size_t m = n->op == Op::Atom ? n->pred.var + 1 : 0;
  return std::max({m, max_var_plus_one(n->left.get()), max_var_plus_one(n->right.get())});
}

bool node_equal(const Formula::Node* a, const Formula::Node* b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->op != b->op) return false;
  if (a->op == Op::Atom && !(a->pred == b->pred)) return false;
  switch (a->op) {
    case Op::Eventually:
    case Op::Globally:
    case Op::Until:
      if (!(a->window == b->window)) return false;
      break;
    default:
      break;
  }
  return node_equal(a->left.get(), b->left.get()) && node_equal(a->right.get(), b->right.get());
}

}  // namespace

std::size_t Formula::node_count() const { return count_nodes(node_.get()); }

std::size_t Formula::var_count() const {
  std::unordered_set<std::size_t> vars;
  collect_vars(node_.get(), vars);
  return vars.size();
}

std::size_t Formula::min_dim() const { return max_var_plus_one(node_.get()); }

bool operator==(const Formula& a, const Formula& b) {
  return node_equal(a.node_.get(), b.node_.get());
}

std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

void format_interval(const Interval& w, std::string& out) {
  out += '[';
  out += format_number(w.lo);
  out += ',';
  out += w.unbounded() ? "inf" : format_number(w.hi);
  out += ']';
}

void format_node(const Formula::Node* n, std::string& out) {
  switch (n->op) {
    case Op::True:
      out += "true";
      return;
    case Op::Atom:
      out += 'x';
      out += std::to_string(n->pred.var);
      out += n->pred.cmp == Cmp::Le ? " <= " : " >= ";
      out += format_number(n->pred.threshold);
      return;
    case Op::Not:
      out += "not (";
      format_node(n->left.get(), out);
      out += ')';
      return;
    case Op::Eventually:
    case Op::Globally:
      out += n->op == Op::Eventually ? 'F' : 'G';
      format_interval(n->window, out);
      out += " (";
      format_node(n->left.get(), out);
      out += ')';
      return;
    case Op::And:
    case Op::Or:
    case Op::Until:
      out += '(';
      format_node(n->left.get(), out);
      out += ") ";
      if (n->op == Op::Until) {
        out += 'U';
        format_interval(n->window, out);
      } else {
        out += n->op == Op::And ? "and" : "or";
      }
      out += " (";
      format_node(n->right.get(), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string format_formula(const Formula& f) {
  std::string out;
  format_node(f.raw(), out);
  return out;
}

std::ostream& operator<<(std::ostream& os, const Formula& f) {
  return os << format_formula(f);
}

}  // namespace stlmine
