#include "stlmine/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

namespace stlmine {

ParseError::ParseError(std::string message, std::size_t position)
    : std::runtime_error("parse error at position " + std::to_string(position) + ": " +
                         std::move(message)),
      position_(position) {}

namespace {

enum class Tok : std::uint8_t {
  End,
  Number,
  Var,     // x<k>
  Le,      // <=
  Ge,      // >=
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  KwTrue,
  KwNot,
  KwAnd,
  KwOr,
  KwInf,
  KwF,
  KwG,
  KwU,
};

struct Token {
  Tok kind = Tok::End;
  std::size_t pos = 0;
  double number = 0.0;
  std::size_t var = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Token tok;
    tok.pos = pos_;
    if (pos_ >= text_.size()) return tok;
    char c = text_[pos_];
    switch (c) {
      case '(': ++pos_; tok.kind = Tok::LParen; return tok;
      case ')': ++pos_; tok.kind = Tok::RParen; return tok;
      case '[': ++pos_; tok.kind = Tok::LBracket; return tok;
      case ']': ++pos_; tok.kind = Tok::RBracket; return tok;
      case ',': ++pos_; tok.kind = Tok::Comma; return tok;
      case '<':
      case '>':
        if (pos_ + 1 >= text_.size() || text_[pos_ + 1] != '=')
          throw ParseError(std::string("expected '=' after '") + c + "'", pos_);
        tok.kind = c == '<' ? Tok::Le : Tok::Ge;
        pos_ += 2;
        return tok;
      default:
        break;
    }
    if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c)))
      return lex_number(tok);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_word(tok);
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

 private:
  Token lex_number(Token tok) {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    if (*begin == '+') ++begin;  // from_chars rejects a leading plus
    double value = 0.0;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr == begin)
      throw ParseError("malformed number", pos_);
    tok.kind = Tok::Number;
    tok.number = value;
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    return tok;
  }

  Token lex_word(Token tok) {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string_view word = text_.substr(start, pos_ - start);
    if (word == "true") { tok.kind = Tok::KwTrue; return tok; }
    if (word == "not") { tok.kind = Tok::KwNot; return tok; }
    if (word == "and") { tok.kind = Tok::KwAnd; return tok; }
    if (word == "or") { tok.kind = Tok::KwOr; return tok; }
    if (word == "inf") { tok.kind = Tok::KwInf; return tok; }
    if (word == "F") { tok.kind = Tok::KwF; return tok; }
    if (word == "G") { tok.kind = Tok::KwG; return tok; }
    if (word == "U") { tok.kind = Tok::KwU; return tok; }
    if (word.size() > 1 && word[0] == 'x') {
      std::size_t var = 0;
      auto res = std::from_chars(word.data() + 1, word.data() + word.size(), var);
      if (res.ec == std::errc() && res.ptr == word.data() + word.size()) {
        tok.kind = Tok::Var;
        tok.var = var;
        return tok;
      }
    }
    throw ParseError("unknown token '" + std::string(word) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { advance(); }

  Formula parse() {
    Formula f = parse_or();
    if (cur_.kind != Tok::End) throw ParseError("unexpected trailing input", cur_.pos);
    return f;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  void expect(Tok kind, const char* what) {
    if (cur_.kind != kind) throw ParseError(std::string("expected ") + what, cur_.pos);
    advance();
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (cur_.kind == Tok::KwOr) {
      advance();
      f = Formula::disjunction(f, parse_and());
    }
    return f;
  }

  Formula parse_and() {
    Formula f = parse_until();
    while (cur_.kind == Tok::KwAnd) {
      advance();
      f = Formula::conjunction(f, parse_until());
    }
    return f;
  }

  Formula parse_until() {
    Formula f = parse_unary();
    if (cur_.kind == Tok::KwU) {
      advance();
      Interval w = parse_interval();
      return Formula::until(w, f, parse_until());
    }
    return f;
  }

  Formula parse_unary() {
    switch (cur_.kind) {
      case Tok::KwNot:
        advance();
        return Formula::negation(parse_unary());
      case Tok::KwF: {
        advance();
        Interval w = parse_interval();
        return Formula::eventually(w, parse_unary());
      }
      case Tok::KwG: {
        advance();
        Interval w = parse_interval();
        return Formula::globally(w, parse_unary());
      }
      default:
        return parse_primary();
    }
  }

  Formula parse_primary() {
    switch (cur_.kind) {
      case Tok::KwTrue:
        advance();
        return Formula::tt();
      case Tok::Var: {
        std::size_t var = cur_.var;
        advance();
        Cmp cmp;
        if (cur_.kind == Tok::Le) cmp = Cmp::Le;
        else if (cur_.kind == Tok::Ge) cmp = Cmp::Ge;
        else throw ParseError("expected '<=' or '>=' after variable", cur_.pos);
        advance();
        if (cur_.kind != Tok::Number) throw ParseError("expected threshold number", cur_.pos);
        double threshold = cur_.number;
        advance();
        return Formula::atom(var, cmp, threshold);
      }
      case Tok::LParen: {
        advance();
        Formula f = parse_or();
        expect(Tok::RParen, "')'");
        return f;
      }
      default:
        throw ParseError("expected formula", cur_.pos);
    }
  }

  Interval parse_interval() {
    std::size_t open_pos = cur_.pos;
    expect(Tok::LBracket, "'['");
    if (cur_.kind != Tok::Number) throw ParseError("expected interval lower bound", cur_.pos);
    double lo = cur_.number;
    advance();
    expect(Tok::Comma, "','");
    double hi;
    if (cur_.kind == Tok::KwInf) {
      hi = std::numeric_limits<double>::infinity();
      advance();
    } else if (cur_.kind == Tok::Number) {
      hi = cur_.number;
      advance();
    } else {
      throw ParseError("expected interval upper bound or 'inf'", cur_.pos);
    }
    expect(Tok::RBracket, "']'");
    if (!(lo >= 0.0)) throw ParseError("interval lower bound must be >= 0", open_pos);
    if (!(hi > lo)) throw ParseError("interval upper bound must exceed lower bound", open_pos);
    return Interval(lo, hi);
  }

  Lexer lexer_;
  Token cur_;
};

}  // namespace

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

}  // namespace stlmine
