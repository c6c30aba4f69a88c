#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "stlmine/formula.hpp"

namespace stlmine {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t position);

  /// Byte offset into the input at which the error was detected.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses the textual formula grammar:
///
///   formula  := or
///   or       := and ("or" and)*
///   and      := until ("and" until)*
///   until    := unary ("U" interval until)?
///   unary    := "not" unary | "F" interval unary | "G" interval unary | primary
///   primary  := "true" | atom | "(" formula ")"
///   atom     := var ("<=" | ">=") number
///   interval := "[" number "," (number | "inf") "]"
///   var      := "x" digits
///
/// Unary operators bind tighter than U, which binds tighter than "and",
/// which binds tighter than "or". U is right associative.
Formula parse_formula(std::string_view text);

}  // namespace stlmine
