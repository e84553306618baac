#pragma once

#include <map>
#include <memory>
#include <string>

#include "olab/grid.hpp"

namespace olab {

// Closed arithmetic grammar for analytic fields:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('+' | '-') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
// Names: x1 x2 x3 (aliases x y z), pi, and the caller's constants.
// Functions: abs min max sqrt exp log sin cos pos (pos(a) = max(a, 0)).
// Nothing else is callable; parse errors carry the offending column.
class Expression {
 public:
  static Expression parse(const std::string& text, const std::map<std::string, double>& constants = {});

  double eval(const Point& x) const;
  // Variables referenced, as a bitmask over x1..x3.
  unsigned variables() const noexcept;
  const std::string& text() const noexcept { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace olab
