#include "olab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "olab/error.hpp"

namespace olab {

struct Expression::Node {
  enum Kind { Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call } kind = Num;
  double value = 0.0;
  int var = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using N = Expression::Node;

NodePtr make(N::Kind k, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<N>();
  n->kind = k;
  n->args = std::move(args);
  return n;
}

struct FnInfo {
  const char* name;
  int min_args, max_args;
};

constexpr FnInfo kFunctions[] = {{"abs", 1, 1}, {"min", 2, 16}, {"max", 2, 16}, {"sqrt", 1, 1}, {"exp", 1, 1},
                                 {"log", 1, 1}, {"sin", 1, 1},  {"cos", 1, 1},  {"pos", 1, 1}};

class Parser {
 public:
  Parser(const std::string& s, const std::map<std::string, double>& c) : s_(s), consts_(c) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("expression \"" + s_ + "\": " + msg + " at column " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr l = term();
    while (true) {
      if (eat('+')) l = make(N::Add, {l, term()});
      else if (eat('-')) l = make(N::Sub, {l, term()});
      else return l;
    }
  }
  NodePtr term() {
    NodePtr l = unary();
    while (true) {
      if (eat('*')) l = make(N::Mul, {l, unary()});
      else if (eat('/')) l = make(N::Div, {l, unary()});
      else return l;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(N::Neg, {unary()});
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr b = atom();
    if (eat('^')) return make(N::Pow, {b, unary()});
    return b;
  }
  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<N>();
      n->kind = N::Num;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        const FnInfo* info = nullptr;
        for (const auto& f : kFunctions)
          if (name == f.name) info = &f;
        if (!info) {
          pos_ = start;
          fail("unknown function '" + name + "'");
        }
        std::vector<NodePtr> args{expr()};
        while (eat(',')) args.push_back(expr());
        if (!eat(')')) fail("expected ')'");
        if (static_cast<int>(args.size()) < info->min_args || static_cast<int>(args.size()) > info->max_args) {
          fail("wrong number of arguments to " + name);
        }
        auto n = std::make_shared<N>();
        n->kind = N::Call;
        n->fn = name;
        n->args = std::move(args);
        return n;
      }
      auto n = std::make_shared<N>();
      if (name == "x1" || name == "x") {
        n->kind = N::Var;
        n->var = 0;
      } else if (name == "x2" || name == "y") {
        n->kind = N::Var;
        n->var = 1;
      } else if (name == "x3" || name == "z") {
        n->kind = N::Var;
        n->var = 2;
      } else if (name == "pi") {
        n->value = std::numbers::pi;
      } else if (auto it = consts_.find(name); it != consts_.end()) {
        n->value = it->second;
      } else {
        pos_ = start;
        fail("unknown name '" + name + "'");
      }
      return n;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::map<std::string, double>& consts_;
  std::size_t pos_ = 0;
};

double eval_node(const N& n, const Point& x) {
  switch (n.kind) {
    case N::Num: return n.value;
    case N::Var: return x[n.var];
    case N::Neg: return -eval_node(*n.args[0], x);
    case N::Add: return eval_node(*n.args[0], x) + eval_node(*n.args[1], x);
    case N::Sub: return eval_node(*n.args[0], x) - eval_node(*n.args[1], x);
    case N::Mul: return eval_node(*n.args[0], x) * eval_node(*n.args[1], x);
    case N::Div: return eval_node(*n.args[0], x) / eval_node(*n.args[1], x);
    case N::Pow: {
      const double b = eval_node(*n.args[0], x), e = eval_node(*n.args[1], x);
      if (e == 2.0) return b * b;
      if (e == 3.0) return b * b * b;
      return std::pow(b, e);
    }
    case N::Call: {
      const double a = eval_node(*n.args[0], x);
      if (n.fn == "abs") return std::abs(a);
      if (n.fn == "sqrt") return std::sqrt(a);
      if (n.fn == "exp") return std::exp(a);
      if (n.fn == "log") return std::log(a);
      if (n.fn == "sin") return std::sin(a);
      if (n.fn == "cos") return std::cos(a);
      if (n.fn == "pos") return a > 0.0 ? a : 0.0;
      double r = a;
      for (std::size_t i = 1; i < n.args.size(); ++i) {
        const double b = eval_node(*n.args[i], x);
        r = n.fn == "min" ? std::min(r, b) : std::max(r, b);
      }
      return r;
    }
  }
  return 0.0;
}

unsigned vars_of(const N& n) {
  unsigned m = n.kind == N::Var ? (1u << n.var) : 0u;
  for (const auto& a : n.args) m |= vars_of(*a);
  return m;
}

}  // namespace

Expression Expression::parse(const std::string& text, const std::map<std::string, double>& constants) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, constants).parse();
  return e;
}

double Expression::eval(const Point& x) const { return eval_node(*root_, x); }

unsigned Expression::variables() const noexcept { return vars_of(*root_); }

}  // namespace olab
