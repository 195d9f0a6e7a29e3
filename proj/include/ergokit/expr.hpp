#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "ergokit/model.hpp"

namespace ergokit {

/// Arithmetic expressions in the state variables, used for V, W and costs in
/// configs: numbers, x (1-D only), x1..x9, + - * / ^, tanh, exp, abs and
/// parentheses. `z` is accepted as an alias of `x`.
class Expression {
public:
  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    auto root = p.expr();
    p.skip();
    if (p.pos != text.size())
      throw ContractViolation("expression: unexpected '" + text.substr(p.pos) + "' in \"" + text + "\"");
    Expression e;
    e.root_ = std::move(root);
    e.text_ = text;
    e.max_index_ = p.max_index;
    e.uses_plain_x_ = p.plain_x;
    return e;
  }

  const std::string& text() const { return text_; }
  /// Largest state index referenced (1-based), 0 for constants.
  int max_index() const { return max_index_; }

  /// Throws unless the expression is meaningful in `dim` state dimensions.
  void check_dim(int dim) const {
    if (uses_plain_x_ && dim != 1)
      throw ContractViolation("expression \"" + text_ + "\": use x1, x2 for multi-dimensional states");
    if (max_index_ > dim)
      throw ContractViolation("expression \"" + text_ + "\" references x" + std::to_string(max_index_) +
                              " in a " + std::to_string(dim) + "-dimensional state");
  }

  double operator()(const Vec& x) const { return root_->eval(x).first; }
  Vec grad(const Vec& x) const { return root_->eval(x).second; }

private:
  using Value = std::pair<double, Vec>;  // value and gradient

  struct Node {
    enum class Op { constant, variable, add, sub, mul, div, pow, neg, tanh, exp, abs };
    Op op = Op::constant;
    double number = 0.0;
    int index = 0;
    std::shared_ptr<const Node> a, b;

    Value eval(const Vec& x) const {
      const auto n = x.size();
      switch (op) {
        case Op::constant:
          return {number, Vec::Zero(n)};
        case Op::variable: {
          Vec g = Vec::Zero(n);
          g(index) = 1.0;
          return {x(index), g};
        }
        case Op::neg: {
          auto [v, g] = a->eval(x);
          return {-v, -g};
        }
        case Op::tanh: {
          auto [v, g] = a->eval(x);
          const double t = std::tanh(v);
          return {t, (1.0 - t * t) * g};
        }
        case Op::exp: {
          auto [v, g] = a->eval(x);
          const double e = std::exp(v);
          return {e, e * g};
        }
        case Op::abs: {
          auto [v, g] = a->eval(x);
          const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
          return {std::abs(v), s * g};
        }
        default:
          break;
      }
      auto [u, gu] = a->eval(x);
      auto [w, gw] = b->eval(x);
      switch (op) {
        case Op::add: return {u + w, gu + gw};
        case Op::sub: return {u - w, gu - gw};
        case Op::mul: return {u * w, w * gu + u * gw};
        case Op::div: return {u / w, (gu * w - u * gw) / (w * w)};
        case Op::pow: {
          const double p = std::pow(u, w);
          Vec g = w * std::pow(u, w - 1.0) * gu;
          if (gw.cwiseAbs().maxCoeff() > 0.0) g += p * std::log(u) * gw;
          return {p, g};
        }
        default:
          return {0.0, Vec::Zero(n)};
      }
    }
  };
  using NodePtr = std::shared_ptr<const Node>;

  static NodePtr make(Node::Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;
    int max_index = 0;
    bool plain_x = false;

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string& what) {
      throw ContractViolation("expression \"" + s + "\": " + what + " at offset " + std::to_string(pos));
    }

    NodePtr expr() {
      NodePtr lhs = term();
      for (;;) {
        if (eat('+')) lhs = make(Node::Op::add, lhs, term());
        else if (eat('-')) lhs = make(Node::Op::sub, lhs, term());
        else return lhs;
      }
    }
    NodePtr term() {
      NodePtr lhs = unary();
      for (;;) {
        if (eat('*')) lhs = make(Node::Op::mul, lhs, unary());
        else if (eat('/')) lhs = make(Node::Op::div, lhs, unary());
        else return lhs;
      }
    }
    NodePtr unary() {
      if (eat('-')) return make(Node::Op::neg, unary());
      if (eat('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (eat('^')) return make(Node::Op::pow, base, unary());
      return base;
    }
    NodePtr primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end");
      if (eat('(')) {
        NodePtr e = expr();
        if (!eat(')')) fail("missing ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        auto n = std::make_shared<Node>();
        n->number = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t end = pos;
        while (end < s.size() && std::isalnum(static_cast<unsigned char>(s[end]))) ++end;
        const std::string word = s.substr(pos, end - pos);
        pos = end;
        if (word == "x" || word == "z") {
          plain_x = true;
          max_index = std::max(max_index, 1);
          auto n = std::make_shared<Node>();
          n->op = Node::Op::variable;
          return n;
        }
        if (word.size() >= 2 && (word[0] == 'x' || word[0] == 'z') &&
            word.find_first_not_of("0123456789", 1) == std::string::npos) {
          const int idx = std::stoi(word.substr(1));
          if (idx < 1) fail("variable indices start at 1");
          max_index = std::max(max_index, idx);
          auto n = std::make_shared<Node>();
          n->op = Node::Op::variable;
          n->index = idx - 1;
          return n;
        }
        Node::Op op;
        if (word == "tanh") op = Node::Op::tanh;
        else if (word == "exp") op = Node::Op::exp;
        else if (word == "abs") op = Node::Op::abs;
        else fail("unknown identifier '" + word + "'");
        if (!eat('(')) fail("expected '(' after " + word);
        NodePtr arg = expr();
        if (!eat(')')) fail("missing ')'");
        return make(op, arg);
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  NodePtr root_;
  std::string text_;
  int max_index_ = 0;
  bool uses_plain_x_ = false;
};

}  // namespace ergokit
