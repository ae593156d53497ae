#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>

#include "adp/types.hpp"

namespace adp {

// Arithmetic expressions over state variables x1..xn and control variables
// u1..um, compiled once to a postfix program. Grammar:
//
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := ('-'|'+') unary | power
//   power  := atom ('^' unary)?            (right-associative; -x^2 = -(x^2))
//   atom   := number | x<k> | u<k> | fn '(' expr ')' | '(' expr ')'
//   fn     := sin | cos | tanh | abs
class Expression {
 public:
  static Expression parse(const std::string& text, int state_dim, int control_dim) {
    Parser p{text, 0, state_dim, control_dim};
    Expression e;
    e.text_ = text;
    p.expr(e.code_);
    p.skip_ws();
    if (p.pos != text.size())
      throw config_error("expression '" + text + "': unexpected input at position " +
                         std::to_string(p.pos));
    int depth = 0;
    e.max_depth_ = 0;
    for (const Instr& in : e.code_) {
      depth += (in.op <= Op::push_control) ? 1 : (is_binary(in.op) ? -1 : 0);
      e.max_depth_ = std::max(e.max_depth_, depth);
    }
    if (e.max_depth_ > kStackSize)
      throw config_error("expression '" + text + "': too deeply nested");
    return e;
  }

  double eval(const Vec& x, const Vec& u) const {
    double stack[kStackSize];
    int top = -1;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::push_const: stack[++top] = in.value; break;
        case Op::push_state: stack[++top] = x[in.index]; break;
        case Op::push_control: stack[++top] = u[in.index]; break;
        case Op::add: --top; stack[top] += stack[top + 1]; break;
        case Op::sub: --top; stack[top] -= stack[top + 1]; break;
        case Op::mul: --top; stack[top] *= stack[top + 1]; break;
        case Op::div: --top; stack[top] /= stack[top + 1]; break;
        case Op::pow_: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
        case Op::neg: stack[top] = -stack[top]; break;
        case Op::sin_: stack[top] = std::sin(stack[top]); break;
        case Op::cos_: stack[top] = std::cos(stack[top]); break;
        case Op::tanh_: stack[top] = std::tanh(stack[top]); break;
        case Op::abs_: stack[top] = std::abs(stack[top]); break;
      }
    }
    return stack[0];
  }

  const std::string& text() const { return text_; }

 private:
  enum class Op : std::uint8_t {
    push_const,
    push_state,
    push_control,
    add,
    sub,
    mul,
    div,
    pow_,
    neg,
    sin_,
    cos_,
    tanh_,
    abs_
  };
  struct Instr {
    Op op;
    double value = 0.0;
    int index = 0;
  };
  static constexpr int kStackSize = 64;

  static bool is_binary(Op op) {
    return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div || op == Op::pow_;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;
    int n, m;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
      throw config_error("expression '" + s + "': " + what + " at position " + std::to_string(pos));
    }

    void expr(std::vector<Instr>& code) {
      term(code);
      while (true) {
        if (accept('+')) {
          term(code);
          code.push_back({Op::add});
        } else if (accept('-')) {
          term(code);
          code.push_back({Op::sub});
        } else {
          return;
        }
      }
    }

    void term(std::vector<Instr>& code) {
      unary(code);
      while (true) {
        if (accept('*')) {
          unary(code);
          code.push_back({Op::mul});
        } else if (accept('/')) {
          unary(code);
          code.push_back({Op::div});
        } else {
          return;
        }
      }
    }

    void unary(std::vector<Instr>& code) {
      if (accept('-')) {
        unary(code);
        code.push_back({Op::neg});
        return;
      }
      if (accept('+')) {
        unary(code);
        return;
      }
      power(code);
    }

    void power(std::vector<Instr>& code) {
      atom(code);
      if (accept('^')) {
        unary(code);
        code.push_back({Op::pow_});
      }
    }

    void atom(std::vector<Instr>& code) {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        char* end = nullptr;
        const double v = std::strtod(s.c_str() + pos, &end);
        if (end == s.c_str() + pos) fail("bad number");
        pos = static_cast<std::size_t>(end - s.c_str());
        code.push_back({Op::push_const, v});
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
          ++pos;
        const std::string name = s.substr(start, pos - start);
        if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u') &&
            std::isdigit(static_cast<unsigned char>(name[1]))) {
          const int idx = std::atoi(name.c_str() + 1) - 1;
          const int limit = name[0] == 'x' ? n : m;
          if (idx < 0 || idx >= limit)
            throw config_error("expression '" + s + "': variable '" + name + "' out of range");
          code.push_back({name[0] == 'x' ? Op::push_state : Op::push_control, 0.0, idx});
          return;
        }
        Op fn;
        if (name == "sin") fn = Op::sin_;
        else if (name == "cos") fn = Op::cos_;
        else if (name == "tanh") fn = Op::tanh_;
        else if (name == "abs") fn = Op::abs_;
        else throw config_error("expression '" + s + "': unknown identifier '" + name + "'");
        if (!accept('(')) fail("expected '(' after function name");
        expr(code);
        if (!accept(')')) fail("expected ')'");
        code.push_back({fn});
        return;
      }
      if (accept('(')) {
        expr(code);
        if (!accept(')')) fail("expected ')'");
        return;
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  std::vector<Instr> code_;
  std::string text_;
  int max_depth_ = 0;
};

}  // namespace adp
