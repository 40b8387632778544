#pragma once

// SMT-LIB 2 reader for the QF_FP fragment handled by the solver, plus the
// matching printers for formulas and models.

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "formula.hpp"
#include "normalize.hpp"

namespace ulpsolve {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class UnsupportedFeature : public std::runtime_error {
 public:
  explicit UnsupportedFeature(std::string symbol)
      : std::runtime_error("unsupported feature: " + symbol), symbol_(std::move(symbol)) {}
  const std::string& symbol() const noexcept { return symbol_; }

 private:
  std::string symbol_;
};

/// Result of reading a script: the normalized formula plus the commands seen.
struct Script {
  Formula formula;
  BoolExpr asserted;  // conjunction of all asserts, before normalization
  std::vector<std::string> commands;
  std::optional<std::string> logic;
};

namespace sexp {

struct Node {
  enum class Kind : std::uint8_t { Symbol, Numeral, Decimal, Binary, Hex, String, List };
  Kind kind = Kind::List;
  std::string text;
  std::vector<Node> items;
  int line = 0;
  int column = 0;

  bool is_symbol(std::string_view s) const { return kind == Kind::Symbol && text == s; }
  bool is_list() const { return kind == Kind::List; }
};

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  /// Next top-level expression; nullopt at end of input.
  std::optional<Node> next() {
    skip_ws();
    if (pos_ >= src_.size()) return std::nullopt;
    return read();
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }

  char peek() const { return src_[pos_]; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == ';') {
        while (pos_ < src_.size() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  static bool is_symbol_char(char c) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
    return std::string_view("~!@$%^&*_-+=<>.?/").find(c) != std::string_view::npos;
  }

  Node read() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    Node n;
    n.line = line_;
    n.column = col_;
    const char c = peek();
    if (c == '(') {
      advance();
      n.kind = Node::Kind::List;
      for (;;) {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unbalanced parenthesis", n.line, n.column);
        if (peek() == ')') {
          advance();
          break;
        }
        n.items.push_back(read());
      }
      return n;
    }
    if (c == ')') fail("unexpected ')'");
    if (c == '"') {
      advance();
      n.kind = Node::Kind::String;
      for (;;) {
        if (pos_ >= src_.size()) throw ParseError("unterminated string", n.line, n.column);
        if (peek() == '"') {
          advance();
          if (pos_ < src_.size() && peek() == '"') {
            n.text += '"';
            advance();
            continue;
          }
          break;
        }
        n.text += peek();
        advance();
      }
      return n;
    }
    if (c == '|') {
      advance();
      n.kind = Node::Kind::Symbol;
      while (pos_ < src_.size() && peek() != '|') {
        n.text += peek();
        advance();
      }
      if (pos_ >= src_.size()) throw ParseError("unterminated quoted symbol", n.line, n.column);
      advance();
      return n;
    }
    if (c == '#') {
      advance();
      if (pos_ >= src_.size()) fail("bad literal");
      const char base = peek();
      if (base != 'b' && base != 'x') fail("bad literal");
      advance();
      n.kind = base == 'b' ? Node::Kind::Binary : Node::Kind::Hex;
      while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(peek()))) {
        if (base == 'b' && peek() != '0' && peek() != '1') fail("bad binary digit");
        n.text += peek();
        advance();
      }
      if (n.text.empty()) throw ParseError("empty bit-vector literal", n.line, n.column);
      return n;
    }
    if (c == ':') {
      // keyword: keep as symbol
      n.kind = Node::Kind::Symbol;
      n.text += c;
      advance();
      while (pos_ < src_.size() && is_symbol_char(peek())) {
        n.text += peek();
        advance();
      }
      return n;
    }
    if (!is_symbol_char(c)) fail(std::string("unexpected character '") + c + "'");
    while (pos_ < src_.size() && is_symbol_char(peek())) {
      n.text += peek();
      advance();
    }
    n.kind = classify(n.text);
    return n;
  }

  static Node::Kind classify(const std::string& s) {
    bool digits = !s.empty();
    int dots = 0;
    for (char ch : s) {
      if (ch == '.') {
        ++dots;
      } else if (!std::isdigit(static_cast<unsigned char>(ch))) {
        digits = false;
      }
    }
    if (digits && dots == 0) return Node::Kind::Numeral;
    if (digits && dots == 1 && s.front() != '.' && s.back() != '.') return Node::Kind::Decimal;
    return Node::Kind::Symbol;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace sexp

namespace detail {

class ScriptParser {
 public:
  Script run(std::string_view source, const NormalizeOptions& opts) {
    sexp::Reader reader(source);
    std::vector<BoolExpr> asserts;
    Script script;
    while (auto cmd = reader.next()) {
      const sexp::Node& c = *cmd;
      if (!c.is_list() || c.items.empty() || c.items[0].kind != sexp::Node::Kind::Symbol) {
        fail(c, "expected a command");
      }
      const std::string& name = c.items[0].text;
      script.commands.push_back(name);
      if (name == "set-logic") {
        if (c.items.size() != 2) fail(c, "set-logic takes one argument");
        script.logic = c.items[1].text;
      } else if (name == "set-info" || name == "set-option" || name == "check-sat" || name == "exit" ||
                 name == "get-model" || name == "get-info" || name == "get-value") {
        // recorded only
      } else if (name == "declare-fun") {
        if (c.items.size() != 4 || !c.items[2].is_list()) fail(c, "malformed declare-fun");
        if (!c.items[2].items.empty()) throw UnsupportedFeature("declare-fun with arguments");
        declare(c.items[1], c.items[3]);
      } else if (name == "declare-const") {
        if (c.items.size() != 3) fail(c, "malformed declare-const");
        declare(c.items[1], c.items[2]);
      } else if (name == "define-fun") {
        if (c.items.size() != 5 || !c.items[2].is_list()) fail(c, "malformed define-fun");
        if (!c.items[2].items.empty()) throw UnsupportedFeature("define-fun with arguments");
        define(c.items[1], c.items[3], c.items[4]);
      } else if (name == "assert") {
        if (c.items.size() != 2) fail(c, "assert takes one argument");
        asserts.push_back(parse_bool(c.items[1]));
      } else {
        throw UnsupportedFeature(name);
      }
    }
    script.asserted = boolexpr::conj(std::move(asserts));
    script.formula = normalize(script.asserted, variables_, opts);
    return script;
  }

 private:
  using Binding = std::variant<Term, BoolExpr>;

  [[noreturn]] static void fail(const sexp::Node& n, const std::string& msg) {
    throw ParseError(msg, n.line, n.column);
  }

  static std::optional<FpFormat> format_of(int eb, int sb) {
    if (eb == 8 && sb == 24) return FpFormat::Binary32;
    if (eb == 11 && sb == 53) return FpFormat::Binary64;
    return std::nullopt;
  }

  static int numeral(const sexp::Node& n) {
    if (n.kind != sexp::Node::Kind::Numeral) fail(n, "expected a numeral");
    return std::stoi(n.text);
  }

  /// (_ FloatingPoint e s) | Float32 | Float64
  static FpFormat parse_sort(const sexp::Node& n) {
    if (n.kind == sexp::Node::Kind::Symbol) {
      if (n.text == "Float32") return FpFormat::Binary32;
      if (n.text == "Float64") return FpFormat::Binary64;
      throw UnsupportedFeature("sort " + n.text);
    }
    if (n.is_list() && n.items.size() == 4 && n.items[0].is_symbol("_") && n.items[1].is_symbol("FloatingPoint")) {
      if (auto fmt = format_of(numeral(n.items[2]), numeral(n.items[3]))) return *fmt;
      throw UnsupportedFeature("(_ FloatingPoint " + n.items[2].text + " " + n.items[3].text + ")");
    }
    if (n.is_list() && !n.items.empty() && n.items[0].is_symbol("_") && n.items.size() > 1) {
      throw UnsupportedFeature(n.items[1].text);
    }
    fail(n, "malformed sort");
  }

  void declare(const sexp::Node& name, const sexp::Node& sort) {
    if (name.kind != sexp::Node::Kind::Symbol) fail(name, "expected a symbol");
    if (symbols_.count(name.text)) fail(name, "redeclaration of '" + name.text + "'");
    const FpFormat fmt = parse_sort(sort);
    const std::size_t idx = variables_.size();
    variables_.push_back({name.text, fmt});
    symbols_.emplace(name.text, term::var(idx, fmt));
  }

  void define(const sexp::Node& name, const sexp::Node& sort, const sexp::Node& body) {
    if (name.kind != sexp::Node::Kind::Symbol) fail(name, "expected a symbol");
    if (symbols_.count(name.text)) fail(name, "redeclaration of '" + name.text + "'");
    if (sort.is_symbol("Bool")) {
      symbols_.emplace(name.text, parse_bool(body));
      return;
    }
    const FpFormat fmt = parse_sort(sort);
    Term t = parse_term(body);
    if (t->format != fmt) fail(body, "definition body does not match declared sort");
    symbols_.emplace(name.text, std::move(t));
  }

  const Binding* lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      if (auto f = it->find(name); f != it->end()) return &f->second;
    }
    if (auto f = symbols_.find(name); f != symbols_.end()) return &f->second;
    return nullptr;
  }

  /// (let ((x e) ...) body), with bindings inlined.
  template <class Fn>
  auto with_let(const sexp::Node& n, Fn&& body) {
    if (n.items.size() != 3 || !n.items[1].is_list()) fail(n, "malformed let");
    std::map<std::string, Binding> scope;
    for (const auto& b : n.items[1].items) {
      if (!b.is_list() || b.items.size() != 2 || b.items[0].kind != sexp::Node::Kind::Symbol) {
        fail(b, "malformed let binding");
      }
      scope.emplace(b.items[0].text, parse_any(b.items[1]));
    }
    scopes_.push_back(std::move(scope));
    struct Pop {
      std::vector<std::map<std::string, Binding>>& s;
      ~Pop() { s.pop_back(); }
    } pop{scopes_};
    return body(n.items[2]);
  }

  Binding parse_any(const sexp::Node& n) {
    if (n.kind == sexp::Node::Kind::Symbol) {
      if (const Binding* b = lookup(n.text)) return *b;
      if (n.text == "true" || n.text == "false") return boolexpr::truth(n.text == "true");
    }
    if (n.is_list() && !n.items.empty() && n.items[0].kind == sexp::Node::Kind::Symbol) {
      static const char* const bool_heads[] = {"and", "or", "not", "=>", "fp.eq", "fp.leq", "fp.lt",
                                               "fp.geq", "fp.gt"};
      const std::string& head = n.items[0].text;
      for (const char* h : bool_heads)
        if (head == h) return parse_bool(n);
      if (head == "let") {
        // decide by parsing the body both ways would double work; peek instead
        return with_let(n, [&](const sexp::Node& body) { return parse_any(body); });
      }
    }
    return parse_term(n);
  }

  static void require_rne(const sexp::Node& n) {
    if (n.kind == sexp::Node::Kind::Symbol && (n.text == "RNE" || n.text == "roundNearestTiesToEven")) return;
    if (n.kind == sexp::Node::Kind::Symbol) throw UnsupportedFeature(n.text);
    fail(n, "expected a rounding mode");
  }

  static std::uint64_t bits_of(const sexp::Node& n, int& width) {
    std::uint64_t v = 0;
    if (n.kind == sexp::Node::Kind::Binary) {
      if (n.text.size() > 64) fail(n, "bit-vector literal too wide");
      for (char c : n.text) v = (v << 1) | static_cast<std::uint64_t>(c == '1');
      width = static_cast<int>(n.text.size());
      return v;
    }
    if (n.kind == sexp::Node::Kind::Hex) {
      if (n.text.size() > 16) fail(n, "bit-vector literal too wide");
      v = std::stoull(n.text, nullptr, 16);
      width = static_cast<int>(n.text.size() * 4);
      return v;
    }
    fail(n, "expected a bit-vector literal");
  }

  /// Correctly rounded decimal conversion into `fmt`.
  static FpScalar decimal_value(const std::string& text, bool negative, FpFormat fmt, const sexp::Node& at) {
    const std::string s = (negative ? "-" : "") + text;
    char* end = nullptr;
    errno = 0;
    FpScalar v;
    if (fmt == FpFormat::Binary32) {
      v = FpScalar::from_float(std::strtof(s.c_str(), &end));
    } else {
      v = FpScalar::from_double(std::strtod(s.c_str(), &end));
    }
    if (end == nullptr || *end != '\0') fail(at, "malformed decimal '" + text + "'");
    return v;
  }

  static bool is_number_like(const sexp::Node& n) {
    if (n.kind == sexp::Node::Kind::Numeral || n.kind == sexp::Node::Kind::Decimal) return true;
    if (n.kind != sexp::Node::Kind::Symbol || n.text.empty()) return false;
    char* end = nullptr;
    std::strtod(n.text.c_str(), &end);
    const char c = n.text.front();
    return end != nullptr && *end == '\0' && (std::isdigit(static_cast<unsigned char>(c)) || c == '.');
  }

  /// ((_ to_fp e s) RNE <decimal>) or ((_ to_fp e s) <bit-vector>)
  Term parse_to_fp(const sexp::Node& n, FpFormat fmt) {
    const auto info = format_info(fmt);
    if (n.items.size() == 2) {
      int width = 0;
      const std::uint64_t bits = bits_of(n.items[1], width);
      if (width != info.width) fail(n.items[1], "bit-vector width does not match format");
      return term::constant(FpScalar::from_bits(bits, fmt));
    }
    if (n.items.size() != 3) fail(n, "malformed to_fp");
    require_rne(n.items[1]);
    const sexp::Node& arg = n.items[2];
    if (is_number_like(arg)) return term::constant(decimal_value(arg.text, false, fmt, arg));
    if (arg.is_list() && arg.items.size() == 2 && arg.items[0].is_symbol("-") && is_number_like(arg.items[1])) {
      return term::constant(decimal_value(arg.items[1].text, true, fmt, arg.items[1]));
    }
    if (arg.is_list() && !arg.items.empty() && arg.items[0].is_symbol("/")) throw UnsupportedFeature("to_fp of rational");
    throw UnsupportedFeature("to_fp conversion of a non-literal");
  }

  Term parse_term(const sexp::Node& n) {
    using K = sexp::Node::Kind;
    if (n.kind == K::Symbol) {
      if (const Binding* b = lookup(n.text)) {
        if (const Term* t = std::get_if<Term>(b)) return *t;
        fail(n, "'" + n.text + "' is boolean, expected a floating-point term");
      }
      fail(n, "unknown symbol '" + n.text + "'");
    }
    if (!n.is_list() || n.items.empty()) fail(n, "expected a floating-point term");
    const sexp::Node& head = n.items[0];

    if (head.is_list()) {
      // ((_ to_fp e s) ...)
      if (head.items.size() == 4 && head.items[0].is_symbol("_") && head.items[1].is_symbol("to_fp")) {
        const auto fmt = format_of(numeral(head.items[2]), numeral(head.items[3]));
        if (!fmt) throw UnsupportedFeature("(_ to_fp " + head.items[2].text + " " + head.items[3].text + ")");
        return parse_to_fp(n, *fmt);
      }
      if (head.items.size() >= 2 && head.items[0].is_symbol("_")) throw UnsupportedFeature(head.items[1].text);
      fail(head, "unexpected list in operator position");
    }
    if (head.is_symbol("_")) {
      // (_ +zero e s) etc.
      if (n.items.size() != 4) fail(n, "malformed indexed constant");
      const auto fmt = format_of(numeral(n.items[2]), numeral(n.items[3]));
      if (!fmt) throw UnsupportedFeature("(_ FloatingPoint " + n.items[2].text + " " + n.items[3].text + ")");
      const std::string& which = n.items[1].text;
      if (which == "+zero") return term::constant(FpScalar::from_bits(0, *fmt));
      if (which == "-zero") return term::constant(FpScalar::from_bits(sign_mask(*fmt), *fmt));
      if (which == "+oo") return term::constant(FpScalar::from_bits(infinity_bits(*fmt), *fmt));
      if (which == "-oo") return term::constant(FpScalar::from_bits(sign_mask(*fmt) | infinity_bits(*fmt), *fmt));
      if (which == "NaN") return term::constant(FpScalar::from_bits(infinity_bits(*fmt) | (infinity_bits(*fmt) >> 1), *fmt));
      throw UnsupportedFeature(which);
    }
    if (head.kind != K::Symbol) fail(head, "expected an operator");
    const std::string& op = head.text;
    if (op == "let") return with_let(n, [&](const sexp::Node& body) { return parse_term(body); });
    if (op == "fp") {
      if (n.items.size() != 4) fail(n, "fp takes three bit-vectors");
      int ws = 0, we = 0, wm = 0;
      const std::uint64_t s = bits_of(n.items[1], ws);
      const std::uint64_t e = bits_of(n.items[2], we);
      const std::uint64_t m = bits_of(n.items[3], wm);
      if (ws != 1) fail(n.items[1], "sign must be one bit");
      const auto fmt = format_of(we, wm + 1);
      if (!fmt) throw UnsupportedFeature("(_ FloatingPoint " + std::to_string(we) + " " + std::to_string(wm + 1) + ")");
      return term::constant(FpScalar::from_bits((s << (we + wm)) | (e << wm) | m, *fmt));
    }
    auto arith = [&](TermKind kind) {
      if (n.items.size() != 4) fail(n, op + " expects a rounding mode and two operands");
      require_rne(n.items[1]);
      Term l = parse_term(n.items[2]);
      Term r = parse_term(n.items[3]);
      if (l->format != r->format) fail(n, "operand sorts differ in " + op);
      return term::binary(kind, std::move(l), std::move(r));
    };
    if (op == "fp.add") return arith(TermKind::Add);
    if (op == "fp.sub") return arith(TermKind::Sub);
    if (op == "fp.mul") return arith(TermKind::Mul);
    if (op == "fp.div") return arith(TermKind::Div);
    if (op == "fp.neg") {
      if (n.items.size() != 2) fail(n, "fp.neg takes one operand");
      return term::neg(parse_term(n.items[1]));
    }
    throw UnsupportedFeature(op);
  }

  BoolExpr parse_bool(const sexp::Node& n) {
    using K = sexp::Node::Kind;
    if (n.kind == K::Symbol) {
      if (n.text == "true") return boolexpr::truth(true);
      if (n.text == "false") return boolexpr::truth(false);
      if (const Binding* b = lookup(n.text)) {
        if (const BoolExpr* e = std::get_if<BoolExpr>(b)) return *e;
        fail(n, "'" + n.text + "' is a floating-point term, expected a boolean");
      }
      fail(n, "unknown symbol '" + n.text + "'");
    }
    if (!n.is_list() || n.items.empty() || n.items[0].kind != K::Symbol) fail(n, "expected a boolean term");
    const std::string& op = n.items[0].text;
    if (op == "let") return with_let(n, [&](const sexp::Node& body) { return parse_bool(body); });
    auto args = [&]() {
      std::vector<BoolExpr> out;
      for (std::size_t i = 1; i < n.items.size(); ++i) out.push_back(parse_bool(n.items[i]));
      return out;
    };
    if (op == "and") return boolexpr::conj(args());
    if (op == "or") return boolexpr::disj(args());
    if (op == "not") {
      if (n.items.size() != 2) fail(n, "not takes one argument");
      return boolexpr::negate(parse_bool(n.items[1]));
    }
    if (op == "=>") {
      if (n.items.size() < 3) fail(n, "=> takes at least two arguments");
      auto a = args();
      // right associative: a1 => (a2 => ... => an)
      BoolExpr acc = a.back();
      for (std::size_t i = a.size() - 1; i-- > 0;) acc = boolexpr::disj({boolexpr::negate(a[i]), acc});
      return acc;
    }
    const std::pair<const char*, CmpOp> cmps[] = {{"fp.eq", CmpOp::Eq}, {"fp.leq", CmpOp::Le}, {"fp.lt", CmpOp::Lt},
                                                  {"fp.geq", CmpOp::Ge}, {"fp.gt", CmpOp::Gt}};
    for (const auto& [name, cmp] : cmps) {
      if (op != name) continue;
      if (n.items.size() < 3) fail(n, op + " takes at least two operands");
      std::vector<Term> ts;
      for (std::size_t i = 1; i < n.items.size(); ++i) ts.push_back(parse_term(n.items[i]));
      std::vector<BoolExpr> chain;
      for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        if (ts[i]->format != ts[i + 1]->format) fail(n, "operand sorts differ in " + op);
        chain.push_back(boolexpr::atom(Atom{ts[i], ts[i + 1], cmp}));
      }
      return chain.size() == 1 ? chain.front() : boolexpr::conj(std::move(chain));
    }
    throw UnsupportedFeature(op);
  }

  std::vector<Variable> variables_;
  std::unordered_map<std::string, Binding> symbols_;
  std::vector<std::map<std::string, Binding>> scopes_;
};

}  // namespace detail

inline Script parse_script(std::string_view source, const NormalizeOptions& opts = {}) {
  return detail::ScriptParser{}.run(source, opts);
}

inline Formula parse(std::string_view source, const NormalizeOptions& opts = {}) {
  return parse_script(source, opts).formula;
}

// ---------------------------------------------------------------------------
// Printing

inline std::string sort_string(FpFormat fmt) {
  const auto info = format_info(fmt);
  return "(_ FloatingPoint " + std::to_string(info.exponent_bits) + " " + std::to_string(info.significand_bits) + ")";
}

/// Prints a symbol, wrapping it in |...| when it is not a simple symbol.
inline std::string symbol_string(const std::string& name) {
  bool simple = !name.empty() && !std::isdigit(static_cast<unsigned char>(name.front()));
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    simple = simple && (std::isalnum(u) || std::string_view("~!@$%^&*_-+=<>.?/").find(c) != std::string_view::npos);
  }
  return simple ? name : "|" + name + "|";
}

inline std::string term_string(const Term& t, const std::vector<Variable>& vars) {
  switch (t->kind) {
    case TermKind::Var: return symbol_string(vars.at(t->var).name);
    case TermKind::Const: return to_string(t->value);
    case TermKind::Neg: return "(fp.neg " + term_string(t->lhs, vars) + ")";
    case TermKind::Add: return "(fp.add RNE " + term_string(t->lhs, vars) + " " + term_string(t->rhs, vars) + ")";
    case TermKind::Sub: return "(fp.sub RNE " + term_string(t->lhs, vars) + " " + term_string(t->rhs, vars) + ")";
    case TermKind::Mul: return "(fp.mul RNE " + term_string(t->lhs, vars) + " " + term_string(t->rhs, vars) + ")";
    case TermKind::Div: return "(fp.div RNE " + term_string(t->lhs, vars) + " " + term_string(t->rhs, vars) + ")";
  }
  return "?";
}

inline std::string atom_string(const Atom& a, const std::vector<Variable>& vars) {
  return "(" + std::string(cmp_name(a.op)) + " " + term_string(a.lhs, vars) + " " + term_string(a.rhs, vars) + ")";
}

inline std::string nnf_string(const Nnf& n, const std::vector<Variable>& vars) {
  if (n->kind == NnfNode::Kind::Leaf) return atom_string(n->atom, vars);
  std::string out = n->kind == NnfNode::Kind::And ? "(and" : "(or";
  for (const auto& c : n->children) out += " " + nnf_string(c, vars);
  return out + ")";
}

/// Re-emits a normalized formula as an SMT-LIB script, one assert per clause.
inline std::string emit_smtlib(const Formula& f) {
  std::ostringstream os;
  os << "(set-logic QF_FP)\n";
  for (const auto& v : f.variables) os << "(declare-fun " << symbol_string(v.name) << " () " << sort_string(v.format) << ")\n";
  if (f.is_cnf()) {
    for (const auto& clause : f.clauses) {
      if (clause.size() == 1) {
        os << "(assert " << atom_string(clause.front(), f.variables) << ")\n";
      } else {
        os << "(assert (or";
        for (const auto& a : clause) os << " " << atom_string(a, f.variables);
        os << "))\n";
      }
    }
  } else {
    os << "(assert " << nnf_string(f.nnf, f.variables) << ")\n";
  }
  os << "(check-sat)\n(exit)\n";
  return os.str();
}

/// Model block, one define-fun per variable with bit-exact fp literals.
inline std::string model_string(const Formula& f, const Assignment& a) {
  std::string out = "(model\n";
  for (std::size_t i = 0; i < f.variables.size(); ++i) {
    out += "  (define-fun " + symbol_string(f.variables[i].name) + " () " + sort_string(f.variables[i].format) + " " +
           to_string(a.values.at(i)) + ")\n";
  }
  out += ")";
  return out;
}

// ---------------------------------------------------------------------------
// Structural comparison

inline bool same_term(const Term& a, const Term& b) {
  if (a->kind != b->kind || a->format != b->format) return false;
  switch (a->kind) {
    case TermKind::Var: return a->var == b->var;
    case TermKind::Const: return a->value == b->value;
    case TermKind::Neg: return same_term(a->lhs, b->lhs);
    default: return same_term(a->lhs, b->lhs) && same_term(a->rhs, b->rhs);
  }
}

inline bool same_atom(const Atom& a, const Atom& b) {
  return a.op == b.op && same_term(a.lhs, b.lhs) && same_term(a.rhs, b.rhs);
}

inline bool same_nnf(const Nnf& a, const Nnf& b) {
  if (a->kind != b->kind || a->children.size() != b->children.size()) return false;
  if (a->kind == NnfNode::Kind::Leaf) return same_atom(a->atom, b->atom);
  for (std::size_t i = 0; i < a->children.size(); ++i)
    if (!same_nnf(a->children[i], b->children[i])) return false;
  return true;
}

inline bool structurally_equal(const Formula& a, const Formula& b) {
  if (a.variables.size() != b.variables.size() || a.is_cnf() != b.is_cnf()) return false;
  for (std::size_t i = 0; i < a.variables.size(); ++i) {
    if (a.variables[i].name != b.variables[i].name || a.variables[i].format != b.variables[i].format) return false;
  }
  if (!a.is_cnf()) return same_nnf(a.nnf, b.nnf);
  if (a.clauses.size() != b.clauses.size()) return false;
  for (std::size_t i = 0; i < a.clauses.size(); ++i) {
    if (a.clauses[i].size() != b.clauses[i].size()) return false;
    for (std::size_t j = 0; j < a.clauses[i].size(); ++j)
      if (!same_atom(a.clauses[i][j], b.clauses[i][j])) return false;
  }
  return true;
}

}  // namespace ulpsolve
