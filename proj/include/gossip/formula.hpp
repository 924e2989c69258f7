#pragma once

#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gossip/core.hpp"

namespace gossip {

struct Formula;
struct Program;
using FormulaPtr = std::shared_ptr<const Formula>;
using ProgramPtr = std::shared_ptr<const Program>;

// How a knowledge operator picks its accessibility relation.
//   Contextual: the relation of the evaluation context (protocol-dependent
//               knowledge under the known/engaged/skip variants).
//   PlainOnly:  always the unrestricted relation, whatever the context.
enum class KnowsScope : int8_t { Contextual, PlainOnly };

// Core connectives only; or/implies/dual-knowledge/expert shorthands are
// expanded structurally by the builders and the parser.
enum class Fk : int8_t { Top, Secret, Called, Not, And, Knows, Box, ProtocolRef };

struct Formula {
  Fk kind;
  Agent x = -1, y = -1;
  FormulaPtr lhs, rhs;  // Not/Knows use lhs; And uses both
  ProgramPtr prog;      // Box
  KnowsScope scope = KnowsScope::Contextual;
  std::string repr;  // canonical text, used for caching and comparison
};

enum class Pk : int8_t { Test, Call, SkipP, Seq, Choice, Star };

struct Program {
  Pk kind;
  FormulaPtr test;       // Test
  Event event;           // Call
  ProgramPtr lhs, rhs;   // Seq/Choice use both, Star uses lhs
  std::string repr;
};

namespace detail {
inline FormulaPtr mk(Formula f);
inline ProgramPtr mkp(Program p);
}  // namespace detail

inline std::string program_repr(const ProgramPtr& p) { return p->repr; }

// ---- builders ---------------------------------------------------------

inline FormulaPtr f_top() {
  static FormulaPtr t = detail::mk(Formula{Fk::Top, -1, -1, {}, {}, {}, KnowsScope::Contextual, "top"});
  return t;
}

inline FormulaPtr f_secret(Agent x, Agent y) {
  Formula f{Fk::Secret, x, y, {}, {}, {}, KnowsScope::Contextual, {}};
  f.repr = std::string("S(") + agent_letter(x) + "," + agent_letter(y) + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_called(Agent x, Agent y) {
  Formula f{Fk::Called, x, y, {}, {}, {}, KnowsScope::Contextual, {}};
  f.repr = std::string("C(") + agent_letter(x) + "," + agent_letter(y) + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_not(FormulaPtr a) {
  Formula f{Fk::Not, -1, -1, std::move(a), {}, {}, KnowsScope::Contextual, {}};
  f.repr = "~(" + f.lhs->repr + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_bot() { return f_not(f_top()); }

inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  Formula f{Fk::And, -1, -1, std::move(a), std::move(b), {}, KnowsScope::Contextual, {}};
  f.repr = "(" + f.lhs->repr + "&" + f.rhs->repr + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) { return f_not(f_and(f_not(a), f_not(b))); }
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) { return f_not(f_and(std::move(a), f_not(b))); }

inline FormulaPtr f_knows(Agent a, FormulaPtr phi, KnowsScope scope = KnowsScope::Contextual) {
  Formula f{Fk::Knows, a, -1, std::move(phi), {}, {}, scope, {}};
  f.repr = std::string(scope == KnowsScope::PlainOnly ? "K0(" : "K(") + agent_letter(a) + "," + f.lhs->repr + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_khat(Agent a, FormulaPtr phi, KnowsScope scope = KnowsScope::Contextual) {
  return f_not(f_knows(a, f_not(std::move(phi)), scope));
}

inline FormulaPtr f_box(ProgramPtr p, FormulaPtr phi) {
  Formula f{Fk::Box, -1, -1, std::move(phi), {}, std::move(p), KnowsScope::Contextual, {}};
  f.repr = "[" + f.prog->repr + "](" + f.lhs->repr + ")";
  return detail::mk(std::move(f));
}

// Placeholder for a protocol condition referring to the protocol being
// defined. Never evaluable; validate_protocol rejects templates using it.
inline FormulaPtr f_protocol_ref(Agent x, Agent y) {
  Formula f{Fk::ProtocolRef, x, y, {}, {}, {}, KnowsScope::Contextual, {}};
  f.repr = std::string("P(") + agent_letter(x) + "," + agent_letter(y) + ")";
  return detail::mk(std::move(f));
}

inline FormulaPtr f_and_all(const std::vector<FormulaPtr>& fs) {
  if (fs.empty()) return f_top();
  FormulaPtr acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = f_and(fs[i], acc);
  return acc;
}

inline FormulaPtr f_or_all(const std::vector<FormulaPtr>& fs) {
  if (fs.empty()) return f_bot();
  FormulaPtr acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = f_or(fs[i], acc);
  return acc;
}

// Exp_x: x knows every secret.
inline FormulaPtr f_exp(Agent x, int n) {
  std::vector<FormulaPtr> conj;
  for (Agent y = 0; y < n; ++y) conj.push_back(f_secret(x, y));
  return f_and_all(conj);
}

// Everyone is an expert.
inline FormulaPtr f_expall(int n) {
  std::vector<FormulaPtr> conj;
  for (Agent x = 0; x < n; ++x) conj.push_back(f_exp(x, n));
  return f_and_all(conj);
}

// Everyone knows that everyone is an expert (everyone is a super expert).
inline FormulaPtr f_eexpall(int n, KnowsScope scope = KnowsScope::Contextual) {
  std::vector<FormulaPtr> conj;
  for (Agent x = 0; x < n; ++x) conj.push_back(f_knows(x, f_expall(n), scope));
  return f_and_all(conj);
}

// ---- programs ---------------------------------------------------------

inline ProgramPtr p_test(FormulaPtr f) {
  Program p{Pk::Test, std::move(f), Event::skip(), {}, {}, {}};
  p.repr = "?" + p.test->repr;
  return detail::mkp(std::move(p));
}

inline ProgramPtr p_call(Agent x, Agent y) {
  Program p{Pk::Call, {}, Event::call(x, y), {}, {}, {}};
  p.repr = p.event.str();
  return detail::mkp(std::move(p));
}

inline ProgramPtr p_skip() {
  Program p{Pk::SkipP, {}, Event::skip(), {}, {}, {}};
  p.repr = "skip";
  return detail::mkp(std::move(p));
}

inline ProgramPtr p_seq(ProgramPtr a, ProgramPtr b) {
  Program p{Pk::Seq, {}, Event::skip(), std::move(a), std::move(b), {}};
  p.repr = "(" + p.lhs->repr + ";" + p.rhs->repr + ")";
  return detail::mkp(std::move(p));
}

inline ProgramPtr p_choice(ProgramPtr a, ProgramPtr b) {
  Program p{Pk::Choice, {}, Event::skip(), std::move(a), std::move(b), {}};
  p.repr = "(" + p.lhs->repr + "+" + p.rhs->repr + ")";
  return detail::mkp(std::move(p));
}

inline ProgramPtr p_star(ProgramPtr a) {
  Program p{Pk::Star, {}, Event::skip(), std::move(a), {}, {}};
  p.repr = "(" + p.lhs->repr + ")*";
  return detail::mkp(std::move(p));
}

namespace detail {
inline FormulaPtr mk(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
inline ProgramPtr mkp(Program p) { return std::make_shared<const Program>(std::move(p)); }
}  // namespace detail

// ---- structural helpers -----------------------------------------------

inline bool same_formula(const FormulaPtr& a, const FormulaPtr& b) { return a->repr == b->repr; }

inline bool program_has_event(const ProgramPtr& p) {
  switch (p->kind) {
    case Pk::Call:
    case Pk::SkipP: return true;
    case Pk::Test: return false;
    case Pk::Star: return program_has_event(p->lhs);
    default: return program_has_event(p->lhs) || program_has_event(p->rhs);
  }
}

inline void collect_agents(const FormulaPtr& f, AgentSet& out) {
  if (f->x >= 0) out.insert(f->x);
  if (f->y >= 0) out.insert(f->y);
  if (f->lhs) collect_agents(f->lhs, out);
  if (f->rhs) collect_agents(f->rhs, out);
  // programs in protocol templates are not expected, but be thorough
  if (f->prog) {
    if (!f->prog->event.is_skip()) {
      out.insert(f->prog->event.caller());
      out.insert(f->prog->event.callee());
    }
    if (f->prog->test) collect_agents(f->prog->test, out);
  }
}

inline bool contains_protocol_ref(const FormulaPtr& f) {
  if (f->kind == Fk::ProtocolRef) return true;
  if (f->lhs && contains_protocol_ref(f->lhs)) return true;
  if (f->rhs && contains_protocol_ref(f->rhs)) return true;
  return false;
}

inline bool contains_knows(const FormulaPtr& f) {
  if (f->kind == Fk::Knows) return true;
  if (f->lhs && contains_knows(f->lhs)) return true;
  if (f->rhs && contains_knows(f->rhs)) return true;
  return false;
}

// Propositional over secret/call atoms: state-collapse engines apply.
inline bool is_propositional(const FormulaPtr& f) {
  switch (f->kind) {
    case Fk::Top: return true;
    case Fk::Secret:
    case Fk::Called: return true;
    case Fk::Not: return is_propositional(f->lhs);
    case Fk::And: return is_propositional(f->lhs) && is_propositional(f->rhs);
    default: return false;
  }
}

inline bool mentions_called_atom(const FormulaPtr& f) {
  if (f->kind == Fk::Called) return true;
  if (f->lhs && mentions_called_atom(f->lhs)) return true;
  if (f->rhs && mentions_called_atom(f->rhs)) return true;
  return false;
}

// Simultaneous agent renaming (used by the protocol symmetry check).
inline FormulaPtr rename_agents(const FormulaPtr& f, const std::vector<Agent>& perm) {
  auto m = [&](Agent a) { return a < 0 ? a : perm.at(a); };
  switch (f->kind) {
    case Fk::Top: return f;
    case Fk::Secret: return f_secret(m(f->x), m(f->y));
    case Fk::Called: return f_called(m(f->x), m(f->y));
    case Fk::Not: return f_not(rename_agents(f->lhs, perm));
    case Fk::And: return f_and(rename_agents(f->lhs, perm), rename_agents(f->rhs, perm));
    case Fk::Knows: return f_knows(m(f->x), rename_agents(f->lhs, perm), f->scope);
    case Fk::ProtocolRef: return f_protocol_ref(m(f->x), m(f->y));
    case Fk::Box: throw std::invalid_argument("rename_agents: box programs unsupported in templates");
  }
  throw std::logic_error("rename_agents: bad kind");
}

namespace detail {
inline void flatten_and(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->kind == Fk::And) {
    flatten_and(f->lhs, out);
    flatten_and(f->rhs, out);
  } else {
    out.push_back(f);
  }
}
inline void sort_dedupe(std::vector<FormulaPtr>& parts) {
  std::sort(parts.begin(), parts.end(), [](const FormulaPtr& a, const FormulaPtr& b) { return a->repr < b->repr; });
  parts.erase(std::unique(parts.begin(), parts.end(),
                          [](const FormulaPtr& a, const FormulaPtr& b) { return a->repr == b->repr; }),
              parts.end());
}
}  // namespace detail

// Canonical form modulo double negation and conjunction/disjunction order
// (disjunctions appear as ~(~a & ~b)). Only used for structural comparison.
inline FormulaPtr normalize(const FormulaPtr& f) {
  switch (f->kind) {
    case Fk::Top:
    case Fk::Secret:
    case Fk::Called:
    case Fk::ProtocolRef: return f;
    case Fk::Knows: return f_knows(f->x, normalize(f->lhs), f->scope);
    case Fk::Box: return f;
    case Fk::Not: {
      FormulaPtr inner = normalize(f->lhs);
      if (inner->kind == Fk::Not) return inner->lhs;
      if (inner->kind == Fk::And) {
        std::vector<FormulaPtr> parts;
        detail::flatten_and(inner, parts);
        bool all_negated = std::all_of(parts.begin(), parts.end(),
                                       [](const FormulaPtr& p) { return p->kind == Fk::Not; });
        if (all_negated) {  // a disjunction: sort its terms
          std::vector<FormulaPtr> terms;
          for (const FormulaPtr& p : parts) terms.push_back(p->lhs);
          detail::sort_dedupe(terms);
          std::vector<FormulaPtr> negs;
          for (const FormulaPtr& t : terms) negs.push_back(f_not(t));
          return f_not(f_and_all(negs));
        }
      }
      return f_not(inner);
    }
    case Fk::And: {
      std::vector<FormulaPtr> raw, parts;
      detail::flatten_and(f, raw);
      for (const FormulaPtr& g : raw) parts.push_back(normalize(g));
      detail::sort_dedupe(parts);
      return f_and_all(parts);
    }
  }
  throw std::logic_error("normalize: bad kind");
}

// ---- parser ------------------------------------------------------------
//
// Formulas: top, bot, S(a,b), C(a,b), ~f, f & g, f | g, f -> g,
//           K(a, f), Khat(a, f), [p] f, Exp(a), ExpAll, EExpAll.
// Precedence: ~ > & > | > ->.  Programs: ?f, ab, skip, p ; q, p + q, p*.

class FormulaParser {
 public:
  FormulaParser(std::string_view text, int n) : text_(text), n_(n) {}

  FormulaPtr parse_formula() {
    FormulaPtr f = implication();
    ws();
    if (pos_ != text_.size()) throw parse_error("unexpected trailing input in formula", pos_);
    return f;
  }

  ProgramPtr parse_program() {
    ProgramPtr p = choice();
    ws();
    if (pos_ != text_.size()) throw parse_error("unexpected trailing input in program", pos_);
    return p;
  }

 private:
  std::string_view text_;
  int n_;
  size_t pos_ = 0;

  void ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool eat_word(std::string_view w) {
    ws();
    if (text_.compare(pos_, w.size(), w) == 0) {
      size_t after = pos_ + w.size();
      if (after < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[after])))) return false;
      pos_ = after;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) throw parse_error(std::string("expected '") + c + "'", pos_);
  }
  Agent agent_arg() {
    ws();
    if (pos_ >= text_.size() || text_[pos_] < 'a' || text_[pos_] > 'z')
      throw parse_error("expected agent letter", pos_);
    Agent a = agent_from_letter(text_[pos_]);
    if (a >= n_) throw parse_error("agent out of range", pos_);
    ++pos_;
    return a;
  }

  FormulaPtr implication() {
    FormulaPtr l = disjunction();
    ws();
    if (pos_ + 1 < text_.size() && text_[pos_] == '-' && text_[pos_ + 1] == '>') {
      pos_ += 2;
      return f_implies(l, implication());
    }
    return l;
  }
  FormulaPtr disjunction() {
    FormulaPtr l = conjunction();
    while (true) {
      ws();
      if (pos_ < text_.size() && text_[pos_] == '|') {
        ++pos_;
        l = f_or(l, conjunction());
      } else {
        return l;
      }
    }
  }
  FormulaPtr conjunction() {
    FormulaPtr l = unary();
    while (true) {
      ws();
      if (pos_ < text_.size() && text_[pos_] == '&') {
        ++pos_;
        l = f_and(l, unary());
      } else {
        return l;
      }
    }
  }
  FormulaPtr unary() {
    ws();
    if (eat('~')) return f_not(unary());
    if (eat('[')) {
      ProgramPtr p = choice();
      expect(']');
      return f_box(p, unary());
    }
    return atom();
  }
  FormulaPtr atom() {
    ws();
    if (eat_word("top")) return f_top();
    if (eat_word("bot")) return f_bot();
    if (eat_word("ExpAll")) return f_expall(n_);
    if (eat_word("EExpAll")) return f_eexpall(n_);
    if (eat_word("Exp")) {
      expect('(');
      Agent a = agent_arg();
      expect(')');
      return f_exp(a, n_);
    }
    if (eat_word("S")) {
      expect('(');
      Agent a = agent_arg();
      expect(',');
      Agent b = agent_arg();
      expect(')');
      return f_secret(a, b);
    }
    if (eat_word("C")) {
      expect('(');
      Agent a = agent_arg();
      expect(',');
      Agent b = agent_arg();
      expect(')');
      return f_called(a, b);
    }
    if (eat_word("Khat")) {
      expect('(');
      Agent a = agent_arg();
      expect(',');
      FormulaPtr f = implication();
      expect(')');
      return f_khat(a, f);
    }
    if (eat_word("K")) {
      expect('(');
      Agent a = agent_arg();
      expect(',');
      FormulaPtr f = implication();
      expect(')');
      return f_knows(a, f);
    }
    if (eat('(')) {
      FormulaPtr f = implication();
      expect(')');
      return f;
    }
    throw parse_error("expected formula", pos_);
  }

  ProgramPtr choice() {
    ProgramPtr l = sequence();
    while (true) {
      ws();
      if (pos_ < text_.size() && text_[pos_] == '+') {
        ++pos_;
        l = p_choice(l, sequence());
      } else {
        return l;
      }
    }
  }
  ProgramPtr sequence() {
    ProgramPtr l = starred();
    while (true) {
      ws();
      if (pos_ < text_.size() && text_[pos_] == ';') {
        ++pos_;
        l = p_seq(l, starred());
      } else {
        return l;
      }
    }
  }
  ProgramPtr starred() {
    ProgramPtr p = primary();
    while (eat('*')) p = p_star(p);
    return p;
  }
  ProgramPtr primary() {
    ws();
    if (eat('?')) return p_test(unary());
    if (eat('(')) {
      ProgramPtr p = choice();
      expect(')');
      return p;
    }
    if (eat_word("skip")) return p_skip();
    Agent a = agent_arg();
    Agent b = agent_arg();
    if (a == b) throw parse_error("caller equals callee", pos_);
    return p_call(a, b);
  }
};

inline FormulaPtr parse_formula(std::string_view text, int n) { return FormulaParser(text, n).parse_formula(); }
inline ProgramPtr parse_program(std::string_view text, int n) { return FormulaParser(text, n).parse_program(); }

}  // namespace gossip
