#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gossip/formula.hpp"

namespace gossip {

// A protocol is a named family of call conditions, one formula per ordered
// pair of distinct agents. Built-ins are symmetric by construction.
struct Protocol {
  std::string name;
  std::function<FormulaPtr(Agent x, Agent y, int n)> condition;
  bool finite = false;  // every permitted sequence is finite (cmo, lns)

  FormulaPtr condition_for(Agent x, Agent y, int n) const { return condition(x, y, n); }
};

inline Protocol protocol_any() {
  return Protocol{"any", [](Agent, Agent, int) { return f_top(); }, false};
}

// Call me once: the pair may not have talked before, in either direction.
inline Protocol protocol_cmo() {
  return Protocol{"cmo",
                  [](Agent x, Agent y, int) { return f_and(f_not(f_called(x, y)), f_not(f_called(y, x))); },
                  true};
}

// Learn new secrets: the caller does not know the callee's secret yet.
inline Protocol protocol_lns() {
  return Protocol{"lns", [](Agent x, Agent y, int) { return f_not(f_secret(x, y)); }, true};
}

// Possible information growth: the caller considers it possible that the
// call teaches one of the two parties something.
inline Protocol protocol_pig() {
  return Protocol{"pig",
                  [](Agent x, Agent y, int n) {
                    std::vector<FormulaPtr> diffs;
                    for (Agent c = 0; c < n; ++c) {
                      diffs.push_back(f_or(f_and(f_secret(x, c), f_not(f_secret(y, c))),
                                           f_and(f_not(f_secret(x, c)), f_secret(y, c))));
                    }
                    return f_khat(x, f_or_all(diffs));
                  },
                  false};
}

inline std::optional<Protocol> protocol_by_name(const std::string& name) {
  if (name == "any") return protocol_any();
  if (name == "cmo") return protocol_cmo();
  if (name == "pig") return protocol_pig();
  if (name == "lns") return protocol_lns();
  return std::nullopt;
}

struct ProtocolRejection {
  std::string reason;
  std::string offending;  // repr of the offending subformula or instance
};

namespace detail {
inline const Formula* find_protocol_ref(const FormulaPtr& f) {
  if (f->kind == Fk::ProtocolRef) return f.get();
  if (f->lhs)
    if (const Formula* r = find_protocol_ref(f->lhs)) return r;
  if (f->rhs)
    if (const Formula* r = find_protocol_ref(f->rhs)) return r;
  return nullptr;
}
}  // namespace detail

// Accepts a protocol iff its conditions are well-founded (no reference to
// the protocol's own permission predicate) and symmetric: renaming the pair
// (x,y) to (u,v), together with any bijection on the remaining agents,
// turns the condition for (x,y) into the condition for (u,v).
inline std::optional<ProtocolRejection> validate_protocol(const Protocol& p, int n) {
  if (n < 2) return ProtocolRejection{"need at least two agents", ""};
  for (Agent x = 0; x < n; ++x)
    for (Agent y = 0; y < n; ++y) {
      if (x == y) continue;
      FormulaPtr c = p.condition_for(x, y, n);
      if (const Formula* r = detail::find_protocol_ref(c))
        return ProtocolRejection{"self-referential condition", r->repr};
    }

  FormulaPtr base = normalize(p.condition_for(0, 1, n));
  for (Agent u = 0; u < n; ++u)
    for (Agent v = 0; v < n; ++v) {
      if (u == v) continue;
      std::vector<Agent> perm(n, -1);
      perm[0] = u;
      perm[1] = v;
      Agent next = 0;
      for (Agent a = 2; a < n; ++a) {
        while (next == u || next == v) ++next;
        perm[a] = next++;
      }
      FormulaPtr renamed = normalize(rename_agents(p.condition_for(0, 1, n), perm));
      FormulaPtr direct = normalize(p.condition_for(u, v, n));
      if (!same_formula(renamed, direct))
        return ProtocolRejection{"asymmetric condition", direct->repr};
      (void)base;
    }
  return std::nullopt;
}

}  // namespace gossip
