#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gossip/context.hpp"
#include "gossip/core.hpp"
#include "gossip/formula.hpp"
#include "gossip/verdict.hpp"

namespace gossip {

struct ProgramSuccessor {
  CallSequence seq;
  Verdict certain;  // Unknown when an enclosed test could not be decided
};

// Candidate sequences an agent cannot tell apart from the source sequence.
// Synchronous enumerations are exhaustive; asynchronous ones are cut at the
// bound, which `exhaustive` records.
struct IndistEnumeration {
  CallSequence source;
  Agent agent = -1;
  std::vector<CallSequence> related;  // definitely related
  std::vector<CallSequence> maybe;    // relatedness undecided at the bound
  bool exhaustive = true;
  int bound = -1;
};

struct Witness {
  CallSequence tau;
  std::vector<std::string> chain;  // one clause application per step
  FormulaPtr failed;
};

// Evaluates formulas, knowledge, permission and maximality judgments for a
// fixed context. All public entry points are memoized; instances are cheap
// to create and intended to be used single-threaded (create one per worker
// for parallel exploration, results are identical).
class Evaluator {
 public:
  struct Stats {
    uint64_t enum_nodes = 0;
    uint64_t collapse_states = 0;
    uint64_t cache_hits = 0;
    uint64_t se_evals = 0;
  };

  explicit Evaluator(EvalContext ctx) : ctx_(std::move(ctx)) {
    if (ctx_.n < 2 || ctx_.n > kMaxAgents) throw std::invalid_argument("agent count out of range");
  }

  const EvalContext& context() const { return ctx_; }
  const Stats& stats() const { return stats_; }

  // ---- formula evaluation ----------------------------------------------

  Verdict eval(const CallSequence& s, const FormulaPtr& f) {
    std::string key = s.str();
    key += '|';
    key += f->repr;
    if (auto it = eval_memo_.find(key); it != eval_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = eval_uncached(s, f);
    eval_memo_.emplace(std::move(key), v);
    return v;
  }

  std::vector<ProgramSuccessor> program_successors(const CallSequence& s, const ProgramPtr& p) {
    switch (p->kind) {
      case Pk::Test: {
        Verdict t = eval(s, p->test);
        if (t.is_false()) return {};
        return {{s, t.is_true() ? Verdict::truev() : t}};
      }
      case Pk::Call: {
        check_agent(p->event.caller());
        check_agent(p->event.callee());
        return {{s.extended(p->event), Verdict::truev()}};
      }
      case Pk::SkipP:
        return {{s.extended(Event::skip()), Verdict::truev()}};
      case Pk::Seq: {
        std::vector<ProgramSuccessor> out;
        for (const ProgramSuccessor& mid : program_successors(s, p->lhs))
          for (const ProgramSuccessor& fin : program_successors(mid.seq, p->rhs))
            merge_successor(out, {fin.seq, kand(mid.certain, fin.certain)});
        return out;
      }
      case Pk::Choice: {
        std::vector<ProgramSuccessor> out = program_successors(s, p->lhs);
        for (const ProgramSuccessor& r : program_successors(s, p->rhs)) merge_successor(out, r);
        return out;
      }
      case Pk::Star: {
        if (program_has_event(p->lhs))
          throw unsupported_program("iteration over call-containing programs is not supported: " + p->repr);
        // Event-free programs never leave the current sequence, and zero
        // iterations are always allowed.
        return {{s, Verdict::truev()}};
      }
    }
    throw std::logic_error("program_successors: bad kind");
  }

  // ---- permission and maximality ----------------------------------------

  // Protocol condition P_xy at s (the bare condition, no goal guard).
  Verdict condition_permitted(const CallSequence& s, Agent x, Agent y) {
    std::string key = s.str();
    key += '|';
    key += agent_letter(x);
    key += agent_letter(y);
    if (auto it = perm_memo_.find(key); it != perm_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = eval(s, ctx_.protocol.condition_for(x, y, ctx_.n));
    perm_memo_.emplace(std::move(key), v);
    return v;
  }

  // Whether the protocol's iteration body may take event e after s.
  Verdict call_permitted(const CallSequence& s, Event e) {
    if (e.is_skip()) {
      if (ctx_.variant != Variant::Skip) return Verdict::falsev();  // no clock ticks in this variant
      if (!s.well_shaped()) return Verdict::falsev();
      return kand(middle_test(s), knot(everyone_super_expert(s)));
    }
    check_agent(e.caller());
    check_agent(e.callee());
    if (e.caller() == e.callee()) throw std::invalid_argument("malformed event: caller equals callee");
    if (ctx_.variant == Variant::Skip && s.has_skip()) return Verdict::falsev();  // calls precede all ticks
    if (ctx_.variant != Variant::Skip && s.has_skip()) return Verdict::falsev();
    Verdict cond = condition_permitted(s, e.caller(), e.callee());
    if (ctx_.engaged_guards()) return kand(knot(is_super_expert(s, e.caller())), cond);
    return kand(knot(everyone_super_expert(s)), cond);
  }

  // Every event of s was protocol-permitted when taken.
  Verdict executable(const CallSequence& s) {
    std::string key = s.str();
    if (auto it = exec_memo_.find(key); it != exec_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = Verdict::truev();
    if (!s.empty()) {
      CallSequence pre = s.prefix(s.length() - 1);
      v = kand(executable(pre), call_permitted(pre, s.at(s.length() - 1)));
    }
    exec_memo_.emplace(std::move(key), v);
    return v;
  }

  // The relation-side conditions hold along s: under known protocols every
  // call satisfies its condition, under engaged semantics also the caller
  // was no super expert, and ticks require the tick precondition. This is
  // the notion of a permitted sequence the knowledge clauses care about;
  // a sequence failing it relates to nothing and collapses knowledge.
  Verdict relation_coherent(const CallSequence& s) {
    if (ctx_.variant == Variant::Plain) return Verdict(!s.has_skip());
    std::string key = s.str();
    if (auto it = coherent_memo_.find(key); it != coherent_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = Verdict::truev();
    if (!s.empty()) {
      CallSequence pre = s.prefix(s.length() - 1);
      v = relation_coherent(pre);
      if (!v.is_false()) {
        Event e = s.at(s.length() - 1);
        Verdict step;
        if (e.is_skip()) {
          step = (ctx_.variant == Variant::Skip && pre.well_shaped()) ? middle_test(pre) : Verdict::falsev();
        } else if (ctx_.variant == Variant::Skip && pre.has_skip()) {
          step = Verdict::falsev();
        } else {
          step = condition_permitted(pre, e.caller(), e.callee());
          if (ctx_.engaged_guards()) step = kand(knot(is_super_expert(pre, e.caller())), step);
        }
        v = kand(v, step);
      }
    }
    coherent_memo_.emplace(std::move(key), v);
    return v;
  }

  // Tick precondition: whoever still has a permitted call is a super expert.
  Verdict middle_test(const CallSequence& s) {
    std::string key = s.str();
    if (auto it = mid_memo_.find(key); it != mid_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = Verdict::truev();
    for (Agent x = 0; x < ctx_.n && !v.is_false(); ++x)
      for (Agent y = 0; y < ctx_.n; ++y) {
        if (x == y) continue;
        Verdict c = kor(knot(condition_permitted(s, x, y)), is_super_expert(s, x));
        v = kand(v, c);
        if (v.is_false()) break;
      }
    mid_memo_.emplace(std::move(key), v);
    return v;
  }

  // True iff no event is permitted after s. Requires s itself coherent.
  Verdict is_maximal(const CallSequence& s) {
    Verdict coh = relation_coherent(s);
    if (coh.is_false()) throw protocol_violation("sequence violates the protocol: " + s.str());
    Verdict v = Verdict::truev();
    for (Agent x = 0; x < ctx_.n; ++x)
      for (Agent y = 0; y < ctx_.n; ++y) {
        if (x == y) continue;
        v = kand(v, knot(call_permitted(s, Event::call(x, y))));
        if (v.is_false()) return v;
      }
    if (ctx_.variant == Variant::Skip) v = kand(v, knot(call_permitted(s, Event::skip())));
    return v;
  }

  // ---- knowledge ---------------------------------------------------------

  Verdict knows(const CallSequence& s, Agent a, const FormulaPtr& f) { return knows_at(s, a, f, 0); }

  Verdict is_super_expert(const CallSequence& s, Agent a) { return se_at(s, a, 0); }

  Verdict everyone_super_expert(const CallSequence& s) {
    Verdict v = Verdict::truev();
    for (Agent x = 0; x < ctx_.n; ++x) {
      v = kand(v, is_super_expert(s, x));
      if (v.is_false()) return v;
    }
    return v;
  }

  IndistEnumeration indistinguishable(const CallSequence& s, Agent a, size_t max_emit = 1u << 20) {
    check_agent(a);
    require_skip_variant_for_skips(s);
    IndistEnumeration out;
    out.source = s;
    out.agent = a;
    if (ctx_.protocol_restricted() && relation_coherent(s).is_false()) return out;  // relates to nothing
    if (ctx_.is_sync()) {
      sync_enumerate(s, a, [&](const CallSequence& tau, Verdict cert) {
        auto& bucket = cert.is_true() ? out.related : out.maybe;
        if (out.related.size() + out.maybe.size() >= max_emit) {
          out.exhaustive = false;
          return false;
        }
        bucket.push_back(tau);
        return true;
      });
    } else {
      out.bound = ctx_.effective_bound(s.length());
      out.exhaustive = false;  // the asynchronous relation is cut at the bound
      async_enumerate(s, a, out.bound, 0, [&](const CallSequence& tau, Verdict cert) {
        auto& bucket = cert.is_true() ? out.related : out.maybe;
        if (out.related.size() + out.maybe.size() >= max_emit) return false;
        bucket.push_back(tau);
        return true;
      });
    }
    return out;
  }

  std::optional<Witness> find_ignorance_witness(const CallSequence& s, Agent a, const FormulaPtr& f) {
    check_agent(a);
    require_skip_variant_for_skips(s);
    if (ctx_.protocol_restricted() && relation_coherent(s).is_false()) return std::nullopt;
    std::optional<Witness> found;
    auto consider = [&](const CallSequence& tau, Verdict cert) {
      if (!cert.is_true()) return true;
      if (!eval(tau, f).is_false()) return true;
      found = make_witness(s, a, tau, f);
      return false;  // first hit in enumeration order wins
    };
    if (ctx_.is_sync()) {
      if (can_collapse(f)) {
        if (auto tau = sync_collapse_witness(s, a, f)) found = make_witness(s, a, *tau, f);
      } else {
        sync_enumerate(s, a, consider);
      }
    } else {
      int bound = ctx_.effective_bound(s.length());
      if (can_collapse(f)) {
        if (auto tau = async_collapse_witness(s, a, f)) found = make_witness(s, a, *tau, f);
      } else {
        async_enumerate(s, a, bound, 0, consider);
      }
    }
    return found;
  }

 private:
  EvalContext ctx_;
  std::unique_ptr<Evaluator> plain_;
  Stats stats_;

  std::unordered_map<std::string, Verdict> eval_memo_;
  std::unordered_map<std::string, Verdict> perm_memo_;
  std::unordered_map<std::string, Verdict> exec_memo_;
  std::unordered_map<std::string, Verdict> coherent_memo_;
  std::unordered_map<std::string, Verdict> mid_memo_;
  std::unordered_map<std::string, Verdict> se_memo_;
  std::unordered_map<std::string, Verdict> knows_memo_;

  static constexpr int kGuardDepthLimit = 8;

  void check_agent(Agent a) const {
    if (a < 0 || a >= ctx_.n) throw std::out_of_range("agent id out of range for context");
  }
  void require_skip_variant_for_skips(const CallSequence& s) const {
    if (s.has_skip() && ctx_.variant != Variant::Skip)
      throw std::invalid_argument("sequence contains skip but the context variant has no tick semantics");
  }

  Evaluator& plain_engine() {
    if (ctx_.variant == Variant::Plain) return *this;
    if (!plain_) {
      EvalContext c = ctx_;
      c.variant = Variant::Plain;
      plain_ = std::make_unique<Evaluator>(c);
    }
    return *plain_;
  }

  static void merge_successor(std::vector<ProgramSuccessor>& out, ProgramSuccessor add) {
    for (ProgramSuccessor& have : out) {
      if (have.seq == add.seq) {
        if (add.certain.is_true()) have.certain = Verdict::truev();
        return;
      }
    }
    out.push_back(std::move(add));
  }

  Verdict eval_uncached(const CallSequence& s, const FormulaPtr& f) {
    switch (f->kind) {
      case Fk::Top:
        return Verdict::truev();
      case Fk::Secret:
        check_agent(f->x);
        check_agent(f->y);
        return Verdict(secrets_after(ctx_.n, s).knows(f->x, f->y));
      case Fk::Called:
        check_agent(f->x);
        check_agent(f->y);
        return Verdict(s.contains_call(f->x, f->y));
      case Fk::Not:
        return knot(eval(s, f->lhs));
      case Fk::And: {
        Verdict l = eval(s, f->lhs);
        if (l.is_false()) return l;
        return kand(l, eval(s, f->rhs));
      }
      case Fk::Knows:
        check_agent(f->x);
        if (f->scope == KnowsScope::PlainOnly && ctx_.variant != Variant::Plain)
          return plain_engine().knows(s, f->x, f->lhs);
        return knows(s, f->x, f->lhs);
      case Fk::Box: {
        Verdict v = Verdict::truev();
        for (const ProgramSuccessor& succ : program_successors(s, f->prog)) {
          Verdict at = eval(succ.seq, f->lhs);
          if (succ.certain.is_true()) {
            v = kand(v, at);
          } else if (!at.is_true()) {
            v = kand(v, Verdict::unknown(succ.certain.bound()));
          }
          if (v.is_false()) return v;
        }
        return v;
      }
      case Fk::ProtocolRef:
        throw unsupported_program("a protocol self-reference cannot be evaluated: " + f->repr);
    }
    throw std::logic_error("eval: bad kind");
  }

  // ---- knowledge dispatch ------------------------------------------------

  Verdict knows_at(const CallSequence& s, Agent a, const FormulaPtr& f, int depth) {
    check_agent(a);
    require_skip_variant_for_skips(s);
    std::string key = s.str();
    key += '|';
    key += agent_letter(a);
    key += '|';
    key += f->repr;
    if (auto it = knows_memo_.find(key); it != knows_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    Verdict v = knows_compute(s, a, f, depth);
    if (v.definite() || depth == 0) knows_memo_.emplace(std::move(key), v);
    return v;
  }

  Verdict knows_compute(const CallSequence& s, Agent a, const FormulaPtr& f, int depth) {
    if (ctx_.protocol_restricted()) {
      Verdict coh = relation_coherent(s);
      if (coh.is_false()) return Verdict::truev();  // violation collapse: anything goes
      if (coh.is_unknown()) return Verdict::unknown(ctx_.effective_bound(s.length()));
    }
    if (f->repr == f_expall(ctx_.n)->repr) return se_at(s, a, depth);
    if (f->kind == Fk::Top) return Verdict::truev();

    if (ctx_.is_sync()) {
      if (can_collapse(f)) return sync_collapse_all(s, a, f);
      return knows_sync_generic(s, a, f);
    }
    return knows_async(s, a, f, depth);
  }

  Verdict knows_async(const CallSequence& s, Agent a, const FormulaPtr& f, int depth) {
    int bound = ctx_.effective_bound(s.length());
    // Whether an agent holds a secret is determined by her own calls alone,
    // so her own secret atoms are decided by the sequence itself.
    if (f->kind == Fk::Secret && f->x == a) return eval(s, f);
    if (f->kind == Fk::Not && f->lhs->kind == Fk::Secret && f->lhs->x == a) return eval(s, f);

    if (can_collapse(f)) return async_collapse_all(s, a, f);

    // Plain knowledge is at most as strong as protocol-dependent knowledge.
    if (ctx_.variant != Variant::Plain && is_propositional(f)) {
      CallSequence core = strip_trailing_skips(s);
      if (plain_engine().knows(core, a, f).is_true()) return Verdict::truev();
    }

    bool cut = false;
    bool refuted = false;
    async_enumerate(s, a, bound, depth, [&](const CallSequence& tau, Verdict cert) {
      Verdict at = eval(tau, f);
      if (cert.is_true() && at.is_false()) {
        refuted = true;
        return false;
      }
      if (!at.is_true()) cut = true;  // an undecided or maybe-related candidate blocks a positive answer
      return true;
    });
    if (refuted) return Verdict::falsev();
    (void)cut;
    return Verdict::unknown(bound);
  }

  // ---- super-expert status ------------------------------------------------

  Verdict se_at(const CallSequence& s, Agent a, int depth) {
    check_agent(a);
    std::string key = s.str();
    key += '|';
    key += agent_letter(a);
    if (auto it = se_memo_.find(key); it != se_memo_.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    ++stats_.se_evals;
    Verdict v = se_compute(s, a, depth);
    if (v.definite() || depth == 0) se_memo_.emplace(std::move(key), v);
    return v;
  }

  Verdict se_compute(const CallSequence& s, Agent a, int depth) {
    require_skip_variant_for_skips(s);
    if (ctx_.protocol_restricted()) {
      Verdict coh = relation_coherent(s);
      if (coh.is_false()) return Verdict::truev();  // vacuous: s relates to nothing
      if (coh.is_unknown()) return Verdict::unknown(ctx_.effective_bound(s.length()));
    }
    // A coherent sequence is indistinguishable from itself, so knowledge is
    // truthful here: no super expert before everyone is an expert.
    if (!secrets_after(ctx_.n, s).all_experts()) return Verdict::falsev();

    FormulaPtr expall = f_expall(ctx_.n);
    if (ctx_.is_sync()) {
      if (can_collapse(expall)) return sync_collapse_all(s, a, expall);
      return knows_sync_generic(s, a, expall);
    }
    if (can_collapse(expall)) return async_collapse_all(s, a, expall);

    // Exact rules for the asynchronous guard family. Events not involving a
    // never change what a considers possible, so strip them.
    size_t last_own = s.length();
    for (size_t i = s.length(); i-- > 0;) {
      if (s.at(i).involves(a)) {
        last_own = i;
        break;
      }
    }
    if (last_own == s.length()) return Verdict::falsev();  // a was in no call, yet all experts: impossible for n >= 2
    if (last_own + 1 < s.length()) return se_at(s.prefix(last_own + 1), a, depth);

    CallSequence pre = s.prefix(s.length() - 1);
    Event last = s.at(s.length() - 1);
    // Once a super expert, always a super expert.
    if (se_at(pre, a, depth).is_true()) return Verdict::truev();
    // A missed call: calling a super expert reveals that everyone is one.
    if (ctx_.engaged_guards() && last.caller() == a && se_at(pre, last.callee(), depth).is_true())
      return Verdict::truev();
    // Plain knowledge is at most as strong as protocol-dependent knowledge.
    if (plain_engine().knows(s, a, expall).is_true()) return Verdict::truev();

    int bound = ctx_.effective_bound(s.length());
    if (depth >= kGuardDepthLimit) return Verdict::unknown(bound);
    bool refuted = false;
    async_enumerate(s, a, bound, depth, [&](const CallSequence& tau, Verdict cert) {
      if (cert.is_true() && eval(tau, expall).is_false()) {
        refuted = true;
        return false;
      }
      return true;
    });
    if (refuted) return Verdict::falsev();
    return Verdict::unknown(bound);
  }

  // ---- generic synchronous enumeration ------------------------------------

  struct PosSpec {
    Event ev;
    bool own = false;
    uint32_t required_partner = 0;  // partner's secrets before the call, on the source side
    Verdict sigma_callee_se;        // engaged: callee status on the source side
  };

  std::vector<PosSpec> position_specs(const CallSequence& s, Agent a, int depth) {
    std::vector<PosSpec> specs;
    SecretRelation m = SecretRelation::identity(ctx_.n);
    for (size_t i = 0; i < s.length(); ++i) {
      PosSpec spec;
      spec.ev = s.at(i);
      spec.own = spec.ev.involves(a);
      if (spec.own) {
        Agent partner = spec.ev.partner(a);
        spec.required_partner = m.row(partner).bits();
        if (ctx_.engaged_guards()) spec.sigma_callee_se = se_at(s.prefix(i), spec.ev.callee(), depth);
      }
      m.apply(spec.ev);
      specs.push_back(spec);
    }
    return specs;
  }

  // Visits every sequence the agent cannot distinguish from s (synchronous:
  // same length, position by position). The visitor returns false to stop.
  void sync_enumerate(const CallSequence& s, Agent a,
                      const std::function<bool(const CallSequence&, Verdict)>& visit) {
    std::vector<PosSpec> specs = position_specs(s, a, 0);
    std::vector<Event> tau;
    tau.reserve(s.length());
    SecretRelation m = SecretRelation::identity(ctx_.n);
    sync_enum_rec(specs, 0, a, tau, m, Verdict::truev(), visit);
  }

  bool sync_enum_rec(const std::vector<PosSpec>& specs, size_t i, Agent a, std::vector<Event>& tau,
                     const SecretRelation& m, Verdict cert,
                     const std::function<bool(const CallSequence&, Verdict)>& visit) {
    ++stats_.enum_nodes;
    if (i == specs.size()) return visit(CallSequence(tau), cert);
    const PosSpec& spec = specs[i];
    CallSequence taupre(tau);
    if (spec.own) {
      if (m.row(spec.ev.partner(a)).bits() != spec.required_partner) return true;
      Verdict c = own_call_side_conditions(taupre, spec, a, 0);
      if (c.is_false()) return true;
      tau.push_back(spec.ev);
      bool go = sync_enum_rec(specs, i + 1, a, tau, apply_event(m, spec.ev), kand(cert, c), visit);
      tau.pop_back();
      return go;
    }
    // Any call that avoids a, in lexicographic order; a tick pairs with
    // either a tick or a call not involving a.
    for (Agent x = 0; x < ctx_.n; ++x) {
      if (x == a) continue;
      for (Agent y = 0; y < ctx_.n; ++y) {
        if (y == a || y == x) continue;
        Verdict c = insertion_conditions(taupre, x, y, 0);
        if (c.is_false()) continue;
        Event e = Event::call(x, y);
        tau.push_back(e);
        bool go = sync_enum_rec(specs, i + 1, a, tau, apply_event(m, e), kand(cert, c), visit);
        tau.pop_back();
        if (!go) return false;
      }
    }
    if (ctx_.variant == Variant::Skip) {
      Verdict c = middle_test(taupre);
      if (!c.is_false()) {
        tau.push_back(Event::skip());
        bool go = sync_enum_rec(specs, i + 1, a, tau, m, kand(cert, c), visit);
        tau.pop_back();
        if (!go) return false;
      }
    }
    return true;
  }

  // Conditions the candidate side must satisfy to append a call not
  // involving the observer.
  Verdict insertion_conditions(const CallSequence& taupre, Agent x, Agent y, int depth) {
    switch (ctx_.variant) {
      case Variant::Plain:
        return Verdict::truev();
      case Variant::Known:
        return condition_permitted(taupre, x, y);
      case Variant::Engaged:
      case Variant::Skip:
        return kand(knot(se_at(taupre, x, depth + 1)), condition_permitted(taupre, x, y));
    }
    return Verdict::falsev();
  }

  // Candidate-side conditions for the observer's own call (the partner
  // secret equality is checked by the caller).
  Verdict own_call_side_conditions(const CallSequence& taupre, const PosSpec& spec, Agent a, int depth) {
    (void)a;
    switch (ctx_.variant) {
      case Variant::Plain:
        return Verdict::truev();
      case Variant::Known:
        return condition_permitted(taupre, spec.ev.caller(), spec.ev.callee());
      case Variant::Engaged:
      case Variant::Skip: {
        Verdict c = kand(knot(se_at(taupre, spec.ev.caller(), depth + 1)),
                         condition_permitted(taupre, spec.ev.caller(), spec.ev.callee()));
        if (c.is_false()) return c;
        Verdict tau_callee = se_at(taupre, spec.ev.callee(), depth + 1);
        Verdict match;
        if (tau_callee.is_unknown() || spec.sigma_callee_se.is_unknown())
          match = Verdict::unknown(tau_callee.is_unknown() ? tau_callee.bound() : spec.sigma_callee_se.bound());
        else
          match = Verdict(tau_callee.is_true() == spec.sigma_callee_se.is_true());
        return kand(c, match);
      }
    }
    return Verdict::falsev();
  }

  Verdict knows_sync_generic(const CallSequence& s, Agent a, const FormulaPtr& f) {
    Verdict acc = Verdict::truev();
    sync_enumerate(s, a, [&](const CallSequence& tau, Verdict cert) {
      Verdict at = eval(tau, f);
      if (cert.is_true()) {
        acc = kand(acc, at);
      } else if (!at.is_true()) {
        acc = kand(acc, Verdict::unknown(cert.bound()));
      }
      return !acc.is_false();
    });
    return acc;
  }

  // ---- generic asynchronous enumeration (bounded, shortest then lex) ------

  void async_enumerate(const CallSequence& s, Agent a, int bound, int depth,
                       const std::function<bool(const CallSequence&, Verdict)>& visit) {
    CallSequence core = strip_trailing_skips(s);
    std::vector<PosSpec> skel;
    {
      std::vector<PosSpec> all = position_specs(core, a, depth);
      for (const PosSpec& p : all)
        if (p.own) skel.push_back(p);
    }
    for (int target = static_cast<int>(skel.size()); target <= bound; ++target) {
      std::vector<Event> tau;
      SecretRelation m = SecretRelation::identity(ctx_.n);
      if (!async_enum_rec(skel, 0, a, tau, m, Verdict::truev(), target, depth, visit)) return;
    }
  }

  bool async_enum_rec(const std::vector<PosSpec>& skel, size_t j, Agent a, std::vector<Event>& tau,
                      const SecretRelation& m, Verdict cert, int target, int depth,
                      const std::function<bool(const CallSequence&, Verdict)>& visit) {
    ++stats_.enum_nodes;
    int remaining = target - static_cast<int>(tau.size());
    if (remaining < static_cast<int>(skel.size() - j)) return true;  // cannot finish the skeleton
    if (remaining == 0) {
      if (j == skel.size()) return visit(CallSequence(tau), cert);
      return true;
    }
    CallSequence taupre(tau);
    bool ticking = !tau.empty() && tau.back().is_skip();
    // All next events in lexicographic order; own calls must follow the
    // skeleton, calls avoiding a are insertions.
    if (!ticking) {
      for (Agent x = 0; x < ctx_.n; ++x)
        for (Agent y = 0; y < ctx_.n; ++y) {
          if (x == y) continue;
          Event e = Event::call(x, y);
          if (e.involves(a)) {
            if (j == skel.size() || !(skel[j].ev == e)) continue;
            if (m.row(e.partner(a)).bits() != skel[j].required_partner) continue;
            Verdict c = own_call_side_conditions(taupre, skel[j], a, depth);
            if (c.is_false()) continue;
            tau.push_back(e);
            bool go = async_enum_rec(skel, j + 1, a, tau, apply_event(m, e), kand(cert, c), target, depth, visit);
            tau.pop_back();
            if (!go) return false;
          } else {
            Verdict c = insertion_conditions(taupre, x, y, depth);
            if (c.is_false()) continue;
            tau.push_back(e);
            bool go = async_enum_rec(skel, j, a, tau, apply_event(m, e), kand(cert, c), target, depth, visit);
            tau.pop_back();
            if (!go) return false;
          }
        }
    }
    if (ctx_.variant == Variant::Skip && j == skel.size()) {
      Verdict c = middle_test(taupre);
      if (!c.is_false()) {
        tau.push_back(Event::skip());
        bool go = async_enum_rec(skel, j, a, tau, m, kand(cert, c), target, depth, visit);
        tau.pop_back();
        if (!go) return false;
      }
    }
    return true;
  }

  static CallSequence strip_trailing_skips(const CallSequence& s) {
    size_t len = s.length();
    while (len > 0 && s.at(len - 1).is_skip()) --len;
    return len == s.length() ? s : s.prefix(len);
  }

  // ---- state-collapse engines ---------------------------------------------
  //
  // For the plain variant, and the known variant when the protocol condition
  // is propositional, the relation clauses only inspect the secret matrix and
  // the set of past calls of the candidate prefix. Knowledge of propositional
  // formulas then reduces to reachability over (position, matrix, calls)
  // states, which decides asynchronous queries exactly: inserted calls that
  // teach nobody anything revisit a state and are pruned.

  bool can_collapse(const FormulaPtr& f) {
    if (ctx_.n > 8) return false;
    if (!is_propositional(f)) return false;
    if (ctx_.variant == Variant::Plain) return true;
    if (ctx_.variant != Variant::Known) return false;
    if (!prop_protocol_.has_value()) {
      bool ok = true;
      for (Agent x = 0; x < ctx_.n && ok; ++x)
        for (Agent y = 0; y < ctx_.n && ok; ++y)
          if (x != y) ok = is_propositional(ctx_.protocol.condition_for(x, y, ctx_.n));
      prop_protocol_ = ok;
    }
    return *prop_protocol_;
  }

  std::optional<bool> prop_protocol_;

  struct CState {
    std::array<uint32_t, 8> rows{};
    uint64_t called = 0;  // directed bit x*8+y
    uint64_t key() const {
      uint64_t k = 1469598103934665603ull;
      for (uint32_t r : rows) {
        k ^= r;
        k *= 1099511628211ull;
      }
      k ^= called;
      k *= 1099511628211ull;
      return k;
    }
    bool operator==(const CState& o) const { return rows == o.rows && called == o.called; }
  };

  CState initial_cstate() const {
    CState st;
    for (Agent a = 0; a < ctx_.n; ++a) st.rows[a] = 1u << a;
    return st;
  }
  static CState cstate_apply(CState st, Event e) {
    if (!e.is_skip()) {
      uint32_t merged = st.rows[e.caller()] | st.rows[e.callee()];
      st.rows[e.caller()] = merged;
      st.rows[e.callee()] = merged;
      st.called |= 1ull << (e.caller() * 8 + e.callee());
    }
    return st;
  }

  bool prop_holds(const FormulaPtr& f, const CState& st) const {
    switch (f->kind) {
      case Fk::Top: return true;
      case Fk::Secret: return (st.rows[f->x] >> f->y) & 1u;
      case Fk::Called: return (st.called >> (f->x * 8 + f->y)) & 1ull;
      case Fk::Not: return !prop_holds(f->lhs, st);
      case Fk::And: return prop_holds(f->lhs, st) && prop_holds(f->rhs, st);
      default: throw std::logic_error("prop_holds: not propositional");
    }
  }

  bool collapse_insert_ok(const CState& st, Agent x, Agent y) {
    if (ctx_.variant == Variant::Plain) return true;
    return prop_holds(ctx_.protocol.condition_for(x, y, ctx_.n), st);
  }

  struct CollapseNode {
    CState st;
    int parent = -1;
    Event via = Event::skip();
  };

  // Synchronous: the related sequences have the same length; walk positions.
  Verdict sync_collapse_all(const CallSequence& s, Agent a, const FormulaPtr& f) {
    std::vector<PosSpec> specs = position_specs(s, a, 0);
    std::vector<CState> level{initial_cstate()};
    std::unordered_set<uint64_t> seen;
    for (const PosSpec& spec : specs) {
      std::vector<CState> next;
      seen.clear();
      for (const CState& st : level) {
        auto push = [&](CState ns) {
          if (seen.insert(ns.key()).second) next.push_back(ns);
        };
        if (spec.own) {
          if (st.rows[spec.ev.partner(a)] != spec.required_partner) continue;
          if (ctx_.variant == Variant::Known &&
              !prop_holds(ctx_.protocol.condition_for(spec.ev.caller(), spec.ev.callee(), ctx_.n), st))
            continue;
          push(cstate_apply(st, spec.ev));
        } else {
          for (Agent x = 0; x < ctx_.n; ++x)
            for (Agent y = 0; y < ctx_.n; ++y) {
              if (x == y || x == a || y == a) continue;
              if (!collapse_insert_ok(st, x, y)) continue;
              push(cstate_apply(st, Event::call(x, y)));
            }
        }
      }
      level = std::move(next);
      stats_.collapse_states += level.size();
      if (level.empty()) return Verdict::truev();  // relates to nothing
    }
    for (const CState& st : level)
      if (!prop_holds(f, st)) return Verdict::falsev();
    return Verdict::truev();
  }

  std::optional<CallSequence> sync_collapse_witness(const CallSequence& s, Agent a, const FormulaPtr& f) {
    std::vector<PosSpec> specs = position_specs(s, a, 0);
    // Forward levels with parent links, then the lexicographically first
    // failing leaf by construction order (children generated in lex order).
    std::vector<std::vector<CollapseNode>> levels(specs.size() + 1);
    levels[0].push_back({initial_cstate(), -1, Event::skip()});
    for (size_t i = 0; i < specs.size(); ++i) {
      const PosSpec& spec = specs[i];
      std::unordered_set<uint64_t> seen;
      for (int idx = 0; idx < static_cast<int>(levels[i].size()); ++idx) {
        const CState st = levels[i][idx].st;  // copy: push_back may reallocate
        auto push = [&](CState ns, Event via) {
          if (seen.insert(ns.key()).second) levels[i + 1].push_back({ns, idx, via});
        };
        if (spec.own) {
          if (st.rows[spec.ev.partner(a)] != spec.required_partner) continue;
          if (ctx_.variant == Variant::Known &&
              !prop_holds(ctx_.protocol.condition_for(spec.ev.caller(), spec.ev.callee(), ctx_.n), st))
            continue;
          push(cstate_apply(st, spec.ev), spec.ev);
        } else {
          for (Agent x = 0; x < ctx_.n; ++x)
            for (Agent y = 0; y < ctx_.n; ++y) {
              if (x == y || x == a || y == a) continue;
              if (!collapse_insert_ok(st, x, y)) continue;
              push(cstate_apply(st, Event::call(x, y)), Event::call(x, y));
            }
        }
      }
    }
    // Deduplication keeps the lex-least path per state because parents are
    // expanded in path order and children in event order.
    for (const CollapseNode& leaf : levels[specs.size()]) {
      if (prop_holds(f, leaf.st)) continue;
      std::vector<Event> events(specs.size(), Event::skip());
      int at = static_cast<int>(&leaf - levels[specs.size()].data());
      for (size_t i = specs.size(); i-- > 0;) {
        events[i] = levels[i + 1][at].via;
        at = levels[i + 1][at].parent;
      }
      return CallSequence(events);
    }
    return std::nullopt;
  }

  struct AsyncKey {
    uint64_t state;
    size_t j;
    bool operator==(const AsyncKey& o) const { return state == o.state && j == o.j; }
  };
  struct AsyncKeyHash {
    size_t operator()(const AsyncKey& k) const { return k.state * 1099511628211ull + k.j; }
  };

  // Asynchronous exact reachability over (skeleton index, state).
  Verdict async_collapse_all(const CallSequence& s, Agent a, const FormulaPtr& f) {
    CallSequence core = strip_trailing_skips(s);
    std::vector<PosSpec> skel;
    for (const PosSpec& p : position_specs(core, a, 0))
      if (p.own) skel.push_back(p);
    std::deque<std::pair<CState, size_t>> work;
    std::unordered_set<uint64_t> seen;
    auto push = [&](const CState& st, size_t j) {
      uint64_t k = st.key() * 131 + j;
      if (seen.insert(k).second) work.emplace_back(st, j);
    };
    push(initial_cstate(), 0);
    while (!work.empty()) {
      auto [st, j] = work.front();
      work.pop_front();
      ++stats_.collapse_states;
      if (j == skel.size() && !prop_holds(f, st)) return Verdict::falsev();
      for (Agent x = 0; x < ctx_.n; ++x)
        for (Agent y = 0; y < ctx_.n; ++y) {
          if (x == y || x == a || y == a) continue;
          if (!collapse_insert_ok(st, x, y)) continue;
          push(cstate_apply(st, Event::call(x, y)), j);
        }
      if (j < skel.size()) {
        const PosSpec& spec = skel[j];
        if (st.rows[spec.ev.partner(a)] == spec.required_partner &&
            (ctx_.variant != Variant::Known ||
             prop_holds(ctx_.protocol.condition_for(spec.ev.caller(), spec.ev.callee(), ctx_.n), st)))
          push(cstate_apply(st, spec.ev), j + 1);
      }
    }
    return Verdict::truev();
  }

  std::optional<CallSequence> async_collapse_witness(const CallSequence& s, Agent a, const FormulaPtr& f) {
    CallSequence core = strip_trailing_skips(s);
    std::vector<PosSpec> skel;
    for (const PosSpec& p : position_specs(core, a, 0))
      if (p.own) skel.push_back(p);
    // Breadth-first with children in lex order: the first refuting accept
    // state is reached by the shortest, then lexicographically least path.
    struct Node {
      CState st;
      size_t j;
      int parent;
      Event via;
    };
    std::vector<Node> nodes{{initial_cstate(), 0, -1, Event::skip()}};
    std::unordered_set<AsyncKey, AsyncKeyHash> seen{{nodes[0].st.key(), 0}};
    auto reconstruct = [&](int idx) {
      std::vector<Event> ev;
      for (int at = idx; at > 0; at = nodes[at].parent) ev.push_back(nodes[at].via);
      std::reverse(ev.begin(), ev.end());
      return CallSequence(ev);
    };
    if (skel.empty() && !prop_holds(f, nodes[0].st)) return CallSequence{};
    for (size_t head = 0; head < nodes.size(); ++head) {
      const Node cur = nodes[head];
      ++stats_.collapse_states;
      auto try_push = [&](const CState& st, size_t j, Event via) -> std::optional<CallSequence> {
        if (!seen.insert({st.key(), j}).second) return std::nullopt;
        nodes.push_back({st, j, static_cast<int>(head), via});
        if (j == skel.size() && !prop_holds(f, st))
          return reconstruct(static_cast<int>(nodes.size()) - 1);
        return std::nullopt;
      };
      for (Agent x = 0; x < ctx_.n; ++x)
        for (Agent y = 0; y < ctx_.n; ++y) {
          if (x == y || x == a || y == a) continue;
          Event e = Event::call(x, y);
          bool own_next = false;
          if (cur.j < skel.size() && skel[cur.j].ev == e) own_next = true;
          if (e.involves(a) && !own_next) continue;
          if (e.involves(a)) {
            const PosSpec& spec = skel[cur.j];
            if (cur.st.rows[e.partner(a)] != spec.required_partner) continue;
            if (ctx_.variant == Variant::Known &&
                !prop_holds(ctx_.protocol.condition_for(x, y, ctx_.n), cur.st))
              continue;
            if (auto w = try_push(cstate_apply(cur.st, e), cur.j + 1, e)) return w;
          } else {
            if (!collapse_insert_ok(cur.st, x, y)) continue;
            if (auto w = try_push(cstate_apply(cur.st, e), cur.j, e)) return w;
          }
        }
    }
    return std::nullopt;
  }

  Witness make_witness(const CallSequence& s, Agent a, const CallSequence& tau, const FormulaPtr& f) {
    Witness w;
    w.tau = tau;
    w.failed = f;
    if (ctx_.is_sync()) {
      for (size_t i = 0; i < tau.length(); ++i) {
        const Event& se = s.at(i);
        const Event& te = tau.at(i);
        std::string line = "pos " + std::to_string(i + 1) + ": ";
        if (se.involves(a)) {
          line += "own call " + te.str() + ", partner secrets match";
        } else if (se.is_skip() || te.is_skip()) {
          line += se.str() + " pairs with " + te.str() + " (tick clause)";
        } else {
          line += se.str() + " pairs with " + te.str() + " (neither involves " + std::string(1, agent_letter(a)) + ")";
        }
        w.chain.push_back(line);
      }
    } else {
      for (size_t i = 0; i < tau.length(); ++i) {
        const Event& te = tau.at(i);
        std::string line = "step " + std::to_string(i + 1) + ": ";
        if (te.involves(a))
          line += "own call " + te.str() + " matched with equal partner secrets";
        else if (te.is_skip())
          line += "tick (unnoticed asynchronously)";
        else
          line += "call " + te.str() + " inserted (does not involve " + std::string(1, agent_letter(a)) + ")";
        w.chain.push_back(line);
      }
    }
    return w;
  }
};

}  // namespace gossip
