#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gossip/engine.hpp"

namespace gossip {

struct ChildEvents {
  std::vector<Event> permitted;
  std::vector<Event> unknown;  // permission undecided at the bound
};

// All events the protocol may take after s, in lexicographic order.
inline ChildEvents children(Evaluator& ev, const CallSequence& s) {
  const EvalContext& ctx = ev.context();
  ChildEvents out;
  for (Agent x = 0; x < ctx.n; ++x)
    for (Agent y = 0; y < ctx.n; ++y) {
      if (x == y) continue;
      Verdict v = ev.call_permitted(s, Event::call(x, y));
      if (v.is_true()) out.permitted.push_back(Event::call(x, y));
      else if (v.is_unknown()) out.unknown.push_back(Event::call(x, y));
    }
  if (ctx.variant == Variant::Skip) {
    Verdict v = ev.call_permitted(s, Event::skip());
    if (v.is_true()) out.permitted.push_back(Event::skip());
    else if (v.is_unknown()) out.unknown.push_back(Event::skip());
  }
  return out;
}

struct EnumerationSummary {
  size_t nodes = 0;
  size_t maximal = 0;
  bool truncated = false;      // some branch still had permitted events at max_len
  bool inconclusive = false;   // some node had events of undecided permission
};

// Depth-first emission of every maximal sequence of the execution tree, in
// lexicographic order. Exhaustive for finite protocols; a truncation at
// max_len is flagged.
inline EnumerationSummary enumerate_maximal(Evaluator& ev, size_t max_len,
                                            const std::function<bool(const CallSequence&)>& emit,
                                            const CallSequence& root = {}) {
  EnumerationSummary sum;
  std::function<bool(const CallSequence&)> walk = [&](const CallSequence& s) -> bool {
    ++sum.nodes;
    ChildEvents ch = children(ev, s);
    if (!ch.unknown.empty()) sum.inconclusive = true;
    if (ch.permitted.empty()) {
      if (ch.unknown.empty()) {
        ++sum.maximal;
        return emit(s);
      }
      return true;  // cannot certify maximality here
    }
    if (s.length() >= max_len) {
      sum.truncated = true;
      return true;
    }
    for (const Event& e : ch.permitted)
      if (!walk(s.extended(e))) return false;
    return true;
  };
  walk(root);
  return sum;
}

struct SearchResult {
  enum class Outcome { FoundMinimal, NoneUpTo, Inconclusive };
  Outcome outcome = Outcome::NoneUpTo;
  size_t length = 0;
  CallSequence sequence;
  size_t max_len = 0;
  // statistics
  uint64_t nodes_expanded = 0;
  uint64_t cache_hits = 0;
  double wall_seconds = 0;
};

// Shortest protocol execution after which everyone is a super expert,
// by iterative deepening in lexicographic order. `prune_symmetry` fixes the
// first call to the lexicographically least one; only sound for symmetric
// protocols and agent-symmetric goals.
inline SearchResult search_min_super_successful(Evaluator& ev, size_t max_len, bool prune_symmetry = false) {
  auto t0 = std::chrono::steady_clock::now();
  SearchResult res;
  res.max_len = max_len;
  bool unknown_seen = false;

  std::function<std::optional<CallSequence>(const CallSequence&, size_t)> dfs =
      [&](const CallSequence& s, size_t target) -> std::optional<CallSequence> {
    ++res.nodes_expanded;
    if (s.length() == target) {
      Verdict goal = ev.everyone_super_expert(s);
      if (goal.is_true()) return s;
      if (goal.is_unknown()) unknown_seen = true;
      return std::nullopt;
    }
    ChildEvents ch = children(ev, s);
    if (!ch.unknown.empty()) unknown_seen = true;
    if (prune_symmetry && s.empty()) {
      ChildEvents canonical;
      for (const Event& e : ch.permitted)
        if (!e.is_skip() && e.caller() == 0 && e.callee() == 1) canonical.permitted.push_back(e);
      ch.permitted = canonical.permitted;
    }
    for (const Event& e : ch.permitted)
      if (auto hit = dfs(s.extended(e), target)) return hit;
    return std::nullopt;
  };

  for (size_t target = 0; target <= max_len; ++target) {
    if (auto hit = dfs(CallSequence{}, target)) {
      // Independent re-evaluation with fresh caches before trusting it.
      Evaluator fresh(ev.context());
      if (!fresh.everyone_super_expert(*hit).is_true())
        throw std::logic_error("search result failed re-evaluation: " + hit->str());
      res.outcome = SearchResult::Outcome::FoundMinimal;
      res.length = hit->length();
      res.sequence = *hit;
      break;
    }
  }
  if (res.outcome != SearchResult::Outcome::FoundMinimal && unknown_seen)
    res.outcome = SearchResult::Outcome::Inconclusive;
  res.cache_hits = ev.stats().cache_hits;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct ClassificationResult {
  enum class Verdict3 { SuperSuccessful, NotSuperSuccessful, Inconclusive };
  Verdict3 verdict = Verdict3::Inconclusive;
  CallSequence counterexample;  // maximal, with failing_agent not a super expert
  Agent failing_agent = -1;
  size_t explored = 0;
  bool truncated = false;
};

// Scans the maximal sequences; the protocol classifies as super-successful
// iff every one of them ends with everyone a super expert.
inline ClassificationResult classify_protocol(Evaluator& ev, size_t max_len) {
  ClassificationResult res;
  bool all_true = true;
  bool any_unknown = false;
  EnumerationSummary sum = enumerate_maximal(ev, max_len, [&](const CallSequence& s) {
    ++res.explored;
    for (Agent a = 0; a < ev.context().n; ++a) {
      Verdict v = ev.is_super_expert(s, a);
      if (v.is_false()) {
        res.counterexample = s;
        res.failing_agent = a;
        all_true = false;
        return false;
      }
      if (v.is_unknown()) any_unknown = true;
    }
    return true;
  });
  res.truncated = sum.truncated;
  if (!all_true)
    res.verdict = ClassificationResult::Verdict3::NotSuperSuccessful;
  else if (any_unknown || sum.truncated || sum.inconclusive)
    res.verdict = ClassificationResult::Verdict3::Inconclusive;
  else
    res.verdict = ClassificationResult::Verdict3::SuperSuccessful;
  return res;
}

enum class ConstructionPattern { Broadcast2n3, PairwiseQuadratic, StarEngaged };

inline std::optional<ConstructionPattern> construction_by_name(const std::string& s) {
  if (s == "broadcast-2n-3") return ConstructionPattern::Broadcast2n3;
  if (s == "pairwise-quadratic") return ConstructionPattern::PairwiseQuadratic;
  if (s == "star-engaged") return ConstructionPattern::StarEngaged;
  return std::nullopt;
}

// Deterministic closed-form sequences; lexicographic choices throughout.
inline CallSequence construct(ConstructionPattern pattern, int n) {
  if (n < 2 || n > kMaxAgents) throw std::invalid_argument("agent count out of range");
  std::vector<Event> ev;
  switch (pattern) {
    case ConstructionPattern::Broadcast2n3: {
      // One agent phones everyone, then everyone but the last agent again:
      // 2n-3 calls after which the hub knows that everyone is an expert.
      for (Agent b = 1; b < n; ++b) ev.push_back(Event::call(0, b));
      for (Agent b = 1; b + 1 < n; ++b) ev.push_back(Event::call(0, b));
      break;
    }
    case ConstructionPattern::PairwiseQuadratic: {
      // n-2+C(n,2) calls: seed agent 0 with everyone outside {0,1,2,3},
      // run the four-agent square, then every pair not already finished
      // as experts phones once more.
      if (n < 4) throw std::invalid_argument("pairwise-quadratic needs at least 4 agents");
      for (Agent b = 4; b < n; ++b) ev.push_back(Event::call(0, b));
      ev.push_back(Event::call(0, 1));
      ev.push_back(Event::call(2, 3));
      ev.push_back(Event::call(0, 2));
      ev.push_back(Event::call(1, 3));
      for (Agent x = 0; x < n; ++x)
        for (Agent y = x + 1; y < n; ++y) {
          if ((x == 0 && y == 2) || (x == 1 && y == 3)) continue;  // already experts together
          ev.push_back(Event::call(x, y));
        }
      break;
    }
    case ConstructionPattern::StarEngaged: {
      // 3n-4 calls: the broadcast makes the hub a super expert, then the
      // others phone the hub; those are missed calls that promote each caller.
      for (Agent b = 1; b < n; ++b) ev.push_back(Event::call(0, b));
      for (Agent b = 1; b + 1 < n; ++b) ev.push_back(Event::call(0, b));
      for (Agent b = 1; b < n; ++b) ev.push_back(Event::call(b, 0));
      break;
    }
  }
  return CallSequence(ev);
}

struct RunResult {
  uint64_t seed = 0;
  CallSequence sequence;
  size_t steps = 0;
  bool cutoff = false;  // stopped by max_steps, not by termination
  Verdict final_goal;   // everyone a super expert at the stop point
};

// Uniformly random choice among currently permitted events; fair with
// probability one. Stops when nothing is permitted or at max_steps.
inline RunResult simulate_fair(Evaluator& ev, uint64_t seed, size_t max_steps) {
  std::mt19937_64 rng(seed);
  auto draw = [&rng](size_t k) {
    uint64_t lim = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % k;
    uint64_t x;
    do { x = rng(); } while (x >= lim);
    return static_cast<size_t>(x % k);
  };
  RunResult res;
  res.seed = seed;
  CallSequence s;
  while (true) {
    if (res.steps >= max_steps) {
      res.cutoff = true;
      break;
    }
    ChildEvents ch = children(ev, s);
    if (ch.permitted.empty()) break;  // unknown-permission events are never taken
    s = s.extended(ch.permitted[draw(ch.permitted.size())]);
    ++res.steps;
  }
  res.sequence = s;
  res.final_goal = ev.everyone_super_expert(s);
  return res;
}

// One row per prefix: the secrets each agent holds (lowercase) and the
// agents she knows to be experts (uppercase); undecided cells are tracked.
struct KnowledgeTable {
  struct Cell {
    AgentSet secrets;
    AgentSet known_experts;
    AgentSet undecided;  // async: expert status undecided at the bound
  };
  struct Row {
    std::string label;  // the event leading to this row; empty for the start
    std::vector<Cell> cells;
  };
  int n = 0;
  std::vector<Row> rows;
};

inline KnowledgeTable knowledge_table(Evaluator& ev, const CallSequence& s) {
  const int n = ev.context().n;
  KnowledgeTable table;
  table.n = n;
  for (size_t i = 0; i <= s.length(); ++i) {
    CallSequence pre = s.prefix(i);
    KnowledgeTable::Row row;
    row.label = i == 0 ? "" : s.at(i - 1).str();
    SecretRelation m = secrets_after(n, pre);
    for (Agent x = 0; x < n; ++x) {
      KnowledgeTable::Cell cell;
      cell.secrets = m.row(x);
      for (Agent y = 0; y < n; ++y) {
        Verdict v = ev.knows(pre, x, f_exp(y, n));
        if (v.is_true()) cell.known_experts.insert(y);
        else if (v.is_unknown()) cell.undecided.insert(y);
      }
      row.cells.push_back(cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace gossip
