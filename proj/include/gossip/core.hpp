#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gossip {

// Agents are dense ids 0..n-1, displayed as letters a, b, c, ...
using Agent = int;

constexpr int kMaxAgents = 26;

inline char agent_letter(Agent a) {
  if (a < 0 || a >= kMaxAgents) throw std::invalid_argument("agent id out of displayable range");
  return static_cast<char>('a' + a);
}

inline Agent agent_from_letter(char c) {
  if (c < 'a' || c > 'z') throw std::invalid_argument(std::string("not an agent letter: ") + c);
  return c - 'a';
}

struct parse_error : std::runtime_error {
  size_t pos;
  parse_error(const std::string& what, size_t p) : std::runtime_error(what), pos(p) {}
};

struct protocol_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct unsupported_program : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Subset of agents as a bitmask.
class AgentSet {
 public:
  AgentSet() = default;
  explicit AgentSet(uint32_t bits) : bits_(bits) {}

  static AgentSet single(Agent a) { return AgentSet(1u << a); }
  static AgentSet all(int n) { return AgentSet(n >= 32 ? ~0u : (1u << n) - 1u); }

  bool contains(Agent a) const { return (bits_ >> a) & 1u; }
  void insert(Agent a) { bits_ |= 1u << a; }
  AgentSet united(AgentSet o) const { return AgentSet(bits_ | o.bits_); }
  bool subset_of(AgentSet o) const { return (bits_ & ~o.bits_) == 0; }
  bool empty() const { return bits_ == 0; }
  int size() const { return __builtin_popcount(bits_); }
  uint32_t bits() const { return bits_; }

  bool operator==(const AgentSet& o) const { return bits_ == o.bits_; }
  bool operator!=(const AgentSet& o) const { return bits_ != o.bits_; }

  std::string str() const {
    std::string s;
    for (Agent a = 0; a < kMaxAgents; ++a)
      if (contains(a)) s += agent_letter(a);
    return s;
  }

 private:
  uint32_t bits_ = 0;
};

// A directed call xy (x caller, y callee) or an explicit clock tick.
struct Event {
  int8_t from = -1;
  int8_t to = -1;

  static Event call(Agent x, Agent y) {
    if (x == y) throw std::invalid_argument("caller equals callee");
    Event e;
    e.from = static_cast<int8_t>(x);
    e.to = static_cast<int8_t>(y);
    return e;
  }
  static Event skip() { return Event{}; }

  bool is_skip() const { return from < 0; }
  Agent caller() const { return from; }
  Agent callee() const { return to; }
  bool involves(Agent a) const { return !is_skip() && (from == a || to == a); }
  Agent partner(Agent a) const { return from == a ? to : from; }
  Event dual() const { return call(to, from); }

  bool operator==(const Event& o) const { return from == o.from && to == o.to; }
  bool operator!=(const Event& o) const { return !(*this == o); }
  // Calls ordered by (caller, callee); skip sorts after every call.
  bool operator<(const Event& o) const {
    if (is_skip() != o.is_skip()) return !is_skip();
    if (from != o.from) return from < o.from;
    return to < o.to;
  }

  std::string str() const {
    if (is_skip()) return "skip";
    return std::string{agent_letter(from), agent_letter(to)};
  }
};

// The n x n relation "row x knows the secret of y". Always reflexive:
// the initial relation is the identity and updates only add pairs.
class SecretRelation {
 public:
  SecretRelation() = default;
  static SecretRelation identity(int n) {
    SecretRelation s;
    s.n_ = n;
    s.rows_.resize(n);
    for (Agent a = 0; a < n; ++a) s.rows_[a] = AgentSet::single(a);
    return s;
  }

  int agents() const { return n_; }
  AgentSet row(Agent x) const { return rows_.at(x); }
  bool knows(Agent x, Agent y) const { return rows_.at(x).contains(y); }
  bool is_expert(Agent x) const { return rows_.at(x) == AgentSet::all(n_); }
  bool all_experts() const {
    for (Agent a = 0; a < n_; ++a)
      if (!is_expert(a)) return false;
    return true;
  }
  AgentSet experts() const {
    AgentSet e;
    for (Agent a = 0; a < n_; ++a)
      if (is_expert(a)) e.insert(a);
    return e;
  }

  void apply(Event e) {
    if (e.is_skip()) return;
    if (e.caller() == e.callee()) throw std::invalid_argument("malformed event: caller equals callee");
    if (e.caller() >= n_ || e.callee() >= n_ || e.caller() < 0)
      throw std::out_of_range("agent id out of range for this relation");
    AgentSet merged = rows_[e.caller()].united(rows_[e.callee()]);
    rows_[e.caller()] = merged;
    rows_[e.callee()] = merged;
  }

  bool row_subset_of(const SecretRelation& o) const {
    for (Agent a = 0; a < n_; ++a)
      if (!rows_[a].subset_of(o.rows_[a])) return false;
    return true;
  }

  bool operator==(const SecretRelation& o) const { return n_ == o.n_ && rows_ == o.rows_; }

  // Rows packed 8 bits each; usable as a hash key for n <= 8.
  uint64_t packed() const {
    uint64_t k = 0;
    for (Agent a = 0; a < n_; ++a) k |= static_cast<uint64_t>(rows_[a].bits() & 0xff) << (8 * a);
    return k;
  }

 private:
  int n_ = 0;
  std::vector<AgentSet> rows_;
};

// Ordered list of events; the sole state representation. Prefixes of a
// sequence are sequences; arbitrary sequences are representable (a skip
// before a call is only ruled out for protocol-generated sequences).
class CallSequence {
 public:
  CallSequence() = default;
  explicit CallSequence(std::vector<Event> ev) : events_(std::move(ev)) {}

  size_t length() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Event& at(size_t i) const { return events_.at(i); }  // 0-based internally
  const std::vector<Event>& events() const { return events_; }

  CallSequence prefix(size_t len) const {
    return CallSequence(std::vector<Event>(events_.begin(), events_.begin() + std::min(len, events_.size())));
  }
  CallSequence extended(Event e) const {
    std::vector<Event> ev = events_;
    ev.push_back(e);
    return CallSequence(std::move(ev));
  }
  // Events involving x, in order.
  std::vector<Event> subsequence_of(Agent a) const {
    std::vector<Event> out;
    for (const Event& e : events_)
      if (e.involves(a)) out.push_back(e);
    return out;
  }
  bool contains_call(Agent x, Agent y) const {
    for (const Event& e : events_)
      if (!e.is_skip() && e.caller() == x && e.callee() == y) return true;
    return false;
  }
  bool has_skip() const {
    for (const Event& e : events_)
      if (e.is_skip()) return true;
    return false;
  }
  // Calls followed by skips, never a call after a skip.
  bool well_shaped() const {
    bool seen_skip = false;
    for (const Event& e : events_) {
      if (e.is_skip())
        seen_skip = true;
      else if (seen_skip)
        return false;
    }
    return true;
  }
  size_t call_count() const {
    size_t c = 0;
    for (const Event& e : events_)
      if (!e.is_skip()) ++c;
    return c;
  }

  bool operator==(const CallSequence& o) const { return events_ == o.events_; }
  bool operator!=(const CallSequence& o) const { return events_ != o.events_; }
  bool operator<(const CallSequence& o) const {
    if (events_.size() != o.events_.size()) return events_.size() < o.events_.size();
    return std::lexicographical_compare(events_.begin(), events_.end(), o.events_.begin(), o.events_.end());
  }

  std::string str() const {
    std::string s;
    for (size_t i = 0; i < events_.size(); ++i) {
      if (i) s += ';';
      s += events_[i].str();
    }
    return s;
  }

 private:
  std::vector<Event> events_;
};

inline SecretRelation secrets_after(int n, const CallSequence& seq) {
  SecretRelation s = SecretRelation::identity(n);
  for (const Event& e : seq.events()) s.apply(e);
  return s;
}

inline SecretRelation apply_event(SecretRelation s, Event e) {
  s.apply(e);
  return s;
}

inline AgentSet experts(int n, const CallSequence& seq) { return secrets_after(n, seq).experts(); }

// Grammar: event := two distinct lowercase letters | `skip`; events
// separated by `;`; optional whitespace; empty string is the empty sequence.
inline CallSequence parse_sequence(std::string_view text, int n) {
  std::vector<Event> events;
  size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  skip_ws();
  bool expect_event = false;
  while (i < text.size()) {
    skip_ws();
    if (i >= text.size()) break;
    if (text.compare(i, 4, "skip") == 0) {
      events.push_back(Event::skip());
      i += 4;
    } else {
      if (i + 1 >= text.size()) throw parse_error("truncated call, expected two agent letters", i);
      char c1 = text[i], c2 = text[i + 1];
      if (c1 < 'a' || c1 > 'z') throw parse_error(std::string("unknown agent letter: ") + c1, i);
      if (c2 < 'a' || c2 > 'z') throw parse_error(std::string("unknown agent letter: ") + c2, i + 1);
      Agent x = agent_from_letter(c1), y = agent_from_letter(c2);
      if (x >= n) throw parse_error(std::string("agent out of range: ") + c1, i);
      if (y >= n) throw parse_error(std::string("agent out of range: ") + c2, i + 1);
      if (x == y) throw parse_error("caller equals callee", i);
      events.push_back(Event::call(x, y));
      i += 2;
    }
    skip_ws();
    if (i < text.size()) {
      if (text[i] != ';') throw parse_error("expected ';' between events", i);
      ++i;
      expect_event = true;
    } else {
      expect_event = false;
    }
  }
  if (expect_event) throw parse_error("trailing ';'", text.size());
  return CallSequence(std::move(events));
}

inline std::string format_sequence(const CallSequence& s) { return s.str(); }

}  // namespace gossip
