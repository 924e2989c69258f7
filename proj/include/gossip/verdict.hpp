#pragma once

#include <string>

namespace gossip {

// Three-valued result. Synchronous queries are exact and never yield
// Unknown; a bounded asynchronous query that is neither refuted nor
// decided by a definitive short-cut reports the bound it ran at.
class Verdict {
 public:
  enum Value : int8_t { False = 0, True = 1, Unknown = 2 };

  Verdict() : v_(Unknown) {}
  Verdict(bool b) : v_(b ? True : False) {}  // NOLINT: implicit by design

  static Verdict truev() { return Verdict(true); }
  static Verdict falsev() { return Verdict(false); }
  static Verdict unknown(int bound) {
    Verdict v;
    v.v_ = Unknown;
    v.bound_ = bound;
    return v;
  }

  bool is_true() const { return v_ == True; }
  bool is_false() const { return v_ == False; }
  bool is_unknown() const { return v_ == Unknown; }
  bool definite() const { return v_ != Unknown; }
  Value value() const { return v_; }
  int bound() const { return bound_; }

  bool operator==(const Verdict& o) const { return v_ == o.v_; }
  bool operator!=(const Verdict& o) const { return v_ != o.v_; }

  std::string str() const {
    switch (v_) {
      case True: return "true";
      case False: return "false";
      default: return bound_ >= 0 ? "unknown@" + std::to_string(bound_) : "unknown";
    }
  }

 private:
  Value v_;
  int bound_ = -1;
};

// Kleene connectives: Unknown absorbs unless the other side decides.
inline Verdict knot(Verdict a) {
  if (a.is_unknown()) return a;
  return Verdict(!a.is_true());
}

inline Verdict kand(Verdict a, Verdict b) {
  if (a.is_false() || b.is_false()) return Verdict::falsev();
  if (a.is_true() && b.is_true()) return Verdict::truev();
  return a.is_unknown() ? a : b;
}

inline Verdict kor(Verdict a, Verdict b) { return knot(kand(knot(a), knot(b))); }

}  // namespace gossip
