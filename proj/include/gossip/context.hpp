#pragma once

#include <optional>
#include <string>

#include "gossip/protocol.hpp"

namespace gossip {

// Which clauses govern the epistemic relations and call permission.
//   Plain:   unrestricted relation, protocol known to nobody.
//   Known:   the protocol is common knowledge; relations only pass through
//            condition-permitted calls.
//   Engaged: known protocol, and super experts neither make nor answer
//            calls (a call to a super expert is a missed call).
//   Skip:    engaged semantics plus explicit clock ticks once no
//            non-super-expert has a permitted call.
enum class Variant : int8_t { Plain, Known, Engaged, Skip };

enum class Mode : int8_t { Sync, Async };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::Known: return "known";
    case Variant::Engaged: return "engaged";
    case Variant::Skip: return "skip";
  }
  return "?";
}

inline std::optional<Variant> variant_by_name(const std::string& s) {
  if (s == "plain") return Variant::Plain;
  if (s == "known") return Variant::Known;
  if (s == "engaged") return Variant::Engaged;
  if (s == "skip") return Variant::Skip;
  return std::nullopt;
}

// Fixes the meaning of every judgment: agent count, protocol, variant,
// and mode (async queries carry a length bound for the enumeration).
struct EvalContext {
  int n = 2;
  Protocol protocol = protocol_any();
  Variant variant = Variant::Plain;
  Mode mode = Mode::Sync;
  std::optional<int> bound;  // async only; default |sigma| + 2n per query

  bool is_sync() const { return mode == Mode::Sync; }
  bool engaged_guards() const { return variant == Variant::Engaged || variant == Variant::Skip; }
  bool protocol_restricted() const { return variant != Variant::Plain; }

  int effective_bound(size_t seq_len) const {
    if (bound) return *bound;
    return static_cast<int>(seq_len) + 2 * n;
  }

  std::string fingerprint() const {
    std::string s = std::to_string(n) + "/" + protocol.name + "/" + variant_name(variant) + "/" +
                    (mode == Mode::Sync ? "sync" : "async");
    if (mode == Mode::Async && bound) s += "@" + std::to_string(*bound);
    return s;
  }

  EvalContext with_variant(Variant v) const {
    EvalContext c = *this;
    c.variant = v;
    return c;
  }
  EvalContext with_protocol(Protocol p) const {
    EvalContext c = *this;
    c.protocol = std::move(p);
    return c;
  }
};

}  // namespace gossip
