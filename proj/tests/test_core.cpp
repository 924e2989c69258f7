#include <random>
#include <set>

#include "doctest.h"
#include "gossip/core.hpp"

using namespace gossip;

namespace {

// Independent oracle: fold with plain std::set unions, no bit tricks.
std::vector<std::set<int>> oracle_secrets(int n, const CallSequence& s) {
  std::vector<std::set<int>> rows(n);
  for (int a = 0; a < n; ++a) rows[a].insert(a);
  for (const Event& e : s.events()) {
    if (e.is_skip()) continue;
    std::set<int> merged = rows[e.caller()];
    merged.insert(rows[e.callee()].begin(), rows[e.callee()].end());
    rows[e.caller()] = merged;
    rows[e.callee()] = merged;
  }
  return rows;
}

bool matches_oracle(int n, const CallSequence& s) {
  SecretRelation m = secrets_after(n, s);
  auto rows = oracle_secrets(n, s);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (m.knows(a, b) != (rows[a].count(b) > 0)) return false;
  return true;
}

CallSequence random_sequence(std::mt19937& rng, int n, size_t len, bool allow_skip) {
  std::vector<Event> ev;
  while (ev.size() < len) {
    if (allow_skip && rng() % 8 == 0) {
      ev.push_back(Event::skip());
      continue;
    }
    Agent x = rng() % n, y = rng() % n;
    if (x == y) continue;
    ev.push_back(Event::call(x, y));
  }
  return CallSequence(ev);
}

}  // namespace

TEST_CASE("apply_event merges the two rows") {
  SecretRelation s = SecretRelation::identity(4);
  s = apply_event(s, Event::call(0, 1));
  CHECK(s.row(0).str() == "ab");
  CHECK(s.row(1).str() == "ab");
  CHECK(s.row(2).str() == "c");
  CHECK(s.row(3).str() == "d");

  SecretRelation skipcase = apply_event(s, Event::skip());
  CHECK(skipcase == s);

  // reapplying a call whose rows already coincide changes nothing
  SecretRelation t = secrets_after(4, parse_sequence("ab;ac", 4));
  SecretRelation again = apply_event(t, Event::call(0, 1));
  CHECK(again == apply_event(again, Event::call(0, 1)));
  CHECK(matches_oracle(4, parse_sequence("ab;ac;ab", 4)));

  CHECK_THROWS_AS(Event::call(2, 2), std::invalid_argument);
}

TEST_CASE("secrets_after folds from the identity") {
  SecretRelation s = secrets_after(4, parse_sequence("ab;cd;ac;bd", 4));
  for (Agent a = 0; a < 4; ++a) CHECK(s.row(a).str() == "abcd");

  CHECK(secrets_after(4, {}) == SecretRelation::identity(4));

  SecretRelation t = secrets_after(4, parse_sequence("ab;ac", 4));
  CHECK(t.row(0).str() == "abc");
  CHECK(t.row(1).str() == "ab");
  CHECK(t.row(2).str() == "abc");
  CHECK(t.row(3).str() == "d");

  CHECK_THROWS(secrets_after(2, CallSequence({Event::call(0, 3)})));
}

TEST_CASE("experts") {
  CHECK(experts(4, parse_sequence("ab;cd;ac", 4)).str() == "ac");
  CHECK(experts(4, {}).empty());
  CHECK(experts(3, parse_sequence("ab;ac", 3)).str() == "ac");
}

TEST_CASE("sequence parse and format") {
  CallSequence s = parse_sequence("ab;cd;ac;bd", 4);
  REQUIRE(s.length() == 4);
  CHECK(s.at(0) == Event::call(0, 1));
  CHECK(s.at(3) == Event::call(1, 3));
  CHECK(format_sequence(s) == "ab;cd;ac;bd");

  CHECK(parse_sequence("", 4).empty());
  CallSequence t = parse_sequence("ab;skip", 4);
  REQUIRE(t.length() == 2);
  CHECK(t.at(1).is_skip());
  CHECK(format_sequence(t) == "ab;skip");
  CHECK(parse_sequence(" ab ; bc ", 4) == parse_sequence("ab;bc", 4));

  CHECK_THROWS_AS(parse_sequence("aa", 4), parse_error);
  CHECK_THROWS_AS(parse_sequence("a?", 4), parse_error);
  CHECK_THROWS_AS(parse_sequence("ae", 4), parse_error);
  CHECK_THROWS_AS(parse_sequence("ab;;cd", 4), parse_error);
  CHECK_THROWS_AS(parse_sequence("ab;", 4), parse_error);
}

TEST_CASE("round trip and fold properties on random sequences") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 2 + rng() % 5;
    CallSequence s = random_sequence(rng, n, rng() % 9, true);
    CAPTURE(s.str());
    CHECK(parse_sequence(format_sequence(s), n) == s);
    CHECK(matches_oracle(n, s));

    // monotonicity and reflexivity along every extension
    SecretRelation before = secrets_after(n, s);
    for (Agent x = 0; x < n; ++x) CHECK(before.knows(x, x));
    Agent x = rng() % n, y = (x + 1 + rng() % (n - 1)) % n;
    SecretRelation after = apply_event(before, Event::call(x, y));
    CHECK(before.row_subset_of(after));
    // skip transparency
    CHECK(secrets_after(n, s.extended(Event::skip())) == before);
  }
}

TEST_CASE("prefixes and agent subsequences") {
  CallSequence s = parse_sequence("ab;cd;ac;bd;ab", 4);
  CHECK(s.prefix(2).str() == "ab;cd");
  CHECK(s.prefix(0).empty());
  CHECK(s.prefix(9) == s);
  auto own = s.subsequence_of(1);
  REQUIRE(own.size() == 3);
  CHECK(own[0] == Event::call(0, 1));
  CHECK(own[1] == Event::call(1, 3));
  CHECK(own[2] == Event::call(0, 1));
  CHECK(s.contains_call(0, 2));
  CHECK_FALSE(s.contains_call(2, 0));  // direction matters
  CHECK(parse_sequence("ab;skip;skip", 4).well_shaped());
  CHECK_FALSE(parse_sequence("skip;ab", 4).well_shaped());
}
