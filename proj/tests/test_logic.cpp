#include "doctest.h"
#include "gossip/engine.hpp"

using namespace gossip;

namespace {

EvalContext ctx(const char* proto, Variant v, Mode m, int n, std::optional<int> bound = {}) {
  EvalContext c;
  c.n = n;
  c.protocol = *protocol_by_name(proto);
  c.variant = v;
  c.mode = m;
  c.bound = bound;
  return c;
}

CallSequence seq(const char* text, int n) { return parse_sequence(text, n); }

}  // namespace

TEST_CASE("eval: atoms, connectives, experts") {
  Evaluator ev(ctx("any", Variant::Plain, Mode::Sync, 4));
  CHECK(ev.eval(seq("ab;cd;ac;bd", 4), f_expall(4)).is_true());
  CHECK(ev.eval({}, parse_formula("S(a,a) & ~S(a,b)", 4)).is_true());
  CHECK(ev.eval(seq("ab", 4), parse_formula("C(a,b)", 4)).is_true());
  CHECK(ev.eval(seq("ab", 4), parse_formula("C(b,a)", 4)).is_false());
  CHECK(ev.eval(seq("ab;cd;ac", 4), parse_formula("Exp(a) & Exp(c) & ~Exp(b) & ~Exp(d)", 4)).is_true());
}

TEST_CASE("eval: asynchronous knowledge of both experts after three calls, three agents") {
  Evaluator ev(ctx("any", Variant::Plain, Mode::Async, 3, 8));
  CHECK(ev.eval(seq("ab;ac;ab", 3), parse_formula("K(a, ExpAll) & K(b, ExpAll)", 3)).is_true());
  // and the third agent is not yet a super expert
  CHECK(ev.eval(seq("ab;ac;ab", 3), parse_formula("K(c, ExpAll)", 3)).is_false());
  // after the fourth call everyone is
  CHECK(ev.eval(seq("ab;ac;ab;cb", 3), f_eexpall(3)).is_true());
}

TEST_CASE("eval: violation collapse under a known protocol") {
  Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
  CHECK(ev.eval(seq("ab;ab", 4), parse_formula("K(a, bot)", 4)).is_true());
  CHECK(ev.eval(seq("ab", 4), parse_formula("K(a, bot)", 4)).is_false());
}

TEST_CASE("program successors") {
  Evaluator ev(ctx("any", Variant::Plain, Mode::Sync, 4));
  auto succ = ev.program_successors(seq("ab", 4), parse_program("cd", 4));
  REQUIRE(succ.size() == 1);
  CHECK(succ[0].seq.str() == "ab;cd");
  CHECK(succ[0].certain.is_true());

  auto both = ev.program_successors({}, parse_program("ab+ba", 4));
  REQUIRE(both.size() == 2);
  CHECK(both[0].seq.str() == "ab");
  CHECK(both[1].seq.str() == "ba");

  auto tested = ev.program_successors(seq("ab;cd;ac;bd", 4), parse_program("?ExpAll;ab", 4));
  REQUIRE(tested.size() == 1);
  CHECK(tested[0].seq.str() == "ab;cd;ac;bd;ab");

  auto blocked = ev.program_successors(seq("ab", 4), parse_program("?ExpAll;ab", 4));
  CHECK(blocked.empty());

  CHECK(ev.program_successors(seq("ab", 4), parse_program("(?top)*", 4)).size() == 1);
  CHECK_THROWS_AS(ev.program_successors({}, parse_program("(ab)*", 4)), unsupported_program);

  // box over a test-star is just the formula itself
  CHECK(ev.eval(seq("ab", 4), parse_formula("[(?top)*] C(a,b)", 4)).is_true());
}

TEST_CASE("call_permitted under the four variants") {
  SUBCASE("known cmo forbids repeats") {
    Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
    CHECK(ev.call_permitted(seq("ab", 4), Event::call(0, 1)).is_false());
    CHECK(ev.call_permitted(seq("ab", 4), Event::call(1, 0)).is_false());
    CHECK(ev.call_permitted(seq("ab", 4), Event::call(0, 2)).is_true());
  }
  SUBCASE("engaged cmo: super experts make no calls") {
    Evaluator ev(ctx("cmo", Variant::Engaged, Mode::Sync, 4));
    CHECK(ev.call_permitted(seq("ab;bc;cd;ad;bd", 4), Event::call(0, 2)).is_false());
    CHECK(ev.is_super_expert(seq("ab;bc;cd;ad;bd", 4), 0).is_true());
  }
  SUBCASE("skip cmo permits the tick once only super experts could call") {
    Evaluator ev(ctx("cmo", Variant::Skip, Mode::Sync, 4));
    CHECK(ev.call_permitted(seq("ab;bc;cd;da;bd", 4), Event::skip()).is_true());
    CHECK(ev.call_permitted(seq("ab", 4), Event::skip()).is_false());
  }
  SUBCASE("skip event rejected outside the skip variant") {
    Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
    CHECK(ev.call_permitted(seq("ab;bc;cd;da;bd", 4), Event::skip()).is_false());
  }
  SUBCASE("any permits everything while somebody is no super expert") {
    Evaluator ev(ctx("any", Variant::Plain, Mode::Sync, 4));
    CHECK(ev.call_permitted(seq("ab", 4), Event::call(0, 1)).is_true());
    CHECK(ev.call_permitted(seq("ab", 4), Event::call(3, 2)).is_true());
  }
}

TEST_CASE("is_maximal") {
  SUBCASE("all pairs used up under cmo") {
    Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
    CHECK(ev.is_maximal(seq("ab;cd;bd;ac;bc;ad", 4)).is_true());
  }
  SUBCASE("any is never maximal before the goal") {
    Evaluator ev(ctx("any", Variant::Plain, Mode::Sync, 4));
    CHECK(ev.is_maximal(seq("ab", 4)).is_false());
  }
  SUBCASE("engaged cmo gets stuck") {
    Evaluator ev(ctx("cmo", Variant::Engaged, Mode::Sync, 4));
    CHECK(ev.is_maximal(seq("ab;bc;cd;ad;bd", 4)).is_true());
  }
  SUBCASE("violating sequences raise") {
    Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
    CHECK_THROWS_AS(ev.is_maximal(seq("ab;ab", 4)), protocol_violation);
  }
  SUBCASE("five known-cmo calls with disjoint start end the protocol") {
    Evaluator ev(ctx("cmo", Variant::Known, Mode::Sync, 4));
    CHECK(ev.is_maximal(seq("ab;cd;bd;ac;bc", 4)).is_true());
  }
}

TEST_CASE("validate examples from the protocol registry") {
  CHECK_FALSE(validate_protocol(protocol_cmo(), 4).has_value());
  CHECK_FALSE(validate_protocol(protocol_pig(), 4).has_value());
}
