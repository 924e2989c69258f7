#include "doctest.h"
#include "gossip/formula.hpp"
#include "gossip/protocol.hpp"

using namespace gossip;

TEST_CASE("builders expand shorthands structurally") {
  CHECK(f_or(f_secret(0, 1), f_top())->repr == "~((~(S(a,b))&~(top)))");
  CHECK(f_exp(0, 2)->repr == "(S(a,a)&S(a,b))");
  CHECK(f_khat(0, f_top())->repr == "~(K(a,~(top)))");
  CHECK(f_bot()->repr == "~(top)");
  CHECK(f_eexpall(2)->repr == "(K(a,((S(a,a)&S(a,b))&(S(b,a)&S(b,b))))&K(b,((S(a,a)&S(a,b))&(S(b,a)&S(b,b)))))");
}

TEST_CASE("parser handles precedence and modal brackets") {
  int n = 4;
  CHECK(same_formula(parse_formula("~S(a,b) & S(b,c) | top", n),
                     f_or(f_and(f_not(f_secret(0, 1)), f_secret(1, 2)), f_top())));
  CHECK(same_formula(parse_formula("S(a,b) -> S(b,a) -> top", n),
                     f_implies(f_secret(0, 1), f_implies(f_secret(1, 0), f_top()))));
  CHECK(same_formula(parse_formula("K(a, ExpAll)", n), f_knows(0, f_expall(n))));
  CHECK(same_formula(parse_formula("Khat(c, Exp(d))", n), f_khat(2, f_exp(3, n))));
  CHECK(same_formula(parse_formula("[ab;bc] ExpAll", n),
                     f_box(p_seq(p_call(0, 1), p_call(1, 2)), f_expall(n))));
  CHECK(same_formula(parse_formula("[?ExpAll;ab] top", n),
                     f_box(p_seq(p_test(f_expall(n)), p_call(0, 1)), f_top())));
  CHECK(same_formula(parse_formula("[(ab+ba)*] bot", n),
                     f_box(p_star(p_choice(p_call(0, 1), p_call(1, 0))), f_bot())));
  CHECK(same_formula(parse_formula("EExpAll", n), f_eexpall(n)));

  CHECK_THROWS_AS(parse_formula("S(a)", n), parse_error);
  CHECK_THROWS_AS(parse_formula("K a top", n), parse_error);
  CHECK_THROWS_AS(parse_formula("S(a,e)", n), parse_error);
  CHECK_THROWS_AS(parse_formula("top top", n), parse_error);
  CHECK_THROWS_AS(parse_program("aa", n), parse_error);
}

TEST_CASE("normalize sorts conjuncts") {
  FormulaPtr a = f_and(f_secret(1, 0), f_and(f_secret(0, 1), f_top()));
  FormulaPtr b = f_and(f_top(), f_and(f_secret(1, 0), f_secret(0, 1)));
  CHECK(same_formula(normalize(a), normalize(b)));
}

TEST_CASE("built-in protocols validate") {
  for (int n : {2, 3, 4, 5}) {
    CAPTURE(n);
    CHECK_FALSE(validate_protocol(protocol_any(), n).has_value());
    CHECK_FALSE(validate_protocol(protocol_cmo(), n).has_value());
    CHECK_FALSE(validate_protocol(protocol_lns(), n).has_value());
    auto pig = validate_protocol(protocol_pig(), n);
    CHECK_FALSE(pig.has_value());
  }
}

TEST_CASE("self-referential and asymmetric protocols are rejected") {
  Protocol selfref{"selfref",
                   [](Agent x, Agent y, int) { return f_khat(x, f_protocol_ref(x, y)); },
                   false};
  auto r = validate_protocol(selfref, 4);
  REQUIRE(r.has_value());
  CHECK(r->reason == "self-referential condition");

  Protocol favors_a{"favors-a",
                    [](Agent x, Agent, int) { return x == 0 ? f_top() : f_bot(); },
                    false};
  auto r2 = validate_protocol(favors_a, 4);
  REQUIRE(r2.has_value());
  CHECK(r2->reason == "asymmetric condition");
}

TEST_CASE("protocol lookup by name") {
  CHECK(protocol_by_name("any").has_value());
  CHECK(protocol_by_name("cmo")->finite);
  CHECK_FALSE(protocol_by_name("pig")->finite);
  CHECK_FALSE(protocol_by_name("nope").has_value());
}
