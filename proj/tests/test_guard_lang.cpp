#include "advm/expr.hpp"
#include "advm/value.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace advm;

namespace {

Datum rec(std::string_view text, std::optional<std::string> type = std::nullopt) {
    return Datum{std::move(type), parse_record_literal(text)};
}

}  // namespace

TEST(Decimal, ExactComparison) {
    EXPECT_EQ(Decimal::parse("0.1") + Decimal::parse("0.2"), Decimal::parse("0.3"));
    EXPECT_EQ(Decimal::parse("1.50"), Decimal::parse("1.5"));
    EXPECT_LT(Decimal::parse("-2"), Decimal::parse("-1.99"));
    EXPECT_EQ(Decimal::parse("100").to_string(), "100");
    EXPECT_THROW(Decimal::parse("1.2.3"), std::invalid_argument);
}

TEST(Records, LiteralRoundTrip) {
    Record r = parse_record_literal("{status:accepted, sum:150, rate:0.25, ok:true, note:\"a b\"}");
    EXPECT_EQ(render_record(r), "{note:\"a b\",ok:true,rate:0.25,status:\"accepted\",sum:150}");
    EXPECT_EQ(parse_record_literal(render_record(r)), r);
    EXPECT_EQ(Datum{}.render(), "null");
    EXPECT_EQ(rec("{a:1}", "Order").render(), "Order{a:1}");
}

TEST(Guards, ComparisonAndBareWords) {
    Datum order = rec("{order:approved, sum:150}");
    EXPECT_TRUE(eval_guard(parse_expr("order=approved AND sum>100"), order));
    EXPECT_FALSE(eval_guard(parse_expr("order = rejected"), order));
    EXPECT_TRUE(eval_guard(parse_expr("order <> rejected"), order));
    EXPECT_TRUE(eval_guard(parse_expr("sum >= 150.00"), order));
    EXPECT_TRUE(eval_guard(parse_expr("order = \"approved\""), order));
}

TEST(Guards, Precedence) {
    Datum d = rec("{a:1, b:2}");
    EXPECT_EQ(parse_expr("a = 1 OR a = 2 AND b = 3").to_string(), "a = 1 OR a = 2 AND b = 3");
    EXPECT_TRUE(eval_guard(parse_expr("a = 1 OR a = 2 AND b = 3"), d));
    EXPECT_FALSE(eval_guard(parse_expr("(a = 1 OR a = 2) AND b = 3"), d));
    EXPECT_FALSE(eval_guard(parse_expr("NOT (a = 1) AND b = 2"), d));
    EXPECT_THROW(eval_guard(parse_expr("NOT a = 1"), d), EvalError);  // (NOT a) = 1
    EXPECT_TRUE(eval_guard(parse_expr("NOT (a = 1 AND b = 3)"), d));
}

TEST(Guards, Errors) {
    EXPECT_THROW(eval_guard(parse_expr("a = 1"), Datum{}), EvalError);
    EXPECT_THROW(eval_guard(parse_expr("missing = 1"), rec("{a:1}")), EvalError);
    EXPECT_THROW(eval_guard(parse_expr("a < text"), rec("{a:1}")), EvalError);
    EXPECT_THROW(eval_guard(Expr::otherwise(), rec("{a:1}")), std::logic_error);
    EXPECT_THROW(parse_expr("a = "), ExprParseError);
    EXPECT_THROW(parse_expr("a = 1 AND"), ExprParseError);
    EXPECT_TRUE(parse_expr("otherwise").contains_otherwise());
}

TEST(JoinCriteria, PrefixRenderingAndParse) {
    const std::string eq1 = "OR(AND(\"p1.att2 = p2.att2\", p1, p2), AND(p2, p3))";
    Expr e = parse_expr(eq1);
    EXPECT_EQ(e.to_prefix(), eq1);
    EXPECT_EQ(referenced_vars(e), (std::vector<std::string>{"p1", "p2", "p3"}));
}

// Detailed rewriting of the shorthand: or(and(select(p1).att2 = select(p2).att2,
// exists(p1), exists(p2)), and(exists(p2), exists(p3))).
TEST(JoinCriteria, MatchesDetailedRewriteOnAllBindings) {
    Expr e = parse_expr("OR(AND(\"p1.att2 = p2.att2\", p1, p2), AND(p2, p3))");
    int cases = 0;
    for (int mask = 0; mask < 8; ++mask) {
        for (bool same : {true, false}) {
            bool has1 = mask & 1, has2 = mask & 2, has3 = mask & 4;
            TokenBinding b;
            if (has1) b["p1"] = rec("{att2:7}", "A");
            if (has2) b["p2"] = rec(same ? "{att2:7}" : "{att2:8}", "B");
            if (has3) b["p3"] = rec("{x:1}", "C");
            bool expected = (has1 && has2 && same) || (has2 && has3);
            EXPECT_EQ(eval_join_criteria(e, b), expected) << "mask " << mask << " same " << same;
            ++cases;
        }
    }
    EXPECT_EQ(cases, 16);
}

TEST(JoinCriteria, UnboundComparisonIsFalse) {
    Expr e = parse_expr("OR(\"p1.a = p2.a\", p3)");
    TokenBinding b{{"p1", rec("{a:1}")}};
    EXPECT_FALSE(eval_join_criteria(e, b));
    b["p3"] = Datum{};
    EXPECT_TRUE(eval_join_criteria(e, b));
}

namespace {

Expr random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 5);
    int k = depth <= 0 ? pick(rng) % 2 : pick(rng);
    const char* vars[] = {"p1", "p2", "p3", "p4"};
    switch (k) {
    case 0: return Expr::queue_var(vars[rng() % 4]);
    case 1: {
        std::string a = vars[rng() % 4], b = vars[rng() % 4];
        return Expr::compare(rng() % 2 ? CompareOp::Eq : CompareOp::Lt, Expr::field(a, "v"), Expr::field(b, "v"));
    }
    case 2:
    case 3: {
        std::vector<Expr> kids;
        int n = 2 + static_cast<int>(rng() % 2);
        for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1));
        Expr e;
        e.kind = k == 2 ? Expr::Kind::And : Expr::Kind::Or;
        e.children = std::move(kids);
        return e;
    }
    default: return Expr::negate(random_expr(rng, depth - 1));
    }
}

}  // namespace

TEST(JoinCriteria, DnfPreservesOutcomes) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        Expr e = random_expr(rng, 3);
        Expr d = to_dnf(e);
        for (int mask = 0; mask < 16; ++mask) {
            TokenBinding b;
            for (int i = 0; i < 4; ++i)
                if (mask & (1 << i))
                    b["p" + std::to_string(i + 1)] = rec("{v:" + std::to_string((mask >> i) % 3) + "}");
            ASSERT_EQ(eval_join_criteria(e, b), eval_join_criteria(d, b)) << e.to_prefix() << " vs " << d.to_prefix();
        }
    }
}
