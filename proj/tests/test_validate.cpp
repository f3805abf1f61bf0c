#include "advm/validate.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

using namespace advm;
using advm::test::load_diagram;

namespace {

ValidationReport check_one(const std::string& text, const std::string& activity = "") {
    ModelSet set = parse_activity(text);
    const ActivityModel* m = activity.empty() ? &set.activities.front() : set.find_activity(activity);
    return validate(*m, set);
}

std::set<std::string> codes(const ValidationReport& r) {
    std::set<std::string> out;
    for (const auto& d : r.errors) out.insert(d.code);
    return out;
}

const char* kHeader = "behavior Id = identity;\n";

}  // namespace

TEST(Validate, LoopWithoutActionIsE1Only) {
    ModelSet set = load_diagram("fig1a.ad");
    auto r = validate(set.activities.front(), set);
    EXPECT_EQ(codes(r), std::set<std::string>{"E1"});
}

TEST(Validate, ForkThenJoinIsE2Only) {
    ModelSet set = load_diagram("fig1b.ad");
    auto r = validate(set.activities.front(), set);
    EXPECT_EQ(codes(r), std::set<std::string>{"E2"});
}

TEST(Validate, ProcessOrderPairIsClean) {
    ModelSet set = load_diagram("process_order.ad");
    ASSERT_EQ(set.activities.size(), 2u);
    for (const auto& a : set.activities) {
        auto r = validate(a, set);
        EXPECT_TRUE(r.errors.empty()) << a.name << ": " << r.errors.front().to_string();
        EXPECT_TRUE(r.warnings.empty());
    }
    const ActivityModel* pay = set.find_activity("MakePayment");
    ASSERT_NE(pay, nullptr);
    EXPECT_EQ(pay->parameters_with(Direction::In).size(), 1u);
    EXPECT_EQ(pay->parameters_with(Direction::Out).size(), 1u);
}

TEST(Validate, Fig6AndMinimalAreClean) {
    for (const char* f : {"fig6.ad", "minimal.ad"}) {
        ModelSet set = load_diagram(f);
        for (const auto& a : set.activities) EXPECT_TRUE(validate(a, set).accepted()) << f;
    }
}

TEST(Validate, EdgeTouchingActionDirectlyIsE3) {
    auto r = check_one(std::string(kHeader) + R"(
activity X { initial i; pin i.out; action A calls Id; pin A.in; finalActivity f; pin f.in;
  edge i.out -> A.in; edge A -> f.in; })");
    EXPECT_TRUE(r.has_error("E3"));
}

TEST(Validate, ActionWithoutInputPinIsE3) {
    auto r = check_one(std::string(kHeader) + R"(
activity X { initial i; pin i.out; action A calls Id; pin A.out; finalActivity f; pin f.in;
  edge i.out -> f.in; edge A.out -> f.in; })");
    EXPECT_TRUE(r.has_error("E3"));
}

TEST(Validate, PinOnControlNodeIsE3) {
    auto r = check_one(std::string(kHeader) + R"(
activity X { initial i; pin i.out; merge m; pin m.x; finalActivity f; pin f.in;
  edge i.out -> m; edge m -> f.in; })");
    EXPECT_TRUE(r.has_error("E3"));
}

TEST(Validate, PinWithTwoEdgesIsE4) {
    auto r = check_one(std::string(kHeader) + R"(
activity X { initial i; pin i.out; action A calls Id; pin A.in; pin A.out; action B calls Id; pin B.in;
  finalActivity f; pin f.in;
  edge i.out -> A.in; edge A.out -> B.in; edge A.out -> f.in; })");
    EXPECT_TRUE(r.has_error("E4"));
}

TEST(Validate, DecisionRules) {
    std::string base = std::string(kHeader) + R"(
activity X { initial i; pin i.out; action A calls Id; pin A.in; pin A.out : T; decision d;
  action B calls Id; pin B.in; action C calls Id; pin C.in;
  edge i.out -> A.in; edge A.out -> d; )";
    auto unguarded = check_one(base + "edge d -> B.in guard n = 1; edge d -> C.in; }");
    EXPECT_TRUE(unguarded.has_error("E5"));
    auto two_otherwise = check_one(base + "edge d -> B.in guard otherwise; edge d -> C.in guard otherwise; }");
    EXPECT_TRUE(two_otherwise.has_error("E5"));
    auto nested = check_one(base + "edge d -> B.in guard n = 1; edge d -> C.in guard otherwise AND n = 2; }");
    EXPECT_TRUE(nested.has_error("E5"));
    auto ok = check_one(base + "edge d -> B.in guard n = 1; edge d -> C.in guard otherwise; }");
    EXPECT_TRUE(ok.accepted());
    EXPECT_TRUE(ok.warnings.empty());
    auto overlap = check_one(base + "edge d -> B.in guard n > 1; edge d -> C.in guard n < 5; }");
    EXPECT_TRUE(overlap.accepted());
    EXPECT_TRUE(overlap.has_warning("W1"));
    auto disjoint = check_one(base + "edge d -> B.in guard n > 1; edge d -> C.in guard n <= 1; }");
    EXPECT_FALSE(disjoint.has_warning("W1"));
    auto context = check_one(base + "edge d -> B.in guard order.n = 1; edge d -> C.in guard otherwise; }");
    EXPECT_TRUE(context.has_error("E8"));
}

TEST(Validate, UnresolvedBehaviorIsE6) {
    auto r = check_one(R"(
activity X { initial i; pin i.out; action A calls Nowhere; pin A.in; edge i.out -> A.in; })");
    EXPECT_EQ(codes(r), std::set<std::string>{"E6"});
}

TEST(Validate, ControlArityIsE7) {
    auto r = check_one(std::string(kHeader) + R"(
activity X { initial i; pin i.out; fork f; action A calls Id; pin A.in;
  edge i.out -> f; })");
    EXPECT_TRUE(r.has_error("E7"));
}

TEST(Validate, JoinSpecificationRulesAreE8) {
    std::string base = std::string(kHeader) + R"(
activity X { initial i; pin i.out; fork f; action A calls Id; pin A.in; pin A.pa : T;
  action B calls Id; pin B.in; pin B.pb : T; action C calls Id; pin C.in;
  edge i.out -> f; edge f -> A.in; edge f -> B.in; edge A.pa -> j; edge B.pb -> j; edge j -> C.in; )";
    EXPECT_TRUE(check_one(base + "join j when pa.n = pb.n; }").accepted());
    EXPECT_TRUE(check_one(base + "join j when n = 1; }").has_error("E8"));
    EXPECT_TRUE(check_one(base + "join j when pa.n = zz.n; }").has_error("E8"));
}

TEST(Exclusivity, Intervals) {
    EXPECT_TRUE(provably_exclusive(parse_expr("n < 3"), parse_expr("n >= 3")));
    EXPECT_FALSE(provably_exclusive(parse_expr("n <= 3"), parse_expr("n >= 3")));
    EXPECT_TRUE(provably_exclusive(parse_expr("s = a"), parse_expr("s = b")));
    EXPECT_TRUE(provably_exclusive(parse_expr("s = a"), parse_expr("s <> a")));
    EXPECT_FALSE(provably_exclusive(parse_expr("s = a"), parse_expr("t = b")));
    EXPECT_TRUE(provably_exclusive(parse_expr("x = 1 AND n > 5"), parse_expr("n < 2")));
    EXPECT_TRUE(provably_exclusive(parse_expr("n = 1"), Expr::otherwise()));
}

// ---------------------------------------------------------------------------
// brute-force oracles over random control graphs

namespace {

struct RandomGraph {
    std::string text;
    std::vector<std::string> kinds;                   // control node kind keyword by index
    std::vector<std::vector<int>> succ;               // control -> control
    std::vector<bool> fed_by_pin, feeds_pin;          // direct pin neighbours
};

RandomGraph random_graph(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RandomGraph g;
    int n = 3 + static_cast<int>(rng() % 4);
    const char* kinds[] = {"fork", "join", "merge", "decision"};
    g.succ.assign(static_cast<std::size_t>(n), {});
    g.fed_by_pin.assign(static_cast<std::size_t>(n), false);
    g.feeds_pin.assign(static_cast<std::size_t>(n), false);
    std::ostringstream decl, edges;
    decl << "behavior Id = identity;\nactivity R {\n";
    for (int i = 0; i < n; ++i) {
        g.kinds.push_back(kinds[rng() % 4]);
        decl << "  " << g.kinds.back() << " c" << i << ";\n";
    }
    int actions = 0;
    auto fresh = [&](bool input) {
        int k = actions++;
        decl << "  action X" << k << " calls Id;\n  pin X" << k << ".in;\n  pin X" << k << ".out;\n";
        return "X" + std::to_string(k) + (input ? ".in" : ".out");
    };
    for (int i = 0; i < n; ++i) {
        int outs = 1 + static_cast<int>(rng() % 2);
        for (int k = 0; k < outs; ++k) {
            if (rng() % 10 < 6) {
                int j = static_cast<int>(rng() % static_cast<unsigned>(n));
                g.succ[static_cast<std::size_t>(i)].push_back(j);
                edges << "  edge c" << i << " -> c" << j << ";\n";
            } else {
                g.feeds_pin[static_cast<std::size_t>(i)] = true;
                edges << "  edge c" << i << " -> " << fresh(true) << ";\n";
            }
        }
    }
    int sources = 1 + static_cast<int>(rng() % 2);
    for (int k = 0; k < sources; ++k) {
        int j = static_cast<int>(rng() % static_cast<unsigned>(n));
        g.fed_by_pin[static_cast<std::size_t>(j)] = true;
        edges << "  edge " << fresh(false) << " -> c" << j << ";\n";
    }
    g.text = decl.str() + edges.str() + "}\n";
    return g;
}

bool has_control_cycle(const RandomGraph& g) {
    std::size_t n = g.succ.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (int j : g.succ[i]) r[i][static_cast<std::size_t>(j)] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
        if (r[i][i]) return true;
    return false;
}

// Every pin-to-pin route through an acyclic control graph, checked for a
// fork and a join on the same route.
bool route_mixes_fork_and_join(const RandomGraph& g) {
    bool found = false;
    std::vector<int> route;
    std::function<void(int)> walk = [&](int v) {
        route.push_back(v);
        if (g.feeds_pin[static_cast<std::size_t>(v)]) {
            bool fork = false, join = false;
            for (int x : route) {
                fork |= g.kinds[static_cast<std::size_t>(x)] == "fork";
                join |= g.kinds[static_cast<std::size_t>(x)] == "join";
            }
            found |= fork && join;
        }
        for (int w : g.succ[static_cast<std::size_t>(v)]) walk(w);
        route.pop_back();
    };
    for (std::size_t s = 0; s < g.succ.size(); ++s)
        if (g.fed_by_pin[s]) walk(static_cast<int>(s));
    return found;
}

}  // namespace

TEST(ValidateOracle, CycleDetectionMatchesReachability) {
    int cyclic = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        RandomGraph g = random_graph(seed);
        auto r = check_one(g.text);
        bool expected = has_control_cycle(g);
        cyclic += expected;
        ASSERT_EQ(r.has_error("E1"), expected) << g.text;
    }
    EXPECT_GT(cyclic, 20);
}

TEST(ValidateOracle, ForkJoinMixMatchesRouteEnumeration) {
    int checked = 0, mixed = 0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        RandomGraph g = random_graph(seed);
        if (has_control_cycle(g)) continue;
        ++checked;
        bool expected = route_mixes_fork_and_join(g);
        mixed += expected;
        ASSERT_EQ(check_one(g.text).has_error("E2"), expected) << g.text;
    }
    EXPECT_GT(checked, 200);
    EXPECT_GT(mixed, 20);
}
