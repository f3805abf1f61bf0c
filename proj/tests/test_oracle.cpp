#include "advm/oracle.hpp"
#include "advm/validate.hpp"
#include "advm/vm.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

using namespace advm;
using advm::test::load_diagram;

namespace {

Datum rec(std::string_view text) { return Datum{std::nullopt, parse_record_literal(text)}; }

struct Pair {
    RunResult vm, oracle;
};

Pair run_both(const ModelSet& set, const std::string& activity, const std::vector<Datum>& args, std::uint64_t seed) {
    BehaviorRegistry b = BehaviorRegistry::from_models(set);
    Machine vm(set, b, {.seed = seed});
    Pair p{vm.run(activity, args), oracle_run(set, b, activity, args, {.seed = seed})};
    return p;
}

void expect_equivalent(const ModelSet& set, const std::string& activity, const std::vector<Datum>& args,
                       std::uint64_t seed) {
    Pair p = run_both(set, activity, args, seed);
    ASSERT_EQ(p.vm.status, p.oracle.status) << p.vm.error << " | " << p.oracle.error;
    auto cmp = compare_essential_traces(p.vm.trace, p.oracle.trace);
    ASSERT_TRUE(cmp.equivalent) << cmp.first_divergence->explanation;
    EXPECT_EQ(p.vm.outputs, p.oracle.outputs);
}

}  // namespace

TEST(Oracle, ProcessOrderMatchesVm) {
    ModelSet set = load_diagram("process_order.ad");
    for (std::uint64_t s = 0; s < 10; ++s) expect_equivalent(set, "ProcessOrder", {}, s);
    Pair p = run_both(set, "ProcessOrder", {}, 0);
    EXPECT_EQ(p.oracle.status, RunStatus::Completed);
    EXPECT_EQ(essential_trace(p.oracle.trace).size(), 7u);
    for (const auto& e : p.oracle.trace.events()) EXPECT_NE(e.kind, EventKind::TokenMoved);
}

TEST(Oracle, Fig6MatchesVmOnEveryBranch) {
    ModelSet set = load_diagram("fig6.ad");
    const char* ys[] = {"{att2:1, side:left}", "{att2:2, side:left}", "{att2:1, side:right}"};
    for (const char* y : ys)
        for (std::uint64_t s = 0; s < 5; ++s)
            expect_equivalent(set, "Fig6", {rec("{att2:1}"), rec(y), rec("{k:3}")}, s);
}

TEST(Oracle, MinimalMatchesVm) {
    ModelSet set = load_diagram("minimal.ad");
    expect_equivalent(set, set.activities.front().name, {}, 0);
}

TEST(Oracle, GeneratedCorpusMatchesVm) {
    std::size_t completed = 0, runs = 0;
    for (std::uint64_t g = 0; g < 200; ++g) {
        ModelSet set = parse_activity(random_valid_diagram(g, 12));
        for (std::uint64_t s = 0; s < 3; ++s) {
            Pair p = run_both(set, "Main", {}, s);
            ASSERT_EQ(p.vm.status, p.oracle.status) << "diagram " << g << " seed " << s << ": " << p.vm.error
                                                    << " | " << p.oracle.error;
            auto cmp = compare_essential_traces(p.vm.trace, p.oracle.trace);
            ASSERT_TRUE(cmp.equivalent) << "diagram " << g << " seed " << s << ": "
                                        << cmp.first_divergence->explanation;
            EXPECT_EQ(p.vm.error.find("RaceDetected"), std::string::npos);
            completed += p.vm.status == RunStatus::Completed;
            ++runs;
        }
    }
    EXPECT_GT(completed, runs / 2);
}

TEST(Oracle, VmNeverStartsAnActionLaterThanTheOracle) {
    for (std::uint64_t g = 0; g < 100; ++g) {
        ModelSet set = parse_activity(random_valid_diagram(g, 12));
        Pair p = run_both(set, "Main", {}, g);
        auto rounds = [](const Trace& t) {
            std::map<std::uint64_t, std::vector<std::uint64_t>> by_hash;
            auto firings = essential_trace(t);
            for (const auto& f : firings) {
                const auto& e = t.events()[f.seq];
                by_hash[f.hash].push_back(e.payload["round"].get<std::uint64_t>());
            }
            for (auto& [h, v] : by_hash) std::sort(v.begin(), v.end());
            return by_hash;
        };
        auto a = rounds(p.vm.trace), b = rounds(p.oracle.trace);
        for (const auto& [h, va] : a) {
            auto it = b.find(h);
            if (it == b.end()) continue;
            for (std::size_t i = 0; i < std::min(va.size(), it->second.size()); ++i)
                EXPECT_LE(va[i], it->second[i]) << "diagram " << g;
        }
    }
}

// ---------------------------------------------------------------------------
// the comparator itself

TEST(Equivalence, DetectsAlteredConsumedValue) {
    ModelSet set = load_diagram("process_order.ad");
    Pair p = run_both(set, "ProcessOrder", {}, 0);
    Trace mutated;
    bool changed = false;
    for (const auto& e : p.oracle.trace.events()) {
        auto payload = e.payload;
        if (!changed && e.kind == EventKind::ActionStarted && payload["action"] == "ShipOrder") {
            payload["consumed"][0]["value"] = "Order{id:1,status:\"accepted\",sum:999}";
            changed = true;
        }
        mutated.emit(e.kind, payload);
    }
    ASSERT_TRUE(changed);
    auto cmp = compare_essential_traces(p.vm.trace, mutated);
    ASSERT_FALSE(cmp.equivalent);
    EXPECT_NE(cmp.first_divergence->explanation.find("ShipOrder"), std::string::npos);
}

TEST(Equivalence, DetectsMissingFiring) {
    ModelSet set = load_diagram("process_order.ad");
    Pair p = run_both(set, "ProcessOrder", {}, 0);
    Trace cut;
    for (const auto& e : p.vm.trace.events()) {
        if (e.kind == EventKind::ActionStarted && e.payload["action"] == "CloseOrder") break;
        cut.emit(e.kind, e.payload);
    }
    EXPECT_FALSE(compare_essential_traces(p.vm.trace, cut).equivalent);
    EXPECT_FALSE(compare_essential_traces(cut, p.vm.trace).equivalent);
}

TEST(Equivalence, DetectsSwappedConsumers) {
    // C and D consume equal values; only their inputs differ
    const char* text = R"(behavior K = const({n:1});
activity X { initial i; pin i.out; fork f; action A calls K; pin A.in; pin A.out : T;
  action B calls K; pin B.in; pin B.out : T; action C calls K; pin C.in : T; action D calls K; pin D.in : T;
  edge i.out -> f; edge f -> A.in; edge f -> B.in; edge A.out -> C.in; edge B.out -> D.in; })";
    ModelSet set = parse_activity(text);
    Pair p = run_both(set, "X", {}, 0);
    ASSERT_TRUE(compare_essential_traces(p.vm.trace, p.oracle.trace).equivalent);
    // relabel which action consumed which input by swapping actions C and D
    Trace swapped;
    for (const auto& e : p.vm.trace.events()) {
        auto payload = e.payload;
        if (e.kind == EventKind::ActionStarted || e.kind == EventKind::ActionCompleted) {
            if (payload["action"] == "C")
                payload["action"] = "D";
            else if (payload["action"] == "D")
                payload["action"] = "C";
        }
        swapped.emit(e.kind, payload);
    }
    EXPECT_FALSE(compare_essential_traces(p.vm.trace, swapped).equivalent);
}

TEST(Equivalence, SeedsOnlyReorderIndependentFirings) {
    ModelSet set = load_diagram("process_order.ad");
    BehaviorRegistry b = BehaviorRegistry::from_models(set);
    Machine base_vm(set, b, {.seed = 0});
    RunResult base = base_vm.run("ProcessOrder", {});
    bool reordered = false;
    auto order = [](const Trace& t) {
        std::vector<std::string> v;
        for (const auto& f : essential_trace(t)) v.push_back(f.action);
        return v;
    };
    for (std::uint64_t s = 1; s < 20; ++s) {
        Machine vm(set, b, {.seed = s});
        RunResult r = vm.run("ProcessOrder", {});
        auto cmp = compare_essential_traces(base.trace, r.trace);
        EXPECT_TRUE(cmp.equivalent) << "seed " << s;
        reordered |= order(base.trace) != order(r.trace);
    }
    EXPECT_TRUE(reordered);
}

// ---------------------------------------------------------------------------
// generator

TEST(Generator, ProducesValidDiagrams) {
    for (std::uint64_t s = 0; s < 1000; ++s) {
        std::string text = random_valid_diagram(s, 12);
        ModelSet set = parse_activity(text);
        ASSERT_NE(set.find_activity("Main"), nullptr);
        for (const auto& a : set.activities) {
            auto r = validate(a, set);
            ASSERT_TRUE(r.accepted()) << "seed " << s << " " << a.name << ": " << r.errors.front().to_string()
                                      << "\n"
                                      << text;
        }
    }
}

TEST(Generator, RespectsSizeBound) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        ModelSet set = parse_activity(random_valid_diagram(s, 8));
        const ActivityModel& m = *set.find_activity("Main");
        std::size_t nodes = std::count_if(m.nodes.begin(), m.nodes.end(), [](const NodeDef& n) {
            return n.kind != NodeKind::InputPin && n.kind != NodeKind::OutputPin;
        });
        EXPECT_LE(nodes, 8u) << "seed " << s;
    }
    ModelSet tiny = parse_activity(random_valid_diagram(0, 4));
    EXPECT_TRUE(validate(*tiny.find_activity("Main"), tiny).accepted());
}

TEST(Generator, DeterministicPerSeed) {
    EXPECT_EQ(random_valid_diagram(42, 12), random_valid_diagram(42, 12));
    EXPECT_NE(random_valid_diagram(42, 12), random_valid_diagram(43, 12));
}

TEST(Generator, InjectedForkJoinIsRejected) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        ModelSet set = parse_activity(random_valid_diagram(s, 12, {.inject_fork_join = true}));
        auto r = validate(*set.find_activity("Main"), set);
        bool e2 = std::any_of(r.errors.begin(), r.errors.end(), [](const Diagnostic& d) { return d.code == "E2"; });
        EXPECT_TRUE(e2) << "seed " << s;
    }
}
