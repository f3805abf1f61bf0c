#include "advm/compiler.hpp"
#include "advm/oracle.hpp"
#include "advm/validate.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>

using namespace advm;
using advm::test::load_diagram;

namespace {

std::string section(const std::string& dump, const std::string& name) {
    auto start = dump.find("# " + name + "\n");
    if (start == std::string::npos) return {};
    start += name.size() + 3;
    auto end = dump.find("\n# ", start);
    auto next_activity = dump.find("\nactivity ", start);
    end = std::min(end, next_activity);
    return dump.substr(start, end == std::string::npos ? std::string::npos : end - start + 1);
}

/// "push|pull <queue> [start->end, ...]" per engine, paths sorted.
std::set<std::string> engines_of(const ActivityRuntime& rt) {
    std::set<std::string> out;
    auto describe = [&](const char* kind, int queue, const std::vector<int>& paths) {
        std::vector<std::string> ps;
        for (int p : paths) {
            const Path& path = rt.paths[static_cast<std::size_t>(p)];
            ps.push_back(rt.queue(path.start).name + "->" + rt.queue(path.end).name);
        }
        std::sort(ps.begin(), ps.end());
        std::string s = std::string(kind) + " " + rt.queue(queue).name + " [";
        for (std::size_t i = 0; i < ps.size(); ++i) s += (i ? ", " : "") + ps[i];
        out.insert(s + "]");
    };
    for (const auto& e : rt.push_engines) describe("push", e.queue, e.paths);
    for (const auto& e : rt.pull_engines) describe("pull", e.queue, e.paths);
    return out;
}

std::set<std::string> queues_without_engine(const ActivityRuntime& rt) {
    std::set<std::string> out;
    for (const auto& q : rt.queues)
        if (!q.engine) out.insert(q.name);
    return out;
}

std::unique_ptr<ActivityRuntime> compile_text(ModelSet& holder, const std::string& text) {
    holder = parse_activity("behavior Id = identity;\n" + text);
    const ActivityModel& m = holder.activities.front();
    auto r = validate(m, holder);
    EXPECT_TRUE(r.accepted()) << (r.errors.empty() ? "" : r.errors.front().to_string());
    return compile(m);
}

}  // namespace

TEST(Compiler, Fig6JoinCriteria) {
    ModelSet set = load_diagram("fig6.ad");
    auto rt = compile(set.activities.front());
    std::string dump = dump_runtime(*rt);
    EXPECT_NE(dump.find("pull0 d.in p3 p4 p5 p6 : OR(AND(\"p1.att2 = p2.att2\", p1, p2), AND(p2, p3))"),
              std::string::npos)
        << dump;
    ASSERT_EQ(rt->pull_engines.size(), 1u);
    EXPECT_EQ(rt->pull_engines[0].join_criteria.to_prefix(), "OR(AND(\"p1.att2 = p2.att2\", p1, p2), AND(p2, p3))");
    EXPECT_EQ(section(dump, "paths"),
              "x.out -> a.in : true : push\n"
              "y.out -> b.in : true : push\n"
              "z.out -> c.in : true : push\n"
              "a.p1 -> d.in : true : pull\n"
              "b.p2 -> d.in : side = left : pull\n"
              "b.p2 -> d.in : NOT (side = left) : pull\n"
              "c.p3 -> d.in : true : pull\n"
              "d.out -> end.in : true : push\n");
}

TEST(Compiler, ProcessOrderPaths) {
    ModelSet set = load_diagram("process_order.ad");
    auto rt = compile(*set.find_activity("ProcessOrder"));
    EXPECT_EQ(section(dump_runtime(*rt), "paths"),
              "start.out -> ReceiveOrder.in : true : push\n"
              "ReceiveOrder.order -> FillOrder.in : status = accepted : push\n"
              "ReceiveOrder.order -> CloseOrder.in : NOT (status = accepted) : push\n"
              "FillOrder.out -> ShipOrder.in : true : push\n"
              "FillOrder.out -> SendInvoice.in : true : push\n"
              "ShipOrder.out -> CloseOrder.in : true : pull\n"
              "SendInvoice.out -> MakePayment.in : true : push\n"
              "MakePayment.out -> CloseOrder.in : true : pull\n"
              "CloseOrder.out -> end.in : true : push\n");
    EXPECT_TRUE(rt->is_final);
    EXPECT_FALSE(rt->is_active);
    EXPECT_EQ(rt->token_count(), 0u);
    auto pay = compile(*set.find_activity("MakePayment"));
    EXPECT_FALSE(pay->is_final);
    EXPECT_EQ(pay->input_parameter_queues().size(), 1u);
    EXPECT_EQ(pay->output_parameter_queues().size(), 1u);
}

// ---------------------------------------------------------------------------
// engine assignment fixtures

TEST(Engines, PushOnlyChain) {
    ModelSet h;
    auto rt = compile_text(h, R"(activity X { initial i; pin i.out; action A calls Id; pin A.in; pin A.out;
      finalActivity f; pin f.in; edge i.out -> A.in; edge A.out -> f.in; })");
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push i.out [i.out->A.in]", "push A.out [A.out->f.in]"}));
    EXPECT_EQ(queues_without_engine(*rt), (std::set<std::string>{"A.in", "f.in"}));
}

TEST(Engines, QueuesWithoutEnginesBeforeAJoin) {
    ModelSet h;
    auto rt = compile_text(h, R"(activity X { initial i; pin i.out; fork F;
      action A calls Id; pin A.in; pin A.oa; action B calls Id; pin B.in; pin B.ob;
      join J; action C calls Id; pin C.in; pin C.out; finalActivity f; pin f.in;
      edge i.out -> F; edge F -> A.in; edge F -> B.in; edge A.oa -> J; edge B.ob -> J; edge J -> C.in;
      edge C.out -> f.in; })");
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push i.out [i.out->A.in, i.out->B.in]",
                                                      "pull C.in [A.oa->C.in, B.ob->C.in]",
                                                      "push C.out [C.out->f.in]"}));
    EXPECT_EQ(queues_without_engine(*rt), (std::set<std::string>{"A.in", "A.oa", "B.in", "B.ob", "f.in"}));
}

TEST(Engines, OneQueueSplitAcrossPushAndPull) {
    ModelSet h;
    auto rt = compile_text(h, R"(activity X { initial i; pin i.out; fork F;
      action A calls Id; pin A.in; pin A.oa : T; action C calls Id; pin C.in; pin C.oc;
      decision D; join J; action B calls Id; pin B.in; action E calls Id; pin E.in;
      edge i.out -> F; edge F -> A.in; edge F -> C.in; edge A.oa -> D;
      edge D -> B.in guard x = 1; edge D -> J guard otherwise; edge C.oc -> J; edge J -> E.in; })");
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push i.out [i.out->A.in, i.out->C.in]",
                                                      "push A.oa [A.oa->B.in]",
                                                      "pull E.in [A.oa->E.in, C.oc->E.in]"}));
    EXPECT_EQ(queues_without_engine(*rt), (std::set<std::string>{"A.in", "C.in", "C.oc", "B.in"}));
}

TEST(Engines, PathWithEnginesAtBothEndsHasOneOwner) {
    ModelSet set = load_diagram("process_order.ad");
    auto rt = compile(*set.find_activity("ProcessOrder"));
    EXPECT_EQ(engines_of(*rt),
              (std::set<std::string>{
                  "push start.out [start.out->ReceiveOrder.in]",
                  "push ReceiveOrder.order [ReceiveOrder.order->CloseOrder.in, ReceiveOrder.order->FillOrder.in]",
                  "push FillOrder.out [FillOrder.out->SendInvoice.in, FillOrder.out->ShipOrder.in]",
                  "push SendInvoice.out [SendInvoice.out->MakePayment.in]",
                  "push CloseOrder.out [CloseOrder.out->end.in]",
                  "pull CloseOrder.in [MakePayment.out->CloseOrder.in, ShipOrder.out->CloseOrder.in]"}));
    // ReceiveOrder.order -> CloseOrder.in ends at a pulled queue but belongs to the push engine only
    for (const auto& e : rt->pull_engines)
        for (int p : e.paths) EXPECT_TRUE(rt->paths[static_cast<std::size_t>(p)].has_join);
    for (const auto& e : rt->push_engines)
        for (int p : e.paths) EXPECT_FALSE(rt->paths[static_cast<std::size_t>(p)].has_join);
}

TEST(Engines, Fig6SharedQueueTwoPullPaths) {
    ModelSet set = load_diagram("fig6.ad");
    auto rt = compile(set.activities.front());
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push x.out [x.out->a.in]", "push y.out [y.out->b.in]",
                                                      "push z.out [z.out->c.in]", "push d.out [d.out->end.in]",
                                                      "pull d.in [a.p1->d.in, b.p2->d.in, b.p2->d.in, c.p3->d.in]"}));
    EXPECT_EQ(queues_without_engine(*rt),
              (std::set<std::string>{"a.in", "a.p1", "b.in", "b.p2", "c.in", "c.p3", "end.in"}));
}

TEST(Engines, OneQueueSplitAcrossTwoPullEngines) {
    ModelSet h;
    auto rt = compile_text(h, R"(activity X { initial i; pin i.out; fork F;
      action A calls Id; pin A.in; pin A.oa : T; action B calls Id; pin B.in; pin B.ob;
      action C calls Id; pin C.in; pin C.oc; decision D; join J1; join J2;
      action E calls Id; pin E.in; action G calls Id; pin G.in;
      edge i.out -> F; edge F -> A.in; edge F -> B.in; edge F -> C.in; edge A.oa -> D;
      edge D -> J1 guard x = 1; edge D -> J2 guard otherwise; edge B.ob -> J1; edge C.oc -> J2;
      edge J1 -> E.in; edge J2 -> G.in; })");
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push i.out [i.out->A.in, i.out->B.in, i.out->C.in]",
                                                      "pull E.in [A.oa->E.in, B.ob->E.in]",
                                                      "pull G.in [A.oa->G.in, C.oc->G.in]"}));
    EXPECT_EQ(queues_without_engine(*rt), (std::set<std::string>{"A.in", "A.oa", "B.in", "B.ob", "C.in", "C.oc"}));
}

TEST(Engines, MergeOfPushPathsLeavesInputWithoutEngine) {
    ModelSet h;
    auto rt = compile_text(h, R"(activity X { initial i; pin i.out; fork F;
      action A calls Id; pin A.in; pin A.oa; action B calls Id; pin B.in; pin B.ob; merge M;
      action C calls Id; pin C.in;
      edge i.out -> F; edge F -> A.in; edge F -> B.in; edge A.oa -> M; edge B.ob -> M; edge M -> C.in; })");
    EXPECT_EQ(engines_of(*rt), (std::set<std::string>{"push i.out [i.out->A.in, i.out->B.in]",
                                                      "push A.oa [A.oa->C.in]", "push B.ob [B.ob->C.in]"}));
    EXPECT_TRUE(queues_without_engine(*rt).contains("C.in"));
}

// ---------------------------------------------------------------------------
// join criteria structure

TEST(JoinCriteriaShape, LeavesMatchPullPathFan) {
    std::vector<ModelSet> sets;
    sets.push_back(load_diagram("fig6.ad"));
    sets.push_back(load_diagram("process_order.ad"));
    for (std::uint64_t s = 0; s < 200; ++s) sets.push_back(parse_activity(random_valid_diagram(s, 12)));
    int engines = 0;
    for (const auto& set : sets) {
        for (const auto& a : set.activities) {
            auto rt = compile(a);
            for (const auto& e : rt->pull_engines) {
                ++engines;
                std::vector<int> leaves;
                std::function<void(const Expr&)> walk = [&](const Expr& x) {
                    if (x.kind == Expr::Kind::QueueVar) {
                        leaves.push_back(x.route);
                        const Path& p = rt->paths[static_cast<std::size_t>(x.route)];
                        EXPECT_EQ(rt->var_of_queue.at(p.start), x.var);
                    }
                    for (const auto& c : x.children) walk(c);
                };
                walk(e.join_criteria);
                std::sort(leaves.begin(), leaves.end());
                auto owned = e.paths;
                std::sort(owned.begin(), owned.end());
                EXPECT_EQ(leaves, owned) << e.join_criteria.to_prefix();
            }
        }
    }
    EXPECT_GT(engines, 10);
}

TEST(JoinCriteriaShape, DnfOptionKeepsCanJoinOutcomes) {
    ModelSet set = load_diagram("fig6.ad");
    auto plain = compile(set.activities.front());
    auto dnf = compile(set.activities.front(), {.dnf_join_criteria = true});
    const Expr& a = plain->pull_engines[0].join_criteria;
    const Expr& b = dnf->pull_engines[0].join_criteria;
    for (int mask = 0; mask < 8; ++mask) {
        for (int same = 0; same < 2; ++same) {
            TokenBinding bind;
            if (mask & 1) bind["p1"] = Datum{"A", parse_record_literal("{att2:1}")};
            if (mask & 2) bind["p2"] = Datum{"B", parse_record_literal(same ? "{att2:1}" : "{att2:2}")};
            if (mask & 4) bind["p3"] = Datum{"C", parse_record_literal("{k:0}")};
            EXPECT_EQ(eval_join_criteria(a, bind), eval_join_criteria(b, bind));
        }
    }
}

// ---------------------------------------------------------------------------
// path construction against brute-force route enumeration

namespace {

struct OraclePath {
    std::string start, end;
    std::vector<std::size_t> route;
    bool has_join = false;
    friend auto operator<=>(const OraclePath&, const OraclePath&) = default;
};

void collect_fields(const Expr& e, std::map<std::string, std::set<std::string>>& fields) {
    if (e.kind == Expr::Kind::Compare) {
        const Expr& l = e.children[0];
        const Expr& r = e.children[1];
        const Expr* f = l.kind == Expr::Kind::Field ? &l : r.kind == Expr::Kind::Field ? &r : nullptr;
        const Expr* v = f == &l ? &r : &l;
        if (f) {
            auto& vals = fields[f->name];
            if (v->kind == Expr::Kind::Literal && v->literal.is_numeric()) {
                Decimal d = v->literal.as_decimal();
                vals.insert(d.to_string());
                vals.insert((d + Decimal::from_int(1)).to_string());
                vals.insert((d + Decimal::from_int(-1)).to_string());
            } else if (v->kind == Expr::Kind::BareWord) {
                vals.insert(v->name);
                vals.insert("zz");
            } else if (v->kind == Expr::Kind::Literal) {
                vals.insert(v->literal.to_literal());
            }
        }
    }
    for (const auto& c : e.children) collect_fields(c, fields);
}

std::vector<Datum> probes(const ActivityModel& m) {
    std::map<std::string, std::set<std::string>> fields;
    for (const auto& e : m.edges)
        if (e.guard) collect_fields(*e.guard, fields);
    std::vector<Datum> out{Datum{"T", {}}};
    for (const auto& [name, values] : fields) {
        std::vector<Datum> next;
        for (const auto& d : out)
            for (const auto& v : values) {
                Datum x = d;
                x.fields[name] = parse_scalar_literal(v);
                next.push_back(std::move(x));
            }
        out = std::move(next);
        if (out.size() > 400) out.resize(400);
    }
    return out;
}

bool edge_admits(const ActivityModel& m, std::size_t edge, const Datum& token) {
    const auto& g = m.edges[edge].guard;
    if (!g) return true;
    if (g->kind != Expr::Kind::Otherwise) return eval_guard(*g, token);
    for (std::size_t s : m.outgoing(m.edges[edge].source)) {
        if (s == edge) continue;
        const auto& sg = m.edges[s].guard;
        if (sg && sg->kind != Expr::Kind::Otherwise && eval_guard(*sg, token)) return false;
    }
    return true;
}

void enumerate(const ActivityModel& m, std::size_t from, std::size_t node, std::vector<std::size_t>& route,
               std::vector<OraclePath>& out) {
    for (std::size_t e : m.outgoing(node)) {
        std::size_t t = m.edges[e].target;
        if (std::find(route.begin(), route.end(), e) != route.end()) continue;
        route.push_back(e);
        if (m.nodes[t].kind == NodeKind::InputPin) {
            OraclePath p{m.nodes[from].name, m.nodes[t].name, route, false};
            for (std::size_t x : route) p.has_join |= m.nodes[m.edges[x].target].kind == NodeKind::JoinNode;
            out.push_back(std::move(p));
        } else if (is_control_node(m.nodes[t].kind)) {
            enumerate(m, from, t, route, out);
        }
        route.pop_back();
    }
}

}  // namespace

TEST(PathOracle, CreatePathsMatchesRouteEnumeration) {
    std::vector<ModelSet> sets;
    for (const char* f : {"fig6.ad", "process_order.ad", "minimal.ad"}) sets.push_back(load_diagram(f));
    for (std::uint64_t s = 0; s < 300; ++s) sets.push_back(parse_activity(random_valid_diagram(s, 12)));
    std::size_t compared = 0;
    for (const auto& set : sets) {
        for (const auto& m : set.activities) {
            std::vector<OraclePath> expected;
            for (std::size_t n = 0; n < m.nodes.size(); ++n) {
                if (m.nodes[n].kind != NodeKind::OutputPin) continue;
                std::vector<std::size_t> route;
                enumerate(m, n, n, route, expected);
            }
            auto rt = compile(m);
            std::vector<OraclePath> actual;
            for (const auto& p : rt->paths)
                actual.push_back({rt->queue(p.start).name, rt->queue(p.end).name, p.route, p.has_join});
            std::sort(expected.begin(), expected.end());
            std::vector<OraclePath> sorted_actual = actual;
            std::sort(sorted_actual.begin(), sorted_actual.end());
            ASSERT_EQ(sorted_actual, expected) << m.name;
            auto tokens = probes(m);
            for (const auto& p : rt->paths) {
                for (const auto& tok : tokens) {
                    bool want = std::all_of(p.route.begin(), p.route.end(),
                                            [&](std::size_t e) { return edge_admits(m, e, tok); });
                    ASSERT_EQ(eval_guard(p.pass_rule, tok), want)
                        << m.name << " " << p.pass_rule.to_string() << " on " << tok.render();
                }
                ++compared;
            }
        }
    }
    EXPECT_GT(compared, 1000u);
}

TEST(DumpFormat, SectionsInOrder) {
    ModelSet set = load_diagram("minimal.ad");
    std::string dump = dump_runtime(*compile(set.activities.front()));
    EXPECT_EQ(dump,
              "activity A mode=separate final=true\n"
              "# nodes\n"
              "InitialNode i\n"
              "ActivityFinalNode f\n"
              "# queues\n"
              "q0 output i.out null push0\n"
              "q1 input f.in null\n"
              "# paths\n"
              "i.out -> f.in : true : push\n"
              "# routes\n"
              "p0 e1\n"
              "# engines\n"
              "push0 i.out p0\n");
}
