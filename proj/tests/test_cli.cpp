#include "advm/cli.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using advm::test::diagram_path;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = advm::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, ValidateRejectsCycleWithE1) {
    Result r = cli({"validate", diagram_path("fig1a.ad")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error E1"), std::string::npos) << r.err;
    EXPECT_EQ(r.err.find("E2"), std::string::npos);
}

TEST(Cli, ValidateRejectsForkJoinWithE2) {
    Result r = cli({"validate", diagram_path("fig1b.ad")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error E2"), std::string::npos) << r.err;
}

TEST(Cli, ValidateAcceptsProcessOrder) {
    Result r = cli({"validate", diagram_path("process_order.ad")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2 activities valid"), std::string::npos);
    EXPECT_TRUE(r.err.empty());
}

TEST(Cli, ValidateReportsParseErrors) {
    Result r = cli({"validate", diagram_path("does_not_exist.ad")});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, RunProcessOrder) {
    Result r = cli({"run", diagram_path("process_order.ad"), "--activity", "ProcessOrder", "--seed", "7"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("status: completed"), std::string::npos) << r.out;
}

TEST(Cli, RunWithArgumentsAndOutputs) {
    Result r = cli({"run", diagram_path("process_order.ad"), "--activity", "MakePayment", "--args",
                    "invoice=Invoice{order:1, amount:150}"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("outputs: [Payment{amount:150,order:1,paid:true}]"), std::string::npos) << r.out;
}

TEST(Cli, RunStuckExitsWithThree) {
    Result r = cli({"run", diagram_path("fig6.ad"), "--activity", "Fig6", "--args", "x={att2:1}", "--args",
                    "y={att2:2, side:left}", "--args", "z={k:3}"});
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, RunBindOverridesBehavior) {
    Result r = cli({"run", diagram_path("process_order.ad"), "--activity", "ProcessOrder", "--bind",
                    "Receive=const({id:9, status:rejected})", "--trace", "-"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.find("FillOrder"), std::string::npos);
    EXPECT_NE(r.out.find("CloseOrder"), std::string::npos);
}

TEST(Cli, RunUsageErrors) {
    EXPECT_EQ(cli({"run", diagram_path("process_order.ad"), "--activity", "Nope"}).code, 1);
    EXPECT_EQ(cli({"run", diagram_path("process_order.ad"), "--activity", "MakePayment"}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
}

TEST(Cli, TraceIsByteIdenticalForAFixedSeed) {
    std::vector<std::string> args{"run", diagram_path("process_order.ad"), "--activity", "ProcessOrder",
                                  "--seed", "5", "--trace", "-"};
    Result first = cli(args);
    ASSERT_EQ(first.code, 0);
    EXPECT_NE(first.out.find("\"kind\":\"ActionStarted\""), std::string::npos);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(cli(args).out, first.out);
}

TEST(Cli, CompileDumpShowsJoinCriteria) {
    Result r = cli({"compile", "--dump", diagram_path("fig6.ad")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("OR(AND(\"p1.att2 = p2.att2\", p1, p2), AND(p2, p3))"), std::string::npos) << r.out;
}

TEST(Cli, CompileDumpDnf) {
    Result r = cli({"compile", "--dump", "--dnf", diagram_path("process_order.ad"), "--activity", "ProcessOrder"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("AND(ShipOrder.out, MakePayment.out)"), std::string::npos) << r.out;
    EXPECT_EQ(r.out.find("activity MakePayment"), std::string::npos);
}

TEST(Cli, CheckEquivalenceOnFixture) {
    Result r = cli({"check-equivalence", diagram_path("process_order.ad"), "--activity", "ProcessOrder", "--seeds",
                    "3"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("seed 2: equivalent"), std::string::npos);
    EXPECT_EQ(r.out.find("DIVERGENT"), std::string::npos);
}

TEST(Cli, CheckEquivalenceFuzz) {
    Result r = cli({"check-equivalence", "--fuzz", "20", "--size-bound", "10", "--seeds", "2", "--fuzz-seed", "100"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("fuzz: 20 diagrams, 40 runs, 0 divergences"), std::string::npos) << r.out;
}
