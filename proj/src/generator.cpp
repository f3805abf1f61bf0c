#include "advm/oracle.hpp"

#include <random>
#include <sstream>

namespace advm {

namespace {

class Generator {
public:
    Generator(std::uint64_t seed, std::size_t bound, const GeneratorOptions& options)
        : rng_(seed), bound_(std::max<std::size_t>(bound, 3)), options_(options) {}

    std::string build() {
        std::ostringstream main;
        main << "activity Main {\n";
        line("initial start;");
        line("pin start.out;");
        nodes_ = 2;  // start and end
        std::string cur = "start.out";
        cur = action(cur, "const({n:" + std::to_string(pick(0, 3)) + ", v:" + std::to_string(pick(0, 4)) + "})");
        bool after_join = false;
        bool injected = false;
        while (nodes_ < bound_) {
            std::size_t room = bound_ - nodes_;
            if (options_.inject_fork_join && !injected && room >= 3) {
                cur = fork_join_mix(cur);
                injected = true;
                continue;
            }
            int kind = after_join ? 0 : pick(0, 6);
            after_join = false;
            if (kind == 1 && room >= 4) {
                cur = decision(cur);
            } else if (kind == 2 && room >= 5) {
                cur = fork_join(cur);
                after_join = true;
            } else if (kind == 3 && room >= 1) {
                cur = call(cur);
            } else if (kind == 4 && room >= 4) {
                cur = async_side(cur);
            } else if (kind == 5 && room >= 3) {
                cur = loop(cur);
            } else if (kind == 6 && room >= 3) {
                cur = exit_branch(cur);
            } else {
                cur = action(cur, stub());
            }
        }
        if (options_.inject_fork_join && !injected) cur = fork_join_mix(cur);
        if (after_join) cur = action(cur, stub());
        line("finalActivity end;");
        line("pin end.in;");
        edge(cur, "end.in");
        main << body_.str() << edges_.str() << "}\n";

        std::ostringstream out;
        out << "// generated\n";
        out << behaviors_.str() << "\n" << main.str() << subs_.str();
        return out.str();
    }

private:
    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    void line(const std::string& s) { body_ << "  " << s << "\n"; }

    void edge(const std::string& from, const std::string& to, std::string guard = {}) {
        if (from == loop_exit_ && guard.empty()) {
            guard = "otherwise";
            loop_exit_.clear();
        }
        edges_ << "  edge " << from << " -> " << to;
        if (!guard.empty()) edges_ << " guard " << guard;
        edges_ << ";\n";
    }

    std::string stub() {
        switch (pick(0, 4)) {
        case 0: return "identity";
        case 1: return "set(v, " + std::to_string(pick(0, 4)) + ")";
        case 2: return "add(n, 1)";
        case 3: return "add(v, " + std::to_string(pick(1, 3)) + ")";
        default: return "set(tag, t" + std::to_string(pick(0, 2)) + ")";
        }
    }

    std::string behavior(const std::string& body) {
        std::string name = "B" + std::to_string(++behaviors_count_);
        behaviors_ << "behavior " << name << " = " << body << ";\n";
        return name;
    }

    /// Declares action `A<k>` with one input and one output pin; returns
    /// its output pin. `typed` false makes a control output.
    std::string declare_action(const std::string& calls, bool async, bool typed_out) {
        int k = ++actions_;
        std::string a = "A" + std::to_string(k);
        line("action " + a + " calls " + calls + (async ? " async;" : ";"));
        line("pin " + a + ".i" + std::to_string(k) + ";");
        line("pin " + a + ".o" + std::to_string(k) + (typed_out ? " : T;" : ";"));
        ++nodes_;
        return a;
    }

    std::string action(const std::string& from, const std::string& body, const std::string& guard = {}) {
        std::string a = declare_action(behavior(body), false, true);
        edge(from, a + ".i" + std::to_string(actions_), guard);
        return a + ".o" + std::to_string(actions_);
    }

    std::string guard_pair(std::string& other) {
        switch (pick(0, 2)) {
        case 0: {
            int c = pick(1, 4);
            other = "n >= " + std::to_string(c);
            return "n < " + std::to_string(c);
        }
        case 1: {
            int c = pick(0, 4);
            other = "v <> " + std::to_string(c);
            return "v = " + std::to_string(c);
        }
        default:
            other = "otherwise";
            return "v > " + std::to_string(pick(0, 4));
        }
    }

    std::string decision(const std::string& from) {
        int k = ++controls_;
        std::string d = "D" + std::to_string(k), m = "M" + std::to_string(k);
        line("decision " + d + ";");
        line("merge " + m + ";");
        nodes_ += 2;
        edge(from, d);
        std::string g2;
        std::string g1 = guard_pair(g2);
        std::string left = action(d, stub(), g1);
        std::string right = action(d, stub(), g2);
        edge(left, m);
        edge(right, m);
        return m;
    }

    std::string exit_branch(const std::string& from) {
        int k = ++controls_;
        std::string d = "D" + std::to_string(k), ff = "X" + std::to_string(k);
        line("decision " + d + ";");
        line("finalFlow " + ff + ";");
        line("pin " + ff + ".in;");
        nodes_ += 2;
        edge(from, d);
        std::string g2;
        std::string g1 = guard_pair(g2);
        if (pick(0, 1)) std::swap(g1, g2);
        edge(d, ff + ".in", g1);
        return action(d, stub(), g2);
    }

    std::string fork_join(const std::string& from) {
        int k = ++controls_;
        std::string f = "F" + std::to_string(k), j = "J" + std::to_string(k);
        line("fork " + f + ";");
        nodes_ += 2;
        edge(from, f);
        std::string left = action(f, stub());
        std::string right = action(f, stub());
        std::string lv = left.substr(left.find('.') + 1), rv = right.substr(right.find('.') + 1);
        switch (pick(0, 3)) {
        case 0: line("join " + j + " when " + lv + ".n = " + rv + ".n;"); break;
        case 1: line("join " + j + " when " + lv + ".v <= " + rv + ".v;"); break;
        default: line("join " + j + ";"); break;
        }
        edge(left, j);
        edge(right, j);
        return j;
    }

    std::string fork_join_mix(const std::string& from) {
        int k = ++controls_;
        std::string f = "F" + std::to_string(k), j = "J" + std::to_string(k);
        line("fork " + f + ";");
        line("join " + j + ";");
        nodes_ += 2;
        edge(from, f);
        edge(f, j);
        std::string side = action(f, "identity");
        edge(side, j);
        return action(j, "identity");
    }

    std::string sub_activity() {
        int k = ++subs_count_;
        std::string name = "Sub" + std::to_string(k);
        std::ostringstream s;
        s << "\nactivity " << name << " (in a" << k << ": T, out r" << k << ": T) {\n";
        s << "  param a" << k << ";\n  pin a" << k << ".out;\n";
        s << "  param r" << k << ";\n  pin r" << k << ".in;\n";
        int steps = pick(1, 2);
        std::string cur = "a" + std::to_string(k) + ".out";
        std::ostringstream edges;
        for (int i = 1; i <= steps; ++i) {
            std::string a = "S" + std::to_string(k) + "x" + std::to_string(i);
            s << "  action " << a << " calls " << behavior(stub()) << ";\n";
            s << "  pin " << a << ".in : T;\n  pin " << a << ".out : T;\n";
            edges << "  edge " << cur << " -> " << a << ".in;\n";
            cur = a + ".out";
        }
        edges << "  edge " << cur << " -> r" << k << ".in;\n";
        s << edges.str() << "}\n";
        subs_ << s.str();
        return name;
    }

    std::string call(const std::string& from) {
        std::string a = declare_action(sub_activity(), false, true);
        edge(from, a + ".i" + std::to_string(actions_));
        return a + ".o" + std::to_string(actions_);
    }

    std::string async_side(const std::string& from) {
        int k = ++controls_;
        std::string f = "F" + std::to_string(k), ff = "X" + std::to_string(k);
        line("fork " + f + ";");
        line("finalFlow " + ff + ";");
        line("pin " + ff + ".in;");
        nodes_ += 2;
        edge(from, f);
        std::string target = pick(0, 2) == 0 ? sub_activity() : behavior(stub());
        std::string a = declare_action(target, true, false);
        edge(f, a + ".i" + std::to_string(actions_));
        edge(a + ".o" + std::to_string(actions_), ff + ".in");
        return action(f, stub());
    }

    std::string loop(const std::string& from) {
        int k = ++controls_;
        std::string m = "L" + std::to_string(k), d = "D" + std::to_string(k);
        line("merge " + m + ";");
        line("decision " + d + ";");
        nodes_ += 2;
        edge(from, m);
        std::string body = action(m, "add(n, 1)");
        edge(body, d);
        edge(d, m, "n < " + std::to_string(pick(1, 5)));
        loop_exit_ = d;
        return d;
    }

    std::mt19937_64 rng_;
    std::size_t bound_;
    GeneratorOptions options_;
    std::size_t nodes_ = 0;
    std::string loop_exit_;
    int actions_ = 0, controls_ = 0, behaviors_count_ = 0, subs_count_ = 0;
    std::ostringstream body_, edges_, behaviors_, subs_;
};

}  // namespace

std::string random_valid_diagram(std::uint64_t seed, std::size_t size_bound, const GeneratorOptions& options) {
    return Generator(seed, size_bound, options).build();
}

}  // namespace advm
