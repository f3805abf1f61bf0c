#include "advm/cli.hpp"

#include "advm/compiler.hpp"
#include "advm/oracle.hpp"
#include "advm/validate.hpp"
#include "advm/vm.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

namespace advm {

namespace {

struct Loaded {
    ModelSet models;
    bool ok = false;
};

Loaded load(const std::string& path, const std::vector<std::string>& binds, std::ostream& err) {
    Loaded l;
    try {
        l.models = parse_activity_file(path);
        for (const auto& b : binds) {
            auto eq = b.find('=');
            if (eq == std::string::npos) {
                err << "advm: --bind expects Name=stub, got '" << b << "'\n";
                return l;
            }
            std::string name = b.substr(0, eq);
            l.models.behaviors.insert_or_assign(name, BehaviorSpec::parse(name, b.substr(eq + 1)));
        }
    } catch (const ParseError& ex) {
        err << path << ":" << ex.what() << "\n";
        return l;
    } catch (const std::exception& ex) {
        err << path << ": " << ex.what() << "\n";
        return l;
    }
    l.ok = true;
    return l;
}

/// Prints diagnostics; false when any activity has errors.
bool check(const std::string& path, const ModelSet& models, std::ostream& err) {
    bool clean = true;
    for (const auto& a : models.activities) {
        auto r = validate(a, models);
        for (const auto& d : r.errors) err << path << ": " << a.name << ": error " << d.to_string() << "\n";
        for (const auto& d : r.warnings) err << path << ": " << a.name << ": warning " << d.to_string() << "\n";
        clean &= r.accepted();
    }
    return clean;
}

Datum parse_arg_value(const std::string& text) {
    Datum d;
    auto brace = text.find('{');
    if (brace != std::string::npos && brace > 0) d.type = text.substr(0, brace);
    d.fields = parse_record_literal(brace == std::string::npos ? text : text.substr(brace));
    return d;
}

/// Orders `name=value` pairs by the activity's input parameters.
bool bind_args(const ActivityModel& m, const std::vector<std::string>& given, std::vector<Datum>& out,
               std::ostream& err) {
    std::map<std::string, Datum> by_name;
    for (const auto& g : given) {
        auto eq = g.find('=');
        if (eq == std::string::npos) {
            err << "advm: --args expects name=value, got '" << g << "'\n";
            return false;
        }
        try {
            by_name[g.substr(0, eq)] = parse_arg_value(g.substr(eq + 1));
        } catch (const std::exception& ex) {
            err << "advm: bad value for '" << g.substr(0, eq) << "': " << ex.what() << "\n";
            return false;
        }
    }
    for (std::size_t p : m.parameters_with(Direction::In)) {
        auto it = by_name.find(m.parameters[p].name);
        if (it == by_name.end()) {
            err << "advm: missing --args " << m.parameters[p].name << "=...\n";
            return false;
        }
        out.push_back(it->second);
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        err << "advm: '" << m.name << "' has no input parameter '" << by_name.begin()->first << "'\n";
        return false;
    }
    return true;
}

std::string render_outputs(const std::vector<Datum>& outputs) {
    std::string s = "[";
    for (std::size_t i = 0; i < outputs.size(); ++i) s += (i ? ", " : "") + outputs[i].render();
    return s + "]";
}

struct Verdict {
    bool equivalent = true;
    std::string detail;
};

Verdict cross_check(const ModelSet& models, const std::string& activity, const std::vector<Datum>& args,
                    std::uint64_t seed) {
    BehaviorRegistry behaviors = BehaviorRegistry::from_models(models);
    MachineOptions options;
    options.seed = seed;
    Machine vm(models, behaviors, options);
    RunResult a = vm.run(activity, args);
    RunResult b = oracle_run(models, behaviors, activity, args, {.seed = seed});
    Verdict v;
    if (a.status != b.status) {
        v.equivalent = false;
        v.detail = "status " + std::string(to_string(a.status)) + " vs oracle " + std::string(to_string(b.status));
        if (!a.error.empty()) v.detail += " (vm: " + a.error + ")";
        if (!b.error.empty()) v.detail += " (oracle: " + b.error + ")";
        return v;
    }
    auto cmp = compare_essential_traces(a.trace, b.trace);
    if (!cmp.equivalent) {
        v.equivalent = false;
        v.detail = cmp.first_divergence->explanation;
        return v;
    }
    if (a.outputs != b.outputs) {
        v.equivalent = false;
        v.detail = "outputs " + render_outputs(a.outputs) + " vs oracle " + render_outputs(b.outputs);
        return v;
    }
    v.detail = std::string(to_string(a.status)) + ", " + std::to_string(essential_trace(a.trace).size()) + " firings";
    if (a.status == RunStatus::Error) v.detail += " (" + a.error + ")";
    return v;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Activity diagram virtual machine", "advm"};
    app.require_subcommand(1);

    std::string file, activity, trace_path;
    std::vector<std::string> arg_values, binds;
    std::uint64_t seed = 0;
    std::size_t seeds = 5, fuzz = 0, size_bound = 12, max_steps = 200000;
    std::uint64_t fuzz_seed = 0;
    bool dump = false, dnf = false;

    auto* cmd_validate = app.add_subcommand("validate", "check a diagram file against the subset rules");
    cmd_validate->add_option("file", file, "diagram file")->required();
    cmd_validate->add_option("--bind", binds, "Name=stub behavior binding");

    auto* cmd_compile = app.add_subcommand("compile", "compile and print runtime structures");
    cmd_compile->add_flag("--dump", dump, "print the runtime listing");
    cmd_compile->add_option("file", file, "diagram file")->required();
    cmd_compile->add_option("--activity", activity, "only this activity");
    cmd_compile->add_flag("--dnf", dnf, "join criteria in disjunctive normal form");
    cmd_compile->add_option("--bind", binds, "Name=stub behavior binding");

    auto* cmd_run = app.add_subcommand("run", "execute an activity");
    cmd_run->add_option("file", file, "diagram file")->required();
    cmd_run->add_option("--activity", activity, "activity to invoke")->required();
    cmd_run->add_option("--args", arg_values, "name=value per input parameter");
    cmd_run->add_option("--seed", seed, "scheduler seed");
    cmd_run->add_option("--trace", trace_path, "write the JSONL trace here (- for stdout)");
    cmd_run->add_option("--bind", binds, "Name=stub behavior binding");
    cmd_run->add_option("--max-steps", max_steps, "scheduler step limit");
    cmd_run->add_flag("--dnf", dnf, "join criteria in disjunctive normal form");

    auto* cmd_eq = app.add_subcommand("check-equivalence", "compare the VM with the reference interpreter");
    cmd_eq->add_option("file", file, "diagram file");
    cmd_eq->add_option("--activity", activity, "activity to invoke");
    cmd_eq->add_option("--args", arg_values, "name=value per input parameter");
    cmd_eq->add_option("--seeds", seeds, "scheduler seeds per diagram");
    cmd_eq->add_option("--fuzz", fuzz, "check this many generated diagrams instead of a file");
    cmd_eq->add_option("--size-bound", size_bound, "node bound for generated diagrams");
    cmd_eq->add_option("--fuzz-seed", fuzz_seed, "first generator seed");
    cmd_eq->add_option("--bind", binds, "Name=stub behavior binding");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        std::ostringstream o, e;
        int code = app.exit(ex, o, e);
        out << o.str();
        err << e.str();
        return code == 0 ? 0 : 1;
    }

    if (cmd_validate->parsed()) {
        Loaded l = load(file, binds, err);
        if (!l.ok) return 2;
        if (!check(file, l.models, err)) return 2;
        out << file << ": " << l.models.activities.size() << " activities valid\n";
        return 0;
    }

    if (cmd_compile->parsed()) {
        Loaded l = load(file, binds, err);
        if (!l.ok || !check(file, l.models, err)) return 2;
        bool found = false;
        for (const auto& a : l.models.activities) {
            if (!activity.empty() && a.name != activity) continue;
            found = true;
            auto rt = compile(a, {.dnf_join_criteria = dnf});
            if (dump) out << dump_runtime(*rt);
        }
        if (!found) {
            err << "advm: no activity named '" << activity << "'\n";
            return 1;
        }
        return 0;
    }

    if (cmd_run->parsed()) {
        Loaded l = load(file, binds, err);
        if (!l.ok || !check(file, l.models, err)) return 2;
        const ActivityModel* def = l.models.find_activity(activity);
        if (!def) {
            err << "advm: no activity named '" << activity << "'\n";
            return 1;
        }
        std::vector<Datum> values;
        if (!bind_args(*def, arg_values, values, err)) return 1;
        MachineOptions options;
        options.seed = seed;
        options.max_steps = max_steps;
        options.compile.dnf_join_criteria = dnf;
        Machine vm(l.models, BehaviorRegistry::from_models(l.models), options);
        RunResult r = vm.run(activity, values);
        if (trace_path == "-") {
            out << r.trace.to_jsonl();
        } else if (!trace_path.empty()) {
            std::ofstream f(trace_path, std::ios::binary);
            if (!f) {
                err << "advm: cannot write " << trace_path << "\n";
                return 1;
            }
            f << r.trace.to_jsonl();
        }
        out << "status: " << to_string(r.status) << "\n";
        if (r.status == RunStatus::Completed) out << "outputs: " << render_outputs(r.outputs) << "\n";
        if (r.status == RunStatus::Error) err << "advm: " << r.error << "\n";
        return r.exit_code();
    }

    // check-equivalence
    std::size_t divergences = 0;
    if (fuzz > 0) {
        std::size_t runs = 0;
        for (std::size_t i = 0; i < fuzz; ++i) {
            std::uint64_t gseed = fuzz_seed + i;
            std::string text = random_valid_diagram(gseed, size_bound);
            ModelSet models = parse_activity(text);
            for (const auto& a : models.activities) {
                if (!validate(a, models).accepted()) {
                    err << "generator seed " << gseed << ": " << a.name << " rejected by the validator\n";
                    ++divergences;
                }
            }
            for (std::uint64_t s = 0; s < seeds; ++s) {
                ++runs;
                Verdict v = cross_check(models, "Main", {}, s);
                if (!v.equivalent) {
                    ++divergences;
                    out << "diagram " << gseed << " seed " << s << ": DIVERGENT: " << v.detail << "\n";
                }
            }
        }
        out << "fuzz: " << fuzz << " diagrams, " << runs << " runs, " << divergences << " divergences\n";
        return divergences == 0 ? 0 : 1;
    }
    if (file.empty() || activity.empty()) {
        err << "advm: check-equivalence needs <file> --activity, or --fuzz N\n";
        return 1;
    }
    Loaded l = load(file, binds, err);
    if (!l.ok || !check(file, l.models, err)) return 2;
    const ActivityModel* def = l.models.find_activity(activity);
    if (!def) {
        err << "advm: no activity named '" << activity << "'\n";
        return 1;
    }
    std::vector<Datum> values;
    if (!bind_args(*def, arg_values, values, err)) return 1;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        Verdict v = cross_check(l.models, activity, values, s);
        out << "seed " << s << ": " << (v.equivalent ? "equivalent" : "DIVERGENT") << ": " << v.detail << "\n";
        divergences += v.equivalent ? 0 : 1;
    }
    return divergences == 0 ? 0 : 1;
}

}  // namespace advm
