#include "advm/oracle.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

namespace advm {

namespace {

using json = nlohmann::ordered_json;

std::string strip_calls(const std::string& label) {
    std::string out;
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i] == '#') {
            while (i + 1 < label.size() && std::isdigit(static_cast<unsigned char>(label[i + 1]))) ++i;
            continue;
        }
        out += label[i];
    }
    return out;
}

std::string local_queue(const std::string& queue) {
    auto colon = queue.rfind(':');
    return colon == std::string::npos ? queue : queue.substr(colon + 1);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

using PinValues = std::vector<std::pair<std::string, std::vector<std::string>>>;

void add_value(PinValues& pv, const std::string& pin, const std::string& value) {
    auto it = std::find_if(pv.begin(), pv.end(), [&](const auto& p) { return p.first == pin; });
    if (it == pv.end()) {
        pv.emplace_back(pin, std::vector<std::string>{});
        it = pv.end() - 1;
    }
    it->second.push_back(value);
}

void normalise(PinValues& pv) {
    std::sort(pv.begin(), pv.end());
    for (auto& [pin, values] : pv) std::sort(values.begin(), values.end());
}

std::string render(const PinValues& pv) {
    std::string out = "{";
    bool first = true;
    for (const auto& [pin, values] : pv) {
        if (!first) out += ", ";
        first = false;
        out += pin + ": [";
        for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + values[i];
        out += "]";
    }
    return out + "}";
}

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string EssentialFiring::describe() const {
    return instance + " fires " + action + " consuming " + render(consumed) + " producing " + render(produced);
}

std::vector<EssentialFiring> essential_trace(const Trace& trace) {
    struct Raw {
        EssentialFiring firing;
        std::vector<std::uint64_t> origins;
    };
    std::map<std::uint64_t, Raw> firings;  // firing id -> data
    std::vector<std::uint64_t> order;
    std::map<std::uint64_t, std::uint64_t> birth_firing;        // birth -> firing id
    std::map<std::uint64_t, std::string> birth_source;          // birth -> source key (without parent)
    std::map<std::uint64_t, std::optional<std::uint64_t>> birth_parent;
    std::map<std::string, std::optional<std::uint64_t>> invoked_by;  // instance label -> invoking firing

    for (const auto& ev : trace.events()) {
        const json& p = ev.payload;
        switch (ev.kind) {
        case EventKind::ActivityInvoked: {
            std::optional<std::uint64_t> by;
            if (p.contains("invoked_by")) by = p["invoked_by"].get<std::uint64_t>();
            invoked_by[p["instance"].get<std::string>()] = by;
            break;
        }
        case EventKind::ActionStarted: {
            Raw r;
            r.firing.seq = ev.seq;
            r.firing.instance = strip_calls(p["instance"].get<std::string>());
            r.firing.action = p["action"].get<std::string>();
            for (const auto& c : p["consumed"]) {
                add_value(r.firing.consumed, c["pin"].get<std::string>(), value_text(c["value"]));
                for (const auto& o : c["origins"]) r.origins.push_back(o.get<std::uint64_t>());
            }
            std::uint64_t id = p["firing"].get<std::uint64_t>();
            firings[id] = std::move(r);
            order.push_back(id);
            break;
        }
        case EventKind::TokenCreated: {
            std::uint64_t birth = p["birth"].get<std::uint64_t>();
            std::string inst = p["instance"].get<std::string>();
            if (p.contains("firing")) {
                std::uint64_t f = p["firing"].get<std::uint64_t>();
                birth_firing[birth] = f;
                auto it = firings.find(f);
                if (it != firings.end())
                    add_value(it->second.firing.produced, local_queue(p["queue"].get<std::string>()),
                              value_text(p["value"]));
            } else if (p.value("source", "") != "join") {
                birth_source[birth] = "S|" + strip_calls(inst) + "|" + local_queue(p["queue"].get<std::string>()) +
                                      "|" + value_text(p["value"]);
                auto it = invoked_by.find(inst);
                birth_parent[birth] = it == invoked_by.end() ? std::nullopt : it->second;
            }
            break;
        }
        default:
            break;
        }
    }

    std::map<std::uint64_t, std::uint64_t> memo;
    std::function<std::uint64_t(std::uint64_t)> hash_of = [&](std::uint64_t id) -> std::uint64_t {
        if (auto it = memo.find(id); it != memo.end()) return it->second;
        Raw& r = firings.at(id);
        normalise(r.firing.consumed);
        normalise(r.firing.produced);
        std::vector<std::string> deps;
        for (std::uint64_t b : r.origins) {
            if (auto f = birth_firing.find(b); f != birth_firing.end() && firings.contains(f->second) && f->second != id) {
                deps.push_back("F" + std::to_string(hash_of(f->second)));
            } else if (auto s = birth_source.find(b); s != birth_source.end()) {
                auto parent = birth_parent[b];
                std::string key = s->second + "|";
                key += parent && firings.contains(*parent) ? std::to_string(hash_of(*parent)) : "root";
                deps.push_back(key);
            } else {
                deps.push_back("?" + std::to_string(b));
            }
        }
        std::sort(deps.begin(), deps.end());
        std::string canon = r.firing.instance + "|" + r.firing.action + "|" + render(r.firing.consumed) + "|" +
                            render(r.firing.produced) + "|";
        for (const auto& d : deps) canon += d + ";";
        std::uint64_t h = fnv1a(canon);
        memo[id] = h;
        r.firing.hash = h;
        return h;
    };

    std::vector<EssentialFiring> out;
    for (std::uint64_t id : order) {
        hash_of(id);
        out.push_back(firings.at(id).firing);
    }
    return out;
}

TraceComparison compare_essential_traces(const Trace& a, const Trace& b) {
    auto ea = essential_trace(a);
    auto eb = essential_trace(b);
    std::map<std::uint64_t, std::vector<const EssentialFiring*>> pool_b;
    for (const auto& f : eb) pool_b[f.hash].push_back(&f);
    std::map<std::uint64_t, std::size_t> used;
    TraceComparison result;
    for (const auto& f : ea) {
        auto& bucket = pool_b[f.hash];
        if (used[f.hash] < bucket.size()) {
            ++used[f.hash];
            continue;
        }
        result.equivalent = false;
        TraceComparison::Divergence d;
        d.seq_a = f.seq;
        const EssentialFiring* near = nullptr;
        for (const auto& g : eb)
            if (g.instance == f.instance && g.action == f.action) {
                near = &g;
                break;
            }
        if (near) {
            d.seq_b = near->seq;
            d.explanation = "first trace: " + f.describe() + "; closest in second trace: " + near->describe();
            if (near->consumed == f.consumed && near->produced == f.produced)
                d.explanation += " (same values, different causes)";
        } else {
            d.explanation = "first trace: " + f.describe() + "; the second trace never fires " + f.action + " in " +
                            f.instance;
        }
        result.first_divergence = std::move(d);
        return result;
    }
    for (const auto& g : eb) {
        if (used[g.hash] > 0) {
            --used[g.hash];
            continue;
        }
        result.equivalent = false;
        TraceComparison::Divergence d;
        d.seq_b = g.seq;
        d.explanation = "second trace has an extra firing: " + g.describe();
        result.first_divergence = std::move(d);
        return result;
    }
    return result;
}

}  // namespace advm
