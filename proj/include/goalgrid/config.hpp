#pragma once

// Run configuration in a flat sectioned key-value text format:
//
//   [market]   risk_free discount drifts vol_1 vol_2 correlation
//   [goals.N]  target deadline weight penalty_in penalty_out
//   [grid]     x_max dx dt_last dt_two
//   [solver]   penalty_scale policy_tol max_policy_iters
//              allocation_step_fine allocation_step_coarse label_tol
//   [sim]      seed n_paths dt_sim x1 x2 trace_paths
//
// '#' starts a comment. Unknown sections and keys are rejected. Omitted
// solver and sim knobs take their defaults, and echo_config writes every
// value back out, so load -> echo -> load is a fixed point.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/model.hpp"
#include "goalgrid/regions.hpp"
#include "goalgrid/simulate.hpp"
#include "goalgrid/stepper.hpp"

namespace goalgrid {

struct PeriodGrids {
    double x_max = 10.0;
    double dx = 0.2;
    double dt_last = 0.01;  // one-goal period
    double dt_two = 0.2;    // two-goal period

    friend bool operator==(const PeriodGrids&, const PeriodGrids&) = default;
};

struct RunConfig {
    MarketParams market;
    GoalLadder ladder;
    PeriodGrids grid;
    SolverConfig solver;
    double label_tol = kLabelTolerance;
    std::optional<SimConfig> sim;
    std::string output_dir = "runs";

    AxisGrid axis() const { return make_axis(grid.x_max, grid.dx); }
    TimeLine two_goal_times() const { return make_timeline(0.0, ladder[0].deadline, grid.dt_two); }
    TimeLine last_times() const {
        return make_timeline(ladder[0].deadline, ladder[1].deadline, grid.dt_last);
    }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct RawEntry {
    std::string value;
    int line = 0;
};

using RawSection = std::map<std::string, RawEntry>;

class SectionReader {
public:
    SectionReader(std::string name, RawSection entries)
        : name_(std::move(name)), entries_(std::move(entries)) {}

    std::optional<double> number(const std::string& key) {
        auto it = take(key);
        if (!it) return std::nullopt;
        return parse_double(*it, key);
    }

    double number(const std::string& key, double fallback) {
        return number(key).value_or(fallback);
    }

    double required(const std::string& key) {
        auto v = number(key);
        if (!v) throw Error(ErrorKind::ValidationError, "missing required key", path(key));
        return *v;
    }

    std::optional<std::uint64_t> unsigned_integer(const std::string& key) {
        auto it = take(key);
        if (!it) return std::nullopt;
        std::uint64_t v = 0;
        const std::string& s = it->value;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
            throw Error(ErrorKind::ParseError, "expected a nonnegative integer, got '" + s + "'",
                        where(*it, key));
        }
        return v;
    }

    std::optional<std::vector<double>> list(const std::string& key) {
        auto it = take(key);
        if (!it) return std::nullopt;
        std::vector<double> out;
        std::string_view rest = it->value;
        while (true) {
            const auto comma = rest.find(',');
            const std::string item(trim(rest.substr(0, comma)));
            out.push_back(parse_double(RawEntry{item, it->line}, key));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        return out;
    }

    /// Throws ParseError on the first key outside `allowed`.
    void only(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [key, entry] : entries_) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                throw Error(ErrorKind::ParseError, "unknown key '" + key + "'",
                            "line " + std::to_string(entry.line) + " (" + path(key) + ")");
            }
        }
    }

private:
    std::optional<RawEntry> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    double parse_double(const RawEntry& e, const std::string& key) const {
        double v = 0.0;
        const std::string& s = e.value;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
            throw Error(ErrorKind::ParseError, "expected a number, got '" + s + "'",
                        where(e, key));
        }
        return v;
    }

    std::string path(const std::string& key) const { return name_ + "." + key; }
    std::string where(const RawEntry& e, const std::string& key) const {
        return "line " + std::to_string(e.line) + " (" + path(key) + ")";
    }

    std::string name_;
    RawSection entries_;
};

// Runs a model check and reports its failure as a config validation error.
template <typename F>
void as_validation(F&& check) {
    try {
        check();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::ValidationError) throw;
        throw Error(ErrorKind::ValidationError, e.detail(), e.where());
    }
}

}  // namespace detail

inline RunConfig load_config(std::string_view text) {
    std::map<std::string, detail::RawSection> sections;
    std::map<std::string, int> section_line;
    std::string current;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::ParseError, "unterminated section", where);
            current = std::string(detail::trim(line.substr(1, line.size() - 2)));
            if (sections.count(current)) {
                throw Error(ErrorKind::ParseError, "duplicate section [" + current + "]", where);
            }
            sections[current];
            section_line[current] = line_no;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::ParseError, "expected 'key = value'", where);
        }
        if (current.empty()) throw Error(ErrorKind::ParseError, "key outside any section", where);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty()) throw Error(ErrorKind::ParseError, "empty key", where);
        auto& sec = sections[current];
        if (sec.count(key)) {
            throw Error(ErrorKind::ParseError, "duplicate key '" + key + "'", where);
        }
        sec[key] = detail::RawEntry{value, line_no};
    }

    RunConfig cfg;
    std::map<int, detail::RawSection> goals;
    for (auto& [name, entries] : sections) {
        const std::string where = "line " + std::to_string(section_line[name]);
        if (name.rfind("goals.", 0) == 0) {
            int k = 0;
            const std::string idx = name.substr(6);
            const auto r = std::from_chars(idx.data(), idx.data() + idx.size(), k);
            if (r.ec != std::errc() || r.ptr != idx.data() + idx.size() || k < 1) {
                throw Error(ErrorKind::ParseError, "bad goal section [" + name + "]", where);
            }
            goals[k] = entries;
        } else if (name != "market" && name != "grid" && name != "solver" && name != "sim") {
            throw Error(ErrorKind::ParseError, "unknown section [" + name + "]", where);
        }
    }

    {
        detail::SectionReader r("market", sections["market"]);
        r.only({"risk_free", "discount", "drifts", "vol_1", "vol_2", "correlation"});
        cfg.market.risk_free = r.required("risk_free");
        cfg.market.discount = r.required("discount");
        auto drifts = r.list("drifts");
        if (!drifts) throw Error(ErrorKind::ValidationError, "missing required key", "market.drifts");
        cfg.market.drifts = *drifts;
        cfg.market.vol_1 = r.required("vol_1");
        cfg.market.vol_2 = r.required("vol_2");
        cfg.market.correlation = r.required("correlation");
    }
    int expect = 1;
    for (auto& [k, entries] : goals) {
        if (k != expect) {
            throw Error(ErrorKind::ParseError, "goal sections must be numbered 1, 2, ...",
                        "goals." + std::to_string(expect));
        }
        ++expect;
        detail::SectionReader r("goals." + std::to_string(k), entries);
        r.only({"target", "deadline", "weight", "penalty_in", "penalty_out"});
        GoalSpec g;
        g.target_amount = r.required("target");
        g.deadline = r.required("deadline");
        g.weight = r.number("weight", 1.0);
        g.penalty_in = r.number("penalty_in", 0.0);
        g.penalty_out = r.number("penalty_out", 0.0);
        cfg.ladder.goals.push_back(g);
    }
    {
        detail::SectionReader r("grid", sections["grid"]);
        r.only({"x_max", "dx", "dt_last", "dt_two"});
        cfg.grid.x_max = r.required("x_max");
        cfg.grid.dx = r.required("dx");
        cfg.grid.dt_last = r.required("dt_last");
        cfg.grid.dt_two = r.required("dt_two");
    }
    {
        detail::SectionReader r("solver", sections["solver"]);
        r.only({"penalty_scale", "policy_tol", "max_policy_iters", "allocation_step_fine",
                "allocation_step_coarse", "label_tol"});
        SolverConfig& s = cfg.solver;
        s.penalty_scale = r.number("penalty_scale", s.penalty_scale);
        s.policy_tol = r.number("policy_tol", s.policy_tol);
        if (auto it = r.unsigned_integer("max_policy_iters")) {
            s.max_policy_iters = static_cast<int>(*it);
        }
        s.allocation_step_fine = r.number("allocation_step_fine", s.allocation_step_fine);
        s.allocation_step_coarse = r.number("allocation_step_coarse", s.allocation_step_coarse);
        cfg.label_tol = r.number("label_tol", cfg.label_tol);
    }
    if (sections.count("sim")) {
        detail::SectionReader r("sim", sections["sim"]);
        r.only({"seed", "n_paths", "dt_sim", "x1", "x2", "trace_paths"});
        SimConfig s;
        s.seed = r.unsigned_integer("seed").value_or(0);
        s.n_paths = r.unsigned_integer("n_paths").value_or(s.n_paths);
        s.dt_sim = r.number("dt_sim", 0.0);
        s.initial_wealth = {r.required("x1"), r.required("x2")};
        s.trace_paths = r.unsigned_integer("trace_paths").value_or(0);
        cfg.sim = s;
    }

    detail::as_validation([&] {
        validate_market(cfg.market);
        validate_ladder(cfg.ladder);
        if (cfg.ladder.size() != 2) {
            throw Error(ErrorKind::ValidationError, "exactly two goals are supported", "goals");
        }
        validate_solver(cfg.solver);
        if (!(cfg.label_tol > 0.0)) {
            throw Error(ErrorKind::ValidationError, "label_tol must be positive",
                        "solver.label_tol");
        }
        (void)cfg.axis();
        (void)cfg.two_goal_times();
        (void)cfg.last_times();
        if (cfg.sim) {
            if (cfg.sim->n_paths < 1) {
                throw Error(ErrorKind::ValidationError, "n_paths must be at least 1",
                            "sim.n_paths");
            }
            if (!(cfg.sim->dt_sim >= 0.0)) {
                throw Error(ErrorKind::ValidationError, "dt_sim must be nonnegative",
                            "sim.dt_sim");
            }
            for (int p = 0; p < 2; ++p) {
                const double x = cfg.sim->initial_wealth[p];
                if (!(x >= 0.0 && x <= cfg.grid.x_max)) {
                    throw Error(ErrorKind::ValidationError, "initial wealth outside [0, x_max]",
                                p == 0 ? "sim.x1" : "sim.x2");
                }
            }
        }
    });
    return cfg;
}

/// Canonical text of a config with every default spelled out.
inline std::string echo_config(const RunConfig& c) {
    using detail::shortest;
    std::ostringstream os;
    os << "[market]\n"
       << "risk_free = " << shortest(c.market.risk_free) << '\n'
       << "discount = " << shortest(c.market.discount) << '\n'
       << "drifts = ";
    for (std::size_t i = 0; i < c.market.drifts.size(); ++i) {
        os << (i ? ", " : "") << shortest(c.market.drifts[i]);
    }
    os << '\n'
       << "vol_1 = " << shortest(c.market.vol_1) << '\n'
       << "vol_2 = " << shortest(c.market.vol_2) << '\n'
       << "correlation = " << shortest(c.market.correlation) << '\n';
    for (std::size_t k = 0; k < c.ladder.size(); ++k) {
        const GoalSpec& g = c.ladder.goals[k];
        os << "\n[goals." << k + 1 << "]\n"
           << "target = " << shortest(g.target_amount) << '\n'
           << "deadline = " << shortest(g.deadline) << '\n'
           << "weight = " << shortest(g.weight) << '\n'
           << "penalty_in = " << shortest(g.penalty_in) << '\n'
           << "penalty_out = " << shortest(g.penalty_out) << '\n';
    }
    os << "\n[grid]\n"
       << "x_max = " << shortest(c.grid.x_max) << '\n'
       << "dx = " << shortest(c.grid.dx) << '\n'
       << "dt_last = " << shortest(c.grid.dt_last) << '\n'
       << "dt_two = " << shortest(c.grid.dt_two) << '\n';
    os << "\n[solver]\n"
       << "penalty_scale = " << shortest(c.solver.penalty_scale) << '\n'
       << "policy_tol = " << shortest(c.solver.policy_tol) << '\n'
       << "max_policy_iters = " << c.solver.max_policy_iters << '\n'
       << "allocation_step_fine = " << shortest(c.solver.allocation_step_fine) << '\n'
       << "allocation_step_coarse = " << shortest(c.solver.allocation_step_coarse) << '\n'
       << "label_tol = " << shortest(c.label_tol) << '\n';
    if (c.sim) {
        os << "\n[sim]\n"
           << "seed = " << c.sim->seed << '\n'
           << "n_paths = " << c.sim->n_paths << '\n'
           << "dt_sim = " << shortest(c.sim->dt_sim) << '\n'
           << "x1 = " << shortest(c.sim->initial_wealth[0]) << '\n'
           << "x2 = " << shortest(c.sim->initial_wealth[1]) << '\n'
           << "trace_paths = " << c.sim->trace_paths << '\n';
    }
    return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Directory name of a run: hash of the echoed config in 16 hex digits.
inline std::string run_id(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(echo_config(c))));
    return buf;
}

}  // namespace goalgrid
