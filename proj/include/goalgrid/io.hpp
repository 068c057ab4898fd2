#pragma once

// JSON and CSV persistence of run artifacts.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "goalgrid/config.hpp"
#include "goalgrid/error.hpp"
#include "goalgrid/oracle.hpp"
#include "goalgrid/pipeline.hpp"
#include "goalgrid/regions.hpp"
#include "goalgrid/simulate.hpp"

namespace goalgrid {

using json = nlohmann::ordered_json;

namespace detail {

// JSON has no infinities; non-finite entries (ray slopes leaving the grid)
// are stored as null and read back as -infinity.
inline json encode(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
}

inline std::vector<double> decode(const json& a, std::size_t expect, const char* what) {
    if (!a.is_array() || a.size() != expect) {
        throw Error(ErrorKind::ConfigMismatch,
                    std::string("stored ") + what + " does not match the configured grid");
    }
    std::vector<double> v;
    v.reserve(a.size());
    for (const auto& x : a) {
        v.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
    }
    return v;
}

template <typename T>
std::vector<T> decode_ints(const json& a, std::size_t expect, const char* what) {
    if (!a.is_array() || a.size() != expect) {
        throw Error(ErrorKind::ConfigMismatch,
                    std::string("stored ") + what + " does not match the configured grid");
    }
    return a.get<std::vector<T>>();
}

inline json steps_json(const std::vector<StepDiagnostics>& steps) {
    json a = json::array();
    for (const auto& s : steps) {
        a.push_back({{"t", s.time},
                     {"iterations", s.iterations},
                     {"final_change", s.final_change},
                     {"linear_residual", s.linear_residual},
                     {"max_residual", s.max_residual}});
    }
    return a;
}

inline std::vector<StepDiagnostics> steps_from(const json& a) {
    std::vector<StepDiagnostics> out;
    for (const auto& s : a) {
        out.push_back(StepDiagnostics{s.at("t").get<double>(), s.at("iterations").get<int>(),
                                      s.at("final_change").get<double>(),
                                      s.at("linear_residual").get<double>(),
                                      s.at("max_residual").get<double>()});
    }
    return out;
}

}  // namespace detail

inline json config_json(const RunConfig& c) {
    json goals = json::array();
    for (const auto& g : c.ladder.goals) {
        goals.push_back({{"target", g.target_amount},
                         {"deadline", g.deadline},
                         {"weight", g.weight},
                         {"penalty_in", g.penalty_in},
                         {"penalty_out", g.penalty_out}});
    }
    json j = {
        {"market",
         {{"risk_free", c.market.risk_free},
          {"discount", c.market.discount},
          {"drifts", c.market.drifts},
          {"vol_1", c.market.vol_1},
          {"vol_2", c.market.vol_2},
          {"correlation", c.market.correlation}}},
        {"goals", goals},
        {"grid",
         {{"x_max", c.grid.x_max},
          {"dx", c.grid.dx},
          {"dt_last", c.grid.dt_last},
          {"dt_two", c.grid.dt_two}}},
        {"solver",
         {{"penalty_scale", c.solver.penalty_scale},
          {"policy_tol", c.solver.policy_tol},
          {"max_policy_iters", c.solver.max_policy_iters},
          {"allocation_step_fine", c.solver.allocation_step_fine},
          {"allocation_step_coarse", c.solver.allocation_step_coarse},
          {"label_tol", c.label_tol}}},
    };
    if (c.sim) {
        j["sim"] = {{"seed", c.sim->seed},
                    {"n_paths", c.sim->n_paths},
                    {"dt_sim", c.sim->dt_sim},
                    {"x1", c.sim->initial_wealth[0]},
                    {"x2", c.sim->initial_wealth[1]},
                    {"trace_paths", c.sim->trace_paths}};
    }
    return j;
}

/// Full numeric state of a solve, enough to rebuild the SolveReport.
inline json solution_json(const SolveReport& r) {
    std::string labels;
    labels.reserve(r.two.labels.size());
    for (auto l : r.two.labels) labels.push_back(label_char(l));
    std::vector<double> into, out;
    for (const auto& d : r.coupled.plan) {
        into.push_back(d.into_goal());
        out.push_back(d.out_of_goal());
    }
    return {
        {"config", echo_config(r.config)},
        {"last",
         {{"values", detail::encode(r.last.surface.values)},
          {"codes", r.last.policy.codes[0]},
          {"steps", detail::steps_json(r.last.steps)}}},
        {"coupled",
         {{"values", detail::encode(r.coupled.values)},
          {"no_transfer", detail::encode(r.coupled.no_transfer)},
          {"transfer_l", detail::encode(into)},
          {"transfer_m", detail::encode(out)}}},
        {"two",
         {{"values", detail::encode(r.two.surface.values)},
          {"codes_1", r.two.policy.codes[0]},
          {"codes_2", r.two.policy.codes[1]},
          {"pde_term", detail::encode(r.two.pde_term)},
          {"into_gap", detail::encode(r.two.into_gap)},
          {"out_gap", detail::encode(r.two.out_gap)},
          {"labels", labels},
          {"steps", detail::steps_json(r.two.steps)}}},
    };
}

/// Rebuilds a solve stored by solution_json. The stored config must echo
/// identically to `config`, otherwise ConfigMismatch.
inline SolveReport solution_from_json(const json& j, const RunConfig& config) {
    if (j.at("config").get<std::string>() != echo_config(config)) {
        throw Error(ErrorKind::ConfigMismatch, "stored solution was computed for another config");
    }
    SolveReport r;
    r.config = config;
    const AxisGrid axis = config.axis();

    const TimeLine tl_last = config.last_times();
    r.last.surface = ValueSurface(config.ladder.size() - 1, tl_last, SliceShape{{axis}});
    const std::size_t n1 = r.last.surface.values.size();
    r.last.surface.values = detail::decode(j.at("last").at("values"), n1, "last.values");
    r.last.policy.allocation_step = config.solver.allocation_step_fine;
    r.last.policy.portfolios = 1;
    r.last.policy.cells = axis.count;
    r.last.policy.codes[0] = detail::decode_ints<int>(j.at("last").at("codes"), n1, "last.codes");
    r.last.steps = detail::steps_from(j.at("last").at("steps"));

    const SliceShape plane{{axis, axis}};
    const std::size_t n2 = plane.cells();
    r.coupled.shape = plane;
    const json& c = j.at("coupled");
    r.coupled.values = detail::decode(c.at("values"), n2, "coupled.values");
    r.coupled.no_transfer = detail::decode(c.at("no_transfer"), n2, "coupled.no_transfer");
    const auto into = detail::decode(c.at("transfer_l"), n2, "coupled.transfer_l");
    const auto out = detail::decode(c.at("transfer_m"), n2, "coupled.transfer_m");
    r.coupled.plan.resize(n2);
    for (std::size_t i = 0; i < n2; ++i) r.coupled.plan[i] = TransferDecision(into[i], out[i]);

    const TimeLine tl_two = config.two_goal_times();
    const json& t = j.at("two");
    r.two.surface = ValueSurface(0, tl_two, plane);
    const std::size_t total = r.two.surface.values.size();
    r.two.surface.values = detail::decode(t.at("values"), total, "two.values");
    r.two.policy.allocation_step = config.solver.allocation_step_coarse;
    r.two.policy.portfolios = 2;
    r.two.policy.cells = n2;
    r.two.policy.codes[0] = detail::decode_ints<int>(t.at("codes_1"), total, "two.codes_1");
    r.two.policy.codes[1] = detail::decode_ints<int>(t.at("codes_2"), total, "two.codes_2");
    r.two.pde_term = detail::decode(t.at("pde_term"), total, "two.pde_term");
    r.two.into_gap = detail::decode(t.at("into_gap"), total, "two.into_gap");
    r.two.out_gap = detail::decode(t.at("out_gap"), total, "two.out_gap");
    const std::string labels = t.at("labels").get<std::string>();
    if (labels.size() != total) {
        throw Error(ErrorKind::ConfigMismatch, "stored labels do not match the configured grid");
    }
    for (char ch : labels) r.two.labels.push_back(static_cast<RegionLabel>(ch));
    r.two.steps = detail::steps_from(t.at("steps"));
    return r;
}

struct SurfaceFiles {
    std::string last = "surface_last.csv";
    std::string two = "surface_two.csv";
    std::string coupled = "coupled_T1.csv";
};

/// SolveReport summary: config echo, surface files, per-step diagnostics.
inline json report_json(const SolveReport& r, const SurfaceFiles& files = {}) {
    int max_iters = 0;
    double max_res = 0.0;
    double max_lin = 0.0;
    for (const auto* steps : {&r.last.steps, &r.two.steps}) {
        for (const auto& s : *steps) {
            max_iters = std::max(max_iters, s.iterations);
            max_res = std::max(max_res, s.max_residual);
            max_lin = std::max(max_lin, s.linear_residual);
        }
    }
    return {
        {"run_id", run_id(r.config)},
        {"config", config_json(r.config)},
        {"surfaces",
         {{"last_period", files.last}, {"two_goal_period", files.two}, {"coupled", files.coupled}}},
        {"value_at_origin", r.two.surface.at(0, 0)},
        {"max_iterations", max_iters},
        {"max_residual", max_res},
        {"max_linear_residual", max_lin},
        {"steps",
         {{"last_period", detail::steps_json(r.last.steps)},
          {"two_goal_period", detail::steps_json(r.two.steps)}}},
    };
}

inline json thresholds_json(const ThresholdReport& t) {
    return {{"sellback_target", t.sellback_target},
            {"transferin_floor", t.transferin_floor},
            {"surplus_cap", t.surplus_cap},
            {"split_abscissa", t.split_abscissa}};
}

inline json features_json(double time, const std::vector<Feature>& features) {
    json a = json::array();
    for (const auto& f : features) {
        a.push_back({{"kind", to_string(f.kind)},
                     {"region", std::string(1, label_char(f.region))},
                     {"x1", {f.box.x1_lo, f.box.x1_hi}},
                     {"x2", {f.box.x2_lo, f.box.x2_hi}},
                     {"cells", f.cells}});
    }
    return {{"t", time}, {"features", a}};
}

inline json sim_json(const SimResult& s, const SimConfig& c) {
    return {{"seed", c.seed},
            {"n_paths", s.n_paths},
            {"initial_wealth", {c.initial_wealth[0], c.initial_wealth[1]}},
            {"mean_objective", s.mean_objective},
            {"std_error", s.std_error},
            {"breakdown",
             {{"shortfall_1", s.breakdown.shortfall_1},
              {"shortfall_2", s.breakdown.shortfall_2},
              {"penalty_in", s.breakdown.penalty_in},
              {"penalty_out", s.breakdown.penalty_out}}},
            {"mean_moved_in", s.mean_moved_in},
            {"mean_moved_out", s.mean_moved_out}};
}

inline json oracle_json(const OracleComparison& c, const OracleConfig& oc) {
    return {{"dx", oc.dx},
            {"dt", oc.dt},
            {"allocation_step", oc.allocation_step},
            {"sup_norm", c.sup},
            {"sup_last_period", c.sup_last},
            {"sup_two_goal_period", c.sup_two},
            {"sup_t0", c.sup_t0},
            {"sup_deadline", c.sup_deadline},
            {"oracle_value_at_origin", c.oracle_corner},
            {"solver_value_at_origin", c.solver_corner}};
}

/// Machine-readable error object printed by the CLI on failure.
inline json error_json(const std::exception& e) {
    if (const auto* g = dynamic_cast<const Error*>(&e)) {
        json j = {{"error", to_string(g->kind())}, {"message", g->detail()}};
        if (!g->where().empty()) j["where"] = g->where();
        if (const auto* d = dynamic_cast<const PolicyIterationDiverged*>(g)) {
            j["t"] = d->time();
            j["history"] = d->history();
        }
        return j;
    }
    return {{"error", "Internal"}, {"message", e.what()}};
}

/// Per-cell strategy codes of one two-goal slice: `x1,x2,code,label`.
inline void write_codes_csv(std::ostream& os, const SolveReport& r, std::size_t portfolio,
                            std::size_t slice) {
    const SliceShape& shape = r.two.surface.shape;
    const std::size_t n = shape.cells();
    os << "x1,x2,code,label\n";
    for (std::size_t c = 0; c < n; ++c) {
        const auto x = shape.coords(c);
        os << fixed6(x[0]) << ',' << fixed6(x[1]) << ',' << r.two.policy.code(portfolio, slice, c)
           << ',' << label_char(r.two.labels[slice * n + c]) << '\n';
    }
}

/// Optimal one-goal allocation at one slice: `x,alpha_1,alpha_2,code`.
inline void write_allocation_csv(std::ostream& os, const SolveReport& r, std::size_t slice) {
    const PolicyGrid grid(r.last.policy.allocation_step);
    const AxisGrid& ax = r.last.surface.shape.axes[0];
    os << "x,alpha_1,alpha_2,code\n";
    for (std::size_t i = 0; i < ax.count; ++i) {
        const int code = r.last.policy.code(0, slice, i);
        const auto& w = grid.weights(static_cast<std::size_t>(code));
        os << fixed6(ax.coord(i)) << ',' << fixed6(w[0]) << ',' << fixed6(w[1]) << ',' << code
           << '\n';
    }
}

/// Labels of one two-goal slice: `x1,x2,label`.
inline void write_label_slice_csv(std::ostream& os, const SolveReport& r, std::size_t slice) {
    const SliceShape& shape = r.two.surface.shape;
    const std::size_t n = shape.cells();
    os << "x1,x2,label\n";
    for (std::size_t c = 0; c < n; ++c) {
        const auto x = shape.coords(c);
        os << fixed6(x[0]) << ',' << fixed6(x[1]) << ',' << label_char(r.two.labels[slice * n + c])
           << '\n';
    }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    f << content;
    f.close();
    if (!f) throw Error(ErrorKind::IoError, "cannot write file", path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot read file", path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace goalgrid
