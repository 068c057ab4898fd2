// goalgrid <solve|boundary|simulate|oracle|export> --config <path> [--out <dir>] [--seed <u64>]
//
// Every subcommand writes into <out>/<run id>, where the run id hashes the
// echoed config. Subcommands after `solve` reuse solution.json when present
// and solve first otherwise. Stdout carries one JSON object: a summary on
// success, an error description (with nonzero exit) on failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "goalgrid.hpp"

namespace fs = std::filesystem;
using namespace goalgrid;

namespace {

struct Run {
    RunConfig config;
    fs::path dir;
};

void write_solution(const Run& run, const SolveReport& r) {
    std::ostringstream last, two, coupled;
    write_surface_csv(last, r.last.surface);
    write_surface_csv(two, r.two.surface);
    write_coupled_csv(coupled, r.coupled);
    const SurfaceFiles files;
    write_file(run.dir / files.last, last.str());
    write_file(run.dir / files.two, two.str());
    write_file(run.dir / files.coupled, coupled.str());
    write_file(run.dir / "solution.json", solution_json(r).dump() + "\n");
    write_file(run.dir / "report.json", dump(report_json(r, files)));
}

SolveReport obtain(const Run& run, bool force) {
    const fs::path stored = run.dir / "solution.json";
    if (!force && fs::exists(stored)) {
        return solution_from_json(json::parse(read_file(stored)), run.config);
    }
    SolveReport r = solve_all(run.config);
    write_solution(run, r);
    return r;
}

json cmd_solve(const Run& run) {
    const SolveReport r = obtain(run, true);
    const json rep = report_json(r);
    return {{"files", {"solution.json", "report.json", "surface_last.csv", "surface_two.csv",
                       "coupled_T1.csv"}},
            {"value_at_origin", rep["value_at_origin"]},
            {"max_iterations", rep["max_iterations"]},
            {"max_residual", rep["max_residual"]}};
}

json cmd_boundary(const Run& run) {
    const SolveReport r = obtain(run, false);
    const ThresholdReport th = extract_thresholds(r.coupled, r.config.ladder[0]);
    write_file(run.dir / "thresholds.json", dump(thresholds_json(th)));

    std::ostringstream regions;
    write_regions_csv(regions, r.two.surface.shape, r.two.surface.times, r.two.labels);
    write_file(run.dir / "regions.csv", regions.str());

    const std::size_t n = r.two.surface.shape.cells();
    json slices = json::array();
    for (std::size_t k = 0; k < r.two.surface.times.count; ++k) {
        const auto labels = std::span<const RegionLabel>(r.two.labels).subspan(k * n, n);
        slices.push_back(features_json(r.two.surface.times.time(k),
                                       detect_features(r.two.surface.shape, labels)));
    }
    write_file(run.dir / "features.json", dump(slices));
    return {{"files", {"thresholds.json", "regions.csv", "features.json"}},
            {"thresholds", thresholds_json(th)}};
}

json cmd_simulate(const Run& run, std::optional<std::uint64_t> seed) {
    if (!run.config.sim) {
        throw Error(ErrorKind::ValidationError, "config has no [sim] section", "sim");
    }
    SimConfig sim = *run.config.sim;
    if (seed) sim.seed = *seed;
    const SolveReport r = obtain(run, false);
    std::ostringstream trace;
    const SimResult res = run_policy(r, sim, sim.trace_paths > 0 ? &trace : nullptr);
    const json out = sim_json(res, sim);
    write_file(run.dir / "sim_result.json", dump(out));
    json files = {"sim_result.json"};
    if (sim.trace_paths > 0) {
        write_file(run.dir / "sim_trace.csv", trace.str());
        files.push_back("sim_trace.csv");
    }
    const std::size_t c = r.two.surface.shape.nearest(sim.initial_wealth[0], sim.initial_wealth[1]);
    return {{"files", files}, {"result", out}, {"solver_value", r.two.surface.at(0, c)}};
}

json cmd_oracle(const Run& run) {
    const RunConfig& cfg = run.config;
    if (cfg.grid.dt_last != cfg.grid.dt_two) {
        throw Error(ErrorKind::ConfigMismatch,
                    "the oracle uses one time step; dt_last and dt_two must agree", "grid");
    }
    OracleConfig oc;
    oc.x_max = cfg.grid.x_max;
    oc.dx = cfg.grid.dx;
    oc.dt = cfg.grid.dt_two;
    oc.allocation_step = cfg.solver.allocation_step_coarse;
    const OracleResult o = dp_value(cfg.market, cfg.ladder, oc);
    const SolveReport r = obtain(run, false);
    const OracleComparison cmp = compare_surfaces(o, r.last.surface, r.two.surface);
    std::ostringstream last, two;
    write_surface_csv(last, o.last);
    write_surface_csv(two, o.two);
    write_file(run.dir / "oracle_last.csv", last.str());
    write_file(run.dir / "oracle_two.csv", two.str());
    const json summary = oracle_json(cmp, oc);
    write_file(run.dir / "oracle_summary.json", dump(summary));
    return {{"files", {"oracle_last.csv", "oracle_two.csv", "oracle_summary.json"}},
            {"summary", summary}};
}

json cmd_export(const Run& run) {
    const SolveReport r = obtain(run, false);
    const std::size_t k = pre_deadline_slice(r);
    const std::size_t deadline = r.two.surface.times.count - 1;
    const double t = r.two.surface.times.time(k);
    const double t1 = r.two.surface.times.time(deadline);

    json index = json::object();
    auto put = [&](const std::string& key, const std::string& file, double time,
                   const std::string& what, const std::string& body) {
        write_file(run.dir / file, body);
        index[key] = {{"file", file}, {"t", time}, {"content", what}};
    };
    {
        std::ostringstream os;
        write_allocation_csv(os, r, 0);
        put("tab_goal2", "tab_goal2.csv", r.last.surface.times.start,
            "one-goal optimal proportions after the first deadline", os.str());
    }
    {
        std::ostringstream os;
        write_label_slice_csv(os, r, deadline);
        put("T1impulse", "T1impulse.csv", t1, "transfer regions at the first deadline", os.str());
    }
    {
        std::ostringstream os;
        write_label_slice_csv(os, r, k);
        put("regions_pre_deadline", "regions_pre_deadline.csv", t,
            "transfer regions one step before the deadline", os.str());
    }
    {
        std::ostringstream os;
        write_codes_csv(os, r, 1, k);
        put("longeralpha", "longeralpha.csv", t, "strategy codes of the fundamental portfolio",
            os.str());
    }
    {
        std::ostringstream os;
        write_codes_csv(os, r, 0, k);
        put("shorteralpha", "shorteralpha.csv", t, "strategy codes of the goal portfolio",
            os.str());
    }
    write_file(run.dir / "export_index.json", dump(index));
    return {{"files", index}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Goal-based portfolio HJB solver"};
    std::string command;
    std::string config_path;
    std::string out_dir = "runs";
    std::optional<std::uint64_t> seed;
    app.add_option("command", command, "solve | boundary | simulate | oracle | export")
        ->required()
        ->check(CLI::IsMember({"solve", "boundary", "simulate", "oracle", "export"}));
    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--out", out_dir, "output root directory");
    app.add_option("--seed", seed, "simulation seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << std::endl;
        return 2;
    }

    try {
        Run run;
        run.config = load_config(read_file(config_path));
        run.config.output_dir = out_dir;
        const std::string id = run_id(run.config);
        run.dir = fs::path(out_dir) / id;
        write_file(run.dir / "config.cfg", echo_config(run.config));

        json result;
        if (command == "solve") result = cmd_solve(run);
        else if (command == "boundary") result = cmd_boundary(run);
        else if (command == "simulate") result = cmd_simulate(run, seed);
        else if (command == "oracle") result = cmd_oracle(run);
        else result = cmd_export(run);

        json out = {{"command", command}, {"run_id", id}, {"run_dir", run.dir.string()}};
        out.update(result);
        std::cout << out.dump(2) << std::endl;
        return 0;
    } catch (const std::exception& e) {
        std::cout << error_json(e).dump() << std::endl;
        return 1;
    }
}
