#include "riskshare/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "riskshare/example.hpp"
#include "riskshare/io.hpp"
#include "riskshare/oracle.hpp"

namespace riskshare {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::configuration, "cannot create output directory " + dir);
}

std::string resolve(const RunConfig& cfg, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? p : (fs::path(cfg.base_dir) / path).string();
}

std::string to_csv_text(const AllocationProcess& a) {
    std::ostringstream os;
    write_allocation_csv(os, a);
    return os.str();
}

json allocation_rows(const AllocationProcess& a) {
    json rows = json::array();
    for (std::size_t p = 0; p < a.size(); ++p)
        for (std::size_t t = 1; t <= a.horizon(); ++t)
            for (std::size_t i = 0; i < a.n_agents(); ++i) rows.push_back({p + 1, t, i + 1, a.at(p, t, i)});
    return rows;
}

Solution solve_from(const RunConfig& cfg, const PathSetPtr& paths) {
    SolveConfig sc;
    sc.agents = cfg.agents;
    sc.paths = paths;
    sc.tie_policy = cfg.tie_policy;
    sc.premia_policy = cfg.premia_policy;
    return solve_cdpo(sc);
}

// Evenly spaced subset of at most `cap` indices out of n, always keeping the ends.
std::vector<std::size_t> thin(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    if (n <= cap) {
        for (std::size_t k = 0; k < n; ++k) idx.push_back(k);
        return idx;
    }
    for (std::size_t k = 0; k < cap; ++k) idx.push_back(k * (n - 1) / (cap - 1));
    return idx;
}

void write_assessment_curve(std::ostream& os, const TailAssessment& A) {
    os << "x";
    for (std::size_t i = 0; i < A.k_star.size(); ++i) os << ",k" << i + 1;
    os << '\n';
    for (auto j : thin(A.grid.size(), 2000)) {
        os << format_double(A.grid[j] - A.r_low - A.s_low);
        for (const auto& k : A.k_star) os << ',' << format_double(k(A.survival[j]));
        os << '\n';
    }
}

}  // namespace

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::infeasible: return exit_code::infeasible;
        case ErrorKind::unsupported: return exit_code::unsupported;
        case ErrorKind::bound_exceeded: return exit_code::bound_exceeded;
        default: return exit_code::config;
    }
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
    RunConfig cfg;
    cfg.raw = j;
    cfg.base_dir = base_dir;
    require(j.is_object(), ErrorKind::configuration, "configuration must be a JSON object");
    require(j.contains("agents") && j["agents"].is_array() && !j["agents"].empty(), ErrorKind::configuration,
            "configuration needs a non-empty 'agents' array");
    for (const auto& a : j["agents"]) cfg.agents.push_back(risk_spec_from_json(a));
    require(j.contains("scenario") && j["scenario"].is_object(), ErrorKind::configuration,
            "configuration needs a 'scenario' object");
    cfg.scenario = j["scenario"];
    cfg.tie_policy = parse_tie_policy(j.value("tie_policy", std::string("lowest-index")));
    cfg.premia_policy = parse_premia_policy(j.value("c_policy", std::string("egalitarian-slack")));
    try {
        cfg.seed = j.value("seed", std::uint64_t{1});
        cfg.n_paths = j.value("n_paths", std::size_t{10000});
    } catch (const std::exception& e) {
        fail(ErrorKind::configuration, std::string("seed / n_paths: ") + e.what());
    }
    require(cfg.n_paths >= 1, ErrorKind::configuration, "n_paths must be at least 1");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    const auto j = load_json_file(path);
    auto parent = fs::path(path).parent_path();
    return parse_run_config(j, parent.empty() ? "." : parent.string());
}

PathSetPtr build_scenario(const RunConfig& cfg) {
    const auto& s = cfg.scenario;
    if (s.contains("generator")) {
        const auto gen = s["generator"].get<std::string>();
        require(gen == "exponential_chain", ErrorKind::configuration, "unknown generator '" + gen + "'");
        const double mean0 = s.value("mean0", 200.0);
        return std::make_shared<const SamplePathSet>(generate_exponential_chain(cfg.n_paths, mean0, cfg.seed));
    }
    if (s.contains("csv")) {
        const auto path = resolve(cfg, s["csv"].get<std::string>());
        return std::make_shared<const SamplePathSet>(load_paths(read_csv_file(path)));
    }
    if (s.contains("tree")) return std::make_shared<const SamplePathSet>(tree_from_json(s["tree"]).to_paths());
    if (s.contains("paths")) return std::make_shared<const SamplePathSet>(paths_from_json(s["paths"]));
    fail(ErrorKind::configuration, "scenario needs one of generator, csv, tree, paths");
}

int cmd_solve(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto paths = build_scenario(cfg);
    const auto sol = solve_from(cfg, paths);
    ensure_dir(out_dir);
    write_text_file(join(out_dir, "retention.json"), retention_to_json(sol.schedule).dump(2) + "\n");
    write_text_file(join(out_dir, "allocation.csv"), to_csv_text(sol.allocation));
    auto rep = report_to_json(sol.report);
    rep["n_paths"] = paths->size();
    rep["seed"] = cfg.seed;
    write_text_file(join(out_dir, "report.json"), rep.dump(2) + "\n");
    log << "solved " << paths->size() << " paths, " << cfg.agents.size() << " agents, " << paths->horizon()
        << " periods; expected total risk " << format_double(sol.report.expected_total_risk) << '\n';
    for (const auto& p : sol.report.periods) {
        log << "  t=" << p.period << " objective " << format_double(p.objective);
        if (!p.thresholds.empty()) log << ", first threshold " << format_double(p.thresholds.front());
        log << '\n';
    }
    return exit_code::ok;
}

int cmd_evaluate(const RunConfig& cfg, const std::optional<std::string>& allocation_csv, const std::string& out_dir,
                 std::ostream& log) {
    const auto paths = build_scenario(cfg);
    const auto alloc = allocation_csv ? read_allocation_csv(read_csv_file(*allocation_csv), paths)
                                      : solve_from(cfg, paths).allocation;
    require(alloc.n_agents() == cfg.agents.size(), ErrorKind::configuration,
            "allocation has a different number of agents than the configuration");
    json out;
    json agents = json::array();
    for (std::size_t i = 0; i < alloc.n_agents(); ++i) {
        const auto R = risk_to_go(cfg.agents[i], alloc, i);
        json per = json::array();
        for (std::size_t t = 0; t < alloc.horizon(); ++t) {
            double m = 0.0;
            for (std::size_t p = 0; p < alloc.size(); ++p) m += paths->weight(p) * R.at(p, t);
            per.push_back(m);
        }
        agents.push_back({{"agent", i + 1}, {"expected_risk_to_go", per}, {"myopic", evaluate_myopic(cfg.agents, alloc, i)}});
    }
    out["agents"] = agents;
    out["comonotone"] = is_comonotone_process(alloc, cfg.agents);
    if (paths->has_endowments()) {
        json ir = json::array();
        for (std::size_t t = 0; t < alloc.horizon(); ++t) ir.push_back(check_ir_t(cfg.agents, alloc, t));
        out["ir"] = ir;
    }
    const auto my = verify_myopic_optimality(cfg.agents, alloc);
    out["myopic_check"] = {{"applicable", my.applicable}, {"reason", my.reason}, {"bound", my.bound},
                           {"value", my.value}, {"gap", my.gap}, {"relative_gap", my.relative_gap},
                           {"attained", my.attained}};
    ensure_dir(out_dir);
    write_text_file(join(out_dir, "evaluation.json"), out.dump(2) + "\n");
    log << out.dump(2) << '\n';
    return exit_code::ok;
}

int cmd_improve(const RunConfig& cfg, const std::string& allocation_csv, const std::string& out_dir, std::ostream& log) {
    const auto paths = build_scenario(cfg);
    const auto alloc = read_allocation_csv(read_csv_file(allocation_csv), paths);
    const auto better = comonotone_improve(alloc, cfg.agents);
    const auto before = improvement_reference(alloc, better, cfg.agents);
    const auto after = transformed_allocation(better, cfg.agents);
    const std::size_t N = alloc.size(), n = alloc.n_agents();
    json order = json::array();
    for (std::size_t t = 0; t < alloc.horizon(); ++t) {
        json row = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> a(N), b(N);
            for (std::size_t p = 0; p < N; ++p) {
                a[p] = after[t][p * n + i];
                b[p] = before[t][p * n + i];
            }
            const auto v = convex_order_leq(paths->law_of(a), paths->law_of(b));
            row.push_back(v == ConvexOrder::strictly_dominated ? "strict" : v == ConvexOrder::dominated ? "weak" : "none");
        }
        order.push_back(row);
    }
    json out{{"comonotone_before", is_comonotone_process(alloc, cfg.agents)},
             {"comonotone_after", is_comonotone_process(better, cfg.agents)},
             {"convex_order", order}};
    ensure_dir(out_dir);
    write_text_file(join(out_dir, "allocation.csv"), to_csv_text(better));
    write_text_file(join(out_dir, "improve.json"), out.dump(2) + "\n");
    log << out.dump(2) << '\n';
    return exit_code::ok;
}

int cmd_verify(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto paths = build_scenario(cfg);
    const json v = cfg.raw.value("verify", json::object());
    TinyInstance inst{paths, v.value("m", std::size_t{8})};
    inst.validate(cfg.agents.size());
    const auto which = parse_po_notion(v.value("which", std::string("CDPO")));
    const auto src = v.value("allocation", std::string("solver"));
    json out{{"which", to_string(which)}, {"m", inst.m}};

    std::optional<Solution> sol;
    std::optional<AllocationProcess> alloc;
    if (src == "solver") {
        sol = solve_from(cfg, paths);
        alloc = sol->allocation;
    } else if (src == "endowments") {
        alloc = AllocationProcess::from_endowments(paths);
    } else {
        alloc = read_allocation_csv(read_csv_file(resolve(cfg, src)), paths);
    }
    const auto verdict = verify_po_definition(inst, cfg.agents, *alloc, which, v.value("t", std::size_t{0}));
    out["optimal"] = verdict.optimal;
    out["note"] = verdict.note;
    out["alternatives_checked"] = verdict.alternatives_checked;
    if (verdict.witness) {
        out["witness_period"] = verdict.witness_period;
        out["witness"] = allocation_rows(*verdict.witness);
    }
    if (sol) {
        json cmp = json::array();
        double amax = 0.0;
        for (std::size_t t = 1; t <= paths->horizon(); ++t) {
            const auto& pr = sol->report.periods[t - 1];
            const auto oracle = brute_force_cpo_t(inst, cfg.agents, t - 1, *alloc);
            for (std::size_t p = 0; p < paths->size(); ++p) {
                double a = paths->aggregate(p, t);
                for (const auto& R : sol->risk) a += R.at(p, t);
                amax = std::max(amax, std::abs(a));
            }
            const double solver = pr.objective + pr.r_low + pr.s_low;
            const double tol = static_cast<double>(cfg.agents.size()) * amax / static_cast<double>(inst.m);
            cmp.push_back({{"period", t}, {"solver", solver}, {"oracle", oracle.best},
                           {"tolerance", tol}, {"within", std::abs(solver - oracle.best) <= tol}});
        }
        out["objective_comparison"] = cmp;
    }
    if (v.value("set_relations", false)) {
        const auto rel = check_set_relations(inst, cfg.agents);
        out["set_relations"] = {{"allocations", rel.allocations}, {"comonotone", rel.comonotone},
                                {"dpo", rel.dpo}, {"cdpo", rel.cdpo}, {"cdpo_subset_dpo", rel.cdpo_subset_dpo},
                                {"dpo_non_comonotone", rel.dpo_non_comonotone}, {"note", rel.note}};
    }
    ensure_dir(out_dir);
    write_text_file(join(out_dir, "verify.json"), out.dump(2) + "\n");
    log << out.dump(2) << '\n';
    return exit_code::ok;
}

int cmd_replicate_example(std::uint64_t seed, std::size_t n_paths, const std::optional<std::string>& out_dir,
                          std::ostream& log) {
    const auto cfg = parse_run_config(example_config_json(seed, n_paths));
    const auto paths = build_scenario(cfg);
    const auto sol = solve_from(cfg, paths);
    const auto checks = example_checks(sol, cfg.agents, seed);
    log << checks.summary();
    if (out_dir) {
        ensure_dir(*out_dir);
        write_text_file(join(*out_dir, "config.json"), cfg.raw.dump(2) + "\n");
        write_text_file(join(*out_dir, "retention.json"), retention_to_json(sol.schedule).dump(2) + "\n");
        write_text_file(join(*out_dir, "allocation.csv"), to_csv_text(sol.allocation));
        write_text_file(join(*out_dir, "report.json"), report_to_json(sol.report).dump(2) + "\n");
    }
    return checks.all_ok() ? exit_code::ok : exit_code::check_failed;
}

int cmd_plotdata(const RunConfig& cfg, const std::string& figure, const std::string& out_dir, std::ostream& log) {
    static const std::vector<std::string> figures{"fig1", "fig2", "fig3", "fig4", "fig5"};
    require(std::find(figures.begin(), figures.end(), figure) != figures.end(), ErrorKind::configuration,
            "unknown figure '" + figure + "' (expected fig1..fig5)");
    const auto paths = build_scenario(cfg);
    const auto sol = solve_from(cfg, paths);
    const std::size_t T = paths->horizon(), n = cfg.agents.size();
    std::ostringstream os;
    if (figure == "fig1") {
        const auto& A = sol.assessments[T - 1];
        std::vector<double> us;
        for (std::size_t j = 0; j <= 200; ++j) us.push_back(static_cast<double>(j) / 200.0);
        for (const auto& k : A.k_star)
            for (const auto& kn : k.breakpoints()) us.push_back(kn.x);
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());
        os << "u";
        for (std::size_t i = 0; i < n; ++i) os << ",k" << i + 1;
        os << '\n';
        for (double u : us) {
            os << format_double(u);
            for (const auto& k : A.k_star) os << ',' << format_double(k(u));
            os << '\n';
        }
    } else if (figure == "fig2" || figure == "fig4") {
        write_assessment_curve(os, sol.assessments[figure == "fig2" ? T - 1 : 0]);
    } else if (figure == "fig3") {
        const auto& per = sol.schedule.periods[T - 1];
        const auto& A = sol.assessments[T - 1];
        const double xmax = A.grid.back() - A.r_low - A.s_low;
        std::vector<double> xs;
        for (std::size_t j = 0; j <= 200; ++j) xs.push_back(xmax * static_cast<double>(j) / 200.0);
        for (const auto& g : per.g)
            for (const auto& k : g.knots()) xs.push_back(k.x);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        os << "x";
        for (std::size_t i = 0; i < n; ++i) os << ",g" << i + 1;
        os << '\n';
        for (double x : xs) {
            os << format_double(x);
            for (const auto& g : per.g) os << ',' << format_double(g(x));
            os << '\n';
        }
    } else {
        // Retention at t = 1 against S_1 + Rbar_1 - r - s, and g - R_1 per agent.
        const auto& per = sol.schedule.periods[0];
        std::vector<std::pair<double, std::size_t>> xs;
        for (std::size_t p = 0; p < paths->size(); ++p) {
            double a = paths->aggregate(p, 1);
            for (const auto& R : sol.risk) a += R.at(p, 1);
            xs.emplace_back(a - per.r_low - per.s_low, p);
        }
        std::sort(xs.begin(), xs.end());
        os << "x";
        for (std::size_t i = 0; i < n; ++i) os << ",g" << i + 1;
        for (std::size_t i = 0; i < n; ++i) os << ",R" << i + 1;
        for (std::size_t i = 0; i < n; ++i) os << ",net" << i + 1;
        os << '\n';
        for (auto k : thin(xs.size(), 2000)) {
            const auto [x, p] = xs[k];
            os << format_double(x);
            for (const auto& g : per.g) os << ',' << format_double(g(x));
            for (const auto& R : sol.risk) os << ',' << format_double(R.at(p, 1));
            for (std::size_t i = 0; i < n; ++i) os << ',' << format_double(per.g[i](x) - sol.risk[i].at(p, 1));
            os << '\n';
        }
    }
    ensure_dir(out_dir);
    const auto path = join(out_dir, figure + ".csv");
    write_text_file(path, os.str());
    log << "wrote " << path << '\n';
    return exit_code::ok;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Comonotone dynamic Pareto-optimal risk sharing"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", figure, allocation;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_paths;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "Run configuration (JSON)");
        if (config_required) opt->required();
        sub->add_option("--seed", seed, "Override the configuration seed");
        sub->add_option("--paths", n_paths, "Override the number of sample paths");
        sub->add_option("--out", out_dir, "Output directory");
    };
    auto* solve = app.add_subcommand("solve", "Solve for a comonotone dynamic Pareto optimum");
    add_common(solve, true);
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate an allocation (the solver's by default)");
    add_common(evaluate, true);
    evaluate->add_option("--allocation", allocation, "Allocation CSV");
    auto* improve = app.add_subcommand("improve", "Comonotone improvement of an allocation");
    add_common(improve, true);
    improve->add_option("--allocation", allocation, "Allocation CSV")->required();
    auto* verify = app.add_subcommand("verify", "Brute-force optimality check on a tiny instance");
    add_common(verify, true);
    auto* replicate = app.add_subcommand("replicate-example", "Run the built-in two-period example");
    add_common(replicate, false);
    auto* plot = app.add_subcommand("plotdata", "Emit figure data as CSV");
    add_common(plot, false);
    plot->add_option("--figure", figure, "fig1..fig5")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : exit_code::config;
    }

    try {
        auto config = [&]() {
            RunConfig cfg = config_path.empty() ? parse_run_config(example_config_json()) : load_run_config(config_path);
            if (seed) cfg.seed = *seed;
            if (n_paths) cfg.n_paths = *n_paths;
            require(cfg.n_paths >= 1, ErrorKind::configuration, "--paths must be at least 1");
            return cfg;
        };
        if (*solve) return cmd_solve(config(), out_dir, out);
        if (*evaluate)
            return cmd_evaluate(config(), allocation.empty() ? std::nullopt : std::optional<std::string>(allocation),
                                out_dir, out);
        if (*improve) return cmd_improve(config(), allocation, out_dir, out);
        if (*verify) return cmd_verify(config(), out_dir, out);
        if (*replicate) {
            const bool has_out = replicate->count("--out") > 0;
            return cmd_replicate_example(seed.value_or(1), n_paths.value_or(100000),
                                         has_out ? std::optional<std::string>(out_dir) : std::nullopt, out);
        }
        if (*plot) return cmd_plotdata(config(), figure, out_dir, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::config;
    }
    return exit_code::config;
}

}  // namespace riskshare
