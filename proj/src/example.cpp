#include "riskshare/example.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>

#include "riskshare/errors.hpp"
#include "riskshare/io.hpp"

namespace riskshare {

namespace {

json agent_json(const json& d0, double q, const json& high) {
    return json{{"periods",
                 {{{"mode", "marginal"}, {"regimes", {{{"else", true}, {"distortion", d0}}}}},
                  {{"mode", "marginal"},
                   {"regimes",
                    {{{"obs", "S1"}, {"leq_quantile", q}, {"distortion", "expectation"}},
                     {{"else", true}, {"distortion", high}}}}}}}};
}

bool is_zero_fn(const PiecewiseLinear& g) {
    if (g.left_slope() != 0.0 || g.right_slope() != 0.0) return false;
    for (const auto& k : g.knots())
        if (k.y != 0.0) return false;
    return true;
}

bool is_identity_fn(const PiecewiseLinear& g) {
    if (g.left_slope() != 1.0 || g.right_slope() != 1.0) return false;
    for (const auto& k : g.knots())
        if (k.y != k.x) return false;
    return true;
}

}  // namespace

json example_config_json(std::uint64_t seed, std::size_t n_paths) {
    return json{{"agents", {agent_json(json{{"es", 0.9}}, 0.2, json{{"es", 0.9}}),
                            agent_json("expectation", 0.6, json{{"es", 0.99}})}},
                {"scenario", {{"generator", "exponential_chain"}, {"mean0", 200.0}}},
                {"tie_policy", "lowest-index"},
                {"c_policy", "none"},
                {"seed", seed},
                {"n_paths", n_paths}};
}

std::vector<RiskSpec> example_agents() {
    std::vector<RiskSpec> out;
    const json cfg = example_config_json();
    for (const auto& a : cfg["agents"]) out.push_back(risk_spec_from_json(a));
    return out;
}

bool ExampleChecks::all_ok() const {
    return u_star_ok && x_star_ok && rbar_ok[0] && rbar_ok[1] && rbar_ok[2] && time1_retention_ok;
}

std::string ExampleChecks::summary() const {
    std::ostringstream os;
    char buf[256];
    auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };
    os << "paths " << n_paths << ", seed " << seed << '\n';
    if (widened) os << "warning: fewer than 100000 paths, tolerances widened by sqrt(100000/n)\n";
    std::snprintf(buf, sizeof buf, "u*        %.17g (expected %.17g) %s\n", u_star, u_star_expected, verdict(u_star_ok));
    os << buf;
    std::snprintf(buf, sizeof buf, "x*        %.6f in [%.1f, %.1f] %s\n", x_star, x_lo, x_hi, verdict(x_star_ok));
    os << buf;
    const char* names[3] = {"low", "middle", "high"};
    for (int r = 0; r < 3; ++r) {
        std::snprintf(buf, sizeof buf, "Rbar_1 %-6s %.4f (expected %.1f +- %.1f) %s\n", names[r], rbar[r],
                      rbar_expected[r], rbar_tol[r], verdict(rbar_ok[r]));
        os << buf;
    }
    os << "g_1 agent 1 = 0, agent 2 = identity " << verdict(time1_retention_ok) << '\n';
    return os.str();
}

ExampleChecks example_checks(const Solution& sol, const std::vector<RiskSpec>& agents, std::uint64_t seed) {
    const auto& paths = sol.allocation.paths();
    ExampleChecks c;
    c.seed = seed;
    c.n_paths = paths.size();
    double widen = 1.0;
    if (c.n_paths < 100000) {
        c.widened = true;
        widen = std::sqrt(100000.0 / static_cast<double>(c.n_paths));
    }
    const double half = 40.0 * widen;
    c.x_lo = 780.0 - half;
    c.x_hi = 780.0 + half;
    for (auto& t : c.rbar_tol) t *= widen;

    const auto& a2 = sol.assessments[1];
    auto crossings = intersect(a2.k_star[0], a2.k_star[1]);
    c.u_star = crossings.empty() ? NAN : crossings.front();
    c.u_star_ok = crossings.size() == 1 && std::abs(c.u_star - c.u_star_expected) <= 1e-12 * widen;

    c.x_star = a2.thresholds.empty() ? NAN : a2.thresholds.front();
    c.x_star_ok = a2.thresholds.size() == 1 && c.x_star >= c.x_lo && c.x_star <= c.x_hi;

    // Regime of each path at t = 1, combined over both agents.
    const auto r1 = agents[0].periods[1].regimes.classify(paths, 1);
    const auto r2 = agents[1].periods[1].regimes.classify(paths, 1);
    std::map<int, double> value;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const int group = r1[p] == 0 ? 0 : (r2[p] == 0 ? 1 : 2);
        double total = 0.0;
        for (const auto& R : sol.risk) total += R.at(p, 1);
        value[group] = total;
    }
    for (int g = 0; g < 3; ++g) {
        c.rbar[g] = value.count(g) ? value[g] : NAN;
        c.rbar_ok[g] = std::abs(c.rbar[g] - c.rbar_expected[g]) <= c.rbar_tol[g];
    }
    const auto& g1 = sol.schedule.periods[0].g;
    c.time1_retention_ok = is_zero_fn(g1[0]) && is_identity_fn(g1[1]);
    return c;
}

ExampleChecks replicate_example(std::uint64_t seed, std::size_t n_paths) {
    SolveConfig cfg;
    cfg.agents = example_agents();
    cfg.paths = std::make_shared<const SamplePathSet>(generate_exponential_chain(n_paths, 200.0, seed));
    cfg.tie_policy = TiePolicy::lowest_index;
    cfg.premia_policy = PremiaPolicy::none;
    const auto sol = solve_cdpo(cfg);
    return example_checks(sol, cfg.agents, seed);
}

}  // namespace riskshare
