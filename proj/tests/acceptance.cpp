// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "riskshare/allocation.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/example.hpp"
#include "riskshare/oracle.hpp"
#include "riskshare/paretosolve.hpp"

using namespace riskshare;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_s <= 0.0 || secs < budget_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("criterion %d: %s (%.2f s%s) %s\n", id, ok ? "PASS" : "FAIL", secs,
                in_time ? "" : ", over time budget", o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Solution& example_solution() {
    static const Solution sol = [] {
        SolveConfig cfg;
        cfg.agents = example_agents();
        cfg.paths = std::make_shared<const SamplePathSet>(generate_exponential_chain(100000, 200.0, 1));
        cfg.tie_policy = TiePolicy::lowest_index;
        cfg.premia_policy = PremiaPolicy::none;
        return solve_cdpo(cfg);
    }();
    return sol;
}

// Random concave distortion.
DistortionFn random_concave(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    switch (rng() % 4) {
        case 0: return identity_distortion();
        case 1: return es_distortion(0.1 + 0.8 * U(rng));
        case 2: return power_distortion(0.3 + 0.6 * U(rng), 4 + rng() % 5);
        default: {
            const double w = U(rng);
            return mix({{w, identity_distortion()}, {1.0 - w, es_distortion(0.2 + 0.7 * U(rng))}});
        }
    }
}

RiskSpec random_spec(std::size_t T, std::mt19937_64& rng) {
    RiskSpec s = RiskSpec::constant(T, random_concave(rng));
    for (auto& p : s.periods) p.regimes = RegimeDistortion::single(random_concave(rng));
    if (T == 2 && rng() % 2 == 0) {
        // regime switch on S_1 at the median
        s.periods[1].regimes.regimes = {
            {{RegimeRule::Kind::leq_quantile, Observable::parse("S1"), 0.5}, {random_concave(rng)}},
            {{RegimeRule::Kind::otherwise, {}, 0.0}, {random_concave(rng)}}};
    }
    return s;
}

PathSetPtr random_paths(std::size_t N, std::size_t T, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> U(0, 20);
    PathData d;
    d.horizon = T;
    for (std::size_t k = 0; k < N * T; ++k) d.aggregate.push_back(0.5 * U(rng));
    return std::make_shared<const SamplePathSet>(std::move(d));
}

// Sizes that keep (m+1)^((n-1) N T) within the oracle bound at m = 8.
struct Shape {
    std::size_t n, N, T;
};
const Shape kShapes[] = {{2, 3, 1}, {2, 5, 1}, {2, 6, 1}, {2, 2, 2}, {2, 3, 2}, {3, 2, 1}, {3, 3, 1}, {1, 4, 2}};

Outcome c1() {
    const auto p = std::make_shared<const SamplePathSet>(generate_exponential_chain(1000, 200.0, 1));
    const auto agents = example_agents();
    const auto k1 = compose_expected_distortion(agents[0].periods[1], 1, *p);
    const auto k2 = compose_expected_distortion(agents[1].periods[1], 1, *p);
    double err = 0.0;
    for (int j = 0; j < 20; ++j) {
        const double u = j / 19.0;
        err = std::max(err, std::abs(k1(u) - std::min(8.2 * u, 0.2 * u + 0.8)));
        err = std::max(err, std::abs(k2(u) - std::min(40.6 * u, 0.6 * u + 0.4)));
    }
    const auto roots = intersect(k1, k2);
    const double uerr = roots.size() == 1 ? std::abs(roots[0] - 0.4 / 7.6) : INFINITY;
    return {err <= 1e-12 && uerr <= 1e-12, fmt("max mixture error %.3g, u* = %.17g (error %.3g)", err,
                                               roots.empty() ? NAN : roots[0], uerr)};
}

Outcome c2() {
    const auto& sol = example_solution();
    const auto& th = sol.assessments[1].thresholds;
    const double x = th.size() == 1 ? th[0] : NAN;
    return {x >= 740.0 && x <= 820.0, fmt("x* = %.3f, expected in [740, 820]", x)};
}

Outcome c3() {
    const auto chk = example_checks(example_solution(), example_agents(), 1);
    return {chk.rbar_ok[0] && chk.rbar_ok[1] && chk.rbar_ok[2],
            fmt("Rbar_1 = %.3f / %.3f / %.3f, expected 200+-4 / 464.7+-15 / 1074.1+-40", chk.rbar[0], chk.rbar[1],
                chk.rbar[2])};
}

Outcome c4() {
    const auto& g = example_solution().schedule.periods[0].g;
    bool zero = g[0].left_slope() == 0.0 && g[0].right_slope() == 0.0;
    for (const auto& k : g[0].knots()) zero = zero && k.y == 0.0;
    bool ident = g[1].left_slope() == 1.0 && g[1].right_slope() == 1.0;
    for (const auto& k : g[1].knots()) ident = ident && k.y == k.x;
    return {zero && ident, fmt("g_1 agent 1 zero: %s, agent 2 identity: %s", zero ? "yes" : "no", ident ? "yes" : "no")};
}

Outcome c5() {
    std::mt19937_64 rng(20240501);
    int instances = 0, obj_ok = 0, cdpo_ok = 0;
    double worst = 0.0;
    for (int k = 0; k < 24; ++k) {
        const auto& sh = kShapes[k % std::size(kShapes)];
        const auto paths = random_paths(sh.N, sh.T, rng);
        std::vector<RiskSpec> specs;
        for (std::size_t i = 0; i < sh.n; ++i) specs.push_back(random_spec(sh.T, rng));
        SolveConfig cfg{specs, paths, TiePolicy::lowest_index, PremiaPolicy::none};
        const auto sol = solve_cdpo(cfg);
        const TinyInstance inst{paths, 8};
        bool within = true;
        for (std::size_t t = 1; t <= sh.T; ++t) {
            const auto& pr = sol.report.periods[t - 1];
            const auto oracle = brute_force_cpo_t(inst, specs, t - 1, sol.allocation);
            double amax = 0.0;
            for (std::size_t p = 0; p < paths->size(); ++p) {
                double a = paths->aggregate(p, t);
                for (const auto& R : sol.risk) a += R.at(p, t);
                amax = std::max(amax, std::abs(a));
            }
            const double tol = static_cast<double>(sh.n) * amax / static_cast<double>(inst.m);
            const double diff = std::abs(pr.objective + pr.r_low + pr.s_low - oracle.best);
            worst = std::max(worst, diff / std::max(tol, 1e-300));
            within = within && diff <= tol;
        }
        ++instances;
        if (within) ++obj_ok;
        if (verify_po_definition(inst, specs, sol.allocation, PoNotion::CDPO).optimal) ++cdpo_ok;
    }
    return {instances >= 20 && obj_ok == instances && cdpo_ok == instances,
            fmt("%d instances, objective within n*max|A|/m on %d (worst ratio %.3f), CDPO optimal on %d", instances,
                obj_ok, worst, cdpo_ok)};
}

Outcome c6() {
    const auto p = generate_exponential_chain(30, 200.0, 6);
    std::string detail;
    bool ok = true;
    const std::pair<const char*, DistortionFn> cases[] = {
        {"E", identity_distortion()}, {"ES0.5", es_distortion(0.5)}, {"ES0.9", es_distortion(0.9)}};
    for (const auto& [name, k] : cases) {
        const auto rep = check_axioms(RiskSpec::constant(2, k), p, 200, 77);
        double worst = 0.0;
        for (const auto& r : rep.results) {
            worst = std::max(worst, r.max_violation);
            ok = ok && r.passed && r.max_violation <= 1e-9;
        }
        detail += fmt("%s %zu axioms max violation %.2g; ", name, rep.results.size(), worst);
        ok = ok && rep.results.size() == 6;
    }
    return {ok, detail};
}

Outcome c7() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    int trials = 0, como_ok = 0, order_ok = 0, strict_trials = 0, strict_found = 0;
    while (trials < 60) {
        const std::size_t N = 6 + rng() % 5, T = 1 + rng() % 2;
        const auto p = std::make_shared<const SamplePathSet>(generate_exponential_chain(N, 10.0, rng()));
        PathData d;
        d.horizon = T;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t t = 1; t <= T; ++t) d.aggregate.push_back(p->aggregate(i, t));
        const auto paths = std::make_shared<const SamplePathSet>(std::move(d));
        const bool strict = trials % 2 == 0;
        std::vector<RiskSpec> specs;
        for (int i = 0; i < 2; ++i)
            specs.push_back(RiskSpec::constant(
                T, strict ? power_distortion(0.4 + 0.4 * (U(rng) + 1) / 2, 6) : random_concave(rng)));
        std::vector<double> y;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t t = 1; t <= T; ++t) {
                const double a = paths->aggregate(i, t) * (0.5 + U(rng)) + 3.0 * U(rng);
                y.push_back(a);
                y.push_back(paths->aggregate(i, t) - a);
            }
        const AllocationProcess a(paths, 2, y);
        const auto before = is_comonotone_process(a, specs);
        if (std::find(before.begin(), before.end(), false) == before.end()) continue;
        ++trials;
        const auto b = comonotone_improve(a, specs);
        const auto flags = is_comonotone_process(b, specs);
        if (std::find(flags.begin(), flags.end(), false) == flags.end()) ++como_ok;
        const auto ref = improvement_reference(a, b, specs);
        const auto after = transformed_allocation(b, specs);
        bool all = true, any_strict = false;
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < 2; ++j) {
                std::vector<double> ca(N), cb(N);
                for (std::size_t i = 0; i < N; ++i) {
                    ca[i] = ref[t][i * 2 + j];
                    cb[i] = after[t][i * 2 + j];
                }
                const auto v = convex_order_leq(EmpiricalDist::uniform(cb), EmpiricalDist::uniform(ca));
                all = all && v != ConvexOrder::incomparable;
                any_strict = any_strict || v == ConvexOrder::strictly_dominated;
            }
        if (all) ++order_ok;
        if (strict) {
            ++strict_trials;
            if (any_strict) ++strict_found;
        }
    }
    return {como_ok == trials && order_ok == trials && strict_found >= 1,
            fmt("%d non-comonotone inputs: comonotone after %d, convex order %d, strict improvement in %d of %d "
                "strictly concave trials",
                trials, como_ok, order_ok, strict_found, strict_trials)};
}

Outcome c8() {
    const auto& sol = example_solution();
    const auto agents = example_agents();
    const auto& a = sol.allocation;
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double base = evaluate_myopic(agents, a, i);
        for (double c : {-50.0, 1.0, 37.0}) {
            std::vector<double> y = a.raw();
            for (std::size_t p = 0; p < a.size(); ++p) {
                y[(p * 2 + 0) * 2 + i] -= c;
                y[(p * 2 + 0) * 2 + 1 - i] += c;
                y[(p * 2 + 1) * 2 + i] += c;
                y[(p * 2 + 1) * 2 + 1 - i] -= c;
            }
            const AllocationProcess shifted(a.paths_ptr(), 2, y);
            worst = std::max(worst, std::abs(evaluate_myopic(agents, shifted, i) - base) / std::max(1.0, std::abs(base)));
        }
    }
    const auto rep = verify_myopic_optimality(agents, a);
    return {worst <= 1e-10 && rep.applicable && std::abs(rep.relative_gap) <= 0.01,
            fmt("cash-shift max relative change %.3g; bound %.3f, value %.3f, relative gap %.4f%%", worst, rep.bound,
                rep.value, 100.0 * rep.relative_gap)};
}

Outcome c9() {
    std::mt19937_64 rng(4242);
    int subset_ok = 0;
    const Shape shapes[] = {{2, 3, 1}, {2, 4, 1}, {2, 2, 2}, {3, 2, 1}, {2, 5, 1}};
    std::size_t total_alloc = 0;
    for (int k = 0; k < 10; ++k) {
        const auto& sh = shapes[k % std::size(shapes)];
        const auto paths = random_paths(sh.N, sh.T, rng);
        std::vector<RiskSpec> specs;
        for (std::size_t i = 0; i < sh.n; ++i) specs.push_back(random_spec(sh.T, rng));
        const auto rep = check_set_relations(TinyInstance{paths, 4}, specs);
        total_alloc += rep.allocations;
        if (rep.cdpo_subset_dpo && rep.cdpo >= 1) ++subset_ok;
    }
    PathData d;
    d.horizon = 1;
    d.aggregate = {1, 3, 5};
    const auto p = std::make_shared<const SamplePathSet>(std::move(d));
    const std::vector<RiskSpec> neutral(2, RiskSpec::constant(1, identity_distortion()));
    const auto rep = check_set_relations(TinyInstance{p, 4}, neutral);
    bool witness = false;
    if (rep.non_comonotone_dpo_example) {
        const auto f = is_comonotone_process(*rep.non_comonotone_dpo_example, neutral);
        witness = std::find(f.begin(), f.end(), false) != f.end();
    }
    return {subset_ok == 10 && witness && rep.dpo_non_comonotone > 0,
            fmt("CDPO within DPO on %d of 10 instances (%zu grid allocations); expectation agents: %zu DPO, %zu "
                "CDPO, %zu non-comonotone DPO",
                subset_ok, total_alloc, rep.dpo, rep.cdpo, rep.dpo_non_comonotone)};
}

}  // namespace

int main() {
    criterion(1, 1.0, c1);
    // criteria 2 and 3 share one 100k-path solve; the first use pays for it
    criterion(2, 10.0, c2);
    criterion(3, 10.0, c3);
    criterion(4, 0.0, c4);
    criterion(5, 60.0, c5);
    criterion(6, 0.0, c6);
    criterion(7, 0.0, c7);
    criterion(8, 0.0, c8);
    criterion(9, 0.0, c9);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
