#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "riskshare/errors.hpp"
#include "riskshare/example.hpp"
#include "riskshare/paretosolve.hpp"

using namespace riskshare;

namespace {

PathSetPtr chain(std::size_t n, std::uint64_t seed = 1) {
    return std::make_shared<const SamplePathSet>(generate_exponential_chain(n, 200.0, seed));
}

Solution solve(const std::vector<RiskSpec>& agents, const PathSetPtr& p, TiePolicy tie = TiePolicy::lowest_index) {
    SolveConfig cfg;
    cfg.agents = agents;
    cfg.paths = p;
    cfg.tie_policy = tie;
    cfg.premia_policy = PremiaPolicy::none;
    return solve_cdpo(cfg);
}

// Example solution shared by several cases; 100k paths is the reference size.
const Solution& example_solution() {
    static const Solution s = solve(example_agents(), chain(100000));
    return s;
}

}  // namespace

TEST_CASE("policy names") {
    CHECK(parse_tie_policy("equal-split") == TiePolicy::equal_split);
    CHECK(to_string(TiePolicy::exhaustive) == "exhaustive");
    CHECK(parse_premia_policy("none") == PremiaPolicy::none);
    CHECK(to_string(PremiaPolicy::egalitarian_slack) == "egalitarian-slack");
    CHECK_THROWS_AS(parse_tie_policy("random"), Error);
}

TEST_CASE("composed regime distortions") {
    const auto p = chain(1000);
    const auto agents = example_agents();
    const auto k1 = compose_expected_distortion(agents[0].periods[1], 1, *p);
    const auto k2 = compose_expected_distortion(agents[1].periods[1], 1, *p);
    for (int i = 0; i <= 20; ++i) {
        const double u = i / 20.0;
        CHECK(std::abs(k1(u) - std::min(8.2 * u, 0.2 * u + 0.8)) <= 1e-12);
        CHECK(std::abs(k2(u) - std::min(40.6 * u, 0.6 * u + 0.4)) <= 1e-12);
    }
    CHECK(compose_expected_distortion(agents[1].periods[0], 0, *p).is_identity());
    const auto roots = intersect(k1, k2);
    REQUIRE(roots.size() == 1);
    CHECK(std::abs(roots[0] - 0.4 / 7.6) <= 1e-12);
}

TEST_CASE("tree mode is rejected by the solver") {
    auto spec = RiskSpec::constant(2, identity_distortion());
    spec.periods[1].mode = EvalMode::tree;
    CHECK_THROWS_AS(compose_expected_distortion(spec.periods[1], 1, *chain(10)), Error);
    try {
        solve({spec}, chain(10));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported);
    }
}

TEST_CASE("example assessments") {
    const auto& sol = example_solution();
    const auto& a2 = sol.assessments[1];
    REQUIRE(a2.thresholds.size() == 1);
    const double x = a2.thresholds[0];
    CHECK(x >= 740.0);
    CHECK(x <= 820.0);
    CHECK(a2.argmin_at(0.0) == std::vector<std::size_t>{1});
    CHECK(a2.argmin_at(x - 1.0) == std::vector<std::size_t>{1});
    CHECK(a2.argmin_at(x) == std::vector<std::size_t>{0});
    CHECK(a2.argmin_at(1e6) == std::vector<std::size_t>{0});
    const auto& a1 = sol.assessments[0];
    CHECK(a1.thresholds.empty());
    for (const auto& L : a1.L) CHECK(L == std::vector<std::size_t>{1});
}

TEST_CASE("example retentions") {
    const auto& sol = example_solution();
    const double x = sol.assessments[1].thresholds[0];
    const auto& g2 = sol.schedule.periods[1].g;
    for (double z : {0.0, 100.0, x - 1.0, x, x + 50.0, 5000.0}) {
        CHECK(g2[0](z) == doctest::Approx(std::max(z - x, 0.0)).epsilon(1e-12));
        CHECK(g2[1](z) == doctest::Approx(std::min(z, x)).epsilon(1e-12));
    }
    const auto& g1 = sol.schedule.periods[0].g;
    for (double z : {0.0, 10.0, 1e4}) {
        CHECK(g1[0](z) == 0.0);
        CHECK(g1[1](z) == doctest::Approx(z));
    }
    CHECK_NOTHROW(sol.schedule.validate());
    for (bool ok : is_comonotone_process(sol.allocation, example_agents())) CHECK(ok);
}

TEST_CASE("example regime values") {
    const auto checks = example_checks(example_solution(), example_agents(), 1);
    CHECK(checks.u_star_ok);
    CHECK(checks.x_star_ok);
    CHECK(checks.rbar_ok[0]);
    CHECK(checks.rbar_ok[1]);
    CHECK(checks.rbar_ok[2]);
    CHECK(checks.time1_retention_ok);
    // Reference values from numerical integration of the continuous model
    CHECK(std::abs(checks.x_star - 776.613) <= 20.0);
    CHECK(std::abs(checks.rbar[1] - 461.371) <= 15.0);
    CHECK(std::abs(checks.rbar[2] - 1067.026) <= 40.0);
}

TEST_CASE("identical agents tie everywhere") {
    const auto p = chain(200);
    const std::vector<DistortionFn> k(3, es_distortion(0.8));
    const auto a = tail_assessment(2, k, p->marginal(2), 0.0, essinf(p->marginal(2)));
    for (const auto& L : a.L) CHECK(L == std::vector<std::size_t>{0, 1, 2});
    CHECK(a.thresholds.empty());
}

TEST_CASE("single agent keeps everything") {
    const auto p = chain(300);
    const auto spec = RiskSpec::constant(2, es_distortion(0.5));
    const auto sol = solve({spec}, p);
    for (std::size_t i = 0; i < p->size(); ++i)
        for (std::size_t t = 1; t <= 2; ++t)
            CHECK(sol.allocation.at(i, t, 0) == doctest::Approx(p->aggregate(i, t)).epsilon(1e-12));
    const auto& per = sol.schedule.periods[1];
    CHECK(per.premium[0] == doctest::Approx(per.s_low + per.r_low));
    const double z_obj = choquet(es_distortion(0.5), p->marginal(2)) - per.s_low;
    CHECK(sol.report.periods[1].objective == doctest::Approx(z_obj).epsilon(1e-12));
}

TEST_CASE("risk neutral agents") {
    const auto p = chain(500);
    const std::vector<RiskSpec> agents(3, RiskSpec::constant(2, identity_distortion()));
    const auto sol = solve(agents, p);
    const double total = p->marginal(1).mean() + p->marginal(2).mean();
    CHECK(sol.report.expected_total_risk == doctest::Approx(total).epsilon(1e-12));
    for (const auto& per : sol.schedule.periods) {
        CHECK(per.g[0](1000.0) == doctest::Approx(1000.0));
        CHECK(per.g[1](1000.0) == 0.0);
    }
}

TEST_CASE("tie policies agree on the objective") {
    const auto p = chain(60, 3);
    std::vector<RiskSpec> agents{RiskSpec::constant(2, es_distortion(0.5)), RiskSpec::constant(2, es_distortion(0.5)),
                                 RiskSpec::constant(2, identity_distortion())};
    const auto a = solve(agents, p, TiePolicy::lowest_index);
    const auto b = solve(agents, p, TiePolicy::equal_split);
    const auto c = solve(agents, p, TiePolicy::exhaustive);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(b.report.periods[t].objective == doctest::Approx(a.report.periods[t].objective).epsilon(1e-9));
        CHECK(c.report.periods[t].objective <= a.report.periods[t].objective + 1e-9);
        CHECK(c.report.periods[t].candidates >= 1);
    }
    for (const auto* s : {&a, &b, &c})
        for (bool ok : is_comonotone_process(s->allocation, agents)) CHECK(ok);
}

TEST_CASE("slope conservation") {
    const auto& sol = example_solution();
    for (const auto& per : sol.schedule.periods)
        for (double z : {0.0, 1.0, 350.0, 777.0, 2500.0, 1e5}) {
            double s = 0.0;
            for (const auto& g : per.g) s += g(z);
            CHECK(std::abs(s - z) <= 1e-9 * std::max(1.0, z));
        }
}

TEST_CASE("myopic evaluation") {
    const auto& sol = example_solution();
    const auto agents = example_agents();
    for (std::size_t i = 0; i < 2; ++i) {
        const double dyn = sol.risk[i].at(0, 0);
        CHECK(std::abs(evaluate_myopic(agents, sol.allocation, i) - dyn) <= 1e-9 * std::max(1.0, std::abs(dyn)));
    }
}

TEST_CASE("myopic value is invariant under cash shifts") {
    const auto& sol = example_solution();
    const auto agents = example_agents();
    const auto& a = sol.allocation;
    const double base0 = evaluate_myopic(agents, a, 0);
    const double base1 = evaluate_myopic(agents, a, 1);
    for (double c : {-50.0, 1.0, 37.0}) {
        std::vector<double> y = a.raw();
        for (std::size_t p = 0; p < a.size(); ++p) {
            y[(p * 2 + 0) * 2 + 0] -= c;
            y[(p * 2 + 0) * 2 + 1] += c;
            y[(p * 2 + 1) * 2 + 0] += c;
            y[(p * 2 + 1) * 2 + 1] -= c;
        }
        const AllocationProcess shifted(a.paths_ptr(), 2, y);
        CHECK(std::abs(evaluate_myopic(agents, shifted, 0) - base0) <= 1e-10 * std::max(1.0, std::abs(base0)));
        CHECK(std::abs(evaluate_myopic(agents, shifted, 1) - base1) <= 1e-10 * std::max(1.0, std::abs(base1)));
    }
}

TEST_CASE("myopic bound") {
    const auto& sol = example_solution();
    const auto agents = example_agents();
    const auto rep = verify_myopic_optimality(agents, sol.allocation);
    CHECK(rep.applicable);
    CHECK(rep.attained);
    CHECK(std::abs(rep.bound - 851.238) <= 0.03 * 851.238);

    // move the time-2 layer boundary up by 100
    const double x = sol.assessments[1].thresholds[0] + 100.0;
    std::vector<double> y = sol.allocation.raw();
    const auto& p = sol.allocation.paths();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double s2 = p.aggregate(i, 2);
        y[(i * 2 + 1) * 2 + 0] = std::max(s2 - x, 0.0);
        y[(i * 2 + 1) * 2 + 1] = std::min(s2, x);
    }
    const AllocationProcess worse(sol.allocation.paths_ptr(), 2, y);
    const auto bad = verify_myopic_optimality(agents, worse);
    CHECK(bad.gap > 0.0);
    CHECK(bad.gap > rep.gap);

    const auto none = verify_myopic_optimality({agents[0]}, sol.allocation);
    CHECK_FALSE(none.applicable);
}

TEST_CASE("premia policies") {
    PathData d;
    d.horizon = 1;
    d.aggregate = {2, 4, 6, 8};
    d.n_agents = 2;
    d.endowments = {1, 1, 3, 1, 1, 5, 4, 4};
    const auto p = std::make_shared<const SamplePathSet>(std::move(d));
    const std::vector<RiskSpec> agents{RiskSpec::constant(1, es_distortion(0.5)),
                                       RiskSpec::constant(1, identity_distortion())};
    SolveConfig cfg{agents, p, TiePolicy::lowest_index, PremiaPolicy::egalitarian_slack};
    const auto sol = solve_cdpo(cfg);
    const auto& per = sol.report.periods[0];
    REQUIRE(per.premia_bounds.size() == 2);
    CHECK(per.ir == std::vector<bool>{true, true});
    CHECK(sol.report.ir_dynamic == std::vector<bool>{true, true});
    const auto& c = sol.schedule.periods[0].premium;
    CHECK(c[0] + c[1] == doctest::Approx(per.s_low + per.r_low));
    CHECK(per.premia_bounds[0] - c[0] == doctest::Approx(per.premia_bounds[1] - c[1]));

    cfg.premia_policy = PremiaPolicy::uniform;
    const auto u = solve_cdpo(cfg);
    CHECK(u.schedule.periods[0].premium[0] == doctest::Approx(u.schedule.periods[0].premium[1]));

    PathData bare;
    bare.horizon = 1;
    bare.aggregate = {2, 4};
    cfg.paths = std::make_shared<const SamplePathSet>(std::move(bare));
    cfg.premia_policy = PremiaPolicy::egalitarian_slack;
    try {
        solve_cdpo(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::configuration);
    }
}

TEST_CASE("finite distortion sets") {
    const auto p = chain(50, 8);
    RiskSpec s = RiskSpec::constant(2, identity_distortion());
    s.periods[1].regimes.regimes[0].kernel = {identity_distortion(), es_distortion(0.5)};
    const auto set = compose_expected_distortion_set(s.periods[1], 1, *p);
    CHECK(set.size() == 2);
    const auto sol = solve({s, RiskSpec::constant(2, es_distortion(0.9))}, p);
    for (bool ok : is_comonotone_process(sol.allocation, {s, RiskSpec::constant(2, es_distortion(0.9))})) CHECK(ok);
}
