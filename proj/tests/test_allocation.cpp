#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "riskshare/allocation.hpp"
#include "riskshare/errors.hpp"

using namespace riskshare;

namespace {

PathSetPtr make_paths(std::size_t horizon, std::vector<double> s) {
    PathData d;
    d.horizon = horizon;
    d.aggregate = std::move(s);
    return std::make_shared<const SamplePathSet>(std::move(d));
}

PathSetPtr with_endowments(std::size_t horizon, std::vector<double> s, std::size_t n, std::vector<double> x) {
    PathData d;
    d.horizon = horizon;
    d.aggregate = std::move(s);
    d.n_agents = n;
    d.endowments = std::move(x);
    return std::make_shared<const SamplePathSet>(std::move(d));
}

PiecewiseLinear identity_pl() { return PiecewiseLinear({{0, 0}}, 1.0, 1.0); }
PiecewiseLinear zero_pl() { return PiecewiseLinear({{0, 0}}, 0.0, 0.0); }
PiecewiseLinear layer_above(double x) { return PiecewiseLinear({{0, 0}, {x, 0}}, 0.0, 1.0); }
PiecewiseLinear layer_below(double x) { return PiecewiseLinear({{0, 0}, {x, x}}, 1.0, 0.0); }

std::vector<double> random_allocation(const SamplePathSet& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> y;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t t = 1; t <= p.horizon(); ++t) {
            const double a = p.aggregate(i, t) * (0.5 + U(rng));
            y.push_back(a);
            y.push_back(p.aggregate(i, t) - a);
        }
    return y;
}

}  // namespace

TEST_CASE("single agent retention keeps the aggregate") {
    const auto p = make_paths(2, {1, 5, 2, 3, 4, 9});
    const std::vector<RiskSpec> specs{RiskSpec::constant(2, es_distortion(0.5))};
    RetentionSchedule sched;
    for (std::size_t t = 1; t <= 2; ++t) {
        RetentionPeriod per;
        per.period = t;
        std::vector<double> col = p->aggregate_column(t);
        per.s_low = *std::min_element(col.begin(), col.end());
        per.g = {identity_pl()};
        sched.periods.push_back(per);
    }
    // r_low at t=1 is essinf of the period-2 risk, a constant here
    sched.periods[0].r_low = choquet(es_distortion(0.5), p->marginal(2));
    for (auto& per : sched.periods) per.premium = {per.s_low + per.r_low};
    sched.validate();
    const auto a = retention_to_allocation(sched, specs, p);
    for (std::size_t i = 0; i < p->size(); ++i)
        for (std::size_t t = 1; t <= 2; ++t) CHECK(a.at(i, t, 0) == doctest::Approx(p->aggregate(i, t)).epsilon(1e-12));
}

TEST_CASE("layered retention at the last period") {
    const auto p = make_paths(2, {100, 500, 100, 900, 300, 1200, 300, 700});
    const std::vector<RiskSpec> specs{RiskSpec::constant(2, identity_distortion()),
                                      RiskSpec::constant(2, identity_distortion())};
    RetentionSchedule sched;
    RetentionPeriod p1;
    p1.period = 1;
    p1.s_low = 100;
    p1.g = {zero_pl(), identity_pl()};
    RetentionPeriod p2;
    p2.period = 2;
    p2.s_low = 500;
    p2.g = {layer_above(780 - 500), layer_below(780 - 500)};
    p2.premium = {10, 490};
    sched.periods = {p1, p2};
    const auto a0 = retention_to_allocation(
        RetentionSchedule{{[&] {
                               auto q = p1;
                               q.premium = {0, 100};
                               return q;
                           }(),
                           p2}},
        specs, p);
    for (std::size_t i = 0; i < p->size(); ++i) {
        const double s2 = p->aggregate(i, 2);
        CHECK(a0.at(i, 2, 0) == doctest::Approx(std::max(s2 - 780, 0.0) + 10));
        CHECK(a0.at(i, 2, 1) == doctest::Approx(std::min(s2, 780.0) - 10));
    }
    // agent 1 retains nothing at t=1: Y_1 = -R_1 + c
    const auto r = risk_to_go(specs[0], a0, 0);
    for (std::size_t i = 0; i < p->size(); ++i) CHECK(a0.at(i, 1, 0) == doctest::Approx(-r.at(i, 1)));
    CHECK(is_comonotone_process(a0, specs) == std::vector<bool>{true, true});
}

TEST_CASE("schedule validation") {
    RetentionSchedule s;
    RetentionPeriod p;
    p.period = 1;
    p.g = {identity_pl(), identity_pl()};
    p.premium = {0, 0};
    s.periods = {p};
    CHECK_THROWS_AS(s.validate(), Error);
    s.periods[0].g = {PiecewiseLinear({{0, 0}}, 1.5, 1.5), PiecewiseLinear({{0, 0}}, -0.5, -0.5)};
    CHECK_THROWS_AS(s.validate(), Error);
    s.periods[0].g = {identity_pl(), zero_pl()};
    s.periods[0].premium = {1, 0};
    CHECK_THROWS_AS(s.validate(), Error);
    s.periods[0].premium = {0.25, -0.25};
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("budget identity is enforced") {
    const auto p = make_paths(1, {1, 2});
    CHECK_THROWS_AS(AllocationProcess(p, 2, {1, 0, 1, 0}), Error);
    CHECK_NOTHROW(AllocationProcess(p, 2, {1, 0, 1, 1}));
}

TEST_CASE("anti-comonotone pair is detected") {
    const auto p = make_paths(1, {1, 1});
    const std::vector<RiskSpec> specs(2, RiskSpec::constant(1, identity_distortion()));
    const AllocationProcess a(p, 2, {1, 0, 0, 1});
    CHECK(is_comonotone_process(a, specs) == std::vector<bool>{false});
    const AllocationProcess single(p, 1, {1, 1});
    CHECK(is_comonotone_process(single, {specs[0]}) == std::vector<bool>{true});
}

TEST_CASE("convex order") {
    const auto eq = [](std::vector<double> v) { return EmpiricalDist::uniform(std::move(v)); };
    CHECK(convex_order_leq(eq({2, 2}), eq({1, 3})) == ConvexOrder::strictly_dominated);
    CHECK(convex_order_leq(eq({1, 3}), eq({2, 2})) == ConvexOrder::incomparable);
    CHECK(convex_order_leq(eq({1, 2}), eq({1, 3})) == ConvexOrder::incomparable);
    CHECK(convex_order_leq(eq({1, 3}), eq({3, 1})) == ConvexOrder::dominated);
    // unequal sizes are resampled
    CHECK(convex_order_leq(eq({2}), eq({1, 3})) == ConvexOrder::strictly_dominated);
    CHECK(convex_order_leq(EmpiricalDist({1, 3}, {0.5, 0.5}), eq({1, 1, 3, 3})) == ConvexOrder::dominated);
}

TEST_CASE("pairwise averaging step") {
    const auto p = make_paths(1, {1, 1});
    const std::vector<RiskSpec> specs(2, RiskSpec::constant(1, es_distortion(0.5)));
    const AllocationProcess a(p, 2, {1, 0, 0, 1});
    const auto b = comonotone_improve(a, specs);
    for (double v : b.raw()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("comonotone input is a fixed point") {
    const auto p = make_paths(2, {1, 2, 3, 4, 5, 6});
    const std::vector<RiskSpec> specs(2, RiskSpec::constant(2, es_distortion(0.5)));
    std::vector<double> y;
    for (std::size_t i = 0; i < p->size(); ++i)
        for (std::size_t t = 1; t <= 2; ++t) {
            y.push_back(0.3 * p->aggregate(i, t));
            y.push_back(0.7 * p->aggregate(i, t));
        }
    const AllocationProcess a(p, 2, y);
    const auto b = comonotone_improve(a, specs);
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(std::abs(b.raw()[k] - y[k]) <= 1e-9);
}

TEST_CASE("static improvement for three agents") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n_paths = 7, n = 3;
        std::vector<double> v(n_paths * n);
        for (double& x : v) x = U(rng);
        const auto w = comonotone_improve_static(v, n_paths, n);
        CHECK(is_comonotone_matrix(w, n_paths, n));
        for (std::size_t i = 0; i < n_paths; ++i) {
            double a = 0, b = 0;
            for (std::size_t j = 0; j < n; ++j) {
                a += v[i * n + j];
                b += w[i * n + j];
            }
            CHECK(b == doctest::Approx(a).epsilon(1e-12));
        }
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> cv, cw;
            for (std::size_t i = 0; i < n_paths; ++i) {
                cv.push_back(v[i * n + j]);
                cw.push_back(w[i * n + j]);
            }
            CHECK(convex_order_leq(EmpiricalDist::uniform(cw), EmpiricalDist::uniform(cv)) !=
                  ConvexOrder::incomparable);
        }
    }
}

TEST_CASE("dynamic improvement on random two-agent processes") {
    std::mt19937_64 rng(23);
    const auto p = std::make_shared<const SamplePathSet>(generate_exponential_chain(12, 10.0, 4));
    const std::vector<RiskSpec> specs{RiskSpec::constant(2, power_distortion(0.5, 6)),
                                      RiskSpec::constant(2, power_distortion(0.7, 6))};
    for (int trial = 0; trial < 10; ++trial) {
        const AllocationProcess a(p, 2, random_allocation(*p, rng));
        const auto b = comonotone_improve(a, specs);
        for (bool ok : is_comonotone_process(b, specs)) CHECK(ok);
        const auto vb = transformed_allocation(b, specs);
        const auto va = improvement_reference(a, b, specs);
        for (std::size_t t = 0; t < 2; ++t) {
            for (std::size_t j = 0; j < 2; ++j) {
                std::vector<double> ca, cb;
                for (std::size_t i = 0; i < p->size(); ++i) {
                    ca.push_back(va[t][i * 2 + j]);
                    cb.push_back(vb[t][i * 2 + j]);
                }
                CHECK(convex_order_leq(EmpiricalDist::uniform(cb), EmpiricalDist::uniform(ca)) !=
                      ConvexOrder::incomparable);
            }
        }
        for (std::size_t j = 0; j < 2; ++j) {
            const auto ra = risk_to_go(specs[j], a, j);
            const auto rb = risk_to_go(specs[j], b, j);
            CHECK(rb.at(0, 0) <= ra.at(0, 0) + 1e-9);
        }
    }
}

TEST_CASE("improvement needs equal weights") {
    PathData d;
    d.horizon = 1;
    d.aggregate = {1, 2};
    d.weights = {0.3, 0.7};
    const auto p = std::make_shared<const SamplePathSet>(std::move(d));
    const AllocationProcess a(p, 2, {1, 0, 0, 2});
    try {
        comonotone_improve(a, std::vector<RiskSpec>(2, RiskSpec::constant(1, identity_distortion())));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported);
    }
}

TEST_CASE("individual rationality") {
    const auto p = with_endowments(1, {2, 6}, 2, {1, 1, 3, 3});
    const std::vector<RiskSpec> specs(2, RiskSpec::constant(1, es_distortion(0.5)));
    CHECK(check_ir_t(specs, AllocationProcess::from_endowments(p), 0) == std::vector<bool>{true, true});
    const AllocationProcess dumped(p, 2, {2, 0, 6, 0});
    CHECK(check_ir_t(specs, dumped, 0) == std::vector<bool>{false, true});

    const auto solo = with_endowments(1, {2, 6}, 1, {2, 6});
    const std::vector<RiskSpec> one{specs[0]};
    CHECK(check_ir_t(one, AllocationProcess::from_endowments(solo), 0) == std::vector<bool>{true});

    const auto bare = make_paths(1, {2, 6});
    try {
        check_ir_t(specs, AllocationProcess(bare, 2, {1, 1, 3, 3}), 0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::configuration);
    }
}
