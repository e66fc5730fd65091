#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskshare/paretosolve.hpp"

namespace riskshare {

/// Two agents, two periods, S_1 ~ Exp(200), S_2 | S_1 ~ Exp(S_1).
/// Agent 1: ES_0.9 at time 0; at time 1 expectation when S_1 is at or below
/// its 20% quantile, ES_0.9 otherwise. Agent 2: expectation at time 0; at
/// time 1 expectation up to the 60% quantile of S_1, ES_0.99 above.
nlohmann::json example_config_json(std::uint64_t seed = 1, std::size_t n_paths = 100000);
std::vector<RiskSpec> example_agents();

struct ExampleChecks {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    bool widened = false;  // small sample: tolerances scaled up

    double u_star = 0.0;
    double u_star_expected = 0.4 / 7.6;
    bool u_star_ok = false;

    double x_star = 0.0;
    double x_lo = 740.0, x_hi = 820.0;
    bool x_star_ok = false;

    double rbar[3] = {0.0, 0.0, 0.0};  // low, middle, high regime of S_1
    double rbar_expected[3] = {200.0, 464.7, 1074.1};
    double rbar_tol[3] = {4.0, 15.0, 40.0};
    bool rbar_ok[3] = {false, false, false};

    bool time1_retention_ok = false;

    bool all_ok() const;
    std::string summary() const;
};

ExampleChecks replicate_example(std::uint64_t seed, std::size_t n_paths);
/// Same checks on an already solved example instance.
ExampleChecks example_checks(const Solution& sol, const std::vector<RiskSpec>& agents, std::uint64_t seed);

}  // namespace riskshare
