#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "riskshare/allocation.hpp"
#include "riskshare/dynrisk.hpp"

namespace riskshare {

enum class TiePolicy { lowest_index, equal_split, exhaustive };
enum class PremiaPolicy { egalitarian_slack, uniform, none };

std::string to_string(TiePolicy p);
std::string to_string(PremiaPolicy p);
TiePolicy parse_tie_policy(const std::string& s);
PremiaPolicy parse_premia_policy(const std::string& s);

/// E[rho_{t-1}(.)] as a Choquet integral: the mixture of the regime
/// distortions at t-1 weighted by empirical regime frequencies.
DistortionFn compose_expected_distortion(const PeriodSpec& spec, std::size_t t_minus_1, const SamplePathSet& paths);
/// Same for finite distortion sets: every choice of one member per regime.
DistortionSet compose_expected_distortion_set(const PeriodSpec& spec, std::size_t t_minus_1,
                                              const SamplePathSet& paths);

struct TailAssessment {
    std::size_t period = 0;
    std::vector<DistortionFn> k_star;  // one per agent (upper envelope for sets)
    double r_low = 0.0;
    double s_low = 0.0;
    std::vector<double> grid;      // sorted distinct values of S_t + total risk-to-go
    std::vector<double> survival;  // P(S_t + total > grid[j])
    // Argmin sets per region: region 0 is [0, x_1), region j is [x_j, x_{j+1})
    // with x_j = grid[j-1] - r - s, the last region is unbounded.
    std::vector<std::vector<std::size_t>> L;
    std::vector<double> region_start;   // x at the left end of each region
    std::vector<double> thresholds;     // x where the argmin set changes

    /// Argmin set at x >= 0.
    const std::vector<std::size_t>& argmin_at(double x) const;
};

TailAssessment tail_assessment(std::size_t t, const std::vector<DistortionFn>& k_stars, const EmpiricalDist& combined,
                               double r_low, double s_low, std::optional<std::vector<std::size_t>> lower_limit = {},
                               std::optional<std::vector<std::size_t>> upper_limit = {});

struct PeriodReport {
    std::size_t period = 0;
    double objective = 0.0;   // sum_i E[rho_{t-1}(g_i(Z))]
    std::size_t candidates = 0;
    bool truncated = false;
    TiePolicy tie_policy = TiePolicy::lowest_index;
    PremiaPolicy premia_policy = PremiaPolicy::egalitarian_slack;
    double r_low = 0.0;
    double s_low = 0.0;
    std::vector<double> premia_bounds;  // empty when not computed
    std::vector<bool> ir;               // IR at t-1 per agent; empty when not checked
    std::vector<double> thresholds;
};

struct SolveReport {
    std::vector<PeriodReport> periods;  // index t-1
    double expected_total_risk = 0.0;   // E[sum_i R_0^{(i)}]
    std::vector<bool> ir_dynamic;       // per agent; empty without endowments
};

struct SolveConfig {
    std::vector<RiskSpec> agents;
    PathSetPtr paths;
    TiePolicy tie_policy = TiePolicy::lowest_index;
    PremiaPolicy premia_policy = PremiaPolicy::egalitarian_slack;
};

struct StepResult {
    RetentionPeriod retention;
    PeriodReport report;
    std::vector<std::vector<double>> risk_before;  // R_{t-1}^{(i)} per agent, per path
};

/// One backward step given the risk-to-go R_t^{(i)} of the already solved tail.
StepResult solve_time_step(std::size_t t, const TailAssessment& assessment, const std::vector<RiskSpec>& specs,
                           const SamplePathSet& paths, const std::vector<std::vector<double>>& risk_after,
                           TiePolicy tie_policy, PremiaPolicy premia_policy);

struct Solution {
    AllocationProcess allocation;
    RetentionSchedule schedule;
    SolveReport report;
    std::vector<TailAssessment> assessments;  // index t-1
    std::vector<RiskToGo> risk;               // per agent
};

Solution solve_cdpo(const SolveConfig& config);

/// rho_0(rho_1(... rho_{T-1}(sum_t Y_t))) for one agent.
double evaluate_myopic(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc, std::size_t agent);

struct MyopicReport {
    bool applicable = false;
    std::string reason;
    double bound = 0.0;
    double value = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    bool attained = false;  // relative gap <= tolerance
    double tolerance = 0.01;
};

MyopicReport verify_myopic_optimality(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc,
                                      double tolerance = 0.01);

}  // namespace riskshare
