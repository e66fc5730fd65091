#pragma once

#include <cstddef>
#include <vector>

#include "riskshare/allocation_process.hpp"
#include "riskshare/distortion.hpp"
#include "riskshare/dynrisk.hpp"

namespace riskshare {

/// Retention functions and premia for one period.
struct RetentionPeriod {
    std::size_t period = 0;
    double s_low = 0.0;  // essinf S_t
    double r_low = 0.0;  // essinf of total risk-to-go at t
    std::vector<PiecewiseLinear> g;  // per agent, on [0, inf), g(0) = 0
    std::vector<double> premium;     // c_t^{(i)}
};

struct RetentionSchedule {
    std::vector<RetentionPeriod> periods;  // index t-1

    std::size_t horizon() const { return periods.size(); }
    std::size_t n_agents() const { return periods.empty() ? 0 : periods.front().g.size(); }
    /// Throws when slopes leave [0, 1], the g's do not add up to the identity,
    /// or the premia do not add up to s_low + r_low.
    void validate() const;
};

AllocationProcess retention_to_allocation(const RetentionSchedule& sched, const std::vector<RiskSpec>& specs,
                                          const PathSetPtr& paths);

/// Y_t + R_t for every agent, as an N x n matrix per period.
std::vector<std::vector<double>> transformed_allocation(const AllocationProcess& alloc,
                                                        const std::vector<RiskSpec>& specs);

/// Y_t of `before` plus the risk-to-go of `after` at t: the input the static
/// improvement step sees at t when `after` improves `before`.
std::vector<std::vector<double>> improvement_reference(const AllocationProcess& before, const AllocationProcess& after,
                                                       const std::vector<RiskSpec>& specs);

/// Whether rows (paths) of an N x n matrix are co-ordered, up to slack.
bool is_comonotone_matrix(const std::vector<double>& v, std::size_t n_paths, std::size_t n_agents);

/// Per period t = 1..T (index t-1).
std::vector<bool> is_comonotone_process(const AllocationProcess& alloc, const std::vector<RiskSpec>& specs);

enum class ConvexOrder { dominated, strictly_dominated, incomparable };

ConvexOrder convex_order_leq(const EmpiricalDist& y, const EmpiricalDist& z);

struct ImproveOptions {
    std::size_t max_sweeps_per_agent = 100;  // sweep cap is this times n
    double defect_tol = 1e-12;
};

/// Static step: an equal-weight allocation (N x n, rows summing to the
/// aggregate) replaced by a comonotone one whose columns are each smaller in
/// convex order.
std::vector<double> comonotone_improve_static(const std::vector<double>& v, std::size_t n_paths,
                                              std::size_t n_agents, const ImproveOptions& opts = {});

AllocationProcess comonotone_improve(const AllocationProcess& alloc, const std::vector<RiskSpec>& specs,
                                     const ImproveOptions& opts = {});

/// IR at period t (0..T-1): R_t(Y) <= R_t(X) on every path.
std::vector<bool> check_ir_t(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc, std::size_t t);

}  // namespace riskshare
