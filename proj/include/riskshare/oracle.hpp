#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "riskshare/allocation_process.hpp"
#include "riskshare/dynrisk.hpp"

namespace riskshare {

/// Small instance for exhaustive search. Allocations are restricted to grid
/// shares j/m of S_t + total risk-to-go, applied to Y + R.
struct TinyInstance {
    PathSetPtr paths;
    std::size_t m = 8;

    static constexpr std::size_t max_paths = 8;
    static constexpr std::size_t max_horizon = 2;
    static constexpr std::size_t max_agents = 3;
    static constexpr double max_enumeration = 1e7;

    /// (m+1)^((n-1) N T).
    double enumeration_size(std::size_t n_agents) const;
    /// Throws bound_exceeded (with the size estimate) or shape errors.
    void validate(std::size_t n_agents) const;
};

/// Grid shares of one agent set: every vector of n nonnegative integers summing to m.
std::vector<std::vector<std::size_t>> share_compositions(std::size_t n, std::size_t m);

struct CpoResult {
    double best = 0.0;
    std::vector<std::vector<double>> minimizers;  // Y_{t+1} as N x n matrices
    std::size_t enumerated = 0;
};

/// Minimizes E[sum_i rho_t(Y_{t+1} + R_{t+1})] over comonotone IR grid
/// allocations of S_{t+1}, with the tail after t+1 taken from `downstream`.
CpoResult brute_force_cpo_t(const TinyInstance& inst, const std::vector<RiskSpec>& specs, std::size_t t,
                            const AllocationProcess& downstream);

enum class PoNotion { PO_t, CPO_t, DPO, CDPO, MPO };

std::string to_string(PoNotion w);
PoNotion parse_po_notion(const std::string& s);

struct PoVerdict {
    bool optimal = true;
    std::string note;  // always states that the verdict is grid-relative
    std::optional<AllocationProcess> witness;
    std::size_t witness_period = 0;  // t of the failing step; 0 for MPO
    std::size_t alternatives_checked = 0;
};

/// `t` is used by PO_t and CPO_t only.
PoVerdict verify_po_definition(const TinyInstance& inst, const std::vector<RiskSpec>& specs,
                               const AllocationProcess& alloc, PoNotion which, std::size_t t = 0);

struct SetRelationReport {
    std::size_t allocations = 0;
    std::size_t comonotone = 0;
    std::size_t dpo = 0;
    std::size_t cdpo = 0;
    bool cdpo_subset_dpo = true;
    std::size_t cdpo_not_dpo = 0;
    std::size_t dpo_non_comonotone = 0;
    bool strictly_concave = false;
    bool dpo_all_comonotone = true;  // meaningful when strictly_concave
    std::optional<AllocationProcess> non_comonotone_dpo_example;
    std::string note;
};

SetRelationReport check_set_relations(const TinyInstance& inst, const std::vector<RiskSpec>& specs);

}  // namespace riskshare
