#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskshare/allocation_process.hpp"
#include "riskshare/regime.hpp"

namespace riskshare {

enum class EvalMode { marginal, tree };

struct PeriodSpec {
    EvalMode mode = EvalMode::marginal;
    RegimeDistortion regimes;
};

/// One agent's conditional risk measures rho_0 .. rho_{T-1}.
struct RiskSpec {
    std::vector<PeriodSpec> periods;

    std::size_t horizon() const { return periods.size(); }
    /// Same distortion in every period, marginal mode.
    static RiskSpec constant(std::size_t horizon, const DistortionFn& k);
    bool all_marginal() const;
};

/// rho_t for one spec on one path set, with regimes and information cells
/// resolved once.
class OneStepEvaluator {
public:
    OneStepEvaluator(const RiskSpec& spec, std::size_t t, const SamplePathSet& paths);

    std::vector<double> eval(std::span<const double> next_values) const;
    std::size_t regime_of(std::size_t path) const { return regime_[path]; }
    std::size_t n_regimes() const { return kernels_.size(); }

private:
    const SamplePathSet& paths_;
    EvalMode mode_;
    std::vector<DistortionSet> kernels_;
    std::vector<std::size_t> regime_;
    std::vector<std::vector<std::size_t>> cells_;  // tree mode only
};

std::vector<double> eval_one_step(const RiskSpec& spec, std::size_t t, std::span<const double> next_values,
                                  const SamplePathSet& paths);

/// R_t per path for t = 0..T; R_T = 0.
struct RiskToGo {
    std::size_t horizon = 0;
    std::size_t n_paths = 0;
    std::vector<double> values;  // N x (T+1)

    double at(std::size_t path, std::size_t t) const { return values[path * (horizon + 1) + t]; }
    double& at(std::size_t path, std::size_t t) { return values[path * (horizon + 1) + t]; }
    std::vector<double> column(std::size_t t) const;
};

RiskToGo risk_to_go(const RiskSpec& spec, const AllocationProcess& alloc, std::size_t agent);
std::vector<double> eval_dynamic(const RiskSpec& spec, const AllocationProcess& alloc, std::size_t agent,
                                 std::size_t t);

struct AxiomResult {
    std::string name;
    double max_violation = 0.0;
    bool passed = true;
};

struct AxiomReport {
    std::vector<AxiomResult> results;
    double tolerance = 1e-9;

    bool all_passed() const;
    const AxiomResult& get(const std::string& name) const;
};

AxiomReport check_axioms(const RiskSpec& spec, const SamplePathSet& paths, std::size_t trials, std::uint64_t seed);

}  // namespace riskshare
