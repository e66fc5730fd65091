#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "riskshare/distortion.hpp"
#include "riskshare/scenario.hpp"

namespace riskshare {

/// A finite set of distortions evaluated as sup_k I_k. Ordinary distortion
/// preferences use a singleton.
using DistortionSet = std::vector<DistortionFn>;

double evaluate_set(const DistortionSet& ks, const SortedLaw& law);

/// Per-path quantity a regime rule looks at: S_t or the auxiliary O_t.
struct Observable {
    enum class Kind { aggregate, auxiliary };
    Kind kind = Kind::aggregate;
    std::size_t period = 0;

    static Observable parse(const std::string& text);  // "S1", "O2"
    std::string name() const;
};

struct RegimeRule {
    enum class Kind { leq_quantile, leq_value, otherwise };
    Kind kind = Kind::otherwise;
    Observable obs;
    double level = 0.0;  // quantile level or absolute threshold
};

struct Regime {
    RegimeRule rule;
    DistortionSet kernel;
};

/// Ordered regimes; the first rule matching a path decides its distortion.
struct RegimeDistortion {
    std::vector<Regime> regimes;

    static RegimeDistortion single(DistortionFn k);

    /// Regime index per path at period t (0..T-1). Rules may only look at
    /// periods 1..t.
    std::vector<std::size_t> classify(const SamplePathSet& paths, std::size_t t) const;
    /// Whether every regime carries exactly one distortion.
    bool singleton_kernels() const;
};

}  // namespace riskshare
