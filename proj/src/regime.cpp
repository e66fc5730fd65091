#include "riskshare/regime.hpp"

#include <algorithm>
#include <cctype>

#include "riskshare/errors.hpp"

namespace riskshare {

double evaluate_set(const DistortionSet& ks, const SortedLaw& law) {
    require(!ks.empty(), ErrorKind::configuration, "empty distortion set");
    double best = choquet(ks.front(), law);
    for (std::size_t j = 1; j < ks.size(); ++j) best = std::max(best, choquet(ks[j], law));
    return best;
}

Observable Observable::parse(const std::string& text) {
    Observable o;
    require(text.size() >= 2 && (text[0] == 'S' || text[0] == 'O'), ErrorKind::configuration,
            "observable must look like S<t> or O<t>: " + text);
    o.kind = text[0] == 'S' ? Kind::aggregate : Kind::auxiliary;
    for (std::size_t i = 1; i < text.size(); ++i)
        require(std::isdigit(static_cast<unsigned char>(text[i])), ErrorKind::configuration, "bad observable " + text);
    o.period = std::stoul(text.substr(1));
    require(o.period >= 1, ErrorKind::configuration, "observable period must be at least 1: " + text);
    return o;
}

std::string Observable::name() const { return (kind == Kind::aggregate ? "S" : "O") + std::to_string(period); }

RegimeDistortion RegimeDistortion::single(DistortionFn k) {
    RegimeDistortion rd;
    rd.regimes.push_back({RegimeRule{}, {std::move(k)}});
    return rd;
}

bool RegimeDistortion::singleton_kernels() const {
    return std::all_of(regimes.begin(), regimes.end(), [](const Regime& r) { return r.kernel.size() == 1; });
}

std::vector<std::size_t> RegimeDistortion::classify(const SamplePathSet& paths, std::size_t t) const {
    require(!regimes.empty(), ErrorKind::configuration, "no regimes at period " + std::to_string(t));
    const std::size_t N = paths.size();
    constexpr std::size_t unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> out(N, unset);
    for (std::size_t r = 0; r < regimes.size(); ++r) {
        const auto& rule = regimes[r].rule;
        require(!regimes[r].kernel.empty(), ErrorKind::configuration, "regime without a distortion");
        if (rule.kind == RegimeRule::Kind::otherwise) {
            for (auto& o : out)
                if (o == unset) o = r;
            continue;
        }
        require(rule.obs.period >= 1 && rule.obs.period <= t, ErrorKind::configuration,
                "rule at period " + std::to_string(t) + " looks at " + rule.obs.name() +
                    ", which is not yet observed");
        auto col = rule.obs.kind == Observable::Kind::aggregate ? paths.aggregate_column(rule.obs.period)
                                                                : paths.observable_column(rule.obs.period);
        double threshold = rule.level;
        if (rule.kind == RegimeRule::Kind::leq_quantile) {
            std::vector<double> w(paths.weights().begin(), paths.weights().end());
            threshold = quantile_left(EmpiricalDist(col, std::move(w)), rule.level);
        }
        for (std::size_t p = 0; p < N; ++p)
            if (out[p] == unset && col[p] <= threshold) out[p] = r;
    }
    for (std::size_t p = 0; p < N; ++p)
        if (out[p] == unset)
            fail(ErrorKind::configuration, "no regime covers path " + std::to_string(p) + " at period " +
                                               std::to_string(t));
    return out;
}

}  // namespace riskshare
