#include "riskshare/dynrisk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "riskshare/errors.hpp"

namespace riskshare {

RiskSpec RiskSpec::constant(std::size_t horizon, const DistortionFn& k) {
    RiskSpec s;
    s.periods.assign(horizon, PeriodSpec{EvalMode::marginal, RegimeDistortion::single(k)});
    return s;
}

bool RiskSpec::all_marginal() const {
    return std::all_of(periods.begin(), periods.end(), [](const PeriodSpec& p) { return p.mode == EvalMode::marginal; });
}

OneStepEvaluator::OneStepEvaluator(const RiskSpec& spec, std::size_t t, const SamplePathSet& paths)
    : paths_(paths) {
    require(spec.horizon() == paths.horizon(), ErrorKind::shape,
            "risk spec has " + std::to_string(spec.horizon()) + " periods, path set has " +
                std::to_string(paths.horizon()));
    require(t < spec.horizon(), ErrorKind::parameter, "one-step evaluation needs t < T");
    const auto& ps = spec.periods[t];
    mode_ = ps.mode;
    for (const auto& r : ps.regimes.regimes) kernels_.push_back(r.kernel);
    regime_ = ps.regimes.classify(paths, t);
    if (mode_ == EvalMode::tree) {
        std::map<std::size_t, std::size_t> index;
        for (std::size_t p = 0; p < paths.size(); ++p) {
            auto [it, fresh] = index.emplace(paths.info_node(p, t), cells_.size());
            if (fresh) cells_.emplace_back();
            cells_[it->second].push_back(p);
        }
        for (const auto& cell : cells_)
            for (auto p : cell)
                require(regime_[p] == regime_[cell.front()], ErrorKind::configuration,
                        "regime rule is not measurable with respect to the information at period " +
                            std::to_string(t));
    }
}

std::vector<double> OneStepEvaluator::eval(std::span<const double> next) const {
    const std::size_t N = paths_.size();
    require(next.size() == N, ErrorKind::shape, "next-period values have the wrong length");
    std::vector<double> out(N);
    if (mode_ == EvalMode::marginal) {
        const auto law = SortedLaw::of(next, paths_.weights());
        std::vector<double> by_regime(kernels_.size(), NAN);
        std::vector<bool> used(kernels_.size(), false);
        for (auto r : regime_) used[r] = true;
        for (std::size_t r = 0; r < kernels_.size(); ++r)
            if (used[r]) by_regime[r] = evaluate_set(kernels_[r], law);
        for (std::size_t p = 0; p < N; ++p) out[p] = by_regime[regime_[p]];
        return out;
    }
    std::vector<double> v, w;
    for (const auto& cell : cells_) {
        v.clear();
        w.clear();
        double mass = 0.0;
        for (auto p : cell) mass += paths_.weight(p);
        for (auto p : cell) {
            v.push_back(next[p]);
            w.push_back(mass > 0.0 ? paths_.weight(p) / mass : 1.0 / static_cast<double>(cell.size()));
        }
        const double value = evaluate_set(kernels_[regime_[cell.front()]], SortedLaw::of(v, w));
        for (auto p : cell) out[p] = value;
    }
    return out;
}

std::vector<double> eval_one_step(const RiskSpec& spec, std::size_t t, std::span<const double> next_values,
                                  const SamplePathSet& paths) {
    return OneStepEvaluator(spec, t, paths).eval(next_values);
}

std::vector<double> RiskToGo::column(std::size_t t) const {
    std::vector<double> c(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) c[p] = at(p, t);
    return c;
}

RiskToGo risk_to_go(const RiskSpec& spec, const AllocationProcess& alloc, std::size_t agent) {
    require(agent < alloc.n_agents(), ErrorKind::parameter, "agent index out of range");
    const auto& paths = alloc.paths();
    const std::size_t T = paths.horizon(), N = paths.size();
    RiskToGo R{T, N, std::vector<double>(N * (T + 1), 0.0)};
    std::vector<double> arg(N);
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t p = 0; p < N; ++p) arg[p] = alloc.at(p, t + 1, agent) + R.at(p, t + 1);
        auto col = eval_one_step(spec, t, arg, paths);
        for (std::size_t p = 0; p < N; ++p) R.at(p, t) = col[p];
    }
    return R;
}

std::vector<double> eval_dynamic(const RiskSpec& spec, const AllocationProcess& alloc, std::size_t agent,
                                 std::size_t t) {
    require(t < alloc.horizon(), ErrorKind::parameter, "dynamic evaluation needs t < T");
    return risk_to_go(spec, alloc, agent).column(t);
}

bool AxiomReport::all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const AxiomResult& r) { return r.passed; });
}

const AxiomResult& AxiomReport::get(const std::string& name) const {
    for (const auto& r : results)
        if (r.name == name) return r;
    fail(ErrorKind::parameter, "no axiom named " + name);
}

AxiomReport check_axioms(const RiskSpec& spec, const SamplePathSet& paths, std::size_t trials, std::uint64_t seed) {
    require(trials >= 1, ErrorKind::parameter, "need at least one trial");
    const std::size_t N = paths.size(), T = paths.horizon();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> val(-100.0, 100.0), pos(0.0, 50.0), scale(0.0, 5.0);
    std::uniform_int_distribution<std::size_t> pick_t(0, T - 1);

    std::vector<OneStepEvaluator> ev;
    for (std::size_t t = 0; t < T; ++t) ev.emplace_back(spec, t, paths);

    // Label groups whose permutation must leave the value unchanged: equal
    // weight, and in tree mode the same information cell.
    auto perm_groups = [&](std::size_t t) {
        std::map<std::pair<std::size_t, double>, std::vector<std::size_t>> g;
        for (std::size_t p = 0; p < N; ++p) {
            std::size_t cell = spec.periods[t].mode == EvalMode::tree ? paths.info_node(p, t) : 0;
            g[{cell, paths.weight(p)}].push_back(p);
        }
        return g;
    };

    double v_mono = 0, v_trans = 0, v_homog = 0, v_sub = 0, v_norm = 0, v_equi = 0;
    auto rel = [](double diff, double ref) { return diff / std::max(1.0, std::abs(ref)); };
    std::vector<double> x(N), y(N), tmp(N);
    for (std::size_t k = 0; k < trials; ++k) {
        const std::size_t t = pick_t(rng);
        const auto& e = ev[t];
        for (std::size_t p = 0; p < N; ++p) {
            x[p] = val(rng);
            y[p] = val(rng);
        }
        const auto rx = e.eval(x);
        const auto ry = e.eval(y);

        for (std::size_t p = 0; p < N; ++p) tmp[p] = x[p] + pos(rng);
        auto r_up = e.eval(tmp);
        for (std::size_t p = 0; p < N; ++p) v_mono = std::max(v_mono, rel(rx[p] - r_up[p], rx[p]));

        const double m = val(rng);
        for (std::size_t p = 0; p < N; ++p) tmp[p] = x[p] + m;
        auto r_sh = e.eval(tmp);
        for (std::size_t p = 0; p < N; ++p) v_trans = std::max(v_trans, rel(std::abs(r_sh[p] - rx[p] - m), rx[p]));

        const double c = scale(rng);
        for (std::size_t p = 0; p < N; ++p) tmp[p] = c * x[p];
        auto r_sc = e.eval(tmp);
        for (std::size_t p = 0; p < N; ++p) v_homog = std::max(v_homog, rel(std::abs(r_sc[p] - c * rx[p]), rx[p]));

        for (std::size_t p = 0; p < N; ++p) tmp[p] = x[p] + y[p];
        auto r_sum = e.eval(tmp);
        for (std::size_t p = 0; p < N; ++p)
            v_sub = std::max(v_sub, rel(r_sum[p] - rx[p] - ry[p], std::abs(rx[p]) + std::abs(ry[p])));

        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (double r : e.eval(tmp)) v_norm = std::max(v_norm, std::abs(r));

        tmp = x;
        for (auto& [key, members] : perm_groups(t)) {
            std::vector<std::size_t> shuffled = members;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            for (std::size_t j = 0; j < members.size(); ++j) tmp[members[j]] = x[shuffled[j]];
        }
        auto r_perm = e.eval(tmp);
        for (std::size_t p = 0; p < N; ++p) v_equi = std::max(v_equi, rel(std::abs(r_perm[p] - rx[p]), rx[p]));
    }

    AxiomReport rep;
    auto add = [&](const char* name, double v) { rep.results.push_back({name, v, v <= rep.tolerance}); };
    add("monotonicity", v_mono);
    add("translation", v_trans);
    add("homogeneity", v_homog);
    add("subadditivity", v_sub);
    add("normalization", v_norm);
    add("equidistribution", v_equi);
    return rep;
}

}  // namespace riskshare
