#include "riskshare/paretosolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

constexpr double kTieTol = 1e-14;
constexpr double kSlack = 1e-9;
constexpr std::size_t kMaxCandidates = 64;

std::vector<double> regime_frequencies(const PeriodSpec& spec, std::size_t t, const SamplePathSet& paths) {
    require(spec.mode == EvalMode::marginal, ErrorKind::unsupported,
            "the solver only handles marginal-mode risk specs");
    const auto regime = spec.regimes.classify(paths, t);
    std::vector<double> freq(spec.regimes.regimes.size(), 0.0);
    if (paths.equal_weights()) {
        std::vector<std::size_t> count(freq.size(), 0);
        for (auto r : regime) ++count[r];
        for (std::size_t r = 0; r < freq.size(); ++r)
            freq[r] = static_cast<double>(count[r]) / static_cast<double>(paths.size());
    } else {
        for (std::size_t p = 0; p < paths.size(); ++p) freq[regime[p]] += paths.weight(p);
        double total = std::accumulate(freq.begin(), freq.end(), 0.0);
        for (auto& f : freq) f /= total;
    }
    return freq;
}

// Pointwise maximum of a finite set of distortions.
DistortionFn upper_envelope(const DistortionSet& ks) {
    if (ks.size() == 1) return ks.front();
    std::vector<double> xs;
    for (const auto& k : ks)
        for (const auto& kn : k.breakpoints()) xs.push_back(kn.x);
    for (std::size_t a = 0; a < ks.size(); ++a)
        for (std::size_t b = a + 1; b < ks.size(); ++b)
            for (double u : intersect(ks[a], ks[b])) xs.push_back(u);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<Knot> knots;
    for (double x : xs) {
        double y = 0.0;
        for (const auto& k : ks) y = std::max(y, k(x));
        knots.push_back({x, y});
    }
    return DistortionFn(std::move(knots));
}

template <class Score>
std::vector<std::size_t> best_indices(std::size_t n, Score score, bool maximize) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = score(i);
    const double best = maximize ? *std::max_element(v.begin(), v.end()) : *std::min_element(v.begin(), v.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(v[i] - best) <= kTieTol * std::max(1.0, std::abs(best))) out.push_back(i);
    return out;
}

double essinf_of(std::span<const double> v, const SamplePathSet& paths) {
    double m = INFINITY;
    for (std::size_t p = 0; p < v.size(); ++p)
        if (paths.weight(p) > 0.0) m = std::min(m, v[p]);
    return m;
}

// Risk-to-go at t of each agent's own endowment tail.
std::vector<std::vector<double>> endowment_risk(const std::vector<RiskSpec>& specs, const SamplePathSet& paths,
                                                std::size_t t) {
    const std::size_t N = paths.size(), T = paths.horizon();
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        std::vector<double> R(N, 0.0), arg(N);
        for (std::size_t s = T; s > t; --s) {
            for (std::size_t p = 0; p < N; ++p) arg[p] = paths.endowment(p, s, i) + R[p];
            R = eval_one_step(specs[i], s - 1, arg, paths);
        }
        out.push_back(std::move(R));
    }
    return out;
}

}  // namespace

std::string to_string(TiePolicy p) {
    switch (p) {
        case TiePolicy::lowest_index: return "lowest-index";
        case TiePolicy::equal_split: return "equal-split";
        case TiePolicy::exhaustive: return "exhaustive";
    }
    return "";
}

std::string to_string(PremiaPolicy p) {
    switch (p) {
        case PremiaPolicy::egalitarian_slack: return "egalitarian-slack";
        case PremiaPolicy::uniform: return "uniform";
        case PremiaPolicy::none: return "none";
    }
    return "";
}

TiePolicy parse_tie_policy(const std::string& s) {
    if (s == "lowest-index") return TiePolicy::lowest_index;
    if (s == "equal-split") return TiePolicy::equal_split;
    if (s == "exhaustive") return TiePolicy::exhaustive;
    fail(ErrorKind::configuration, "unknown tie policy '" + s + "'");
}

PremiaPolicy parse_premia_policy(const std::string& s) {
    if (s == "egalitarian-slack") return PremiaPolicy::egalitarian_slack;
    if (s == "uniform") return PremiaPolicy::uniform;
    if (s == "none") return PremiaPolicy::none;
    fail(ErrorKind::configuration, "unknown premia policy '" + s + "'");
}

DistortionFn compose_expected_distortion(const PeriodSpec& spec, std::size_t t_minus_1, const SamplePathSet& paths) {
    require(spec.regimes.singleton_kernels(), ErrorKind::unsupported,
            "regime with a distortion set; use the set composition");
    const auto freq = regime_frequencies(spec, t_minus_1, paths);
    std::vector<std::pair<double, DistortionFn>> parts;
    for (std::size_t r = 0; r < freq.size(); ++r)
        if (freq[r] > 0.0) parts.emplace_back(freq[r], spec.regimes.regimes[r].kernel.front());
    if (parts.size() == 1) return parts.front().second;
    return mix(parts);
}

DistortionSet compose_expected_distortion_set(const PeriodSpec& spec, std::size_t t_minus_1,
                                              const SamplePathSet& paths) {
    const auto freq = regime_frequencies(spec, t_minus_1, paths);
    std::vector<std::size_t> active;
    for (std::size_t r = 0; r < freq.size(); ++r)
        if (freq[r] > 0.0) active.push_back(r);
    std::size_t total = 1;
    for (auto r : active) {
        total *= spec.regimes.regimes[r].kernel.size();
        require(total <= 4096, ErrorKind::unsupported, "distortion set product too large");
    }
    DistortionSet out;
    std::vector<std::size_t> pick(active.size(), 0);
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<std::pair<double, DistortionFn>> parts;
        for (std::size_t a = 0; a < active.size(); ++a)
            parts.emplace_back(freq[active[a]], spec.regimes.regimes[active[a]].kernel[pick[a]]);
        out.push_back(parts.size() == 1 ? parts.front().second : mix(parts));
        for (std::size_t a = 0; a < active.size(); ++a) {
            if (++pick[a] < spec.regimes.regimes[active[a]].kernel.size()) break;
            pick[a] = 0;
        }
    }
    return out;
}

const std::vector<std::size_t>& TailAssessment::argmin_at(double x) const {
    auto it = std::upper_bound(region_start.begin(), region_start.end(), x);
    std::size_t j = it == region_start.begin() ? 0 : static_cast<std::size_t>(it - region_start.begin()) - 1;
    return L[j];
}

TailAssessment tail_assessment(std::size_t t, const std::vector<DistortionFn>& k_stars, const EmpiricalDist& combined,
                               double r_low, double s_low, std::optional<std::vector<std::size_t>> lower_limit,
                               std::optional<std::vector<std::size_t>> upper_limit) {
    require(!k_stars.empty(), ErrorKind::parameter, "no agents");
    require(combined.size() > 0, ErrorKind::domain, "empty combined distribution");
    const std::size_t n = k_stars.size();
    TailAssessment A;
    A.period = t;
    A.k_star = k_stars;
    A.r_low = r_low;
    A.s_low = s_low;
    const auto law = SortedLaw::of(combined);
    A.grid = law.values;
    const std::size_t m = A.grid.size();
    A.survival.resize(m);
    for (std::size_t j = 0; j < m; ++j) A.survival[j] = j + 1 < m ? law.tail[j + 1] : 0.0;

    // u -> 1-: smallest k near 1 belongs to the steepest slope at 1.
    const auto near_one = lower_limit ? *lower_limit : best_indices(n, [&](std::size_t i) { return k_stars[i].slope_at_one(); }, true);
    // u -> 0+: smallest k near 0 belongs to the flattest slope at 0.
    const auto near_zero = upper_limit ? *upper_limit : best_indices(n, [&](std::size_t i) { return k_stars[i].slope_at_zero(); }, false);

    A.region_start.push_back(0.0);
    A.L.push_back(near_one);
    for (std::size_t j = 0; j < m; ++j) {
        A.region_start.push_back(std::max(0.0, A.grid[j] - r_low - s_low));
        const double u = A.survival[j];
        if (u <= 0.0) {
            A.L.push_back(near_zero);
        } else if (u >= 1.0) {
            A.L.push_back(near_one);
        } else {
            std::vector<double> kv(n);
            for (std::size_t i = 0; i < n; ++i) kv[i] = k_stars[i](u);
            const double lo = *std::min_element(kv.begin(), kv.end());
            std::vector<std::size_t> set;
            for (std::size_t i = 0; i < n; ++i)
                if (kv[i] <= lo + kTieTol) set.push_back(i);
            A.L.push_back(std::move(set));
        }
    }
    // Drop empty regions (zero width), keeping the later one.
    std::vector<double> starts;
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t j = 0; j < A.region_start.size(); ++j) {
        if (!starts.empty() && A.region_start[j] <= starts.back()) {
            starts.back() = A.region_start[j];
            sets.back() = A.L[j];
            continue;
        }
        starts.push_back(A.region_start[j]);
        sets.push_back(A.L[j]);
    }
    A.region_start = std::move(starts);
    A.L = std::move(sets);
    for (std::size_t j = 1; j < A.L.size(); ++j)
        if (A.L[j] != A.L[j - 1]) A.thresholds.push_back(A.region_start[j]);
    return A;
}

StepResult solve_time_step(std::size_t t, const TailAssessment& A, const std::vector<RiskSpec>& specs,
                           const SamplePathSet& paths, const std::vector<std::vector<double>>& risk_after,
                           TiePolicy tie_policy, PremiaPolicy premia_policy) {
    const std::size_t N = paths.size(), n = specs.size();
    require(t >= 1 && t <= paths.horizon(), ErrorKind::parameter, "period out of range");
    require(risk_after.size() == n, ErrorKind::shape, "risk-to-go given for the wrong number of agents");

    std::vector<double> z(N);
    for (std::size_t p = 0; p < N; ++p) {
        double rbar = 0.0;
        for (std::size_t i = 0; i < n; ++i) rbar += risk_after[i][p];
        z[p] = std::max(0.0, paths.aggregate(p, t) + rbar - A.r_low - A.s_low);
    }

    // Runs of consecutive regions sharing an argmin set.
    struct Run {
        double start;
        std::vector<std::size_t> set;
    };
    std::vector<Run> runs;
    for (std::size_t j = 0; j < A.L.size(); ++j) {
        if (runs.empty() || runs.back().set != A.L[j]) runs.push_back({A.region_start[j], A.L[j]});
    }

    // Each candidate is a slope matrix runs x agents.
    std::vector<std::vector<double>> candidates;
    bool truncated = false;
    auto base = [&](bool split) {
        std::vector<double> h(runs.size() * n, 0.0);
        for (std::size_t r = 0; r < runs.size(); ++r) {
            if (split)
                for (auto i : runs[r].set) h[r * n + i] = 1.0 / static_cast<double>(runs[r].set.size());
            else
                h[r * n + runs[r].set.front()] = 1.0;
        }
        return h;
    };
    if (tie_policy == TiePolicy::exhaustive) {
        std::vector<std::size_t> tied;
        std::size_t product = 1;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            if (runs[r].set.size() < 2) continue;
            if (product * runs[r].set.size() > kMaxCandidates) {
                truncated = true;
                continue;
            }
            product *= runs[r].set.size();
            tied.push_back(r);
        }
        std::vector<std::size_t> pick(tied.size(), 0);
        for (std::size_t c = 0; c < product; ++c) {
            auto h = base(false);
            for (std::size_t a = 0; a < tied.size(); ++a) {
                const auto r = tied[a];
                for (std::size_t i = 0; i < n; ++i) h[r * n + i] = 0.0;
                h[r * n + runs[r].set[pick[a]]] = 1.0;
            }
            candidates.push_back(std::move(h));
            for (std::size_t a = 0; a < tied.size(); ++a) {
                if (++pick[a] < runs[tied[a]].set.size()) break;
                pick[a] = 0;
            }
        }
    } else {
        candidates.push_back(base(tie_policy == TiePolicy::equal_split));
    }

    auto build_g = [&](const std::vector<double>& h, std::size_t i) {
        std::vector<Knot> knots{{0.0, 0.0}};
        double y = 0.0;
        for (std::size_t r = 0; r + 1 < runs.size(); ++r) {
            const double x0 = runs[r].start, x1 = runs[r + 1].start;
            y += h[r * n + i] * (x1 - x0);
            if (x1 > knots.back().x) knots.push_back({x1, y});
        }
        return PiecewiseLinear(std::move(knots), h[i], h[(runs.size() - 1) * n + i]);
    };

    std::vector<DistortionSet> kernels;
    for (const auto& s : specs) kernels.push_back(compose_expected_distortion_set(s.periods[t - 1], t - 1, paths));

    double best = INFINITY;
    std::vector<PiecewiseLinear> best_g;
    std::vector<double> vals(N);
    for (const auto& h : candidates) {
        std::vector<PiecewiseLinear> g;
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g.push_back(build_g(h, i));
            for (std::size_t p = 0; p < N; ++p) vals[p] = g.back()(z[p]);
            obj += evaluate_set(kernels[i], SortedLaw::of(vals, paths.weights()));
        }
        if (obj < best - kSlack * std::max(1.0, std::abs(best)) || best_g.empty()) {
            best = obj;
            best_g = std::move(g);
        }
    }

    // rho_{t-1}(g_i(Z)) per agent, per path.
    std::vector<std::vector<double>> rho_g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < N; ++p) vals[p] = best_g[i](z[p]);
        rho_g[i] = eval_one_step(specs[i], t - 1, vals, paths);
    }

    StepResult out;
    auto& rep = out.report;
    rep.period = t;
    rep.objective = best;
    rep.candidates = candidates.size();
    rep.truncated = truncated;
    rep.tie_policy = tie_policy;
    rep.premia_policy = premia_policy;
    rep.r_low = A.r_low;
    rep.s_low = A.s_low;
    rep.thresholds = A.thresholds;

    const double base_level = A.r_low + A.s_low;
    std::vector<double> c(n, base_level / static_cast<double>(n));
    if (premia_policy == PremiaPolicy::egalitarian_slack) {
        require(paths.has_endowments(), ErrorKind::configuration,
                "the egalitarian-slack premia policy needs agent endowments");
    }
    if (paths.has_endowments() && premia_policy != PremiaPolicy::none) {
        require(paths.n_agents() == n, ErrorKind::shape, "endowments and risk specs disagree on the agent count");
        const auto RX = endowment_risk(specs, paths, t);
        std::vector<double> b(n), arg(N), diff(N);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < N; ++p) arg[p] = paths.endowment(p, t, i) + RX[i][p];
            const auto rho_x = eval_one_step(specs[i], t - 1, arg, paths);
            for (std::size_t p = 0; p < N; ++p) diff[p] = rho_x[p] - rho_g[i][p];
            b[i] = essinf_of(diff, paths);
        }
        rep.premia_bounds = b;
        const double slack = std::accumulate(b.begin(), b.end(), 0.0) - base_level;
        if (premia_policy == PremiaPolicy::egalitarian_slack) {
            if (slack < -kSlack * std::max(1.0, std::abs(base_level))) {
                std::string who;
                for (std::size_t i = 0; i < n; ++i)
                    if (b[i] < base_level / static_cast<double>(n)) who += (who.empty() ? "" : ", ") + std::to_string(i + 1);
                fail(ErrorKind::infeasible, "period " + std::to_string(t) + ": premia bounds sum to " +
                                                format_double(base_level + slack) + " < " + format_double(base_level) +
                                                "; binding agents: " + who);
            }
            for (std::size_t i = 0; i < n; ++i) c[i] = b[i] - slack / static_cast<double>(n);
        }
        rep.ir.resize(n);
        for (std::size_t i = 0; i < n; ++i) rep.ir[i] = c[i] <= b[i] + kSlack * std::max(1.0, std::abs(b[i]));
    }

    out.risk_before.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < N; ++p) vals[p] = best_g[i](z[p]) + c[i];
        out.risk_before[i] = eval_one_step(specs[i], t - 1, vals, paths);
    }
    out.retention = RetentionPeriod{t, A.s_low, A.r_low, std::move(best_g), std::move(c)};
    return out;
}

Solution solve_cdpo(const SolveConfig& cfg) {
    require(cfg.paths != nullptr, ErrorKind::configuration, "no scenario");
    require(!cfg.agents.empty(), ErrorKind::configuration, "at least one agent is required");
    const auto& paths = *cfg.paths;
    const std::size_t T = paths.horizon(), N = paths.size(), n = cfg.agents.size();
    for (const auto& s : cfg.agents) {
        require(s.horizon() == T, ErrorKind::configuration,
                "agent risk spec has " + std::to_string(s.horizon()) + " periods, scenario has " + std::to_string(T));
        require(s.all_marginal(), ErrorKind::unsupported, "the solver only handles marginal-mode risk specs");
    }
    if (paths.has_endowments())
        require(paths.n_agents() == n, ErrorKind::configuration, "endowment columns do not match the agent count");

    std::vector<std::vector<double>> R(n, std::vector<double>(N, 0.0));
    std::vector<RetentionPeriod> periods(T);
    std::vector<PeriodReport> reports(T);
    std::vector<TailAssessment> assessments(T);
    std::vector<double> rbar(N), comb(N);
    for (std::size_t t = T; t >= 1; --t) {
        for (std::size_t p = 0; p < N; ++p) {
            rbar[p] = 0.0;
            for (std::size_t i = 0; i < n; ++i) rbar[p] += R[i][p];
            comb[p] = paths.aggregate(p, t) + rbar[p];
        }
        const double r = essinf(paths.law_of(rbar));
        const double s = essinf(paths.marginal(t));
        std::vector<DistortionFn> k;
        for (const auto& spec : cfg.agents) {
            const auto& ps = spec.periods[t - 1];
            k.push_back(ps.regimes.singleton_kernels() ? compose_expected_distortion(ps, t - 1, paths)
                                                       : upper_envelope(compose_expected_distortion_set(ps, t - 1, paths)));
        }
        assessments[t - 1] = tail_assessment(t, k, paths.law_of(comb), r, s);
        auto step = solve_time_step(t, assessments[t - 1], cfg.agents, paths, R, cfg.tie_policy, cfg.premia_policy);
        periods[t - 1] = std::move(step.retention);
        reports[t - 1] = std::move(step.report);
        R = std::move(step.risk_before);
    }
    RetentionSchedule sched{std::move(periods)};
    auto alloc = retention_to_allocation(sched, cfg.agents, cfg.paths);
    std::vector<RiskToGo> risk;
    for (std::size_t i = 0; i < n; ++i) risk.push_back(risk_to_go(cfg.agents[i], alloc, i));

    SolveReport rep;
    rep.periods = std::move(reports);
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t i = 0; i < n; ++i) rep.expected_total_risk += paths.weight(p) * risk[i].at(p, 0);
    if (paths.has_endowments()) {
        rep.ir_dynamic.assign(n, true);
        for (std::size_t t = 0; t < T; ++t) {
            auto ok = check_ir_t(cfg.agents, alloc, t);
            for (std::size_t i = 0; i < n; ++i) rep.ir_dynamic[i] = rep.ir_dynamic[i] && ok[i];
        }
    }
    return Solution{std::move(alloc), std::move(sched), std::move(rep), std::move(assessments), std::move(risk)};
}

double evaluate_myopic(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc, std::size_t agent) {
    require(agent < alloc.n_agents() && agent < specs.size(), ErrorKind::parameter, "agent index out of range");
    const auto& paths = alloc.paths();
    const std::size_t T = paths.horizon(), N = paths.size();
    require(specs[agent].horizon() == T, ErrorKind::shape, "risk spec horizon differs from the path set");
    // Nested evaluation of the summed stream. At each stage the part of the
    // argument already known at t is pulled out before applying rho_t.
    std::vector<double> cur(N, 0.0), known(N), rem(N);
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t s = 1; s <= T; ++s) cur[p] += alloc.at(p, s, agent);
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t p = 0; p < N; ++p) {
            known[p] = 0.0;
            for (std::size_t s = 1; s <= t; ++s) known[p] += alloc.at(p, s, agent);
            rem[p] = cur[p] - known[p];
        }
        auto r = eval_one_step(specs[agent], t, rem, paths);
        for (std::size_t p = 0; p < N; ++p) cur[p] = known[p] + r[p];
    }
    double v = 0.0;
    for (std::size_t p = 0; p < N; ++p) v += paths.weight(p) * cur[p];
    return v;
}

MyopicReport verify_myopic_optimality(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc,
                                      double tolerance) {
    MyopicReport rep;
    rep.tolerance = tolerance;
    const auto& paths = alloc.paths();
    if (paths.horizon() != 2) {
        rep.reason = "not a two-period instance";
        return rep;
    }
    bool has_expectation = false;
    for (const auto& s : specs) {
        if (s.horizon() != 2 || !s.all_marginal() || !s.periods[1].regimes.singleton_kernels()) {
            rep.reason = "needs marginal-mode distortion agents";
            return rep;
        }
        const auto& r0 = s.periods[0].regimes.regimes;
        if (r0.size() == 1 && r0[0].kernel.size() == 1 && r0[0].kernel[0].is_identity()) has_expectation = true;
    }
    if (!has_expectation) {
        rep.reason = "no agent uses the expectation at time 0";
        return rep;
    }
    rep.applicable = true;

    std::vector<DistortionFn> k;
    for (const auto& s : specs) k.push_back(compose_expected_distortion(s.periods[1], 1, paths));
    const auto law2 = SortedLaw::of(paths.marginal(2));
    const double s2 = law2.values.front();
    double integral = 0.0;
    for (std::size_t j = 0; j + 1 < law2.values.size(); ++j) {
        const double u = law2.tail[j + 1];
        double lo = INFINITY;
        for (const auto& kk : k) lo = std::min(lo, kk(u));
        integral += (law2.values[j + 1] - law2.values[j]) * lo;
    }
    rep.bound = paths.marginal(1).mean() + s2 + integral;
    for (std::size_t i = 0; i < specs.size(); ++i) rep.value += evaluate_myopic(specs, alloc, i);
    rep.gap = rep.value - rep.bound;
    rep.relative_gap = rep.gap / std::max(1e-300, std::abs(rep.bound));
    rep.attained = std::abs(rep.relative_gap) <= tolerance;
    return rep;
}

}  // namespace riskshare
