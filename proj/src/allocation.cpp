#include "riskshare/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

constexpr double kSlack = 1e-9;

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_specs(const std::vector<RiskSpec>& specs, std::size_t n, std::size_t T) {
    require(specs.size() == n, ErrorKind::shape,
            "expected " + std::to_string(n) + " risk specs, got " + std::to_string(specs.size()));
    for (const auto& s : specs)
        require(s.horizon() == T, ErrorKind::shape, "risk spec horizon differs from the path set");
}

std::vector<std::size_t> order_by(const std::vector<double>& key) {
    std::vector<std::size_t> idx(key.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key[a] < key[b]; });
    return idx;
}

std::vector<double> row_sums(const std::vector<double>& v, std::size_t N, std::size_t n) {
    std::vector<double> a(N, 0.0);
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t i = 0; i < n; ++i) a[p] += v[p * n + i];
    return a;
}

// Groups of consecutive indices (in `order`) whose keys tie within tol.
std::vector<std::vector<std::size_t>> tie_groups(const std::vector<double>& key, const std::vector<std::size_t>& order,
                                                 double tol) {
    std::vector<std::vector<std::size_t>> g;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (g.empty() || key[order[k]] - key[g.back().back()] > tol) g.emplace_back();
        g.back().push_back(order[k]);
    }
    return g;
}

std::vector<double> resample(const EmpiricalDist& d, std::size_t m) {
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j)
        out[j] = quantile_left(d, (static_cast<double>(j) + 0.5) / static_cast<double>(m));
    return out;
}

bool equal_weighted(const EmpiricalDist& d) {
    auto w = d.weights();
    return std::all_of(w.begin(), w.end(), [&](double x) { return std::abs(x - w[0]) <= 1e-15; });
}

}  // namespace

void RetentionSchedule::validate() const {
    const std::size_t n = n_agents();
    for (const auto& per : periods) {
        require(per.g.size() == n && per.premium.size() == n, ErrorKind::shape,
                "period " + std::to_string(per.period) + " has inconsistent agent counts");
        std::vector<double> xs{0.0};
        for (const auto& g : per.g) {
            require(std::abs(g(0.0)) <= kSlack, ErrorKind::domain, "retention function must vanish at 0");
            const auto& k = g.knots();
            for (std::size_t j = 0; j < k.size(); ++j) {
                xs.push_back(k[j].x);
                if (j > 0) {
                    double s = (k[j].y - k[j - 1].y) / (k[j].x - k[j - 1].x);
                    require(s >= -kSlack && s <= 1.0 + kSlack, ErrorKind::domain, "retention slope outside [0, 1]");
                }
            }
            require(g.right_slope() >= -kSlack && g.right_slope() <= 1.0 + kSlack, ErrorKind::domain,
                    "retention slope outside [0, 1]");
        }
        double slope_sum = 0.0;
        for (const auto& g : per.g) slope_sum += g.right_slope();
        require(std::abs(slope_sum - 1.0) <= kSlack, ErrorKind::domain, "retention slopes do not sum to 1");
        for (double x : xs) {
            if (x < 0.0) continue;
            double sum = 0.0;
            for (const auto& g : per.g) sum += g(x);
            require(std::abs(sum - x) <= kSlack * std::max(1.0, std::abs(x)), ErrorKind::domain,
                    "retention functions do not sum to the identity at x = " + format_double(x));
        }
        double c = std::accumulate(per.premium.begin(), per.premium.end(), 0.0);
        require(std::abs(c - per.s_low - per.r_low) <= kSlack * std::max(1.0, std::abs(c)), ErrorKind::domain,
                "premia do not sum to the base level in period " + std::to_string(per.period));
    }
}

AllocationProcess retention_to_allocation(const RetentionSchedule& sched, const std::vector<RiskSpec>& specs,
                                          const PathSetPtr& paths) {
    require(paths != nullptr, ErrorKind::shape, "no path set");
    const std::size_t T = paths->horizon(), N = paths->size(), n = sched.n_agents();
    require(sched.horizon() == T, ErrorKind::shape,
            "schedule has " + std::to_string(sched.horizon()) + " periods, path set has " + std::to_string(T));
    require(n >= 1, ErrorKind::shape, "schedule has no agents");
    check_specs(specs, n, T);
    std::vector<double> Y(N * T * n, 0.0);
    std::vector<double> R(N * n, 0.0);  // R_t^{(i)} for the current t
    std::vector<double> z(N), arg(N);
    for (std::size_t t = T; t >= 1; --t) {
        const auto& per = sched.periods[t - 1];
        require(per.g.size() == n && per.premium.size() == n, ErrorKind::shape, "schedule period has wrong agent count");
        for (std::size_t p = 0; p < N; ++p) {
            double rbar = 0.0;
            for (std::size_t i = 0; i < n; ++i) rbar += R[p * n + i];
            z[p] = paths->aggregate(p, t) + rbar - per.r_low - per.s_low;
        }
        std::vector<double> nextR(N * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < N; ++p) {
                arg[p] = per.g[i](z[p]) + per.premium[i];
                Y[(p * T + t - 1) * n + i] = arg[p] - R[p * n + i];
            }
            auto r = eval_one_step(specs[i], t - 1, arg, *paths);
            for (std::size_t p = 0; p < N; ++p) nextR[p * n + i] = r[p];
        }
        // Put rounding residue of the budget on the last agent.
        for (std::size_t p = 0; p < N; ++p) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += Y[(p * T + t - 1) * n + i];
            Y[(p * T + t - 1) * n + n - 1] += paths->aggregate(p, t) - sum;
        }
        R = std::move(nextR);
    }
    return AllocationProcess(paths, n, std::move(Y));
}

std::vector<std::vector<double>> transformed_allocation(const AllocationProcess& alloc,
                                                        const std::vector<RiskSpec>& specs) {
    const std::size_t T = alloc.horizon(), N = alloc.size(), n = alloc.n_agents();
    check_specs(specs, n, T);
    std::vector<std::vector<double>> out(T, std::vector<double>(N * n));
    for (std::size_t i = 0; i < n; ++i) {
        auto R = risk_to_go(specs[i], alloc, i);
        for (std::size_t t = 1; t <= T; ++t)
            for (std::size_t p = 0; p < N; ++p) out[t - 1][p * n + i] = alloc.at(p, t, i) + R.at(p, t);
    }
    return out;
}

std::vector<std::vector<double>> improvement_reference(const AllocationProcess& before, const AllocationProcess& after,
                                                       const std::vector<RiskSpec>& specs) {
    const std::size_t T = before.horizon(), N = before.size(), n = before.n_agents();
    require(&before.paths() == &after.paths() && after.n_agents() == n, ErrorKind::shape,
            "allocations live on different path sets");
    check_specs(specs, n, T);
    std::vector<std::vector<double>> out(T, std::vector<double>(N * n));
    for (std::size_t i = 0; i < n; ++i) {
        auto R = risk_to_go(specs[i], after, i);
        for (std::size_t t = 1; t <= T; ++t)
            for (std::size_t p = 0; p < N; ++p) out[t - 1][p * n + i] = before.at(p, t, i) + R.at(p, t);
    }
    return out;
}

bool is_comonotone_matrix(const std::vector<double>& v, std::size_t N, std::size_t n) {
    const double slack = kSlack * std::max(1.0, max_abs(v));
    const auto a = row_sums(v, N, n);
    const auto order = order_by(a);
    for (std::size_t k = 1; k < N; ++k) {
        const auto pa = order[k - 1], pb = order[k];
        const bool tied = a[pb] - a[pa] <= slack;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = v[pb * n + i] - v[pa * n + i];
            if (tied ? std::abs(d) > slack : d < -slack) return false;
        }
    }
    return true;
}

std::vector<bool> is_comonotone_process(const AllocationProcess& alloc, const std::vector<RiskSpec>& specs) {
    auto V = transformed_allocation(alloc, specs);
    std::vector<bool> out;
    for (const auto& m : V) out.push_back(is_comonotone_matrix(m, alloc.size(), alloc.n_agents()));
    return out;
}

ConvexOrder convex_order_leq(const EmpiricalDist& y, const EmpiricalDist& z) {
    require(y.size() > 0 && z.size() > 0, ErrorKind::domain, "convex order of an empty distribution");
    std::vector<double> a, b;
    if (y.size() == z.size() && equal_weighted(y) && equal_weighted(z)) {
        a.assign(y.values().begin(), y.values().end());
        b.assign(z.values().begin(), z.values().end());
    } else {
        const std::size_t m = std::max(y.size(), z.size());
        a = resample(y, m);
        b = resample(z, m);
    }
    const double scale = std::max({1.0, max_abs(a), max_abs(b)});
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    const double m = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / m;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / m;
    if (std::abs(mean_a - mean_b) > kSlack * scale) return ConvexOrder::incomparable;
    double sa = 0.0, sb = 0.0;
    bool strict = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sa += a[k];
        sb += b[k];
        if (sa > sb + kSlack * scale * m) return ConvexOrder::incomparable;
        if (sb - sa > 1e-6) strict = true;
    }
    return strict ? ConvexOrder::strictly_dominated : ConvexOrder::dominated;
}

std::vector<double> comonotone_improve_static(const std::vector<double>& v, std::size_t N, std::size_t n,
                                              const ImproveOptions& opts) {
    require(v.size() == N * n, ErrorKind::shape, "allocation matrix is not N x n");
    if (N <= 1 || n <= 1) return v;
    const double scale = std::max(1.0, max_abs(v));
    const auto a = row_sums(v, N, n);
    const auto order = order_by(a);
    const auto groups = tie_groups(a, order, 1e-12 * scale);

    // Level j: conditional mean of the rows given the aggregate.
    const std::size_t L = groups.size();
    std::vector<double> w(L), x(L * n, 0.0);
    for (std::size_t j = 0; j < L; ++j) {
        w[j] = static_cast<double>(groups[j].size());
        for (auto p : groups[j])
            for (std::size_t i = 0; i < n; ++i) x[j * n + i] += v[p * n + i];
        for (std::size_t i = 0; i < n; ++i) x[j * n + i] /= w[j];
    }

    // Contract adjacent levels until every agent is co-ordered with the aggregate.
    std::vector<double> d(n);
    auto contract = [&](std::size_t ja, std::size_t jb) {
        double neg = 0.0, pos = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = x[jb * n + i] - x[ja * n + i];
            total += d[i];
            if (d[i] < 0.0) neg = std::max(neg, -d[i]);
            else pos += d[i];
        }
        if (neg == 0.0) return 0.0;
        const double W = w[ja] + w[jb];
        const double D = std::max(total, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double di = d[i] < 0.0 ? 0.0 : (pos > 0.0 ? d[i] * (D / pos) : D / static_cast<double>(n));
            const double mu = (w[ja] * x[ja * n + i] + w[jb] * x[jb * n + i]) / W;
            x[ja * n + i] = mu - w[jb] / W * di;
            x[jb * n + i] = mu + w[ja] / W * di;
        }
        return neg;
    };
    const std::size_t cap = opts.max_sweeps_per_agent * n;
    for (std::size_t sweep = 0; sweep < cap && L > 1; ++sweep) {
        double defect = 0.0;
        if (sweep % 2 == 0) {
            for (std::size_t j = 0; j + 1 < L; ++j) defect = std::max(defect, contract(j, j + 1));
        } else {
            for (std::size_t j = L - 1; j-- > 0;) defect = std::max(defect, contract(j, j + 1));
        }
        if (defect <= opts.defect_tol * scale) break;
    }

    // Project: monotone rearrangement along the aggregate, then re-average
    // within tie groups and spread any budget residual evenly.
    std::vector<double> out(N * n);
    for (std::size_t j = 0; j < L; ++j)
        for (auto p : groups[j])
            for (std::size_t i = 0; i < n; ++i) out[p * n + i] = x[j * n + i];
    std::vector<double> col(N);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < N; ++p) col[p] = out[p * n + i];
        std::sort(col.begin(), col.end());
        for (std::size_t k = 0; k < N; ++k) out[order[k] * n + i] = col[k];
    }
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (auto p : g) m += out[p * n + i];
            m /= static_cast<double>(g.size());
            for (auto p : g) out[p * n + i] = m;
        }
    }
    for (std::size_t p = 0; p < N; ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += out[p * n + i];
        const double r = (a[p] - s) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) out[p * n + i] += r;
    }
    return out;
}

AllocationProcess comonotone_improve(const AllocationProcess& alloc, const std::vector<RiskSpec>& specs,
                                     const ImproveOptions& opts) {
    const auto& paths = alloc.paths();
    const std::size_t T = paths.horizon(), N = paths.size(), n = alloc.n_agents();
    check_specs(specs, n, T);
    require(paths.equal_weights(), ErrorKind::unsupported, "comonotone improvement needs equal path weights");
    std::vector<double> Y(N * T * n);
    std::vector<double> R(N * n, 0.0);  // risk-to-go of the improved tail at t
    std::vector<double> V(N * n), arg(N);
    for (std::size_t t = T; t >= 1; --t) {
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t i = 0; i < n; ++i) V[p * n + i] = alloc.at(p, t, i) + R[p * n + i];
        const auto Vt = comonotone_improve_static(V, N, n, opts);
        std::vector<double> nextR(N * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < N; ++p) {
                Y[(p * T + t - 1) * n + i] = Vt[p * n + i] - R[p * n + i];
                arg[p] = Vt[p * n + i];
            }
            auto r = eval_one_step(specs[i], t - 1, arg, paths);
            for (std::size_t p = 0; p < N; ++p) nextR[p * n + i] = r[p];
        }
        R = std::move(nextR);
    }
    return AllocationProcess(alloc.paths_ptr(), n, std::move(Y));
}

std::vector<bool> check_ir_t(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc, std::size_t t) {
    const auto& paths = alloc.paths();
    require(paths.has_endowments(), ErrorKind::configuration, "IR check needs agent endowments");
    require(t < paths.horizon(), ErrorKind::parameter, "IR check needs t < T");
    const std::size_t n = alloc.n_agents();
    require(paths.n_agents() == n, ErrorKind::shape, "endowments and allocation disagree on the agent count");
    check_specs(specs, n, paths.horizon());
    const auto X = AllocationProcess::from_endowments(alloc.paths_ptr());
    std::vector<bool> ok(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ry = risk_to_go(specs[i], alloc, i);
        const auto rx = risk_to_go(specs[i], X, i);
        for (std::size_t p = 0; p < paths.size(); ++p)
            if (ry.at(p, t) > rx.at(p, t) + kSlack * std::max(1.0, std::abs(rx.at(p, t)))) ok[i] = false;
    }
    return ok;
}

}  // namespace riskshare
