#include "riskshare/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "riskshare/allocation.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/paretosolve.hpp"

namespace riskshare {

namespace {

constexpr double kGap = 1e-9;
const char* kGridNote = "grid-relative: only alternatives on the share grid were searched";

using Matrix = std::vector<double>;  // N x n, row per path

// Enumerates V = (j/m) * A row by row in increasing order of A. With
// comonotone_only, branches that break co-ordering are pruned.
class GridEnumerator {
public:
    GridEnumerator(std::vector<double> A, std::size_t n, std::size_t m)
        : A_(std::move(A)), n_(n), m_(m), comps_(share_compositions(n, m)) {
        order_.resize(A_.size());
        std::iota(order_.begin(), order_.end(), 0);
        std::stable_sort(order_.begin(), order_.end(), [&](auto a, auto b) { return A_[a] < A_[b]; });
        double scale = 1.0;
        for (double a : A_) scale = std::max(scale, std::abs(a));
        slack_ = 1e-9 * scale;
    }

    void run(bool comonotone_only, const std::function<void(const Matrix&)>& fn) {
        V_.assign(A_.size() * n_, 0.0);
        dfs(0, comonotone_only, fn);
    }

private:
    void dfs(std::size_t k, bool como, const std::function<void(const Matrix&)>& fn) {
        if (k == order_.size()) {
            fn(V_);
            return;
        }
        const auto p = order_[k];
        // every share of a zero aggregate is the same point
        const std::size_t n_comps = A_[p] == 0.0 ? 1 : comps_.size();
        for (std::size_t ci = 0; ci < n_comps; ++ci) {
            const auto& c = comps_[ci];
            for (std::size_t i = 0; i < n_; ++i)
                V_[p * n_ + i] = static_cast<double>(c[i]) / static_cast<double>(m_) * A_[p];
            if (como && k > 0) {
                const auto q = order_[k - 1];
                const bool tied = A_[p] - A_[q] <= slack_;
                bool ok = true;
                for (std::size_t i = 0; i < n_ && ok; ++i) {
                    const double d = V_[p * n_ + i] - V_[q * n_ + i];
                    ok = tied ? std::abs(d) <= slack_ : d >= -slack_;
                }
                if (!ok) continue;
            }
            dfs(k + 1, como, fn);
        }
    }

    std::vector<double> A_;
    std::size_t n_, m_;
    std::vector<std::vector<std::size_t>> comps_;
    std::vector<std::size_t> order_;
    double slack_ = 1e-9;
    Matrix V_;
};

// Per-agent rho_t with the per-path total and the IR verdict.
struct StepEval {
    std::vector<OneStepEvaluator> ev;
    std::optional<Matrix> ir_bound;  // R_t(X) per path and agent
    std::size_t N, n;

    StepEval(const std::vector<RiskSpec>& specs, std::size_t t, const SamplePathSet& paths,
             std::optional<Matrix> bound)
        : ir_bound(std::move(bound)), N(paths.size()), n(specs.size()) {
        for (const auto& s : specs) ev.emplace_back(s, t, paths);
    }

    // Fills per-agent risk (N x n) and returns the per-path total.
    std::vector<double> total(const Matrix& V, Matrix& risk) const {
        risk.assign(N * n, 0.0);
        std::vector<double> col(N), tot(N, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < N; ++p) col[p] = V[p * n + i];
            auto r = ev[i].eval(col);
            for (std::size_t p = 0; p < N; ++p) {
                risk[p * n + i] = r[p];
                tot[p] += r[p];
            }
        }
        return tot;
    }

    bool ir_ok(const Matrix& risk) const {
        if (!ir_bound) return true;
        for (std::size_t k = 0; k < risk.size(); ++k)
            if (risk[k] > (*ir_bound)[k] + kGap * std::max(1.0, std::abs((*ir_bound)[k]))) return false;
        return true;
    }
};

double tol_of(double v) { return kGap * std::max(1.0, std::abs(v)); }

// b dominates a: no worse on every path, strictly better on a charged path.
bool dominates(const std::vector<double>& b, const std::vector<double>& a, const SamplePathSet& paths) {
    bool strict = false;
    for (std::size_t p = 0; p < a.size(); ++p) {
        if (b[p] > a[p] + tol_of(a[p])) return false;
        if (paths.weight(p) > 0.0 && b[p] < a[p] - tol_of(a[p])) strict = true;
    }
    return strict;
}

double expectation(const std::vector<double>& v, const SamplePathSet& paths) {
    double s = 0.0;
    for (std::size_t p = 0; p < v.size(); ++p) s += paths.weight(p) * v[p];
    return s;
}

// R_t^{(i)} per path (N x n) for an allocation.
Matrix risk_matrix(const std::vector<RiskSpec>& specs, const AllocationProcess& alloc, std::size_t t) {
    const std::size_t N = alloc.size(), n = alloc.n_agents();
    Matrix R(N * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = risk_to_go(specs[i], alloc, i);
        for (std::size_t p = 0; p < N; ++p) R[p * n + i] = r.at(p, t);
    }
    return R;
}

std::optional<Matrix> endowment_bound(const std::vector<RiskSpec>& specs, const PathSetPtr& paths, std::size_t t) {
    if (!paths->has_endowments()) return std::nullopt;
    return risk_matrix(specs, AllocationProcess::from_endowments(paths), t);
}

std::vector<double> aggregate_plus(const SamplePathSet& paths, std::size_t period, const Matrix& R, std::size_t n) {
    std::vector<double> A(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        A[p] = paths.aggregate(p, period);
        for (std::size_t i = 0; i < n; ++i) A[p] += R[p * n + i];
    }
    return A;
}

// Copy of alloc with period `period` replaced by V - R.
AllocationProcess replace_period(const AllocationProcess& alloc, std::size_t period, const Matrix& V, const Matrix& R) {
    const std::size_t N = alloc.size(), T = alloc.horizon(), n = alloc.n_agents();
    std::vector<double> Y = alloc.raw();
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t i = 0; i < n; ++i) Y[(p * T + period - 1) * n + i] = V[p * n + i] - R[p * n + i];
    return AllocationProcess(alloc.paths_ptr(), n, std::move(Y));
}

void check_inputs(const TinyInstance& inst, const std::vector<RiskSpec>& specs) {
    require(inst.paths != nullptr, ErrorKind::configuration, "tiny instance without paths");
    inst.validate(specs.size());
    for (const auto& s : specs)
        require(s.horizon() == inst.paths->horizon(), ErrorKind::shape, "risk spec horizon differs from the instance");
}

bool all_strictly_concave(const std::vector<RiskSpec>& specs) {
    for (const auto& s : specs)
        for (const auto& ps : s.periods)
            for (const auto& r : ps.regimes.regimes)
                for (const auto& k : r.kernel)
                    if (!k.is_strictly_concave()) return false;
    return true;
}

}  // namespace

double TinyInstance::enumeration_size(std::size_t n_agents) const {
    if (!paths || n_agents == 0) return 0.0;
    return std::pow(static_cast<double>(m + 1),
                    static_cast<double>((n_agents - 1) * paths->size() * paths->horizon()));
}

void TinyInstance::validate(std::size_t n_agents) const {
    require(paths != nullptr, ErrorKind::shape, "tiny instance without paths");
    require(m >= 1, ErrorKind::parameter, "grid resolution must be at least 1");
    require(n_agents >= 1 && n_agents <= max_agents, ErrorKind::bound_exceeded,
            "oracle supports 1.." + std::to_string(max_agents) + " agents, got " + std::to_string(n_agents));
    require(paths->size() <= max_paths, ErrorKind::bound_exceeded,
            "oracle supports at most " + std::to_string(max_paths) + " paths, got " + std::to_string(paths->size()));
    require(paths->horizon() <= max_horizon, ErrorKind::bound_exceeded,
            "oracle supports at most " + std::to_string(max_horizon) + " periods");
    const double size = enumeration_size(n_agents);
    require(size <= max_enumeration, ErrorKind::bound_exceeded,
            "enumeration size " + format_double(size) + " exceeds " + format_double(max_enumeration));
}

std::vector<std::vector<std::size_t>> share_compositions(std::size_t n, std::size_t m) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
        if (i + 1 == n) {
            cur[i] = left;
            out.push_back(cur);
            return;
        }
        for (std::size_t j = left + 1; j-- > 0;) {
            cur[i] = j;
            rec(i + 1, left - j);
        }
    };
    rec(0, m);
    return out;
}

CpoResult brute_force_cpo_t(const TinyInstance& inst, const std::vector<RiskSpec>& specs, std::size_t t,
                            const AllocationProcess& downstream) {
    check_inputs(inst, specs);
    const auto& paths = *inst.paths;
    const std::size_t T = paths.horizon(), N = paths.size(), n = specs.size();
    require(t < T, ErrorKind::parameter, "CPO_t search needs t < T");
    require(downstream.n_agents() == n, ErrorKind::shape, "downstream allocation has the wrong agent count");
    const Matrix Rnext = risk_matrix(specs, downstream, t + 1);
    StepEval step(specs, t, paths, endowment_bound(specs, inst.paths, t));
    GridEnumerator grid(aggregate_plus(paths, t + 1, Rnext, n), n, inst.m);

    CpoResult res;
    res.best = INFINITY;
    Matrix risk;
    grid.run(true, [&](const Matrix& V) {
        ++res.enumerated;
        const auto tot = step.total(V, risk);
        if (!step.ir_ok(risk)) return;
        const double obj = expectation(tot, paths);
        Matrix Y(N * n);
        for (std::size_t k = 0; k < Y.size(); ++k) Y[k] = V[k] - Rnext[k];
        if (res.minimizers.empty() || obj < res.best - tol_of(res.best)) {
            res.best = obj;
            res.minimizers.clear();
        }
        if (std::abs(obj - res.best) <= tol_of(res.best)) res.minimizers.push_back(std::move(Y));
    });
    require(!res.minimizers.empty(), ErrorKind::infeasible, "no IR grid allocation at t = " + std::to_string(t));
    return res;
}

std::string to_string(PoNotion w) {
    switch (w) {
        case PoNotion::PO_t: return "PO_t";
        case PoNotion::CPO_t: return "CPO_t";
        case PoNotion::DPO: return "DPO";
        case PoNotion::CDPO: return "CDPO";
        case PoNotion::MPO: return "MPO";
    }
    return "";
}

PoNotion parse_po_notion(const std::string& s) {
    for (auto w : {PoNotion::PO_t, PoNotion::CPO_t, PoNotion::DPO, PoNotion::CDPO, PoNotion::MPO})
        if (to_string(w) == s) return w;
    fail(ErrorKind::configuration, "unknown optimality notion '" + s + "'");
}

PoVerdict verify_po_definition(const TinyInstance& inst, const std::vector<RiskSpec>& specs,
                               const AllocationProcess& alloc, PoNotion which, std::size_t t) {
    check_inputs(inst, specs);
    const auto& paths = *inst.paths;
    const std::size_t T = paths.horizon(), N = paths.size(), n = specs.size();
    require(alloc.n_agents() == n && &alloc.paths() == inst.paths.get(), ErrorKind::shape,
            "allocation does not belong to the instance");
    PoVerdict v;
    v.note = kGridNote;

    if (which == PoNotion::MPO) {
        std::vector<double> current(n), bound(n, INFINITY);
        for (std::size_t i = 0; i < n; ++i) current[i] = evaluate_myopic(specs, alloc, i);
        if (paths.has_endowments()) {
            const auto X = AllocationProcess::from_endowments(inst.paths);
            for (std::size_t i = 0; i < n; ++i) bound[i] = evaluate_myopic(specs, X, i);
        }
        // Full enumeration of grid processes: Y_t = (j/m) S_t.
        const auto comps = share_compositions(n, inst.m);
        const std::size_t cells = N * T;
        std::vector<std::size_t> pick(cells, 0);
        std::vector<double> Y(N * T * n);
        while (true) {
            for (std::size_t c = 0; c < cells; ++c) {
                const std::size_t p = c / T, s = c % T + 1;
                for (std::size_t i = 0; i < n; ++i)
                    Y[c * n + i] = static_cast<double>(comps[pick[c]][i]) / static_cast<double>(inst.m) *
                                   paths.aggregate(p, s);
            }
            AllocationProcess alt(inst.paths, n, Y);
            ++v.alternatives_checked;
            bool weak = true, strict = false;
            for (std::size_t i = 0; i < n && weak; ++i) {
                const double a = evaluate_myopic(specs, alt, i);
                if (a > bound[i] + tol_of(bound[i])) weak = false;
                if (a > current[i] + tol_of(current[i])) weak = false;
                if (a < current[i] - tol_of(current[i])) strict = true;
            }
            if (weak && strict) {
                v.optimal = false;
                v.witness = alt;
                return v;
            }
            std::size_t c = 0;
            while (c < cells && ++pick[c] == comps.size()) pick[c++] = 0;
            if (c == cells) break;
        }
        return v;
    }

    const bool como = which == PoNotion::CPO_t || which == PoNotion::CDPO;
    if (como) {
        const auto flags = is_comonotone_process(alloc, specs);
        if (std::find(flags.begin(), flags.end(), false) != flags.end()) {
            v.optimal = false;
            v.note = std::string("allocation is not comonotone; ") + kGridNote;
            return v;
        }
    }
    std::vector<std::size_t> steps;
    if (which == PoNotion::PO_t || which == PoNotion::CPO_t) {
        require(t < T, ErrorKind::parameter, "PO_t needs t < T");
        steps.push_back(t);
    } else {
        for (std::size_t s = 0; s < T; ++s) steps.push_back(s);
    }
    for (auto s : steps) {
        const Matrix Rnext = risk_matrix(specs, alloc, s + 1);
        const Matrix Rnow = risk_matrix(specs, alloc, s);
        std::vector<double> current(N, 0.0);
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t i = 0; i < n; ++i) current[p] += Rnow[p * n + i];
        StepEval step(specs, s, paths, endowment_bound(specs, inst.paths, s));
        if (!step.ir_ok(Rnow)) {
            v.optimal = false;
            v.witness_period = s;
            v.note = "allocation is not IR at t = " + std::to_string(s) + "; " + kGridNote;
            return v;
        }
        GridEnumerator grid(aggregate_plus(paths, s + 1, Rnext, n), n, inst.m);
        Matrix risk;
        std::optional<Matrix> found;
        grid.run(como, [&](const Matrix& V) {
            if (found) return;
            ++v.alternatives_checked;
            const auto tot = step.total(V, risk);
            if (step.ir_ok(risk) && dominates(tot, current, paths)) found = V;
        });
        if (found) {
            v.optimal = false;
            v.witness_period = s;
            v.witness = replace_period(alloc, s + 1, *found, Rnext);
            return v;
        }
    }
    return v;
}

SetRelationReport check_set_relations(const TinyInstance& inst, const std::vector<RiskSpec>& specs) {
    check_inputs(inst, specs);
    const auto& paths = *inst.paths;
    const std::size_t T = paths.horizon(), N = paths.size(), n = specs.size();
    SetRelationReport rep;
    rep.note = kGridNote;
    rep.strictly_concave = all_strictly_concave(specs);

    // Last period first: candidate V_T with its per-path total at T-1.
    struct Tail {
        Matrix V;       // Y_T (R_T = 0)
        Matrix risk;    // R_{T-1} per agent
        bool como = true;
        bool ir = true;
    };
    std::vector<Tail> tails;
    {
        StepEval step(specs, T - 1, paths, endowment_bound(specs, inst.paths, T - 1));
        GridEnumerator grid(paths.aggregate_column(T), n, inst.m);
        grid.run(false, [&](const Matrix& V) {
            Tail tl;
            tl.V = V;
            step.total(V, tl.risk);
            tl.como = is_comonotone_matrix(V, N, n);
            tl.ir = step.ir_ok(tl.risk);
            tails.push_back(std::move(tl));
        });
    }
    auto totals_of = [&](const Tail& tl) {
        std::vector<double> tot(N, 0.0);
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t i = 0; i < n; ++i) tot[p] += tl.risk[p * n + i];
        return tot;
    };

    auto record = [&](bool como, bool dpo, bool cdpo, const std::function<AllocationProcess()>& build) {
        ++rep.allocations;
        if (como) ++rep.comonotone;
        if (dpo) ++rep.dpo;
        if (cdpo) ++rep.cdpo;
        if (cdpo && !dpo) {
            ++rep.cdpo_not_dpo;
            rep.cdpo_subset_dpo = false;
        }
        if (dpo && !como) {
            ++rep.dpo_non_comonotone;
            if (rep.strictly_concave) rep.dpo_all_comonotone = false;
            if (!rep.non_comonotone_dpo_example) rep.non_comonotone_dpo_example = build();
        }
    };

    if (T == 1) {
        std::vector<double> tot(tails.size());
        double min_all = INFINITY, min_com = INFINITY;
        for (std::size_t k = 0; k < tails.size(); ++k) {
            tot[k] = expectation(totals_of(tails[k]), paths);
            if (!tails[k].ir) continue;
            min_all = std::min(min_all, tot[k]);
            if (tails[k].como) min_com = std::min(min_com, tot[k]);
        }
        for (std::size_t k = 0; k < tails.size(); ++k) {
            const auto& tl = tails[k];
            const bool dpo = tl.ir && tot[k] <= min_all + tol_of(min_all);
            const bool cdpo = tl.ir && tl.como && tot[k] <= min_com + tol_of(min_com);
            record(tl.como, dpo, cdpo, [&] { return AllocationProcess(inst.paths, n, tl.V); });
        }
        return rep;
    }

    // T == 2: PO_1 membership of each tail, among all and among comonotone tails.
    std::vector<std::vector<double>> tot1;
    for (const auto& tl : tails) tot1.push_back(totals_of(tl));
    std::vector<bool> po1(tails.size(), true), cpo1(tails.size(), true);
    for (std::size_t a = 0; a < tails.size(); ++a) {
        if (!tails[a].ir) {
            po1[a] = cpo1[a] = false;
            continue;
        }
        for (std::size_t b = 0; b < tails.size() && (po1[a] || cpo1[a]); ++b) {
            if (b == a || !tails[b].ir) continue;
            if (dominates(tot1[b], tot1[a], paths)) {
                po1[a] = false;
                if (tails[b].como) cpo1[a] = false;
            }
        }
        if (!tails[a].como) cpo1[a] = false;
    }
    StepEval step0(specs, 0, paths, endowment_bound(specs, inst.paths, 0));
    for (std::size_t k = 0; k < tails.size(); ++k) {
        const auto& tl = tails[k];
        const Matrix& R1 = tl.risk;
        GridEnumerator grid(aggregate_plus(paths, 1, R1, n), n, inst.m);
        struct Head {
            Matrix V;
            double tot;
            bool como, ir;
        };
        std::vector<Head> heads;
        Matrix risk;
        grid.run(false, [&](const Matrix& V) {
            const double tot = expectation(step0.total(V, risk), paths);
            heads.push_back({V, tot, is_comonotone_matrix(V, N, n), step0.ir_ok(risk)});
        });
        double min_all = INFINITY, min_com = INFINITY;
        for (const auto& h : heads) {
            if (!h.ir) continue;
            min_all = std::min(min_all, h.tot);
            if (h.como) min_com = std::min(min_com, h.tot);
        }
        for (const auto& h : heads) {
            const bool como = h.como && tl.como;
            const bool dpo = tl.ir && po1[k] && h.ir && h.tot <= min_all + tol_of(min_all);
            const bool cdpo = como && cpo1[k] && h.ir && h.tot <= min_com + tol_of(min_com);
            record(como, dpo, cdpo, [&] {
                std::vector<double> Y(N * 2 * n);
                for (std::size_t p = 0; p < N; ++p)
                    for (std::size_t i = 0; i < n; ++i) {
                        Y[(p * 2 + 0) * n + i] = h.V[p * n + i] - R1[p * n + i];
                        Y[(p * 2 + 1) * n + i] = tl.V[p * n + i];
                    }
                return AllocationProcess(inst.paths, n, std::move(Y));
            });
        }
    }
    return rep;
}

}  // namespace riskshare
