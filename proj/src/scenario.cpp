#include "riskshare/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kBudgetTol = 1e-9;

// Neumaier-compensated sum; plain summation of 1e5 equal weights drifts past 1e-12.
double stable_sum(std::span<const double> v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

void check_weights(const std::vector<double>& w, ErrorKind kind) {
    for (double x : w) require(std::isfinite(x) && x >= 0.0, kind, "weights must be finite and nonnegative");
    const double sum = stable_sum(w);
    require(std::abs(sum - 1.0) <= kWeightTol, kind,
            "weights sum to " + format_double(sum) + ", expected 1");
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// SplitMix64. A stream for path p starts at mix64(seed) + p * kStreamStep, so
// each path owns a disjoint stretch of the Weyl sequence.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}
    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }
    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

constexpr std::uint64_t kStreamStep = 0xD1B54A32D192ED03ULL;

double draw_exponential(SplitMix64& rng, double mean) { return -mean * std::log1p(-rng.uniform()); }

// Labels each path at t = 0..T-1 by the distinct prefix S_1..S_t.
std::vector<std::size_t> prefix_nodes(const std::vector<double>& agg, std::size_t n, std::size_t T) {
    std::vector<std::size_t> nodes(n * T, 0);
    for (std::size_t t = 1; t < T; ++t) {
        std::map<std::vector<double>, std::size_t> ids;
        for (std::size_t p = 0; p < n; ++p) {
            std::vector<double> key(agg.begin() + p * T, agg.begin() + p * T + t);
            auto [it, _] = ids.emplace(std::move(key), ids.size());
            nodes[p * T + t] = it->second;
        }
    }
    return nodes;
}

}  // namespace

EmpiricalDist::EmpiricalDist(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
    require(values_.size() == weights_.size(), ErrorKind::domain, "values and weights differ in length");
    for (double v : values_) require(!std::isnan(v), ErrorKind::domain, "NaN value in distribution");
    if (!values_.empty()) check_weights(weights_, ErrorKind::domain);
}

EmpiricalDist EmpiricalDist::uniform(std::vector<double> values) {
    std::vector<double> w(values.size(), values.empty() ? 0.0 : 1.0 / static_cast<double>(values.size()));
    return EmpiricalDist(std::move(values), std::move(w));
}

double EmpiricalDist::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) m += weights_[i] * values_[i];
    return m;
}

double essinf(const EmpiricalDist& dist) {
    double best = INFINITY;
    bool any = false;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist.weights()[i] > 0.0) {
            best = std::min(best, dist.values()[i]);
            any = true;
        }
    }
    require(any, ErrorKind::domain, "essinf of an empty distribution");
    return best;
}

double empirical_survival(const EmpiricalDist& dist, double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist.values()[i] > x) s += dist.weights()[i];
    return std::clamp(s, 0.0, 1.0);
}

double quantile_left(const EmpiricalDist& dist, double level) {
    require(dist.size() > 0, ErrorKind::domain, "quantile of an empty distribution");
    require(level > 0.0 && level <= 1.0, ErrorKind::parameter, "quantile level must lie in (0, 1]");
    std::vector<std::size_t> idx(dist.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dist.values()[a] < dist.values()[b]; });
    double cum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        cum += dist.weights()[idx[k]];
        bool last_of_value = k + 1 == idx.size() || dist.values()[idx[k + 1]] != dist.values()[idx[k]];
        if (last_of_value && cum >= level - 1e-12) return dist.values()[idx[k]];
    }
    return dist.values()[idx.back()];
}

SamplePathSet::SamplePathSet(PathData d)
    : horizon_(d.horizon),
      n_paths_(d.horizon == 0 ? 0 : d.aggregate.size() / d.horizon),
      n_agents_(d.n_agents),
      aggregate_(std::move(d.aggregate)),
      weights_(std::move(d.weights)),
      endowments_(std::move(d.endowments)),
      observables_(std::move(d.observables)),
      info_nodes_(std::move(d.info_nodes)) {
    require(horizon_ >= 1, ErrorKind::shape, "horizon must be at least 1");
    require(n_paths_ >= 1 && aggregate_.size() == n_paths_ * horizon_, ErrorKind::shape,
            "aggregate matrix is not N x T");
    for (double v : aggregate_) require(std::isfinite(v), ErrorKind::domain, "non-finite aggregate value");
    if (weights_.empty()) weights_.assign(n_paths_, 1.0 / static_cast<double>(n_paths_));
    require(weights_.size() == n_paths_, ErrorKind::shape, "weight vector length differs from path count");
    check_weights(weights_, ErrorKind::domain);
    if (n_agents_ > 0) {
        require(endowments_.size() == n_paths_ * horizon_ * n_agents_, ErrorKind::shape,
                "endowment tensor is not N x T x n");
        for (std::size_t p = 0; p < n_paths_; ++p) {
            for (std::size_t t = 1; t <= horizon_; ++t) {
                double sum = 0.0;
                for (std::size_t i = 0; i < n_agents_; ++i) {
                    require(std::isfinite(endowment(p, t, i)), ErrorKind::domain, "non-finite endowment");
                    sum += endowment(p, t, i);
                }
                require(std::abs(sum - aggregate(p, t)) <= kBudgetTol * std::max(1.0, std::abs(aggregate(p, t))),
                        ErrorKind::domain,
                        "endowments do not sum to the aggregate on path " + std::to_string(p) + ", period " +
                            std::to_string(t));
            }
        }
    } else {
        require(endowments_.empty(), ErrorKind::shape, "endowments given without an agent count");
    }
    if (observables_.empty()) observables_ = aggregate_;
    require(observables_.size() == aggregate_.size(), ErrorKind::shape, "observable matrix is not N x T");
    for (double v : observables_) require(std::isfinite(v), ErrorKind::domain, "non-finite observable");
    if (info_nodes_.empty()) info_nodes_ = prefix_nodes(aggregate_, n_paths_, horizon_);
    require(info_nodes_.size() == n_paths_ * horizon_, ErrorKind::shape, "info node matrix is not N x T");
}

bool SamplePathSet::equal_weights() const {
    const double w0 = weights_.front();
    return std::all_of(weights_.begin(), weights_.end(),
                       [&](double w) { return std::abs(w - w0) <= 1e-15; });
}

std::vector<double> SamplePathSet::aggregate_column(std::size_t period) const {
    std::vector<double> col(n_paths_);
    for (std::size_t p = 0; p < n_paths_; ++p) col[p] = aggregate(p, period);
    return col;
}

std::vector<double> SamplePathSet::observable_column(std::size_t period) const {
    std::vector<double> col(n_paths_);
    for (std::size_t p = 0; p < n_paths_; ++p) col[p] = observable(p, period);
    return col;
}

EmpiricalDist SamplePathSet::marginal(std::size_t period) const {
    require(period >= 1 && period <= horizon_, ErrorKind::parameter, "period out of range");
    return EmpiricalDist(aggregate_column(period), weights_);
}

EmpiricalDist SamplePathSet::law_of(std::span<const double> per_path) const {
    require(per_path.size() == n_paths_, ErrorKind::shape, "per-path vector has the wrong length");
    return EmpiricalDist(std::vector<double>(per_path.begin(), per_path.end()), weights_);
}

ScenarioTree::ScenarioTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    require(!nodes_.empty(), ErrorKind::shape, "tree has no nodes");
    require(nodes_[0].period == 0 && !nodes_[0].parent, ErrorKind::shape, "node 0 must be the period-0 root");
    std::optional<std::size_t> leaf_period;
    std::optional<std::size_t> n_agents;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const auto& nd = nodes_[k];
        require(std::isfinite(nd.value) && std::isfinite(nd.prob) && nd.prob >= 0.0, ErrorKind::domain,
                "node " + std::to_string(k) + " has a non-finite value or bad probability");
        if (k > 0) {
            require(nd.parent && *nd.parent < nodes_.size(), ErrorKind::shape,
                    "node " + std::to_string(k) + " has no valid parent");
            require(nodes_[*nd.parent].period + 1 == nd.period, ErrorKind::shape,
                    "node " + std::to_string(k) + " is not one period after its parent");
            const auto& sib = nodes_[*nd.parent].children;
            require(std::find(sib.begin(), sib.end(), k) != sib.end(), ErrorKind::shape,
                    "node " + std::to_string(k) + " missing from its parent's children");
            if (!nd.endowments.empty()) {
                if (!n_agents) n_agents = nd.endowments.size();
                require(*n_agents == nd.endowments.size(), ErrorKind::shape, "inconsistent endowment length");
            }
        }
        if (nd.children.empty()) {
            if (!leaf_period) leaf_period = nd.period;
            require(*leaf_period == nd.period && nd.period >= 1, ErrorKind::shape, "leaves must all sit at period T");
        } else {
            double sum = 0.0;
            for (auto c : nd.children) {
                require(c < nodes_.size() && nodes_[c].parent == k, ErrorKind::shape,
                        "child link of node " + std::to_string(k) + " is inconsistent");
                sum += nodes_[c].prob;
            }
            require(std::abs(sum - 1.0) <= kWeightTol, ErrorKind::domain,
                    "child probabilities of node " + std::to_string(k) + " do not sum to 1");
        }
    }
    horizon_ = *leaf_period;
}

SamplePathSet ScenarioTree::to_paths() const {
    PathData d;
    d.horizon = horizon_;
    const bool with_x = std::any_of(nodes_.begin() + 1, nodes_.end(), [](auto& nd) { return !nd.endowments.empty(); });
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (!nodes_[k].children.empty()) continue;
        std::vector<std::size_t> chain;
        for (std::optional<std::size_t> c = k; c; c = nodes_[*c].parent) chain.push_back(*c);
        std::reverse(chain.begin(), chain.end());  // root .. leaf, length T+1
        double w = 1.0;
        for (std::size_t j = 1; j < chain.size(); ++j) {
            const auto& nd = nodes_[chain[j]];
            w *= nd.prob;
            d.aggregate.push_back(nd.value);
            if (with_x) {
                require(!nd.endowments.empty(), ErrorKind::shape, "endowments missing on some nodes");
                d.endowments.insert(d.endowments.end(), nd.endowments.begin(), nd.endowments.end());
                d.n_agents = nd.endowments.size();
            }
        }
        d.weights.push_back(w);
        for (std::size_t t = 0; t < horizon_; ++t) d.info_nodes.push_back(chain[t]);
    }
    return SamplePathSet(std::move(d));
}

SamplePathSet generate_exponential_chain(std::size_t n_paths, double mean0, std::uint64_t seed) {
    require(n_paths >= 1, ErrorKind::parameter, "n_paths must be at least 1");
    require(std::isfinite(mean0) && mean0 > 0.0, ErrorKind::parameter, "mean0 must be positive");
    PathData d;
    d.horizon = 2;
    d.aggregate.resize(2 * n_paths);
    const std::uint64_t base = mix64(seed);
    for (std::size_t p = 0; p < n_paths; ++p) {
        SplitMix64 rng(base + static_cast<std::uint64_t>(p) * kStreamStep);
        const double s1 = draw_exponential(rng, mean0);
        const double s2 = draw_exponential(rng, s1);
        d.aggregate[2 * p] = s1;
        d.aggregate[2 * p + 1] = s2;
    }
    // Continuous draws: every path is its own node at t = 1.
    d.info_nodes.resize(2 * n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        d.info_nodes[2 * p] = 0;
        d.info_nodes[2 * p + 1] = p;
    }
    return SamplePathSet(std::move(d));
}

SamplePathSet load_paths(const CsvTable& table) {
    auto need = [&](const char* name) {
        auto c = table.column(name);
        if (c == CsvTable::npos) fail(ErrorKind::ingestion, std::string("missing column ") + name);
        return c;
    };
    const auto c_id = need("path_id");
    const auto c_period = need("period");
    const auto c_s = need("S");
    const auto c_w = table.column("weight");
    const auto c_obs = table.column("O");
    std::vector<std::size_t> c_x;
    for (std::size_t i = 1;; ++i) {
        auto c = table.column("X" + std::to_string(i));
        if (c == CsvTable::npos) break;
        c_x.push_back(c);
    }

    auto num = [&](std::size_t r, std::size_t c) {
        const auto& s = table.rows[r][c];
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(ErrorKind::ingestion, "row at line " + std::to_string(table.lines[r]) + ": bad number '" + s + "'");
        }
    };

    struct Row {
        std::size_t period;
        std::size_t r;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> by_path;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& id = table.rows[r][c_id];
        double pv = num(r, c_period);
        if (pv < 1 || pv != std::floor(pv))
            fail(ErrorKind::ingestion, "row at line " + std::to_string(table.lines[r]) + ": bad period");
        if (!by_path.count(id)) order.push_back(id);
        by_path[id].push_back({static_cast<std::size_t>(pv), r});
    }
    require(!order.empty(), ErrorKind::ingestion, "table has no rows");
    const std::size_t T = by_path[order[0]].size();

    PathData d;
    d.horizon = T;
    d.n_agents = c_x.size();
    for (const auto& id : order) {
        auto rows = by_path[id];
        std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.period < b.period; });
        if (rows.size() != T)
            fail(ErrorKind::ingestion, "row at line " + std::to_string(table.lines[rows.back().r]) + ": path " + id +
                                           " has " + std::to_string(rows.size()) + " periods, expected " +
                                           std::to_string(T));
        std::optional<double> w;
        for (std::size_t t = 0; t < T; ++t) {
            const auto r = rows[t].r;
            const std::string where = "row at line " + std::to_string(table.lines[r]);
            if (rows[t].period != t + 1) fail(ErrorKind::ingestion, where + ": periods must run 1..T");
            const double s = num(r, c_s);
            d.aggregate.push_back(s);
            if (c_obs != CsvTable::npos) d.observables.push_back(num(r, c_obs));
            if (c_w != CsvTable::npos) {
                double wv = num(r, c_w);
                if (w && *w != wv) fail(ErrorKind::ingestion, where + ": weight differs across the path's rows");
                w = wv;
            }
            double sum = 0.0;
            for (auto c : c_x) {
                double x = num(r, c);
                d.endowments.push_back(x);
                sum += x;
            }
            if (!c_x.empty() && std::abs(sum - s) > kBudgetTol * std::max(1.0, std::abs(s)))
                fail(ErrorKind::ingestion, where + ": agent endowments sum to " + format_double(sum) +
                                               " but S is " + format_double(s));
        }
        if (w) d.weights.push_back(*w);
    }
    if (!d.weights.empty()) {
        const double sum = stable_sum(d.weights);
        if (std::abs(sum - 1.0) > kWeightTol || std::any_of(d.weights.begin(), d.weights.end(), [](double x) { return x < 0; }))
            fail(ErrorKind::ingestion, "weights sum to " + format_double(sum) + ", expected 1");
    }
    return SamplePathSet(std::move(d));
}

}  // namespace riskshare
