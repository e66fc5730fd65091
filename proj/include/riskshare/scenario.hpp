#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "riskshare/csv.hpp"

namespace riskshare {

/// Finite weighted law on the real line.
class EmpiricalDist {
public:
    EmpiricalDist(std::vector<double> values, std::vector<double> weights);
    static EmpiricalDist uniform(std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<const double> weights() const { return weights_; }
    double mean() const;

private:
    std::vector<double> values_;
    std::vector<double> weights_;
};

/// Smallest support point carrying positive weight.
double essinf(const EmpiricalDist& dist);

/// P(X > x); right-continuous and nonincreasing in x.
double empirical_survival(const EmpiricalDist& dist, double x);

/// Left-continuous quantile inf{x : F(x) >= level} for level in (0, 1].
double quantile_left(const EmpiricalDist& dist, double level);

/// Raw inputs of a path set. Matrices are row-major with paths as rows.
struct PathData {
    std::size_t horizon = 0;
    std::vector<double> aggregate;  // N x T
    std::vector<double> weights;    // N; empty means uniform
    std::size_t n_agents = 0;       // 0 when no endowments are given
    std::vector<double> endowments;  // N x T x n (agent fastest)
    std::vector<double> observables;  // N x T; empty means "same as aggregate"
    // Information partition: node label of each path at periods 0..T-1
    // (N x T). Empty means the natural filtration of the aggregate process.
    std::vector<std::size_t> info_nodes;
};

/// Empirical model of the filtered space: N weighted paths over T periods.
/// Periods are 1-based in the public API.
class SamplePathSet {
public:
    explicit SamplePathSet(PathData data);

    std::size_t horizon() const { return horizon_; }
    std::size_t size() const { return n_paths_; }
    std::size_t n_agents() const { return n_agents_; }
    bool has_endowments() const { return n_agents_ > 0; }
    bool equal_weights() const;

    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t path) const { return weights_[path]; }

    double aggregate(std::size_t path, std::size_t period) const {
        return aggregate_[path * horizon_ + (period - 1)];
    }
    double endowment(std::size_t path, std::size_t period, std::size_t agent) const {
        return endowments_[(path * horizon_ + (period - 1)) * n_agents_ + agent];
    }
    double observable(std::size_t path, std::size_t period) const {
        return observables_[path * horizon_ + (period - 1)];
    }
    /// Node label of a path in the information partition at t in 0..T-1.
    std::size_t info_node(std::size_t path, std::size_t t) const {
        return info_nodes_[path * horizon_ + t];
    }

    std::vector<double> aggregate_column(std::size_t period) const;
    std::vector<double> observable_column(std::size_t period) const;
    EmpiricalDist marginal(std::size_t period) const;
    EmpiricalDist law_of(std::span<const double> per_path) const;

private:
    std::size_t horizon_;
    std::size_t n_paths_;
    std::size_t n_agents_;
    std::vector<double> aggregate_;
    std::vector<double> weights_;
    std::vector<double> endowments_;
    std::vector<double> observables_;
    std::vector<std::size_t> info_nodes_;
};

using PathSetPtr = std::shared_ptr<const SamplePathSet>;

/// Finite scenario tree. Node 0 is the root at period 0.
struct TreeNode {
    std::size_t period = 0;
    std::optional<std::size_t> parent;
    double prob = 1.0;                 // conditional probability given parent
    double value = 0.0;                // aggregate endowment at the node
    std::vector<double> endowments;    // optional per-agent split of value
    std::vector<std::size_t> children;
};

class ScenarioTree {
public:
    explicit ScenarioTree(std::vector<TreeNode> nodes);

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t horizon() const { return horizon_; }

    /// One path per leaf, weighted by the product of conditional probabilities;
    /// the information partition is the tree's node structure.
    SamplePathSet to_paths() const;

private:
    std::vector<TreeNode> nodes_;
    std::size_t horizon_ = 0;
};

/// S_1 ~ Exp(mean0), S_2 | S_1 ~ Exp(S_1), uniform weights.
///
/// Each path draws from its own SplitMix64 stream whose starting state is
/// derived from (seed, path index), so results do not depend on the order in
/// which paths are generated.
SamplePathSet generate_exponential_chain(std::size_t n_paths, double mean0, std::uint64_t seed);

/// Builds a path set from `path_id,period[,weight],S[,X1..Xn]` records.
SamplePathSet load_paths(const CsvTable& table);

}  // namespace riskshare
