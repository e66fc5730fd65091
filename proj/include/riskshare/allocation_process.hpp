#pragma once

#include <cstddef>
#include <vector>

#include "riskshare/scenario.hpp"

namespace riskshare {

/// Y_t^{(i)} on every path of a shared path set; rows sum to S_t.
class AllocationProcess {
public:
    AllocationProcess(PathSetPtr paths, std::size_t n_agents, std::vector<double> values);
    /// Each agent keeps their own endowment.
    static AllocationProcess from_endowments(PathSetPtr paths);

    const SamplePathSet& paths() const { return *paths_; }
    const PathSetPtr& paths_ptr() const { return paths_; }
    std::size_t n_agents() const { return n_; }
    std::size_t horizon() const { return paths_->horizon(); }
    std::size_t size() const { return paths_->size(); }

    double at(std::size_t path, std::size_t period, std::size_t agent) const {
        return values_[(path * horizon() + (period - 1)) * n_ + agent];
    }
    const std::vector<double>& raw() const { return values_; }

    /// Y_t^{(i)} across paths.
    std::vector<double> column(std::size_t period, std::size_t agent) const;

private:
    PathSetPtr paths_;
    std::size_t n_;
    std::vector<double> values_;
};

}  // namespace riskshare
