#include "riskshare/allocation_process.hpp"

#include <cmath>
#include <string>

#include "riskshare/errors.hpp"

namespace riskshare {

AllocationProcess::AllocationProcess(PathSetPtr paths, std::size_t n_agents, std::vector<double> values)
    : paths_(std::move(paths)), n_(n_agents), values_(std::move(values)) {
    require(paths_ != nullptr, ErrorKind::shape, "allocation without a path set");
    require(n_ >= 1, ErrorKind::shape, "allocation needs at least one agent");
    require(values_.size() == paths_->size() * paths_->horizon() * n_, ErrorKind::shape,
            "allocation tensor is not N x T x n");
    for (std::size_t p = 0; p < size(); ++p) {
        for (std::size_t t = 1; t <= horizon(); ++t) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n_; ++i) {
                require(std::isfinite(at(p, t, i)), ErrorKind::domain, "non-finite allocation value");
                sum += at(p, t, i);
            }
            const double s = paths_->aggregate(p, t);
            require(std::abs(sum - s) <= 1e-9 * std::max(1.0, std::abs(s)), ErrorKind::domain,
                    "allocation does not sum to the aggregate on path " + std::to_string(p) + ", period " +
                        std::to_string(t));
        }
    }
}

AllocationProcess AllocationProcess::from_endowments(PathSetPtr paths) {
    require(paths && paths->has_endowments(), ErrorKind::configuration, "path set carries no agent endowments");
    const auto n = paths->n_agents();
    std::vector<double> v;
    v.reserve(paths->size() * paths->horizon() * n);
    for (std::size_t p = 0; p < paths->size(); ++p)
        for (std::size_t t = 1; t <= paths->horizon(); ++t)
            for (std::size_t i = 0; i < n; ++i) v.push_back(paths->endowment(p, t, i));
    return AllocationProcess(paths, n, std::move(v));
}

std::vector<double> AllocationProcess::column(std::size_t period, std::size_t agent) const {
    std::vector<double> c(size());
    for (std::size_t p = 0; p < size(); ++p) c[p] = at(p, period, agent);
    return c;
}

}  // namespace riskshare
