#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "riskshare/scenario.hpp"

namespace riskshare {

struct Knot {
    double x = 0.0;
    double y = 0.0;
};

/// Continuous piecewise-linear function through sorted knots, extended
/// linearly outside them with the given end slopes.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    PiecewiseLinear(std::vector<Knot> knots, double left_slope, double right_slope);

    double operator()(double x) const;
    const std::vector<Knot>& knots() const { return knots_; }
    double left_slope() const { return left_slope_; }
    double right_slope() const { return right_slope_; }
    /// Slope of the piece to the right of x.
    double slope_right_of(double x) const;

private:
    std::vector<Knot> knots_;
    double left_slope_ = 0.0;
    double right_slope_ = 0.0;
};

/// Piecewise-linear distortion on [0, 1] with k(0) = 0, k(1) = 1, nondecreasing.
/// Knots are kept in canonical form: sorted, deduplicated, collinear interior
/// knots dropped.
class DistortionFn {
public:
    /// Identity distortion (expectation).
    DistortionFn();
    explicit DistortionFn(std::vector<Knot> breakpoints);

    double operator()(double u) const;
    const std::vector<Knot>& breakpoints() const { return knots_; }

    bool is_identity() const;
    bool is_concave() const;
    /// Concave with a strict slope decrease at every interior knot and at
    /// least two pieces.
    bool is_strictly_concave() const;

    /// k'(0+) and k'(1-).
    double slope_at_zero() const;
    double slope_at_one() const;

    friend bool operator==(const DistortionFn& a, const DistortionFn& b);

private:
    std::vector<Knot> knots_;
};

DistortionFn identity_distortion();
DistortionFn es_distortion(double alpha);
/// Chord approximation of u^p (0 < p <= 1) on a uniform grid with `pieces` pieces.
DistortionFn power_distortion(double p, std::size_t pieces);

DistortionFn mix(const std::vector<std::pair<double, DistortionFn>>& parts);

/// Points in (0, 1) where k1 - k2 changes sign.
std::vector<double> intersect(const DistortionFn& k1, const DistortionFn& k2);

/// Distinct sorted support of a weighted sample with P(X >= v_j).
struct SortedLaw {
    std::vector<double> values;
    std::vector<double> tail;  // tail[j] = P(X >= values[j]); tail[0] = 1

    static SortedLaw of(std::span<const double> values, std::span<const double> weights);
    static SortedLaw of(const EmpiricalDist& dist) { return of(dist.values(), dist.weights()); }
};

double choquet(const DistortionFn& k, const SortedLaw& law);
double choquet(const DistortionFn& k, const EmpiricalDist& dist);

}  // namespace riskshare
