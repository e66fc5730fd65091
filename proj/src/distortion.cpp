#include "riskshare/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

constexpr double kEps = 1e-14;

double interp(const std::vector<Knot>& k, double x) {
    auto it = std::upper_bound(k.begin(), k.end(), x, [](double v, const Knot& kn) { return v < kn.x; });
    if (it == k.begin()) return k.front().y;
    if (it == k.end()) return k.back().y;
    const Knot& b = *it;
    const Knot& a = *(it - 1);
    if (x == a.x) return a.y;
    return a.y + (b.y - a.y) * ((x - a.x) / (b.x - a.x));
}

double seg_slope(const Knot& a, const Knot& b) { return (b.y - a.y) / (b.x - a.x); }

std::vector<Knot> canonical(std::vector<Knot> k) {
    std::stable_sort(k.begin(), k.end(), [](const Knot& a, const Knot& b) { return a.x < b.x; });
    std::vector<Knot> out;
    for (const auto& p : k) {
        if (!out.empty() && p.x == out.back().x) {
            require(std::abs(p.y - out.back().y) <= kEps, ErrorKind::parameter,
                    "distortion has two values at the same abscissa");
            continue;
        }
        out.push_back(p);
    }
    // Drop interior knots lying on the chord of their neighbours.
    std::vector<Knot> pruned;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!pruned.empty() && i + 1 < out.size()) {
            const Knot& a = pruned.back();
            const Knot& b = out[i + 1];
            const double predicted = a.y + (b.y - a.y) * ((out[i].x - a.x) / (b.x - a.x));
            if (std::abs(predicted - out[i].y) <= kEps) continue;
        }
        pruned.push_back(out[i]);
    }
    return pruned;
}

std::vector<double> merged_abscissae(const DistortionFn& a, const DistortionFn& b) {
    std::vector<double> xs;
    for (auto& k : a.breakpoints()) xs.push_back(k.x);
    for (auto& k : b.breakpoints()) xs.push_back(k.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

}  // namespace

PiecewiseLinear::PiecewiseLinear(std::vector<Knot> knots, double left_slope, double right_slope)
    : knots_(std::move(knots)), left_slope_(left_slope), right_slope_(right_slope) {
    require(!knots_.empty(), ErrorKind::parameter, "piecewise-linear function needs a knot");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        require(knots_[i].x > knots_[i - 1].x, ErrorKind::parameter, "knots must be strictly increasing");
}

double PiecewiseLinear::operator()(double x) const {
    if (x <= knots_.front().x) return knots_.front().y + left_slope_ * (x - knots_.front().x);
    if (x >= knots_.back().x) return knots_.back().y + right_slope_ * (x - knots_.back().x);
    return interp(knots_, x);
}

double PiecewiseLinear::slope_right_of(double x) const {
    if (x < knots_.front().x) return left_slope_;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), x, [](double v, const Knot& k) { return v < k.x; });
    if (it == knots_.end()) return right_slope_;
    return seg_slope(*(it - 1), *it);
}

DistortionFn::DistortionFn() : knots_{{0.0, 0.0}, {1.0, 1.0}} {}

DistortionFn::DistortionFn(std::vector<Knot> breakpoints) : knots_(canonical(std::move(breakpoints))) {
    require(knots_.size() >= 2, ErrorKind::parameter, "distortion needs at least two breakpoints");
    require(knots_.front().x == 0.0 && knots_.front().y == 0.0, ErrorKind::parameter, "distortion must start at (0, 0)");
    require(knots_.back().x == 1.0 && knots_.back().y == 1.0, ErrorKind::parameter, "distortion must end at (1, 1)");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        require(std::isfinite(knots_[i].x) && std::isfinite(knots_[i].y), ErrorKind::parameter,
                "non-finite distortion breakpoint");
        if (i > 0)
            require(knots_[i].y >= knots_[i - 1].y - kEps, ErrorKind::parameter, "distortion must be nondecreasing");
    }
}

double DistortionFn::operator()(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return interp(knots_, u);
}

bool DistortionFn::is_identity() const { return knots_.size() == 2; }

bool DistortionFn::is_concave() const {
    for (std::size_t i = 1; i + 1 < knots_.size(); ++i)
        if (seg_slope(knots_[i], knots_[i + 1]) > seg_slope(knots_[i - 1], knots_[i]) + 1e-12) return false;
    return true;
}

bool DistortionFn::is_strictly_concave() const {
    if (knots_.size() < 3) return false;
    for (std::size_t i = 1; i + 1 < knots_.size(); ++i)
        if (seg_slope(knots_[i], knots_[i + 1]) >= seg_slope(knots_[i - 1], knots_[i])) return false;
    return true;
}

double DistortionFn::slope_at_zero() const { return seg_slope(knots_[0], knots_[1]); }
double DistortionFn::slope_at_one() const { return seg_slope(knots_[knots_.size() - 2], knots_.back()); }

bool operator==(const DistortionFn& a, const DistortionFn& b) {
    if (a.knots_.size() != b.knots_.size()) return false;
    for (std::size_t i = 0; i < a.knots_.size(); ++i)
        if (a.knots_[i].x != b.knots_[i].x || a.knots_[i].y != b.knots_[i].y) return false;
    return true;
}

DistortionFn identity_distortion() { return DistortionFn(); }

DistortionFn es_distortion(double alpha) {
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha < 1.0, ErrorKind::parameter, "ES level must lie in [0, 1)");
    if (alpha == 0.0) return DistortionFn();
    return DistortionFn({{0.0, 0.0}, {1.0 - alpha, 1.0}, {1.0, 1.0}});
}

DistortionFn power_distortion(double p, std::size_t pieces) {
    require(p > 0.0 && p <= 1.0, ErrorKind::parameter, "power must lie in (0, 1]");
    require(pieces >= 1, ErrorKind::parameter, "need at least one piece");
    std::vector<Knot> k;
    for (std::size_t j = 0; j <= pieces; ++j) {
        double u = static_cast<double>(j) / static_cast<double>(pieces);
        k.push_back({u, j == pieces ? 1.0 : std::pow(u, p)});
    }
    return DistortionFn(std::move(k));
}

DistortionFn mix(const std::vector<std::pair<double, DistortionFn>>& parts) {
    require(!parts.empty(), ErrorKind::parameter, "empty mixture");
    double total = 0.0;
    for (auto& [w, k] : parts) {
        require(std::isfinite(w) && w >= 0.0, ErrorKind::parameter, "mixture weights must be nonnegative");
        total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorKind::parameter, "mixture weights must sum to 1");
    std::vector<double> xs;
    for (auto& [w, k] : parts)
        if (w > 0.0)
            for (auto& kn : k.breakpoints()) xs.push_back(kn.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<Knot> out;
    for (double x : xs) {
        double y = 0.0;
        for (auto& [w, k] : parts)
            if (w > 0.0) y += w * k(x);
        if (x == 0.0) y = 0.0;
        if (x == 1.0) y = 1.0;
        out.push_back({x, y});
    }
    return DistortionFn(std::move(out));
}

std::vector<double> intersect(const DistortionFn& k1, const DistortionFn& k2) {
    const auto xs = merged_abscissae(k1, k2);
    std::vector<double> roots;
    int last_sign = 0;
    double zero_start = -1.0;  // start of a run where the difference vanishes
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double d = k1(xs[j]) - k2(xs[j]);
        const int sign = std::abs(d) <= kEps ? 0 : (d > 0 ? 1 : -1);
        if (j > 0 && sign != 0 && last_sign != 0 && sign != last_sign) {
            const double d0 = k1(xs[j - 1]) - k2(xs[j - 1]);
            if (d0 != 0.0 && std::abs(d0) > kEps) {
                // Solve a1 + b1 u = a2 + b2 u on the segment.
                const double x0 = xs[j - 1], x1 = xs[j];
                const double b1 = (k1(x1) - k1(x0)) / (x1 - x0);
                const double b2 = (k2(x1) - k2(x0)) / (x1 - x0);
                const double a1 = k1(x0) - b1 * x0;
                const double a2 = k2(x0) - b2 * x0;
                roots.push_back(std::clamp((a2 - a1) / (b1 - b2), x0, x1));
            } else if (zero_start > 0.0 && zero_start < 1.0) {
                roots.push_back(zero_start);
            }
        }
        if (sign == 0 && (j == 0 || std::abs(k1(xs[j - 1]) - k2(xs[j - 1])) > kEps)) zero_start = xs[j];
        if (sign != 0) last_sign = sign;
    }
    return roots;
}

SortedLaw SortedLaw::of(std::span<const double> values, std::span<const double> weights) {
    require(values.size() == weights.size(), ErrorKind::shape, "values and weights differ in length");
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    SortedLaw law;
    std::vector<double> mass;
    for (auto i : idx) {
        if (weights[i] <= 0.0) continue;
        if (!law.values.empty() && law.values.back() == values[i]) {
            mass.back() += weights[i];
        } else {
            law.values.push_back(values[i]);
            mass.push_back(weights[i]);
        }
    }
    require(!law.values.empty(), ErrorKind::domain, "law has no positive mass");
    law.tail.assign(mass.size(), 0.0);
    double acc = 0.0;
    for (std::size_t j = mass.size(); j-- > 0;) {
        acc += mass[j];
        law.tail[j] = std::min(acc, 1.0);
    }
    law.tail[0] = 1.0;
    return law;
}

double choquet(const DistortionFn& k, const SortedLaw& law) {
    const std::size_t m = law.values.size();
    if (k.is_identity()) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += law.values[j] * (law.tail[j] - (j + 1 < m ? law.tail[j + 1] : 0.0));
        return s;
    }
    double s = 0.0;
    double prev = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double next = j + 1 < m ? k(law.tail[j + 1]) : 0.0;
        s += law.values[j] * (prev - next);
        prev = next;
    }
    return s;
}

double choquet(const DistortionFn& k, const EmpiricalDist& dist) { return choquet(k, SortedLaw::of(dist)); }

}  // namespace riskshare
