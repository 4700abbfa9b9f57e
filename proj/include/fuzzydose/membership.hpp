#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "fuzzydose/errors.hpp"

namespace fuzzydose {

struct MfPoint {
    double x = 0.0;
    double degree = 0.0;

    friend bool operator==(const MfPoint&, const MfPoint&) = default;
};

class PiecewiseLinearMf {
  public:
    explicit PiecewiseLinearMf(std::vector<MfPoint> points) : points_(std::move(points)) {
        if (points_.size() < 2) {
            throw DefinitionError("membership function needs at least two breakpoints");
        }
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].degree)) {
                throw DefinitionError("membership breakpoint is not finite");
            }
            if (points_[i].degree < 0.0 || points_[i].degree > 1.0) {
                throw DefinitionError("membership degree outside [0, 1]");
            }
            if (i > 0 && !(points_[i - 1].x < points_[i].x)) {
                throw DefinitionError("membership breakpoints must be strictly increasing");
            }
        }
    }

    static PiecewiseLinearMf shoulder_down(double a, double b) {
        return from_shape({{a, 1.0}, {b, 0.0}});
    }

    static PiecewiseLinearMf shoulder_up(double a, double b) {
        return from_shape({{a, 0.0}, {b, 1.0}});
    }

    static PiecewiseLinearMf triangle(double a, double b, double c) {
        return from_shape({{a, 0.0}, {b, 1.0}, {c, 0.0}});
    }

    static PiecewiseLinearMf trapezoid(double a, double b, double c, double d) {
        return from_shape({{a, 0.0}, {b, 1.0}, {c, 1.0}, {d, 0.0}});
    }

    double evaluate(double x) const {
        if (x <= points_.front().x) {
            return points_.front().degree;
        }
        if (x >= points_.back().x) {
            return points_.back().degree;
        }
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (x <= points_[i].x) {
                const MfPoint& lo = points_[i - 1];
                const MfPoint& hi = points_[i];
                const double t = (x - lo.x) / (hi.x - lo.x);
                return lo.degree + t * (hi.degree - lo.degree);
            }
        }
        return points_.back().degree;
    }

    const std::vector<MfPoint>& breakpoints() const { return points_; }

    double support_lo() const { return points_.front().x; }
    double support_hi() const { return points_.back().x; }

    friend bool operator==(const PiecewiseLinearMf&, const PiecewiseLinearMf&) = default;

  private:
    static PiecewiseLinearMf from_shape(std::vector<MfPoint> raw) {
        for (std::size_t i = 1; i < raw.size(); ++i) {
            if (raw[i].x < raw[i - 1].x) {
                throw DefinitionError("shape arguments must be non-decreasing");
            }
        }
        std::vector<MfPoint> points;
        points.reserve(raw.size());
        for (const MfPoint& p : raw) {
            if (!points.empty() && points.back().x == p.x) {
                points.back().degree = std::max(points.back().degree, p.degree);
            } else {
                points.push_back(p);
            }
        }
        if (points.size() < 2) {
            throw DefinitionError("shape arguments collapse to a single breakpoint");
        }
        return PiecewiseLinearMf(std::move(points));
    }

    std::vector<MfPoint> points_;
};

inline double evaluate_membership(const PiecewiseLinearMf& mf, double x) {
    return mf.evaluate(x);
}

}  // namespace fuzzydose
