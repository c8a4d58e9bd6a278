#pragma once

#include <cmath>

#include <Eigen/Core>

#include "gtd_ist/errors.hpp"

namespace gtd_ist {

/// Nonnegative, finite shrinkage level of the soft-thresholding operator.
class Threshold {
public:
    explicit Threshold(double nu) : nu_(nu) {
        if (!(std::isfinite(nu) && nu >= 0.0)) throw InvalidArgument("threshold must be finite and >= 0");
    }
    double value() const noexcept { return nu_; }

private:
    double nu_;
};

/// Proximal map of nu * ||.||_1, applied in place. Entries with |x_j| <= nu
/// become exactly zero; nu = 0 leaves x untouched.
template <typename Derived>
void soft_threshold_inplace(Eigen::DenseBase<Derived>& x, Threshold nu) {
    if (!x.allFinite()) throw InvalidArgument("soft threshold input has non-finite entries");
    const double level = nu.value();
    if (level == 0.0) return;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double v = x(j);
        if (v > level) {
            x(j) = v - level;
        } else if (v < -level) {
            x(j) = v + level;
        } else {
            x(j) = 0.0;
        }
    }
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> soft_threshold(const Eigen::MatrixBase<Derived>& x,
                                                                          Threshold nu) {
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out = x;
    soft_threshold_inplace(out, nu);
    return out;
}

}  // namespace gtd_ist
