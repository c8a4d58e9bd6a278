#pragma once

#include <random>

#include "gtd_ist/learners.hpp"
#include "gtd_ist/mdp_model.hpp"

namespace gtd_ist::support {

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline Matrix random_stochastic(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix p(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) p(i, j) = u(rng);
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

inline StateDistribution random_distribution(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = u(rng);
    d /= d.sum();
    return StateDistribution(d);
}

inline MdpModel random_model(Eigen::Index n, Eigen::Index k, double gamma, std::mt19937_64& rng) {
    Matrix phi(n, k);
    for (Eigen::Index j = 0; j < k; ++j) phi.col(j) = random_vector(n, rng);
    return MdpModel(random_stochastic(n, rng), random_vector(n, rng), gamma, phi);
}

// Five-state ring with uniform stationary distribution and a well-conditioned
// three-feature TD system.
inline MdpModel well_conditioned_model() {
    Matrix p = Matrix::Zero(5, 5);
    for (Eigen::Index s = 0; s < 5; ++s) {
        p(s, s) = 0.2;
        p(s, (s + 1) % 5) = 0.5;
        p(s, (s + 2) % 5) = 0.3;
    }
    Vector r(5);
    r << 1.0, 0.0, -1.0, 0.5, 0.0;
    Matrix phi(5, 3);
    phi << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1;
    return MdpModel(p, r, 0.5, phi);
}

inline const StepSizes kConvergenceSteps{0.5, 0.5, Schedule::decaying, 1e-3};

}  // namespace gtd_ist::support
