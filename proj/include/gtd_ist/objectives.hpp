#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "gtd_ist/errors.hpp"
#include "gtd_ist/mdp_model.hpp"

namespace gtd_ist {

/// MSBE, MSPBE and NEU: the three TD objectives.
enum class ObjectiveKind { msbe, mspbe, neu };

inline const char* to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::msbe: return "MSBE";
        case ObjectiveKind::mspbe: return "MSPBE";
        case ObjectiveKind::neu: return "NEU";
    }
    return "?";
}

/// How the Gram matrix E[phi phi^T] is inverted.
///
/// `strict` refuses matrices whose condition estimate exceeds 1e12.
/// `pseudo_inverse` drops eigen-directions below that relative level, which
/// yields the projection onto span(Phi) exactly even when there are more
/// features than visited states.
enum class GramSolve { strict, pseudo_inverse };

/// Exact expectations under a state distribution d and the model kernel.
///   a_cross = E[phi (gamma phi' - phi)^T] = Phi^T D (gamma P Phi - Phi)
///   c_gram  = E[phi phi^T]                = Phi^T D Phi
///   b_vec   = E[r phi]                    = Phi^T D r
struct ExpectationSet {
    Matrix a_cross;
    Matrix c_gram;
    Vector b_vec;

    std::size_t n_features() const noexcept { return static_cast<std::size_t>(b_vec.size()); }

    /// g(theta) = E[delta_theta phi].
    Vector expected_td_update(const Vector& theta) const {
        if (theta.size() != b_vec.size()) throw DimensionMismatch("theta length differs from feature count");
        return b_vec + a_cross * theta;
    }
};

inline ExpectationSet expectations(const MdpModel& model, const StateDistribution& d) {
    const Matrix phi_d = detail::weighted(model, d);
    const Matrix& phi = model.features();
    ExpectationSet e;
    e.a_cross = phi_d * (model.gamma() * model.transition() * phi - phi);
    e.c_gram = phi_d * phi;
    e.c_gram = 0.5 * (e.c_gram + e.c_gram.transpose()).eval();
    e.b_vec = phi_d * model.reward();
    return e;
}

/// Symmetric (pseudo-)inverse of the Gram matrix, factorised once.
class GramSolver {
public:
    GramSolver(const Matrix& gram, GramSolve mode) : mode_(mode) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
        const Vector& lambda = eig.eigenvalues();
        const double top = lambda.size() ? std::max(lambda.maxCoeff(), 0.0) : 0.0;
        const double bottom = lambda.size() ? lambda.minCoeff() : 0.0;
        condition_ = (bottom > 0.0) ? top / bottom : std::numeric_limits<double>::infinity();
        singular_ = !(condition_ <= kMaxConditionNumber) || top == 0.0;

        Vector inv_lambda = Vector::Zero(lambda.size());
        const double cutoff = top / kMaxConditionNumber;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (lambda(i) > cutoff && lambda(i) > 0.0) inv_lambda(i) = 1.0 / lambda(i);
        }
        inverse_ = eig.eigenvectors() * inv_lambda.asDiagonal() * eig.eigenvectors().transpose();
    }

    /// C^{-1} v (strict) or C^+ v (pseudo-inverse).
    Vector solve(const Vector& v) const {
        require_usable();
        return inverse_ * v;
    }

    const Matrix& inverse() const {
        require_usable();
        return inverse_;
    }

    double condition() const noexcept { return condition_; }
    bool singular() const noexcept { return singular_; }
    GramSolve mode() const noexcept { return mode_; }

private:
    void require_usable() const {
        if (mode_ == GramSolve::strict && singular_) {
            throw SingularSystem("Gram matrix E[phi phi^T] is singular; features are linearly dependent under d",
                                 condition_);
        }
    }

    GramSolve mode_;
    double condition_ = 0.0;
    bool singular_ = false;
    Matrix inverse_;
};

/// D-weighted projector onto span(Phi): Phi (Phi^T D Phi)^{-1} Phi^T D.
inline Matrix projector(const MdpModel& model, const StateDistribution& d, GramSolve mode = GramSolve::strict) {
    const Matrix phi_d = detail::weighted(model, d);
    const Matrix gram = phi_d * model.features();
    const GramSolver solver(0.5 * (gram + gram.transpose()), mode);
    return model.features() * solver.inverse() * phi_d;
}

/// Exact objective values and gradients for one (model, d) pair.
class ObjectiveEvaluator {
public:
    ObjectiveEvaluator(MdpModel model, StateDistribution d, GramSolve mode = GramSolve::strict)
        : model_(std::move(model)),
          d_(std::move(d)),
          exp_(gtd_ist::expectations(model_, d_)),
          gram_(exp_.c_gram, mode),
          bellman_residual_map_(model_.features() - model_.gamma() * model_.transition() * model_.features()) {}

    const MdpModel& model() const noexcept { return model_; }
    const StateDistribution& distribution() const noexcept { return d_; }
    const ExpectationSet& expectations() const noexcept { return exp_; }
    const GramSolver& gram() const noexcept { return gram_; }

    Vector expected_td_update(const Vector& theta) const { return exp_.expected_td_update(theta); }

    /// Per-state V_theta - T V_theta.
    Vector bellman_residual(const Vector& theta) const {
        check(theta);
        return bellman_residual_map_ * theta - model_.reward();
    }

    double value(ObjectiveKind kind, const Vector& theta) const {
        switch (kind) {
            case ObjectiveKind::msbe: {
                const Vector e = bellman_residual(theta);
                return 0.5 * (d_.probabilities().array() * e.array().square()).sum();
            }
            case ObjectiveKind::mspbe: {
                const Vector g = expected_td_update(theta);
                return std::max(0.0, 0.5 * g.dot(gram_.solve(g)));
            }
            case ObjectiveKind::neu: {
                const Vector g = expected_td_update(theta);
                return 0.5 * g.squaredNorm();
            }
        }
        throw InvalidArgument("unknown objective kind");
    }

    Vector gradient(ObjectiveKind kind, const Vector& theta) const {
        switch (kind) {
            case ObjectiveKind::msbe: {
                const Vector e = bellman_residual(theta);
                return bellman_residual_map_.transpose() * (d_.probabilities().array() * e.array()).matrix();
            }
            case ObjectiveKind::mspbe:
                return exp_.a_cross.transpose() * gram_.solve(expected_td_update(theta));
            case ObjectiveKind::neu:
                return exp_.a_cross.transpose() * expected_td_update(theta);
        }
        throw InvalidArgument("unknown objective kind");
    }

    /// ||V_theta - Pi T V_theta||_D, i.e. sqrt(2 * MSPBE).
    double rmspbe(const Vector& theta) const { return std::sqrt(2.0 * value(ObjectiveKind::mspbe, theta)); }

    double regularized_value(ObjectiveKind kind, const Vector& theta, double eta) const {
        if (!(eta >= 0.0)) throw InvalidArgument("regularisation weight eta must be >= 0");
        return value(kind, theta) + eta * theta.lpNorm<1>();
    }

private:
    void check(const Vector& theta) const {
        if (static_cast<std::size_t>(theta.size()) != model_.n_features()) {
            throw DimensionMismatch("theta length differs from feature count");
        }
    }

    MdpModel model_;
    StateDistribution d_;
    ExpectationSet exp_;
    GramSolver gram_;
    Matrix bellman_residual_map_;  // Phi - gamma P Phi
};

inline double objective_value(ObjectiveKind kind, const Vector& theta, const MdpModel& model,
                              const StateDistribution& d, GramSolve mode = GramSolve::strict) {
    return ObjectiveEvaluator(model, d, mode).value(kind, theta);
}

inline Vector objective_gradient(ObjectiveKind kind, const Vector& theta, const MdpModel& model,
                                 const StateDistribution& d, GramSolve mode = GramSolve::strict) {
    return ObjectiveEvaluator(model, d, mode).gradient(kind, theta);
}

inline double regularized_value(ObjectiveKind kind, const Vector& theta, double eta, const MdpModel& model,
                                const StateDistribution& d, GramSolve mode = GramSolve::strict) {
    return ObjectiveEvaluator(model, d, mode).regularized_value(kind, theta, eta);
}

/// sqrt(g^T C^{-1} g) from precomputed expectations.
inline double rmspbe(const Vector& theta, const ExpectationSet& exp, GramSolve mode = GramSolve::strict) {
    const GramSolver gram(exp.c_gram, mode);
    const Vector g = exp.expected_td_update(theta);
    return std::sqrt(std::max(0.0, g.dot(gram.solve(g))));
}

}  // namespace gtd_ist
