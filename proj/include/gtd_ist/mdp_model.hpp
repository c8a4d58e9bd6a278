#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gtd_ist/errors.hpp"

namespace gtd_ist {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr double kMaxConditionNumber = 1e12;

namespace detail {

inline void require_row_stochastic(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) throw InvalidArgument(std::string(what) + " has non-finite entries");
    if ((m.array() < 0.0).any()) throw InvalidArgument(std::string(what) + " has negative entries");
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
        if (std::abs(m.row(s).sum() - 1.0) > kStochasticTolerance) {
            throw InvalidArgument(std::string(what) + ": row " + std::to_string(s) +
                                  " does not sum to 1");
        }
    }
}

/// 2-norm condition number; infinite for rank-deficient input.
inline double condition_number(const Eigen::Ref<const Matrix>& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 1.0;
    const double smallest = sv(sv.size() - 1);
    if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smallest;
}

}  // namespace detail

/// Finite MDP under a fixed policy: transition kernel, expected reward per
/// state, discount and the feature matrix (row s holds phi(s)).
class MdpModel {
public:
    MdpModel(Matrix transition, Vector reward, double gamma, Matrix features)
        : transition_(std::move(transition)),
          reward_(std::move(reward)),
          gamma_(gamma),
          features_(std::move(features)) {
        const auto n = transition_.rows();
        if (n < 1 || transition_.cols() != n) {
            throw DimensionMismatch("transition matrix must be square and non-empty");
        }
        if (reward_.size() != n) throw DimensionMismatch("reward length differs from state count");
        if (features_.rows() != n) throw DimensionMismatch("feature rows differ from state count");
        if (features_.cols() < 1) throw InvalidArgument("feature matrix needs at least one column");
        detail::require_row_stochastic(transition_, "transition matrix");
        if (!reward_.allFinite()) throw InvalidArgument("reward has non-finite entries");
        if (!features_.allFinite()) throw InvalidArgument("features have non-finite entries");
        if (features_.isZero(0.0)) throw InvalidArgument("feature matrix is identically zero");
        if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
    }

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
    std::size_t n_features() const noexcept { return static_cast<std::size_t>(features_.cols()); }

    const Matrix& transition() const noexcept { return transition_; }
    const Vector& reward() const noexcept { return reward_; }
    double gamma() const noexcept { return gamma_; }
    const Matrix& features() const noexcept { return features_; }

    /// States whose row of the kernel is a self-loop with probability one.
    bool is_absorbing(std::size_t s) const {
        const auto i = static_cast<Eigen::Index>(s);
        return transition_(i, i) >= 1.0 - kStochasticTolerance;
    }

private:
    Matrix transition_;
    Vector reward_;
    double gamma_;
    Matrix features_;
};

/// Probability vector over states (the diagonal of D).
class StateDistribution {
public:
    explicit StateDistribution(Vector d) : d_(std::move(d)) {
        if (d_.size() < 1) throw InvalidArgument("state distribution is empty");
        if (!d_.allFinite() || (d_.array() < 0.0).any()) {
            throw InvalidArgument("state distribution has negative or non-finite entries");
        }
        if (std::abs(d_.sum() - 1.0) > kStochasticTolerance) {
            throw InvalidArgument("state distribution does not sum to 1");
        }
    }

    static StateDistribution point_mass(std::size_t n, std::size_t s) {
        Vector d = Vector::Zero(static_cast<Eigen::Index>(n));
        d(static_cast<Eigen::Index>(s)) = 1.0;
        return StateDistribution(std::move(d));
    }

    static StateDistribution uniform(std::size_t n) {
        return StateDistribution(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    }

    const Vector& probabilities() const noexcept { return d_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(d_.size()); }
    double operator[](std::size_t s) const { return d_(static_cast<Eigen::Index>(s)); }

private:
    Vector d_;
};

/// Behavior and target policies over a shared action-level kernel.
/// action_transition[a](s, s') = P(s, a, s').
class PolicyPair {
public:
    PolicyPair(Matrix behavior, Matrix target, std::vector<Matrix> action_transition)
        : behavior_(std::move(behavior)),
          target_(std::move(target)),
          kernel_(std::move(action_transition)) {
        const auto n = behavior_.rows();
        const auto m = behavior_.cols();
        if (n < 1 || m < 1) throw DimensionMismatch("policy matrices must be non-empty");
        if (target_.rows() != n || target_.cols() != m) {
            throw DimensionMismatch("behavior and target policy shapes differ");
        }
        if (static_cast<Eigen::Index>(kernel_.size()) != m) {
            throw DimensionMismatch("one transition kernel per action is required");
        }
        for (const auto& k : kernel_) {
            if (k.rows() != n || k.cols() != n) throw DimensionMismatch("action kernel shape mismatch");
            detail::require_row_stochastic(k, "action kernel");
        }
        detail::require_row_stochastic(behavior_, "behavior policy");
        detail::require_row_stochastic(target_, "target policy");
        if (((target_.array() > 0.0) && (behavior_.array() <= 0.0)).any()) {
            throw InvalidArgument("target policy takes an action the behavior policy never takes");
        }
    }

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(behavior_.rows()); }
    std::size_t n_actions() const noexcept { return static_cast<std::size_t>(behavior_.cols()); }
    const Matrix& behavior() const noexcept { return behavior_; }
    const Matrix& target() const noexcept { return target_; }
    const std::vector<Matrix>& action_transition() const noexcept { return kernel_; }

    /// Importance ratio target(s,a) / behavior(s,a).
    double importance_ratio(std::size_t s, std::size_t a) const {
        const auto i = static_cast<Eigen::Index>(s);
        const auto j = static_cast<Eigen::Index>(a);
        return target_(i, j) / behavior_(i, j);
    }

private:
    Matrix behavior_;
    Matrix target_;
    std::vector<Matrix> kernel_;
};

enum class PolicyRole { behavior, target };

/// State-to-state kernel sum_a pi(s,a) P(s,a,s') for the chosen policy.
inline Matrix compose_policy(const PolicyPair& pair, PolicyRole which) {
    const Matrix& policy = which == PolicyRole::behavior ? pair.behavior() : pair.target();
    const auto n = static_cast<Eigen::Index>(pair.n_states());
    Matrix p = Matrix::Zero(n, n);
    for (std::size_t a = 0; a < pair.n_actions(); ++a) {
        p += policy.col(static_cast<Eigen::Index>(a)).asDiagonal() * pair.action_transition()[a];
    }
    return p;
}

/// Solves V = r + gamma P V directly.
inline Vector true_value_function(const MdpModel& model) {
    const auto n = static_cast<Eigen::Index>(model.n_states());
    const Matrix system = Matrix::Identity(n, n) - model.gamma() * model.transition();
    Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible()) {
        throw SingularSystem("Bellman system I - gamma P is singular", detail::condition_number(system));
    }
    Vector v = lu.solve(model.reward());
    const double residual =
        (v - model.reward() - model.gamma() * model.transition() * v).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-10 * std::max(1.0, v.lpNorm<Eigen::Infinity>()))) {
        throw SingularSystem("Bellman solve left residual " + std::to_string(residual),
                             detail::condition_number(system));
    }
    return v;
}

/// Transition kernel with absorbing rows redirected to the restart distribution.
inline Matrix restart_kernel(const MdpModel& model, const StateDistribution& restart) {
    if (restart.size() != model.n_states()) {
        throw DimensionMismatch("restart distribution length differs from state count");
    }
    Matrix p = model.transition();
    for (std::size_t s = 0; s < model.n_states(); ++s) {
        if (model.is_absorbing(s)) p.row(static_cast<Eigen::Index>(s)) = restart.probabilities().transpose();
    }
    return p;
}

struct PowerIterationOptions {
    double tolerance = 1e-12;
    std::size_t max_iterations = 1'000'000;
};

/// Stationary distribution of the restart-augmented chain by power iteration.
inline StateDistribution stationary_distribution(const MdpModel& model, const StateDistribution& restart,
                                                 PowerIterationOptions opts = {}) {
    const Matrix p = restart_kernel(model, restart);
    const auto n = p.rows();
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::RowVectorXd next(n);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        next.noalias() = d * p;
        next /= next.sum();
        const double change = (next - d).lpNorm<Eigen::Infinity>();
        d.swap(next);
        if (change < opts.tolerance) {
            d = d.cwiseMax(0.0);
            d /= d.sum();
            return StateDistribution(d.transpose());
        }
    }
    throw NonConvergence("power iteration did not reach tolerance within " +
                         std::to_string(opts.max_iterations) + " iterations");
}

namespace detail {

inline Matrix weighted(const MdpModel& model, const StateDistribution& d) {
    if (d.size() != model.n_states()) throw DimensionMismatch("distribution length differs from state count");
    return model.features().transpose() * d.probabilities().asDiagonal();
}

}  // namespace detail

/// Unregularised TD solution: A theta = b with A = Phi^T D (Phi - gamma P Phi), b = Phi^T D r.
inline Vector td_fixed_point(const MdpModel& model, const StateDistribution& d) {
    const Matrix phi_d = detail::weighted(model, d);
    const Matrix& phi = model.features();
    const Matrix a = phi_d * (phi - model.gamma() * model.transition() * phi);
    const Vector b = phi_d * model.reward();
    const double cond = detail::condition_number(a);
    if (!(cond <= kMaxConditionNumber)) {
        throw SingularSystem("TD system matrix is singular; the TD solution is not unique", cond);
    }
    return a.fullPivLu().solve(b);
}

}  // namespace gtd_ist
