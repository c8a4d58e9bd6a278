#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>

#include "gtd_ist/errors.hpp"
#include "gtd_ist/mdp_model.hpp"
#include "gtd_ist/objectives.hpp"
#include "gtd_ist/prox.hpp"

namespace gtd_ist {

/// One sampled step (phi, r, phi', rho). rho is the importance ratio of the
/// action taken; 1 for on-policy data.
struct Transition {
    Vector phi;
    double reward = 0.0;
    Vector phi_next;
    double rho = 1.0;
};

enum class Schedule { constant, decaying };

/// alpha_t = alpha / (1 + t * decay_rate) under the decaying schedule; same for beta.
struct StepSizes {
    double alpha = 0.1;
    double beta = 0.01;
    Schedule schedule = Schedule::constant;
    double decay_rate = 0.0;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
        if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive");
        if (!(decay_rate >= 0.0)) throw InvalidArgument("decay rate must be >= 0");
    }

    double alpha_at(std::uint64_t t) const { return alpha * scale(t); }
    double beta_at(std::uint64_t t) const { return beta * scale(t); }

private:
    double scale(std::uint64_t t) const {
        return schedule == Schedule::constant ? 1.0 : 1.0 / (1.0 + static_cast<double>(t) * decay_rate);
    }
};

enum class AlgorithmKind { td0, gtd, gtd_ist, gtd2, gtd2_ist, tdc, tdc_ist };

inline constexpr AlgorithmKind kAllAlgorithms[] = {AlgorithmKind::td0,  AlgorithmKind::gtd,
                                                   AlgorithmKind::gtd_ist, AlgorithmKind::gtd2,
                                                   AlgorithmKind::gtd2_ist, AlgorithmKind::tdc,
                                                   AlgorithmKind::tdc_ist};

inline const char* to_string(AlgorithmKind kind) {
    switch (kind) {
        case AlgorithmKind::td0: return "TD0";
        case AlgorithmKind::gtd: return "GTD";
        case AlgorithmKind::gtd_ist: return "GTD-IST";
        case AlgorithmKind::gtd2: return "GTD2";
        case AlgorithmKind::gtd2_ist: return "GTD2-IST";
        case AlgorithmKind::tdc: return "TDC";
        case AlgorithmKind::tdc_ist: return "TDC-IST";
    }
    return "?";
}

/// Accepts "GTD-IST", "gtd_ist", "gtd-ist" etc.
inline std::optional<AlgorithmKind> parse_algorithm(std::string_view name) {
    std::string key;
    for (char c : name) {
        if (c == '-') c = '_';
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (auto kind : kAllAlgorithms) {
        std::string candidate = to_string(kind);
        for (auto& c : candidate) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (candidate == key) return kind;
    }
    if (key == "td" || key == "td_0") return AlgorithmKind::td0;
    return std::nullopt;
}

inline bool uses_prox(AlgorithmKind kind) {
    return kind == AlgorithmKind::gtd_ist || kind == AlgorithmKind::gtd2_ist || kind == AlgorithmKind::tdc_ist;
}

inline bool has_aux(AlgorithmKind kind) { return kind != AlgorithmKind::td0; }

/// Unregularised counterpart of an IST learner (identity otherwise).
inline AlgorithmKind base_algorithm(AlgorithmKind kind) {
    switch (kind) {
        case AlgorithmKind::gtd_ist: return AlgorithmKind::gtd;
        case AlgorithmKind::gtd2_ist: return AlgorithmKind::gtd2;
        case AlgorithmKind::tdc_ist: return AlgorithmKind::tdc;
        default: return kind;
    }
}

/// Everything one online learner carries between steps. `aux` is u for
/// GTD-type learners, w for GTD2/TDC-type learners and empty for TD(0).
struct LearnerState {
    Vector theta;
    Vector aux;
    double eta = 0.0;
    double gamma = 0.95;
    StepSizes steps;
    std::uint64_t t = 0;
};

inline constexpr double kDivergenceLimit = 1e12;

inline LearnerState make_learner_state(AlgorithmKind kind, Vector theta0, double eta, double gamma,
                                       StepSizes steps) {
    steps.validate();
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be finite and >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
    if (theta0.size() < 1 || !theta0.allFinite()) throw InvalidArgument("initial theta must be finite and non-empty");
    LearnerState s;
    s.aux = has_aux(kind) ? Vector::Zero(theta0.size()) : Vector();
    s.theta = std::move(theta0);
    s.eta = eta;
    s.gamma = gamma;
    s.steps = steps;
    return s;
}

/// delta = r + theta^T (gamma phi' - phi).
inline double td_error(const Transition& trans, const Vector& theta, double gamma) {
    if (trans.phi.size() != theta.size() || trans.phi_next.size() != theta.size()) {
        throw DimensionMismatch("transition features and theta differ in length");
    }
    return trans.reward + gamma * theta.dot(trans.phi_next) - theta.dot(trans.phi);
}

namespace detail {

inline void guard_divergence(const LearnerState& s, AlgorithmKind kind) {
    const auto out_of_range = [](const Vector& v) {
        return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kDivergenceLimit);
    };
    if (out_of_range(s.theta) || out_of_range(s.aux)) {
        throw Divergence(std::string(to_string(kind)) + " diverged at step " + std::to_string(s.t) +
                         "; step sizes are too large for this problem");
    }
}

}  // namespace detail

/// One online update. Both right-hand sides are evaluated from the time-t
/// values (theta_t, aux_t) before either is assigned.
///
///   TD0   theta += alpha rho delta phi
///   GTD   g = rho (phi^T u)(gamma phi' - phi)         u += beta (rho delta phi - u)
///   GTD2  g = rho (phi^T w)(gamma phi' - phi)         w += beta (rho delta - phi^T w) phi
///   TDC   g = rho (gamma (phi^T w) phi' - delta phi)  same w recursion
///   theta <- Psi_{alpha eta}(theta - alpha g) for the IST variants, theta - alpha g otherwise.
inline LearnerState step(LearnerState state, AlgorithmKind kind, const Transition& trans) {
    const double delta = td_error(trans, state.theta, state.gamma);
    const double alpha = state.steps.alpha_at(state.t);
    const double beta = state.steps.beta_at(state.t);
    const double rho = trans.rho;
    const double gamma = state.gamma;

    if (kind == AlgorithmKind::td0) {
        state.theta.noalias() += (alpha * rho * delta) * trans.phi;
    } else {
        if (state.aux.size() != state.theta.size()) throw DimensionMismatch("auxiliary vector has wrong length");
        const double phi_aux = trans.phi.dot(state.aux);
        switch (base_algorithm(kind)) {
            case AlgorithmKind::gtd:
            case AlgorithmKind::gtd2:
                // theta - alpha * rho (phi^T aux)(gamma phi' - phi)
                state.theta.noalias() -= (alpha * rho * phi_aux * gamma) * trans.phi_next;
                state.theta.noalias() += (alpha * rho * phi_aux) * trans.phi;
                break;
            case AlgorithmKind::tdc:
                state.theta.noalias() -= (alpha * rho * gamma * phi_aux) * trans.phi_next;
                state.theta.noalias() += (alpha * rho * delta) * trans.phi;
                break;
            default:
                throw InvalidArgument("unsupported algorithm kind");
        }
        if (uses_prox(kind)) soft_threshold_inplace(state.theta, Threshold(alpha * state.eta));

        if (base_algorithm(kind) == AlgorithmKind::gtd) {
            state.aux *= (1.0 - beta);
            state.aux.noalias() += (beta * rho * delta) * trans.phi;
        } else {
            state.aux.noalias() += (beta * (rho * delta - phi_aux)) * trans.phi;
        }
    }
    ++state.t;
    detail::guard_divergence(state, kind);
    return state;
}

/// Stochastic gradient estimate used by `step` for the gradient-TD learners,
/// evaluated at (theta, aux) without updating anything.
inline Vector stochastic_gradient(AlgorithmKind kind, const Transition& trans, const Vector& theta,
                                  const Vector& aux, double gamma) {
    const double phi_aux = trans.phi.dot(aux);
    switch (base_algorithm(kind)) {
        case AlgorithmKind::gtd:
        case AlgorithmKind::gtd2:
            return trans.rho * phi_aux * (gamma * trans.phi_next - trans.phi);
        case AlgorithmKind::tdc:
            return trans.rho * (gamma * phi_aux * trans.phi_next - td_error(trans, theta, gamma) * trans.phi);
        default:
            throw InvalidArgument("TD(0) has no gradient estimate");
    }
}

/// One batch IST iteration: Psi_{alpha eta}(theta - alpha grad J(theta)).
inline Vector batch_ist_step(const Vector& theta, ObjectiveKind kind, const ObjectiveEvaluator& evaluator,
                             double alpha, double eta) {
    if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
    if (!(eta >= 0.0)) throw InvalidArgument("eta must be >= 0");
    Vector next = theta - alpha * evaluator.gradient(kind, theta);
    soft_threshold_inplace(next, Threshold(alpha * eta));
    return next;
}

}  // namespace gtd_ist
