#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gtd_ist/errors.hpp"
#include "gtd_ist/learners.hpp"
#include "gtd_ist/mdp_model.hpp"

namespace gtd_ist {

/// Labelled sub-streams of a run seed. Each consumer of randomness draws from
/// its own stream so adding one never shifts another.
enum class Stream : std::uint32_t { features = 1, transitions = 2 };

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

/// n x ceil(log2 n) matrix whose row i holds the bits of i (least significant first).
inline Matrix binary_encoding(std::size_t n_states) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n_states) ++bits;
    bits = std::max<std::size_t>(bits, 1);
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(bits));
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t b = 0; b < bits; ++b) {
            phi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b)) = ((s >> b) & 1u) ? 1.0 : 0.0;
        }
    }
    return phi;
}

/// State-indexed Gaussian columns, drawn once (row-major) and then frozen.
inline Matrix gaussian_columns(std::size_t n_states, std::size_t n_cols, double sigma, std::mt19937_64& rng) {
    Matrix noise(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_cols));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index s = 0; s < noise.rows(); ++s) {
        for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(s, j) = sigma * normal(rng);
    }
    return noise;
}

namespace detail {

inline Matrix hstack(const Matrix& left, const Matrix& right) {
    Matrix out(left.rows(), left.cols() + right.cols());
    out << left, right;
    return out;
}

inline std::size_t sample_index(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    Eigen::Index last = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        acc += probs(i);
        last = i;
        if (u < acc) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(last);
}

}  // namespace detail

/// A sampled step together with the state indices it came from.
struct SampledStep {
    std::size_t state = 0;
    std::size_t action = 0;
    std::size_t next_state = 0;
    bool terminal = false;
    Transition transition;
};

// ---------------------------------------------------------------------------
// Random-walk chain
// ---------------------------------------------------------------------------

struct ChainConfig {
    std::size_t n_states = 7;
    double gamma = 0.95;
    std::size_t n_noise = 10;
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_states < 3) throw InvalidArgument("chain needs at least 3 states");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise sigma must be >= 0");
    }
};

/// Left/right random walk. The rightmost state is terminal (reward 1 on
/// entry, zero features); the leftmost state bounces back onto itself.
/// Episodes start at the centre state.
class ChainSampler {
public:
    ChainSampler(Matrix features, std::size_t start, std::size_t terminal, std::uint64_t seed)
        : features_(std::move(features)),
          start_(start),
          terminal_(terminal),
          state_(start),
          rng_(make_stream(seed, Stream::transitions)) {}

    void reset() { state_ = start_; }
    std::size_t state() const noexcept { return state_; }
    std::size_t start_state() const noexcept { return start_; }
    const Matrix& features() const noexcept { return features_; }

    /// Advances one step; a sampler sitting on the terminal state restarts first.
    SampledStep next() {
        if (state_ == terminal_) state_ = start_;
        const bool right = (rng_() >> 63) != 0;
        std::size_t to = right ? state_ + 1 : (state_ == 0 ? 0 : state_ - 1);
        SampledStep out;
        out.state = state_;
        out.next_state = to;
        out.terminal = to == terminal_;
        out.transition.phi = features_.row(static_cast<Eigen::Index>(state_)).transpose();
        out.transition.phi_next = features_.row(static_cast<Eigen::Index>(to)).transpose();
        out.transition.reward = out.terminal ? 1.0 : 0.0;
        out.transition.rho = 1.0;
        state_ = to;
        return out;
    }

    /// From the start state until termination or max_steps transitions.
    std::vector<Transition> sample_episode(std::size_t max_steps) {
        std::vector<Transition> episode;
        reset();
        for (std::size_t i = 0; i < max_steps; ++i) {
            SampledStep s = next();
            episode.push_back(std::move(s.transition));
            if (s.terminal) break;
        }
        return episode;
    }

private:
    Matrix features_;
    std::size_t start_;
    std::size_t terminal_;
    std::size_t state_;
    std::mt19937_64 rng_;
};

struct ChainTask {
    ChainConfig config;
    MdpModel model;
    StateDistribution restart;
    StateDistribution distribution;  // stationary distribution of the restart-augmented chain
    std::size_t start_state;
    std::size_t terminal_state;
    std::size_t n_base_features;
    ChainSampler sampler;

    const MdpModel& evaluation_model() const noexcept { return model; }
    const StateDistribution& evaluation_distribution() const noexcept { return distribution; }
};

inline MdpModel chain_model(const ChainConfig& cfg, Matrix features) {
    const auto n = static_cast<Eigen::Index>(cfg.n_states);
    const Eigen::Index terminal = n - 1;
    Matrix p = Matrix::Zero(n, n);
    Vector r = Vector::Zero(n);
    for (Eigen::Index s = 0; s < terminal; ++s) {
        p(s, s == 0 ? 0 : s - 1) += 0.5;
        p(s, s + 1) += 0.5;
        if (s + 1 == terminal) r(s) = 0.5;
    }
    p(terminal, terminal) = 1.0;
    return MdpModel(std::move(p), std::move(r), cfg.gamma, std::move(features));
}

inline ChainTask build_chain(const ChainConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_states;
    const std::size_t start = n / 2;
    const std::size_t terminal = n - 1;

    Matrix base = binary_encoding(n);
    auto rng = make_stream(cfg.seed, Stream::features);
    Matrix features = detail::hstack(base, gaussian_columns(n, cfg.n_noise, cfg.noise_sigma, rng));
    features.row(static_cast<Eigen::Index>(terminal)).setZero();

    MdpModel model = chain_model(cfg, features);
    StateDistribution restart = StateDistribution::point_mass(n, start);
    StateDistribution d = stationary_distribution(model, restart);
    return ChainTask{cfg,
                     std::move(model),
                     std::move(restart),
                     std::move(d),
                     start,
                     terminal,
                     static_cast<std::size_t>(base.cols()),
                     ChainSampler(std::move(features), start, terminal, cfg.seed)};
}

// ---------------------------------------------------------------------------
// Star (off-policy)
// ---------------------------------------------------------------------------

/// Where the dotted action leads.
enum class DottedTargets {
    outer,       ///< uniformly over all outer states
    all_others,  ///< uniformly over every state except the current one
};

struct StarConfig {
    std::size_t n_outer = 6;
    double gamma = 0.95;
    std::size_t n_noise = 20;
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;
    DottedTargets dotted = DottedTargets::outer;

    void validate() const {
        if (n_outer < 2) throw InvalidArgument("star needs at least 2 outer states");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise sigma must be >= 0");
    }
};

inline constexpr std::size_t kSolidAction = 0;
inline constexpr std::size_t kDottedAction = 1;

/// Continuing off-policy sampler: actions drawn from the behavior policy,
/// transitions carry rho = target / behavior for the action taken.
class StarSampler {
public:
    StarSampler(Matrix features, PolicyPair policies, std::uint64_t seed)
        : features_(std::move(features)),
          policies_(std::move(policies)),
          rng_(make_stream(seed, Stream::transitions)) {
        state_ = static_cast<std::size_t>(
            std::uniform_int_distribution<std::size_t>(0, policies_.n_states() - 1)(rng_));
    }

    std::size_t state() const noexcept { return state_; }
    const Matrix& features() const noexcept { return features_; }

    SampledStep next() {
        const auto s = static_cast<Eigen::Index>(state_);
        const std::size_t a = detail::sample_index(policies_.behavior().row(s), rng_);
        const std::size_t to = detail::sample_index(policies_.action_transition()[a].row(s), rng_);
        SampledStep out;
        out.state = state_;
        out.action = a;
        out.next_state = to;
        out.transition.phi = features_.row(s).transpose();
        out.transition.phi_next = features_.row(static_cast<Eigen::Index>(to)).transpose();
        out.transition.reward = 0.0;
        out.transition.rho = policies_.importance_ratio(state_, a);
        state_ = to;
        return out;
    }

    /// Exactly max_steps transitions continuing from the current state.
    std::vector<Transition> sample_episode(std::size_t max_steps) {
        std::vector<Transition> block;
        block.reserve(max_steps);
        for (std::size_t i = 0; i < max_steps; ++i) block.push_back(next().transition);
        return block;
    }

private:
    Matrix features_;
    PolicyPair policies_;
    std::mt19937_64 rng_;
    std::size_t state_ = 0;
};

struct StarTask {
    StarConfig config;
    PolicyPair policies;
    MdpModel behavior_model;
    MdpModel target_model;
    StateDistribution distribution;  // stationary distribution of the behavior chain
    std::size_t center_state;
    std::size_t n_base_features;
    StarSampler sampler;

    /// Target-policy kernel weighted by the behavior distribution.
    const MdpModel& evaluation_model() const noexcept { return target_model; }
    const StateDistribution& evaluation_distribution() const noexcept { return distribution; }
};

inline PolicyPair star_policies(const StarConfig& cfg) {
    const std::size_t n = cfg.n_outer + 1;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto center = static_cast<Eigen::Index>(cfg.n_outer);
    const auto outer = static_cast<Eigen::Index>(cfg.n_outer);

    Matrix solid = Matrix::Zero(ni, ni);
    solid.col(center).setOnes();

    Matrix dotted = Matrix::Zero(ni, ni);
    for (Eigen::Index s = 0; s < ni; ++s) {
        if (cfg.dotted == DottedTargets::outer) {
            dotted.row(s).head(outer).setConstant(1.0 / static_cast<double>(outer));
        } else {
            dotted.row(s).setConstant(1.0 / static_cast<double>(ni - 1));
            dotted(s, s) = 0.0;
        }
    }

    const double p_solid = 1.0 / static_cast<double>(n);
    Matrix behavior(ni, 2);
    behavior.col(static_cast<Eigen::Index>(kSolidAction)).setConstant(p_solid);
    behavior.col(static_cast<Eigen::Index>(kDottedAction)).setConstant(1.0 - p_solid);
    Matrix target(ni, 2);
    target.col(static_cast<Eigen::Index>(kSolidAction)).setZero();
    target.col(static_cast<Eigen::Index>(kDottedAction)).setOnes();
    return PolicyPair(std::move(behavior), std::move(target), {std::move(solid), std::move(dotted)});
}

inline StarTask build_star(const StarConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_outer + 1;
    const auto ni = static_cast<Eigen::Index>(n);

    auto rng = make_stream(cfg.seed, Stream::features);
    Matrix features = detail::hstack(Matrix::Identity(ni, ni), gaussian_columns(n, cfg.n_noise, cfg.noise_sigma, rng));

    PolicyPair policies = star_policies(cfg);
    const Vector zero_reward = Vector::Zero(ni);
    MdpModel behavior(compose_policy(policies, PolicyRole::behavior), zero_reward, cfg.gamma, features);
    MdpModel target(compose_policy(policies, PolicyRole::target), zero_reward, cfg.gamma, features);
    StateDistribution d = stationary_distribution(behavior, StateDistribution::uniform(n));
    return StarTask{cfg,
                    policies,
                    std::move(behavior),
                    std::move(target),
                    std::move(d),
                    cfg.n_outer,
                    n,
                    StarSampler(std::move(features), policies, cfg.seed)};
}

/// Free-function form shared by both samplers.
template <typename Sampler>
std::vector<Transition> sample_episode(Sampler& sampler, std::size_t max_steps) {
    return sampler.sample_episode(max_steps);
}

}  // namespace gtd_ist
