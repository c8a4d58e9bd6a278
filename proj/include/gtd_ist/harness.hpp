#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gtd_ist/envs.hpp"
#include "gtd_ist/errors.hpp"
#include "gtd_ist/learners.hpp"
#include "gtd_ist/objectives.hpp"

namespace gtd_ist {

enum class EnvironmentKind { chain, star };

/// Initial parameter vector: all zeros, ones on the noise columns only
/// ("unfavorable"), or all ones.
enum class InitScheme { zeros, unfavorable, ones };

struct AlgorithmSpec {
    std::string label;
    AlgorithmKind kind = AlgorithmKind::gtd;
    double alpha = 0.1;
    double beta = 0.01;
    double eta = 0.0;
    InitScheme init = InitScheme::zeros;
    Schedule schedule = Schedule::constant;
    double decay_rate = 0.0;

    StepSizes step_sizes() const { return StepSizes{alpha, beta, schedule, decay_rate}; }
};

struct ExperimentConfig {
    EnvironmentKind environment = EnvironmentKind::chain;
    ChainConfig chain;
    StarConfig star;
    std::vector<AlgorithmSpec> algorithms;
    std::size_t episodes = 2000;
    std::size_t steps_per_episode = 100;     // star: transitions per evaluation block
    std::size_t max_episode_steps = 100000;  // chain: truncation of a single episode
    std::size_t eval_every = 10;
    std::size_t n_seeds = 30;
    std::uint64_t base_seed = 0;
    bool record_wall_time = false;

    void validate() const {
        if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        if (steps_per_episode < 1) throw ConfigError("steps_per_episode must be >= 1");
        if (max_episode_steps < 1) throw ConfigError("max_episode_steps must be >= 1");
        if (algorithms.empty()) throw ConfigError("at least one algorithm is required");
        try {
            chain.validate();
            star.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        std::vector<std::string> labels;
        for (const auto& a : algorithms) {
            if (a.label.empty()) throw ConfigError("algorithm label must not be empty");
            if (a.label.find_first_of(",\"\r\n") != std::string::npos) {
                throw ConfigError("algorithm label '" + a.label + "' contains a CSV metacharacter");
            }
            if (!(a.alpha > 0.0) || !(a.beta > 0.0)) throw ConfigError(a.label + ": alpha and beta must be positive");
            if (!(a.eta >= 0.0)) throw ConfigError(a.label + ": eta must be >= 0");
            if (!(a.decay_rate >= 0.0)) throw ConfigError(a.label + ": decay_rate must be >= 0");
            labels.push_back(a.label);
        }
        std::sort(labels.begin(), labels.end());
        if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
            throw ConfigError("algorithm labels must be unique");
        }
    }

    double gamma() const { return environment == EnvironmentKind::chain ? chain.gamma : star.gamma; }
};

struct TraceRecord {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::size_t episode = 0;
    double rmspbe = 0.0;
    std::size_t nnz = 0;
    double wall_ms = 0.0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct ExperimentTrace {
    std::vector<TraceRecord> records;

    friend bool operator==(const ExperimentTrace&, const ExperimentTrace&) = default;
};

/// A learner diverged inside a harness run; carries the offending run.
class RunDiverged : public Divergence {
public:
    RunDiverged(std::string label, std::uint64_t seed, const std::string& cause)
        : Divergence(label + " (seed " + std::to_string(seed) + "): " + cause),
          label_(std::move(label)),
          seed_(seed) {}

    const std::string& label() const noexcept { return label_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::string label_;
    std::uint64_t seed_;
};

inline constexpr double kNonzeroThreshold = 1e-12;

inline std::size_t count_nonzero(const Eigen::Ref<const Vector>& theta) {
    return static_cast<std::size_t>((theta.array().abs() > kNonzeroThreshold).count());
}

inline Vector initial_theta(InitScheme init, std::size_t n_features, std::size_t n_base) {
    const auto k = static_cast<Eigen::Index>(n_features);
    switch (init) {
        case InitScheme::zeros: return Vector::Zero(k);
        case InitScheme::ones: return Vector::Ones(k);
        case InitScheme::unfavorable: {
            Vector theta = Vector::Ones(k);
            theta.head(static_cast<Eigen::Index>(std::min(n_base, n_features))).setZero();
            return theta;
        }
    }
    throw InvalidArgument("unknown init scheme");
}

/// Called at every evaluation point of a run with (episode, state, rmspbe).
using EvalObserver = std::function<void(std::size_t, const LearnerState&, double)>;

struct RunResult {
    std::vector<TraceRecord> records;
    LearnerState final_state;
    std::size_t n_base_features = 0;
};

namespace detail {

template <typename Task, typename Advance>
RunResult run_task(const ExperimentConfig& cfg, const AlgorithmSpec& spec, std::uint64_t seed, Task& task,
                   Advance&& advance_episode, const EvalObserver& observer) {
    const ObjectiveEvaluator evaluator(task.evaluation_model(), task.evaluation_distribution(),
                                       GramSolve::pseudo_inverse);
    const std::size_t k = task.evaluation_model().n_features();
    RunResult result;
    result.n_base_features = task.n_base_features;
    LearnerState state = make_learner_state(spec.kind, initial_theta(spec.init, k, task.n_base_features), spec.eta,
                                            cfg.gamma(), spec.step_sizes());
    const auto started = std::chrono::steady_clock::now();

    auto evaluate = [&](std::size_t episode) {
        const double value = evaluator.rmspbe(state.theta);
        double wall = 0.0;
        if (cfg.record_wall_time) {
            wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        }
        result.records.push_back(TraceRecord{spec.label, seed, episode, value, count_nonzero(state.theta), wall});
        if (observer) observer(episode, state, value);
    };

    evaluate(0);
    try {
        for (std::size_t ep = 1; ep <= cfg.episodes; ++ep) {
            advance_episode(state);
            if (ep % cfg.eval_every == 0 || ep == cfg.episodes) evaluate(ep);
        }
    } catch (const Divergence& e) {
        throw RunDiverged(spec.label, seed, e.what());
    }
    result.final_state = std::move(state);
    return result;
}

}  // namespace detail

/// One (algorithm, seed) run; the environment is rebuilt from `seed`.
inline RunResult run_single(const ExperimentConfig& cfg, const AlgorithmSpec& spec, std::uint64_t seed,
                            const EvalObserver& observer = {}) {
    const AlgorithmKind kind = spec.kind;
    if (cfg.environment == EnvironmentKind::chain) {
        ChainConfig cc = cfg.chain;
        cc.seed = seed;
        ChainTask task = build_chain(cc);
        const std::size_t cap = cfg.max_episode_steps;
        return detail::run_task(cfg, spec, seed, task,
                                [&](LearnerState& state) {
                                    task.sampler.reset();
                                    for (std::size_t i = 0; i < cap; ++i) {
                                        SampledStep s = task.sampler.next();
                                        state = step(std::move(state), kind, s.transition);
                                        if (s.terminal) break;
                                    }
                                },
                                observer);
    }
    StarConfig sc = cfg.star;
    sc.seed = seed;
    StarTask task = build_star(sc);
    const std::size_t block = cfg.steps_per_episode;
    return detail::run_task(cfg, spec, seed, task,
                            [&](LearnerState& state) {
                                for (std::size_t i = 0; i < block; ++i) {
                                    state = step(std::move(state), kind, task.sampler.next().transition);
                                }
                            },
                            observer);
}

/// Worker count: GTD_IST_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
inline unsigned worker_count(std::size_t n_tasks) {
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GTD_IST_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) workers = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n_tasks, 1)));
}

/// Sorts records by (algorithm, seed, episode).
inline void sort_records(std::vector<TraceRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
        return std::tie(a.algorithm, a.seed, a.episode) < std::tie(b.algorithm, b.seed, b.episode);
    });
}

/// Every algorithm against every seed in [base_seed, base_seed + n_seeds).
/// Runs are independent and may execute concurrently; the merged trace is
/// sorted, so the result does not depend on scheduling.
inline ExperimentTrace run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Job {
        const AlgorithmSpec* spec;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto& spec : cfg.algorithms) {
        for (std::size_t i = 0; i < cfg.n_seeds; ++i) jobs.push_back({&spec, cfg.base_seed + i});
    }

    std::vector<std::vector<TraceRecord>> outputs(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                outputs[j] = run_single(cfg, *jobs[j].spec, jobs[j].seed).records;
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };

    const unsigned n_workers = worker_count(jobs.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    ExperimentTrace trace;
    for (auto& out : outputs) {
        trace.records.insert(trace.records.end(), std::make_move_iterator(out.begin()),
                             std::make_move_iterator(out.end()));
    }
    sort_records(trace.records);
    return trace;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "algorithm,seed,episode,rmspbe,nnz,wall_ms";

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(const ExperimentTrace& trace, std::ostream& out) {
    std::vector<TraceRecord> rows = trace.records;
    sort_records(rows);
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.algorithm << ',' << r.seed << ',' << r.episode << ',' << format_double(r.rmspbe) << ',' << r.nnz
            << ',' << format_double(r.wall_ms) << '\n';
    }
}

inline void emit_csv(const ExperimentTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(trace, out);
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline ExperimentTrace read_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw IoError(source + ": missing or unexpected CSV header");
    }
    ExperimentTrace trace;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (fields.size() != 6) throw IoError(source + ":" + std::to_string(line_no) + ": expected 6 fields");
        try {
            TraceRecord r;
            r.algorithm = fields[0];
            r.seed = std::stoull(fields[1]);
            r.episode = static_cast<std::size_t>(std::stoull(fields[2]));
            r.rmspbe = std::strtod(fields[3].c_str(), nullptr);
            r.nnz = static_cast<std::size_t>(std::stoull(fields[4]));
            r.wall_ms = std::strtod(fields[5].c_str(), nullptr);
            trace.records.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw IoError(source + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return trace;
}

inline ExperimentTrace parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return read_csv(in, path);
}

// ---------------------------------------------------------------------------
// Summary statistics
// ---------------------------------------------------------------------------

struct SummaryRow {
    std::string algorithm;
    std::size_t episode = 0;
    double mean = 0.0;
    double std_error = 0.0;  // sample standard deviation / sqrt(n); 0 when n = 1
    std::size_t n_seeds = 0;
};

/// Mean and standard error of RMSPBE across seeds per (algorithm, episode),
/// accumulated with Welford's update.
inline std::vector<SummaryRow> summarize(const ExperimentTrace& trace) {
    if (trace.records.empty()) throw InvalidArgument("cannot summarise an empty trace");
    struct Acc {
        std::size_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
    };
    std::map<std::pair<std::string, std::size_t>, Acc> acc;
    for (const auto& r : trace.records) {
        Acc& a = acc[{r.algorithm, r.episode}];
        ++a.n;
        const double delta = r.rmspbe - a.mean;
        a.mean += delta / static_cast<double>(a.n);
        a.m2 += delta * (r.rmspbe - a.mean);
    }
    std::vector<SummaryRow> rows;
    rows.reserve(acc.size());
    for (const auto& [key, a] : acc) {
        SummaryRow row;
        row.algorithm = key.first;
        row.episode = key.second;
        row.mean = a.mean;
        row.n_seeds = a.n;
        if (a.n > 1) {
            const double var = a.m2 / static_cast<double>(a.n - 1);
            row.std_error = std::sqrt(var / static_cast<double>(a.n));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    in >> value;
    if (!in || !(in >> std::ws).eof()) throw ConfigError("'" + key + "': cannot parse '" + text + "'");
    if constexpr (std::is_unsigned_v<T>) {
        if (text.find('-') != std::string::npos) throw ConfigError("'" + key + "' must be non-negative");
    }
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("'" + key + "': expected a boolean, got '" + text + "'");
}

inline AlgorithmSpec parse_algorithm_section(const std::string& label, const boost::property_tree::ptree& section) {
    AlgorithmSpec spec;
    spec.label = label;
    std::optional<AlgorithmKind> kind = parse_algorithm(label);
    for (const auto& [key, node] : section) {
        const std::string value = node.get_value<std::string>();
        const std::string where = "[" + label + "] " + key;
        if (!node.empty()) throw ConfigError(where + ": nested sections are not supported");
        if (key == "kind") {
            kind = parse_algorithm(value);
            if (!kind) throw ConfigError(where + ": unknown algorithm '" + value + "'");
        } else if (key == "alpha") {
            spec.alpha = parse_number<double>(where, value);
        } else if (key == "beta") {
            spec.beta = parse_number<double>(where, value);
        } else if (key == "eta") {
            spec.eta = parse_number<double>(where, value);
        } else if (key == "decay_rate") {
            spec.decay_rate = parse_number<double>(where, value);
        } else if (key == "init") {
            if (value == "zeros") spec.init = InitScheme::zeros;
            else if (value == "unfavorable") spec.init = InitScheme::unfavorable;
            else if (value == "ones") spec.init = InitScheme::ones;
            else throw ConfigError(where + ": expected zeros|unfavorable|ones");
        } else if (key == "schedule") {
            if (value == "constant") spec.schedule = Schedule::constant;
            else if (value == "decaying") spec.schedule = Schedule::decaying;
            else throw ConfigError(where + ": expected constant|decaying");
        } else {
            throw ConfigError(where + ": unknown key");
        }
    }
    if (!kind) throw ConfigError("[" + label + "]: 'kind' is required when the label is not an algorithm name");
    spec.kind = *kind;
    return spec;
}

}  // namespace detail

/// Parses the INI-style experiment description:
///
///     environment = chain          ; chain | star
///     episodes = 2000
///     eval_every = 10
///     n_seeds = 30
///     gamma = 0.95
///
///     [GTD-IST]                    ; one section per algorithm, name = label
///     kind = gtd_ist               ; optional when the label names the algorithm
///     alpha = 0.1
///     beta = 0.01
///     eta = 0.001
inline ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }

    ExperimentConfig cfg;
    std::optional<double> gamma;
    std::optional<std::size_t> n_noise;
    std::optional<double> noise_sigma;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) {
            cfg.algorithms.push_back(detail::parse_algorithm_section(key, node));
            continue;
        }
        const std::string value = node.get_value<std::string>();
        using detail::parse_number;
        if (key == "environment") {
            if (value == "chain") cfg.environment = EnvironmentKind::chain;
            else if (value == "star") cfg.environment = EnvironmentKind::star;
            else throw ConfigError("environment: expected chain|star, got '" + value + "'");
        } else if (key == "episodes") {
            cfg.episodes = parse_number<std::size_t>(key, value);
        } else if (key == "steps_per_episode") {
            cfg.steps_per_episode = parse_number<std::size_t>(key, value);
        } else if (key == "max_episode_steps") {
            cfg.max_episode_steps = parse_number<std::size_t>(key, value);
        } else if (key == "eval_every") {
            cfg.eval_every = parse_number<std::size_t>(key, value);
        } else if (key == "n_seeds") {
            cfg.n_seeds = parse_number<std::size_t>(key, value);
        } else if (key == "base_seed") {
            cfg.base_seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "record_wall_time") {
            cfg.record_wall_time = detail::parse_bool(key, value);
        } else if (key == "gamma") {
            gamma = parse_number<double>(key, value);
        } else if (key == "n_noise") {
            n_noise = parse_number<std::size_t>(key, value);
        } else if (key == "noise_sigma") {
            noise_sigma = parse_number<double>(key, value);
        } else if (key == "n_states") {
            cfg.chain.n_states = parse_number<std::size_t>(key, value);
        } else if (key == "n_outer") {
            cfg.star.n_outer = parse_number<std::size_t>(key, value);
        } else if (key == "dotted") {
            if (value == "outer") cfg.star.dotted = DottedTargets::outer;
            else if (value == "all_others") cfg.star.dotted = DottedTargets::all_others;
            else throw ConfigError("dotted: expected outer|all_others");
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    if (gamma) cfg.chain.gamma = cfg.star.gamma = *gamma;
    if (n_noise) cfg.chain.n_noise = cfg.star.n_noise = *n_noise;
    if (noise_sigma) cfg.chain.noise_sigma = cfg.star.noise_sigma = *noise_sigma;
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(in);
}

}  // namespace gtd_ist
