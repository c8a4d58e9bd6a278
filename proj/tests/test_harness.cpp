#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "gtd_ist/harness.hpp"

using namespace gtd_ist;

namespace {

ExperimentConfig small_config(EnvironmentKind env = EnvironmentKind::chain) {
    ExperimentConfig cfg;
    cfg.environment = env;
    cfg.episodes = 20;
    cfg.eval_every = 5;
    cfg.n_seeds = 3;
    cfg.steps_per_episode = 20;
    AlgorithmSpec gtd;
    gtd.label = "GTD";
    gtd.kind = AlgorithmKind::gtd;
    AlgorithmSpec ist = gtd;
    ist.label = "GTD-IST";
    ist.kind = AlgorithmKind::gtd_ist;
    ist.eta = 0.01;
    ist.init = InitScheme::unfavorable;
    cfg.algorithms = {gtd, ist};
    return cfg;
}

std::string to_csv(const ExperimentTrace& trace) {
    std::ostringstream out;
    write_csv(trace, out);
    return out.str();
}

}  // namespace

TEST(Csv, HeaderOnlyForEmptyTrace) {
    EXPECT_EQ(to_csv(ExperimentTrace{}), std::string(kCsvHeader) + "\n");
    std::istringstream in(to_csv(ExperimentTrace{}));
    EXPECT_TRUE(read_csv(in).records.empty());
}

TEST(Csv, SingleRecordRoundTrip) {
    ExperimentTrace trace;
    trace.records.push_back(TraceRecord{"TDC-IST", 7, 40, 0.1 + 0.2, 5, 0.0});
    const std::string text = to_csv(trace);
    EXPECT_EQ(text, std::string(kCsvHeader) + "\nTDC-IST,7,40,0.30000000000000004,5,0\n");
    std::istringstream in(text);
    EXPECT_EQ(read_csv(in), trace);
}

TEST(Csv, RejectsMalformedInput) {
    std::istringstream bad_header("a,b,c\n");
    EXPECT_THROW(read_csv(bad_header), IoError);
    std::istringstream short_row(std::string(kCsvHeader) + "\nGTD,1,2\n");
    EXPECT_THROW(read_csv(short_row), IoError);
    std::istringstream bad_number(std::string(kCsvHeader) + "\nGTD,x,2,0.1,1,0\n");
    EXPECT_THROW(read_csv(bad_number), IoError);
    EXPECT_THROW(parse_csv("/nonexistent/trace.csv"), IoError);
}

TEST(Harness, TraceRoundTripsThroughFile) {
    const ExperimentTrace trace = run_experiment(small_config());
    const std::string path = ::testing::TempDir() + "harness_roundtrip.csv";
    emit_csv(trace, path);
    EXPECT_EQ(parse_csv(path), trace);
    std::remove(path.c_str());
}

TEST(Harness, RecordLayout) {
    const ExperimentTrace trace = run_experiment(small_config());
    // 2 algorithms x 3 seeds x evaluations at 0, 5, 10, 15, 20.
    ASSERT_EQ(trace.records.size(), 30u);
    EXPECT_EQ(trace.records.front().algorithm, "GTD");
    EXPECT_EQ(trace.records.front().episode, 0u);
    EXPECT_EQ(trace.records.back().algorithm, "GTD-IST");
    EXPECT_EQ(trace.records.back().episode, 20u);
    for (const auto& r : trace.records) EXPECT_EQ(r.wall_ms, 0.0);
    // Unfavorable init: only the 10 noise coordinates start non-zero.
    EXPECT_EQ(trace.records[15].nnz, 10u);
}

TEST(Harness, IdenticalConfigsGiveIdenticalCsv) {
    for (auto env : {EnvironmentKind::chain, EnvironmentKind::star}) {
        const ExperimentConfig cfg = small_config(env);
        EXPECT_EQ(to_csv(run_experiment(cfg)), to_csv(run_experiment(cfg)));
    }
}

TEST(Harness, ThreadCountDoesNotChangeResult) {
    const ExperimentConfig cfg = small_config();
    setenv("GTD_IST_THREADS", "1", 1);
    const std::string serial = to_csv(run_experiment(cfg));
    setenv("GTD_IST_THREADS", "4", 1);
    const std::string parallel = to_csv(run_experiment(cfg));
    unsetenv("GTD_IST_THREADS");
    EXPECT_EQ(serial, parallel);
}

TEST(Harness, SeedsAreIndependent) {
    ExperimentConfig cfg = small_config();
    const ExperimentTrace all = run_experiment(cfg);
    // Seed 2 alone reproduces the seed-2 rows of the three-seed run.
    cfg.base_seed = 2;
    cfg.n_seeds = 1;
    const ExperimentTrace one = run_experiment(cfg);
    std::vector<TraceRecord> expected;
    for (const auto& r : all.records) {
        if (r.seed == 2) expected.push_back(r);
    }
    EXPECT_EQ(one.records, expected);
    // Different seeds give different curves.
    EXPECT_NE(all.records[4].rmspbe, all.records[9].rmspbe);
}

TEST(Harness, ZeroEpisodesRecordsInitialPoint) {
    ExperimentConfig cfg = small_config();
    cfg.episodes = 0;
    const ExperimentTrace trace = run_experiment(cfg);
    ASSERT_EQ(trace.records.size(), 6u);
    for (const auto& r : trace.records) EXPECT_EQ(r.episode, 0u);
}

TEST(Harness, ObserverSeesEveryEvaluation) {
    const ExperimentConfig cfg = small_config();
    std::vector<std::size_t> seen;
    const RunResult run = run_single(cfg, cfg.algorithms[1], 0, [&](std::size_t ep, const LearnerState& s, double v) {
        seen.push_back(ep);
        EXPECT_EQ(s.theta.size(), 13);
        EXPECT_GE(v, 0.0);
    });
    EXPECT_EQ(seen, (std::vector<std::size_t>{0, 5, 10, 15, 20}));
    EXPECT_EQ(run.n_base_features, 3u);
}

TEST(Harness, DivergenceNamesTheRun) {
    ExperimentConfig cfg = small_config();
    cfg.algorithms.resize(1);
    cfg.algorithms[0].alpha = 1e3;
    cfg.algorithms[0].beta = 1e3;
    cfg.n_seeds = 1;
    try {
        run_experiment(cfg);
        FAIL() << "expected divergence";
    } catch (const RunDiverged& e) {
        EXPECT_EQ(e.label(), "GTD");
        EXPECT_EQ(e.seed(), 0u);
    }
}

TEST(Summary, MatchesTwoPassOracle) {
    ExperimentTrace trace;
    const double values[] = {0.3, 0.1, 0.7, 0.25};
    for (std::uint64_t s = 0; s < 4; ++s) trace.records.push_back(TraceRecord{"A", s, 10, values[s], 0, 0});
    trace.records.push_back(TraceRecord{"B", 0, 10, 0.5, 0, 0});
    const auto rows = summarize(trace);
    ASSERT_EQ(rows.size(), 2u);
    double mean = 0;
    for (double v : values) mean += v / 4;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(rows[0].mean, mean, 1e-15);
    EXPECT_NEAR(rows[0].std_error, std::sqrt(ss / 3) / 2, 1e-15);
    EXPECT_EQ(rows[0].n_seeds, 4u);
    EXPECT_EQ(rows[1].std_error, 0.0);
    EXPECT_THROW(summarize(ExperimentTrace{}), InvalidArgument);
}

TEST(Config, ParsesExperimentDescription) {
    std::istringstream in(R"(environment = star
episodes = 50
eval_every = 5
n_seeds = 4
gamma = 0.9
noise_sigma = 0.2

[GTD2-IST]
alpha = 0.01
beta = 0.1
eta = 1
init = unfavorable

[fast]
kind = tdc
schedule = decaying
decay_rate = 0.001
)");
    const ExperimentConfig cfg = parse_config(in);
    EXPECT_EQ(cfg.environment, EnvironmentKind::star);
    EXPECT_EQ(cfg.episodes, 50u);
    EXPECT_EQ(cfg.n_seeds, 4u);
    EXPECT_EQ(cfg.gamma(), 0.9);
    EXPECT_EQ(cfg.star.noise_sigma, 0.2);
    ASSERT_EQ(cfg.algorithms.size(), 2u);
    EXPECT_EQ(cfg.algorithms[0].kind, AlgorithmKind::gtd2_ist);
    EXPECT_EQ(cfg.algorithms[0].eta, 1.0);
    EXPECT_EQ(cfg.algorithms[0].init, InitScheme::unfavorable);
    EXPECT_EQ(cfg.algorithms[1].label, "fast");
    EXPECT_EQ(cfg.algorithms[1].kind, AlgorithmKind::tdc);
    EXPECT_EQ(cfg.algorithms[1].schedule, Schedule::decaying);
}

TEST(Config, RejectsBadInput) {
    const char* cases[] = {
        "episodes = 10\n",                              // no algorithms
        "bogus = 1\n[GTD]\n",                           // unknown key
        "environment = maze\n[GTD]\n",                  // unknown environment
        "episodes = -3\n[GTD]\n",                       // negative count
        "n_seeds = 0\n[GTD]\n",                         // no seeds
        "[GTD]\nalpha = fast\n",                        // not a number
        "[GTD]\nalpha = 0\n",                           // non-positive step
        "[mine]\nalpha = 0.1\n",                        // label is not an algorithm, no kind
        "[GTD]\nkind = lstd\n",                         // unknown kind
        "[GTD]\ncolor = red\n",                         // unknown section key
        "[GTD]\ninit = random\n",                       // unknown init
        "gamma = 1.0\n[GTD]\n",                         // gamma out of range
        "[GTD\n",                                       // syntax error
    };
    for (const char* text : cases) {
        std::istringstream in(text);
        EXPECT_THROW(parse_config(in), ConfigError) << text;
    }
    EXPECT_THROW(load_config("/nonexistent/experiment.ini"), ConfigError);
}

TEST(Harness, InitialTheta) {
    EXPECT_EQ(initial_theta(InitScheme::zeros, 4, 2), Vector::Zero(4));
    Vector expected(4);
    expected << 0, 0, 1, 1;
    EXPECT_EQ(initial_theta(InitScheme::unfavorable, 4, 2), expected);
    EXPECT_EQ(initial_theta(InitScheme::ones, 4, 2), Vector::Ones(4));
    Vector theta(4);
    theta << 0, 1e-13, -2, 3;
    EXPECT_EQ(count_nonzero(theta), 2u);
}
