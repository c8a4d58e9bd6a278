// Command-line front end for running GTD-IST experiments.
//
//   gtd-ist run --config experiment.ini --out trace.csv [--seeds N] [--quiet] [--timing]
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 learner divergence.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gtd_ist/gtd_ist.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;

void print_final_summary(const gtd_ist::ExperimentTrace& trace) {
    // Last evaluation point per algorithm.
    std::map<std::string, gtd_ist::SummaryRow> last;
    for (const auto& row : gtd_ist::summarize(trace)) last[row.algorithm] = row;
    std::fprintf(stderr, "%-20s %10s %14s %14s %6s\n", "algorithm", "episode", "mean RMSPBE", "std. error", "seeds");
    for (const auto& [label, row] : last) {
        std::fprintf(stderr, "%-20s %10zu %14.6g %14.6g %6zu\n", label.c_str(), row.episode, row.mean,
                     row.std_error, row.n_seeds);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient-TD learners with iterative soft thresholding"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::optional<std::size_t> seeds;
    bool quiet = false;
    bool timing = false;

    auto* run = app.add_subcommand("run", "Run an experiment and write its RMSPBE trace as CSV");
    run->add_option("--config", config_path, "Experiment description (key = value, one [section] per algorithm)")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--out", out_path, "Destination CSV (algorithm,seed,episode,rmspbe,nnz,wall_ms); stdout if omitted");
    run->add_option("--seeds", seeds, "Override the number of seeds")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "Suppress the summary table on stderr");
    run->add_flag("--timing", timing, "Record wall-clock milliseconds (makes the CSV non-reproducible)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    gtd_ist::ExperimentConfig cfg;
    try {
        cfg = gtd_ist::load_config(config_path);
        if (seeds) cfg.n_seeds = *seeds;
        if (timing) cfg.record_wall_time = true;
        cfg.validate();
    } catch (const gtd_ist::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    gtd_ist::ExperimentTrace trace;
    try {
        trace = gtd_ist::run_experiment(cfg);
    } catch (const gtd_ist::Divergence& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const gtd_ist::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (out_path.empty()) {
            gtd_ist::write_csv(trace, std::cout);
        } else {
            gtd_ist::emit_csv(trace, out_path);
        }
    } catch (const gtd_ist::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (!quiet) print_final_summary(trace);
    return kExitOk;
}
