// webskill: run, explore, continual, metrics and replay from the command line.

#include "webskill/harness.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace fs = std::filesystem;
using namespace webskill;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

ExperimentConfig resolve(const Common& c) {
    auto cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out = c.out;
    return cfg;
}

void print_report(const MetricsReport& r) {
    std::cout << metrics_csv_header() << metrics_csv_row(0, r);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polymorphic skill learning for simulated web agents"};
    app.require_subcommand(1);

    Common run_opts, explore_opts, continual_opts;
    auto* run = app.add_subcommand("run", "learn from a task suite, then evaluate snapshots");
    add_common(run, run_opts);
    auto* explore = app.add_subcommand("explore", "learn from self-proposed tasks across the site pool");
    add_common(explore, explore_opts);
    auto* continual = app.add_subcommand("continual", "learn site by site and report forgetting");
    add_common(continual, continual_opts);

    auto* metrics = app.add_subcommand("metrics", "recompute metrics from stored trajectory logs");
    std::vector<std::string> logs;
    std::string library, tasks, metrics_out;
    double gamma = kDefaultGamma;
    metrics->add_option("--logs", logs, "trajectory JSONL files")->required();
    metrics->add_option("--library", library, "library directory the trajectories ran against");
    metrics->add_option("--tasks", tasks, "task file defining the task set");
    metrics->add_option("--gamma", gamma, "step penalty in the objective");
    metrics->add_option("--out", metrics_out, "directory for metrics.csv and metrics.json");

    auto* replay = app.add_subcommand("replay", "re-execute logged trajectories and compare digests");
    std::string artifacts, trajectory, file;
    replay->add_option("--out", artifacts, "artifact directory of the run")->required();
    replay->add_option("--trajectory", trajectory, "only this trajectory id");
    replay->add_option("--file", file, "trajectory log to replay instead of the artifact logs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*run) cmd_run(resolve(run_opts));
        else if (*explore) cmd_explore(resolve(explore_opts));
        else if (*continual) cmd_continual(resolve(continual_opts));
        else if (*metrics) {
            MetricsRequest req;
            for (const auto& l : logs) req.logs.emplace_back(l);
            req.library = library;
            req.tasks = tasks;
            req.gamma = gamma;
            req.out = metrics_out;
            print_report(cmd_metrics(req));
        } else if (*replay) {
            auto results = cmd_replay(artifacts, trajectory, file);
            bool all = true;
            for (const auto& r : results) {
                if (r.report.match) {
                    std::cout << "match " << r.trajectory_id << "\n";
                } else {
                    all = false;
                    std::cout << "mismatch " << r.trajectory_id << " step " << r.report.first_divergent_step << ": "
                              << r.report.detail << "\n";
                }
            }
            return all ? 0 : kExitRuntime;
        }
    } catch (const Error& e) {
        std::cerr << "webskill: " << to_string(e.code()) << ": " << e.what() << "\n";
        return e.code() == ErrorCode::Config ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "webskill: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
