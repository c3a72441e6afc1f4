#pragma once

// Experiment orchestration behind the `webskill` command line tool.

#include "webskill/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace webskill {

struct BackendConfig {
    std::string policy = "oracle";  // oracle | oracle-primitive | scripted | remote
    std::string judge = "programmatic";
    std::string inducer = "scripted";
    std::string proposer = "gap-driven";
    std::filesystem::path script;  // task id -> statements, for the scripted policy
    ChatConfig endpoint;
};

struct PhaseConfig {
    std::string site;
    int iterations = 1;
};

struct ExperimentConfig {
    std::string mode = "task-defined";  // task-defined | task-free | continual
    std::uint64_t seed = 42;
    std::string category = "shopping";
    int n_sites = 3;
    std::filesystem::path sites_file;
    std::filesystem::path train_suite;
    std::filesystem::path eval_suite;
    std::filesystem::path initial_library;
    int tasks_per_site = 5;
    int eval_per_site = 3;
    BackendConfig backends;
    int horizon = 20;
    int snapshot_interval = 5;
    double gamma = kDefaultGamma;
    SizeBounds bounds;
    int iterations = 30;  // task-free
    SiteSelection selection = SiteSelection::SelfGuided;
    int workers = 1;
    int induction_retries = 0;
    std::vector<PhaseConfig> phases;  // continual
    std::filesystem::path out = "runs/latest";
};

/// Relative paths in the file resolve against `base_dir`. Config errors carry
/// ErrorCode::Config and name the offending key or path.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& file);

void cmd_run(const ExperimentConfig& config);
void cmd_explore(const ExperimentConfig& config);
void cmd_continual(const ExperimentConfig& config);

struct MetricsRequest {
    std::vector<std::filesystem::path> logs;
    std::filesystem::path library;     // empty: no library (reusability/compositionality report 0)
    std::filesystem::path tasks;       // empty: the task ids found in the logs
    double gamma = kDefaultGamma;
    std::filesystem::path out;         // empty: print only
};
MetricsReport cmd_metrics(const MetricsRequest& request);

struct ReplayResult {
    std::string trajectory_id;
    ReplayReport report;
};
/// Replays logged trajectories of an artifact directory (`only` selects one id;
/// `file` replaces the directory's own logs).
std::vector<ReplayResult> cmd_replay(const std::filesystem::path& artifacts, const std::string& only = {},
                                     const std::filesystem::path& file = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

} // namespace webskill
