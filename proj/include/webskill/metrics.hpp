#pragma once

// Evaluation metrics over a batch of trajectories and a library snapshot.

#include "webskill/induction.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webskill {

inline constexpr double kDefaultGamma = 0.01;

struct EvaluationBatch {
    std::vector<Trajectory> trajectories;
    SkillLibrary library;  // snapshot the trajectories ran against
    std::vector<Task> tasks;
    double gamma = kDefaultGamma;
};

struct MetricsReport {
    double success_rate = 0;
    std::optional<double> mean_steps;  // none without successes
    double skill_reusability = 0;      // 0 for an empty library
    double adoption_rate = 0;          // also reported as task coverage
    double compositionality = 0;       // 0 for an empty library
    double mean_objective = 0;

    std::size_t tasks = 0;
    std::size_t tasks_succeeded = 0;
    std::size_t trajectories = 0;
    std::size_t successful_trajectories = 0;
    std::size_t successful_steps = 0;  // sum of steps over successful trajectories
    std::size_t library_size = 0;
    std::size_t skills_used = 0;
    std::size_t adopting_trajectories = 0;
    std::size_t prior_references = 0;  // numerator of compositionality

    bool operator==(const MetricsReport&) const = default;
};

/// A task counts as solved when its last trajectory in the batch succeeded.
double success_rate(const EvaluationBatch& batch);
std::optional<double> mean_steps(const EvaluationBatch& batch);
double skill_reusability(const EvaluationBatch& batch);
double adoption_rate(const EvaluationBatch& batch);
double compositionality(const SkillLibrary& lib);
double mean_objective(const EvaluationBatch& batch);

/// Ids of earlier-created skills a skill's body calls (set semantics). Calls
/// from a default method to abstract signatures name no skill and are skipped.
std::vector<std::string> prior_references(const SkillLibrary& lib, std::string_view skill_id);

MetricsReport evaluate(const EvaluationBatch& batch);

using PolicyFactory = std::function<std::unique_ptr<PolicyBackend>()>;

struct EvalOptions {
    double gamma = kDefaultGamma;
    int workers = 1;
    std::string trajectory_prefix = "eval";
};

/// Run every suite task once against `lib` with a fresh policy per worker.
/// Results keep suite order regardless of the worker count.
EvaluationBatch evaluate_suite(const SkillLibrary& lib, const std::vector<Task>& suite, const SiteMap& sites,
                               const PolicyFactory& make_policy, const EvalOptions& options = {});

struct SeriesPoint {
    int step = 0;  // learning iterations completed
    MetricsReport report;
    std::vector<Trajectory> trajectories;
};

/// Re-evaluate the suite against the snapshot after every `interval`
/// iterations; a single point on the final snapshot when the run is shorter.
std::vector<SeriesPoint> snapshot_series(const std::vector<SkillLibrary>& snapshots, const std::vector<Task>& suite,
                                         const SiteMap& sites, const PolicyFactory& make_policy, int interval,
                                         const EvalOptions& options = {});

std::string metrics_csv_header();
std::string metrics_csv_row(int step, const MetricsReport& r);
std::string series_to_csv(const std::vector<SeriesPoint>& series);
std::string report_to_json(const MetricsReport& r, double gamma);
std::string series_to_json(const std::vector<SeriesPoint>& series, double gamma);

/// Fixed-precision rendering used in every report.
std::string format_real(double v);

} // namespace webskill
