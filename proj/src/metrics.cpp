#include "webskill/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <thread>

namespace webskill {

using json = nlohmann::json;

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

namespace {

bool invokes_skill(const Trajectory& t) {
    return std::any_of(t.steps.begin(), t.steps.end(), [](const StepRecord& s) { return s.stmt.is_call(); });
}

void require_gamma(double gamma) {
    if (gamma < 0) fail(ErrorCode::NegativeGamma, "gamma must be non-negative, got " + format_real(gamma));
}

std::string optional_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

json report_json(const MetricsReport& r) {
    return {{"success_rate", r.success_rate},
            {"mean_steps", r.mean_steps ? json(*r.mean_steps) : json(nullptr)},
            {"skill_reusability", r.skill_reusability},
            {"adoption_rate", r.adoption_rate},
            {"compositionality", r.compositionality},
            {"mean_objective", r.mean_objective},
            {"tasks", r.tasks},
            {"tasks_succeeded", r.tasks_succeeded},
            {"trajectories", r.trajectories},
            {"successful_trajectories", r.successful_trajectories},
            {"successful_steps", r.successful_steps},
            {"library_size", r.library_size},
            {"skills_used", r.skills_used},
            {"adopting_trajectories", r.adopting_trajectories},
            {"prior_references", r.prior_references}};
}

std::size_t solved_tasks(const EvaluationBatch& batch) {
    std::size_t solved = 0;
    for (const auto& task : batch.tasks) {
        const Trajectory* last = nullptr;
        for (const auto& t : batch.trajectories)
            if (t.task_id == task.id) last = &t;
        if (last && last->success) ++solved;
    }
    return solved;
}

std::set<std::string> used_skills(const EvaluationBatch& batch) {
    std::set<std::string> used;
    for (const auto& t : batch.trajectories)
        for (const auto& id : t.called_skills()) used.insert(id);
    std::set<std::string> out;
    for (const auto& id : batch.library.creation_log())
        if (used.count(id)) out.insert(id);
    return out;
}

} // namespace

double success_rate(const EvaluationBatch& batch) {
    if (batch.tasks.empty()) fail(ErrorCode::EmptyTaskSet, "success rate needs at least one task");
    return static_cast<double>(solved_tasks(batch)) / static_cast<double>(batch.tasks.size());
}

std::optional<double> mean_steps(const EvaluationBatch& batch) {
    std::size_t n = 0, steps = 0;
    for (const auto& t : batch.trajectories)
        if (t.success) {
            ++n;
            steps += t.wall_steps();
        }
    if (n == 0) return std::nullopt;
    return static_cast<double>(steps) / static_cast<double>(n);
}

double skill_reusability(const EvaluationBatch& batch) {
    const auto& log = batch.library.creation_log();
    if (log.empty()) fail(ErrorCode::EmptyLibrary, "reusability needs a non-empty library");
    return static_cast<double>(used_skills(batch).size()) / static_cast<double>(log.size());
}

double adoption_rate(const EvaluationBatch& batch) {
    if (batch.trajectories.empty()) fail(ErrorCode::EmptySet, "adoption rate needs at least one trajectory");
    auto n = std::count_if(batch.trajectories.begin(), batch.trajectories.end(), invokes_skill);
    return static_cast<double>(n) / static_cast<double>(batch.trajectories.size());
}

std::vector<std::string> prior_references(const SkillLibrary& lib, std::string_view skill_id) {
    int me = lib.creation_index(skill_id);
    if (me < 0) fail(ErrorCode::UnknownSkill, "no skill '" + std::string(skill_id) + "'");
    const SkillDef* def = lib.find_skill(skill_id);
    if (!def) fail(ErrorCode::UnknownSkill, "no definition for '" + std::string(skill_id) + "'");

    // Scope of the body: an implementation method (site + interface) or a default.
    std::string site, interface_id;
    auto at = skill_id.find('@');
    auto dot = skill_id.find('.');
    interface_id = std::string(skill_id.substr(0, dot));
    if (at != std::string_view::npos) site = std::string(skill_id.substr(at + 1));

    std::set<std::string> refs;
    for (const auto& stmt : def->body) {
        if (!stmt.is_call()) continue;
        const auto& target = stmt.as_call().target;
        std::string id;
        if (site.empty()) {
            const auto* iface = lib.interface_by_id(interface_id);
            if (iface && iface->find_default(target)) id = default_skill_id(interface_id, target);
        } else {
            try {
                id = resolve_in(lib, site, interface_id, target).id;
            } catch (const Error&) {
            }
        }
        if (id.empty()) continue;
        int j = lib.creation_index(id);
        if (j >= 0 && j < me) refs.insert(id);
    }
    return {refs.begin(), refs.end()};
}

double compositionality(const SkillLibrary& lib) {
    const auto& log = lib.creation_log();
    if (log.empty()) fail(ErrorCode::EmptyLibrary, "compositionality needs a non-empty library");
    std::size_t total = 0;
    for (const auto& id : log) total += prior_references(lib, id).size();
    return static_cast<double>(total) / static_cast<double>(log.size());
}

double mean_objective(const EvaluationBatch& batch) {
    require_gamma(batch.gamma);
    if (batch.trajectories.empty()) fail(ErrorCode::EmptySet, "objective needs at least one trajectory");
    double sum = 0;
    for (const auto& t : batch.trajectories)
        sum += (t.success ? 1.0 : 0.0) - batch.gamma * static_cast<double>(t.wall_steps());
    return sum / static_cast<double>(batch.trajectories.size());
}

MetricsReport evaluate(const EvaluationBatch& batch) {
    require_gamma(batch.gamma);
    std::set<std::string> task_ids;
    for (const auto& t : batch.tasks) task_ids.insert(t.id);
    for (const auto& t : batch.trajectories)
        if (!task_ids.count(t.task_id))
            fail(ErrorCode::Config, "trajectory " + t.id + " belongs to task " + t.task_id + ", which is not in the batch");

    MetricsReport r;
    r.success_rate = success_rate(batch);
    r.tasks = batch.tasks.size();
    r.tasks_succeeded = solved_tasks(batch);
    r.mean_steps = mean_steps(batch);
    r.trajectories = batch.trajectories.size();
    for (const auto& t : batch.trajectories) {
        if (t.success) {
            ++r.successful_trajectories;
            r.successful_steps += t.wall_steps();
        }
        if (invokes_skill(t)) ++r.adopting_trajectories;
    }
    r.library_size = batch.library.size();
    if (!batch.library.empty()) {
        r.skill_reusability = skill_reusability(batch);
        r.skills_used = used_skills(batch).size();
        r.compositionality = compositionality(batch.library);
        for (const auto& id : batch.library.creation_log()) r.prior_references += prior_references(batch.library, id).size();
    }
    if (!batch.trajectories.empty()) {
        r.adoption_rate = adoption_rate(batch);
        r.mean_objective = mean_objective(batch);
    }
    return r;
}

EvaluationBatch evaluate_suite(const SkillLibrary& lib, const std::vector<Task>& suite, const SiteMap& sites,
                               const PolicyFactory& make_policy, const EvalOptions& options) {
    require_gamma(options.gamma);
    for (const auto& t : suite)
        if (!sites.count(t.site)) fail(ErrorCode::Config, "task " + t.id + " refers to unknown site '" + t.site + "'");
    EvaluationBatch batch{{}, lib, suite, options.gamma};
    batch.trajectories.resize(suite.size());

    auto run_range = [&](std::size_t first, std::size_t stride) {
        auto policy = make_policy();
        for (std::size_t i = first; i < suite.size(); i += stride) {
            RunOptions ro;
            ro.trajectory_id = options.trajectory_prefix + "-" + suite[i].id;
            batch.trajectories[i] = execute_task(sites.at(suite[i].site), suite[i], lib, *policy, ro).trajectory;
        }
    };
    auto workers = static_cast<std::size_t>(std::clamp(options.workers, 1, 64));
    workers = std::min(workers, std::max<std::size_t>(suite.size(), 1));
    if (workers == 1) {
        run_range(0, 1);
        return batch;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                run_range(w, workers);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return batch;
}

std::vector<SeriesPoint> snapshot_series(const std::vector<SkillLibrary>& snapshots, const std::vector<Task>& suite,
                                         const SiteMap& sites, const PolicyFactory& make_policy, int interval,
                                         const EvalOptions& options) {
    if (interval < 1) fail(ErrorCode::Config, "snapshot interval must be at least 1");
    std::vector<int> steps;
    auto n = static_cast<int>(snapshots.size());
    for (int s = interval; s <= n; s += interval) steps.push_back(s);
    if (steps.empty() && n > 0) steps.push_back(n);
    std::vector<SeriesPoint> out;
    for (int s : steps) {
        EvalOptions o = options;
        o.trajectory_prefix = options.trajectory_prefix + "-" + std::to_string(s);
        auto batch = evaluate_suite(snapshots[static_cast<std::size_t>(s - 1)], suite, sites, make_policy, o);
        out.push_back(SeriesPoint{s, evaluate(batch), std::move(batch.trajectories)});
    }
    return out;
}

std::string metrics_csv_header() {
    return "step,success_rate,mean_steps,skill_reusability,adoption_rate,compositionality,mean_objective,"
           "tasks,tasks_succeeded,trajectories,successful_trajectories,library_size,skills_used,adopting_trajectories\n";
}

std::string metrics_csv_row(int step, const MetricsReport& r) {
    std::string row = std::to_string(step);
    for (const auto& f : {format_real(r.success_rate), optional_real(r.mean_steps), format_real(r.skill_reusability),
                          format_real(r.adoption_rate), format_real(r.compositionality), format_real(r.mean_objective)})
        row += "," + f;
    for (auto c : {r.tasks, r.tasks_succeeded, r.trajectories, r.successful_trajectories, r.library_size, r.skills_used,
                   r.adopting_trajectories})
        row += "," + std::to_string(c);
    return row + "\n";
}

std::string series_to_csv(const std::vector<SeriesPoint>& series) {
    std::string out = metrics_csv_header();
    for (const auto& p : series) out += metrics_csv_row(p.step, p.report);
    return out;
}

std::string report_to_json(const MetricsReport& r, double gamma) {
    json j = {{"schema", "webskill.metrics/1"}, {"gamma", gamma}, {"report", report_json(r)}};
    return j.dump(2) + "\n";
}

std::string series_to_json(const std::vector<SeriesPoint>& series, double gamma) {
    json points = json::array();
    for (const auto& p : series) {
        auto j = report_json(p.report);
        j["step"] = p.step;
        points.push_back(std::move(j));
    }
    json j = {{"schema", "webskill.metrics/1"}, {"gamma", gamma}, {"series", points}};
    return j.dump(2) + "\n";
}

} // namespace webskill
