#include "webskill/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace webskill {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << content;
}

namespace {

[[noreturn]] void bad_config(const std::string& message) { fail(ErrorCode::Config, message); }

fs::path config_path(const json& j, const char* key, const fs::path& base) {
    if (!j.contains(key) || j[key].is_null()) return {};
    fs::path p = j[key].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) bad_config(std::string(key) + ": file not found: " + p.string());
    return p;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        bad_config(std::string("config key '") + key + "' has the wrong type");
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
            bad_config("unknown key '" + it.key() + "' in " + where);
}

std::string iso_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hostname() {
    char buf[256] = {0};
    if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
    return buf;
}

// ---------------------------------------------------------------- setup shared by the commands

struct Setup {
    std::vector<std::shared_ptr<const SiteSpec>> pool;
    SiteMap sites;
    SkillLibrary initial;
    std::map<std::string, std::vector<Statement>> script;
};

Setup prepare(const ExperimentConfig& c) {
    Setup s;
    std::vector<SiteSpec> specs;
    if (!c.sites_file.empty()) {
        specs = sites_from_json(read_file(c.sites_file));
    } else {
        specs = generate_site_family(c.category, c.n_sites, c.seed);
    }
    for (auto& spec : specs) {
        auto p = std::make_shared<const SiteSpec>(std::move(spec));
        s.sites[p->id] = p;
        s.pool.push_back(std::move(p));
    }
    if (!c.initial_library.empty()) {
        s.initial = load_library(c.initial_library);
        auto violations = validate_library(s.initial, c.bounds);
        if (!violations.empty())
            fail(ErrorCode::ValidationFailed, "initial library is invalid: " + violations.front().skill_id + " " +
                                                  std::string(to_string(violations.front().rule)));
    }
    if (!c.backends.script.empty()) {
        auto j = json::parse(read_file(c.backends.script), nullptr, false);
        if (j.is_discarded() || !j.is_object()) bad_config("script: expected a JSON object of task id -> statements");
        for (auto it = j.begin(); it != j.end(); ++it) {
            std::vector<Statement> stmts;
            for (const auto& line : it.value()) stmts.push_back(parse_statement(line.get<std::string>()));
            s.script[it.key()] = std::move(stmts);
        }
    }
    return s;
}

std::vector<Task> with_horizon(std::vector<Task> tasks, int horizon) {
    for (auto& t : tasks) t.horizon = horizon;
    return tasks;
}

// Per-site generated tasks, interleaved so consecutive tasks visit different sites.
std::vector<Task> interleaved(const std::vector<std::shared_ptr<const SiteSpec>>& pool, int per_site,
                              std::uint64_t seed, const std::string& prefix, int horizon) {
    std::vector<std::vector<Task>> per;
    for (const auto& s : pool) per.push_back(generate_tasks(*s, per_site, seed, prefix));
    std::vector<Task> out;
    for (int i = 0; i < per_site; ++i)
        for (auto& v : per) out.push_back(v[static_cast<std::size_t>(i)]);
    return with_horizon(std::move(out), horizon);
}

void check_suite(const std::vector<Task>& suite, const SiteMap& sites, const std::string& what) {
    std::set<std::string> ids;
    for (const auto& t : suite) {
        if (!sites.count(t.site)) bad_config(what + ": task " + t.id + " refers to unknown site '" + t.site + "'");
        if (!ids.insert(t.id).second) bad_config(what + ": duplicate task id '" + t.id + "'");
    }
}

std::vector<Task> train_suite(const ExperimentConfig& c, const Setup& s) {
    std::vector<Task> suite = c.train_suite.empty()
                                  ? interleaved(s.pool, c.tasks_per_site, c.seed, "train-", c.horizon)
                                  : tasks_from_json(read_file(c.train_suite));
    check_suite(suite, s.sites, "train suite");
    return suite;
}

std::vector<Task> eval_suite(const ExperimentConfig& c, const Setup& s) {
    std::vector<Task> suite = c.eval_suite.empty()
                                  ? interleaved(s.pool, c.eval_per_site, c.seed + 1, "eval-", c.horizon)
                                  : tasks_from_json(read_file(c.eval_suite));
    check_suite(suite, s.sites, "eval suite");
    return suite;
}

PolicyFactory policy_factory(const ExperimentConfig& c, const Setup& s) {
    const auto& b = c.backends;
    if (b.policy == "oracle") return [] { return std::make_unique<OraclePolicy>(true); };
    if (b.policy == "oracle-primitive") return [] { return std::make_unique<OraclePolicy>(false); };
    if (b.policy == "scripted") {
        auto script = s.script;
        return [script] { return std::make_unique<ScriptedPolicy>(script); };
    }
    if (b.policy == "remote") {
        auto cfg = b.endpoint;
        return [cfg] { return std::make_unique<RemotePolicy>(cfg); };
    }
    bad_config("unknown policy backend '" + b.policy + "'");
}

std::unique_ptr<JudgeBackend> make_judge(const ExperimentConfig& c) {
    if (c.backends.judge == "programmatic") return std::make_unique<ProgrammaticJudge>();
    if (c.backends.judge == "remote") return std::make_unique<RemoteJudge>(c.backends.endpoint);
    bad_config("unknown judge backend '" + c.backends.judge + "'");
}

std::unique_ptr<InducerBackend> make_inducer(const ExperimentConfig& c) {
    if (c.backends.inducer == "scripted") return std::make_unique<ScriptedInducer>();
    if (c.backends.inducer == "remote") return std::make_unique<RemoteInducer>(c.backends.endpoint);
    bad_config("unknown inducer backend '" + c.backends.inducer + "'");
}

std::unique_ptr<ProposerBackend> make_proposer(const ExperimentConfig& c) {
    if (c.backends.proposer == "gap-driven") return std::make_unique<GapDrivenProposer>();
    if (c.backends.proposer == "remote") return std::make_unique<RemoteProposer>(c.backends.endpoint);
    bad_config("unknown proposer backend '" + c.backends.proposer + "'");
}

// ---------------------------------------------------------------- artifacts

class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    const fs::path& dir() const { return dir_; }

    void text(const std::string& name, const std::string& content) { write_file(dir_ / name, content); }

    void keep_library(const SkillLibrary& lib) { libraries_.emplace(library_digest(lib), lib); }
    void keep_libraries(const std::map<std::string, SkillLibrary>& libs) { libraries_.insert(libs.begin(), libs.end()); }

    void trajectories(const std::string& name, const std::vector<Trajectory>& ts) {
        std::string out;
        for (const auto& t : ts) {
            if (!libraries_.count(t.library))
                fail(ErrorCode::MissingArtifact, "trajectory " + t.id + " ran against an unrecorded library " + t.library);
            out += trajectory_to_jsonl(t);
        }
        text(name, out);
    }

    void tasks(const std::vector<Task>& ts) { text("tasks.json", tasks_to_json(ts)); }

    void sites(const std::vector<std::shared_ptr<const SiteSpec>>& pool) {
        std::vector<SiteSpec> specs;
        for (const auto& p : pool) specs.push_back(*p);
        text("sites.json", sites_to_json(specs));
    }

    void libraries() {
        fs::remove_all(dir_ / "libraries");
        for (const auto& [digest, lib] : libraries_) save_library(lib, dir_ / "libraries" / digest);
    }

    void final_library(const SkillLibrary& lib) {
        fs::remove_all(dir_ / "library");
        save_library(lib, dir_ / "library");
    }

    void meta(const std::string& command, const std::string& started) {
        json j = {{"schema", "webskill.meta/1"},
                  {"command", command},
                  {"started", started},
                  {"finished", iso_now()},
                  {"host", hostname()}};
        text("meta.json", j.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::map<std::string, SkillLibrary> libraries_;
};

std::vector<Trajectory> series_trajectories(const std::vector<SeriesPoint>& series) {
    std::vector<Trajectory> out;
    for (const auto& p : series) out.insert(out.end(), p.trajectories.begin(), p.trajectories.end());
    return out;
}

json outcome_counts(const std::vector<AuditRecord>& audit) {
    std::map<std::string, int> counts;
    for (const auto& a : audit) ++counts[a.outcome];
    return counts;
}

json config_json(const ExperimentConfig& c) {
    return {{"mode", c.mode},
            {"seed", c.seed},
            {"category", c.category},
            {"n_sites", c.n_sites},
            {"horizon", c.horizon},
            {"snapshot_interval", c.snapshot_interval},
            {"gamma", c.gamma},
            {"size_bounds", {{"min", c.bounds.min_steps}, {"max", c.bounds.max_steps}}},
            {"policy", c.backends.policy},
            {"judge", c.backends.judge},
            {"inducer", c.backends.inducer},
            {"proposer", c.backends.proposer}};
}

// Common tail of run and explore: series, metrics and all artifact files.
void write_learning_artifacts(const ExperimentConfig& c, const Setup& s, const LearningResult& r,
                              const std::vector<Task>& learned_tasks, const std::vector<Task>& suite,
                              const std::string& command, const std::string& started) {
    Artifacts out(c.out);
    auto factory = policy_factory(c, s);
    EvalOptions eo{c.gamma, c.workers, "eval"};
    auto series = snapshot_series(r.snapshots, suite, s.sites, factory, c.snapshot_interval, eo);

    out.keep_library(s.initial);
    out.keep_libraries(r.libraries);
    for (const auto& snap : r.snapshots) out.keep_library(snap);

    auto all_tasks = learned_tasks;
    all_tasks.insert(all_tasks.end(), suite.begin(), suite.end());
    out.sites(s.pool);
    out.tasks(all_tasks);
    out.text("eval_tasks.json", tasks_to_json(suite));
    out.trajectories("trajectories.jsonl", r.trajectories);
    out.trajectories("eval.jsonl", series_trajectories(series));
    out.text("audit.jsonl", audit_to_jsonl(r.audit));
    out.final_library(r.library);
    out.libraries();
    out.text("metrics.csv", series_to_csv(series));
    out.text("metrics.json", series_to_json(series, c.gamma));

    json summary = {{"schema", "webskill.summary/1"},
                    {"config", config_json(c)},
                    {"iterations", r.audit.size()},
                    {"site_iterations", r.site_iterations},
                    {"outcomes", outcome_counts(r.audit)},
                    {"library_size", r.library.size()},
                    {"library_digest", library_digest(r.library)}};
    out.text("summary.json", summary.dump(2) + "\n");
    out.meta(command, started);
}

} // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        bad_config(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) bad_config("config must be a JSON object");
    check_keys(j,
               {"schema", "mode", "seed", "family", "sites_file", "train_suite", "eval_suite", "initial_library",
                "tasks_per_site", "eval_per_site", "backends", "horizon", "snapshot_interval", "gamma", "size_bounds",
                "iterations", "selection", "workers", "induction_retries", "phases", "out"},
               "config");
    if (j.contains("schema") && j["schema"] != "webskill.config/1")
        fail(ErrorCode::SchemaMismatch, "expected schema webskill.config/1");

    ExperimentConfig c;
    c.mode = get_or<std::string>(j, "mode", c.mode);
    if (c.mode != "task-defined" && c.mode != "task-free" && c.mode != "continual")
        bad_config("mode must be task-defined, task-free or continual, got '" + c.mode + "'");
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("family")) {
        const auto& f = j["family"];
        check_keys(f, {"category", "n_sites"}, "family");
        c.category = get_or<std::string>(f, "category", c.category);
        c.n_sites = get_or<int>(f, "n_sites", c.n_sites);
    }
    auto cats = known_categories();
    if (std::find(cats.begin(), cats.end(), c.category) == cats.end()) bad_config("unknown category '" + c.category + "'");
    if (c.n_sites < 1 || c.n_sites > 6) bad_config("family.n_sites must be between 1 and 6");
    c.sites_file = config_path(j, "sites_file", base_dir);
    c.train_suite = config_path(j, "train_suite", base_dir);
    c.eval_suite = config_path(j, "eval_suite", base_dir);
    c.initial_library = config_path(j, "initial_library", base_dir);
    c.tasks_per_site = get_or<int>(j, "tasks_per_site", c.tasks_per_site);
    c.eval_per_site = get_or<int>(j, "eval_per_site", c.eval_per_site);
    if (c.tasks_per_site < 1 || c.eval_per_site < 1) bad_config("tasks_per_site and eval_per_site must be at least 1");

    if (j.contains("backends")) {
        const auto& b = j["backends"];
        check_keys(b, {"policy", "judge", "inducer", "proposer", "script", "endpoint"}, "backends");
        c.backends.policy = get_or<std::string>(b, "policy", c.backends.policy);
        c.backends.judge = get_or<std::string>(b, "judge", c.backends.judge);
        c.backends.inducer = get_or<std::string>(b, "inducer", c.backends.inducer);
        c.backends.proposer = get_or<std::string>(b, "proposer", c.backends.proposer);
        c.backends.script = config_path(b, "script", base_dir);
        if (b.contains("endpoint")) {
            const auto& e = b["endpoint"];
            check_keys(e, {"base_url", "model", "api_key_env", "timeout_seconds", "retries", "temperature", "max_tokens"},
                       "backends.endpoint");
            auto& ep = c.backends.endpoint;
            ep.base_url = get_or<std::string>(e, "base_url", ep.base_url);
            ep.model = get_or<std::string>(e, "model", ep.model);
            ep.api_key_env = get_or<std::string>(e, "api_key_env", ep.api_key_env);
            ep.timeout_seconds = get_or<int>(e, "timeout_seconds", ep.timeout_seconds);
            ep.retries = get_or<int>(e, "retries", ep.retries);
            ep.temperature = get_or<double>(e, "temperature", ep.temperature);
            ep.max_tokens = get_or<int>(e, "max_tokens", ep.max_tokens);
        }
    }
    if (c.backends.policy == "scripted" && c.backends.script.empty())
        bad_config("backends.script is required for the scripted policy");

    c.horizon = get_or<int>(j, "horizon", c.horizon);
    if (c.horizon < 1 || c.horizon > 1000) bad_config("horizon must be between 1 and 1000");
    c.snapshot_interval = get_or<int>(j, "snapshot_interval", c.snapshot_interval);
    if (c.snapshot_interval < 1) bad_config("snapshot_interval must be at least 1");
    c.gamma = get_or<double>(j, "gamma", c.gamma);
    if (c.gamma < 0) bad_config("gamma must be non-negative");
    if (j.contains("size_bounds")) {
        check_keys(j["size_bounds"], {"min", "max"}, "size_bounds");
        c.bounds.min_steps = get_or<int>(j["size_bounds"], "min", c.bounds.min_steps);
        c.bounds.max_steps = get_or<int>(j["size_bounds"], "max", c.bounds.max_steps);
    }
    if (c.bounds.min_steps < 1 || c.bounds.max_steps < c.bounds.min_steps)
        bad_config("size_bounds needs 1 <= min <= max");
    c.iterations = get_or<int>(j, "iterations", c.iterations);
    if (c.iterations < 1) bad_config("iterations must be at least 1");
    auto sel = get_or<std::string>(j, "selection", "self-guided");
    if (sel == "self-guided") c.selection = SiteSelection::SelfGuided;
    else if (sel == "round-robin") c.selection = SiteSelection::RoundRobin;
    else bad_config("selection must be self-guided or round-robin");
    c.workers = get_or<int>(j, "workers", c.workers);
    if (c.workers < 1 || c.workers > 64) bad_config("workers must be between 1 and 64");
    c.induction_retries = get_or<int>(j, "induction_retries", c.induction_retries);
    if (c.induction_retries < 0) bad_config("induction_retries must be non-negative");
    if (j.contains("phases")) {
        if (!j["phases"].is_array()) bad_config("phases must be an array");
        for (const auto& p : j["phases"]) {
            check_keys(p, {"site", "iterations"}, "phases[]");
            PhaseConfig ph;
            ph.site = get_or<std::string>(p, "site", "");
            ph.iterations = get_or<int>(p, "iterations", 0);
            if (ph.site.empty()) bad_config("every phase needs a site");
            if (ph.iterations < 1) bad_config("phase " + ph.site + ": iterations must be at least 1");
            c.phases.push_back(ph);
        }
    }
    if (c.mode == "continual" && c.phases.empty()) bad_config("continual mode needs at least one phase");
    if (j.contains("out")) {
        fs::path o = j["out"].get<std::string>();
        c.out = o.is_relative() ? base_dir / o : o;
    }
    return c;
}

ExperimentConfig load_config(const fs::path& file) {
    if (!fs::exists(file)) bad_config("config file not found: " + file.string());
    return parse_config(read_file(file), file.parent_path());
}

// ---------------------------------------------------------------- commands

void cmd_run(const ExperimentConfig& c) {
    auto started = iso_now();
    auto s = prepare(c);
    auto train = train_suite(c, s);
    auto suite = eval_suite(c, s);
    auto policy = policy_factory(c, s)();
    auto judge = make_judge(c);
    auto inducer = make_inducer(c);
    LearningOptions lo;
    lo.bounds = c.bounds;
    lo.induction_retries = c.induction_retries;
    auto r = run_task_defined(train, s.initial, s.sites, *policy, *judge, *inducer, lo);
    write_learning_artifacts(c, s, r, train, suite, "run", started);
}

void cmd_explore(const ExperimentConfig& c) {
    auto started = iso_now();
    auto s = prepare(c);
    auto suite = eval_suite(c, s);
    auto policy = policy_factory(c, s)();
    auto judge = make_judge(c);
    auto inducer = make_inducer(c);
    auto proposer = make_proposer(c);
    ExploreOptions eo;
    eo.bounds = c.bounds;
    eo.induction_retries = c.induction_retries;
    eo.selection = c.selection;
    auto r = run_task_free(c.iterations, s.initial, s.pool, *policy, *judge, *inducer, *proposer, eo);
    std::vector<Task> proposed;
    for (const auto& t : r.tasks)
        if (!t.id.empty()) proposed.push_back(t);
    write_learning_artifacts(c, s, r, proposed, suite, "explore", started);
}

void cmd_continual(const ExperimentConfig& c) {
    auto started = iso_now();
    auto s = prepare(c);
    for (const auto& ph : c.phases)
        if (!s.sites.count(ph.site)) bad_config("phase refers to unknown site '" + ph.site + "'");
    auto judge = make_judge(c);
    auto inducer = make_inducer(c);
    auto factory = policy_factory(c, s);
    auto policy = factory();

    // Held-out suite per phase origin.
    std::vector<std::vector<Task>> suites;
    for (std::size_t p = 0; p < c.phases.size(); ++p) {
        const auto& spec = *s.sites.at(c.phases[p].site);
        auto prefix = "eval-p" + std::to_string(p + 1) + "-";
        suites.push_back(with_horizon(generate_tasks(spec, c.eval_per_site, c.seed + 1, prefix), c.horizon));
    }

    Artifacts out(c.out);
    out.keep_library(s.initial);
    SkillLibrary lib = s.initial;
    std::vector<Trajectory> train_trajs, eval_trajs;
    std::vector<AuditRecord> audit;
    std::vector<Task> all_tasks;
    int step = 1;
    json matrix = json::array();
    std::string csv = "phase,phase_site,suite,suite_site,success_rate,mean_steps,delta_success_rate\n";
    std::vector<std::optional<double>> origin_sr(c.phases.size());
    std::vector<SeriesPoint> per_phase;

    for (std::size_t p = 0; p < c.phases.size(); ++p) {
        const auto& ph = c.phases[p];
        const auto& spec = *s.sites.at(ph.site);
        auto tasks = with_horizon(
            generate_tasks(spec, ph.iterations, c.seed, "p" + std::to_string(p + 1) + "-"), c.horizon);
        LearningOptions lo;
        lo.bounds = c.bounds;
        lo.first_step = step;
        lo.induction_retries = c.induction_retries;
        auto r = run_task_defined(tasks, lib, s.sites, *policy, *judge, *inducer, lo);
        step += static_cast<int>(tasks.size());
        lib = r.library;
        out.keep_libraries(r.libraries);
        for (const auto& snap : r.snapshots) out.keep_library(snap);
        train_trajs.insert(train_trajs.end(), r.trajectories.begin(), r.trajectories.end());
        for (auto& a : r.audit) audit.push_back(a);
        all_tasks.insert(all_tasks.end(), tasks.begin(), tasks.end());

        json row = json::array();
        for (std::size_t q = 0; q < suites.size(); ++q) {
            EvalOptions eo{c.gamma, c.workers, "eval-after-p" + std::to_string(p + 1)};
            auto batch = evaluate_suite(lib, suites[q], s.sites, factory, eo);
            auto rep = evaluate(batch);
            eval_trajs.insert(eval_trajs.end(), batch.trajectories.begin(), batch.trajectories.end());
            if (q == p) origin_sr[q] = rep.success_rate;
            std::optional<double> delta;
            if (q <= p && origin_sr[q]) delta = rep.success_rate - *origin_sr[q];
            csv += std::to_string(p + 1) + "," + ph.site + "," + std::to_string(q + 1) + "," + c.phases[q].site + "," +
                   format_real(rep.success_rate) + "," + (rep.mean_steps ? format_real(*rep.mean_steps) : "") + "," +
                   (delta ? format_real(*delta) : "") + "\n";
            row.push_back({{"suite", q + 1},
                           {"suite_site", c.phases[q].site},
                           {"success_rate", rep.success_rate},
                           {"mean_steps", rep.mean_steps ? json(*rep.mean_steps) : json(nullptr)},
                           {"delta_success_rate", delta ? json(*delta) : json(nullptr)}});
            if (q == p) per_phase.push_back(SeriesPoint{step - 1, rep, {}});
        }
        matrix.push_back({{"phase", p + 1}, {"site", ph.site}, {"library_size", lib.size()}, {"suites", row}});
    }
    out.keep_library(lib);

    for (const auto& suite : suites) all_tasks.insert(all_tasks.end(), suite.begin(), suite.end());
    out.sites(s.pool);
    out.tasks(all_tasks);
    out.trajectories("trajectories.jsonl", train_trajs);
    out.trajectories("eval.jsonl", eval_trajs);
    out.text("audit.jsonl", audit_to_jsonl(audit));
    out.final_library(lib);
    out.libraries();
    out.text("forgetting.csv", csv);
    out.text("forgetting.json",
             json({{"schema", "webskill.forgetting/1"}, {"phases", matrix}}).dump(2) + "\n");
    out.text("metrics.csv", series_to_csv(per_phase));
    out.text("metrics.json", series_to_json(per_phase, c.gamma));
    json summary = {{"schema", "webskill.summary/1"},
                    {"config", config_json(c)},
                    {"iterations", audit.size()},
                    {"outcomes", outcome_counts(audit)},
                    {"library_size", lib.size()},
                    {"library_digest", library_digest(lib)}};
    out.text("summary.json", summary.dump(2) + "\n");
    out.meta("continual", started);
}

MetricsReport cmd_metrics(const MetricsRequest& req) {
    if (req.logs.empty()) fail(ErrorCode::EmptySet, "no trajectory logs given");
    EvaluationBatch batch;
    batch.gamma = req.gamma;
    for (const auto& path : req.logs) {
        auto ts = trajectories_from_jsonl(read_file(path));
        batch.trajectories.insert(batch.trajectories.end(), ts.begin(), ts.end());
    }
    if (batch.trajectories.empty()) fail(ErrorCode::EmptySet, "the logs hold no trajectories");
    if (!req.library.empty()) batch.library = load_library(req.library);
    if (!req.tasks.empty()) {
        std::set<std::string> logged;
        for (const auto& t : batch.trajectories) logged.insert(t.task_id);
        for (auto& t : tasks_from_json(read_file(req.tasks)))
            if (logged.count(t.id)) batch.tasks.push_back(std::move(t));
    } else {
        std::set<std::string> seen;
        for (const auto& t : batch.trajectories)
            if (seen.insert(t.task_id).second) batch.tasks.push_back(Task{t.task_id, t.site, {}, {}, {}, t.horizon, {}});
    }
    auto report = evaluate(batch);
    if (!req.out.empty()) {
        write_file(req.out / "metrics.csv", metrics_csv_header() + metrics_csv_row(0, report));
        write_file(req.out / "metrics.json", report_to_json(report, req.gamma));
    }
    return report;
}

std::vector<ReplayResult> cmd_replay(const fs::path& artifacts, const std::string& only, const fs::path& file) {
    auto need = [&](const fs::path& p) {
        if (!fs::exists(p)) fail(ErrorCode::MissingArtifact, "missing artifact: " + p.string());
        return p;
    };
    std::map<std::string, std::shared_ptr<const SiteSpec>> sites;
    for (auto& spec : sites_from_json(read_file(need(artifacts / "sites.json")))) {
        auto id = spec.id;
        sites[id] = std::make_shared<const SiteSpec>(std::move(spec));
    }
    std::map<std::string, Task> tasks;
    for (auto& t : tasks_from_json(read_file(need(artifacts / "tasks.json")))) tasks.emplace(t.id, std::move(t));

    std::vector<Trajectory> logged;
    std::vector<fs::path> sources;
    if (!file.empty()) sources.push_back(need(file));
    else
        for (const char* name : {"trajectories.jsonl", "eval.jsonl"})
            if (fs::exists(artifacts / name)) sources.push_back(artifacts / name);
    if (sources.empty()) fail(ErrorCode::MissingArtifact, "no trajectory logs in " + artifacts.string());
    for (const auto& src : sources) {
        auto ts = trajectories_from_jsonl(read_file(src));
        logged.insert(logged.end(), ts.begin(), ts.end());
    }

    std::map<std::string, SkillLibrary> libs;
    std::vector<ReplayResult> out;
    for (const auto& t : logged) {
        if (!only.empty() && t.id != only) continue;
        auto site = sites.find(t.site);
        if (site == sites.end()) fail(ErrorCode::MissingArtifact, "trajectory " + t.id + ": unknown site " + t.site);
        auto task = tasks.find(t.task_id);
        if (task == tasks.end()) fail(ErrorCode::MissingArtifact, "trajectory " + t.id + ": unknown task " + t.task_id);
        auto lib = libs.find(t.library);
        if (lib == libs.end())
            lib = libs.emplace(t.library, load_library(need(artifacts / "libraries" / t.library))).first;
        out.push_back(ReplayResult{t.id, replay_trajectory(site->second, task->second, lib->second, t)});
    }
    if (!only.empty() && out.empty()) fail(ErrorCode::MissingArtifact, "no trajectory with id '" + only + "'");
    return out;
}

} // namespace webskill
