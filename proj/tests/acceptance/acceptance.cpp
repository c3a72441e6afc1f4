// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Usage: webskill_acceptance [work-dir]

#include "webskill/harness.hpp"
#include "webskill/induction.hpp"
#include "webskill/metrics.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#ifndef WEBSKILL_FIXTURE_DIR
#error "WEBSKILL_FIXTURE_DIR must be defined"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace webskill;

namespace {

// Pinned tolerances and limits.
constexpr double kMetricTolerance = 1e-12;
constexpr int kMetricFixtures = 24;
constexpr std::size_t kFixtureMaxSkills = 10;
constexpr std::size_t kFixtureMaxTrajectories = 50;
constexpr double kStepRatio = 0.7;
constexpr double kAdoptionFloor = 0.5;
constexpr int kRunSeed = 42;
constexpr int kShoppingTrainTasks = 20;
constexpr int kCompressionTrainTasks = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double limit_seconds;
    Outcome outcome;
    double seconds = 0;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

// ---------------------------------------------------------------- exact fractions

struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;
};

Frac frac(std::int64_t n, std::int64_t d) {
    auto g = std::gcd(n, d);
    if (g == 0) g = 1;
    return {n / g, d / g};
}

bool close(double got, Frac want) {
    long double w = static_cast<long double>(want.num) / static_cast<long double>(want.den);
    return std::fabs(static_cast<long double>(got) - w) < kMetricTolerance;
}

// ---------------------------------------------------------------- criterion 1: metric oracle

struct Fixture {
    fs::path dir;
    std::vector<std::string> task_ids;
    std::map<std::string, std::string> task_site;
    int gamma_milli = 0;
};

// Writes a random valid library and trajectory log under `dir`.
Fixture make_fixture(const fs::path& dir, std::uint32_t seed) {
    std::mt19937 rng(seed);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    Fixture fx;
    fx.dir = dir;
    fx.gamma_milli = pick(0, 50);
    fs::remove_all(dir);

    int n_abstract = pick(1, 4);
    int n_default = pick(0, 2);
    int n_sites = pick(1, 2);
    auto has_param = [](int k) { return k % 2 == 1; };
    auto sig = [&](int k) { return "a" + std::to_string(k) + (has_param(k) ? "(q: text)" : "()"); };
    auto call_of = [&](int k) { return "call a" + std::to_string(k) + (has_param(k) ? "(\"lit\")" : "()"); };

    std::vector<std::string> log;
    std::string iface = "interface Fx category fixture {\n";
    for (int k = 0; k < n_abstract; ++k) iface += "  abstract " + sig(k) + " \"doc\"\n";
    for (int d = 0; d < n_default; ++d) {
        iface += "  default skill d" + std::to_string(d) + "() \"doc\" at 1 {\n";
        iface += "    " + call_of(pick(0, n_abstract - 1)) + "\n";
        if (d > 0 && pick(0, 1)) iface += "    call d" + std::to_string(pick(0, d - 1)) + "()\n";
        iface += "  }\n";
        log.push_back("Fx.d" + std::to_string(d));
    }
    iface += "}\n";
    spit(dir / "lib" / "fixture" / "interface.skill", iface);

    // Methods per site, created in an interleaved global order.
    std::vector<std::pair<int, int>> order;  // (site, method)
    for (int s = 0; s < n_sites; ++s)
        for (int k = 0; k < n_abstract; ++k)
            if (pick(0, 3) > 0) order.emplace_back(s, k);
    std::shuffle(order.begin(), order.end(), rng);
    while (log.size() + order.size() > kFixtureMaxSkills) order.pop_back();

    std::vector<std::string> bodies(static_cast<std::size_t>(n_sites));
    std::vector<std::vector<int>> done(static_cast<std::size_t>(n_sites));
    int at = 2;
    for (auto [s, k] : order) {
        auto& b = bodies[static_cast<std::size_t>(s)];
        bool induced = pick(0, 1) == 1;
        b += std::string("  ") + (induced ? "induced" : "handwritten") + " skill " + sig(k) + " \"doc\" at " +
             std::to_string(at++) + " {\n";
        int stmts = pick(2, 4);
        for (int i = 0; i < stmts; ++i) {
            const auto& prior = done[static_cast<std::size_t>(s)];
            if (!prior.empty() && pick(0, 2) == 0) {
                b += "    " + call_of(prior[static_cast<std::size_t>(pick(0, static_cast<int>(prior.size()) - 1))]) + "\n";
            } else if (has_param(k) && pick(0, 1)) {
                b += "    type(#f" + std::to_string(i) + ", q)\n";
            } else {
                b += "    click(#e" + std::to_string(pick(0, 9)) + ")\n";
            }
        }
        b += "  }\n";
        done[static_cast<std::size_t>(s)].push_back(k);
        log.push_back("Fx.a" + std::to_string(k) + "@s" + std::to_string(s));
    }
    for (int s = 0; s < n_sites; ++s) {
        if (bodies[static_cast<std::size_t>(s)].empty()) continue;
        auto site = "s" + std::to_string(s);
        spit(dir / "lib" / "fixture" / (site + ".skill"),
             "implementation Impl" + std::to_string(s) + " implements Fx site " + site + " at 2 {\n" +
                 bodies[static_cast<std::size_t>(s)] + "}\n");
    }
    std::string log_text;
    for (const auto& id : log) log_text += id + "\n";
    spit(dir / "lib" / "creation.log", log_text);

    // Tasks and trajectories. Calls name library skills or a foreign one.
    int n_tasks = pick(1, 8);
    for (int t = 0; t < n_tasks; ++t) {
        auto id = "t" + std::to_string(t);
        fx.task_ids.push_back(id);
        fx.task_site[id] = "s" + std::to_string(pick(0, n_sites - 1));
    }
    int n_traj = pick(1, static_cast<int>(kFixtureMaxTrajectories));
    std::string jsonl;
    for (int i = 0; i < n_traj; ++i) {
        auto task = fx.task_ids[static_cast<std::size_t>(pick(0, n_tasks - 1))];
        auto tid = "traj-" + std::to_string(i);
        int steps = pick(0, 12);
        for (int s = 0; s < steps; ++s) {
            std::string stmt = "click(#e1)", skill;
            std::vector<std::string> prims = {"click(#e1)"};
            int roll = pick(0, 9);
            if (roll < 3 && !log.empty()) {
                skill = log[static_cast<std::size_t>(pick(0, static_cast<int>(log.size()) - 1))];
                stmt = "call x()";
            } else if (roll == 3) {
                skill = "Other.y@s9";
                stmt = "call y()";
            }
            json rec = {{"schema", "webskill.trajectory/1"}, {"kind", "step"}, {"trajectory", tid},
                        {"task", task},                      {"site", fx.task_site[task]},
                        {"index", s},                        {"obs", "o"},     {"stmt", stmt},
                        {"skill", skill},                    {"expansion", 1}, {"prims", prims},
                        {"post", "p"},                       {"chain", "c"}};
            jsonl += rec.dump() + "\n";
        }
        json end = {{"schema", "webskill.trajectory/1"}, {"kind", "end"},  {"trajectory", tid},
                    {"task", task},                      {"site", fx.task_site[task]},
                    {"library", "x"},                    {"steps", steps}, {"horizon", 20},
                    {"terminal", "t"},                   {"success", pick(0, 2) > 0},
                    {"reason", "stop"},                  {"fault", ""},    {"fault_stmt", ""}};
        jsonl += end.dump() + "\n";
    }
    spit(dir / "trajectories.jsonl", jsonl);
    return fx;
}

struct OracleValues {
    Frac success_rate, reusability, adoption, compositionality, objective;
    std::optional<Frac> mean_steps;
    std::size_t solved = 0, used = 0, adopting = 0, prior_refs = 0, successful = 0, library = 0;
};

// Reads the raw files: JSON lines, creation.log and the skill texts.
OracleValues oracle(const Fixture& fx) {
    OracleValues o;
    std::vector<std::string> log = lines_of(slurp(fx.dir / "lib" / "creation.log"));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < log.size(); ++i) index[log[i]] = i;
    o.library = log.size();

    // Skill bodies: id -> call targets (resolved to ids).
    std::map<std::string, std::vector<std::string>> raw_calls;
    std::set<std::string> defaults;
    std::map<std::string, std::set<std::string>> site_methods;
    std::regex header_impl(R"(^implementation \w+ implements (\w+) site (\w+))");
    std::regex skill_re(R"(^\s*(default |induced |handwritten )?skill (\w+)\()");
    std::regex call_re(R"(^\s*call (\w+)\()");
    for (const auto& entry : fs::directory_iterator(fx.dir / "lib" / "fixture")) {
        std::string site, current;
        for (const auto& line : lines_of(slurp(entry.path()))) {
            std::smatch m;
            if (std::regex_search(line, m, header_impl)) site = m[2];
            else if (std::regex_search(line, m, skill_re)) {
                current = site.empty() ? "Fx." + m[2].str() : "Fx." + m[2].str() + "@" + site;
                if (site.empty()) defaults.insert(m[2]);
                else site_methods[site].insert(m[2]);
                raw_calls[current];
            } else if (std::regex_search(line, m, call_re)) {
                raw_calls[current].push_back(m[1]);
            }
        }
    }
    std::size_t refs = 0;
    for (const auto& [id, targets] : raw_calls) {
        auto at = id.find('@');
        std::string site = at == std::string::npos ? "" : id.substr(at + 1);
        std::set<std::string> prior;
        for (const auto& t : targets) {
            std::string tid;
            if (!site.empty() && site_methods[site].count(t)) tid = "Fx." + t + "@" + site;
            else if (defaults.count(t)) tid = "Fx." + t;
            if (!tid.empty() && index.count(tid) && index.at(tid) < index.at(id)) prior.insert(tid);
        }
        refs += prior.size();
    }
    o.prior_refs = refs;

    struct Traj {
        std::string task;
        std::size_t steps = 0;
        bool adopts = false;
        bool success = false;
    };
    std::vector<Traj> trajs;
    std::set<std::string> used;
    Traj cur;
    for (const auto& line : lines_of(slurp(fx.dir / "trajectories.jsonl"))) {
        auto j = json::parse(line);
        cur.task = j["task"];
        if (j["kind"] == "step") {
            ++cur.steps;
            std::string stmt = j["stmt"];
            if (stmt.rfind("call ", 0) == 0) cur.adopts = true;
            std::string skill = j["skill"];
            if (index.count(skill)) used.insert(skill);
        } else {
            cur.success = j["success"];
            trajs.push_back(cur);
            cur = Traj{};
        }
    }
    std::map<std::string, bool> last;
    for (const auto& t : trajs) last[t.task] = t.success;
    for (const auto& id : fx.task_ids)
        if (last.count(id) && last[id]) ++o.solved;
    o.success_rate = frac(static_cast<std::int64_t>(o.solved), static_cast<std::int64_t>(fx.task_ids.size()));

    std::int64_t succ_steps = 0, succ = 0, all_steps = 0;
    for (const auto& t : trajs) {
        all_steps += static_cast<std::int64_t>(t.steps);
        if (t.success) {
            ++succ;
            succ_steps += static_cast<std::int64_t>(t.steps);
        }
        if (t.adopts) ++o.adopting;
    }
    o.successful = static_cast<std::size_t>(succ);
    if (succ > 0) o.mean_steps = frac(succ_steps, succ);
    auto n = static_cast<std::int64_t>(trajs.size());
    o.adoption = frac(static_cast<std::int64_t>(o.adopting), n);
    o.objective = frac(1000 * succ - fx.gamma_milli * all_steps, 1000 * n);
    o.used = used.size();
    auto k = static_cast<std::int64_t>(log.size());
    o.reusability = k == 0 ? Frac{0, 1} : frac(static_cast<std::int64_t>(o.used), k);
    o.compositionality = k == 0 ? Frac{0, 1} : frac(static_cast<std::int64_t>(refs), k);
    return o;
}

Outcome metric_oracle(const fs::path& work) {
    int checked = 0;
    for (int i = 0; i < kMetricFixtures; ++i) {
        auto fx = make_fixture(work / ("fixture-" + std::to_string(i)), 1000u + static_cast<std::uint32_t>(i));
        auto label = "fixture " + std::to_string(i);

        EvaluationBatch batch;
        batch.library = load_library(fx.dir / "lib");
        auto violations = validate_library(batch.library);
        if (!violations.empty()) return {false, label + ": generated library is invalid: " + violations.front().detail};
        if (batch.library.size() > kFixtureMaxSkills) return {false, label + ": too many skills"};
        batch.trajectories = trajectories_from_jsonl(slurp(fx.dir / "trajectories.jsonl"));
        for (const auto& id : fx.task_ids) batch.tasks.push_back(Task{id, fx.task_site[id], {}, {}, {}, 20, {}});
        batch.gamma = fx.gamma_milli / 1000.0;
        auto r = evaluate(batch);
        auto o = oracle(fx);

        auto bad = [&](const std::string& what) { return Outcome{false, label + ": " + what + " disagrees"}; };
        if (!close(r.success_rate, o.success_rate)) return bad("success_rate");
        if (r.mean_steps.has_value() != o.mean_steps.has_value()) return bad("mean_steps presence");
        if (r.mean_steps && !close(*r.mean_steps, *o.mean_steps)) return bad("mean_steps");
        if (!close(r.skill_reusability, o.reusability)) return bad("skill_reusability");
        if (!close(r.adoption_rate, o.adoption)) return bad("adoption_rate");
        if (!close(r.compositionality, o.compositionality)) return bad("compositionality");
        if (!close(r.mean_objective, o.objective)) return bad("mean_objective");
        if (r.tasks_succeeded != o.solved || r.skills_used != o.used || r.adopting_trajectories != o.adopting ||
            r.prior_references != o.prior_refs || r.successful_trajectories != o.successful || r.library_size != o.library)
            return bad("a count");
        ++checked;
    }
    return {true, std::to_string(checked) + " fixtures, all metrics within " + fmt("%.0e", kMetricTolerance)};
}

// ---------------------------------------------------------------- experiment runs

std::vector<std::shared_ptr<const SiteSpec>> family(const std::string& category) {
    std::vector<std::shared_ptr<const SiteSpec>> out;
    for (auto& s : generate_site_family(category, 3, kRunSeed)) out.push_back(std::make_shared<const SiteSpec>(std::move(s)));
    return out;
}

std::vector<Task> with_horizon(std::vector<Task> ts, int horizon) {
    for (auto& t : ts) t.horizon = horizon;
    return ts;
}

Task cap_task(const SiteSpec& s, const std::string& cap, std::size_t k, const std::string& id) {
    auto t = capability_task(s, cap, task_params(s, cap, k), id);
    t.horizon = 20;
    return t;
}

void write_sites(const fs::path& p, const std::vector<std::shared_ptr<const SiteSpec>>& pool) {
    std::vector<SiteSpec> specs;
    for (const auto& s : pool) specs.push_back(*s);
    spit(p, sites_to_json(specs));
}

ExperimentConfig config_at(const fs::path& file, const json& j) {
    spit(file, j.dump(2) + "\n");
    return load_config(file);
}

json base_config(const std::string& mode, const std::string& category) {
    return {{"schema", "webskill.config/1"},
            {"mode", mode},
            {"seed", kRunSeed},
            {"family", {{"category", category}, {"n_sites", 3}}},
            {"backends", {{"policy", "oracle"}, {"judge", "programmatic"}, {"inducer", "scripted"}, {"proposer", "gap-driven"}}},
            {"horizon", 20}};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    return out;
}

struct RunDirs {
    std::vector<fs::path> artifacts;  // every artifact directory produced by criteria 3 to 6
};

Outcome end_to_end(const fs::path& work, RunDirs& dirs) {
    auto pool = family("shopping");
    std::vector<std::vector<Task>> per;
    for (const auto& s : pool) per.push_back(generate_tasks(*s, kShoppingTrainTasks, kRunSeed, "train-"));
    std::vector<Task> train;
    for (std::size_t i = 0; train.size() < kShoppingTrainTasks; ++i)
        for (auto& v : per)
            if (train.size() < kShoppingTrainTasks) train.push_back(v[i]);
    spit(work / "e2e" / "train.json", tasks_to_json(with_horizon(train, 20)));

    auto j = base_config("task-defined", "shopping");
    j["train_suite"] = "train.json";
    j["out"] = "out";
    auto c = config_at(work / "e2e" / "config.json", j);
    cmd_run(c);
    j["out"] = "rerun";
    cmd_run(config_at(work / "e2e" / "config-rerun.json", j));
    dirs.artifacts.push_back(c.out);

    auto lib = load_library(c.out / "library");
    if (lib.interfaces().size() != 1) return {false, std::to_string(lib.interfaces().size()) + " interfaces"};
    std::set<std::string> visited;
    for (const auto& t : train) visited.insert(t.site);
    std::set<std::string> implemented;
    for (const auto& [key, impl] : lib.implementations()) {
        if (!implemented.insert(key.first).second) return {false, "two implementations on " + key.first};
        if (impl.implements != lib.interfaces().begin()->second.id) return {false, "foreign interface on " + key.first};
    }
    if (implemented != visited)
        return {false, std::to_string(implemented.size()) + " implementations for " + std::to_string(visited.size()) +
                           " visited sites"};

    std::map<std::string, bool> verified;
    for (const auto& t : trajectories_from_jsonl(slurp(c.out / "trajectories.jsonl"))) verified[t.id] = t.success;
    std::vector<std::string> accepted_ids;
    int accepted = 0;
    for (const auto& a : audit_from_jsonl(slurp(c.out / "audit.jsonl"))) {
        if (a.outcome != "accepted") continue;
        ++accepted;
        if (a.verification_id.empty() || !verified.count(a.verification_id) || !verified[a.verification_id] ||
            !a.verification_success)
            return {false, "accepted proposal at iteration " + std::to_string(a.iteration) + " lacks a successful verification"};
        accepted_ids.insert(accepted_ids.end(), a.new_skills.begin(), a.new_skills.end());
    }
    if (accepted_ids != lib.creation_log()) return {false, "creation log differs from the accepted proposals"};

    auto a = tree(c.out), b = tree(work / "e2e" / "rerun");
    a.erase("meta.json");
    b.erase("meta.json");
    if (a != b) return {false, "rerun artifacts differ"};
    return {true, std::to_string(lib.size()) + " skills from " + std::to_string(accepted) + " accepted proposals, " +
                      std::to_string(implemented.size()) + " implementations, rerun identical over " +
                      std::to_string(a.size()) + " files"};
}

// Coding suite where every learned skill is exercised by the held-out tasks.
Outcome compression_series(const fs::path& work, RunDirs& dirs) {
    auto pool = family("coding");
    const std::vector<std::string> caps = {"open_repo", "star_repo", "create_issue", "add_label", "create_repo"};
    std::vector<Task> train;
    for (std::size_t round = 0; train.size() < kCompressionTrainTasks; ++round)
        for (std::size_t s = 0; s < pool.size() && train.size() < kCompressionTrainTasks; ++s) {
            const auto& cap = caps[(round + s) % caps.size()];
            char id[64];
            std::snprintf(id, sizeof id, "train-%02zu", train.size());
            train.push_back(cap_task(*pool[s], cap, 2 + round, id));
        }
    std::vector<Task> held;
    for (const auto& s : pool) {
        auto add = [&](const std::string& cap, std::vector<std::string> params) {
            auto t = capability_task(*s, cap, std::move(params), "eval-" + s->id + "-" + std::to_string(held.size()));
            t.horizon = 20;
            held.push_back(t);
        };
        for (const auto& cap : {"open_repo", "star_repo", "create_issue", "create_repo"}) add(cap, task_params(*s, cap, 0));
        auto label = task_params(*s, "add_label", 0);
        label.back() = "enhancement";
        add("add_label", label);
        label.back() = "bug";
        add("add_label", label);
    }
    spit(work / "series" / "train.json", tasks_to_json(train));
    spit(work / "series" / "eval.json", tasks_to_json(held));

    auto j = base_config("task-defined", "coding");
    j["train_suite"] = "train.json";
    j["eval_suite"] = "eval.json";
    j["snapshot_interval"] = 1;
    j["out"] = "out";
    auto c = config_at(work / "series" / "config.json", j);
    cmd_run(c);
    dirs.artifacts.push_back(c.out);

    auto series = json::parse(slurp(c.out / "metrics.json"))["series"];
    if (series.size() != static_cast<std::size_t>(kCompressionTrainTasks))
        return {false, std::to_string(series.size()) + " snapshot points"};
    double prev_reuse = -1, prev_steps = 1e300;
    for (const auto& p : series) {
        if (p["mean_steps"].is_null()) return {false, "step " + p["step"].dump() + " has no successful trajectory"};
        double reuse = p["skill_reusability"], steps = p["mean_steps"];
        if (reuse < prev_reuse) return {false, "reusability drops at step " + p["step"].dump()};
        if (steps > prev_steps) return {false, "mean_steps rises at step " + p["step"].dump()};
        prev_reuse = reuse;
        prev_steps = steps;
    }
    double first = series.front()["mean_steps"], last = series.back()["mean_steps"];
    if (last > kStepRatio * first) return {false, "final mean_steps " + fmt("%.3f", last) + " vs initial " + fmt("%.3f", first)};
    return {true, "mean_steps " + fmt("%.3f", first) + " -> " + fmt("%.3f", last) + ", reusability " +
                      fmt("%.3f", series.front()["skill_reusability"].get<double>()) + " -> " + fmt("%.3f", prev_reuse)};
}

Outcome forgetting(const fs::path& work, RunDirs& dirs) {
    auto pool = family("shopping");
    auto j = base_config("continual", "shopping");
    j["phases"] = json::array();
    for (const auto& s : pool) j["phases"].push_back({{"site", s->id}, {"iterations", 6}});
    j["out"] = "out";
    auto c = config_at(work / "continual" / "config.json", j);
    cmd_continual(c);
    dirs.artifacts.push_back(c.out);

    auto rows = lines_of(slurp(c.out / "forgetting.csv"));
    std::optional<std::string> first;
    int seen = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<std::string> f;
        std::stringstream ss(rows[i]);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() < 5 || f[2] != "1") continue;
        ++seen;
        if (!first) first = f[4];
        else if (f[4] != *first) return {false, "suite-1 success rate " + f[4] + " after phase " + f[0] + ", was " + *first};
    }
    if (seen != static_cast<int>(pool.size())) return {false, std::to_string(seen) + " suite-1 rows"};
    return {true, "suite-1 success rate " + *first + " after all " + std::to_string(seen) + " phases"};
}

Outcome transfer(const fs::path& work, RunDirs& dirs) {
    auto pool = family("coding");
    const auto& site_a = pool[0];
    const auto& site_b = pool[1];
    write_sites(work / "transfer" / "site-a.json", {site_a});
    write_sites(work / "transfer" / "site-b.json", {site_b});

    auto learn = base_config("task-defined", "coding");
    learn["sites_file"] = "site-a.json";
    learn["tasks_per_site"] = 6;
    learn["out"] = "learn-a";
    auto ca = config_at(work / "transfer" / "learn.json", learn);
    cmd_run(ca);
    dirs.artifacts.push_back(ca.out);

    // Keep the interface (and its defaults) only.
    auto learned = load_library(ca.out / "library");
    if (learned.interfaces().empty()) return {false, "no interface learned on " + site_a->id};
    std::vector<CategoryInterface> ifaces;
    for (const auto& [cat, iface] : learned.interfaces()) ifaces.push_back(iface);
    std::vector<std::string> log;
    for (const auto& id : learned.creation_log())
        if (id.find('@') == std::string::npos) log.push_back(id);
    auto seed_lib = SkillLibrary::from_parts(ifaces, {}, log);
    fs::remove_all(work / "transfer" / "interface-only");
    save_library(seed_lib, work / "transfer" / "interface-only");
    std::size_t signatures = ifaces.front().abstract_signatures.size();

    auto explore = base_config("task-free", "coding");
    explore["sites_file"] = "site-b.json";
    explore["initial_library"] = "interface-only";
    explore["iterations"] = 10;
    explore["snapshot_interval"] = 1;
    explore["out"] = "explore-b";
    auto cb = config_at(work / "transfer" / "explore.json", explore);
    cmd_explore(cb);
    dirs.artifacts.push_back(cb.out);

    auto seed_for = [&](const std::string& site) { return site == site_b->id; };
    int accepted = 0, covered_at = -1, covered_after = -1;
    for (const auto& a : audit_from_jsonl(slurp(cb.out / "audit.jsonl"))) {
        if (!seed_for(a.site)) return {false, "exploration visited " + a.site};
        if (a.outcome != "accepted") continue;
        ++accepted;
        // Coverage after this proposal, from the snapshot the run recorded.
        auto lib = load_library(cb.out / "libraries" / a.library_after);
        const auto* impl = lib.implementation(site_b->id, ifaces.front().id);
        std::size_t have = 0;
        for (const auto& sig : ifaces.front().abstract_signatures)
            if (impl && impl->find_method(sig.name)) ++have;
        if (have == signatures && covered_at < 0) {
            covered_at = a.step;
            covered_after = accepted;
        }
    }
    if (covered_at < 0) return {false, "coverage incomplete after " + std::to_string(accepted) + " accepted proposals"};
    if (covered_after > static_cast<int>(signatures))
        return {false, "coverage took " + std::to_string(covered_after) + " accepted proposals for " +
                           std::to_string(signatures) + " signatures"};

    double worst = 1;
    for (const auto& p : json::parse(slurp(cb.out / "metrics.json"))["series"]) {
        if (p["step"].get<int>() < covered_at) continue;
        worst = std::min(worst, p["adoption_rate"].get<double>());
    }
    if (worst < kAdoptionFloor) return {false, "adoption " + fmt("%.3f", worst) + " after coverage"};
    return {true, "full coverage of " + std::to_string(signatures) + " signatures after " +
                      std::to_string(covered_after) + " accepted proposals, adoption >= " + fmt("%.3f", worst)};
}

// ---------------------------------------------------------------- criterion 2: step compression

Outcome compression_law(const RunDirs& dirs) {
    int checked = 0;
    for (const auto& dir : dirs.artifacts) {
        SiteMap sites;
        for (auto& s : sites_from_json(slurp(dir / "sites.json"))) {
            auto id = s.id;
            sites[id] = std::make_shared<const SiteSpec>(std::move(s));
        }
        auto tasks = tasks_from_json(slurp(dir / "tasks.json"));
        auto lib = load_library(dir / "library");
        for (const auto& [key, impl] : lib.implementations()) {
            const auto& site = key.first;
            for (const auto& m : impl.methods) {
                if (m.origin != SkillOrigin::Induced) continue;
                auto skill = resolve_in(lib, site, impl.implements, m.name());
                auto tmpl = expand_template(lib, site, skill);
                bool found = false;
                for (const auto& task : tasks) {
                    if (task.site != site) continue;
                    OraclePolicy primitive(false);
                    auto base = execute_task(sites.at(site), task, SkillLibrary{}, primitive).trajectory;
                    if (!base.success) continue;
                    auto prims = base.primitives();
                    for (std::size_t at = 0; at + tmpl.size() <= prims.size() && !found; ++at) {
                        auto args = match_template(skill, tmpl, prims, at);
                        if (!args) continue;
                        std::vector<Statement> script;
                        for (std::size_t i = 0; i < at; ++i) script.push_back(Statement::prim(prims[i]));
                        std::vector<Expr> exprs;
                        for (auto& v : *args) exprs.push_back(Expr{v});
                        script.push_back(Statement::call(m.name(), exprs));
                        for (std::size_t i = at + tmpl.size(); i < prims.size(); ++i) script.push_back(Statement::prim(prims[i]));
                        ScriptedPolicy policy({{task.id, script}});
                        auto with = execute_task(sites.at(site), task, lib, policy).trajectory;
                        auto n = tmpl.size();
                        if (with.wall_steps() + (n - 1) != base.wall_steps())
                            return {false, skill.id + ": " + std::to_string(base.wall_steps()) + " -> " +
                                               std::to_string(with.wall_steps()) + " steps with n=" + std::to_string(n)};
                        if (with.terminal_digest != base.terminal_digest)
                            return {false, skill.id + ": terminal digest changed on " + task.id};
                        found = true;
                    }
                    if (found) break;
                }
                if (!found) return {false, skill.id + " (" + dir.filename().string() + "): no witness contains its expansion"};
                ++checked;
            }
        }
    }
    if (checked == 0) return {false, "no induced skills to check"};
    return {true, std::to_string(checked) + " induced skills"};
}

// ---------------------------------------------------------------- criterion 7: DSL round trip and validation

Outcome dsl_and_validation(const fs::path& work, const RunDirs& dirs) {
    std::vector<fs::path> roots = {fs::path(WEBSKILL_FIXTURE_DIR) / "libraries"};
    for (const auto& d : dirs.artifacts) roots.push_back(d);
    for (int i = 0; i < kMetricFixtures; ++i) roots.push_back(work / ("fixture-" + std::to_string(i)));
    int files = 0;
    for (const auto& root : roots) {
        if (!fs::exists(root)) continue;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.path().extension() != ".skill") continue;
            auto first = parse_skill_file(slurp(e.path()), e.path().string());
            auto printed = print(first);
            auto second = parse_skill_file(printed, "printed");
            if (!(first == second) || print(second) != printed)
                return {false, "round trip changes " + e.path().string()};
            ++files;
        }
    }

    const std::map<std::string, Rule> seeded = {
        {"cycle", Rule::Cycle}, {"arity", Rule::Arity}, {"size", Rule::Size}, {"ordering", Rule::Ordering}};
    int clean = 0;
    for (const auto& e : fs::directory_iterator(fs::path(WEBSKILL_FIXTURE_DIR) / "libraries")) {
        auto name = e.path().filename().string();
        auto violations = validate_library(load_library(e.path()));
        if (name.rfind("clean", 0) == 0) {
            if (!violations.empty())
                return {false, name + ": false positive " + std::string(to_string(violations.front().rule))};
            ++clean;
            continue;
        }
        auto want = seeded.find(name);
        if (want == seeded.end()) return {false, "unexpected fixture " + name};
        bool flagged = false;
        for (const auto& v : violations) {
            if (v.rule == want->second) flagged = true;
            // A cycle always contains a forward reference, so it also breaks ordering.
            else if (!(want->second == Rule::Cycle && v.rule == Rule::Ordering))
                return {false, name + ": unrelated " + std::string(to_string(v.rule)) + " on " + v.skill_id};
        }
        if (!flagged) return {false, name + ": not flagged"};
    }
    return {true, std::to_string(files) + " skill files round-trip, " + std::to_string(seeded.size()) +
                      " seeded classes flagged, " + std::to_string(clean) + " clean fixtures pass"};
}

// ---------------------------------------------------------------- criterion 8: replay closure

std::string mutate(const std::string& jsonl, std::size_t& count) {
    std::vector<json> records;
    for (const auto& line : lines_of(jsonl)) records.push_back(json::parse(line));
    std::string out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i]["kind"] != "end") continue;
        // One copy per step, each with that single action replaced.
        for (std::size_t k = begin; k < i; ++k) {
            auto stmt = records[k]["stmt"].get<std::string>();
            std::string repl = stmt == "noop()" ? "press(\"Escape\")" : "noop()";
            auto id = records[i]["trajectory"].get<std::string>() + "~" + std::to_string(k - begin);
            for (std::size_t r = begin; r <= i; ++r) {
                auto rec = records[r];
                rec["trajectory"] = id;
                if (r == k) {
                    rec["stmt"] = repl;
                    rec["skill"] = "";
                    rec["expansion"] = 1;
                    rec["prims"] = json::array({repl});
                }
                out += rec.dump() + "\n";
            }
            ++count;
        }
        begin = i + 1;
    }
    return out;
}

Outcome replay_closure(const fs::path& work, const RunDirs& dirs) {
    std::size_t matched = 0, mutants = 0;
    int n = 0;
    for (const auto& dir : dirs.artifacts) {
        for (const auto& r : cmd_replay(dir)) {
            if (!r.report.match) return {false, dir.filename().string() + "/" + r.trajectory_id + ": " + r.report.detail};
            ++matched;
        }
        std::string all;
        for (const char* name : {"trajectories.jsonl", "eval.jsonl"})
            if (fs::exists(dir / name)) all += slurp(dir / name);
        std::size_t count = 0;
        auto file = work / ("mutants-" + std::to_string(n++) + ".jsonl");
        spit(file, mutate(all, count));
        auto results = cmd_replay(dir, {}, file);
        if (results.size() != count) return {false, "mutant count mismatch in " + dir.string()};
        for (const auto& r : results)
            if (r.report.match) return {false, "mutant " + r.trajectory_id + " replays as a match"};
        mutants += count;
    }
    return {true, std::to_string(matched) + " trajectories match, " + std::to_string(mutants) + " single-action mutants mismatch"};
}

template <class F>
void timed(Criterion& c, F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        c.outcome = f();
    } catch (const std::exception& e) {
        c.outcome = {false, std::string("error: ") + e.what()};
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.outcome.pass && c.seconds > c.limit_seconds) {
        c.outcome.pass = false;
        c.outcome.detail += " (over the time limit)";
    }
}

} // namespace

int main(int argc, char** argv) {
    fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-work");
    fs::remove_all(work);
    fs::create_directories(work);
    work = fs::absolute(work);

    std::vector<Criterion> cs = {
        {1, "metric oracle equivalence", 5, {}},
        {2, "step-compression law", 5, {}},
        {3, "task-defined end-to-end", 30, {}},
        {4, "compression series", 60, {}},
        {5, "forgetting isolation", 60, {}},
        {6, "abstract-first transfer", 30, {}},
        {7, "DSL round trip and validation", 5, {}},
        {8, "replay closure", 10, {}},
    };
    RunDirs dirs;
    timed(cs[0], [&] { return metric_oracle(work); });
    timed(cs[2], [&] { return end_to_end(work, dirs); });
    timed(cs[3], [&] { return compression_series(work, dirs); });
    timed(cs[4], [&] { return forgetting(work, dirs); });
    timed(cs[5], [&] { return transfer(work, dirs); });
    timed(cs[1], [&] { return compression_law(dirs); });
    timed(cs[6], [&] { return dsl_and_validation(work, dirs); });
    timed(cs[7], [&] { return replay_closure(work, dirs); });

    int failed = 0;
    for (const auto& c : cs) {
        std::printf("%s %d %s: %s [%.2f s, limit %.0f s]\n", c.outcome.pass ? "PASS" : "FAIL", c.number, c.name.c_str(),
                    c.outcome.detail.c_str(), c.seconds, c.limit_seconds);
        if (!c.outcome.pass) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(cs.size()) - failed, cs.size());
    return failed == 0 ? 0 : 1;
}
