#include "webskill/runtime.hpp"

#include "webskill/digest.hpp"

#include "json.hpp"

#include <sstream>

namespace webskill {

using json = nlohmann::json;

namespace {

constexpr std::string_view kTrajectorySchema = "webskill.trajectory/1";
constexpr int kMaxReplyAttempts = 3;

std::string chain_next(const std::string& prev, const StepRecord& r) {
    Fnv1a h;
    h.field(prev).field(r.obs_digest).field(print(r.stmt)).field(r.post_digest);
    return h.hex();
}

std::string chain_seed(const Task& task) {
    Fnv1a h;
    h.field(task.id).field(task.site);
    return h.hex();
}

} // namespace

std::string_view to_string(EndReason r) {
    switch (r) {
    case EndReason::Success: return "success";
    case EndReason::Stop: return "stop";
    case EndReason::Horizon: return "horizon";
    case EndReason::PolicyFault: return "fault";
    }
    return "?";
}

std::optional<EndReason> end_reason_from_name(std::string_view name) {
    for (auto r : {EndReason::Success, EndReason::Stop, EndReason::Horizon, EndReason::PolicyFault})
        if (to_string(r) == name) return r;
    return std::nullopt;
}

std::vector<Statement> Trajectory::statements() const {
    std::vector<Statement> out;
    for (const auto& s : steps) out.push_back(s.stmt);
    return out;
}

std::vector<PrimitiveAction> Trajectory::primitives() const {
    std::vector<PrimitiveAction> out;
    for (const auto& s : steps) out.insert(out.end(), s.prims.begin(), s.prims.end());
    return out;
}

std::vector<std::string> Trajectory::called_skills() const {
    std::vector<std::string> out;
    for (const auto& s : steps)
        if (!s.skill_id.empty()) out.push_back(s.skill_id);
    return out;
}

void WorkingMemory::append(std::string obs_digest, std::string stmt) {
    history.emplace_back(std::move(obs_digest), std::move(stmt));
    while (history.size() > window) history.pop_front();
}

std::string library_digest(const SkillLibrary& lib) {
    Fnv1a h;
    for (const auto& [cat, iface] : lib.interfaces()) h.field(print(iface));
    for (const auto& [key, impl] : lib.implementations()) h.field(print(impl));
    for (const auto& id : lib.creation_log()) h.field(id);
    return h.hex();
}

Episode execute_task(std::shared_ptr<const SiteSpec> spec, const Task& task, const SkillLibrary& lib,
                     PolicyBackend& policy, const RunOptions& options) {
    int horizon = options.horizon > 0 ? options.horizon : task.horizon;
    if (horizon < 1) fail(ErrorCode::Config, "horizon must be at least 1");
    auto [state, obs] = reset(spec, task);

    Trajectory traj;
    traj.id = options.trajectory_id.empty() ? task.id : options.trajectory_id;
    traj.task_id = task.id;
    traj.site = task.site;
    traj.library = library_digest(lib);
    traj.horizon = horizon;

    WorkingMemory memory;
    memory.instruction = task.instruction;
    memory.window = options.memory_window;
    auto skills = callable_skills(lib, task.site);
    std::vector<PrimitiveAction> applied;
    std::string chain = chain_seed(task);

    policy.begin_episode(task);
    traj.end = EndReason::Horizon;
    for (int t = 0; t < horizon; ++t) {
        Statement stmt;
        try {
            stmt = policy.propose(PolicyContext{task, obs, memory, skills, state, lib});
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MissingScript) throw;
            traj.end = EndReason::PolicyFault;
            traj.fault = std::string(to_string(e.code())) + ": " + e.what();
            break;
        }

        StepRecord rec;
        rec.index = t;
        rec.obs_digest = digest(obs);
        rec.stmt = stmt;
        if (!stmt.is_stop()) {
            try {
                rec.prims = expand(lib, task.site, stmt);
                if (stmt.is_call()) rec.skill_id = resolve(lib, task.site, stmt.as_call().target).id;
            } catch (const Error& e) {
                traj.end = EndReason::PolicyFault;
                traj.fault = std::string(to_string(e.code())) + ": " + e.what();
                traj.fault_stmt = print(stmt);
                break;
            }
        }
        rec.expansion_length = static_cast<int>(rec.prims.size());
        for (const auto& a : rec.prims) {
            std::tie(state, obs) = step(state, a);
            applied.push_back(a);
        }
        rec.post_digest = state_digest(state);
        rec.chain = chain = chain_next(chain, rec);
        memory.append(rec.obs_digest, print(stmt));
        traj.steps.push_back(std::move(rec));

        if (stmt.is_stop()) {
            traj.end = EndReason::Stop;
            break;
        }
        if (check_success(task, state, applied)) {
            traj.end = EndReason::Success;
            traj.success = true;
            break;
        }
    }
    traj.terminal_digest = state_digest(state);
    return Episode{std::move(traj), std::move(state)};
}

ScriptedPolicy::ScriptedPolicy(std::map<std::string, std::vector<Statement>> script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

void ScriptedPolicy::begin_episode(const Task& task) {
    auto it = script_.find(task.id);
    if (it == script_.end()) fail(ErrorCode::MissingScript, "no script for task " + task.id);
    current_ = &it->second;
    cursor_ = 0;
}

Statement ScriptedPolicy::propose(const PolicyContext&) {
    if (!current_ || cursor_ >= current_->size()) return Statement::stop();
    return (*current_)[cursor_++];
}

std::optional<std::vector<Value>> match_template(const ResolvedSkill& skill, const std::vector<PrimStmt>& tmpl,
                                                 const std::vector<PrimitiveAction>& prims, std::size_t at) {
    if (tmpl.empty() || at + tmpl.size() > prims.size()) return std::nullopt;
    std::map<std::string, Value, std::less<>> bound;
    for (std::size_t k = 0; k < tmpl.size(); ++k) {
        const auto& t = tmpl[k];
        const auto& p = prims[at + k];
        if (t.kind != p.kind || t.args.size() != p.args.size()) return std::nullopt;
        for (std::size_t a = 0; a < t.args.size(); ++a) {
            const auto& e = t.args[a];
            if (!e.is_param()) {
                if (e.value() != p.args[a]) return std::nullopt;
                continue;
            }
            auto [it, fresh] = bound.emplace(e.param().name, p.args[a]);
            if (!fresh && it->second != p.args[a]) return std::nullopt;
        }
    }
    std::vector<Value> args;
    for (const auto& param : skill.def.signature.params) {
        auto it = bound.find(param.name);
        if (it == bound.end() || it->second.kind != param.kind) return std::nullopt;
        args.push_back(it->second);
    }
    return args;
}

std::vector<Statement> compress_with_skills(const SkillLibrary& lib, std::string_view site,
                                            const std::vector<PrimitiveAction>& prims) {
    struct Candidate {
        ResolvedSkill skill;
        std::vector<PrimStmt> tmpl;
    };
    std::vector<Candidate> cands;
    for (auto& s : callable_skills(lib, site)) {
        try {
            if (resolve(lib, site, s.def.name()).id != s.id) continue;  // shadowed by another interface
            auto tmpl = expand_template(lib, site, s);
            if (tmpl.size() >= 2) cands.push_back({std::move(s), std::move(tmpl)});
        } catch (const Error&) {
        }
    }
    std::vector<Statement> out;
    std::size_t i = 0;
    while (i < prims.size()) {
        const Candidate* best = nullptr;
        std::vector<Value> best_args;
        for (const auto& c : cands) {
            if (best && c.tmpl.size() <= best->tmpl.size()) continue;
            if (auto args = match_template(c.skill, c.tmpl, prims, i)) {
                best = &c;
                best_args = std::move(*args);
            }
        }
        if (best) {
            std::vector<Expr> args;
            for (auto& v : best_args) args.push_back(Expr{std::move(v)});
            out.push_back(Statement::call(best->skill.def.name(), std::move(args)));
            i += best->tmpl.size();
        } else {
            out.push_back(Statement::prim(prims[i]));
            ++i;
        }
    }
    return out;
}

void OraclePolicy::begin_episode(const Task&) {
    plan_.reset();
    cursor_ = 0;
}

Statement OraclePolicy::propose(const PolicyContext& ctx) {
    if (!plan_) {
        plan_.emplace();
        if (auto w = find_witness(ctx.state.spec, ctx.task)) {
            if (use_skills_) {
                *plan_ = compress_with_skills(ctx.library, ctx.task.site, *w);
            } else {
                for (const auto& a : *w) plan_->push_back(Statement::prim(a));
            }
        }
    }
    if (cursor_ >= plan_->size()) return Statement::stop();
    return (*plan_)[cursor_++];
}

RemotePolicy::RemotePolicy(ChatConfig config) : client_(std::move(config)) {}

std::string RemotePolicy::system_prompt() {
    return "You operate a website through one action per turn.\n"
           "Primitive actions:\n"
           "  noop() | click(#id) | hover(#id) | type(#id, \"text\") | press(\"Key\") | scroll(\"up|down\")\n"
           "  tab_focus(N) | new_tab() | tab_close() | go_back() | go_forward() | goto(\"page\")\n"
           "Learned skills are invoked as: call name(arg, ...), e.g. call search(\"mug\").\n"
           "A skill call counts as a single step, so prefer a skill when it covers what you need.\n"
           "Reply `stop` when the task is complete or cannot be completed.\n"
           "Reply with exactly one action and nothing else.";
}

std::string RemotePolicy::user_prompt(const PolicyContext& ctx) {
    std::ostringstream os;
    os << "Task: " << ctx.task.instruction << "\n\n";
    os << "Current page:\n" << render(ctx.observation) << "\n";
    if (!ctx.memory.history.empty()) {
        os << "Previous actions:\n";
        for (const auto& [obs, stmt] : ctx.memory.history) os << "  " << stmt << "\n";
        os << "\n";
    }
    if (!ctx.skills.empty()) {
        os << "Available skills:\n";
        for (const auto& s : ctx.skills) {
            os << "  " << print(s.def.signature) << "\n";
        }
        os << "\n";
    }
    os << "Next action:";
    return os.str();
}

Statement RemotePolicy::propose(const PolicyContext& ctx) {
    std::vector<ChatMessage> messages{{"system", system_prompt()}, {"user", user_prompt(ctx)}};
    std::string last;
    for (int attempt = 0; attempt < kMaxReplyAttempts; ++attempt) {
        auto reply = client_.complete(messages);
        for (const auto& line : candidate_lines(reply)) {
            try {
                return parse_statement(line);
            } catch (const Error& e) {
                last = e.what();
            }
        }
        messages.push_back({"assistant", reply});
        messages.push_back({"user", "That was not a valid action (" + last + "). Reply with exactly one action."});
    }
    fail(ErrorCode::PolicyFault, "no valid action after " + std::to_string(kMaxReplyAttempts) + " replies: " + last);
}

namespace {

class ReplayPolicy : public PolicyBackend {
public:
    explicit ReplayPolicy(const Trajectory& t) : t_(t) {}
    std::string id() const override { return "replay"; }
    Statement propose(const PolicyContext&) override {
        if (cursor_ < t_.steps.size()) return t_.steps[cursor_++].stmt;
        if (t_.end == EndReason::PolicyFault) {
            if (!t_.fault_stmt.empty() && !fault_emitted_) {
                fault_emitted_ = true;
                return parse_statement(t_.fault_stmt);
            }
            fail(ErrorCode::PolicyFault, t_.fault);
        }
        return Statement::stop();
    }

private:
    const Trajectory& t_;
    std::size_t cursor_ = 0;
    bool fault_emitted_ = false;
};

} // namespace

ReplayReport replay_trajectory(std::shared_ptr<const SiteSpec> spec, const Task& task, const SkillLibrary& lib,
                               const Trajectory& logged) {
    ReplayPolicy policy(logged);
    RunOptions opts;
    opts.horizon = logged.horizon;
    opts.trajectory_id = logged.id;
    auto fresh = execute_task(std::move(spec), task, lib, policy, opts).trajectory;

    ReplayReport rep;
    auto n = std::min(fresh.steps.size(), logged.steps.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = logged.steps[i];
        const auto& b = fresh.steps[i];
        std::string what;
        if (a.obs_digest != b.obs_digest) what = "observation digest";
        else if (a.post_digest != b.post_digest) what = "post-state digest";
        else if (a.expansion_length != b.expansion_length || a.prims != b.prims) what = "expansion";
        else if (a.chain != b.chain) what = "chain digest";
        if (!what.empty()) {
            rep.first_divergent_step = static_cast<int>(i);
            rep.detail = "step " + std::to_string(i) + ": " + what + " differs (logged `" + print(a.stmt) + "`)";
            return rep;
        }
    }
    if (fresh.steps.size() != logged.steps.size()) {
        rep.first_divergent_step = static_cast<int>(n);
        rep.detail = "step count differs: logged " + std::to_string(logged.steps.size()) + ", replayed " +
                     std::to_string(fresh.steps.size());
        return rep;
    }
    if (fresh.terminal_digest != logged.terminal_digest || fresh.success != logged.success || fresh.end != logged.end) {
        rep.detail = "terminal record differs";
        return rep;
    }
    rep.match = true;
    rep.detail = "match (" + std::to_string(logged.steps.size()) + " steps)";
    return rep;
}

std::string trajectory_to_jsonl(const Trajectory& t) {
    std::string out;
    for (const auto& s : t.steps) {
        json prims = json::array();
        for (const auto& a : s.prims) prims.push_back(print(a));
        json rec = {{"schema", kTrajectorySchema}, {"kind", "step"},        {"trajectory", t.id},
                    {"task", t.task_id},           {"site", t.site},        {"index", s.index},
                    {"obs", s.obs_digest},         {"stmt", print(s.stmt)}, {"skill", s.skill_id},
                    {"expansion", s.expansion_length}, {"prims", prims},   {"post", s.post_digest},
                    {"chain", s.chain}};
        out += rec.dump() + "\n";
    }
    json end = {{"schema", kTrajectorySchema},
                {"kind", "end"},
                {"trajectory", t.id},
                {"task", t.task_id},
                {"site", t.site},
                {"library", t.library},
                {"steps", t.steps.size()},
                {"horizon", t.horizon},
                {"terminal", t.terminal_digest},
                {"success", t.success},
                {"reason", std::string(to_string(t.end))},
                {"fault", t.fault},
                {"fault_stmt", t.fault_stmt}};
    out += end.dump() + "\n";
    return out;
}

std::vector<Trajectory> trajectories_from_jsonl(std::string_view text) {
    std::vector<Trajectory> out;
    Trajectory cur;
    bool open = false;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": " + e.what());
        }
        auto schema = j.value("schema", "");
        if (schema != kTrajectorySchema)
            fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": schema '" + schema +
                                                "', expected '" + std::string(kTrajectorySchema) + "'");
        try {
            auto id = j.at("trajectory").get<std::string>();
            if (!open) {
                cur = Trajectory{};
                cur.id = id;
                cur.task_id = j.at("task").get<std::string>();
                cur.site = j.at("site").get<std::string>();
                open = true;
            } else if (cur.id != id) {
                fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": trajectory " + cur.id +
                                                    " has no end record");
            }
            if (j.at("kind") == "step") {
                StepRecord s;
                s.index = j.at("index").get<int>();
                if (s.index != static_cast<int>(cur.steps.size()))
                    fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": step index not contiguous");
                s.obs_digest = j.at("obs").get<std::string>();
                s.stmt = parse_statement(j.at("stmt").get<std::string>());
                s.skill_id = j.value("skill", "");
                s.expansion_length = j.at("expansion").get<int>();
                for (const auto& p : j.at("prims")) {
                    auto st = parse_statement(p.get<std::string>());
                    auto g = st.is_prim() ? ground(st.as_prim()) : std::nullopt;
                    if (!g) fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": bad primitive");
                    s.prims.push_back(*g);
                }
                s.post_digest = j.at("post").get<std::string>();
                s.chain = j.at("chain").get<std::string>();
                cur.steps.push_back(std::move(s));
            } else if (j.at("kind") == "end") {
                cur.library = j.value("library", "");
                cur.horizon = j.value("horizon", 0);
                cur.terminal_digest = j.at("terminal").get<std::string>();
                cur.success = j.at("success").get<bool>();
                auto reason = end_reason_from_name(j.at("reason").get<std::string>());
                if (!reason) fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": bad end reason");
                cur.end = *reason;
                cur.fault = j.value("fault", "");
                cur.fault_stmt = j.value("fault_stmt", "");
                if (j.at("steps").get<std::size_t>() != cur.steps.size())
                    fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": step count mismatch");
                out.push_back(std::move(cur));
                open = false;
            } else {
                fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": unknown record kind");
            }
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (open) fail(ErrorCode::SchemaMismatch, "trajectory " + cur.id + " has no end record");
    return out;
}

} // namespace webskill
