#pragma once

// Episode execution: the policy loop over primitives plus library skills.

#include "webskill/chat.hpp"
#include "webskill/skill_library.hpp"
#include "webskill/web_sim.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webskill {

struct StepRecord {
    int index = 0;
    std::string obs_digest;
    Statement stmt;
    std::string skill_id;  // resolved id of a Call; empty otherwise
    int expansion_length = 0;
    std::vector<PrimitiveAction> prims;
    std::string post_digest;  // state digest after the step
    std::string chain;        // running digest over all previous records
};

enum class EndReason { Success, Stop, Horizon, PolicyFault };
std::string_view to_string(EndReason r);
std::optional<EndReason> end_reason_from_name(std::string_view name);

struct Trajectory {
    std::string id;
    std::string task_id;
    std::string site;
    std::string library;  // digest of the library snapshot the episode ran against
    std::vector<StepRecord> steps;
    std::string terminal_digest;
    bool success = false;
    EndReason end = EndReason::Horizon;
    int horizon = 0;
    std::string fault;       // error text when end == PolicyFault
    std::string fault_stmt;  // the rejected statement, if the policy produced one

    /// Steps as the agent pays for them (one per recorded statement).
    std::size_t wall_steps() const { return steps.size(); }
    std::vector<Statement> statements() const;
    std::vector<PrimitiveAction> primitives() const;
    /// Qualified ids of the outermost skill calls, in order.
    std::vector<std::string> called_skills() const;
};

struct Episode {
    Trajectory trajectory;
    SiteState final_state;
};

struct WorkingMemory {
    std::string instruction;
    std::size_t window = 20;
    std::deque<std::pair<std::string, std::string>> history;  // (observation digest, statement text)
    std::vector<std::string> notes;

    void append(std::string obs_digest, std::string stmt);
};

struct PolicyContext {
    const Task& task;
    const Observation& observation;
    const WorkingMemory& memory;
    const std::vector<ResolvedSkill>& skills;  // callable on this site
    const SiteState& state;
    const SkillLibrary& library;
};

class PolicyBackend {
public:
    virtual ~PolicyBackend() = default;
    virtual std::string id() const = 0;
    virtual void begin_episode(const Task& task) { (void)task; }
    /// Errors thrown here end the episode as a PolicyFault.
    virtual Statement propose(const PolicyContext& ctx) = 0;
};

struct RunOptions {
    int horizon = 0;  // 0: use the task's horizon
    std::size_t memory_window = 20;
    std::string trajectory_id;  // defaults to the task id
};

/// MissingScript propagates; every other policy or expansion error is recorded
/// as a PolicyFault and applies nothing.
Episode execute_task(std::shared_ptr<const SiteSpec> spec, const Task& task, const SkillLibrary& lib,
                     PolicyBackend& policy, const RunOptions& options = {});

/// Digest identifying a library snapshot (over its printed files and creation log).
std::string library_digest(const SkillLibrary& lib);

class ScriptedPolicy : public PolicyBackend {
public:
    explicit ScriptedPolicy(std::map<std::string, std::vector<Statement>> script, std::string name = "scripted");
    std::string id() const override { return name_; }
    void begin_episode(const Task& task) override;
    Statement propose(const PolicyContext& ctx) override;

private:
    std::map<std::string, std::vector<Statement>> script_;
    std::string name_;
    const std::vector<Statement>* current_ = nullptr;
    std::size_t cursor_ = 0;
};

/// Plans the shortest witness for the task, then compresses it greedily with
/// the longest callable skill whose expansion matches the upcoming primitives.
class OraclePolicy : public PolicyBackend {
public:
    explicit OraclePolicy(bool use_skills = true) : use_skills_(use_skills) {}
    std::string id() const override { return use_skills_ ? "oracle" : "oracle-primitive"; }
    void begin_episode(const Task& task) override;
    Statement propose(const PolicyContext& ctx) override;

private:
    bool use_skills_;
    std::optional<std::vector<Statement>> plan_;
    std::size_t cursor_ = 0;
};

/// Rewrite a primitive sequence into statements, greedily replacing the longest
/// run that matches a callable skill's expansion.
std::vector<Statement> compress_with_skills(const SkillLibrary& lib, std::string_view site,
                                            const std::vector<PrimitiveAction>& prims);

/// Try to match `tmpl` against prims[at...]; returns argument values per skill
/// parameter on success.
std::optional<std::vector<Value>> match_template(const ResolvedSkill& skill, const std::vector<PrimStmt>& tmpl,
                                                 const std::vector<PrimitiveAction>& prims, std::size_t at);

class RemotePolicy : public PolicyBackend {
public:
    explicit RemotePolicy(ChatConfig config);
    std::string id() const override { return "remote:" + client_.config().model; }
    Statement propose(const PolicyContext& ctx) override;

    static std::string system_prompt();
    static std::string user_prompt(const PolicyContext& ctx);

private:
    ChatClient client_;
};

struct ReplayReport {
    bool match = false;
    int first_divergent_step = -1;  // -1 when the divergence is in the terminal record
    std::string detail;
};

/// Re-execute the logged statements and compare digests record by record.
ReplayReport replay_trajectory(std::shared_ptr<const SiteSpec> spec, const Task& task, const SkillLibrary& lib,
                               const Trajectory& logged);

std::string trajectory_to_jsonl(const Trajectory& t);
/// Trajectories in file order. SchemaMismatch on foreign or mixed schemas.
std::vector<Trajectory> trajectories_from_jsonl(std::string_view text);

} // namespace webskill
