#pragma once

// Learning loops: judge a trajectory, induce skills from it (interface first),
// verify them by replaying the same task, and grow the library.

#include "webskill/runtime.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webskill {

struct Verdict {
    bool success = false;
    std::string rationale;
    bool mismatch = false;  // trajectory does not belong to the task
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual std::string id() const = 0;
    virtual Verdict verdict(const Trajectory& traj, const Task& task, const SiteState& final_state) = 0;
};

/// Evaluates the task's success predicate.
class ProgrammaticJudge : public JudgeBackend {
public:
    std::string id() const override { return "programmatic"; }
    Verdict verdict(const Trajectory& traj, const Task& task, const SiteState& final_state) override;
};

class RemoteJudge : public JudgeBackend {
public:
    explicit RemoteJudge(ChatConfig config) : client_(std::move(config)) {}
    std::string id() const override { return "remote:" + client_.config().model; }
    Verdict verdict(const Trajectory& traj, const Task& task, const SiteState& final_state) override;

private:
    ChatClient client_;
};

/// Where the induced skill came from: statements [begin, end) of the source
/// trajectory, to be replaced by `call` during verification.
struct Replacement {
    std::size_t begin = 0;
    std::size_t end = 0;
    Statement call;
};

struct Proposal {
    std::optional<CategoryInterface> interface;  // only when the category has none yet
    std::string site;
    std::string interface_id;
    std::string implementation_id;
    std::vector<SkillDef> methods;
    std::optional<Replacement> replacement;
    std::string note;

    bool empty() const { return !interface && methods.empty(); }
};

std::string print(const Proposal& p);

struct InductionContext {
    const Trajectory& trajectory;
    const Task& task;
    const SkillLibrary& library;
    std::shared_ptr<const SiteSpec> spec;
    int step = 0;  // learning-step index stamped as created_at
    SizeBounds bounds;
};

class InducerBackend {
public:
    virtual ~InducerBackend() = default;
    virtual std::string id() const = 0;
    virtual Proposal propose(const InductionContext& ctx) = 0;
};

/// Deterministic inducer. Splits the trajectory's primitives at milestone
/// effects, takes the segment belonging to the task's capability (or the first
/// not yet implemented), and lifts typed literals into the signature's params.
class ScriptedInducer : public InducerBackend {
public:
    std::string id() const override { return "scripted"; }
    Proposal propose(const InductionContext& ctx) override;
};

class RemoteInducer : public InducerBackend {
public:
    explicit RemoteInducer(ChatConfig config) : client_(std::move(config)) {}
    std::string id() const override { return "remote:" + client_.config().model; }
    Proposal propose(const InductionContext& ctx) override;

    static std::string prompt(const InductionContext& ctx);
    /// Parse every interface/implementation block in a reply.
    static Proposal parse_reply(const std::string& reply, const InductionContext& ctx);

private:
    ChatClient client_;
};

/// Built-in blueprint interface for a category (what the scripted inducer proposes).
CategoryInterface blueprint_interface(std::string_view category);
/// Interface method realizing a manifest capability, if any.
std::optional<std::string> method_for_capability(std::string_view category, std::string_view capability);
std::optional<std::string> capability_for_method(std::string_view category, std::string_view method);

class ValidationError : public Error {
public:
    ValidationError(const std::string& message, std::vector<Violation> violations)
        : Error(ErrorCode::ValidationFailed, message), violations_(std::move(violations)) {}
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

struct ProposalOutcome {
    Proposal proposal;
    std::string verification_id;
    std::optional<Trajectory> verification;
    bool accepted = false;
    std::string reason;
    std::vector<Violation> violations;
    std::vector<std::string> new_skills;  // ids appended to the creation log on acceptance
};

/// Library with the proposal registered (interface first). Throws
/// ValidationError on any grammar, conformance, ordering or size problem.
SkillLibrary tentative_library(const SkillLibrary& lib, const Proposal& proposal, int step, SizeBounds bounds);

/// Asks the inducer and validates. Requires a successful trajectory.
ProposalOutcome induce_from_trajectory(const InductionContext& ctx, InducerBackend& inducer);

/// The statements of `original` with every primitive run matching one of
/// `skill_ids` (callable on the site) replaced by a call. Used when a proposal
/// carries no Replacement.
std::vector<Statement> rewrite_with_skills(const SkillLibrary& lib, std::string_view site,
                                           const std::vector<Statement>& original,
                                           const std::vector<std::string>& skill_ids);

/// Replays the same task with the proposed skills substituted in; on a judged
/// success returns the grown library, else the input library.
SkillLibrary verify_and_commit(ProposalOutcome& outcome, const SkillLibrary& lib, const InductionContext& ctx,
                               JudgeBackend& judge);

struct AuditRecord {
    int iteration = 0;
    int step = 0;
    std::string mode;  // defined | free
    std::string task_id;
    std::string site;
    std::string instruction;
    std::string trajectory_id;
    bool judged_success = false;
    std::string rationale;
    std::string outcome;  // failed | nothing_new | accepted | rejected | invalid | error
    std::string detail;
    std::string proposal;  // DSL text
    std::string verification_id;
    bool verification_success = false;
    std::vector<std::string> new_skills;
    std::string library_before;
    std::string library_after;
    std::size_t library_size = 0;
};

std::string audit_to_jsonl(const std::vector<AuditRecord>& records);
std::vector<AuditRecord> audit_from_jsonl(std::string_view text);

struct LearningOptions {
    SizeBounds bounds;
    int first_step = 1;   // learning-step counter for the first iteration
    int induction_retries = 0;
    std::string trajectory_prefix = "train";
};

using SiteMap = std::map<std::string, std::shared_ptr<const SiteSpec>>;

struct LearningResult {
    SkillLibrary library;
    std::vector<Trajectory> trajectories;   // task episodes, then verification episodes interleaved in order
    std::vector<AuditRecord> audit;
    std::vector<ProposalOutcome> outcomes;
    std::vector<SkillLibrary> snapshots;    // library after each iteration
    std::vector<Task> tasks;                // tasks attempted, in order
    std::map<std::string, int> site_iterations;
    std::map<std::string, SkillLibrary> libraries;  // every library an episode ran against, by digest
};

LearningResult run_task_defined(const std::vector<Task>& tasks, const SkillLibrary& lib0, const SiteMap& sites,
                                PolicyBackend& policy, JudgeBackend& judge, InducerBackend& inducer,
                                const LearningOptions& options = {});

struct ProposalRequest {
    const SiteSpec& spec;
    const Observation& observation;
    const SkillLibrary& library;
    int iteration = 0;
};

class ProposerBackend {
public:
    virtual ~ProposerBackend() = default;
    virtual std::string id() const = 0;
    virtual Task propose(const ProposalRequest& req) = 0;
};

/// Unimplemented interface signatures first; compositional templates once the
/// site is complete; an affordance scan when the category has no interface.
class GapDrivenProposer : public ProposerBackend {
public:
    std::string id() const override { return "gap-driven"; }
    Task propose(const ProposalRequest& req) override;
};

class RemoteProposer : public ProposerBackend {
public:
    explicit RemoteProposer(ChatConfig config) : client_(std::move(config)) {}
    std::string id() const override { return "remote:" + client_.config().model; }
    Task propose(const ProposalRequest& req) override;

private:
    ChatClient client_;
};

Task propose_task(const ProposalRequest& req, ProposerBackend& proposer);

enum class SiteSelection { SelfGuided, RoundRobin };

struct ExploreOptions : LearningOptions {
    SiteSelection selection = SiteSelection::SelfGuided;
};

/// Signatures of the category interface the site has not implemented (all
/// manifest capabilities when the category has no interface).
std::size_t unimplemented_count(const SkillLibrary& lib, const SiteSpec& spec);

LearningResult run_task_free(int n_steps, const SkillLibrary& lib0, const std::vector<std::shared_ptr<const SiteSpec>>& pool,
                             PolicyBackend& policy, JudgeBackend& judge, InducerBackend& inducer,
                             ProposerBackend& proposer, const ExploreOptions& options = {});

} // namespace webskill
