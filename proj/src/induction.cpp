#include "webskill/induction.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace webskill {

using json = nlohmann::json;

namespace {

struct MethodBinding {
    std::string_view category;
    std::string_view method;
    std::string_view capability;
    Effect milestone;
};

constexpr MethodBinding kBindings[] = {
    {"shopping", "search", "search", Effect::SubmitQuery},
    {"shopping", "add_to_cart", "add_to_cart", Effect::AddToCart},
    {"shopping", "add_to_wishlist", "add_to_wishlist", Effect::AddToWishlist},
    {"shopping", "apply_filter", "filter", Effect::ApplyFilter},
    {"shopping", "checkout", "checkout", Effect::PlaceOrder},
    {"coding", "create_repo", "create_repo", Effect::CreateRepo},
    {"coding", "open_repo", "open_repo", Effect::OpenResult},
    {"coding", "star_repo", "star_repo", Effect::Star},
    {"coding", "create_issue", "create_issue", Effect::CreateIssue},
    {"coding", "add_label", "add_label", Effect::SubmitLabel},
};

const char* kShoppingBlueprint = R"(interface AbstractShopping category shopping {
  abstract search(query: text) "Search the catalog and show the results"
  abstract add_to_cart() "Put the first listed result in the cart"
  abstract add_to_wishlist() "Save the first listed result to the wishlist"
  abstract apply_filter() "Restrict the shown results to budget items"
  abstract checkout() "Place an order for everything in the cart"
  default skill buy_item(query: text) "Search, add the first hit, check out" {
    call search(query)
    call add_to_cart()
    call checkout()
  }
}
)";

const char* kCodingBlueprint = R"(interface AbstractCoding category coding {
  abstract create_repo(name: text) "Create a new repository"
  abstract open_repo(name: text) "Open an existing repository"
  abstract star_repo() "Star the repository on display"
  abstract create_issue(title: text) "Open an issue on the repository on display"
  abstract add_label(label: text) "Label the issue on display"
  default skill report_bug(name: text, title: text) "File a labelled bug report" {
    call open_repo(name)
    call create_issue(title)
    call add_label("bug")
  }
}
)";

std::optional<std::string> method_for_effect(std::string_view category, Effect e) {
    for (const auto& b : kBindings)
        if (b.category == category && b.milestone == e) return std::string(b.method);
    return std::nullopt;
}

std::string impl_name(std::string_view site) {
    std::string out;
    bool up = true;
    for (char c : site) {
        if (!std::isalnum(static_cast<unsigned char>(c))) {
            up = true;
            continue;
        }
        out += up ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
        up = false;
    }
    return out + "Site";
}

std::string step_id(std::string_view prefix, int step) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", step);
    return std::string(prefix) + "-" + buf;
}

std::string describe(const std::vector<Violation>& vs) {
    std::string out;
    for (const auto& v : vs) {
        if (!out.empty()) out += "; ";
        out += v.skill_id + " [" + std::string(to_string(v.rule)) + "] " + v.detail;
    }
    return out;
}

struct Segment {
    std::size_t begin = 0;  // primitive indices
    std::size_t end = 0;
    std::optional<std::string> method;
};

std::vector<Segment> segment(const InductionContext& ctx, const std::vector<PrimitiveAction>& prims) {
    const auto& category = ctx.spec->category;
    std::vector<Segment> segs;
    auto state = reset(ctx.spec, ctx.task).first;
    std::size_t start = 0;
    for (std::size_t i = 0; i < prims.size(); ++i) {
        auto tr = transition(state, prims[i]);
        state = std::move(tr.state);
        if (!tr.effect) continue;
        if (auto m = method_for_effect(category, *tr.effect)) {
            segs.push_back({start, i + 1, m});
            start = i + 1;
        }
    }
    auto min = static_cast<std::size_t>(std::max(1, ctx.bounds.min_steps));
    std::vector<Segment> merged;
    std::optional<std::size_t> carry;  // begin of a short run waiting to merge forward
    for (auto s : segs) {
        if (carry) {
            s.begin = *carry;
            carry.reset();
        }
        if (s.end - s.begin < min) {
            carry = s.begin;
            continue;
        }
        merged.push_back(s);
    }
    if (carry && !merged.empty()) {
        merged.back().end = segs.back().end;
        merged.back().method = segs.back().method;
    }
    return merged;
}

// Statement span covering exactly prims [begin, end), all of them primitive statements.
std::optional<std::pair<std::size_t, std::size_t>> statement_span(const Trajectory& t, std::size_t begin,
                                                                   std::size_t end) {
    std::size_t pos = 0;
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        const auto& s = t.steps[i];
        auto len = s.prims.size();
        if (len == 0) continue;
        if (pos >= begin && pos + len <= end) {
            if (!s.stmt.is_prim()) return std::nullopt;
            if (!first) {
                if (pos != begin) return std::nullopt;
                first = i;
            }
            if (pos + len == end) return std::make_pair(*first, i + 1);
        } else if (pos < end && pos + len > begin) {
            return std::nullopt;  // a step straddles the boundary
        }
        pos += len;
    }
    return std::nullopt;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trajectory_text(const Trajectory& t) {
    std::ostringstream os;
    for (const auto& s : t.steps) {
        os << "  " << print(s.stmt);
        if (s.stmt.is_call()) {
            os << "    # expands to:";
            for (const auto& p : s.prims) os << " " << print(p) << ";";
        }
        os << "\n";
    }
    return os.str();
}

// Extract `interface ... { ... }` and `implementation ... { ... }` blocks.
std::vector<std::string> skill_blocks(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto a = text.find("interface ", i);
        auto b = text.find("implementation ", i);
        auto start = std::min(a, b);
        if (start == std::string::npos) break;
        if (start > 0 && std::isalnum(static_cast<unsigned char>(text[start - 1]))) {
            i = start + 1;
            continue;
        }
        auto open = text.find('{', start);
        if (open == std::string::npos) break;
        int depth = 0;
        bool in_str = false;
        std::size_t j = open;
        for (; j < text.size(); ++j) {
            char c = text[j];
            if (in_str) {
                if (c == '\\') ++j;
                else if (c == '"') in_str = false;
                continue;
            }
            if (c == '"') in_str = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) break;
        }
        if (j >= text.size()) break;
        out.push_back(text.substr(start, j + 1 - start));
        i = j + 1;
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------- judges

Verdict ProgrammaticJudge::verdict(const Trajectory& traj, const Task& task, const SiteState& final_state) {
    Verdict v;
    if (traj.task_id != task.id || traj.site != task.site) {
        v.mismatch = true;
        v.rationale = "trajectory " + traj.id + " belongs to task " + traj.task_id + ", not " + task.id;
        return v;
    }
    auto prims = traj.primitives();
    v.success = check_success(task, final_state, prims);
    v.rationale = explain_success(task, final_state, prims);
    return v;
}

Verdict RemoteJudge::verdict(const Trajectory& traj, const Task& task, const SiteState& final_state) {
    Verdict v;
    if (traj.task_id != task.id || traj.site != task.site) {
        v.mismatch = true;
        v.rationale = "trajectory " + traj.id + " belongs to task " + traj.task_id + ", not " + task.id;
        return v;
    }
    std::ostringstream os;
    os << "Task: " << task.instruction << "\n\nActions taken:\n" << trajectory_text(traj)
       << "\nFinal page:\n" << render(observe(final_state))
       << "\nDid the actions accomplish the task? Answer YES or NO on the first line, then one sentence why.";
    std::vector<ChatMessage> messages{
        {"system", "You check whether a web agent finished its task. Judge only from the evidence given."},
        {"user", os.str()}};
    auto reply = client_.complete(messages);
    auto lines = candidate_lines(reply);
    if (lines.empty()) fail(ErrorCode::MalformedReply, "judge reply is empty");
    auto head = lower(lines.front());
    if (head.rfind("yes", 0) == 0) v.success = true;
    else if (head.rfind("no", 0) != 0) fail(ErrorCode::MalformedReply, "judge reply does not start with YES or NO");
    for (std::size_t i = 1; i < lines.size(); ++i) v.rationale += (i > 1 ? " " : "") + lines[i];
    if (v.rationale.empty()) v.rationale = lines.front();
    return v;
}

// ---------------------------------------------------------------- proposals

std::string print(const Proposal& p) {
    std::string out;
    if (p.interface) out += print(*p.interface);
    if (!p.methods.empty()) {
        SiteImplementation impl{p.implementation_id, p.interface_id, p.site, p.methods, 0};
        if (!p.methods.empty()) impl.created_at = p.methods.front().created_at;
        if (!out.empty()) out += "\n";
        out += print(impl);
    }
    return out;
}

CategoryInterface blueprint_interface(std::string_view category) {
    if (category == "shopping") return std::get<CategoryInterface>(parse_skill_file(kShoppingBlueprint, "shopping"));
    if (category == "coding") return std::get<CategoryInterface>(parse_skill_file(kCodingBlueprint, "coding"));
    fail(ErrorCode::UnknownCategory, "no blueprint interface for category '" + std::string(category) + "'");
}

std::optional<std::string> method_for_capability(std::string_view category, std::string_view capability) {
    for (const auto& b : kBindings)
        if (b.category == category && b.capability == capability) return std::string(b.method);
    return std::nullopt;
}

std::optional<std::string> capability_for_method(std::string_view category, std::string_view method) {
    for (const auto& b : kBindings)
        if (b.category == category && b.method == method) return std::string(b.capability);
    return std::nullopt;
}

Proposal ScriptedInducer::propose(const InductionContext& ctx) {
    const auto& spec = *ctx.spec;
    Proposal p;
    p.site = spec.id;
    const CategoryInterface* iface = ctx.library.interface_for_category(spec.category);
    if (!iface) {
        auto bp = blueprint_interface(spec.category);
        for (auto& d : bp.default_methods) d.created_at = ctx.step;
        p.interface = std::move(bp);
        iface = &*p.interface;
    }
    p.interface_id = iface->id;
    const auto* impl = ctx.library.implementation(spec.id, iface->id);
    p.implementation_id = impl ? impl->id : impl_name(spec.id);

    auto implemented = [&](const std::string& m) { return impl && impl->find_method(m); };
    auto prims = ctx.trajectory.primitives();
    auto segs = segment(ctx, prims);

    const Segment* target = nullptr;
    if (auto want = method_for_capability(spec.category, ctx.task.capability); want && !implemented(*want))
        for (const auto& s : segs)
            if (s.method == want) {
                target = &s;
                break;
            }
    if (!target)
        for (const auto& s : segs)
            if (s.method && !implemented(*s.method) && iface->find_signature(*s.method)) {
                target = &s;
                break;
            }
    if (!target) {
        p.note = "every milestone in the trajectory is already implemented on " + spec.id;
        return p;
    }

    const SkillSignature* sig = iface->find_signature(*target->method);
    std::vector<const Param*> text_params;
    for (const auto& prm : sig->params)
        if (prm.kind == ParamKind::Text) text_params.push_back(&prm);
    std::vector<std::pair<std::string, std::string>> lifted;  // literal -> param name
    auto lift = [&](const std::string& literal) -> const std::string* {
        for (const auto& [lit, name] : lifted)
            if (lit == literal) return &name;
        if (lifted.size() >= text_params.size()) return nullptr;
        lifted.emplace_back(literal, text_params[lifted.size()]->name);
        return &lifted.back().second;
    };

    SkillDef def;
    def.signature = *sig;
    def.origin = SkillOrigin::Induced;
    def.created_at = ctx.step;
    for (auto i = target->begin; i < target->end; ++i) {
        PrimStmt ps{prims[i].kind, {}};
        for (std::size_t a = 0; a < prims[i].args.size(); ++a) {
            const auto& v = prims[i].args[a];
            const std::string* name = nullptr;
            if (prims[i].kind == PrimitiveKind::Type && a == 1) name = lift(v.text);
            ps.args.push_back(name ? Expr{ParamRef{*name}} : Expr{v});
        }
        def.body.push_back(Statement{std::move(ps), {}});
    }
    p.methods.push_back(std::move(def));

    if (auto span = statement_span(ctx.trajectory, target->begin, target->end)) {
        std::vector<Expr> args;
        bool bound = true;
        for (const auto& prm : sig->params) {
            auto it = std::find_if(lifted.begin(), lifted.end(), [&](const auto& l) { return l.second == prm.name; });
            if (it == lifted.end()) {
                bound = false;
                break;
            }
            args.push_back(Expr{Value::make_text(it->first)});
        }
        if (bound) p.replacement = Replacement{span->first, span->second, Statement::call(sig->name, std::move(args))};
    }
    p.note = "induced " + sig->name + " from primitives " + std::to_string(target->begin) + ".." +
             std::to_string(target->end);
    return p;
}

std::string RemoteInducer::prompt(const InductionContext& ctx) {
    const auto& spec = *ctx.spec;
    std::ostringstream os;
    os << "Website: " << spec.id << " (category " << spec.category << ")\n";
    os << "Task: " << ctx.task.instruction << "\n\nSuccessful actions:\n" << trajectory_text(ctx.trajectory) << "\n";
    const auto* iface = ctx.library.interface_for_category(spec.category);
    if (iface) {
        os << "Existing interface for the category:\n" << print(*iface) << "\n";
        if (const auto* impl = ctx.library.implementation(spec.id, iface->id))
            os << "Existing implementation for this website:\n" << print(*impl) << "\n";
    } else {
        os << "The category has no interface yet. Write one first: "
              "`interface <Name> category " << spec.category
           << " { abstract name(param: text) ... }`, optionally with "
              "`default skill name(...) { call ... }` methods composed from its abstract methods.\n\n";
    }
    os << "Then write the new website-specific methods as\n"
          "`implementation <Name> implements <Interface> site "
       << spec.id
       << " { induced skill name(params) { statements } }`.\n"
          "Each method must implement an abstract signature of the interface, use only primitive actions or "
          "calls to earlier skills, have between "
       << ctx.bounds.min_steps << " and " << ctx.bounds.max_steps
       << " statements, and take typed text as parameters instead of literals.\n"
          "Only write methods the website does not have yet. Reply with the definitions only.";
    return os.str();
}

Proposal RemoteInducer::parse_reply(const std::string& reply, const InductionContext& ctx) {
    const auto& spec = *ctx.spec;
    Proposal p;
    p.site = spec.id;
    const auto* existing = ctx.library.interface_for_category(spec.category);
    if (existing) p.interface_id = existing->id;
    auto blocks = skill_blocks(reply);
    if (blocks.empty()) fail(ErrorCode::InducerFault, "reply contains no interface or implementation");
    for (const auto& block : blocks) {
        SkillFile file;
        try {
            file = parse_skill_file(block, "reply");
        } catch (const Error& e) {
            fail(ErrorCode::InducerFault, std::string("unparsable definition: ") + e.what());
        }
        if (auto* iface = std::get_if<CategoryInterface>(&file)) {
            if (existing) continue;  // the category already has one; keep it
            if (iface->category != spec.category)
                fail(ErrorCode::InducerFault, "interface is for category '" + iface->category + "', expected '" +
                                                  spec.category + "'");
            for (auto& d : iface->default_methods) d.created_at = ctx.step;
            p.interface_id = iface->id;
            p.interface = *iface;
        } else {
            auto& impl = std::get<SiteImplementation>(file);
            if (impl.site != spec.id)
                fail(ErrorCode::InducerFault, "implementation targets site '" + impl.site + "', expected '" + spec.id + "'");
            if (!p.interface_id.empty() && impl.implements != p.interface_id)
                fail(ErrorCode::InducerFault, "implementation implements '" + impl.implements + "', expected '" +
                                                  p.interface_id + "'");
            p.interface_id = impl.implements;
            const auto* have = ctx.library.implementation(spec.id, impl.implements);
            p.implementation_id = have ? have->id : impl.id;
            for (auto& m : impl.methods) {
                if (have && have->find_method(m.name())) continue;
                m.origin = SkillOrigin::Induced;
                m.created_at = ctx.step;
                p.methods.push_back(std::move(m));
            }
        }
    }
    return p;
}

Proposal RemoteInducer::propose(const InductionContext& ctx) {
    std::vector<ChatMessage> messages{
        {"system", "You turn successful web-agent action logs into reusable skills written in a small skill language."},
        {"user", prompt(ctx)}};
    return parse_reply(client_.complete(messages), ctx);
}

// ---------------------------------------------------------------- validation and verification

SkillLibrary tentative_library(const SkillLibrary& lib, const Proposal& proposal, int step, SizeBounds bounds) {
    SkillLibrary out = lib;
    const auto* have = proposal.interface ? lib.interface_for_category(proposal.interface->category) : nullptr;
    if (have) throw ValidationError("category '" + have->category + "' already has interface " + have->id, {});
    try {
        if (proposal.interface) out = register_interface(out, *proposal.interface);
        if (!proposal.methods.empty()) {
            if (!out.interface_by_id(proposal.interface_id))
                throw ValidationError("methods for site " + proposal.site + " need interface '" +
                                          proposal.interface_id + "' to exist first", {});
            if (out.implementation(proposal.site, proposal.interface_id)) {
                out = add_methods(out, proposal.site, proposal.interface_id, proposal.methods);
            } else {
                out = register_implementation(out, SiteImplementation{proposal.implementation_id, proposal.interface_id,
                                                                      proposal.site, proposal.methods, step});
            }
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        throw ValidationError(std::string(to_string(e.code())) + ": " + e.what(), {});
    }
    std::vector<Violation> mine;
    const auto& log = out.creation_log();
    for (const auto& v : validate_library(out, bounds))
        if (std::find(log.begin() + static_cast<std::ptrdiff_t>(lib.size()), log.end(), v.skill_id) != log.end())
            mine.push_back(v);
    if (!mine.empty()) throw ValidationError(describe(mine), mine);
    return out;
}

ProposalOutcome induce_from_trajectory(const InductionContext& ctx, InducerBackend& inducer) {
    if (!ctx.trajectory.success)
        fail(ErrorCode::InducerFault, "trajectory " + ctx.trajectory.id + " did not succeed; nothing to induce from");
    ProposalOutcome out;
    try {
        out.proposal = inducer.propose(ctx);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InducerFault) throw;
        fail(ErrorCode::InducerFault, std::string(to_string(e.code())) + ": " + e.what());
    }
    if (out.proposal.empty()) {
        out.reason = out.proposal.note.empty() ? "nothing new" : out.proposal.note;
        return out;
    }
    try {
        auto lib = tentative_library(ctx.library, out.proposal, ctx.step, ctx.bounds);
        const auto& log = lib.creation_log();
        out.new_skills.assign(log.begin() + static_cast<std::ptrdiff_t>(ctx.library.size()), log.end());
    } catch (const ValidationError& e) {
        out.violations = e.violations();
        throw;
    }
    return out;
}

std::vector<Statement> rewrite_with_skills(const SkillLibrary& lib, std::string_view site,
                                           const std::vector<Statement>& original,
                                           const std::vector<std::string>& skill_ids) {
    struct Candidate {
        ResolvedSkill skill;
        std::vector<PrimStmt> tmpl;
    };
    std::vector<Candidate> cands;
    for (auto& s : callable_skills(lib, site)) {
        if (std::find(skill_ids.begin(), skill_ids.end(), s.id) == skill_ids.end()) continue;
        try {
            if (resolve(lib, site, s.def.name()).id != s.id) continue;
            auto tmpl = expand_template(lib, site, s);
            if (!tmpl.empty()) cands.push_back({std::move(s), std::move(tmpl)});
        } catch (const Error&) {
        }
    }
    std::vector<Statement> out;
    std::vector<PrimitiveAction> run;
    auto flush = [&] {
        std::size_t i = 0;
        while (i < run.size()) {
            const Candidate* best = nullptr;
            std::vector<Value> best_args;
            for (const auto& c : cands) {
                if (best && c.tmpl.size() <= best->tmpl.size()) continue;
                if (auto args = match_template(c.skill, c.tmpl, run, i)) {
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
                out.push_back(Statement::prim(run[i++]));
            }
        }
        run.clear();
    };
    for (const auto& s : original) {
        std::optional<PrimitiveAction> g;
        if (s.is_prim()) g = ground(s.as_prim());
        if (g) {
            run.push_back(std::move(*g));
            continue;
        }
        flush();
        out.push_back(s);
    }
    flush();
    return out;
}

SkillLibrary verify_and_commit(ProposalOutcome& outcome, const SkillLibrary& lib, const InductionContext& ctx,
                               JudgeBackend& judge) {
    const auto& p = outcome.proposal;
    if (p.empty()) {
        outcome.reason = "nothing to verify";
        return lib;
    }
    auto tentative = tentative_library(lib, p, ctx.step, ctx.bounds);
    auto original = ctx.trajectory.statements();
    std::vector<Statement> script;
    if (p.replacement && p.replacement->begin < p.replacement->end && p.replacement->end <= original.size()) {
        script.assign(original.begin(), original.begin() + static_cast<std::ptrdiff_t>(p.replacement->begin));
        script.push_back(p.replacement->call);
        script.insert(script.end(), original.begin() + static_cast<std::ptrdiff_t>(p.replacement->end), original.end());
    } else {
        const auto& log = tentative.creation_log();
        std::vector<std::string> fresh(log.begin() + static_cast<std::ptrdiff_t>(lib.size()), log.end());
        script = rewrite_with_skills(tentative, p.site, original, fresh);
        if (!p.methods.empty() && script == original) {
            outcome.accepted = false;
            outcome.reason = "the proposed skills do not occur in the trajectory";
            return lib;
        }
    }
    if (outcome.verification_id.empty()) outcome.verification_id = "verify-" + ctx.trajectory.id;
    ScriptedPolicy policy({{ctx.task.id, script}}, "verification");
    RunOptions opts;
    opts.trajectory_id = outcome.verification_id;
    opts.horizon = std::max<int>(ctx.task.horizon, static_cast<int>(script.size()) + 1);
    auto ep = execute_task(ctx.spec, ctx.task, tentative, policy, opts);
    auto v = judge.verdict(ep.trajectory, ctx.task, ep.final_state);
    outcome.verification = std::move(ep.trajectory);
    if (!v.success) {
        outcome.accepted = false;
        outcome.reason = "verification replay failed: " + v.rationale;
        return lib;
    }
    outcome.accepted = true;
    outcome.reason = "verified: " + v.rationale;
    const auto& log = tentative.creation_log();
    outcome.new_skills.assign(log.begin() + static_cast<std::ptrdiff_t>(lib.size()), log.end());
    return tentative;
}

// ---------------------------------------------------------------- audit

std::string audit_to_jsonl(const std::vector<AuditRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        json j = {{"schema", "webskill.audit/1"},
                  {"iteration", r.iteration},
                  {"step", r.step},
                  {"mode", r.mode},
                  {"task", r.task_id},
                  {"site", r.site},
                  {"instruction", r.instruction},
                  {"trajectory", r.trajectory_id},
                  {"judged_success", r.judged_success},
                  {"rationale", r.rationale},
                  {"outcome", r.outcome},
                  {"detail", r.detail},
                  {"proposal", r.proposal},
                  {"verification", r.verification_id},
                  {"verification_success", r.verification_success},
                  {"new_skills", r.new_skills},
                  {"library_before", r.library_before},
                  {"library_after", r.library_after},
                  {"library_size", r.library_size}};
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<AuditRecord> audit_from_jsonl(std::string_view text) {
    std::vector<AuditRecord> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, "audit line " + std::to_string(n) + ": " + e.what());
        }
        if (j.value("schema", "") != "webskill.audit/1")
            fail(ErrorCode::SchemaMismatch, "audit line " + std::to_string(n) + ": expected schema webskill.audit/1");
        try {
            AuditRecord r;
            r.iteration = j.at("iteration").get<int>();
            r.step = j.at("step").get<int>();
            r.mode = j.at("mode").get<std::string>();
            r.task_id = j.at("task").get<std::string>();
            r.site = j.at("site").get<std::string>();
            r.instruction = j.at("instruction").get<std::string>();
            r.trajectory_id = j.at("trajectory").get<std::string>();
            r.judged_success = j.at("judged_success").get<bool>();
            r.rationale = j.at("rationale").get<std::string>();
            r.outcome = j.at("outcome").get<std::string>();
            r.detail = j.at("detail").get<std::string>();
            r.proposal = j.at("proposal").get<std::string>();
            r.verification_id = j.at("verification").get<std::string>();
            r.verification_success = j.at("verification_success").get<bool>();
            r.new_skills = j.at("new_skills").get<std::vector<std::string>>();
            r.library_before = j.at("library_before").get<std::string>();
            r.library_after = j.at("library_after").get<std::string>();
            r.library_size = j.at("library_size").get<std::size_t>();
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            fail(ErrorCode::SchemaMismatch, "audit line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------- learning loops

namespace {

struct Learner {
    LearningResult& r;
    PolicyBackend& policy;
    JudgeBackend& judge;
    InducerBackend& inducer;
    const LearningOptions& options;

    // One iteration: run, judge, induce, verify. Returns the final state when the episode ran.
    std::optional<SiteState> iterate(int iteration, int step, const std::string& mode, const Task& task,
                                     const std::shared_ptr<const SiteSpec>& spec) {
        AuditRecord a;
        a.iteration = iteration;
        a.step = step;
        a.mode = mode;
        a.task_id = task.id;
        a.site = task.site;
        a.instruction = task.instruction;
        a.library_before = library_digest(r.library);
        std::optional<SiteState> final_state;
        auto finish = [&] {
            a.library_after = library_digest(r.library);
            a.library_size = r.library.size();
            r.audit.push_back(std::move(a));
            r.snapshots.push_back(r.library);
            r.tasks.push_back(task);
            ++r.site_iterations[task.site];
        };
        if (!spec) {
            a.outcome = "error";
            a.detail = "unknown site '" + task.site + "'";
            finish();
            return final_state;
        }
        Episode ep;
        r.libraries.emplace(library_digest(r.library), r.library);
        try {
            RunOptions opts;
            opts.trajectory_id = step_id(options.trajectory_prefix, step);
            ep = execute_task(spec, task, r.library, policy, opts);
        } catch (const Error& e) {
            a.outcome = "error";
            a.detail = std::string(to_string(e.code())) + ": " + e.what();
            finish();
            return final_state;
        }
        final_state = ep.final_state;
        a.trajectory_id = ep.trajectory.id;
        r.trajectories.push_back(ep.trajectory);
        auto v = judge.verdict(ep.trajectory, task, ep.final_state);
        a.judged_success = v.success;
        a.rationale = v.rationale;
        if (!v.success || !ep.trajectory.success) {
            a.outcome = "failed";
            if (v.success) a.detail = "judge accepted but the episode did not reach success";
            finish();
            return final_state;
        }
        InductionContext ctx{ep.trajectory, task, r.library, spec, step, options.bounds};
        for (int attempt = 0; attempt <= options.induction_retries; ++attempt) {
            ProposalOutcome out;
            try {
                out = induce_from_trajectory(ctx, inducer);
            } catch (const ValidationError& e) {
                a.outcome = "invalid";
                a.detail = e.what();
                out.violations = e.violations();
                out.reason = e.what();
                r.outcomes.push_back(std::move(out));
                continue;
            } catch (const Error& e) {
                a.outcome = "error";
                a.detail = std::string(to_string(e.code())) + ": " + e.what();
                continue;
            }
            a.proposal = print(out.proposal);
            if (out.proposal.empty()) {
                a.outcome = "nothing_new";
                a.detail = out.reason;
                r.outcomes.push_back(std::move(out));
                break;
            }
            out.verification_id = step_id("verify", step) + (attempt ? "-" + std::to_string(attempt) : "");
            SkillLibrary next = r.library;
            try {
                next = verify_and_commit(out, r.library, ctx, judge);
            } catch (const ValidationError& e) {
                a.outcome = "invalid";
                a.detail = e.what();
                r.outcomes.push_back(std::move(out));
                continue;
            } catch (const Error& e) {
                a.outcome = "error";
                a.detail = std::string(to_string(e.code())) + ": " + e.what();
                r.outcomes.push_back(std::move(out));
                continue;
            }
            if (out.verification) {
                auto tested = out.accepted ? next : tentative_library(r.library, out.proposal, step, options.bounds);
                r.libraries.emplace(out.verification->library, std::move(tested));
                a.verification_id = out.verification->id;
                a.verification_success = out.verification->success;
                r.trajectories.push_back(*out.verification);
            }
            a.detail = out.reason;
            bool accepted = out.accepted;
            if (accepted) {
                a.outcome = "accepted";
                a.new_skills = out.new_skills;
                r.library = std::move(next);
            } else {
                a.outcome = "rejected";
            }
            r.outcomes.push_back(std::move(out));
            if (accepted) break;
        }
        finish();
        return final_state;
    }
};

} // namespace

LearningResult run_task_defined(const std::vector<Task>& tasks, const SkillLibrary& lib0, const SiteMap& sites,
                                PolicyBackend& policy, JudgeBackend& judge, InducerBackend& inducer,
                                const LearningOptions& options) {
    LearningResult r;
    r.library = lib0;
    Learner learner{r, policy, judge, inducer, options};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto it = sites.find(tasks[i].site);
        learner.iterate(static_cast<int>(i), options.first_step + static_cast<int>(i), "defined", tasks[i],
                        it == sites.end() ? nullptr : it->second);
    }
    return r;
}

Task GapDrivenProposer::propose(const ProposalRequest& req) {
    const auto& spec = req.spec;
    auto k = static_cast<std::size_t>(std::max(0, req.iteration));
    auto make = [&](const std::string& cap) { return capability_task(spec, cap, task_params(spec, cap, k)); };
    const auto* iface = req.library.interface_for_category(spec.category);
    auto offered = [&](const std::string& cap) {
        return std::find(spec.manifest.begin(), spec.manifest.end(), cap) != spec.manifest.end();
    };
    if (iface) {
        const auto* impl = req.library.implementation(spec.id, iface->id);
        for (const auto& sig : iface->abstract_signatures) {
            if (impl && impl->find_method(sig.name)) continue;
            if (auto cap = capability_for_method(spec.category, sig.name); cap && offered(*cap)) return make(*cap);
        }
        // Complete site: exercise the composition the interface defaults describe.
        if (spec.category == "shopping" && offered("checkout")) return make("checkout");
        if (spec.category == "coding" && offered("add_label")) {
            auto params = task_params(spec, "add_label", k);
            params.back() = "bug";
            return capability_task(spec, "add_label", params);
        }
    } else {
        std::string cap = spec.category == "shopping" ? "search" : "open_repo";
        for (const auto& n : req.observation.nodes)
            if (n.role == "searchbox" && offered(cap)) return make(cap);
    }
    if (spec.manifest.empty()) fail(ErrorCode::ProposerFault, "site " + spec.id + " offers no capabilities");
    return make(spec.manifest.front());
}

Task RemoteProposer::propose(const ProposalRequest& req) {
    const auto& spec = req.spec;
    std::ostringstream os;
    os << "Website: " << spec.id << " (category " << spec.category << ")\nCapabilities:";
    for (const auto& c : spec.manifest) os << " " << c;
    os << "\n\nCurrent page:\n" << render(req.observation) << "\n";
    if (const auto* iface = req.library.interface_for_category(spec.category)) {
        const auto* impl = req.library.implementation(spec.id, iface->id);
        os << "Skills not yet learned on this website:";
        for (const auto& sig : iface->abstract_signatures)
            if (!impl || !impl->find_method(sig.name)) os << " " << sig.name;
        os << "\n";
    } else {
        os << "No skills have been learned for this category yet.\n";
    }
    os << "Propose one practice task that would teach a new skill. Reply with JSON only: "
          "{\"capability\": \"<one of the capabilities>\", \"params\": [\"...\"]}";
    auto reply = client_.complete({{"system", "You design short practice tasks for a web agent."}, {"user", os.str()}});
    auto open = reply.find('{');
    auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        fail(ErrorCode::ProposerFault, "proposer reply has no JSON object");
    try {
        auto j = json::parse(reply.substr(open, close - open + 1));
        auto cap = j.at("capability").get<std::string>();
        auto params = j.at("params").get<std::vector<std::string>>();
        return capability_task(spec, cap, params);
    } catch (const json::exception& e) {
        fail(ErrorCode::ProposerFault, std::string("proposer reply: ") + e.what());
    }
}

Task propose_task(const ProposalRequest& req, ProposerBackend& proposer) {
    Task t;
    try {
        t = proposer.propose(req);
        if (t.site != req.spec.id) fail(ErrorCode::ProposerFault, "task targets site '" + t.site + "'");
        auto probe = initial_state(std::make_shared<const SiteSpec>(req.spec));
        (void)check_success(t, probe, {});  // rejects unknown predicates and bad arity
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ProposerFault) throw;
        fail(ErrorCode::ProposerFault, std::string(to_string(e.code())) + ": " + e.what());
    }
    return t;
}

std::size_t unimplemented_count(const SkillLibrary& lib, const SiteSpec& spec) {
    const auto* iface = lib.interface_for_category(spec.category);
    if (!iface) return spec.manifest.size();
    const auto* impl = lib.implementation(spec.id, iface->id);
    std::size_t n = 0;
    for (const auto& sig : iface->abstract_signatures)
        if (!impl || !impl->find_method(sig.name)) ++n;
    return n;
}

LearningResult run_task_free(int n_steps, const SkillLibrary& lib0, const std::vector<std::shared_ptr<const SiteSpec>>& pool,
                             PolicyBackend& policy, JudgeBackend& judge, InducerBackend& inducer,
                             ProposerBackend& proposer, const ExploreOptions& options) {
    if (pool.empty()) fail(ErrorCode::Config, "exploration needs at least one site");
    LearningResult r;
    r.library = lib0;
    Learner learner{r, policy, judge, inducer, options};
    std::vector<Observation> last;
    for (const auto& s : pool) last.push_back(observe(initial_state(s)));
    std::size_t rr = 0;
    for (int it = 0; it < n_steps; ++it) {
        std::size_t idx = 0;
        if (options.selection == SiteSelection::RoundRobin) {
            idx = static_cast<std::size_t>(it) % pool.size();
        } else {
            std::size_t best = 0;
            for (const auto& s : pool) best = std::max(best, unimplemented_count(r.library, *s));
            for (std::size_t k = 0; k < pool.size(); ++k) {
                auto cand = (rr + k) % pool.size();
                if (unimplemented_count(r.library, *pool[cand]) == best) {
                    idx = cand;
                    break;
                }
            }
            rr = idx + 1;
        }
        const auto& spec = pool[idx];
        int step = options.first_step + it;
        Task task;
        try {
            task = propose_task(ProposalRequest{*spec, last[idx], r.library, it}, proposer);
        } catch (const Error& e) {
            AuditRecord a;
            a.iteration = it;
            a.step = step;
            a.mode = "free";
            a.site = spec->id;
            a.outcome = "error";
            a.detail = std::string(to_string(e.code())) + ": " + e.what();
            a.library_before = a.library_after = library_digest(r.library);
            a.library_size = r.library.size();
            r.audit.push_back(std::move(a));
            r.snapshots.push_back(r.library);
            Task none;
            none.site = spec->id;
            r.tasks.push_back(std::move(none));
            ++r.site_iterations[spec->id];
            continue;
        }
        task.id = step_id("explore", step);
        if (auto final_state = learner.iterate(it, step, "free", task, spec)) last[idx] = observe(*final_state);
    }
    return r;
}

} // namespace webskill
