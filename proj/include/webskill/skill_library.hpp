#pragma once

#include "webskill/dsl.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace webskill {

/// Statement-count bounds for induced skill bodies.
struct SizeBounds {
    int min_steps = 2;
    int max_steps = 5;
};

std::string skill_id(std::string_view interface_id, std::string_view method, std::string_view site);
std::string default_skill_id(std::string_view interface_id, std::string_view method);

/// The polymorphic skill library. Values are immutable snapshots: every
/// register_* call returns a new library and leaves its input untouched.
class SkillLibrary {
public:
    using ImplKey = std::pair<std::string, std::string>;  // (site, interface id)

    SkillLibrary() = default;

    /// Assemble without any checks. Used when loading from disk and by tests
    /// that need deliberately broken libraries; run validate_library after.
    static SkillLibrary from_parts(std::vector<CategoryInterface> interfaces,
                                   std::vector<SiteImplementation> implementations,
                                   std::vector<std::string> creation_log);

    const std::map<std::string, CategoryInterface>& interfaces() const { return interfaces_; }
    const std::map<ImplKey, SiteImplementation>& implementations() const { return implementations_; }
    const std::vector<std::string>& creation_log() const { return creation_log_; }

    const CategoryInterface* interface_for_category(std::string_view category) const;
    const CategoryInterface* interface_by_id(std::string_view id) const;
    const SiteImplementation* implementation(std::string_view site, std::string_view interface_id) const;
    std::vector<const SiteImplementation*> implementations_for_site(std::string_view site) const;

    /// Look a skill up by its qualified id (`Iface.method@site` or `Iface.method`).
    const SkillDef* find_skill(std::string_view id) const;
    std::size_t size() const { return creation_log_.size(); }
    bool empty() const { return creation_log_.empty(); }

    /// Position of an id in the creation log, or -1.
    int creation_index(std::string_view id) const;

    bool operator==(const SkillLibrary&) const = default;

private:
    friend SkillLibrary register_interface(const SkillLibrary&, CategoryInterface);
    friend SkillLibrary register_implementation(const SkillLibrary&, SiteImplementation);
    friend SkillLibrary add_methods(const SkillLibrary&, std::string_view, std::string_view, std::vector<SkillDef>);

    std::map<std::string, CategoryInterface> interfaces_;  // keyed by category
    std::map<ImplKey, SiteImplementation> implementations_;
    std::vector<std::string> creation_log_;
};

SkillLibrary register_interface(const SkillLibrary& lib, CategoryInterface iface);
SkillLibrary register_implementation(const SkillLibrary& lib, SiteImplementation impl);
/// Grow an existing (site, interface) implementation by new methods.
SkillLibrary add_methods(const SkillLibrary& lib, std::string_view site, std::string_view interface_id,
                         std::vector<SkillDef> methods);

struct ResolvedSkill {
    SkillDef def;
    std::string id;            // qualified id, as recorded in creation_log
    std::string interface_id;  // scope for calls inside def.body
    bool is_default = false;
};

/// Dynamic dispatch: the site's concrete method, else the interface default
/// (whose abstract calls must all bind to this site's methods).
ResolvedSkill resolve(const SkillLibrary& lib, std::string_view site, std::string_view name);
/// As resolve, restricted to one interface's scope.
ResolvedSkill resolve_in(const SkillLibrary& lib, std::string_view site, std::string_view interface_id,
                         std::string_view name);

/// Skills callable on a site right now (implemented methods plus defaults whose
/// abstract calls are all bound).
std::vector<ResolvedSkill> callable_skills(const SkillLibrary& lib, std::string_view site);

enum class Rule {
    Duplicate,
    UnresolvedCall,
    Cycle,
    Conformance,
    Arity,
    ArgKind,
    FreeVariable,
    StopInBody,
    Size,
    Ordering,
    Dangling,
};
std::string_view to_string(Rule rule);

struct Violation {
    std::string skill_id;
    Rule rule = Rule::Dangling;
    std::string detail;
    bool operator==(const Violation&) const = default;
};

/// All invariant violations; empty iff the library is well formed. Size
/// bounds apply only to induced skills.
std::vector<Violation> validate_library(const SkillLibrary& lib, SizeBounds bounds = {});

using Bindings = std::map<std::string, Value, std::less<>>;

/// Fully primitive expansion of one statement on a site. `stop` expands to nothing.
std::vector<PrimitiveAction> expand(const SkillLibrary& lib, std::string_view site, const Statement& stmt,
                                    const Bindings& bindings = {});

/// Expansion of a resolved skill with its own parameters left symbolic: every
/// ParamRef in the result names a parameter of `skill`.
std::vector<PrimStmt> expand_template(const SkillLibrary& lib, std::string_view site, const ResolvedSkill& skill);

/// Steps as the agent pays for them: one per statement, skill calls included.
inline std::size_t count_steps(std::span<const Statement> statements) { return statements.size(); }

/// Library layout: `<dir>/<category>/interface.skill`,
/// `<dir>/<category>/<site>.skill`, `<dir>/creation.log`.
void save_library(const SkillLibrary& lib, const std::filesystem::path& dir);
SkillLibrary load_library(const std::filesystem::path& dir);

} // namespace webskill
