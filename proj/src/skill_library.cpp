#include "webskill/skill_library.hpp"

#include <algorithm>
#include <climits>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace webskill {

std::string skill_id(std::string_view interface_id, std::string_view method, std::string_view site) {
    std::string out(interface_id);
    out += '.';
    out += method;
    out += '@';
    out += site;
    return out;
}

std::string default_skill_id(std::string_view interface_id, std::string_view method) {
    std::string out(interface_id);
    out += '.';
    out += method;
    return out;
}

std::string_view to_string(Rule rule) {
    switch (rule) {
    case Rule::Duplicate: return "DuplicateViolation";
    case Rule::UnresolvedCall: return "UnresolvedCallViolation";
    case Rule::Cycle: return "CycleViolation";
    case Rule::Conformance: return "ConformanceViolation";
    case Rule::Arity: return "ArityViolation";
    case Rule::ArgKind: return "ArgKindViolation";
    case Rule::FreeVariable: return "FreeVariableViolation";
    case Rule::StopInBody: return "StopInBodyViolation";
    case Rule::Size: return "SizeViolation";
    case Rule::Ordering: return "OrderingViolation";
    case Rule::Dangling: return "DanglingViolation";
    }
    return "?";
}

SkillLibrary SkillLibrary::from_parts(std::vector<CategoryInterface> interfaces,
                                      std::vector<SiteImplementation> implementations,
                                      std::vector<std::string> creation_log) {
    SkillLibrary lib;
    for (auto& iface : interfaces) {
        auto category = iface.category;
        lib.interfaces_.insert_or_assign(std::move(category), std::move(iface));
    }
    for (auto& impl : implementations) {
        ImplKey key{impl.site, impl.implements};
        lib.implementations_.insert_or_assign(std::move(key), std::move(impl));
    }
    lib.creation_log_ = std::move(creation_log);
    return lib;
}

const CategoryInterface* SkillLibrary::interface_for_category(std::string_view category) const {
    auto it = interfaces_.find(std::string(category));
    return it == interfaces_.end() ? nullptr : &it->second;
}

const CategoryInterface* SkillLibrary::interface_by_id(std::string_view id) const {
    for (const auto& [cat, iface] : interfaces_)
        if (iface.id == id) return &iface;
    return nullptr;
}

const SiteImplementation* SkillLibrary::implementation(std::string_view site, std::string_view interface_id) const {
    auto it = implementations_.find(ImplKey{std::string(site), std::string(interface_id)});
    return it == implementations_.end() ? nullptr : &it->second;
}

std::vector<const SiteImplementation*> SkillLibrary::implementations_for_site(std::string_view site) const {
    std::vector<const SiteImplementation*> out;
    for (const auto& [key, impl] : implementations_)
        if (key.first == site) out.push_back(&impl);
    return out;
}

const SkillDef* SkillLibrary::find_skill(std::string_view id) const {
    auto dot = id.find('.');
    if (dot == std::string_view::npos) return nullptr;
    auto iface_id = id.substr(0, dot);
    auto rest = id.substr(dot + 1);
    auto at = rest.find('@');
    if (at == std::string_view::npos) {
        const auto* iface = interface_by_id(iface_id);
        return iface ? iface->find_default(rest) : nullptr;
    }
    const auto* impl = implementation(rest.substr(at + 1), iface_id);
    return impl ? impl->find_method(rest.substr(0, at)) : nullptr;
}

int SkillLibrary::creation_index(std::string_view id) const {
    for (std::size_t i = 0; i < creation_log_.size(); ++i)
        if (creation_log_[i] == id) return static_cast<int>(i);
    return -1;
}

namespace {

// What a call target names from inside one body.
struct Target {
    const SkillSignature* signature = nullptr;  // callee signature
    std::string id;                             // creation-log id; empty for unbound abstract
    bool unimplemented_abstract = false;
};

using Lookup = std::function<std::optional<Target>(std::string_view)>;

Lookup interface_scope(const CategoryInterface& iface) {
    return [&iface](std::string_view name) -> std::optional<Target> {
        if (const auto* d = iface.find_default(name)) return Target{&d->signature, default_skill_id(iface.id, name), false};
        if (const auto* s = iface.find_signature(name)) return Target{s, {}, false};
        return std::nullopt;
    };
}

Lookup site_scope(const CategoryInterface& iface, const SiteImplementation& impl) {
    return [&iface, &impl](std::string_view name) -> std::optional<Target> {
        if (const auto* d = iface.find_default(name)) return Target{&d->signature, default_skill_id(iface.id, name), false};
        if (const auto* s = iface.find_signature(name)) {
            if (impl.find_method(name)) return Target{s, skill_id(iface.id, name, impl.site), false};
            return Target{s, {}, true};
        }
        return std::nullopt;
    };
}

void check_body(const SkillDef& def, const std::string& id, const Lookup& lookup, std::vector<Violation>& out) {
    std::map<std::string, ParamKind, std::less<>> declared;
    for (const auto& p : def.signature.params) declared.emplace(p.name, p.kind);

    auto check_arg = [&](const Expr& e, ValueKind expected, const std::string& where) {
        if (e.is_param()) {
            auto it = declared.find(e.param().name);
            if (it == declared.end()) {
                out.push_back({id, Rule::FreeVariable, "undeclared parameter '" + e.param().name + "' in " + where});
            } else if (it->second != expected) {
                out.push_back({id, Rule::ArgKind,
                               "parameter '" + e.param().name + "' is " + std::string(to_string(it->second)) +
                                   ", " + where + " expects " + std::string(to_string(expected))});
            }
        } else if (e.value().kind != expected) {
            out.push_back({id, Rule::ArgKind, where + " expects " + std::string(to_string(expected))});
        }
    };

    for (const auto& st : def.body) {
        if (st.is_stop()) {
            out.push_back({id, Rule::StopInBody, "'stop' is not allowed inside a skill body"});
        } else if (st.is_prim()) {
            const auto& p = st.as_prim();
            auto kinds = primitive_arg_kinds(p.kind);
            std::string where(to_string(p.kind));
            if (p.args.size() != kinds.size()) {
                out.push_back({id, Rule::Arity, where + " takes " + std::to_string(kinds.size()) + " argument(s)"});
                continue;
            }
            for (std::size_t i = 0; i < kinds.size(); ++i) check_arg(p.args[i], kinds[i], where);
        } else {
            const auto& c = st.as_call();
            auto target = lookup(c.target);
            if (!target) {
                out.push_back({id, Rule::UnresolvedCall, "call to undeclared skill '" + c.target + "'"});
                continue;
            }
            if (target->unimplemented_abstract) {
                out.push_back({id, Rule::UnresolvedCall, "call to abstract '" + c.target + "' not implemented on this site"});
            }
            const auto& params = target->signature->params;
            if (params.size() != c.args.size()) {
                out.push_back({id, Rule::Arity,
                               "call " + c.target + " passes " + std::to_string(c.args.size()) + " argument(s), expects " +
                                   std::to_string(params.size())});
                continue;
            }
            for (std::size_t i = 0; i < params.size(); ++i) check_arg(c.args[i], params[i].kind, "call " + c.target);
        }
    }
}

void check_duplicate_params(const SkillSignature& sig, const std::string& id, std::vector<Violation>& out) {
    std::set<std::string> seen;
    for (const auto& p : sig.params)
        if (!seen.insert(p.name).second) out.push_back({id, Rule::Duplicate, "parameter '" + p.name + "' declared twice"});
}

void check_size(const SkillDef& def, const std::string& id, SizeBounds bounds, std::vector<Violation>& out) {
    if (def.origin != SkillOrigin::Induced) return;
    auto n = static_cast<int>(def.body.size());
    if (n < bounds.min_steps || n > bounds.max_steps) {
        out.push_back({id, Rule::Size,
                       std::to_string(n) + " statements, bounds [" + std::to_string(bounds.min_steps) + ", " +
                           std::to_string(bounds.max_steps) + "]"});
    }
}

// Directed graph over string node ids; returns nodes lying on some cycle.
std::set<std::string> nodes_on_cycles(const std::map<std::string, std::vector<std::string>>& edges) {
    enum class Mark { None, Active, Done };
    std::map<std::string, Mark> mark;
    std::set<std::string> cyclic;
    std::vector<std::string> stack;

    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
        mark[n] = Mark::Active;
        stack.push_back(n);
        if (auto it = edges.find(n); it != edges.end()) {
            for (const auto& m : it->second) {
                auto mm = mark[m];
                if (mm == Mark::Active) {
                    auto from = std::find(stack.begin(), stack.end(), m);
                    cyclic.insert(from, stack.end());
                } else if (mm == Mark::None) {
                    dfs(m);
                }
            }
        }
        stack.pop_back();
        mark[n] = Mark::Done;
    };
    for (const auto& [n, _] : edges)
        if (mark[n] == Mark::None) dfs(n);
    return cyclic;
}

std::vector<std::string> call_targets(const SkillDef& def) {
    std::vector<std::string> out;
    for (const auto& st : def.body)
        if (st.is_call()) out.push_back(st.as_call().target);
    return out;
}

// Dispatch graph for one site: impl methods and defaults, abstract calls
// bound to the site's own methods.
std::map<std::string, std::vector<std::string>> dispatch_graph(const CategoryInterface& iface,
                                                               const SiteImplementation& impl) {
    std::map<std::string, std::vector<std::string>> edges;
    auto bind = [&](std::string_view name) -> std::optional<std::string> {
        if (iface.find_default(name)) return default_skill_id(iface.id, name);
        if (impl.find_method(name)) return skill_id(iface.id, name, impl.site);
        return std::nullopt;
    };
    auto add_node = [&](const std::string& id, const SkillDef& def) {
        auto& out = edges[id];
        for (const auto& t : call_targets(def))
            if (auto b = bind(t)) out.push_back(*b);
    };
    for (const auto& m : impl.methods) add_node(skill_id(iface.id, m.name(), impl.site), m);
    for (const auto& d : iface.default_methods) add_node(default_skill_id(iface.id, d.name()), d);
    return edges;
}

// Kahn's algorithm with (created_at, declaration index) priority. `deps(i)`
// lists indices that must precede i. Returns nullopt on a cycle.
std::optional<std::vector<std::size_t>> creation_order(const std::vector<SkillDef>& defs,
                                                       const std::function<std::vector<std::size_t>(std::size_t)>& deps) {
    std::size_t n = defs.size();
    std::vector<std::vector<std::size_t>> users(n);
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<std::size_t> uniq;
        for (auto d : deps(i))
            if (d != i) uniq.insert(d);
            else return std::nullopt;
        indegree[i] = uniq.size();
        for (auto d : uniq) users[d].push_back(i);
    }
    auto key = [&](std::size_t i) { return std::pair{defs[i].created_at, i}; };
    std::set<std::pair<int, std::size_t>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.insert(key(i));
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        auto i = ready.begin()->second;
        ready.erase(ready.begin());
        order.push_back(i);
        for (auto u : users[i])
            if (--indegree[u] == 0) ready.insert(key(u));
    }
    if (order.size() != n) return std::nullopt;
    return order;
}

std::size_t index_of(const std::vector<SkillDef>& defs, std::string_view name) {
    for (std::size_t i = 0; i < defs.size(); ++i)
        if (defs[i].name() == name) return i;
    return defs.size();
}

[[noreturn]] void raise(const Violation& v, bool implementation_context) {
    ErrorCode code = ErrorCode::ConformanceViolation;
    switch (v.rule) {
    case Rule::Duplicate: code = ErrorCode::DuplicateSkill; break;
    case Rule::UnresolvedCall: code = ErrorCode::UnresolvedCall; break;
    case Rule::Cycle: code = implementation_context ? ErrorCode::CyclicReference : ErrorCode::CyclicDefaultMethods; break;
    case Rule::Conformance: code = ErrorCode::ConformanceViolation; break;
    case Rule::Arity: code = implementation_context ? ErrorCode::ConformanceViolation : ErrorCode::ArityError; break;
    case Rule::ArgKind: code = implementation_context ? ErrorCode::ConformanceViolation : ErrorCode::ArgumentKind; break;
    case Rule::FreeVariable: code = ErrorCode::UnboundParam; break;
    case Rule::StopInBody: code = ErrorCode::ConformanceViolation; break;
    case Rule::Size: code = ErrorCode::ConformanceViolation; break;
    case Rule::Ordering: code = ErrorCode::OrderingViolation; break;
    case Rule::Dangling: code = ErrorCode::UnknownSkill; break;
    }
    fail(code, v.skill_id + ": " + v.detail);
}

// Registration checks everything except size bounds, which belong to induction.
constexpr SizeBounds kUnbounded{0, INT_MAX};

void raise_first_new(const SkillLibrary& candidate, const std::set<std::string>& new_ids, bool implementation_context) {
    for (const auto& v : validate_library(candidate, kUnbounded))
        if (new_ids.count(v.skill_id)) raise(v, implementation_context);
}

} // namespace

SkillLibrary register_interface(const SkillLibrary& lib, CategoryInterface iface) {
    if (lib.interface_for_category(iface.category))
        fail(ErrorCode::DuplicateCategory, "category '" + iface.category + "' already has an interface");
    if (lib.interface_by_id(iface.id))
        fail(ErrorCode::DuplicateCategory, "interface id '" + iface.id + "' already registered");

    const auto& defaults = iface.default_methods;
    auto order = creation_order(defaults, [&](std::size_t i) {
        std::vector<std::size_t> deps;
        for (const auto& t : call_targets(defaults[i]))
            if (auto j = index_of(defaults, t); j < defaults.size()) deps.push_back(j);
        return deps;
    });
    if (!order) fail(ErrorCode::CyclicDefaultMethods, "default methods of '" + iface.id + "' call each other cyclically");

    SkillLibrary out = lib;
    std::set<std::string> new_ids{iface.id};
    for (auto i : *order) {
        auto id = default_skill_id(iface.id, defaults[i].name());
        out.creation_log_.push_back(id);
        new_ids.insert(id);
    }
    auto category = iface.category;
    out.interfaces_.emplace(std::move(category), std::move(iface));
    raise_first_new(out, new_ids, false);
    return out;
}

namespace {

std::vector<std::size_t> sibling_order(const std::vector<SkillDef>& methods, const std::string& what) {
    auto order = creation_order(methods, [&](std::size_t i) {
        std::vector<std::size_t> deps;
        for (const auto& t : call_targets(methods[i]))
            if (auto j = index_of(methods, t); j < methods.size()) deps.push_back(j);
        return deps;
    });
    if (!order) fail(ErrorCode::CyclicReference, "methods of " + what + " call each other cyclically");
    return *order;
}

} // namespace

SkillLibrary register_implementation(const SkillLibrary& lib, SiteImplementation impl) {
    const auto* iface = lib.interface_by_id(impl.implements);
    if (!iface) fail(ErrorCode::UnknownInterface, "unknown interface '" + impl.implements + "'");
    if (lib.implementation(impl.site, impl.implements))
        fail(ErrorCode::DuplicateSite, "site '" + impl.site + "' already implements '" + impl.implements + "'");

    auto order = sibling_order(impl.methods, impl.id);
    SkillLibrary out = lib;
    std::set<std::string> new_ids;
    for (auto i : order) {
        auto id = skill_id(impl.implements, impl.methods[i].name(), impl.site);
        out.creation_log_.push_back(id);
        new_ids.insert(id);
    }
    SkillLibrary::ImplKey key{impl.site, impl.implements};
    out.implementations_.emplace(std::move(key), std::move(impl));
    raise_first_new(out, new_ids, true);
    return out;
}

SkillLibrary add_methods(const SkillLibrary& lib, std::string_view site, std::string_view interface_id,
                         std::vector<SkillDef> methods) {
    const auto* existing = lib.implementation(site, interface_id);
    if (!existing)
        fail(ErrorCode::UnknownInterface,
             "site '" + std::string(site) + "' has no implementation of '" + std::string(interface_id) + "'");
    for (const auto& m : methods)
        if (existing->find_method(m.name()))
            fail(ErrorCode::DuplicateSkill, skill_id(interface_id, m.name(), site) + " already exists");

    auto order = sibling_order(methods, existing->id);
    SkillLibrary out = lib;
    auto& impl = out.implementations_.at({std::string(site), std::string(interface_id)});
    std::set<std::string> new_ids;
    for (auto i : order) {
        auto id = skill_id(interface_id, methods[i].name(), site);
        out.creation_log_.push_back(id);
        new_ids.insert(id);
    }
    for (auto& m : methods) impl.methods.push_back(std::move(m));
    raise_first_new(out, new_ids, true);
    return out;
}

std::vector<Violation> validate_library(const SkillLibrary& lib, SizeBounds bounds) {
    std::vector<Violation> out;
    std::map<std::string, const SkillDef*> expected;  // every skill that must be logged

    for (const auto& [category, iface] : lib.interfaces()) {
        std::set<std::string> names;
        for (const auto& s : iface.abstract_signatures) {
            if (!names.insert(s.name).second)
                out.push_back({iface.id, Rule::Duplicate, "'" + s.name + "' declared twice"});
            check_duplicate_params(s, iface.id, out);
        }
        auto scope = interface_scope(iface);
        std::map<std::string, std::vector<std::string>> default_edges;
        for (const auto& d : iface.default_methods) {
            auto id = default_skill_id(iface.id, d.name());
            if (!names.insert(d.name()).second) {
                out.push_back({iface.id, Rule::Duplicate, "'" + d.name() + "' declared twice"});
                continue;
            }
            expected[id] = &d;
            check_duplicate_params(d.signature, id, out);
            check_body(d, id, scope, out);
            check_size(d, id, bounds, out);
            auto& edges = default_edges[id];
            for (const auto& t : call_targets(d))
                if (iface.find_default(t)) edges.push_back(default_skill_id(iface.id, t));
        }
        for (const auto& id : nodes_on_cycles(default_edges))
            out.push_back({id, Rule::Cycle, "default-method call cycle"});
    }

    for (const auto& [key, impl] : lib.implementations()) {
        const auto& site = key.first;
        const auto* iface = lib.interface_by_id(impl.implements);
        if (!iface) {
            for (const auto& m : impl.methods)
                out.push_back({skill_id(impl.implements, m.name(), site), Rule::Dangling,
                               "implements unknown interface '" + impl.implements + "'"});
            continue;
        }
        auto scope = site_scope(*iface, impl);
        std::set<std::string> names;
        for (const auto& m : impl.methods) {
            auto id = skill_id(iface->id, m.name(), site);
            if (!names.insert(m.name()).second) {
                out.push_back({id, Rule::Duplicate, "method defined twice"});
                continue;
            }
            expected[id] = &m;
            check_duplicate_params(m.signature, id, out);
            if (iface->find_default(m.name())) {
                out.push_back({id, Rule::Conformance, "overrides default method '" + m.name() + "'"});
            } else if (const auto* sig = iface->find_signature(m.name()); !sig) {
                out.push_back({id, Rule::Conformance, "no abstract signature '" + m.name() + "' in " + iface->id});
            } else if (sig->params.size() != m.signature.params.size()) {
                out.push_back({id, Rule::Arity,
                               "takes " + std::to_string(m.signature.params.size()) + " parameter(s), signature has " +
                                   std::to_string(sig->params.size())});
            } else {
                for (std::size_t i = 0; i < sig->params.size(); ++i)
                    if (sig->params[i].kind != m.signature.params[i].kind)
                        out.push_back({id, Rule::Conformance,
                                       "parameter " + std::to_string(i + 1) + " kind differs from signature"});
            }
            check_body(m, id, scope, out);
            check_size(m, id, bounds, out);
        }
        auto cyclic = nodes_on_cycles(dispatch_graph(*iface, impl));
        for (const auto& id : cyclic)
            if (id.find('@') != std::string::npos) out.push_back({id, Rule::Cycle, "dispatch cycle on site '" + site + "'"});
    }

    // Creation log: each skill exactly once, created_at non-decreasing, and
    // references point strictly backwards.
    std::map<std::string, int> seen;
    int last_created = INT_MIN;
    const auto& log = lib.creation_log();
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& id = log[i];
        auto it = expected.find(id);
        if (it == expected.end()) {
            out.push_back({id, Rule::Dangling, "creation log names an unknown skill"});
            continue;
        }
        if (seen.count(id)) {
            out.push_back({id, Rule::Duplicate, "appears twice in creation log"});
            continue;
        }
        seen[id] = static_cast<int>(i);
        if (it->second->created_at < last_created)
            out.push_back({id, Rule::Ordering, "created_at decreases along the creation log"});
        last_created = std::max(last_created, it->second->created_at);
    }
    for (const auto& [id, def] : expected)
        if (!seen.count(id)) out.push_back({id, Rule::Dangling, "missing from creation log"});

    auto check_refs = [&](const std::string& id, const SkillDef& def, const Lookup& scope) {
        auto self = seen.find(id);
        if (self == seen.end()) return;
        for (const auto& t : call_targets(def)) {
            auto target = scope(t);
            if (!target || target->id.empty()) continue;
            auto j = seen.find(target->id);
            if (j != seen.end() && j->second >= self->second)
                out.push_back({id, Rule::Ordering, "references '" + target->id + "' which is not created earlier"});
        }
    };
    for (const auto& [category, iface] : lib.interfaces()) {
        auto scope = interface_scope(iface);
        for (const auto& d : iface.default_methods) check_refs(default_skill_id(iface.id, d.name()), d, scope);
    }
    for (const auto& [key, impl] : lib.implementations()) {
        const auto* iface = lib.interface_by_id(impl.implements);
        if (!iface) continue;
        auto scope = site_scope(*iface, impl);
        for (const auto& m : impl.methods) check_refs(skill_id(iface->id, m.name(), key.first), m, scope);
    }
    return out;
}

namespace {

void check_bindable(const SkillLibrary& lib, const CategoryInterface& iface, const SiteImplementation* impl,
                    const SkillDef& def, std::string_view site, std::set<std::string>& visiting) {
    for (const auto& t : call_targets(def)) {
        if (const auto* d = iface.find_default(t)) {
            if (visiting.insert(d->name()).second) check_bindable(lib, iface, impl, *d, site, visiting);
        } else if (iface.find_signature(t)) {
            if (!impl || !impl->find_method(t))
                fail(ErrorCode::UnimplementedAbstractCall, "'" + def.name() + "' calls abstract '" + t +
                                                               "' which site '" + std::string(site) +
                                                               "' has not implemented");
        } else if (!impl || !impl->find_method(t)) {
            fail(ErrorCode::UnknownSkill, "'" + def.name() + "' calls unknown skill '" + t + "'");
        }
    }
}

} // namespace

ResolvedSkill resolve_in(const SkillLibrary& lib, std::string_view site, std::string_view interface_id,
                         std::string_view name) {
    const auto* iface = lib.interface_by_id(interface_id);
    if (!iface) fail(ErrorCode::UnknownSkill, "unknown interface '" + std::string(interface_id) + "'");
    const auto* impl = lib.implementation(site, interface_id);
    if (impl) {
        if (const auto* m = impl->find_method(name))
            return {*m, skill_id(interface_id, name, site), std::string(interface_id), false};
    }
    if (const auto* d = iface->find_default(name)) {
        std::set<std::string> visiting{d->name()};
        check_bindable(lib, *iface, impl, *d, site, visiting);
        return {*d, default_skill_id(interface_id, name), std::string(interface_id), true};
    }
    if (iface->find_signature(name))
        fail(ErrorCode::UnimplementedAbstractCall,
             "site '" + std::string(site) + "' has not implemented '" + std::string(name) + "'");
    fail(ErrorCode::UnknownSkill, "no skill '" + std::string(name) + "' in " + std::string(interface_id));
}

ResolvedSkill resolve(const SkillLibrary& lib, std::string_view site, std::string_view name) {
    for (const auto* impl : lib.implementations_for_site(site)) {
        const auto* iface = lib.interface_by_id(impl->implements);
        if (!iface) continue;
        if (impl->find_method(name) || iface->find_default(name) || iface->find_signature(name))
            return resolve_in(lib, site, impl->implements, name);
    }
    fail(ErrorCode::UnknownSkill, "no skill '" + std::string(name) + "' on site '" + std::string(site) + "'");
}

std::vector<ResolvedSkill> callable_skills(const SkillLibrary& lib, std::string_view site) {
    std::vector<ResolvedSkill> out;
    for (const auto* impl : lib.implementations_for_site(site)) {
        const auto* iface = lib.interface_by_id(impl->implements);
        if (!iface) continue;
        for (const auto& m : impl->methods)
            out.push_back({m, skill_id(iface->id, m.name(), site), iface->id, false});
        for (const auto& d : iface->default_methods) {
            try {
                out.push_back(resolve_in(lib, site, iface->id, d.name()));
            } catch (const Error&) {
            }
        }
    }
    return out;
}

namespace {

constexpr int kMaxExpansionDepth = 64;

Value evaluate(const Expr& e, const Bindings& bindings) {
    if (!e.is_param()) return e.value();
    auto it = bindings.find(e.param().name);
    if (it == bindings.end()) fail(ErrorCode::UnboundParam, "unbound parameter '" + e.param().name + "'");
    return it->second;
}

void expand_into(const SkillLibrary& lib, std::string_view site, const std::string* scope, const Statement& stmt,
                 const Bindings& bindings, std::vector<PrimitiveAction>& out, int depth) {
    if (depth > kMaxExpansionDepth) fail(ErrorCode::CyclicReference, "skill expansion exceeds depth limit");
    if (stmt.is_stop()) return;
    if (stmt.is_prim()) {
        const auto& p = stmt.as_prim();
        auto kinds = primitive_arg_kinds(p.kind);
        if (p.args.size() != kinds.size())
            fail(ErrorCode::ArityError, std::string(to_string(p.kind)) + " takes " + std::to_string(kinds.size()) +
                                            " argument(s)");
        PrimitiveAction action{p.kind, {}};
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            auto v = evaluate(p.args[i], bindings);
            if (v.kind != kinds[i])
                fail(ErrorCode::ArgumentKind, std::string(to_string(p.kind)) + " argument " + std::to_string(i + 1) +
                                                  " must be " + std::string(to_string(kinds[i])));
            action.args.push_back(std::move(v));
        }
        out.push_back(std::move(action));
        return;
    }
    const auto& c = stmt.as_call();
    auto resolved = scope ? resolve_in(lib, site, *scope, c.target) : resolve(lib, site, c.target);
    const auto& params = resolved.def.signature.params;
    if (params.size() != c.args.size())
        fail(ErrorCode::ArityError, "call " + c.target + " passes " + std::to_string(c.args.size()) +
                                        " argument(s), expects " + std::to_string(params.size()));
    Bindings inner;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto v = evaluate(c.args[i], bindings);
        if (v.kind != params[i].kind)
            fail(ErrorCode::ArgumentKind, "call " + c.target + " argument '" + params[i].name + "' must be " +
                                              std::string(to_string(params[i].kind)));
        inner.emplace(params[i].name, std::move(v));
    }
    for (const auto& inner_stmt : resolved.def.body)
        expand_into(lib, site, &resolved.interface_id, inner_stmt, inner, out, depth + 1);
}

using SymbolicBindings = std::map<std::string, Expr, std::less<>>;

Expr substitute(const Expr& e, const SymbolicBindings& bindings) {
    if (!e.is_param()) return e;
    auto it = bindings.find(e.param().name);
    if (it == bindings.end()) fail(ErrorCode::UnboundParam, "unbound parameter '" + e.param().name + "'");
    return it->second;
}

void template_into(const SkillLibrary& lib, std::string_view site, const ResolvedSkill& skill,
                   const SymbolicBindings& bindings, std::vector<PrimStmt>& out, int depth) {
    if (depth > kMaxExpansionDepth) fail(ErrorCode::CyclicReference, "skill expansion exceeds depth limit");
    for (const auto& st : skill.def.body) {
        if (st.is_stop()) continue;
        if (st.is_prim()) {
            PrimStmt p = st.as_prim();
            for (auto& a : p.args) a = substitute(a, bindings);
            out.push_back(std::move(p));
            continue;
        }
        const auto& c = st.as_call();
        auto callee = resolve_in(lib, site, skill.interface_id, c.target);
        const auto& params = callee.def.signature.params;
        if (params.size() != c.args.size())
            fail(ErrorCode::ArityError, "call " + c.target + " has wrong argument count");
        SymbolicBindings inner;
        for (std::size_t i = 0; i < params.size(); ++i) inner.emplace(params[i].name, substitute(c.args[i], bindings));
        template_into(lib, site, callee, inner, out, depth + 1);
    }
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + p.string());
    out << content;
}

} // namespace

std::vector<PrimitiveAction> expand(const SkillLibrary& lib, std::string_view site, const Statement& stmt,
                                    const Bindings& bindings) {
    std::vector<PrimitiveAction> out;
    expand_into(lib, site, nullptr, stmt, bindings, out, 0);
    return out;
}

std::vector<PrimStmt> expand_template(const SkillLibrary& lib, std::string_view site, const ResolvedSkill& skill) {
    SymbolicBindings self;
    for (const auto& p : skill.def.signature.params) self.emplace(p.name, Expr{ParamRef{p.name}});
    std::vector<PrimStmt> out;
    template_into(lib, site, skill, self, out, 0);
    return out;
}

void save_library(const SkillLibrary& lib, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& [category, iface] : lib.interfaces()) {
        fs::create_directories(dir / category);
        write_file(dir / category / "interface.skill", print(iface));
    }
    for (const auto& [key, impl] : lib.implementations()) {
        const auto* iface = lib.interface_by_id(impl.implements);
        if (!iface) fail(ErrorCode::UnknownInterface, "cannot save implementation of unknown interface " + impl.implements);
        write_file(dir / iface->category / (impl.site + ".skill"), print(impl));
    }
    std::string log;
    for (const auto& id : lib.creation_log()) log += id + "\n";
    write_file(dir / "creation.log", log);
}

SkillLibrary load_library(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) fail(ErrorCode::Io, "library directory not found: " + dir.string());
    std::vector<CategoryInterface> interfaces;
    std::vector<SiteImplementation> impls;
    std::vector<fs::path> categories;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) categories.push_back(entry.path());
    std::sort(categories.begin(), categories.end());
    for (const auto& cat_dir : categories) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(cat_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".skill") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto parsed = parse_skill_file(SourceText(f.string(), read_file(f)));
            if (auto* iface = std::get_if<CategoryInterface>(&parsed)) {
                if (f.filename() != "interface.skill")
                    fail(ErrorCode::Io, f.string() + ": interface must live in interface.skill");
                interfaces.push_back(std::move(*iface));
            } else {
                impls.push_back(std::get<SiteImplementation>(std::move(parsed)));
            }
        }
    }
    std::vector<std::string> log;
    if (fs::exists(dir / "creation.log")) {
        std::istringstream in(read_file(dir / "creation.log"));
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) log.push_back(line);
    }
    return SkillLibrary::from_parts(std::move(interfaces), std::move(impls), std::move(log));
}

} // namespace webskill
