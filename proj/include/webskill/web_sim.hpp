#pragma once

// Deterministic simulated websites. A SiteSpec is pure data (pages, elements,
// transition rules); SiteState is the mutable per-episode state.

#include "webskill/dsl.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace webskill {

enum class Effect {
    Navigate,
    SubmitQuery,
    OpenResult,
    SetFlag,
    AddToCart,
    AddToWishlist,
    ApplyFilter,
    PlaceOrder,
    CreateRepo,
    Star,
    CreateIssue,
    SubmitLabel,
};
std::string_view to_string(Effect e);
std::optional<Effect> effect_from_name(std::string_view name);

struct Element {
    std::string id;
    std::string role;  // link, button, searchbox, textbox, option, ...
    std::string label;
    std::string requires_flag;  // visible only when this page flag is set; empty = always
    bool operator==(const Element&) const = default;
};

struct Page {
    std::string id;
    std::string title;
    std::vector<Element> elements;
    bool addressable = false;  // reachable with goto()
    bool operator==(const Page&) const = default;
};

/// (page, action, target) -> effect. `target` is an element id for clicks and
/// a key name for presses. A target ending in '*' matches a dynamic element
/// family by prefix (result lists).
struct TransitionRule {
    std::string page;
    PrimitiveKind action = PrimitiveKind::Click;
    std::string target;
    Effect effect = Effect::Navigate;
    std::string to_page;
    std::string arg;  // effect-specific: flag name, field element id, filter value
    bool operator==(const TransitionRule&) const = default;
};

struct SiteSpec {
    std::string id;
    std::string category;
    std::uint64_t seed = 0;
    int variant = 0;
    std::string tag;  // element-id prefix, unique within a family
    std::string home;
    std::vector<Page> pages;
    std::vector<TransitionRule> rules;
    std::vector<std::string> manifest;  // logical capabilities
    std::vector<std::string> catalog;   // listable entities: products or seeded repos

    const Page* find_page(std::string_view id) const;
    const Element* find_element(std::string_view page, std::string_view element) const;
    bool operator==(const SiteSpec&) const = default;
};

std::vector<std::string> known_categories();

/// Same manifest across the family; ids, labels and page shapes vary per site.
std::vector<SiteSpec> generate_site_family(std::string_view category, int n_sites, std::uint64_t seed);

struct PageRef {
    std::string page;
    std::string subject;  // item or repo on display
    std::string context;  // query for result pages, issue title for issue pages
    std::set<std::string> flags;  // page-local UI state (open menus, selected options)
    bool operator==(const PageRef&) const = default;
};

struct Tab {
    std::vector<PageRef> history;
    std::size_t cursor = 0;
    const PageRef& current() const { return history[cursor]; }
    bool operator==(const Tab&) const = default;
};

struct Issue {
    std::string repo;
    std::string title;
    std::set<std::string> labels;
    bool operator==(const Issue&) const = default;
};

struct Latent {
    std::map<std::string, std::string> fields;  // element id -> typed text
    std::string focused;
    std::vector<std::string> query_history;
    std::string active_filter;
    std::vector<std::string> cart;
    std::vector<std::string> wishlist;
    std::vector<std::vector<std::string>> orders;
    std::vector<std::string> repos;  // created during the episode
    std::set<std::string> starred;
    std::vector<Issue> issues;
    bool operator==(const Latent&) const = default;
};

struct SiteState {
    std::shared_ptr<const SiteSpec> spec;
    std::vector<Tab> tabs;
    std::size_t active = 0;
    Latent latent;
    int steps = 0;

    const PageRef& page() const { return tabs[active].current(); }
    bool operator==(const SiteState& o) const {
        return tabs == o.tabs && active == o.active && latent == o.latent && steps == o.steps;
    }
};

struct Node {
    std::string id;
    std::string role;
    std::string label;
    std::string value;
    bool operator==(const Node&) const = default;
};

struct Observation {
    std::string url;
    std::vector<Node> nodes;
    bool operator==(const Observation&) const = default;
};

std::string render(const Observation& obs);
std::string digest(const Observation& obs);
std::string state_digest(const SiteState& state);
/// Ignores navigation history and the step counter; used to prune search.
std::string core_digest(const SiteState& state);

struct Task {
    std::string id;
    std::string site;
    std::string instruction;
    std::string predicate;
    std::vector<std::string> params;
    int horizon = 20;
    std::string capability;  // manifest capability this task exercises
    bool operator==(const Task&) const = default;
};

std::vector<std::string> known_predicates();

SiteState initial_state(std::shared_ptr<const SiteSpec> spec);
Observation observe(const SiteState& state);
std::pair<SiteState, Observation> reset(std::shared_ptr<const SiteSpec> spec, const Task& task);
std::pair<SiteState, Observation> step(const SiteState& state, const PrimitiveAction& action);

struct Transition {
    SiteState state;
    Observation observation;
    std::optional<Effect> effect;  // rule effect that fired, if any
    bool wasted = false;
};
/// As step, also reporting which rule fired.
Transition transition(const SiteState& state, const PrimitiveAction& action);

/// Entities currently listed on a results page.
std::vector<std::string> listed_results(const SiteState& state);

/// `actions` is the full primitive expansion of the trajectory.
bool check_success(const Task& task, const SiteState& final_state, std::span<const PrimitiveAction> actions);
/// Human-readable account of how the predicate evaluated.
std::string explain_success(const Task& task, const SiteState& final_state, std::span<const PrimitiveAction> actions);

/// Shortest primitive sequence solving `task`, by breadth-first search over
/// clicks, typing task words, Enter and go_back. Empty optional if none within
/// `max_depth`.
std::optional<std::vector<PrimitiveAction>> find_witness(std::shared_ptr<const SiteSpec> spec, const Task& task,
                                                         int max_depth = 16);

/// Canonical task exercising one manifest capability. `params` follow the
/// capability's predicate (see known_predicates()).
Task capability_task(const SiteSpec& spec, std::string_view capability, std::vector<std::string> params,
                     std::string id = {});
/// Default entities for a capability task on this site.
std::vector<std::string> default_params(const SiteSpec& spec, std::string_view capability);
/// The k-th entity choice for a capability, cycling through a fixed vocabulary.
std::vector<std::string> task_params(const SiteSpec& spec, std::string_view capability, std::size_t k);
/// `count` tasks drawn deterministically from the capability templates.
std::vector<Task> generate_tasks(const SiteSpec& spec, int count, std::uint64_t seed, std::string_view id_prefix = {});

std::string site_to_json(const SiteSpec& spec);
SiteSpec site_from_json(std::string_view text);
std::string sites_to_json(const std::vector<SiteSpec>& specs);
std::vector<SiteSpec> sites_from_json(std::string_view text);
std::string tasks_to_json(const std::vector<Task>& tasks);
std::vector<Task> tasks_from_json(std::string_view text);

} // namespace webskill
