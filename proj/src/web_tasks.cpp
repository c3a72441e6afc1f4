#include "webskill/digest.hpp"
#include "webskill/web_sim.hpp"

#include "json.hpp"

#include <deque>
#include <mutex>
#include <random>
#include <unordered_set>

namespace webskill {

using json = nlohmann::json;

namespace {

struct Capability {
    std::string_view category;
    std::string_view name;
    std::string_view predicate;
    std::string_view instruction;  // {0} {1} {2} are predicate params
};

constexpr Capability kCapabilities[] = {
    {"shopping", "search", "results_for", "Search the store for {0}"},
    {"shopping", "open_item", "viewing_item", "Open the product page for {0}"},
    {"shopping", "add_to_cart", "cart_contains", "Add a {0} to the cart"},
    {"shopping", "add_to_wishlist", "wishlist_contains", "Save a {0} to the wishlist"},
    {"shopping", "checkout", "order_contains", "Buy a {0}"},
    {"shopping", "filter", "filtered_results", "Search for {0} and show only budget results"},
    {"coding", "create_repo", "repo_exists", "Create a repository named {0}"},
    {"coding", "open_repo", "viewing_repo", "Open the {0} repository"},
    {"coding", "star_repo", "repo_starred", "Star the {0} repository"},
    {"coding", "create_issue", "issue_exists", "Open an issue titled \"{1}\" on {0}"},
    {"coding", "add_label", "issue_labeled", "Open an issue titled \"{1}\" on {0} and label it {2}"},
};

const std::vector<std::string> kTaskProducts = {"mug",    "lamp",   "desk",     "pillow",  "kettle",
                                                "blender", "towel", "candle",   "notebook", "backpack"};
const std::vector<std::string> kTaskSeedRepos = {"atlas", "beacon", "comet", "dynamo", "ember", "falcon"};
const std::vector<std::string> kNewRepos = {"quill", "ripple", "summit", "tundra", "orbit", "pylon"};
const std::vector<std::string> kIssueTitles = {"crash on start", "typo in readme", "slow startup", "broken link"};
const std::vector<std::string> kLabels = {"bug", "docs", "enhancement"};

const Capability& capability_info(std::string_view category, std::string_view name) {
    for (const auto& c : kCapabilities)
        if (c.category == category && c.name == name) return c;
    fail(ErrorCode::UnknownPredicate, "no capability '" + std::string(name) + "' in category '" +
                                          std::string(category) + "'");
}

std::string fill(std::string_view tmpl, const std::vector<std::string>& params) {
    std::string out;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}' && tmpl[i + 1] >= '0' && tmpl[i + 1] <= '9') {
            auto k = static_cast<std::size_t>(tmpl[i + 1] - '0');
            if (k < params.size()) out += params[k];
            i += 2;
        } else {
            out += tmpl[i];
        }
    }
    return out;
}

void check_task_shape(const Task& t) {
    auto names = known_predicates();
    if (std::find(names.begin(), names.end(), t.predicate) == names.end())
        fail(ErrorCode::UnknownPredicate, "task " + t.id + ": unknown predicate '" + t.predicate + "'");
    if (t.horizon < 1) fail(ErrorCode::Config, "task " + t.id + ": horizon must be at least 1");
}

std::uint64_t seed_for(std::uint64_t seed, std::string_view site) {
    Fnv1a h;
    h.add(site);
    return seed ^ h.value();
}

// Search candidates: everything a user could sensibly do next without goto or tabs.
std::vector<PrimitiveAction> candidates(const SiteState& s, const std::vector<std::string>& words) {
    std::vector<PrimitiveAction> out;
    auto obs = observe(s);
    for (const auto& n : obs.nodes) {
        if (n.role == "heading" || n.role == "status" || n.role == "listitem") continue;
        out.push_back(PrimitiveAction::click(n.id));
        if ((n.role == "textbox" || n.role == "searchbox") && s.latent.focused == n.id)
            for (const auto& w : words) out.push_back(PrimitiveAction::type(n.id, w));
    }
    for (const auto& r : s.spec->rules)
        if (r.page == s.page().page && r.action == PrimitiveKind::Press) {
            out.push_back(PrimitiveAction::press(r.target));
            break;
        }
    if (s.tabs[s.active].cursor > 0) out.push_back(PrimitiveAction{PrimitiveKind::GoBack, {}});
    return out;
}

constexpr std::size_t kMaxSearchStates = 400000;

std::optional<std::vector<PrimitiveAction>> search_witness(std::shared_ptr<const SiteSpec> spec, const Task& task,
                                                           int max_depth) {
    struct Rec {
        int parent;
        PrimitiveAction action;
    };
    std::vector<Rec> recs;
    auto path_to = [&](int idx) {
        std::vector<PrimitiveAction> path;
        for (int i = idx; i >= 0; i = recs[static_cast<std::size_t>(i)].parent)
            path.push_back(recs[static_cast<std::size_t>(i)].action);
        std::reverse(path.begin(), path.end());
        return path;
    };
    bool needs_actions = task.predicate == "used_filter";

    auto start = initial_state(spec);
    if (check_success(task, start, {})) return std::vector<PrimitiveAction>{};
    std::deque<std::tuple<SiteState, int, int>> frontier;  // state, record index, depth
    std::unordered_set<std::string> seen{core_digest(start)};
    frontier.emplace_back(std::move(start), -1, 0);
    while (!frontier.empty()) {
        auto [state, idx, depth] = std::move(frontier.front());
        frontier.pop_front();
        if (depth >= max_depth) continue;
        for (auto& a : candidates(state, task.params)) {
            auto next = step(state, a).first;
            if (!seen.insert(core_digest(next)).second) continue;
            recs.push_back(Rec{idx, a});
            int me = static_cast<int>(recs.size()) - 1;
            std::vector<PrimitiveAction> path;
            if (needs_actions) path = path_to(me);
            if (check_success(task, next, path)) return needs_actions ? path : path_to(me);
            if (seen.size() > kMaxSearchStates) return std::nullopt;
            frontier.emplace_back(std::move(next), me, depth + 1);
        }
    }
    return std::nullopt;
}

json site_json(const SiteSpec& s) {
    json pages = json::array();
    for (const auto& p : s.pages) {
        json els = json::array();
        for (const auto& e : p.elements)
            els.push_back({{"id", e.id}, {"role", e.role}, {"label", e.label}, {"requires", e.requires_flag}});
        pages.push_back({{"id", p.id}, {"title", p.title}, {"addressable", p.addressable}, {"elements", els}});
    }
    json rules = json::array();
    for (const auto& r : s.rules)
        rules.push_back({{"page", r.page},
                         {"action", std::string(to_string(r.action))},
                         {"target", r.target},
                         {"effect", std::string(to_string(r.effect))},
                         {"to", r.to_page},
                         {"arg", r.arg}});
    return {{"schema", "webskill.site/1"},
            {"id", s.id},
            {"category", s.category},
            {"seed", s.seed},
            {"variant", s.variant},
            {"tag", s.tag},
            {"home", s.home},
            {"manifest", s.manifest},
            {"catalog", s.catalog},
            {"pages", pages},
            {"rules", rules}};
}

SiteSpec site_of(const json& j) {
    if (j.value("schema", "") != "webskill.site/1")
        fail(ErrorCode::SchemaMismatch, "expected schema webskill.site/1, got '" + j.value("schema", "") + "'");
    SiteSpec s;
    s.id = j.at("id").get<std::string>();
    s.category = j.at("category").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.variant = j.at("variant").get<int>();
    s.tag = j.at("tag").get<std::string>();
    s.home = j.at("home").get<std::string>();
    s.manifest = j.at("manifest").get<std::vector<std::string>>();
    s.catalog = j.at("catalog").get<std::vector<std::string>>();
    for (const auto& p : j.at("pages")) {
        Page page{p.at("id").get<std::string>(), p.at("title").get<std::string>(), {}, p.value("addressable", false)};
        for (const auto& e : p.at("elements"))
            page.elements.push_back(Element{e.at("id").get<std::string>(), e.at("role").get<std::string>(),
                                            e.at("label").get<std::string>(), e.value("requires", "")});
        s.pages.push_back(std::move(page));
    }
    for (const auto& r : j.at("rules")) {
        auto kind = primitive_from_name(r.at("action").get<std::string>());
        auto effect = effect_from_name(r.at("effect").get<std::string>());
        if (!kind || !effect) fail(ErrorCode::SchemaMismatch, "site " + s.id + ": bad rule action or effect");
        s.rules.push_back(TransitionRule{r.at("page").get<std::string>(), *kind, r.at("target").get<std::string>(),
                                         *effect, r.value("to", ""), r.value("arg", "")});
    }
    if (!s.find_page(s.home)) fail(ErrorCode::SchemaMismatch, "site " + s.id + ": home page missing");
    return s;
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string(what) + ": " + e.what());
    }
}

} // namespace

Task capability_task(const SiteSpec& spec, std::string_view capability, std::vector<std::string> params, std::string id) {
    const auto& cap = capability_info(spec.category, capability);
    Task t;
    t.id = id.empty() ? spec.id + "-" + std::string(capability) : std::move(id);
    t.site = spec.id;
    t.instruction = fill(cap.instruction, params);
    t.predicate = std::string(cap.predicate);
    t.params = std::move(params);
    t.horizon = 20;
    t.capability = std::string(capability);
    return t;
}

std::vector<std::string> default_params(const SiteSpec& spec, std::string_view capability) {
    if (spec.category == "shopping") return {"mug"};
    if (capability == "create_repo") return {kNewRepos[0]};
    if (capability == "create_issue") return {kTaskSeedRepos[0], kIssueTitles[0]};
    if (capability == "add_label") return {kTaskSeedRepos[0], kIssueTitles[0], kLabels[0]};
    return {kTaskSeedRepos[0]};
}

std::vector<std::string> task_params(const SiteSpec& spec, std::string_view capability, std::size_t k) {
    auto at = [k](const std::vector<std::string>& v, std::size_t stride) { return v[(k * stride) % v.size()]; };
    if (spec.category == "shopping") return {at(kTaskProducts, 1)};
    if (capability == "create_repo") return {at(kNewRepos, 1)};
    if (capability == "create_issue") return {at(kTaskSeedRepos, 1), at(kIssueTitles, 1)};
    if (capability == "add_label") return {at(kTaskSeedRepos, 1), at(kIssueTitles, 1), at(kLabels, 1)};
    return {at(kTaskSeedRepos, 1)};
}

std::vector<Task> generate_tasks(const SiteSpec& spec, int count, std::uint64_t seed, std::string_view id_prefix) {
    std::mt19937_64 rng(seed_for(seed, spec.id));
    auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng() % v.size()]; };
    std::vector<Task> out;
    for (int k = 0; k < count; ++k) {
        const auto& cap = pick(spec.manifest);
        std::vector<std::string> params;
        if (spec.category == "shopping") {
            params = {pick(kTaskProducts)};
        } else if (cap == "create_repo") {
            params = {pick(kNewRepos)};
        } else if (cap == "create_issue") {
            params = {pick(kTaskSeedRepos), pick(kIssueTitles)};
        } else if (cap == "add_label") {
            params = {pick(kTaskSeedRepos), pick(kIssueTitles), pick(kLabels)};
        } else {
            params = {pick(kTaskSeedRepos)};
        }
        char num[16];
        std::snprintf(num, sizeof num, "%03d", k);
        out.push_back(capability_task(spec, cap, std::move(params), std::string(id_prefix) + spec.id + "-" + num));
    }
    return out;
}

std::optional<std::vector<PrimitiveAction>> find_witness(std::shared_ptr<const SiteSpec> spec, const Task& task,
                                                         int max_depth) {
    static std::mutex mu;
    static std::map<std::string, std::optional<std::vector<PrimitiveAction>>> cache;
    Fnv1a key;
    key.field(site_to_json(*spec)).field(task.predicate).field(std::to_string(max_depth));
    for (const auto& p : task.params) key.field(p);
    auto k = key.hex();
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(k); it != cache.end()) return it->second;
    }
    auto found = search_witness(std::move(spec), task, max_depth);
    std::lock_guard lock(mu);
    cache.emplace(k, found);
    return found;
}

std::string site_to_json(const SiteSpec& spec) { return site_json(spec).dump(2) + "\n"; }

SiteSpec site_from_json(std::string_view text) { return site_of(parse_json(text, "site spec")); }

std::string sites_to_json(const std::vector<SiteSpec>& specs) {
    json arr = json::array();
    for (const auto& s : specs) arr.push_back(site_json(s));
    return json{{"schema", "webskill.sites/1"}, {"sites", arr}}.dump(2) + "\n";
}

std::vector<SiteSpec> sites_from_json(std::string_view text) {
    auto j = parse_json(text, "site family");
    if (j.value("schema", "") != "webskill.sites/1")
        fail(ErrorCode::SchemaMismatch, "expected schema webskill.sites/1");
    std::vector<SiteSpec> out;
    for (const auto& s : j.at("sites")) out.push_back(site_of(s));
    return out;
}

std::string tasks_to_json(const std::vector<Task>& tasks) {
    json arr = json::array();
    for (const auto& t : tasks)
        arr.push_back({{"id", t.id},
                       {"site", t.site},
                       {"instruction", t.instruction},
                       {"predicate", t.predicate},
                       {"params", t.params},
                       {"horizon", t.horizon},
                       {"capability", t.capability}});
    return json{{"schema", "webskill.tasks/1"}, {"tasks", arr}}.dump(2) + "\n";
}

std::vector<Task> tasks_from_json(std::string_view text) {
    auto j = parse_json(text, "task suite");
    const json* arr = &j;
    if (j.is_object()) {
        if (j.value("schema", "") != "webskill.tasks/1") fail(ErrorCode::SchemaMismatch, "expected schema webskill.tasks/1");
        arr = &j.at("tasks");
    }
    std::vector<Task> out;
    try {
        for (const auto& t : *arr) {
            Task task;
            task.id = t.at("id").get<std::string>();
            task.site = t.at("site").get<std::string>();
            task.instruction = t.value("instruction", "");
            task.predicate = t.at("predicate").get<std::string>();
            task.params = t.value("params", std::vector<std::string>{});
            task.horizon = t.value("horizon", 20);
            task.capability = t.value("capability", "");
            check_task_shape(task);
            out.push_back(std::move(task));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("task suite: ") + e.what());
    }
    return out;
}

} // namespace webskill
