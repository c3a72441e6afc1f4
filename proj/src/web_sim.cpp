#include "webskill/web_sim.hpp"

#include "webskill/digest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <sstream>

namespace webskill {

namespace {

constexpr std::array<std::string_view, 12> kEffectNames = {
    "navigate", "submit_query", "open_result", "set_flag",   "add_to_cart",  "add_to_wishlist",
    "apply_filter", "place_order", "create_repo", "star", "create_issue", "submit_label",
};

const std::vector<std::string> kShoppingManifest = {"search",          "open_item", "add_to_cart",
                                                    "add_to_wishlist", "checkout",  "filter"};
const std::vector<std::string> kCodingManifest = {"create_repo", "open_repo", "star_repo", "create_issue",
                                                  "add_label"};

// No catalog name is a substring of another, so a query lists exactly one entity.
const std::vector<std::string> kProducts = {"mug",    "lamp",     "desk",     "pillow",     "kettle",  "blender",
                                            "towel",  "candle",   "notebook", "backpack",   "stapler", "headphones"};
const std::vector<std::string> kSeedRepos = {"atlas", "beacon", "comet", "dynamo", "ember",
                                             "falcon", "glacier", "harbor", "jasper", "kestrel"};

const std::vector<std::string> kShopNames = {"marketo", "buyhub", "cartly", "shopnest",
                                             "dealbox", "goodsy", "tradeo", "basketry"};
const std::vector<std::string> kCodeNames = {"gitforge", "codehub", "repohouse", "srcbase", "commitly", "devnest"};

const std::vector<std::string> kTagPool = {"ka", "ro", "vi", "ze", "mu", "pa", "lo", "ni", "qu", "sa",
                                           "te", "wy", "bo", "fe", "gu", "hi", "jo", "xe", "da", "cy"};

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
    const std::string& pick(const std::vector<std::string>& v) { return v[below(v.size())]; }
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
    return !needle.empty() && lower(hay).find(lower(needle)) != std::string::npos;
}

bool is_text_input(const Element& e) { return e.role == "textbox" || e.role == "searchbox"; }

// Builder for one site's page graph.
struct SiteBuilder {
    SiteSpec spec;
    Rng& rng;

    std::string id(std::string_view logical) const { return spec.tag + "-" + std::string(logical); }

    Page& page(std::string_view pid, std::string title, bool addressable = false) {
        spec.pages.push_back(Page{std::string(pid), std::move(title), {}, addressable});
        return spec.pages.back();
    }

    Page& find(std::string_view pid) {
        for (auto& p : spec.pages)
            if (p.id == pid) return p;
        fail(ErrorCode::Config, "builder: no page " + std::string(pid));
    }

    void element(std::string_view pid, std::string_view logical, std::string role,
                 const std::vector<std::string>& labels, std::string requires_flag = {}) {
        find(pid).elements.push_back(Element{id(logical), std::move(role), rng.pick(labels), std::move(requires_flag)});
    }

    void click(std::string_view pid, std::string_view logical, Effect effect, std::string to_page = {},
               std::string arg = {}) {
        spec.rules.push_back(
            TransitionRule{std::string(pid), PrimitiveKind::Click, id(logical), effect, std::move(to_page), std::move(arg)});
    }

    void link(std::string_view pid, std::string_view logical, const std::vector<std::string>& labels,
              std::string to_page, std::string requires_flag = {}) {
        element(pid, logical, "link", labels, std::move(requires_flag));
        click(pid, logical, Effect::Navigate, std::move(to_page));
    }

    void press_enter(std::string_view pid, Effect effect, std::string to_page, std::string_view field_logical) {
        spec.rules.push_back(
            TransitionRule{std::string(pid), PrimitiveKind::Press, "Enter", effect, std::move(to_page), id(field_logical)});
    }

    void results(std::string_view pid, std::string to_page) {
        spec.rules.push_back(
            TransitionRule{std::string(pid), PrimitiveKind::Click, id("result-*"), Effect::OpenResult, std::move(to_page), {}});
    }
};

const std::vector<std::string> kSearchLabels = {"Search", "Search products", "What are you looking for?", "Find items"};
const std::vector<std::string> kCartLabels = {"Cart", "Basket", "Bag", "My cart"};
const std::vector<std::string> kHomeLabels = {"Home", "Back to store", "Main page"};

void build_shopping(SiteBuilder& b) {
    int search_shape = 1 - b.spec.variant % 2;  // 0: box on home, options on item page; 1: search page, direct add
    int checkout_shape = b.spec.variant / 2;  // 0: short, 1: standard, 2: long

    b.page("home", b.rng.pick({"Welcome", "Storefront", "Today's picks"}), true);
    std::string search_page = "home";
    if (search_shape == 1) {
        b.page("search", "Search");
        b.link("home", "nav-search", {"Search", "Browse catalog", "Find products"}, "search");
        search_page = "search";
    }
    b.element(search_page, "search", "searchbox", kSearchLabels);
    b.press_enter(search_page, Effect::SubmitQuery, "results", "search");
    b.link("home", "deals", {"Deals", "Offers", "Sale"}, "deals");
    b.link("home", "cart-link", kCartLabels, "cart");
    if (search_shape == 1) b.link("search", "home-link", kHomeLabels, "home");

    b.page("deals", "Deals");
    b.link("deals", "home-link", kHomeLabels, "home");

    b.page("results", "Results");
    b.results("results", "item");
    b.element("results", "filter-toggle", "button", {"Filters", "Refine", "Show filters"});
    b.click("results", "filter-toggle", Effect::SetFlag, {}, "filters");
    b.element("results", "filter-option", "option", {"Under $25", "Budget", "Low price"}, "filters");
    b.click("results", "filter-option", Effect::ApplyFilter, {}, "under-25");
    b.link("results", "cart-link", kCartLabels, "cart");

    b.page("item", "Product");
    if (search_shape == 0) {
        b.element("item", "size", "option", {"Standard size", "Choose variant", "Regular"});
        b.click("item", "size", Effect::SetFlag, {}, "option");
        b.element("item", "add", "button", {"Add to cart", "Add to basket", "Add to bag"}, "option");
    } else {
        b.element("item", "add", "button", {"Add to cart", "Add to basket", "Add to bag"});
    }
    b.click("item", "add", Effect::AddToCart);
    b.element("item", "wish", "button", {"Add to wishlist", "Save for later", "Heart"});
    b.click("item", "wish", Effect::AddToWishlist);
    b.link("item", "cart-link", kCartLabels, "cart");

    b.page("cart", "Cart", true);
    const std::vector<std::string> place_labels = {"Place order", "Buy now", "Confirm purchase"};
    if (checkout_shape == 0) {
        b.element("cart", "place", "button", place_labels);
        b.click("cart", "place", Effect::PlaceOrder, "confirmation");
    } else {
        b.link("cart", "checkout", {"Checkout", "Proceed to checkout", "Continue to payment"}, "checkout");
        b.page("checkout", "Checkout");
        if (checkout_shape == 1) {
            b.element("checkout", "place", "button", place_labels);
            b.click("checkout", "place", Effect::PlaceOrder, "confirmation");
        } else {
            b.link("checkout", "continue", {"Continue", "Next", "Shipping done"}, "payment");
            b.page("payment", "Payment");
            b.element("payment", "place", "button", place_labels);
            b.click("payment", "place", Effect::PlaceOrder, "confirmation");
        }
    }
    b.link("cart", "home-link", kHomeLabels, "home");

    b.page("confirmation", "Order placed");
    b.link("confirmation", "home-link", kHomeLabels, "home");

    b.spec.manifest = kShoppingManifest;
    b.spec.catalog = kProducts;
}

void build_coding(SiteBuilder& b) {
    int open_shape = b.spec.variant & 1;
    int create_shape = (b.spec.variant >> 1) & 1;
    int issue_shape = (b.spec.variant ^ (b.spec.variant >> 1)) & 1;

    b.page("home", b.rng.pick({"Dashboard", "Overview", "Your work"}), true);
    const std::vector<std::string> find_labels = {"Find a repository", "Search repositories", "Jump to"};
    std::string find_page = "home";
    if (open_shape == 1) {
        b.page("repos", "Repositories", true);
        b.link("home", "nav-repos", {"Repositories", "Your repos", "Projects"}, "repos");
        b.link("repos", "home-link", kHomeLabels, "home");
        find_page = "repos";
    }
    b.element(find_page, "find", "searchbox", find_labels);
    b.press_enter(find_page, Effect::SubmitQuery, "results", "find");

    if (create_shape == 0) {
        b.link("home", "new-repo", {"New repository", "Create repo", "New"}, "new-repo");
    } else {
        b.element("home", "plus", "button", {"+", "Create new", "Add"});
        b.click("home", "plus", Effect::SetFlag, {}, "menu");
        b.link("home", "menu-new", {"New repository", "Repository", "Blank repo"}, "new-repo", "menu");
    }
    b.link("home", "profile", {"Profile", "Settings", "Account"}, "profile");
    b.page("profile", "Profile");
    b.link("profile", "home-link", kHomeLabels, "home");

    b.page("new-repo", "Create a new repository");
    b.element("new-repo", "repo-name", "textbox", {"Repository name", "Name", "Project name"});
    b.element("new-repo", "create", "button", {"Create repository", "Create", "Save"});
    b.click("new-repo", "create", Effect::CreateRepo, "repo", b.id("repo-name"));

    b.page("results", "Repository results");
    b.results("results", "repo");

    b.page("repo", "Repository");
    b.element("repo", "more", "button", {"More", "Actions", "..."});
    b.click("repo", "more", Effect::SetFlag, {}, "actions");
    b.element("repo", "star", "button", {"Star", "Favorite", "Bookmark"}, "actions");
    b.click("repo", "star", Effect::Star);
    const std::vector<std::string> new_issue_labels = {"New issue", "Report a problem", "Open issue"};
    if (issue_shape == 0) {
        b.link("repo", "new-issue", new_issue_labels, "new-issue");
    } else {
        b.link("repo", "issues-tab", {"Issues", "Tracker", "Bugs"}, "issues");
        b.page("issues", "Issues");
        b.link("issues", "new-issue", new_issue_labels, "new-issue");
    }
    b.link("repo", "home-link", kHomeLabels, "home");

    b.page("new-issue", "New issue");
    b.element("new-issue", "issue-title", "textbox", {"Title", "Issue title", "Summary"});
    b.element("new-issue", "submit", "button", {"Submit new issue", "Create issue", "Submit"});
    b.click("new-issue", "submit", Effect::CreateIssue, "issue", b.id("issue-title"));

    b.page("issue", "Issue");
    b.element("issue", "gear", "button", {"Labels", "Edit labels", "Tag"});
    b.click("issue", "gear", Effect::SetFlag, {}, "labels");
    b.element("issue", "label-box", "textbox", {"Filter labels", "Label name", "Add label"}, "labels");
    b.press_enter("issue", Effect::SubmitLabel, {}, "label-box");
    b.link("issue", "home-link", kHomeLabels, "home");

    b.spec.manifest = kCodingManifest;
    b.spec.catalog = kSeedRepos;
}

int variant_count(std::string_view category) { return category == "shopping" ? 6 : 4; }

// Rules with '*' targets match by prefix; returns the rule and the dynamic suffix.
const TransitionRule* match_rule(const SiteSpec& spec, std::string_view page, PrimitiveKind kind, std::string_view target,
                                 std::string* suffix) {
    for (const auto& r : spec.rules) {
        if (r.page != page || r.action != kind) continue;
        if (!r.target.empty() && r.target.back() == '*') {
            std::string_view prefix(r.target.data(), r.target.size() - 1);
            if (target.size() > prefix.size() && target.substr(0, prefix.size()) == prefix) {
                if (suffix) *suffix = std::string(target.substr(prefix.size()));
                return &r;
            }
        } else if (r.target == target) {
            return &r;
        }
    }
    return nullptr;
}

PageRef& current_mut(SiteState& s) {
    auto& tab = s.tabs[s.active];
    return tab.history[tab.cursor];
}

void navigate(SiteState& s, PageRef ref) {
    auto& tab = s.tabs[s.active];
    tab.history.resize(tab.cursor + 1);
    tab.history.push_back(std::move(ref));
    ++tab.cursor;
    s.latent.focused.clear();
}

std::vector<Element> visible_elements(const SiteState& s) {
    std::vector<Element> out;
    const auto& ref = s.page();
    const auto* page = s.spec->find_page(ref.page);
    if (!page) return out;
    for (const auto& e : page->elements)
        if (e.requires_flag.empty() || ref.flags.count(e.requires_flag)) out.push_back(e);
    auto listed = listed_results(s);
    for (std::size_t i = 0; i < listed.size(); ++i)
        out.push_back(Element{s.spec->tag + "-result-" + std::to_string(i), "link", listed[i], {}});
    return out;
}

std::optional<Element> visible(const SiteState& s, std::string_view id) {
    for (auto& e : visible_elements(s))
        if (e.id == id) return e;
    return std::nullopt;
}

bool repo_known(const SiteState& s, std::string_view name) {
    auto eq = [&](const std::string& r) { return lower(r) == lower(name); };
    return std::any_of(s.spec->catalog.begin(), s.spec->catalog.end(), eq) ||
           std::any_of(s.latent.repos.begin(), s.latent.repos.end(), eq);
}

// Returns false when the effect's preconditions fail (a wasted step).
bool apply(SiteState& s, const TransitionRule& r, const std::string& suffix) {
    auto& L = s.latent;
    PageRef here = s.page();
    switch (r.effect) {
    case Effect::Navigate:
        navigate(s, PageRef{r.to_page, here.subject, here.context, {}});
        return true;
    case Effect::SubmitQuery: {
        auto it = L.fields.find(r.arg);
        if (L.focused != r.arg || it == L.fields.end() || it->second.empty()) return false;
        auto q = it->second;
        L.query_history.push_back(q);
        L.active_filter.clear();
        navigate(s, PageRef{r.to_page, {}, q, {}});
        return true;
    }
    case Effect::OpenResult: {
        auto listed = listed_results(s);
        std::size_t idx = 0;
        try {
            std::size_t used = 0;
            idx = std::stoul(suffix, &used);
            if (used != suffix.size()) return false;
        } catch (...) {
            return false;
        }
        if (idx >= listed.size()) return false;
        navigate(s, PageRef{r.to_page, listed[idx], {}, {}});
        return true;
    }
    case Effect::SetFlag:
        current_mut(s).flags.insert(r.arg);
        return true;
    case Effect::AddToCart:
        if (here.subject.empty()) return false;
        L.cart.push_back(here.subject);
        return true;
    case Effect::AddToWishlist:
        if (here.subject.empty()) return false;
        if (std::find(L.wishlist.begin(), L.wishlist.end(), here.subject) == L.wishlist.end())
            L.wishlist.push_back(here.subject);
        return true;
    case Effect::ApplyFilter:
        if (here.context.empty()) return false;
        L.active_filter = r.arg;
        return true;
    case Effect::PlaceOrder:
        if (L.cart.empty()) return false;
        L.orders.push_back(L.cart);
        L.cart.clear();
        navigate(s, PageRef{r.to_page, {}, {}, {}});
        return true;
    case Effect::CreateRepo: {
        auto name = L.fields[r.arg];
        if (name.empty() || repo_known(s, name)) return false;
        L.repos.push_back(name);
        L.fields.erase(r.arg);
        navigate(s, PageRef{r.to_page, name, {}, {}});
        return true;
    }
    case Effect::Star:
        if (here.subject.empty()) return false;
        L.starred.insert(here.subject);
        return true;
    case Effect::CreateIssue: {
        auto title = L.fields[r.arg];
        if (title.empty() || here.subject.empty()) return false;
        L.issues.push_back(Issue{here.subject, title, {}});
        L.fields.erase(r.arg);
        navigate(s, PageRef{r.to_page, here.subject, title, {}});
        return true;
    }
    case Effect::SubmitLabel: {
        auto it = L.fields.find(r.arg);
        if (L.focused != r.arg || it == L.fields.end() || it->second.empty()) return false;
        for (auto& issue : L.issues) {
            if (issue.repo == here.subject && issue.title == here.context) {
                issue.labels.insert(it->second);
                L.fields.erase(it);
                return true;
            }
        }
        return false;
    }
    }
    return false;
}

void check_action_shape(const PrimitiveAction& a) {
    auto kinds = primitive_arg_kinds(a.kind);
    if (a.args.size() != kinds.size())
        fail(ErrorCode::MalformedAction, std::string(to_string(a.kind)) + " takes " + std::to_string(kinds.size()) +
                                             " argument(s), got " + std::to_string(a.args.size()));
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (a.args[i].kind != kinds[i])
            fail(ErrorCode::MalformedAction, std::string(to_string(a.kind)) + " argument " + std::to_string(i + 1) +
                                                 " must be " + std::string(to_string(kinds[i])));
}

void serialize_ref(Fnv1a& h, const PageRef& r) {
    h.field(r.page).field(r.subject).field(r.context);
    h.field(std::to_string(r.flags.size()));
    for (const auto& f : r.flags) h.field(f);
}

void serialize_latent(Fnv1a& h, const Latent& L) {
    h.field("fields").field(std::to_string(L.fields.size()));
    for (const auto& [k, v] : L.fields) h.field(k).field(v);
    h.field("focus").field(L.focused);
    h.field("queries").field(std::to_string(L.query_history.size()));
    for (const auto& q : L.query_history) h.field(q);
    h.field("filter").field(L.active_filter);
    auto list = [&](std::string_view name, const auto& v) {
        h.field(name).field(std::to_string(v.size()));
        for (const auto& x : v) h.field(x);
    };
    list("cart", L.cart);
    list("wishlist", L.wishlist);
    h.field("orders").field(std::to_string(L.orders.size()));
    for (const auto& o : L.orders) list("order", o);
    list("repos", L.repos);
    list("starred", L.starred);
    h.field("issues").field(std::to_string(L.issues.size()));
    for (const auto& i : L.issues) {
        h.field(i.repo).field(i.title);
        list("labels", i.labels);
    }
}

struct PredicateInfo {
    std::string_view name;
    std::size_t arity;
};

constexpr std::array<PredicateInfo, 12> kPredicates = {{
    {"results_for", 1},
    {"viewing_item", 1},
    {"cart_contains", 1},
    {"wishlist_contains", 1},
    {"filtered_results", 1},
    {"used_filter", 1},
    {"order_contains", 1},
    {"repo_exists", 1},
    {"viewing_repo", 1},
    {"repo_starred", 1},
    {"issue_exists", 2},
    {"issue_labeled", 3},
}};

bool any_ci(const auto& container, std::string_view x) {
    for (const auto& v : container)
        if (contains_ci(v, x)) return true;
    return false;
}

struct Evaluation {
    bool ok = false;
    std::string trace;
};

Evaluation evaluate(const Task& task, const SiteState& s, std::span<const PrimitiveAction> actions) {
    const PredicateInfo* info = nullptr;
    for (const auto& p : kPredicates)
        if (p.name == task.predicate) info = &p;
    if (!info) fail(ErrorCode::UnknownPredicate, "unknown predicate '" + task.predicate + "'");
    if (task.params.size() != info->arity)
        fail(ErrorCode::UnknownPredicate, task.predicate + " takes " + std::to_string(info->arity) + " parameter(s)");
    const auto& p = task.params;
    const auto& L = s.latent;
    const auto& here = s.page();
    auto on = [&](std::string_view page) { return here.page == page; };
    auto results_for = [&](const std::string& q) { return on("results") && lower(here.context) == lower(q); };
    std::ostringstream why;
    bool ok = false;
    const auto& P = task.predicate;
    if (P == "results_for") {
        ok = results_for(p[0]);
        why << "page=" << here.page << " query='" << here.context << "'";
    } else if (P == "viewing_item") {
        ok = on("item") && lower(here.subject) == lower(p[0]);
        why << "page=" << here.page << " subject='" << here.subject << "'";
    } else if (P == "cart_contains") {
        ok = any_ci(L.cart, p[0]);
        why << "cart has " << L.cart.size() << " item(s)";
    } else if (P == "wishlist_contains") {
        ok = any_ci(L.wishlist, p[0]);
        why << "wishlist has " << L.wishlist.size() << " item(s)";
    } else if (P == "filtered_results") {
        ok = results_for(p[0]) && !L.active_filter.empty();
        why << "page=" << here.page << " query='" << here.context << "' filter='" << L.active_filter << "'";
    } else if (P == "used_filter") {
        std::set<std::string> filter_ids;
        for (const auto& r : s.spec->rules)
            if (r.effect == Effect::ApplyFilter) filter_ids.insert(r.target);
        bool clicked = std::any_of(actions.begin(), actions.end(), [&](const PrimitiveAction& a) {
            return a.kind == PrimitiveKind::Click && filter_ids.count(a.args[0].text);
        });
        ok = results_for(p[0]) && clicked;
        why << "page=" << here.page << " query='" << here.context << "' filter clicked=" << (clicked ? "yes" : "no");
    } else if (P == "order_contains") {
        ok = std::any_of(L.orders.begin(), L.orders.end(), [&](const auto& o) { return any_ci(o, p[0]); });
        why << L.orders.size() << " order(s) placed";
    } else if (P == "repo_exists") {
        ok = std::any_of(L.repos.begin(), L.repos.end(), [&](const auto& r) { return lower(r) == lower(p[0]); });
        why << L.repos.size() << " repo(s) created";
    } else if (P == "viewing_repo") {
        ok = on("repo") && lower(here.subject) == lower(p[0]);
        why << "page=" << here.page << " subject='" << here.subject << "'";
    } else if (P == "repo_starred") {
        ok = std::any_of(L.starred.begin(), L.starred.end(), [&](const auto& r) { return lower(r) == lower(p[0]); });
        why << L.starred.size() << " repo(s) starred";
    } else if (P == "issue_exists" || P == "issue_labeled") {
        for (const auto& i : L.issues) {
            if (lower(i.repo) != lower(p[0]) || lower(i.title) != lower(p[1])) continue;
            if (P == "issue_exists") ok = true;
            else ok = ok || std::any_of(i.labels.begin(), i.labels.end(),
                                        [&](const auto& l) { return lower(l) == lower(p[2]); });
        }
        why << L.issues.size() << " issue(s) exist";
    }
    std::ostringstream out;
    out << task.predicate << "(";
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? ", " : "") << '"' << p[i] << '"';
    out << ") = " << (ok ? "true" : "false") << "; " << why.str();
    return {ok, out.str()};
}

} // namespace

std::string_view to_string(Effect e) { return kEffectNames[static_cast<std::size_t>(e)]; }

std::optional<Effect> effect_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kEffectNames.size(); ++i)
        if (kEffectNames[i] == name) return static_cast<Effect>(i);
    return std::nullopt;
}

const Page* SiteSpec::find_page(std::string_view pid) const {
    for (const auto& p : pages)
        if (p.id == pid) return &p;
    return nullptr;
}

const Element* SiteSpec::find_element(std::string_view pid, std::string_view element) const {
    const auto* p = find_page(pid);
    if (!p) return nullptr;
    for (const auto& e : p->elements)
        if (e.id == element) return &e;
    return nullptr;
}

std::vector<std::string> known_categories() { return {"coding", "shopping"}; }

std::vector<std::string> known_predicates() {
    std::vector<std::string> out;
    for (const auto& p : kPredicates) out.emplace_back(p.name);
    return out;
}

std::vector<SiteSpec> generate_site_family(std::string_view category, int n_sites, std::uint64_t seed) {
    if (category != "shopping" && category != "coding")
        fail(ErrorCode::UnknownCategory, "unknown site category '" + std::string(category) + "'");
    if (n_sites < 1) fail(ErrorCode::Config, "n_sites must be at least 1");

    Rng family(mix(seed, category == "shopping" ? 1 : 2));
    std::vector<std::size_t> tag_order(kTagPool.size());
    for (std::size_t i = 0; i < tag_order.size(); ++i) tag_order[i] = i;
    for (std::size_t i = tag_order.size(); i > 1; --i) std::swap(tag_order[i - 1], tag_order[family.below(i)]);
    auto offset = static_cast<int>(family.below(static_cast<std::size_t>(variant_count(category))));

    const auto& names = category == "shopping" ? kShopNames : kCodeNames;
    std::vector<SiteSpec> out;
    for (int i = 0; i < n_sites; ++i) {
        auto idx = static_cast<std::size_t>(i);
        Rng rng(mix(seed, 100 + idx));
        SiteBuilder b{SiteSpec{}, rng};
        b.spec.id = names[idx % names.size()] + (idx >= names.size() ? std::to_string(idx / names.size()) : "");
        b.spec.category = std::string(category);
        b.spec.seed = seed;
        b.spec.variant = (offset + i) % variant_count(category);
        b.spec.tag = kTagPool[tag_order[idx % kTagPool.size()]] +
                     (idx >= kTagPool.size() ? std::to_string(idx / kTagPool.size()) : "");
        b.spec.home = "home";
        if (category == "shopping") build_shopping(b);
        else build_coding(b);

        auto spec = std::make_shared<const SiteSpec>(b.spec);
        for (const auto& cap : spec->manifest) {
            auto task = capability_task(*spec, cap, default_params(*spec, cap));
            if (!find_witness(spec, task))
                fail(ErrorCode::Config, "generated site " + spec->id + " cannot reach capability " + cap);
        }
        out.push_back(std::move(b.spec));
    }
    return out;
}

SiteState initial_state(std::shared_ptr<const SiteSpec> spec) {
    SiteState s;
    s.tabs.push_back(Tab{{PageRef{spec->home, {}, {}, {}}}, 0});
    s.spec = std::move(spec);
    return s;
}

std::vector<std::string> listed_results(const SiteState& s) {
    const auto& here = s.page();
    std::vector<std::string> out;
    if (here.page != "results" || here.context.empty()) return out;
    for (const auto& c : s.spec->catalog)
        if (contains_ci(c, here.context)) out.push_back(c);
    for (const auto& r : s.latent.repos)
        if (contains_ci(r, here.context)) out.push_back(r);
    return out;
}

Observation observe(const SiteState& s) {
    Observation obs;
    const auto& here = s.page();
    obs.url = s.spec->id + "/" + here.page;
    if (!here.subject.empty()) obs.url += "/" + here.subject;
    if (!here.context.empty()) obs.url += "?q=" + here.context;
    const auto& tag = s.spec->tag;
    if (const auto* page = s.spec->find_page(here.page))
        obs.nodes.push_back(Node{tag + "-title", "heading", page->title, here.subject});
    for (const auto& e : visible_elements(s)) {
        std::string value;
        if (is_text_input(e)) {
            auto it = s.latent.fields.find(e.id);
            if (it != s.latent.fields.end()) value = it->second;
            if (s.latent.focused == e.id) value += value.empty() ? "[focused]" : " [focused]";
        }
        obs.nodes.push_back(Node{e.id, e.role, e.label, value});
    }
    if (here.page == "results" && !s.latent.active_filter.empty())
        obs.nodes.push_back(Node{tag + "-active-filter", "status", "Filter", s.latent.active_filter});
    if (here.page == "cart")
        for (std::size_t i = 0; i < s.latent.cart.size(); ++i)
            obs.nodes.push_back(Node{tag + "-cart-" + std::to_string(i), "listitem", s.latent.cart[i], {}});
    if (here.page == "repo")
        obs.nodes.push_back(Node{tag + "-stars", "status", "Starred", s.latent.starred.count(here.subject) ? "yes" : "no"});
    if (here.page == "issue") {
        for (const auto& i : s.latent.issues) {
            if (i.repo != here.subject || i.title != here.context) continue;
            std::string labels;
            for (const auto& l : i.labels) labels += (labels.empty() ? "" : ",") + l;
            obs.nodes.push_back(Node{tag + "-labels", "status", "Labels", labels});
        }
    }
    if (s.tabs.size() > 1)
        obs.nodes.push_back(Node{tag + "-tabs", "status", "Tabs",
                                 std::to_string(s.active) + "/" + std::to_string(s.tabs.size())});
    return obs;
}

std::pair<SiteState, Observation> reset(std::shared_ptr<const SiteSpec> spec, const Task& task) {
    if (task.site != spec->id)
        fail(ErrorCode::SiteTaskMismatch, "task " + task.id + " targets site '" + task.site + "', not '" + spec->id + "'");
    auto s = initial_state(std::move(spec));
    auto obs = observe(s);
    return {std::move(s), std::move(obs)};
}

Transition transition(const SiteState& state, const PrimitiveAction& action) {
    check_action_shape(action);
    SiteState s = state;
    ++s.steps;
    auto wasted = [&] {
        SiteState w = state;
        ++w.steps;
        auto obs = observe(w);
        return Transition{std::move(w), std::move(obs), std::nullopt, true};
    };
    std::optional<Effect> fired;

    switch (action.kind) {
    case PrimitiveKind::Noop:
    case PrimitiveKind::Hover:
    case PrimitiveKind::Scroll:
        break;
    case PrimitiveKind::Click: {
        const auto& id = action.args[0].text;
        auto el = visible(s, id);
        if (!el) return wasted();
        if (is_text_input(*el)) {
            s.latent.focused = id;
            break;
        }
        std::string suffix;
        const auto* rule = match_rule(*s.spec, s.page().page, PrimitiveKind::Click, id, &suffix);
        if (!rule || !apply(s, *rule, suffix)) return wasted();
        fired = rule->effect;
        break;
    }
    case PrimitiveKind::Type: {
        const auto& id = action.args[0].text;
        auto el = visible(s, id);
        if (!el || !is_text_input(*el) || s.latent.focused != id) return wasted();
        s.latent.fields[id] = action.args[1].text;
        break;
    }
    case PrimitiveKind::Press: {
        const auto* rule = match_rule(*s.spec, s.page().page, PrimitiveKind::Press, action.args[0].text, nullptr);
        if (!rule || !apply(s, *rule, {})) return wasted();
        fired = rule->effect;
        break;
    }
    case PrimitiveKind::TabFocus: {
        auto i = action.args[0].integer;
        if (i < 0 || static_cast<std::size_t>(i) >= s.tabs.size()) return wasted();
        s.active = static_cast<std::size_t>(i);
        s.latent.focused.clear();
        break;
    }
    case PrimitiveKind::NewTab:
        s.tabs.push_back(Tab{{PageRef{s.spec->home, {}, {}, {}}}, 0});
        s.active = s.tabs.size() - 1;
        s.latent.focused.clear();
        break;
    case PrimitiveKind::TabClose:
        if (s.tabs.size() < 2) return wasted();
        s.tabs.erase(s.tabs.begin() + static_cast<std::ptrdiff_t>(s.active));
        s.active = std::min(s.active, s.tabs.size() - 1);
        s.latent.focused.clear();
        break;
    case PrimitiveKind::GoBack: {
        auto& tab = s.tabs[s.active];
        if (tab.cursor == 0) return wasted();
        --tab.cursor;
        s.latent.focused.clear();
        break;
    }
    case PrimitiveKind::GoForward: {
        auto& tab = s.tabs[s.active];
        if (tab.cursor + 1 >= tab.history.size()) return wasted();
        ++tab.cursor;
        s.latent.focused.clear();
        break;
    }
    case PrimitiveKind::Goto: {
        const auto* page = s.spec->find_page(action.args[0].text);
        if (!page || !page->addressable) return wasted();
        navigate(s, PageRef{page->id, {}, {}, {}});
        break;
    }
    }
    auto obs = observe(s);
    return Transition{std::move(s), std::move(obs), fired, false};
}

std::pair<SiteState, Observation> step(const SiteState& state, const PrimitiveAction& action) {
    auto t = transition(state, action);
    return {std::move(t.state), std::move(t.observation)};
}

std::string render(const Observation& obs) {
    std::ostringstream os;
    os << "url: " << obs.url << "\n";
    for (const auto& n : obs.nodes) {
        os << "[" << n.id << "] " << n.role << " \"" << n.label << "\"";
        if (!n.value.empty()) os << " value=\"" << n.value << "\"";
        os << "\n";
    }
    return os.str();
}

std::string digest(const Observation& obs) { return digest_hex(render(obs)); }

std::string state_digest(const SiteState& s) {
    Fnv1a h;
    h.field(s.spec ? s.spec->id : "").field(std::to_string(s.steps));
    h.field(std::to_string(s.tabs.size())).field(std::to_string(s.active));
    for (const auto& t : s.tabs) {
        h.field(std::to_string(t.cursor)).field(std::to_string(t.history.size()));
        for (const auto& r : t.history) serialize_ref(h, r);
    }
    serialize_latent(h, s.latent);
    return h.hex();
}

std::string core_digest(const SiteState& s) {
    Fnv1a h;
    h.field(std::to_string(s.tabs.size())).field(std::to_string(s.active));
    serialize_ref(h, s.page());
    serialize_latent(h, s.latent);
    return h.hex();
}

bool check_success(const Task& task, const SiteState& final_state, std::span<const PrimitiveAction> actions) {
    return evaluate(task, final_state, actions).ok;
}

std::string explain_success(const Task& task, const SiteState& final_state, std::span<const PrimitiveAction> actions) {
    return evaluate(task, final_state, actions).trace;
}

} // namespace webskill
