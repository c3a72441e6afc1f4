#include "doctest.h"
#include "sites.hpp"

#include <algorithm>

using namespace webskill;
using namespace webskill::testing;

namespace {

SiteState run(SiteState s, std::initializer_list<PrimitiveAction> actions) {
    for (const auto& a : actions) s = step(s, a).first;
    return s;
}

bool has_node(const Observation& o, std::string_view id) {
    return std::any_of(o.nodes.begin(), o.nodes.end(), [&](const Node& n) { return n.id == id; });
}

} // namespace

TEST_CASE("family generation is deterministic and seed dependent") {
    auto a = generate_site_family("shopping", 3, 42);
    auto b = generate_site_family("shopping", 3, 42);
    auto c = generate_site_family("shopping", 3, 7);
    CHECK(sites_to_json(a) == sites_to_json(b));
    CHECK(sites_to_json(a) != sites_to_json(c));
    REQUIRE(a.size() == 3);
    for (const auto& s : a) CHECK(s.manifest == a[0].manifest);
    CHECK(a[0].id != a[1].id);
    CHECK(a[0].tag != a[1].tag);
}

TEST_CASE("unknown category") {
    try {
        generate_site_family("travel", 2, 1);
        FAIL("expected UnknownCategory");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownCategory);
    }
}

TEST_CASE("click, type, Enter lists matching results on the first shopping site") {
    auto spec = shop(0);
    auto s0 = initial_state(spec);
    auto box = spec->tag + "-search";
    REQUIRE(has_node(observe(s0), box));
    auto s = run(s0, {PrimitiveAction::click(box), PrimitiveAction::type(box, "mug"), PrimitiveAction::press("Enter")});
    CHECK(s.steps == 3);
    CHECK(s.page().page == "results");
    auto listed = listed_results(s);
    REQUIRE_FALSE(listed.empty());
    for (const auto& item : listed) CHECK(item.find("mug") != std::string::npos);
    CHECK(check_success(capability_task(*spec, "search", {"mug"}), s, {}));
    CHECK_FALSE(check_success(capability_task(*spec, "search", {"lamp"}), s, {}));
}

TEST_CASE("wasted actions only advance the step counter") {
    auto spec = shop(0);
    auto s0 = initial_state(spec);
    auto box = spec->tag + "-search";
    auto t = transition(s0, PrimitiveAction::type(box, "mug"));  // box not focused yet
    CHECK(t.wasted);
    CHECK(t.state.steps == 1);
    CHECK(core_digest(t.state) == core_digest(s0));
    auto missing = transition(s0, PrimitiveAction::click("no-such-element"));
    CHECK(missing.wasted);
    CHECK(missing.state.latent == s0.latent);
}

TEST_CASE("go_back restores the previous page") {
    auto spec = shop(1);  // search lives on its own page
    auto s0 = initial_state(spec);
    auto s1 = run(s0, {PrimitiveAction::click(spec->tag + "-nav-search")});
    CHECK(s1.page().page != s0.page().page);
    auto s2 = run(s1, {PrimitiveAction{PrimitiveKind::GoBack, {}}});
    CHECK(s2.page() == s0.page());
}

TEST_CASE("witness lengths on the seed-42 families") {
    for (const auto& spec : family("shopping")) {
        auto w = find_witness(spec, cap_task(*spec, "add_to_cart"));
        REQUIRE(w);
        CHECK(w->size() == 6);
        auto s = initial_state(spec);
        for (const auto& a : *w) s = step(s, a).first;
        CHECK(check_success(cap_task(*spec, "add_to_cart"), s, *w));
    }
    for (const auto& spec : family("coding")) {
        auto open = find_witness(spec, cap_task(*spec, "open_repo"));
        auto star = find_witness(spec, cap_task(*spec, "star_repo"));
        REQUIRE(open);
        REQUIRE(star);
        CHECK(star->size() == open->size() + 2);
    }
}

TEST_CASE("every manifest capability is solvable on every site") {
    for (auto category : {"shopping", "coding"})
        for (const auto& spec : family(category))
            for (const auto& cap : spec->manifest) CHECK_MESSAGE(find_witness(spec, cap_task(*spec, cap)), spec->id, " ", cap);
}

TEST_CASE("generated tasks stay on their site and round-trip through JSON") {
    auto spec = forge(1);
    auto tasks = generate_tasks(*spec, 8, 3, "t-");
    REQUIRE(tasks.size() == 8);
    for (const auto& t : tasks) {
        CHECK(t.site == spec->id);
        CHECK(t.id.rfind("t-", 0) == 0);
    }
    CHECK(tasks_from_json(tasks_to_json(tasks)) == tasks);
    CHECK(generate_tasks(*spec, 8, 3, "t-") == tasks);
}

TEST_CASE("site JSON round-trip and schema check") {
    auto spec = shop(2);
    CHECK(site_from_json(site_to_json(*spec)) == *spec);
    try {
        site_from_json(R"({"schema":"other/1"})");
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaMismatch);
    }
}

TEST_CASE("predicate with the wrong arity is rejected") {
    auto spec = shop(0);
    Task t = cap_task(*spec, "search");
    t.params.clear();
    CHECK_THROWS_AS(check_success(t, initial_state(spec), {}), Error);
    t.predicate = "teleported";
    try {
        check_success(t, initial_state(spec), {});
        FAIL("expected UnknownPredicate");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownPredicate);
    }
}
