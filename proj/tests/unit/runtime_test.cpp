#include "doctest.h"
#include "sites.hpp"

#include "webskill/runtime.hpp"

using namespace webskill;
using namespace webskill::testing;

namespace {

// Hand-written search and add_to_cart for the first seed-42 shopping site.
SkillLibrary shop_skills(const SiteSpec& spec) {
    const auto& t = spec.tag;
    auto iface = parse_skill_file(R"(interface AbstractShopping category shopping {
  abstract search(query: text)
  abstract add_to_cart()
})");
    auto impl = parse_skill_file("implementation Shop implements AbstractShopping site " + spec.id + " at 2 {\n"
                                 "  skill search(query: text) at 2 { click(#" + t + "-search); type(#" + t +
                                 "-search, query); press(\"Enter\") }\n"
                                 "  skill add_to_cart() at 2 { click(#" + t + "-result-0); click(#" + t +
                                 "-size); click(#" + t + "-add) }\n}\n");
    auto lib = register_interface(SkillLibrary{}, std::get<CategoryInterface>(iface));
    return register_implementation(lib, std::get<SiteImplementation>(impl));
}

} // namespace

TEST_CASE("primitive oracle adds a mug in six steps") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "add_to_cart", {"mug"});
    OraclePolicy oracle(false);
    auto ep = execute_task(spec, task, SkillLibrary{}, oracle);
    CHECK(ep.trajectory.success);
    CHECK(ep.trajectory.end == EndReason::Success);
    CHECK(ep.trajectory.wall_steps() == 6);
    CHECK(ep.trajectory.primitives().size() == 6);
}

TEST_CASE("skills shorten the same task to at most three steps") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "add_to_cart", {"mug"});
    auto lib = shop_skills(*spec);
    OraclePolicy oracle(true);
    auto ep = execute_task(spec, task, lib, oracle);
    CHECK(ep.trajectory.success);
    CHECK(ep.trajectory.wall_steps() <= 3);
    CHECK(ep.trajectory.primitives().size() == 6);
    auto called = ep.trajectory.called_skills();
    REQUIRE(called.size() == 2);
    CHECK(called[0] == "AbstractShopping.search@" + spec->id);
    CHECK(called[1] == "AbstractShopping.add_to_cart@" + spec->id);
}

TEST_CASE("a skill call is one step however long its expansion") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "search", {"mug"});
    ScriptedPolicy script({{task.id, {parse_statement("call search(\"mug\")")}}});
    auto ep = execute_task(spec, task, shop_skills(*spec), script);
    REQUIRE(ep.trajectory.steps.size() == 1);
    CHECK(ep.trajectory.steps[0].expansion_length == 3);
    CHECK(ep.trajectory.success);
}

TEST_CASE("horizon of one ends without success") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "add_to_cart", {"mug"});
    task.horizon = 1;
    OraclePolicy oracle(false);
    auto ep = execute_task(spec, task, SkillLibrary{}, oracle);
    CHECK_FALSE(ep.trajectory.success);
    CHECK(ep.trajectory.end == EndReason::Horizon);
    CHECK(ep.trajectory.wall_steps() == 1);
}

TEST_CASE("stop is recorded and ends the episode") {
    auto spec = shop(0);
    auto task = cap_task(*spec, "search");
    ScriptedPolicy script({{task.id, {Statement::stop()}}});
    auto ep = execute_task(spec, task, SkillLibrary{}, script);
    CHECK(ep.trajectory.end == EndReason::Stop);
    CHECK(ep.trajectory.steps.size() == 1);
}

TEST_CASE("scripted policy without a script for the task") {
    auto spec = shop(0);
    ScriptedPolicy script(std::map<std::string, std::vector<Statement>>{{"other", {}}});
    try {
        execute_task(spec, cap_task(*spec, "search"), SkillLibrary{}, script);
        FAIL("expected MissingScript");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingScript);
    }
}

TEST_CASE("calling an unknown skill is a fault, not a step") {
    auto spec = shop(0);
    auto task = cap_task(*spec, "search");
    ScriptedPolicy script({{task.id, {parse_statement("noop()"), parse_statement("call teleport()")}}});
    auto ep = execute_task(spec, task, SkillLibrary{}, script);
    CHECK(ep.trajectory.end == EndReason::PolicyFault);
    CHECK(ep.trajectory.steps.size() == 1);
    CHECK(ep.trajectory.fault_stmt == "call teleport()");
    CHECK(ep.trajectory.fault.find("UnknownSkill") != std::string::npos);
}

TEST_CASE("replay reproduces a trajectory and spots tampering") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "add_to_cart", {"mug"});
    auto lib = shop_skills(*spec);
    OraclePolicy oracle(true);
    auto ep = execute_task(spec, task, lib, oracle);
    auto ok = replay_trajectory(spec, task, lib, ep.trajectory);
    CHECK(ok.match);

    auto tampered = ep.trajectory;
    tampered.steps[1].post_digest = "0000000000000000";
    auto bad = replay_trajectory(spec, task, lib, tampered);
    CHECK_FALSE(bad.match);
    CHECK(bad.first_divergent_step == 1);

    auto other_lib = replay_trajectory(spec, task, SkillLibrary{}, ep.trajectory);
    CHECK_FALSE(other_lib.match);
}

TEST_CASE("replay of a faulted trajectory") {
    auto spec = shop(0);
    auto task = cap_task(*spec, "search");
    ScriptedPolicy script({{task.id, {parse_statement("call teleport()")}}});
    auto ep = execute_task(spec, task, SkillLibrary{}, script);
    CHECK(replay_trajectory(spec, task, SkillLibrary{}, ep.trajectory).match);
}

TEST_CASE("trajectory JSONL round-trip") {
    auto spec = shop(0);
    auto task = capability_task(*spec, "add_to_cart", {"mug"});
    OraclePolicy oracle(true);
    auto ep = execute_task(spec, task, shop_skills(*spec), oracle);
    auto text = trajectory_to_jsonl(ep.trajectory);
    auto back = trajectories_from_jsonl(text + text);
    REQUIRE(back.size() == 2);
    CHECK(trajectory_to_jsonl(back[0]) == text);
    CHECK(back[1].steps.size() == ep.trajectory.steps.size());
    CHECK_THROWS_AS(trajectories_from_jsonl("{\"schema\":\"nope/1\"}\n"), Error);
}

TEST_CASE("compress_with_skills prefers the longest match") {
    auto spec = shop(0);
    auto lib = shop_skills(*spec);
    auto w = find_witness(spec, capability_task(*spec, "add_to_cart", {"lamp"}));
    REQUIRE(w);
    auto stmts = compress_with_skills(lib, spec->id, *w);
    REQUIRE(stmts.size() == 2);
    CHECK(print(stmts[0]) == "call search(\"lamp\")");
    CHECK(print(stmts[1]) == "call add_to_cart()");
}

TEST_CASE("library digest tracks content") {
    auto spec = shop(0);
    auto lib = shop_skills(*spec);
    CHECK(library_digest(lib) == library_digest(shop_skills(*spec)));
    CHECK(library_digest(lib) != library_digest(SkillLibrary{}));
}
