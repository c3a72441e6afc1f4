#include "doctest.h"
#include "sites.hpp"
#include "toy_library.hpp"

#include "webskill/metrics.hpp"

using namespace webskill;
using namespace webskill::testing;

namespace {

// Trajectory of `n` statements, the first `calls` of which call `skill`.
Trajectory traj(std::string task, bool success, int n, int calls = 0, std::string skill = "AbstractShopping.search@amazon") {
    Trajectory t;
    t.id = task + "-" + std::to_string(n) + (success ? "s" : "f");
    t.task_id = std::move(task);
    t.success = success;
    for (int i = 0; i < n; ++i) {
        StepRecord r;
        r.index = i;
        if (i < calls) {
            auto dot = skill.find('.');
            auto at = skill.find('@');
            auto name = skill.substr(dot + 1, at == std::string::npos ? std::string::npos : at - dot - 1);
            r.stmt = Statement::call(name);
            r.skill_id = skill;
        } else {
            r.stmt = Statement::prim(PrimitiveAction::noop());
        }
        t.steps.push_back(r);
    }
    return t;
}

std::vector<Task> tasks(int n) {
    std::vector<Task> out;
    for (int i = 0; i < n; ++i) out.push_back(Task{"t" + std::to_string(i), "amazon", "", "results_for", {"x"}, 20, ""});
    return out;
}

SkillLibrary chain_library() {
    // k1 primitive, k2 calls k1, k3 calls k1 and k2 (k2 twice).
    auto iface = parse_skill_file(R"(interface I category c {
  abstract k1()
  abstract k2()
  abstract k3()
})");
    auto impl = parse_skill_file(R"(implementation S implements I site s at 1 {
  skill k1() at 1 { click(#a); click(#b) }
  skill k2() at 2 { call k1(); click(#c) }
  skill k3() at 3 { call k1(); call k2(); call k2() }
})");
    auto lib = register_interface(SkillLibrary{}, std::get<CategoryInterface>(iface));
    return register_implementation(lib, std::get<SiteImplementation>(impl));
}

} // namespace

TEST_CASE("success rate") {
    EvaluationBatch b;
    b.tasks = tasks(4);
    b.trajectories = {traj("t0", true, 3), traj("t1", true, 3), traj("t2", true, 3), traj("t3", false, 3)};
    CHECK(success_rate(b) == doctest::Approx(0.75));
    for (auto& t : b.trajectories) t.success = false;
    CHECK(success_rate(b) == 0.0);
    for (auto& t : b.trajectories) t.success = true;
    CHECK(success_rate(b) == 1.0);
    b.tasks.clear();
    try {
        success_rate(b);
        FAIL("expected EmptyTaskSet");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTaskSet);
    }
}

TEST_CASE("mean steps counts a call as one step") {
    EvaluationBatch b;
    b.tasks = tasks(3);
    b.trajectories = {traj("t0", true, 3), traj("t1", true, 5), traj("t2", false, 9)};
    REQUIRE(mean_steps(b));
    CHECK(*mean_steps(b) == 4.0);
    b.trajectories = {traj("t0", true, 2, 2)};
    CHECK(*mean_steps(b) == 2.0);
    b.trajectories = {traj("t0", false, 2)};
    CHECK_FALSE(mean_steps(b));
}

TEST_CASE("skill reusability") {
    EvaluationBatch b;
    b.library = toy_library();  // 1 default + 3 amazon + 2 walmart
    b.tasks = tasks(2);
    b.trajectories = {traj("t0", true, 3), traj("t1", true, 3)};
    CHECK(skill_reusability(b) == 0.0);
    b.trajectories[0] = traj("t0", true, 3, 1);
    CHECK(skill_reusability(b) == doctest::Approx(1.0 / 6.0));
    b.library = SkillLibrary{};
    CHECK_THROWS_AS(skill_reusability(b), Error);
}

TEST_CASE("skill reusability with every skill used") {
    EvaluationBatch b;
    b.library = toy_library();
    b.tasks = tasks(1);
    for (const auto& id : b.library.creation_log()) b.trajectories.push_back(traj("t0", true, 1, 1, id));
    CHECK(skill_reusability(b) == 1.0);
}

TEST_CASE("adoption rate") {
    EvaluationBatch b;
    b.tasks = tasks(5);
    for (int i = 0; i < 5; ++i) b.trajectories.push_back(traj("t" + std::to_string(i), true, 3, i < 2 ? 1 : 0));
    CHECK(adoption_rate(b) == doctest::Approx(0.4));
    for (auto& t : b.trajectories) t = traj(t.task_id, true, 2, 1);
    CHECK(adoption_rate(b) == 1.0);
    b.trajectories.clear();
    try {
        adoption_rate(b);
        FAIL("expected EmptySet");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySet);
    }
}

TEST_CASE("compositionality") {
    CHECK(compositionality(chain_library()) == doctest::Approx(1.0));
    auto lib = chain_library();
    CHECK(prior_references(lib, "I.k3@s").size() == 2);
    CHECK(compositionality(toy_library()) == 0.0);  // the default calls abstract signatures only
    CHECK_THROWS_AS(compositionality(SkillLibrary{}), Error);
}

TEST_CASE("mean objective") {
    EvaluationBatch b;
    b.tasks = tasks(2);
    b.gamma = 0;
    b.trajectories = {traj("t0", true, 4), traj("t1", false, 4)};
    CHECK(mean_objective(b) == doctest::Approx(0.5));
    b.gamma = 0.01;
    b.trajectories = {traj("t0", true, 4)};
    CHECK(mean_objective(b) == doctest::Approx(0.96));
    b.trajectories = {traj("t0", false, 4)};
    CHECK(mean_objective(b) == doctest::Approx(-0.04));
    b.gamma = -1;
    try {
        mean_objective(b);
        FAIL("expected NegativeGamma");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NegativeGamma);
    }
}

TEST_CASE("duplicating trajectories leaves ratios unchanged") {
    EvaluationBatch b;
    b.library = toy_library();
    b.tasks = tasks(3);
    b.trajectories = {traj("t0", true, 3, 1), traj("t1", false, 5), traj("t2", true, 2)};
    auto r1 = evaluate(b);
    auto doubled = b.trajectories;
    doubled.insert(doubled.end(), b.trajectories.begin(), b.trajectories.end());
    b.trajectories = doubled;
    auto r2 = evaluate(b);
    CHECK(r1.success_rate == r2.success_rate);
    CHECK(*r1.mean_steps == *r2.mean_steps);
    CHECK(r1.skill_reusability == r2.skill_reusability);
    CHECK(r1.adoption_rate == r2.adoption_rate);
    CHECK(r1.mean_objective == doctest::Approx(r2.mean_objective));
}

TEST_CASE("evaluate rejects trajectories from outside the task set") {
    EvaluationBatch b;
    b.tasks = tasks(1);
    b.trajectories = {traj("elsewhere", true, 1)};
    CHECK_THROWS_AS(evaluate(b), Error);
}

TEST_CASE("snapshot series spacing") {
    auto spec = shop(0);
    SiteMap sites{{spec->id, spec}};
    std::vector<Task> suite{cap_task(*spec, "search")};
    std::vector<SkillLibrary> snaps(100);
    PolicyFactory oracle = [] { return std::make_unique<OraclePolicy>(); };
    auto series = snapshot_series(snaps, suite, sites, oracle, 5);
    REQUIRE(series.size() == 20);
    CHECK(series.front().step == 5);
    CHECK(series.back().step == 100);
    for (const auto& p : series) CHECK(p.report == series[0].report);

    std::vector<SkillLibrary> few(3);
    CHECK(snapshot_series(few, suite, sites, oracle, 10).size() == 1);
}

TEST_CASE("worker count does not change results") {
    auto fam = family("shopping");
    SiteMap sites;
    std::vector<Task> suite;
    for (const auto& s : fam) {
        sites[s->id] = s;
        for (auto cap : {"search", "add_to_cart", "checkout"}) suite.push_back(cap_task(*s, cap));
    }
    PolicyFactory oracle = [] { return std::make_unique<OraclePolicy>(); };
    EvalOptions one, four;
    four.workers = 4;
    auto a = evaluate_suite(SkillLibrary{}, suite, sites, oracle, one);
    auto b = evaluate_suite(SkillLibrary{}, suite, sites, oracle, four);
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t i = 0; i < a.trajectories.size(); ++i)
        CHECK(trajectory_to_jsonl(a.trajectories[i]) == trajectory_to_jsonl(b.trajectories[i]));
    CHECK(evaluate(a).success_rate == 1.0);
}

TEST_CASE("CSV rendering") {
    MetricsReport r;
    r.success_rate = 0.5;
    CHECK(metrics_csv_row(3, r).rfind("3,0.500000,,0.000000", 0) == 0);
    CHECK(metrics_csv_header().rfind("step,success_rate,mean_steps,", 0) == 0);
}
