#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "esprit/tasks.hpp"

using namespace esprit;

namespace {

Rollout synthetic_rollout(const std::vector<std::pair<int, int>>& begin_end_runs,
                          int steps) {
    // runs of touching for pair (5, 7)
    Rollout r;
    r.steps_run = steps;
    for (const auto& [b, e] : begin_end_runs) {
        ContactEvent ev;
        ev.timestep = b;
        ev.kind = ContactKind::Begin;
        ev.a.id = 5;
        ev.b.id = 7;
        r.contacts.push_back(ev);
        if (e < steps) {
            ev.timestep = e;
            ev.kind = ContactKind::End;
            r.contacts.push_back(ev);
        }
    }
    return r;
}

GoalSpec pair57_goal() {
    GoalSpec g;
    g.hold_frames = 180;
    return g;
}

}  // namespace

TEST_CASE("instantiate is deterministic and injective over index") {
    const auto& tmpl = builtin_templates()[0];
    Task a = instantiate(tmpl, 3, 42);
    Task b = instantiate(tmpl, 3, 42);
    CHECK(to_json(a).dump() == to_json(b).dump());

    std::set<std::string> serialized;
    for (int i = 0; i < 100; ++i)
        serialized.insert(to_json(instantiate(tmpl, i, 42).initial_scene).dump());
    CHECK(serialized.size() == 100);
}

TEST_CASE("instantiated tasks share the template goal and omit the red ball") {
    for (const auto& tmpl : builtin_templates()) {
        for (int i = 0; i < 5; ++i) {
            Task t = instantiate(tmpl, i, 9);
            CHECK(to_json(t.goal).dump() == to_json(tmpl.goal).dump());
            for (const auto& b : t.initial_scene.bodies)
                CHECK(b.color != Color::Red);
        }
    }
}

TEST_CASE("all templates yield valid non-overlapping scenes (overlap oracle)") {
    for (const auto& tmpl : builtin_templates()) {
        for (int i = 0; i < 10; ++i) {
            Task t = instantiate(tmpl, i, 1234);
            const auto& bodies = t.initial_scene.bodies;
            for (size_t a = 0; a < bodies.size(); ++a)
                for (size_t b = a + 1; b < bodies.size(); ++b) {
                    if (bodies[a].is_boundary() && bodies[b].is_boundary()) continue;
                    CHECK_FALSE(bodies_overlap(bodies[a], bodies[b]));
                }
        }
    }
}

TEST_CASE("apply_action appends a red dynamic circle") {
    Task t = instantiate(builtin_templates()[0], 0, 7);
    const size_t n = t.initial_scene.bodies.size();
    Scene s = apply_action(t, {{128, 230}, 6});
    REQUIRE(s.bodies.size() == n + 1);
    const Body& red = s.bodies.back();
    CHECK(red.color == Color::Red);
    CHECK(red.dynamic);
    CHECK(shape_class(red.shape) == ShapeClass::Circle);
}

TEST_CASE("apply_action rejects a placement centered on an existing ball") {
    Task t = instantiate(builtin_templates()[0], 0, 7);
    const Body* green = nullptr;
    for (const auto& b : t.initial_scene.bodies)
        if (b.color == Color::Green) green = &b;
    REQUIRE(green != nullptr);
    CHECK_THROWS_AS(apply_action(t, {green->position, 6.0}), OverlapError);
}

TEST_CASE("boundary-tangent placement is accepted") {
    Task t = instantiate(builtin_templates()[2], 1, 7);
    // tangent to the ceiling: center exactly one radius below the top
    const double r = 5.0;
    Scene s = apply_action(t, {{20, kWorldSize - r}, r});
    CHECK(s.bodies.back().position.y == kWorldSize - r);
}

TEST_CASE("check_goal: run-length semantics") {
    const GoalSpec g = pair57_goal();
    // touching frames 100..400
    CHECK(check_goal(synthetic_rollout({{100, 400}}, 1000), g, 5, 7) == 100);
    // 151 frames only
    CHECK_FALSE(check_goal(synthetic_rollout({{100, 251}}, 1000), g, 5, 7));
    // longest run exactly 179 vs exactly 180
    CHECK_FALSE(check_goal(synthetic_rollout({{10, 50}, {60, 239}}, 1000), g, 5, 7));
    CHECK(check_goal(synthetic_rollout({{10, 50}, {60, 240}}, 1000), g, 5, 7) == 60);
    // run that lasts to the end of the rollout
    CHECK(check_goal(synthetic_rollout({{800, 1000}}, 1000), g, 5, 7) == 800);
    CHECK_FALSE(check_goal(synthetic_rollout({{900, 1000}}, 1000), g, 5, 7));
}

TEST_CASE("solve finds a solution quickly on an easy task and is deterministic") {
    Task t = instantiate(builtin_templates()[0], 2, 77);
    auto sol = solve(t, 200, 5);
    REQUIRE(sol.has_value());
    auto sol2 = solve(t, 200, 5);
    REQUIRE(sol2.has_value());
    CHECK(sol->first.center.x == sol2->first.center.x);
    CHECK(sol->first.radius == sol2->first.radius);

    // re-simulated from scratch, the returned action still satisfies the goal
    Scene s = apply_action(t, sol->first);
    Rollout fresh = simulate(s, kMaxSteps);
    CHECK(check_goal(fresh, t.goal, s).has_value());
    CHECK(to_json(fresh).dump() == to_json(sol->second).dump());
}

TEST_CASE("solve returns none when the goal bodies are walled apart") {
    // green sealed inside a box of black bars, purple strip outside
    Task t;
    t.template_id = 0;
    t.goal = GoalSpec{};
    Scene s = make_bounded_scene();
    auto add_bar = [&](Vec2 pos, double len, double w, double ang) {
        Body b;
        b.id = s.next_id();
        b.shape = BarShape{len, w, ang};
        b.color = Color::Black;
        b.position = pos;
        assign_mass(b);
        s.bodies.push_back(b);
    };
    add_bar({60, 44}, 60, 8, 0);             // lid
    add_bar({34, 22}, 40, 8, M_PI / 2);      // left wall
    add_bar({86, 22}, 40, 8, M_PI / 2);      // right wall
    Body green;
    green.id = s.next_id();
    green.shape = CircleShape{8};
    green.color = Color::Green;
    green.dynamic = true;
    green.position = {60, 8.2};
    assign_mass(green);
    s.bodies.push_back(green);
    Body purple;
    purple.id = s.next_id();
    purple.shape = BarShape{60, 8, 0};
    purple.color = Color::Purple;
    purple.position = {200, 4.1};
    assign_mass(purple);
    s.bodies.push_back(purple);
    t.initial_scene = s;
    CHECK_FALSE(solve(t, 10000, 3).has_value());
}

TEST_CASE("250 instantiated tasks are all valid") {
    int count = 0;
    for (const auto& tmpl : builtin_templates())
        for (int i = 0; i < 50; ++i) {
            Task t = instantiate(tmpl, i, 2024);
            CHECK(t.initial_scene.bodies.size() >= 6);
            ++count;
        }
    CHECK(count == 250);
}
