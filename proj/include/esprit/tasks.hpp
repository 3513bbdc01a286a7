#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "esprit/physics.hpp"
#include "esprit/serialize.hpp"

namespace esprit {

struct OverlapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TemplateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GoalSpec {
    Color subject_color = Color::Green;
    ShapeClass subject_class = ShapeClass::Circle;
    Color object_color = Color::Purple;
    ShapeClass object_class = ShapeClass::Bar;
    int hold_frames = kGoalHoldFrames;
};

struct TaskTemplate {
    int template_id = 0;
    std::string name;
    GoalSpec goal;
    double min_action_radius = 4.0;
    double max_action_radius = 16.0;
    // draws layout parameters and returns the scene without the red ball
    std::function<Scene(std::mt19937_64&)> layout_builder;
};

struct Task {
    int template_id = 0;
    int task_index = 0;
    Scene initial_scene;
    GoalSpec goal;

    std::string task_id() const {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%05d:%03d", template_id, task_index);
        return buf;
    }
};

struct Action {
    Vec2 center;
    double radius = 4.0;
};

// The five shipped puzzle templates.
const std::vector<TaskTemplate>& builtin_templates();

// Deterministic task for (template, index, seed); throws TemplateError if
// 1000 consecutive layout draws produce overlapping bodies.
Task instantiate(const TaskTemplate& tmpl, int index, uint64_t seed);

// Initial scene plus the red ball; throws OverlapError on intersection.
Scene apply_action(const Task& task, const Action& action);

// Resolves the goal selectors to body ids (subject, object); throws if a
// selector does not match exactly one body.
std::pair<int, int> resolve_goal_bodies(const Scene& scene, const GoalSpec& goal);

// First frame t such that the pair touches for hold_frames consecutive frames.
std::optional<int> check_goal(const Rollout& rollout, const GoalSpec& goal,
                              int subject_id, int object_id);
std::optional<int> check_goal(const Rollout& rollout, const GoalSpec& goal,
                              const Scene& scene_with_action);

// Seeded uniform random search over legal actions.
std::optional<std::pair<Action, Rollout>> solve(const Task& task, int budget,
                                                uint64_t seed);

json to_json(const GoalSpec& g);
GoalSpec goal_from_json(const json& j);
json to_json(const Task& t);
Task task_from_json(const json& j);
json to_json(const Action& a);
Action action_from_json(const json& j);

}  // namespace esprit
