#include "esprit/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace esprit {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b ^ 0xabcdef12345ULL));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

Body circle_body(Scene& s, Color color, Vec2 pos, double radius) {
    Body b;
    b.id = s.next_id();
    b.shape = CircleShape{radius};
    b.color = color;
    b.dynamic = color_is_dynamic(color);
    b.position = pos;
    assign_mass(b);
    return b;
}

Body bar_body(Scene& s, Color color, Vec2 pos, double length, double width,
              double angle) {
    Body b;
    b.id = s.next_id();
    b.shape = BarShape{length, width, angle};
    b.color = color;
    b.dynamic = color_is_dynamic(color);
    b.position = pos;
    assign_mass(b);
    return b;
}

Body jar_body(Scene& s, Color color, Vec2 pos, double base, double side,
              double width, double angle) {
    Body b;
    b.id = s.next_id();
    b.shape = JarShape{base, side, width, angle};
    b.color = color;
    b.dynamic = color_is_dynamic(color);
    b.position = pos;
    assign_mass(b);
    return b;
}

constexpr double kRest = 0.1;  // settling gap above supports

// (1) green ball on an elevated platform; knock it down onto the purple floor bar
Scene build_knock_off_platform(std::mt19937_64& rng) {
    Scene s = make_bounded_scene();
    s.bodies.push_back(bar_body(s, Color::Purple, {128, 4.1}, 254, 8, 0));
    const double plat_len = uniform(rng, 60, 90);
    const double px = uniform(rng, 70, 186);
    const double py = uniform(rng, 60, 95);
    s.bodies.push_back(bar_body(s, Color::Black, {px, py}, plat_len, 8, 0));
    const double rg = uniform(rng, 6, 10);
    const double gx = px + uniform(rng, -plat_len / 4, plat_len / 4);
    s.bodies.push_back(circle_body(s, Color::Green, {gx, py + 4 + rg + kRest}, rg));
    return s;
}

// (2) green ball on a short high platform directly above a purple jar
Scene build_jar_catch(std::mt19937_64& rng) {
    Scene s = make_bounded_scene();
    const double base = uniform(rng, 70, 90);
    const double side = uniform(rng, 34, 44);
    const double jx = uniform(rng, 70, 186);
    s.bodies.push_back(jar_body(s, Color::Purple, {jx, 4.1}, base, side, 8, 0));
    // short platform hovering just above the jar mouth so a nudged ball drops
    // in with little sideways drift
    const double plat_len = uniform(rng, 20, 28);
    const double px = jx + uniform(rng, -6, 6);
    const double py = 8.1 + side + uniform(rng, 10, 18);
    s.bodies.push_back(bar_body(s, Color::Black, {px, py}, plat_len, 8, 0));
    const double rg = uniform(rng, 5, 8);
    const double gx = px + uniform(rng, -5, 5);
    s.bodies.push_back(circle_body(s, Color::Green, {gx, py + 4 + rg + kRest}, rg));
    return s;
}

// (3) red rolls down a ramp, shoves the green ball across the floor onto a
// low purple strip
Scene build_ramp_roll(std::mt19937_64& rng) {
    Scene s = make_bounded_scene();
    const double len = uniform(rng, 120, 160);
    const double angle = uniform(rng, -0.32, -0.18);
    const double rx = uniform(rng, 60, 100);
    const double end_h = uniform(rng, 25, 55);
    const double ry = end_h - std::sin(angle) * len / 2;
    s.bodies.push_back(bar_body(s, Color::Black, {rx, ry}, len, 8, angle));
    const double end_x = rx + std::cos(angle) * len / 2;
    // purple strip anchored against the right wall so the ball cannot get past it
    const double strip_len = uniform(rng, 60, 85);
    s.bodies.push_back(
        bar_body(s, Color::Purple, {255.0 - strip_len / 2, 2.1}, strip_len, 4, 0));
    const double rg = uniform(rng, 8, 10);
    const double strip_left = 255.0 - strip_len;
    const double gx = std::min(end_x + uniform(rng, 25, 45), strip_left - rg - 6);
    s.bodies.push_back(circle_body(s, Color::Green, {gx, rg + kRest}, rg));
    return s;
}

// (4) green ball balanced on a tall thin column; a gray bystander rests below
Scene build_column_topple(std::mt19937_64& rng) {
    Scene s = make_bounded_scene();
    s.bodies.push_back(bar_body(s, Color::Purple, {128, 4.1}, 254, 8, 0));
    const double col_len = uniform(rng, 60, 100);
    const double cx = uniform(rng, 70, 186);
    const double col_base = 8.1 + 0.2;  // stands on the purple floor bar
    s.bodies.push_back(
        bar_body(s, Color::Black, {cx, col_base + col_len / 2}, col_len, 10, M_PI / 2));
    const double rg = uniform(rng, 6, 9);
    s.bodies.push_back(
        circle_body(s, Color::Green, {cx, col_base + col_len + rg + kRest}, rg));
    const double rd = uniform(rng, 5, 8);
    const double dx = uniform(rng, 30, 226);
    s.bodies.push_back(circle_body(s, Color::Gray, {dx, 8.1 + rd + kRest}, rd));
    return s;
}

// (5) green ball on a low platform; a gray ball rests on the floor beneath the
// landing zone and has to be shoved aside or absorbed on the way down
Scene build_gray_blocker(std::mt19937_64& rng) {
    Scene s = make_bounded_scene();
    s.bodies.push_back(bar_body(s, Color::Purple, {128, 4.1}, 254, 8, 0));
    const double plat_len = uniform(rng, 50, 70);
    const double px = uniform(rng, 80, 176);
    const double py = uniform(rng, 55, 85);
    s.bodies.push_back(bar_body(s, Color::Black, {px, py}, plat_len, 8, 0));
    const double rg = uniform(rng, 6, 9);
    s.bodies.push_back(
        circle_body(s, Color::Green, {px, py + 4 + rg + kRest}, rg));
    const double rb = uniform(rng, 6, 9);
    const double bx = px + (rng() % 2 ? 1 : -1) * (plat_len / 2 + uniform(rng, 2, 10));
    s.bodies.push_back(circle_body(s, Color::Gray, {bx, 8.1 + rb + kRest}, rb));
    return s;
}

bool scene_valid(const Scene& s) {
    for (size_t i = 0; i < s.bodies.size(); ++i) {
        const Body& a = s.bodies[i];
        if (!a.is_boundary()) {
            const double br = bounding_radius(a);
            if (a.position.x < -1 || a.position.x > kWorldSize + 1 ||
                a.position.y < -1 || a.position.y + br > kWorldSize)
                return false;
        }
        for (size_t j = i + 1; j < s.bodies.size(); ++j) {
            const Body& b = s.bodies[j];
            if (a.is_boundary() && b.is_boundary()) continue;
            if (bodies_overlap(a, b)) return false;
        }
    }
    return true;
}

}  // namespace

const std::vector<TaskTemplate>& builtin_templates() {
    static const std::vector<TaskTemplate> templates = [] {
        std::vector<TaskTemplate> v;
        GoalSpec green_on_purple_bar{Color::Green, ShapeClass::Circle,
                                     Color::Purple, ShapeClass::Bar,
                                     kGoalHoldFrames};
        GoalSpec green_on_purple_jar{Color::Green, ShapeClass::Circle,
                                     Color::Purple, ShapeClass::Jar,
                                     kGoalHoldFrames};
        v.push_back({0, "knock_off_platform", green_on_purple_bar, 4, 16,
                     build_knock_off_platform});
        v.push_back({1, "jar_catch", green_on_purple_jar, 4, 16, build_jar_catch});
        v.push_back({2, "ramp_roll", green_on_purple_bar, 4, 16, build_ramp_roll});
        v.push_back({3, "column_topple", green_on_purple_bar, 4, 16,
                     build_column_topple});
        v.push_back({4, "gray_blocker", green_on_purple_bar, 4, 16,
                     build_gray_blocker});
        return v;
    }();
    return templates;
}

Task instantiate(const TaskTemplate& tmpl, int index, uint64_t seed) {
    if (index < 0 || index >= 100)
        throw std::invalid_argument("task index out of range");
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(tmpl.template_id),
                                 static_cast<uint64_t>(index)));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Scene s = tmpl.layout_builder(rng);
        if (scene_valid(s)) {
            Task t;
            t.template_id = tmpl.template_id;
            t.task_index = index;
            t.initial_scene = std::move(s);
            t.goal = tmpl.goal;
            return t;
        }
    }
    throw TemplateError("template " + tmpl.name +
                        ": 1000 consecutive overlapping draws");
}

Scene apply_action(const Task& task, const Action& action) {
    Body red;
    red.id = 1000;  // user-added body gets a reserved id above scene bodies
    red.shape = CircleShape{action.radius};
    red.color = Color::Red;
    red.dynamic = true;
    red.position = action.center;
    assign_mass(red);
    if (action.center.x < action.radius ||
        action.center.x > kWorldSize - action.radius ||
        action.center.y < action.radius ||
        action.center.y > kWorldSize - action.radius)
        throw OverlapError("red ball outside world bounds");
    for (const auto& b : task.initial_scene.bodies)
        if (!b.is_boundary() && bodies_overlap(red, b))
            throw OverlapError("red ball intersects body " + std::to_string(b.id));
    Scene s = task.initial_scene;
    s.bodies.push_back(red);
    return s;
}

std::pair<int, int> resolve_goal_bodies(const Scene& scene, const GoalSpec& goal) {
    auto resolve = [&](Color c, ShapeClass sc) {
        int found = -1;
        for (const auto& b : scene.bodies) {
            if (b.color == c && shape_class(b.shape) == sc) {
                if (found >= 0)
                    throw std::runtime_error("goal selector matches several bodies");
                found = b.id;
            }
        }
        if (found < 0) throw std::runtime_error("goal selector matches no body");
        return found;
    };
    return {resolve(goal.subject_color, goal.subject_class),
            resolve(goal.object_color, goal.object_class)};
}

std::optional<int> check_goal(const Rollout& rollout, const GoalSpec& goal,
                              int subject_id, int object_id) {
    std::pair<int, int> pr{subject_id, object_id};
    if (pr.first > pr.second) std::swap(pr.first, pr.second);
    int run_start = -1;
    std::optional<int> best;
    for (const auto& e : rollout.contacts) {
        if (e.a.id != pr.first || e.b.id != pr.second) continue;
        if (e.kind == ContactKind::Begin) {
            if (run_start < 0) run_start = e.timestep;
        } else if (run_start >= 0) {
            if (e.timestep - run_start >= goal.hold_frames) return run_start;
            run_start = -1;
        }
    }
    if (run_start >= 0 && rollout.steps_run - run_start >= goal.hold_frames)
        return run_start;
    return best;
}

std::optional<int> check_goal(const Rollout& rollout, const GoalSpec& goal,
                              const Scene& scene_with_action) {
    const auto [subj, obj] = resolve_goal_bodies(scene_with_action, goal);
    return check_goal(rollout, goal, subj, obj);
}

std::optional<std::pair<Action, Rollout>> solve(const Task& task, int budget,
                                                uint64_t seed) {
    const auto& tmpl = builtin_templates().at(static_cast<size_t>(task.template_id));
    const auto [subj_id, obj_id] =
        resolve_goal_bodies(task.initial_scene, task.goal);
    std::pair<int, int> goal_pair{subj_id, obj_id};
    if (goal_pair.first > goal_pair.second)
        std::swap(goal_pair.first, goal_pair.second);

    for (int trial = 0; trial < budget; ++trial) {
        std::mt19937_64 rng(mix_seed(seed, 0x501eED, static_cast<uint64_t>(trial)));
        Action action;
        Scene start;
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            action.radius = uniform(rng, tmpl.min_action_radius,
                                    tmpl.max_action_radius);
            action.center = {uniform(rng, action.radius, kWorldSize - action.radius),
                             uniform(rng, action.radius, kWorldSize - action.radius)};
            try {
                start = apply_action(task, action);
                placed = true;
            } catch (const OverlapError&) {
                // resample without consuming budget
            }
        }
        if (!placed) continue;

        // incremental rollout with quiescence bail-out; a hit is re-verified
        // against the full, from-scratch simulation before being returned
        Scene cur = start;
        int touch_run = 0;
        int quiet_frames = 0;
        bool success = false;
        for (int t = 0; t < kMaxSteps; ++t) {
            cur = step(cur, kDt, t).first;
            const bool touching = std::binary_search(cur.active_contacts.begin(),
                                                     cur.active_contacts.end(),
                                                     goal_pair);
            touch_run = touching ? touch_run + 1 : 0;
            if (touch_run >= task.goal.hold_frames) {
                success = true;
                break;
            }
            bool quiet = true;
            for (const auto& b : cur.bodies)
                if (b.dynamic && (b.velocity.length2() > 0.0025 ||
                                  std::abs(b.angular_velocity) > 0.02))
                    quiet = false;
            quiet_frames = quiet ? quiet_frames + 1 : 0;
            if (quiet_frames >= 90 && !touching) break;
        }
        if (!success) continue;

        Rollout full = simulate(start, kMaxSteps);
        if (check_goal(full, task.goal, subj_id, obj_id))
            return std::make_pair(action, std::move(full));
    }
    return std::nullopt;
}

json to_json(const GoalSpec& g) {
    return json{{"relation", "touching"},
                {"subject_color", color_name(g.subject_color)},
                {"subject_class", shape_class_name(g.subject_class)},
                {"object_color", color_name(g.object_color)},
                {"object_class", shape_class_name(g.object_class)},
                {"hold_frames", g.hold_frames}};
}

static ShapeClass shape_class_from_name(const std::string& s) {
    if (s == "boundary") return ShapeClass::Boundary;
    if (s == "bar") return ShapeClass::Bar;
    if (s == "jar") return ShapeClass::Jar;
    if (s == "circle") return ShapeClass::Circle;
    throw std::invalid_argument("unknown shape class: " + s);
}

GoalSpec goal_from_json(const json& j) {
    GoalSpec g;
    g.subject_color = color_from_name(j.at("subject_color").get<std::string>());
    g.subject_class = shape_class_from_name(j.at("subject_class").get<std::string>());
    g.object_color = color_from_name(j.at("object_color").get<std::string>());
    g.object_class = shape_class_from_name(j.at("object_class").get<std::string>());
    g.hold_frames = j.at("hold_frames").get<int>();
    return g;
}

json to_json(const Task& t) {
    return json{{"template_id", t.template_id},
                {"task_index", t.task_index},
                {"goal", to_json(t.goal)},
                {"scene", to_json(t.initial_scene)}};
}

Task task_from_json(const json& j) {
    Task t;
    t.template_id = j.at("template_id").get<int>();
    t.task_index = j.at("task_index").get<int>();
    t.goal = goal_from_json(j.at("goal"));
    t.initial_scene = scene_from_json(j.at("scene"));
    return t;
}

json to_json(const Action& a) {
    return json{{"center", to_json(a.center)}, {"radius", a.radius}};
}

Action action_from_json(const json& j) {
    return {vec2_from_json(j.at("center")), j.at("radius").get<double>()};
}

}  // namespace esprit
