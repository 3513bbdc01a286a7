#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "esprit/geom.hpp"

namespace esprit {

constexpr double kWorldSize = 256.0;
constexpr double kGravity = 200.0;   // units/s^2, downward
constexpr double kRestitution = 0.2;
constexpr double kFriction = 0.5;
constexpr double kDt = 1.0 / 60.0;
constexpr int kMaxSteps = 1000;
constexpr int kGoalHoldFrames = 180;

struct Body {
    int id = 0;
    ShapeSpec shape;
    Color color = Color::Black;
    bool dynamic = false;
    Vec2 position;
    Vec2 velocity;
    double angle = 0.0;            // accumulated rotation, not wrapped
    double angular_velocity = 0.0;
    double inverse_mass = 0.0;
    double inverse_inertia = 0.0;

    bool is_boundary() const {
        return std::holds_alternative<BoundaryShape>(shape);
    }
};

// Mass from uniform density 1 (mass = area); static bodies get zero inverses.
void assign_mass(Body& b);

struct Scene {
    std::vector<Body> bodies;
    // pairs currently in contact, canonically ordered and sorted; carried
    // across steps so Begin/End transitions can be emitted
    std::vector<std::pair<int, int>> active_contacts;

    const Body* find(int id) const {
        for (const auto& b : bodies)
            if (b.id == id) return &b;
        return nullptr;
    }
    Body* find(int id) {
        for (auto& b : bodies)
            if (b.id == id) return &b;
        return nullptr;
    }
    int next_id() const {
        int m = 0;
        for (const auto& b : bodies) m = std::max(m, b.id + 1);
        return m;
    }
};

// Scene with the four static black boundary bodies (floor, ceiling, walls).
Scene make_bounded_scene();

enum class ContactKind { Begin, End };

struct BodySnapshot {
    int id = 0;
    Vec2 position;
    Vec2 velocity;
    double angle = 0.0;
};

struct ContactEvent {
    int timestep = 0;
    ContactKind kind = ContactKind::Begin;
    BodySnapshot a;  // a.id < b.id
    BodySnapshot b;
};

struct FrameSnapshot {
    std::vector<BodySnapshot> dynamic_bodies;
};

struct Rollout {
    std::vector<FrameSnapshot> frames;
    std::vector<ContactEvent> contacts;
    int steps_run = 0;
};

}  // namespace esprit
