#pragma once

#include <vector>

#include "esprit/scene.hpp"

namespace esprit {

// One fixed 1/60 s step of semi-implicit Euler with impulse contacts.
// Returns the advanced scene and the Begin/End contact transitions of this
// frame (stamped with `timestep`). Bit-deterministic for identical inputs.
std::pair<Scene, std::vector<ContactEvent>> step(const Scene& scene, double dt,
                                                 int timestep = 0);

// Runs `step` up to max_steps times (capped at kMaxSteps), recording per-frame
// snapshots of dynamic bodies and every contact event.
Rollout simulate(const Scene& scene, int max_steps);

// Pairs of body ids in active contact at the given frame, reconstructed from
// the rollout's Begin/End stream.
std::vector<std::pair<int, int>> touching_at(const Rollout& rollout, int frame);

// Convex fixture in world space; circles have hx = radius and no vertices.
struct WorldFixture {
    bool is_circle = false;
    Vec2 center;
    double radius = 0.0;
    // oriented box: half extents + rotation
    double hx = 0.0, hy = 0.0;
    double angle = 0.0;
};

// Decompose a body into world-space fixtures (jar -> 3 boxes, boundary -> one
// large box outside the world rectangle).
std::vector<WorldFixture> world_fixtures(const Body& b);

// Geometric overlap test, used by placement validation and test oracles.
bool bodies_overlap(const Body& a, const Body& b, double margin = 0.0);

// Radius of a circle that encloses the body around its position.
double bounding_radius(const Body& b);

}  // namespace esprit
