#include "esprit/physics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace esprit {

namespace {

constexpr double kBoundaryThickness = 64.0;
constexpr double kTouchSlop = 0.05;      // gap below which a pair counts as touching
constexpr double kTouchRelease = 0.5;    // looser gap before a touch is released
constexpr double kAngularDamping = 0.5;  // 1/s
constexpr double kPenetrationSlop = 0.05;
constexpr double kBaumgarte = 0.2;
constexpr double kRestitutionThreshold = 15.0;  // units/s; slower impacts do not rebound
constexpr int kSolverIterations = 8;

struct ContactPoint {
    Vec2 point;
    Vec2 normal;  // from A to B
    double penetration = 0.0;
    double target_vn = 0.0;     // restitution target, set before iterating
    double accum_n = 0.0;
    double accum_t = 0.0;
};

struct Contact {
    int ia = 0, ib = 0;  // indices into scene.bodies
    std::vector<ContactPoint> points;
};

std::array<Vec2, 4> box_vertices(const WorldFixture& f) {
    const Vec2 ex = rotate({f.hx, 0.0}, f.angle);
    const Vec2 ey = rotate({0.0, f.hy}, f.angle);
    return {f.center - ex - ey, f.center + ex - ey, f.center + ex + ey,
            f.center - ex + ey};
}

// circle B against circle A
bool collide_circle_circle(const WorldFixture& a, const WorldFixture& b,
                           ContactPoint& out) {
    const Vec2 d = b.center - a.center;
    const double dist2 = d.length2();
    const double rsum = a.radius + b.radius;
    const double reach = rsum + kTouchSlop;
    if (dist2 > reach * reach) return false;
    const double dist = std::sqrt(dist2);
    out.normal = dist > 1e-12 ? d * (1.0 / dist) : Vec2{0.0, 1.0};
    out.penetration = rsum - dist;
    out.point = a.center + out.normal * (a.radius - 0.5 * out.penetration);
    return true;
}

// circle b against box a; normal points from box to circle
bool collide_box_circle(const WorldFixture& a, const WorldFixture& b,
                        ContactPoint& out) {
    const Vec2 local = rotate(b.center - a.center, -a.angle);
    const Vec2 clamped{std::clamp(local.x, -a.hx, a.hx),
                       std::clamp(local.y, -a.hy, a.hy)};
    Vec2 n_local;
    double pen;
    if (clamped.x == local.x && clamped.y == local.y) {
        // center inside the box: push out along the shallowest axis
        const double dx = a.hx - std::abs(local.x);
        const double dy = a.hy - std::abs(local.y);
        if (dx < dy) {
            n_local = {local.x >= 0 ? 1.0 : -1.0, 0.0};
            pen = b.radius + dx;
        } else {
            n_local = {0.0, local.y >= 0 ? 1.0 : -1.0};
            pen = b.radius + dy;
        }
    } else {
        const Vec2 diff = local - clamped;
        const double dist = diff.length();
        pen = b.radius - dist;
        if (pen < -kTouchSlop) return false;
        n_local = dist > 1e-12 ? diff * (1.0 / dist) : Vec2{0.0, 1.0};
    }
    out.normal = rotate(n_local, a.angle);
    out.penetration = pen;
    out.point = b.center - out.normal * (b.radius - 0.5 * pen);
    return true;
}

struct ClipVertex {
    Vec2 v;
};

// Sutherland–Hodgman clip of a polygon against the half-plane n·x <= offset
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& n,
                                 double offset) {
    std::vector<Vec2> out;
    const size_t m = poly.size();
    for (size_t i = 0; i < m; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % m];
        const double dp = n.dot(p) - offset;
        const double dq = n.dot(q) - offset;
        if (dp <= 0) out.push_back(p);
        if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) {
            const double t = dp / (dp - dq);
            out.push_back(p + (q - p) * t);
        }
    }
    return out;
}

// SAT with reference-face clipping, up to two points; normal from a to b
bool collide_box_box(const WorldFixture& a, const WorldFixture& b,
                     std::vector<ContactPoint>& out) {
    const auto va = box_vertices(a);
    const auto vb = box_vertices(b);

    double best_overlap = 1e30;
    Vec2 best_axis;     // oriented from A towards B
    bool ref_is_a = true;

    const Vec2 ab = b.center - a.center;
    for (int owner = 0; owner < 2; ++owner) {
        const double ang = owner == 0 ? a.angle : b.angle;
        for (int k = 0; k < 2; ++k) {
            Vec2 axis = rotate(k == 0 ? Vec2{1, 0} : Vec2{0, 1}, ang);
            if (axis.dot(ab) < 0) axis = -axis;
            double min_a = 1e30, max_a = -1e30, min_b = 1e30, max_b = -1e30;
            for (const auto& p : va) {
                const double d = axis.dot(p);
                min_a = std::min(min_a, d);
                max_a = std::max(max_a, d);
            }
            for (const auto& p : vb) {
                const double d = axis.dot(p);
                min_b = std::min(min_b, d);
                max_b = std::max(max_b, d);
            }
            const double overlap = std::min(max_a, max_b) - std::max(min_a, min_b);
            if (overlap < -kTouchSlop) return false;  // separating axis
            if (overlap < best_overlap) {
                best_overlap = overlap;
                best_axis = axis;
                ref_is_a = owner == 0;
            }
        }
    }

    const auto& ref_verts = ref_is_a ? va : vb;
    const auto& inc_verts = ref_is_a ? vb : va;
    const Vec2 ref_n = ref_is_a ? best_axis : -best_axis;  // outward from ref box

    // reference face: edge whose outward normal best matches ref_n
    double best_dot = -1e30;
    int rf = 0;
    for (int i = 0; i < 4; ++i) {
        const Vec2 e = ref_verts[(i + 1) % 4] - ref_verts[i];
        const Vec2 fn = Vec2{e.y, -e.x};  // outward for the CCW vertex order
        const double d = fn.dot(ref_n) / std::max(1e-12, fn.length());
        if (d > best_dot) {
            best_dot = d;
            rf = i;
        }
    }
    const Vec2 r0 = ref_verts[rf];
    const Vec2 r1 = ref_verts[(rf + 1) % 4];
    Vec2 face_n{(r1 - r0).y, -(r1 - r0).x};
    face_n = face_n * (1.0 / std::max(1e-12, face_n.length()));
    const double face_off = face_n.dot(r0);
    const Vec2 tangent{-face_n.y, face_n.x};

    std::vector<Vec2> poly(inc_verts.begin(), inc_verts.end());
    const double t0 = std::min(tangent.dot(r0), tangent.dot(r1));
    const double t1 = std::max(tangent.dot(r0), tangent.dot(r1));
    poly = clip_halfplane(poly, -1.0 * tangent, -t0);
    if (poly.empty()) return false;
    poly = clip_halfplane(poly, tangent, t1);
    if (poly.empty()) return false;

    std::vector<ContactPoint> pts;
    for (const auto& p : poly) {
        const double sep = face_n.dot(p) - face_off;
        if (sep <= kTouchSlop) {
            ContactPoint cp;
            cp.point = p;
            cp.normal = ref_is_a ? face_n : -face_n;  // A -> B
            cp.penetration = -sep;
            pts.push_back(cp);
        }
    }
    if (pts.empty()) return false;
    if (pts.size() > 2) {
        std::sort(pts.begin(), pts.end(), [](const auto& l, const auto& r) {
            return l.penetration > r.penetration;
        });
        pts.resize(2);
    }
    out.insert(out.end(), pts.begin(), pts.end());
    return true;
}

void collide_fixtures(const WorldFixture& fa, const WorldFixture& fb,
                      std::vector<ContactPoint>& out) {
    if (fa.is_circle && fb.is_circle) {
        ContactPoint cp;
        if (collide_circle_circle(fa, fb, cp)) out.push_back(cp);
    } else if (!fa.is_circle && fb.is_circle) {
        ContactPoint cp;
        if (collide_box_circle(fa, fb, cp)) out.push_back(cp);
    } else if (fa.is_circle && !fb.is_circle) {
        ContactPoint cp;
        if (collide_box_circle(fb, fa, cp)) {
            cp.normal = -cp.normal;
            out.push_back(cp);
        }
    } else {
        collide_box_box(fa, fb, out);
    }
}

void apply_impulse(Body& a, Body& b, const Vec2& point, const Vec2& impulse) {
    const Vec2 ra = point - a.position;
    const Vec2 rb = point - b.position;
    a.velocity -= impulse * a.inverse_mass;
    a.angular_velocity -= a.inverse_inertia * ra.cross(impulse);
    b.velocity += impulse * b.inverse_mass;
    b.angular_velocity += b.inverse_inertia * rb.cross(impulse);
}

}  // namespace

std::vector<WorldFixture> world_fixtures(const Body& b) {
    std::vector<WorldFixture> fx;
    if (const auto* c = std::get_if<CircleShape>(&b.shape)) {
        fx.push_back({true, b.position, c->radius, 0, 0, 0});
    } else if (const auto* bar = std::get_if<BarShape>(&b.shape)) {
        WorldFixture f;
        f.center = b.position;
        f.hx = bar->length / 2;
        f.hy = bar->width / 2;
        f.angle = bar->angle_rad + b.angle;
        fx.push_back(f);
    } else if (const auto* jar = std::get_if<JarShape>(&b.shape)) {
        const double ang = jar->angle_rad + b.angle;
        const double w = jar->width;
        // base plus two sides, open side up at angle 0
        const Vec2 base_off{0, 0};
        const Vec2 side_l{-(jar->base_length - w) / 2, jar->side_length / 2};
        const Vec2 side_r{(jar->base_length - w) / 2, jar->side_length / 2};
        WorldFixture base;
        base.center = b.position + rotate(base_off, ang);
        base.hx = jar->base_length / 2;
        base.hy = w / 2;
        base.angle = ang;
        fx.push_back(base);
        for (const Vec2& off : {side_l, side_r}) {
            WorldFixture s;
            s.center = b.position + rotate(off, ang);
            s.hx = w / 2;
            s.hy = jar->side_length / 2;
            s.angle = ang;
            fx.push_back(s);
        }
    } else {
        // boundary: a large box just outside the world rectangle
        WorldFixture f;
        const double t = kBoundaryThickness;
        const double half = kWorldSize / 2;
        if (b.position.y < 0) {
            f.center = {half, -t};
            f.hx = kWorldSize * 4;
            f.hy = t;
        } else if (b.position.y > kWorldSize) {
            f.center = {half, kWorldSize + t};
            f.hx = kWorldSize * 4;
            f.hy = t;
        } else if (b.position.x < 0) {
            f.center = {-t, half};
            f.hx = t;
            f.hy = kWorldSize * 4;
        } else {
            f.center = {kWorldSize + t, half};
            f.hx = t;
            f.hy = kWorldSize * 4;
        }
        fx.push_back(f);
    }
    return fx;
}

double bounding_radius(const Body& b) {
    if (const auto* c = std::get_if<CircleShape>(&b.shape)) return c->radius;
    if (const auto* bar = std::get_if<BarShape>(&b.shape))
        return std::hypot(bar->length / 2, bar->width / 2);
    if (const auto* jar = std::get_if<JarShape>(&b.shape))
        return std::hypot(jar->base_length / 2, jar->side_length);
    return kWorldSize * 8;
}

bool bodies_overlap(const Body& a, const Body& b, double margin) {
    const auto fa = world_fixtures(a);
    const auto fb = world_fixtures(b);
    for (const auto& x : fa)
        for (const auto& y : fb) {
            std::vector<ContactPoint> pts;
            collide_fixtures(x, y, pts);
            for (const auto& p : pts)
                if (p.penetration > -margin + 1e-9) return true;
        }
    return false;
}

void assign_mass(Body& b) {
    if (!b.dynamic) {
        b.inverse_mass = 0.0;
        b.inverse_inertia = 0.0;
        b.velocity = {0, 0};
        b.angular_velocity = 0.0;
        return;
    }
    double mass = 0.0, inertia = 0.0;
    if (const auto* c = std::get_if<CircleShape>(&b.shape)) {
        mass = M_PI * c->radius * c->radius;
        inertia = 0.5 * mass * c->radius * c->radius;
    } else if (const auto* bar = std::get_if<BarShape>(&b.shape)) {
        mass = bar->length * bar->width;
        inertia = mass * (bar->length * bar->length + bar->width * bar->width) / 12.0;
    } else if (const auto* jar = std::get_if<JarShape>(&b.shape)) {
        // compound of three boxes, parallel-axis about the base center
        const double w = jar->width;
        const double mb = jar->base_length * w;
        const double ms = w * jar->side_length;
        const double ib = mb * (jar->base_length * jar->base_length + w * w) / 12.0;
        const double is0 = ms * (w * w + jar->side_length * jar->side_length) / 12.0;
        const Vec2 off{(jar->base_length - w) / 2, jar->side_length / 2};
        mass = mb + 2 * ms;
        inertia = ib + 2 * (is0 + ms * off.length2());
    } else {
        mass = 1.0;
        inertia = 1.0;
    }
    b.inverse_mass = 1.0 / mass;
    b.inverse_inertia = 1.0 / inertia;
}

Scene make_bounded_scene() {
    Scene s;
    const double t = kBoundaryThickness;
    const double half = kWorldSize / 2;
    const Vec2 centers[4] = {{half, -t},              // floor
                             {half, kWorldSize + t},  // ceiling
                             {-t, half},              // left wall
                             {kWorldSize + t, half}}; // right wall
    for (int i = 0; i < 4; ++i) {
        Body b;
        b.id = i;
        b.shape = BoundaryShape{};
        b.color = Color::Black;
        b.dynamic = false;
        b.position = centers[i];
        assign_mass(b);
        s.bodies.push_back(b);
    }
    return s;
}

std::pair<Scene, std::vector<ContactEvent>> step(const Scene& scene, double dt,
                                                 int timestep) {
    Scene next = scene;
    auto& bodies = next.bodies;

    // contact detection at the start-of-step configuration
    std::vector<Contact> contacts;
    for (size_t i = 0; i < bodies.size(); ++i) {
        for (size_t j = i + 1; j < bodies.size(); ++j) {
            Body& a = bodies[i];
            Body& b = bodies[j];
            if (!a.dynamic && !b.dynamic) continue;
            const double reach = bounding_radius(a) + bounding_radius(b) + 1.0;
            if (!a.is_boundary() && !b.is_boundary() &&
                (a.position - b.position).length2() > reach * reach)
                continue;
            Contact c;
            c.ia = static_cast<int>(i);
            c.ib = static_cast<int>(j);
            for (const auto& fa : world_fixtures(a))
                for (const auto& fb : world_fixtures(b))
                    collide_fixtures(fa, fb, c.points);
            if (!c.points.empty()) contacts.push_back(std::move(c));
        }
    }

    // gravity; spin decays slowly so rolling bodies come to rest instead of
    // traveling forever on the frictionless-rolling floor
    for (auto& b : bodies) {
        if (!b.dynamic) continue;
        b.velocity.y -= kGravity * dt;
        b.angular_velocity /= 1.0 + kAngularDamping * dt;
    }

    // restitution targets from pre-solve approach velocities
    for (auto& c : contacts) {
        Body& a = bodies[c.ia];
        Body& b = bodies[c.ib];
        for (auto& p : c.points) {
            const Vec2 ra = p.point - a.position;
            const Vec2 rb = p.point - b.position;
            const Vec2 vrel = b.velocity + cross(b.angular_velocity, rb) -
                              a.velocity - cross(a.angular_velocity, ra);
            const double vn = vrel.dot(p.normal);
            p.target_vn = vn < -kRestitutionThreshold ? -kRestitution * vn : 0.0;
        }
    }

    // sequential impulses
    for (int it = 0; it < kSolverIterations; ++it) {
        for (auto& c : contacts) {
            Body& a = bodies[c.ia];
            Body& b = bodies[c.ib];
            for (auto& p : c.points) {
                if (p.penetration < 0) continue;
                const Vec2 ra = p.point - a.position;
                const Vec2 rb = p.point - b.position;
                const Vec2 n = p.normal;
                Vec2 vrel = b.velocity + cross(b.angular_velocity, rb) -
                            a.velocity - cross(a.angular_velocity, ra);
                const double rna = ra.cross(n);
                const double rnb = rb.cross(n);
                const double kn = a.inverse_mass + b.inverse_mass +
                                  a.inverse_inertia * rna * rna +
                                  b.inverse_inertia * rnb * rnb;
                if (kn < 1e-12) continue;
                const double vn = vrel.dot(n);
                double jn = -(vn - p.target_vn) / kn;
                const double old_n = p.accum_n;
                p.accum_n = std::max(old_n + jn, 0.0);
                apply_impulse(a, b, p.point, n * (p.accum_n - old_n));

                // Coulomb friction on the tangent
                const Vec2 t{-n.y, n.x};
                vrel = b.velocity + cross(b.angular_velocity, rb) - a.velocity -
                       cross(a.angular_velocity, ra);
                const double rta = ra.cross(t);
                const double rtb = rb.cross(t);
                const double kt = a.inverse_mass + b.inverse_mass +
                                  a.inverse_inertia * rta * rta +
                                  b.inverse_inertia * rtb * rtb;
                if (kt < 1e-12) continue;
                const double jt = -vrel.dot(t) / kt;
                const double max_t = kFriction * p.accum_n;
                const double old_t = p.accum_t;
                p.accum_t = std::clamp(old_t + jt, -max_t, max_t);
                apply_impulse(a, b, p.point, t * (p.accum_t - old_t));
            }
        }
    }

    // integrate
    for (auto& b : bodies) {
        if (!b.dynamic) continue;
        b.position += b.velocity * dt;
        b.angle += b.angular_velocity * dt;
    }

    // positional correction (projection, no velocity change)
    for (const auto& c : contacts) {
        Body& a = bodies[c.ia];
        Body& b = bodies[c.ib];
        for (const auto& p : c.points) {
            const double depth = p.penetration - kPenetrationSlop;
            if (depth <= 0) continue;
            const double inv_sum = a.inverse_mass + b.inverse_mass;
            if (inv_sum < 1e-12) continue;
            const Vec2 corr = p.normal * (kBaumgarte * depth / inv_sum);
            a.position -= corr * a.inverse_mass;
            b.position += corr * b.inverse_mass;
        }
    }

    // Begin/End transitions against the carried touching set. Release uses a
    // looser gap than begin so slow rolling contact does not flicker.
    std::vector<std::pair<int, int>> now;
    for (const auto& c : contacts) {
        bool touching = false;
        for (const auto& p : c.points)
            if (p.penetration >= -kTouchSlop) touching = true;
        if (touching) {
            int id_a = bodies[c.ia].id, id_b = bodies[c.ib].id;
            if (id_a > id_b) std::swap(id_a, id_b);
            now.emplace_back(id_a, id_b);
        }
    }
    std::sort(now.begin(), now.end());
    now.erase(std::unique(now.begin(), now.end()), now.end());
    for (const auto& pr : scene.active_contacts) {
        if (std::binary_search(now.begin(), now.end(), pr)) continue;
        const Body* a = next.find(pr.first);
        const Body* b = next.find(pr.second);
        if (a && b && bodies_overlap(*a, *b, kTouchRelease))
            now.push_back(pr);
    }
    std::sort(now.begin(), now.end());

    std::vector<ContactEvent> events;
    auto snapshot = [&](int id) {
        const Body* b = next.find(id);
        return BodySnapshot{id, b->position, b->velocity, b->angle};
    };
    auto emit = [&](const std::pair<int, int>& pr, ContactKind kind) {
        ContactEvent e;
        e.timestep = timestep;
        e.kind = kind;
        e.a = snapshot(pr.first);
        e.b = snapshot(pr.second);
        events.push_back(e);
    };
    for (const auto& pr : now)
        if (!std::binary_search(scene.active_contacts.begin(),
                                scene.active_contacts.end(), pr))
            emit(pr, ContactKind::Begin);
    for (const auto& pr : scene.active_contacts)
        if (!std::binary_search(now.begin(), now.end(), pr))
            emit(pr, ContactKind::End);
    std::sort(events.begin(), events.end(), [](const auto& l, const auto& r) {
        return std::tie(l.a.id, l.b.id, l.kind) < std::tie(r.a.id, r.b.id, r.kind);
    });

    next.active_contacts = std::move(now);
    return {std::move(next), std::move(events)};
}

Rollout simulate(const Scene& scene, int max_steps) {
    Rollout r;
    const int steps = std::min(max_steps, kMaxSteps);
    Scene cur = scene;
    for (int t = 0; t < steps; ++t) {
        auto [next, events] = step(cur, kDt, t);
        cur = std::move(next);
        FrameSnapshot frame;
        for (const auto& b : cur.bodies)
            if (b.dynamic)
                frame.dynamic_bodies.push_back(
                    {b.id, b.position, b.velocity, b.angle});
        r.frames.push_back(std::move(frame));
        r.contacts.insert(r.contacts.end(), events.begin(), events.end());
    }
    r.steps_run = steps;
    return r;
}

std::vector<std::pair<int, int>> touching_at(const Rollout& rollout, int frame) {
    std::vector<std::pair<int, int>> active;
    for (const auto& e : rollout.contacts) {
        if (e.timestep > frame) break;
        const std::pair<int, int> pr{e.a.id, e.b.id};
        auto it = std::find(active.begin(), active.end(), pr);
        if (e.kind == ContactKind::Begin) {
            if (it == active.end()) active.push_back(pr);
        } else if (it != active.end()) {
            active.erase(it);
        }
    }
    std::sort(active.begin(), active.end());
    return active;
}

}  // namespace esprit
