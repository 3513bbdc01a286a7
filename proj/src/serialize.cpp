#include "esprit/serialize.hpp"

namespace esprit {

json to_json(const Vec2& v) { return json{{"x", v.x}, {"y", v.y}}; }

Vec2 vec2_from_json(const json& j) {
    return {j.at("x").get<double>(), j.at("y").get<double>()};
}

json to_json(const ShapeSpec& s) {
    json j;
    if (const auto* c = std::get_if<CircleShape>(&s)) {
        j["kind"] = "circle";
        j["radius"] = c->radius;
    } else if (const auto* b = std::get_if<BarShape>(&s)) {
        j["kind"] = "bar";
        j["length"] = b->length;
        j["width"] = b->width;
        j["angle_rad"] = b->angle_rad;
    } else if (const auto* jar = std::get_if<JarShape>(&s)) {
        j["kind"] = "jar";
        j["base_length"] = jar->base_length;
        j["side_length"] = jar->side_length;
        j["width"] = jar->width;
        j["angle_rad"] = jar->angle_rad;
    } else {
        j["kind"] = "boundary";
    }
    return j;
}

ShapeSpec shape_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "circle") return CircleShape{j.at("radius").get<double>()};
    if (kind == "bar")
        return BarShape{j.at("length").get<double>(), j.at("width").get<double>(),
                        j.at("angle_rad").get<double>()};
    if (kind == "jar")
        return JarShape{j.at("base_length").get<double>(),
                        j.at("side_length").get<double>(),
                        j.at("width").get<double>(), j.at("angle_rad").get<double>()};
    if (kind == "boundary") return BoundaryShape{};
    throw std::invalid_argument("unknown shape kind: " + kind);
}

json to_json(const Body& b) {
    return json{{"id", b.id},
                {"shape", to_json(b.shape)},
                {"color", color_name(b.color)},
                {"dynamic", b.dynamic},
                {"position", to_json(b.position)},
                {"velocity", to_json(b.velocity)},
                {"angle", b.angle},
                {"angular_velocity", b.angular_velocity}};
}

Body body_from_json(const json& j) {
    Body b;
    b.id = j.at("id").get<int>();
    b.shape = shape_from_json(j.at("shape"));
    b.color = color_from_name(j.at("color").get<std::string>());
    b.dynamic = j.at("dynamic").get<bool>();
    b.position = vec2_from_json(j.at("position"));
    b.velocity = vec2_from_json(j.at("velocity"));
    b.angle = j.at("angle").get<double>();
    b.angular_velocity = j.at("angular_velocity").get<double>();
    assign_mass(b);
    return b;
}

json to_json(const Scene& s) {
    json bodies = json::array();
    for (const auto& b : s.bodies) bodies.push_back(to_json(b));
    json contacts = json::array();
    for (const auto& [a, b] : s.active_contacts) contacts.push_back({a, b});
    return json{{"bodies", bodies}, {"active_contacts", contacts}};
}

Scene scene_from_json(const json& j) {
    Scene s;
    for (const auto& jb : j.at("bodies")) s.bodies.push_back(body_from_json(jb));
    for (const auto& jc : j.at("active_contacts"))
        s.active_contacts.emplace_back(jc.at(0).get<int>(), jc.at(1).get<int>());
    return s;
}

static json to_json(const BodySnapshot& s) {
    return json{{"id", s.id},
                {"position", to_json(s.position)},
                {"velocity", to_json(s.velocity)},
                {"angle", s.angle}};
}

static BodySnapshot snapshot_from_json(const json& j) {
    return {j.at("id").get<int>(), vec2_from_json(j.at("position")),
            vec2_from_json(j.at("velocity")), j.at("angle").get<double>()};
}

json to_json(const ContactEvent& e) {
    return json{{"timestep", e.timestep},
                {"kind", e.kind == ContactKind::Begin ? "begin" : "end"},
                {"a", to_json(e.a)},
                {"b", to_json(e.b)}};
}

ContactEvent contact_event_from_json(const json& j) {
    ContactEvent e;
    e.timestep = j.at("timestep").get<int>();
    e.kind = j.at("kind").get<std::string>() == "begin" ? ContactKind::Begin
                                                        : ContactKind::End;
    e.a = snapshot_from_json(j.at("a"));
    e.b = snapshot_from_json(j.at("b"));
    return e;
}

json to_json(const Rollout& r) {
    json frames = json::array();
    for (const auto& f : r.frames) {
        json js = json::array();
        for (const auto& s : f.dynamic_bodies) js.push_back(to_json(s));
        frames.push_back(js);
    }
    json contacts = json::array();
    for (const auto& e : r.contacts) contacts.push_back(to_json(e));
    return json{{"steps_run", r.steps_run}, {"frames", frames}, {"contacts", contacts}};
}

Rollout rollout_from_json(const json& j) {
    Rollout r;
    r.steps_run = j.at("steps_run").get<int>();
    for (const auto& jf : j.at("frames")) {
        FrameSnapshot f;
        for (const auto& js : jf) f.dynamic_bodies.push_back(snapshot_from_json(js));
        r.frames.push_back(std::move(f));
    }
    for (const auto& je : j.at("contacts"))
        r.contacts.push_back(contact_event_from_json(je));
    return r;
}

}  // namespace esprit
