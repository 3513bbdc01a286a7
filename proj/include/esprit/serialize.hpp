#pragma once

#include <string>

#include <json.hpp>

#include "esprit/scene.hpp"

namespace esprit {

using json = nlohmann::ordered_json;

json to_json(const Vec2& v);
Vec2 vec2_from_json(const json& j);

json to_json(const ShapeSpec& s);
ShapeSpec shape_from_json(const json& j);

json to_json(const Body& b);
Body body_from_json(const json& j);

json to_json(const Scene& s);
Scene scene_from_json(const json& j);

json to_json(const ContactEvent& e);
ContactEvent contact_event_from_json(const json& j);

json to_json(const Rollout& r);
Rollout rollout_from_json(const json& j);

}  // namespace esprit
