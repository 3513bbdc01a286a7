#include "esprit/events.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace esprit {

namespace {

std::string entity_name_for(Color color, ShapeClass cls, int index) {
    return color_name(color) + "_" + shape_class_name(cls) + "_" +
           std::to_string(index);
}

int round_int(double v) { return static_cast<int>(std::lround(v)); }

std::string shape_word(ShapeClass c) {
    switch (c) {
        case ShapeClass::Circle: return "ball";
        case ShapeClass::Bar: return "bar";
        case ShapeClass::Jar: return "jar";
        case ShapeClass::Boundary: return "boundary";
    }
    return "?";
}

}  // namespace

std::vector<ObjectRecord> initial_records(const Scene& scene) {
    std::vector<ObjectRecord> out;
    std::map<std::pair<Color, ShapeClass>, int> counters;
    for (const auto& b : scene.bodies) {
        ObjectRecord r;
        r.id = b.id;
        r.type = shape_class(b.shape);
        r.color = b.color;
        r.dynamic = b.dynamic;
        r.x = b.position.x;
        r.y = b.position.y;
        if (const auto* c = std::get_if<CircleShape>(&b.shape)) {
            r.radius = c->radius;
        } else if (const auto* bar = std::get_if<BarShape>(&b.shape)) {
            r.length = bar->length;
            r.width = bar->width;
            r.angle = bar->angle_rad + b.angle;
        } else if (const auto* jar = std::get_if<JarShape>(&b.shape)) {
            r.base_length = jar->base_length;
            r.side_length = jar->side_length;
            r.width = jar->width;
            r.angle = jar->angle_rad + b.angle;
        }
        const int idx = counters[{b.color, r.type}]++;
        r.entity_name = entity_name_for(b.color, r.type, idx);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CollisionEvent> extract_events(const Rollout& rollout,
                                           const Scene& scene) {
    std::map<int, ShapeClass> classes;
    for (const auto& b : scene.bodies) classes[b.id] = shape_class(b.shape);
    std::vector<CollisionEvent> out;
    for (const auto& c : rollout.contacts) {
        CollisionEvent e;
        e.timestep = c.timestep;
        e.provenance = c.kind == ContactKind::Begin ? EventProvenance::Begin
                                                    : EventProvenance::End;
        auto fill = [&](CollisionEvent::Participant& p, const BodySnapshot& s) {
            p.id = s.id;
            p.shape = classes.at(s.id);
            p.x = s.position.x;
            p.y = s.position.y;
            p.vx = s.velocity.x;
            p.vy = s.velocity.y;
            p.angle = s.angle;
        };
        fill(e.a, c.a);
        fill(e.b, c.b);
        out.push_back(e);
    }
    return out;
}

std::vector<CollisionEvent> denoise_window3(
    const std::vector<CollisionEvent>& events) {
    std::map<std::pair<int, int>, std::vector<CollisionEvent>> by_pair;
    for (const auto& e : events) by_pair[{e.a.id, e.b.id}].push_back(e);
    std::vector<CollisionEvent> out;
    for (auto& [pair, evs] : by_pair) {
        std::stable_sort(evs.begin(), evs.end(),
                         [](const auto& l, const auto& r) {
                             return l.timestep < r.timestep;
                         });
        size_t i = 0;
        while (i < evs.size()) {
            size_t j = i;
            // transitive clustering: extend while the gap stays within 3 frames
            while (j + 1 < evs.size() &&
                   evs[j + 1].timestep - evs[j].timestep <= 3)
                ++j;
            CollisionEvent merged = evs[i];  // earliest frame and snapshot
            if (j > i) merged.provenance = EventProvenance::Merged;
            out.push_back(merged);
            i = j + 1;
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) {
        return std::tie(l.timestep, l.a.id, l.b.id) <
               std::tie(r.timestep, r.a.id, r.b.id);
    });
    return out;
}

FeatureVector13 featurize(const CollisionEvent& event) {
    auto pack = [](const CollisionEvent::Participant& p, FeatureVector13& f,
                   size_t off) {
        f[off] = static_cast<double>(p.shape);
        f[off + 1] = p.x / kWorldSize;
        f[off + 2] = p.y / kWorldSize;
        f[off + 3] = p.vx / kWorldSize;
        f[off + 4] = p.vy / kWorldSize;
        f[off + 5] = p.angle;
    };
    FeatureVector13 f{};
    f[0] = event.timestep / 1000.0;
    pack(event.a, f, 1);
    pack(event.b, f, 7);
    return f;
}

std::string feature_csv_header() {
    return "timestep,shape_a,x_a,y_a,vx_a,vy_a,angle_a,"
           "shape_b,x_b,y_b,vx_b,vy_b,angle_b";
}

std::string feature_csv_row(const FeatureVector13& f) {
    std::ostringstream os;
    os.precision(10);
    for (size_t i = 0; i < f.size(); ++i) {
        if (i) os << ',';
        os << f[i];
    }
    return os.str();
}

std::vector<SaliencyLabel> oracle_label(const Task& task, const Action& action,
                                        const Rollout& solved_rollout,
                                        const std::vector<CollisionEvent>& denoised,
                                        int goal_frame) {
    (void)action;
    const Rollout counterfactual =
        simulate(task.initial_scene, solved_rollout.steps_run);
    const auto cf_events =
        denoise_window3(extract_events(counterfactual, task.initial_scene));
    const int cutoff = goal_frame + task.goal.hold_frames;
    std::vector<SaliencyLabel> labels;
    for (size_t i = 0; i < denoised.size(); ++i) {
        const auto& e = denoised[i];
        bool matched = false;
        for (const auto& c : cf_events)
            if (c.a.id == e.a.id && c.b.id == e.b.id &&
                std::abs(c.timestep - e.timestep) <= 5)
                matched = true;
        labels.push_back(
            {static_cast<int>(i), !matched && e.timestep <= cutoff});
    }
    return labels;
}

RecordTable to_record_table(const std::vector<ObjectRecord>& initial,
                            const std::vector<CollisionEvent>& salient) {
    RecordTable t;
    auto add = [&](const std::string& value, const std::string& entity,
                   const std::string& type, const std::string& segment) {
        t.records.push_back({value, entity, type, segment});
    };
    for (const auto& r : initial) {
        const std::string seg = "INITIAL_STATE";
        add(color_name(r.color), r.entity_name, "OBJ_COLOR", seg);
        add(shape_class_name(r.type), r.entity_name, "OBJ_TYPE", seg);
        add(r.dynamic ? "dynamic" : "static", r.entity_name, "OBJ_STATE", seg);
        add(std::to_string(round_int(r.x)), r.entity_name, "X", seg);
        add(std::to_string(round_int(r.y)), r.entity_name, "Y", seg);
        switch (r.type) {
            case ShapeClass::Circle:
                add(std::to_string(round_int(r.radius)), r.entity_name, "RADIUS", seg);
                break;
            case ShapeClass::Bar:
                add(std::to_string(round_int(r.length)), r.entity_name, "LENGTH", seg);
                add(std::to_string(round_int(r.width)), r.entity_name, "WIDTH", seg);
                add(std::to_string(round_int(r.angle * 180.0 / M_PI)),
                    r.entity_name, "ANGLE", seg);
                break;
            case ShapeClass::Jar:
                add(std::to_string(round_int(r.base_length)), r.entity_name,
                    "BASE_LENGTH", seg);
                add(std::to_string(round_int(r.side_length)), r.entity_name,
                    "SIDE_LENGTH", seg);
                add(std::to_string(round_int(r.width)), r.entity_name, "WIDTH", seg);
                add(std::to_string(round_int(r.angle * 180.0 / M_PI)),
                    r.entity_name, "ANGLE", seg);
                break;
            case ShapeClass::Boundary:
                break;
        }
    }
    std::map<int, std::string> names;
    for (const auto& r : initial) names[r.id] = r.entity_name;
    for (size_t i = 0; i < salient.size(); ++i) {
        const auto& e = salient[i];
        const std::string seg = "EVENT_" + std::to_string(i + 1);
        add(std::to_string(e.timestep), names.at(e.a.id), "TIMESTEP", seg);
        for (const auto* p : {&e.a, &e.b}) {
            const std::string& ent = names.at(p->id);
            add(shape_class_name(p->shape), ent, "OBJ_TYPE", seg);
            add(std::to_string(round_int(p->x)), ent, "X", seg);
            add(std::to_string(round_int(p->y)), ent, "Y", seg);
            add(std::to_string(round_int(p->vx)), ent, "VX", seg);
            add(std::to_string(round_int(p->vy)), ent, "VY", seg);
            add(std::to_string(round_int(p->angle * 180.0 / M_PI)), ent, "ANGLE",
                seg);
        }
    }
    return t;
}

std::string to_pipe_format(const RecordTable& table) {
    std::ostringstream os;
    for (const auto& r : table.records)
        os << r.value << '|' << r.entity << '|' << r.type << '|' << r.segment
           << '\n';
    return os.str();
}

RecordTable record_table_from_pipe(const std::string& text) {
    RecordTable t;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        Record r;
        std::istringstream ls(line);
        if (!std::getline(ls, r.value, '|') || !std::getline(ls, r.entity, '|') ||
            !std::getline(ls, r.type, '|') || !std::getline(ls, r.segment))
            throw std::runtime_error("malformed record line: " + line);
        t.records.push_back(std::move(r));
    }
    return t;
}

namespace {

json participant_json(const CollisionEvent::Participant& p) {
    return {{"id", p.id},          {"shape", static_cast<int>(p.shape)},
            {"x", p.x},           {"y", p.y},
            {"vx", p.vx},         {"vy", p.vy},
            {"angle", p.angle}};
}

CollisionEvent::Participant participant_from_json(const json& j) {
    CollisionEvent::Participant p;
    p.id = j.at("id").get<int>();
    p.shape = static_cast<ShapeClass>(j.at("shape").get<int>());
    p.x = j.at("x").get<double>();
    p.y = j.at("y").get<double>();
    p.vx = j.at("vx").get<double>();
    p.vy = j.at("vy").get<double>();
    p.angle = j.at("angle").get<double>();
    return p;
}

}  // namespace

json to_json(const CollisionEvent& e) {
    return {{"timestep", e.timestep},
            {"provenance", static_cast<int>(e.provenance)},
            {"a", participant_json(e.a)},
            {"b", participant_json(e.b)}};
}

CollisionEvent collision_event_from_json(const json& j) {
    CollisionEvent e;
    e.timestep = j.at("timestep").get<int>();
    e.provenance = static_cast<EventProvenance>(j.at("provenance").get<int>());
    e.a = participant_from_json(j.at("a"));
    e.b = participant_from_json(j.at("b"));
    return e;
}

json to_json(const RecordTable& table) {
    json arr = json::array();
    for (const auto& r : table.records)
        arr.push_back({{"value", r.value},
                       {"entity", r.entity},
                       {"type", r.type},
                       {"segment", r.segment}});
    return arr;
}

RecordTable record_table_from_json(const json& j) {
    RecordTable t;
    for (const auto& e : j)
        t.records.push_back({e.at("value").get<std::string>(),
                             e.at("entity").get<std::string>(),
                             e.at("type").get<std::string>(),
                             e.at("segment").get<std::string>()});
    return t;
}

namespace {

std::string grid_phrase(double x, double y) {
    const double third = kWorldSize / 3.0;
    const int col = x < third ? 0 : (x < 2 * third ? 1 : 2);
    const int row = y < third ? 0 : (y < 2 * third ? 1 : 2);
    static const char* rows[3] = {"lower", "middle", "upper"};
    static const char* cols[3] = {"left", "center", "right"};
    if (row == 1 && col == 1) return "center";
    return std::string(rows[row]) + " " + cols[col];
}

void push_words(std::vector<std::string>& out, const std::string& phrase) {
    std::istringstream is(phrase);
    std::string w;
    while (is >> w) out.push_back(w);
}

}  // namespace

std::string object_phrase(const ObjectRecord& rec) {
    std::string size;
    switch (rec.type) {
        case ShapeClass::Circle:
            size = rec.radius < 7 ? "small" : (rec.radius < 11 ? "medium" : "big");
            break;
        case ShapeClass::Bar:
            size = rec.length < 100 ? "short" : "long";
            break;
        case ShapeClass::Jar:
            size = rec.base_length < 60 ? "small" : "big";
            break;
        case ShapeClass::Boundary:
            size = "static";
            break;
    }
    if (rec.type == ShapeClass::Boundary)
        return "static " + color_name(rec.color) + " boundary";
    return size + " " + color_name(rec.color) + " " +
           (rec.dynamic ? "dynamic" : "static") + " " + shape_word(rec.type);
}

GoldText gold_text(const std::vector<ObjectRecord>& initial,
                   const std::vector<CollisionEvent>& salient, uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x901dULL);
    auto pick = [&](std::initializer_list<const char*> options) {
        std::uniform_int_distribution<size_t> d(0, options.size() - 1);
        return std::string(*(options.begin() + d(rng)));
    };

    std::map<int, std::string> names;
    for (const auto& r : initial) {
        if (r.type == ShapeClass::Boundary) {
            if (r.y < 0) names[r.id] = "floor";
            else if (r.y > kWorldSize) names[r.id] = "ceiling";
            else names[r.id] = "wall";
        } else {
            names[r.id] = color_name(r.color) + " " + shape_word(r.type);
        }
    }

    GoldText out;
    constexpr size_t kMaxTokens = 60;
    for (const auto& r : initial) {
        if (r.type == ShapeClass::Boundary) continue;
        std::vector<std::string> sentence;
        push_words(sentence, "the " + names.at(r.id) + " is in the " +
                                 grid_phrase(r.x, r.y));
        sentence.push_back(".");
        if (out.init_description.size() + sentence.size() >= kMaxTokens) break;
        out.init_description.insert(out.init_description.end(), sentence.begin(),
                                    sentence.end());
    }

    auto narrate = [&](const CollisionEvent& e) {
        // the faster participant acts on the other
        const auto& sa = e.a;
        const auto& sb = e.b;
        const double speed_a = std::hypot(sa.vx, sa.vy);
        const double speed_b = std::hypot(sb.vx, sb.vy);
        const auto& subj = speed_a >= speed_b ? sa : sb;
        const auto& obj = speed_a >= speed_b ? sb : sa;
        std::string verb;
        if (e.provenance == EventProvenance::End) {
            verb = pick({"rolls off", "slides off", "rolls away from"});
        } else if (subj.vy < -15.0) {
            verb = pick({"falls and lands on", "drops onto", "falls onto"});
        } else {
            verb = pick({"hits", "bounces off", "collides with"});
        }
        std::vector<std::string> sentence;
        push_words(sentence,
                   "the " + names.at(subj.id) + " " + verb + " the " +
                       names.at(obj.id));
        sentence.push_back(".");
        return sentence;
    };

    for (const auto& e : salient) {
        const auto sentence = narrate(e);
        if (out.sim_description.size() + sentence.size() >= kMaxTokens - 7) break;
        out.sim_description.insert(out.sim_description.end(), sentence.begin(),
                                   sentence.end());
    }
    if (!salient.empty()) {
        const auto& last = salient.back();
        std::vector<std::string> tail;
        push_words(tail, "the " + names.at(last.a.id) + " " +
                             pick({"remains on", "stays on", "rests on"}) +
                             " the " + names.at(last.b.id));
        tail.push_back(".");
        if (out.sim_description.size() + tail.size() < kMaxTokens)
            out.sim_description.insert(out.sim_description.end(), tail.begin(),
                                       tail.end());
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace esprit
