#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "esprit/tasks.hpp"

namespace esprit {

struct ObjectRecord {
    int id = 0;
    ShapeClass type = ShapeClass::Circle;
    Color color = Color::Black;
    bool dynamic = false;
    double x = 0, y = 0;
    // shape parameters; the subset used depends on `type`
    double radius = 0;
    double length = 0, width = 0, angle = 0;
    double base_length = 0, side_length = 0;
    std::string entity_name;  // e.g. "green_circle_0"
};

// One record per body, scene order preserved (red ball last when present).
std::vector<ObjectRecord> initial_records(const Scene& scene);

enum class EventProvenance { Begin, End, Merged };

struct CollisionEvent {
    int timestep = 0;
    EventProvenance provenance = EventProvenance::Begin;
    struct Participant {
        int id = 0;
        ShapeClass shape = ShapeClass::Circle;
        double x = 0, y = 0, vx = 0, vy = 0, angle = 0;
    };
    Participant a, b;  // a.id < b.id
};

// One CollisionEvent per Begin and per End contact transition.
std::vector<CollisionEvent> extract_events(const Rollout& rollout,
                                           const Scene& scene);

// Merges events of the same pair within 3 frames (transitively), keeping the
// earliest frame and snapshot. Idempotent.
std::vector<CollisionEvent> denoise_window3(const std::vector<CollisionEvent>& events);

json to_json(const CollisionEvent& e);
CollisionEvent collision_event_from_json(const json& j);

using FeatureVector13 = std::array<double, 13>;

// [timestep, shapeA, xA, yA, vxA, vyA, angleA, shapeB, xB, yB, vxB, vyB, angleB]
// with positions/velocities normalized by 256, timestep by 1000.
FeatureVector13 featurize(const CollisionEvent& event);

std::string feature_csv_header();
std::string feature_csv_row(const FeatureVector13& f);

struct SaliencyLabel {
    int event_index = 0;
    bool salient = false;
};

// Counterfactual oracle: re-simulates the task without the red ball; an event
// is salient iff it has no counterpart there (same pair, frame within 5) and
// happens no later than goal_frame + hold.
std::vector<SaliencyLabel> oracle_label(const Task& task, const Action& action,
                                        const Rollout& solved_rollout,
                                        const std::vector<CollisionEvent>& denoised,
                                        int goal_frame);

struct Record {
    std::string value;
    std::string entity;
    std::string type;
    std::string segment;
};

struct RecordTable {
    std::vector<Record> records;
};

RecordTable to_record_table(const std::vector<ObjectRecord>& initial,
                            const std::vector<CollisionEvent>& salient);

// Table 6 line format: value|entity|type|segment, one record per line.
std::string to_pipe_format(const RecordTable& table);
RecordTable record_table_from_pipe(const std::string& text);
json to_json(const RecordTable& table);
RecordTable record_table_from_json(const json& j);

struct GoldText {
    std::vector<std::string> init_description;
    std::vector<std::string> sim_description;
};

// Deterministic template realization with seeded synonym choice; both
// descriptions stay under 60 tokens.
GoldText gold_text(const std::vector<ObjectRecord>& initial,
                   const std::vector<CollisionEvent>& salient, uint64_t seed);

// Human-readable object phrase used in both gold text and LM contexts.
std::string object_phrase(const ObjectRecord& rec);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace esprit
