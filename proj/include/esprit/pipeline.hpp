#pragma once

#include "esprit/lm.hpp"
#include "esprit/render.hpp"
#include "esprit/saliency.hpp"
#include "esprit/textmetrics.hpp"

namespace esprit {

inline constexpr const char* kToolVersion = "0.1.0";

// Named per-stage sub-seed derived from the root seed.
uint64_t stage_seed(uint64_t root, const std::string& stage);

struct RunConfig {
    // desk-scale training defaults keep the end-to-end run within its
    // wall-clock budget; raise per-model epochs for a longer run
    RunConfig() {
        nlg.max_epochs = 6;
        lm.max_epochs = 10;
    }

    uint64_t seed = 0;
    std::vector<int> template_ids;  // empty means all builtin templates
    int tasks_per_template = 50;
    int solver_budget = 10000;
    TreeConfig tree;
    MlpConfig mlp;
    EntityModelConfig nlg;  // encoder mode is fixed per trained model
    LmConfig lm;
    int sample_top_k = 3;
    double sample_temperature = 0.1;
    int sample_max_len = 40;
};

json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);
// FNV-1a over the serialized config, hex string.
std::string config_hash(const RunConfig& c);

struct TaskEntry {
    Task task;
    Action action;
    int goal_frame = -1;
    std::vector<CollisionEvent> events;  // denoised, rollout order
    std::vector<int> labels;             // parallel to events, 1 = pivotal
    RecordTable table;                   // initial state + pivotal events
    GoldText gold;
};

struct DatasetBundle {
    std::vector<TaskEntry> entries;  // solved tasks, template/index order
    std::vector<std::string> train_ids, valid_ids, test_ids;
    int excluded = 0;  // tasks with no solution within budget

    const TaskEntry* find(const std::string& task_id) const;
    // split name is "train", "valid", or "test"
    std::vector<const TaskEntry*> split(const std::string& name) const;
};

json to_json(const DatasetBundle& b);
DatasetBundle bundle_from_json(const json& j);

// instantiate -> solve -> extract -> denoise -> oracle-label -> gold text ->
// 80/10/10 split; deterministic in the config.
DatasetBundle build_dataset(const RunConfig& cfg);

struct Manifest {
    std::string version = kToolVersion;
    uint64_t root_seed = 0;
    std::string config_digest;
    std::map<std::string, uint64_t> stage_seeds;
    std::vector<int> template_ids;
    int excluded = 0;
    std::vector<std::string> train_ids, valid_ids, test_ids;
    std::map<std::string, std::string> artifacts;  // stage -> relative path
};

json to_json(const Manifest& m);
Manifest manifest_from_json(const json& j);
Manifest make_manifest(const RunConfig& cfg, const DatasetBundle& bundle);

// Event features/labels of one split, event order within task order.
void event_split(const DatasetBundle& bundle, const std::string& name,
                 std::vector<FeatureVector13>* x, std::vector<int>* y);

struct ClassifierArtifacts {
    DecisionTree tree;
    Mlp mlp;
};
ClassifierArtifacts train_classifiers(const DatasetBundle& bundle,
                                      const RunConfig& cfg);

// Scene objects (red ball included) for an entry, recomputed on demand.
std::vector<ObjectRecord> entry_objects(const TaskEntry& entry);
// Records of the INITIAL_STATE segment only.
RecordTable initial_segment(const RecordTable& table);

// One pair per description: (initial segment -> init text) and
// (full table -> sim text).
std::vector<TextPair> nlg_pairs(const std::vector<const TaskEntry*>& entries);
std::vector<Prompt> lm_prompts(const std::vector<const TaskEntry*>& entries);

struct NlgArtifacts {
    Vocab record_vocab, text_vocab;
    EntityModel avg, bilstm;
};
NlgArtifacts train_nlg_models(const DatasetBundle& bundle, const RunConfig& cfg);

Lm train_lm_model(const DatasetBundle& bundle, const RunConfig& cfg);

// model name ("lm" | "avg" | "bilstm") -> description task ("init" | "sim")
// -> one token sequence per test entry, entry order.
using Generations =
    std::map<std::string, std::map<std::string, std::vector<TokenSeq>>>;

Generations generate_all(const DatasetBundle& bundle, const NlgArtifacts& nlg,
                         const Lm& lm, const RunConfig& cfg);

// Classification PRF table (all-positive baseline, tree, MLP on test events)
// plus a MetricReport per model and description task.
json evaluate_all(const DatasetBundle& bundle, const Generations& gens,
                  const ClassifierArtifacts& clf, const ConceptLexicon& lexicon);

// Plain-text tables in the layout of the evaluation JSON.
std::string format_report(const json& evaluation);

// Panels: initial scene, each pivotal event frame, goal frame.
Image render_strip(const TaskEntry& entry);
// Every `stride`-th frame of the rollout, goal frame included.
std::vector<Image> render_frames(const TaskEntry& entry, int stride = 60);

}  // namespace esprit
