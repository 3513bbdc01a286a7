#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "esprit/pipeline.hpp"

using namespace esprit;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.tasks_per_template = 3;
    cfg.solver_budget = 10000;
    return cfg;
}

const DatasetBundle& tiny_bundle() {
    static DatasetBundle bundle = build_dataset(tiny_config());
    return bundle;
}

}  // namespace

TEST_CASE("stage seeds are distinct and stable") {
    std::set<uint64_t> seen;
    for (const auto* s : {"tasks", "solve", "gold", "split", "classifier",
                          "nlg-avg", "nlg-bilstm", "lm", "generate"})
        seen.insert(stage_seed(7, s));
    CHECK(seen.size() == 9);
    CHECK(stage_seed(7, "tasks") == stage_seed(7, "tasks"));
    CHECK(stage_seed(7, "tasks") != stage_seed(8, "tasks"));
}

TEST_CASE("run config json round-trip and hash sensitivity") {
    RunConfig a = tiny_config();
    RunConfig b = run_config_from_json(to_json(a));
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 12;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.nlg.record_dim = 64;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("identical config produces byte-identical bundles") {
    const DatasetBundle again = build_dataset(tiny_config());
    CHECK(to_json(tiny_bundle()).dump() == to_json(again).dump());
}

TEST_CASE("splits partition the solved task ids") {
    const DatasetBundle& b = tiny_bundle();
    std::set<std::string> all;
    for (const auto& e : b.entries) all.insert(e.task.task_id());
    CHECK(all.size() == b.entries.size());
    std::set<std::string> seen;
    for (const auto* ids : {&b.train_ids, &b.valid_ids, &b.test_ids})
        for (const auto& id : *ids) {
            CHECK(all.count(id) == 1);
            CHECK(seen.insert(id).second);  // no overlap
        }
    CHECK(seen == all);
    const int n = static_cast<int>(b.entries.size());
    CHECK(static_cast<int>(b.train_ids.size()) == n * 8 / 10);
    CHECK(static_cast<int>(b.valid_ids.size()) == n / 10);
}

TEST_CASE("entries are internally consistent") {
    for (const auto& e : tiny_bundle().entries) {
        CHECK(e.labels.size() == e.events.size());
        CHECK(e.goal_frame >= 0);
        int salient = 0;
        for (int l : e.labels) salient += l;
        // one TIMESTEP record plus two participants x six attributes each
        int event_records = 0;
        for (const auto& r : e.table.records)
            if (r.segment != "INITIAL_STATE") ++event_records;
        CHECK(event_records == salient * 13);
        CHECK(!e.gold.init_description.empty());
        CHECK(!e.gold.sim_description.empty());
        CHECK(e.gold.init_description.size() < 60);
        CHECK(e.gold.sim_description.size() < 60);
    }
}

TEST_CASE("bundle json round-trips byte-for-byte") {
    const json j = to_json(tiny_bundle());
    CHECK(j.dump() == to_json(bundle_from_json(j)).dump());
}

TEST_CASE("event_split concatenates per-task events in split order") {
    const DatasetBundle& b = tiny_bundle();
    std::vector<FeatureVector13> x;
    std::vector<int> y;
    size_t total = 0;
    for (const auto* name : {"train", "valid", "test"}) {
        event_split(b, name, &x, &y);
        CHECK(x.size() == y.size());
        total += x.size();
    }
    size_t expect = 0;
    for (const auto& e : b.entries) expect += e.events.size();
    CHECK(total == expect);
    event_split(b, "train", &x, &y);
    const TaskEntry* first = b.find(b.train_ids.front());
    REQUIRE(!first->events.empty());
    CHECK(x.front() == featurize(first->events.front()));
}

TEST_CASE("manifest captures seeds and splits and round-trips") {
    const RunConfig cfg = tiny_config();
    Manifest m = make_manifest(cfg, tiny_bundle());
    CHECK(m.root_seed == cfg.seed);
    CHECK(m.config_digest == config_hash(cfg));
    CHECK(m.stage_seeds.at("solve") == stage_seed(cfg.seed, "solve"));
    CHECK(m.stage_seeds.size() == 9);
    CHECK(m.template_ids.size() == 5);
    CHECK(m.train_ids == tiny_bundle().train_ids);
    const json j = to_json(m);
    CHECK(j.dump() == to_json(manifest_from_json(j)).dump());
}

TEST_CASE("nlg pairs and lm prompts cover both description tasks") {
    const auto entries = tiny_bundle().split("train");
    const auto pairs = nlg_pairs(entries);
    const auto prompts = lm_prompts(entries);
    CHECK(pairs.size() == entries.size() * 2);
    CHECK(prompts.size() == entries.size() * 2);
    // init pair holds only initial-state records, sim pair the full table
    for (size_t i = 0; i < entries.size(); ++i) {
        for (const auto& r : pairs[2 * i].first.records)
            CHECK(r.segment == "INITIAL_STATE");
        CHECK(pairs[2 * i + 1].first.records.size() ==
              entries[i]->table.records.size());
        CHECK(pairs[2 * i].second == entries[i]->gold.init_description);
        CHECK(pairs[2 * i + 1].second == entries[i]->gold.sim_description);
    }
    // lm contexts end with the literal cues
    CHECK(prompts[0].context.back() == "simulation");
    CHECK(prompts[1].context.back() == "and");
}

TEST_CASE("render strip has one panel per pivotal event plus two") {
    const TaskEntry& e = tiny_bundle().entries.front();
    int salient = 0;
    for (int l : e.labels) salient += l;
    const Image strip = render_strip(e);
    const int panels = salient + 2;
    // 256-wide panels with 2-pixel separators
    CHECK(strip.width == panels * 256 + (panels - 1) * 2);
    CHECK(strip.height == 256);
    CHECK(render_strip(e).ppm_bytes() == strip.ppm_bytes());  // deterministic
}

TEST_CASE("render frames samples the rollout up to the goal frame") {
    const TaskEntry& e = tiny_bundle().entries.front();
    const auto frames = render_frames(e, 100);
    const int expect = e.goal_frame / 100 + 1 + (e.goal_frame % 100 ? 1 : 0);
    CHECK(static_cast<int>(frames.size()) == expect);
    CHECK_THROWS_AS(render_frames(e, 0), std::invalid_argument);
}

TEST_CASE("evaluation is deterministic on frozen artifacts and complete") {
    const DatasetBundle& b = tiny_bundle();
    RunConfig cfg = tiny_config();
    cfg.mlp.widths = {8};
    cfg.mlp.max_epochs = 5;
    cfg.mlp.patience = 5;
    const ClassifierArtifacts clf = train_classifiers(b, cfg);

    // frozen stand-in generations: gold text with a fixed edit
    Generations gens;
    for (const TaskEntry* e : b.split("test")) {
        for (const auto* model : {"lm", "avg", "bilstm"}) {
            TokenSeq init = e->gold.init_description;
            TokenSeq sim = e->gold.sim_description;
            init.push_back(".");
            gens[model]["init"].push_back(init);
            gens[model]["sim"].push_back(sim);
        }
    }
    const ConceptLexicon lex = ConceptLexicon::defaults();
    const json r1 = evaluate_all(b, gens, clf, lex);
    const json r2 = evaluate_all(b, gens, clf, lex);
    CHECK(r1.dump() == r2.dump());

    for (const auto* model : {"lm", "avg", "bilstm"}) {
        for (const auto* task : {"init", "sim"}) {
            const json& rep = r1.at("generation").at(model).at(task);
            for (const auto* metric : {"bleu1", "bleu2", "rouge_l", "meteor"}) {
                const double v = rep.at(metric).get<double>();
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            CHECK(rep.at("coverage").size() == 3);
        }
    }
    for (const auto* model : {"baseline", "tree", "mlp"})
        CHECK(r1.at("classification").at(model).contains("f1"));
    CHECK(r1.at("classification").at("baseline").at("recall").get<double>() ==
          1.0);
    const std::string text = format_report(r1);
    CHECK(text.find("bilstm") != std::string::npos);
    CHECK(text.find("baseline") != std::string::npos);
}
