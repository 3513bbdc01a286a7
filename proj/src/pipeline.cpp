#include "esprit/pipeline.hpp"

#include <algorithm>
#include <sstream>

namespace esprit {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t mix3(uint64_t seed, uint64_t a, uint64_t b) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b));
}

const std::vector<std::string> kStageNames = {
    "tasks", "solve",    "gold",       "split", "classifier",
    "nlg-avg", "nlg-bilstm", "lm",    "generate"};

}  // namespace

uint64_t stage_seed(uint64_t root, const std::string& stage) {
    return splitmix64(root ^ fnv1a(stage));
}

json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["template_ids"] = c.template_ids;
    j["tasks_per_template"] = c.tasks_per_template;
    j["solver_budget"] = c.solver_budget;
    j["tree"] = {{"max_depth", c.tree.max_depth},
                 {"min_samples_split", c.tree.min_samples_split}};
    j["mlp"] = {{"widths", c.mlp.widths},     {"dropout", c.mlp.dropout},
                {"lr", c.mlp.lr},             {"momentum", c.mlp.momentum},
                {"batch", c.mlp.batch},       {"max_epochs", c.mlp.max_epochs},
                {"patience", c.mlp.patience}, {"pos_weight", c.mlp.pos_weight}};
    j["nlg"] = {{"feat_embed", c.nlg.feat_embed},
                {"record_dim", c.nlg.record_dim},
                {"decoder_dim", c.nlg.decoder_dim},
                {"entity_dim", c.nlg.entity_dim},
                {"token_embed", c.nlg.token_embed},
                {"lr", c.nlg.lr},
                {"momentum", c.nlg.momentum},
                {"clip", c.nlg.clip},
                {"batch", c.nlg.batch},
                {"max_epochs", c.nlg.max_epochs}};
    j["lm"] = {{"dim", c.lm.dim},           {"ffn", c.lm.ffn},
               {"heads", c.lm.heads},       {"blocks", c.lm.blocks},
               {"max_seq", c.lm.max_seq},   {"lr", c.lm.lr},
               {"warmup", c.lm.warmup},     {"weight_decay", c.lm.weight_decay},
               {"batch", c.lm.batch},       {"max_epochs", c.lm.max_epochs}};
    j["sample_top_k"] = c.sample_top_k;
    j["sample_temperature"] = c.sample_temperature;
    j["sample_max_len"] = c.sample_max_len;
    return j;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.template_ids = j.value("template_ids", c.template_ids);
    c.tasks_per_template = j.value("tasks_per_template", c.tasks_per_template);
    c.solver_budget = j.value("solver_budget", c.solver_budget);
    if (j.contains("tree")) {
        const auto& t = j["tree"];
        c.tree.max_depth = t.value("max_depth", c.tree.max_depth);
        c.tree.min_samples_split =
            t.value("min_samples_split", c.tree.min_samples_split);
    }
    if (j.contains("mlp")) {
        const auto& m = j["mlp"];
        c.mlp.widths = m.value("widths", c.mlp.widths);
        c.mlp.dropout = m.value("dropout", c.mlp.dropout);
        c.mlp.lr = m.value("lr", c.mlp.lr);
        c.mlp.momentum = m.value("momentum", c.mlp.momentum);
        c.mlp.batch = m.value("batch", c.mlp.batch);
        c.mlp.max_epochs = m.value("max_epochs", c.mlp.max_epochs);
        c.mlp.patience = m.value("patience", c.mlp.patience);
        c.mlp.pos_weight = m.value("pos_weight", c.mlp.pos_weight);
    }
    if (j.contains("nlg")) {
        const auto& n = j["nlg"];
        c.nlg.feat_embed = n.value("feat_embed", c.nlg.feat_embed);
        c.nlg.record_dim = n.value("record_dim", c.nlg.record_dim);
        c.nlg.decoder_dim = n.value("decoder_dim", c.nlg.decoder_dim);
        c.nlg.entity_dim = n.value("entity_dim", c.nlg.entity_dim);
        c.nlg.token_embed = n.value("token_embed", c.nlg.token_embed);
        c.nlg.lr = n.value("lr", c.nlg.lr);
        c.nlg.momentum = n.value("momentum", c.nlg.momentum);
        c.nlg.clip = n.value("clip", c.nlg.clip);
        c.nlg.batch = n.value("batch", c.nlg.batch);
        c.nlg.max_epochs = n.value("max_epochs", c.nlg.max_epochs);
    }
    if (j.contains("lm")) {
        const auto& l = j["lm"];
        c.lm.dim = l.value("dim", c.lm.dim);
        c.lm.ffn = l.value("ffn", c.lm.ffn);
        c.lm.heads = l.value("heads", c.lm.heads);
        c.lm.blocks = l.value("blocks", c.lm.blocks);
        c.lm.max_seq = l.value("max_seq", c.lm.max_seq);
        c.lm.lr = l.value("lr", c.lm.lr);
        c.lm.warmup = l.value("warmup", c.lm.warmup);
        c.lm.weight_decay = l.value("weight_decay", c.lm.weight_decay);
        c.lm.batch = l.value("batch", c.lm.batch);
        c.lm.max_epochs = l.value("max_epochs", c.lm.max_epochs);
    }
    c.sample_top_k = j.value("sample_top_k", c.sample_top_k);
    c.sample_temperature = j.value("sample_temperature", c.sample_temperature);
    c.sample_max_len = j.value("sample_max_len", c.sample_max_len);
    return c;
}

std::string config_hash(const RunConfig& c) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

const TaskEntry* DatasetBundle::find(const std::string& task_id) const {
    for (const auto& e : entries)
        if (e.task.task_id() == task_id) return &e;
    return nullptr;
}

std::vector<const TaskEntry*> DatasetBundle::split(
    const std::string& name) const {
    const std::vector<std::string>* ids = nullptr;
    if (name == "train") ids = &train_ids;
    else if (name == "valid") ids = &valid_ids;
    else if (name == "test") ids = &test_ids;
    else throw std::invalid_argument("unknown split: " + name);
    std::vector<const TaskEntry*> out;
    for (const auto& id : *ids) {
        const TaskEntry* e = find(id);
        if (!e) throw std::runtime_error("split references unknown task " + id);
        out.push_back(e);
    }
    return out;
}

namespace {

json gold_json(const GoldText& g) {
    return {{"init", g.init_description}, {"sim", g.sim_description}};
}

GoldText gold_from_json(const json& j) {
    GoldText g;
    g.init_description = j.at("init").get<std::vector<std::string>>();
    g.sim_description = j.at("sim").get<std::vector<std::string>>();
    return g;
}

}  // namespace

json to_json(const DatasetBundle& b) {
    json entries = json::array();
    for (const auto& e : b.entries) {
        json ev = json::array();
        for (const auto& c : e.events) ev.push_back(to_json(c));
        entries.push_back({{"task", to_json(e.task)},
                           {"action", to_json(e.action)},
                           {"goal_frame", e.goal_frame},
                           {"events", ev},
                           {"labels", e.labels},
                           {"table", to_json(e.table)},
                           {"gold", gold_json(e.gold)}});
    }
    return {{"entries", entries},
            {"train_ids", b.train_ids},
            {"valid_ids", b.valid_ids},
            {"test_ids", b.test_ids},
            {"excluded", b.excluded}};
}

DatasetBundle bundle_from_json(const json& j) {
    DatasetBundle b;
    for (const auto& je : j.at("entries")) {
        TaskEntry e;
        e.task = task_from_json(je.at("task"));
        e.action = action_from_json(je.at("action"));
        e.goal_frame = je.at("goal_frame").get<int>();
        for (const auto& jc : je.at("events"))
            e.events.push_back(collision_event_from_json(jc));
        e.labels = je.at("labels").get<std::vector<int>>();
        e.table = record_table_from_json(je.at("table"));
        e.gold = gold_from_json(je.at("gold"));
        b.entries.push_back(std::move(e));
    }
    b.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    b.valid_ids = j.at("valid_ids").get<std::vector<std::string>>();
    b.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    b.excluded = j.at("excluded").get<int>();
    return b;
}

DatasetBundle build_dataset(const RunConfig& cfg) {
    const uint64_t task_seed = stage_seed(cfg.seed, "tasks");
    const uint64_t solve_seed = stage_seed(cfg.seed, "solve");
    const uint64_t gold_seed = stage_seed(cfg.seed, "gold");

    std::vector<const TaskTemplate*> templates;
    for (const auto& t : builtin_templates()) {
        if (cfg.template_ids.empty() ||
            std::count(cfg.template_ids.begin(), cfg.template_ids.end(),
                       t.template_id))
            templates.push_back(&t);
    }
    if (templates.empty()) throw std::invalid_argument("no templates selected");

    DatasetBundle bundle;
    for (const TaskTemplate* tmpl : templates) {
        for (int index = 0; index < cfg.tasks_per_template; ++index) {
            const uint64_t tid = static_cast<uint64_t>(tmpl->template_id);
            Task task;
            try {
                task = instantiate(*tmpl, index, task_seed);
            } catch (const TemplateError& e) {
                std::ostringstream os;
                os << "template " << tmpl->template_id << " index " << index
                   << ": " << e.what();
                throw TemplateError(os.str());
            }
            auto solved = solve(task, cfg.solver_budget,
                                mix3(solve_seed, tid, index));
            if (!solved) {
                ++bundle.excluded;
                continue;
            }
            TaskEntry entry;
            entry.task = task;
            entry.action = solved->first;
            const Rollout& ro = solved->second;
            const Scene scene = apply_action(task, entry.action);
            entry.goal_frame = check_goal(ro, task.goal, scene).value();
            entry.events = denoise_window3(extract_events(ro, scene));
            const auto labels = oracle_label(task, entry.action, ro,
                                             entry.events, entry.goal_frame);
            std::vector<CollisionEvent> salient;
            for (const auto& l : labels) {
                entry.labels.push_back(l.salient ? 1 : 0);
                if (l.salient) salient.push_back(entry.events[l.event_index]);
            }
            const auto objects = initial_records(scene);
            entry.table = to_record_table(objects, salient);
            entry.gold = gold_text(objects, salient, mix3(gold_seed, tid, index));
            bundle.entries.push_back(std::move(entry));
        }
    }

    // deterministic Fisher-Yates, then 80/10/10
    std::vector<int> order(bundle.entries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::mt19937_64 rng(stage_seed(cfg.seed, "split"));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng() % (i + 1)]);
    const int n = static_cast<int>(order.size());
    const int n_train = n * 8 / 10;
    const int n_valid = n / 10;
    for (int i = 0; i < n; ++i) {
        const std::string id = bundle.entries[order[i]].task.task_id();
        if (i < n_train) bundle.train_ids.push_back(id);
        else if (i < n_train + n_valid) bundle.valid_ids.push_back(id);
        else bundle.test_ids.push_back(id);
    }
    return bundle;
}

json to_json(const Manifest& m) {
    json j;
    j["version"] = m.version;
    j["root_seed"] = m.root_seed;
    j["config_digest"] = m.config_digest;
    j["stage_seeds"] = m.stage_seeds;
    j["template_ids"] = m.template_ids;
    j["excluded"] = m.excluded;
    j["train_ids"] = m.train_ids;
    j["valid_ids"] = m.valid_ids;
    j["test_ids"] = m.test_ids;
    j["artifacts"] = m.artifacts;
    return j;
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    m.version = j.at("version").get<std::string>();
    m.root_seed = j.at("root_seed").get<uint64_t>();
    m.config_digest = j.at("config_digest").get<std::string>();
    m.stage_seeds = j.at("stage_seeds").get<std::map<std::string, uint64_t>>();
    m.template_ids = j.at("template_ids").get<std::vector<int>>();
    m.excluded = j.at("excluded").get<int>();
    m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    m.valid_ids = j.at("valid_ids").get<std::vector<std::string>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    return m;
}

Manifest make_manifest(const RunConfig& cfg, const DatasetBundle& bundle) {
    Manifest m;
    m.root_seed = cfg.seed;
    m.config_digest = config_hash(cfg);
    for (const auto& s : kStageNames) m.stage_seeds[s] = stage_seed(cfg.seed, s);
    for (const auto& t : builtin_templates())
        if (cfg.template_ids.empty() ||
            std::count(cfg.template_ids.begin(), cfg.template_ids.end(),
                       t.template_id))
            m.template_ids.push_back(t.template_id);
    m.excluded = bundle.excluded;
    m.train_ids = bundle.train_ids;
    m.valid_ids = bundle.valid_ids;
    m.test_ids = bundle.test_ids;
    return m;
}

void event_split(const DatasetBundle& bundle, const std::string& name,
                 std::vector<FeatureVector13>* x, std::vector<int>* y) {
    x->clear();
    y->clear();
    for (const TaskEntry* e : bundle.split(name)) {
        for (size_t i = 0; i < e->events.size(); ++i) {
            x->push_back(featurize(e->events[i]));
            y->push_back(e->labels[i]);
        }
    }
}

ClassifierArtifacts train_classifiers(const DatasetBundle& bundle,
                                      const RunConfig& cfg) {
    std::vector<FeatureVector13> train_x, val_x;
    std::vector<int> train_y, val_y;
    event_split(bundle, "train", &train_x, &train_y);
    event_split(bundle, "valid", &val_x, &val_y);
    ClassifierArtifacts out;
    out.tree = train_tree(train_x, train_y, cfg.tree);
    MlpConfig mc = cfg.mlp;
    mc.seed = stage_seed(cfg.seed, "classifier");
    out.mlp = Mlp::train(train_x, train_y, val_x, val_y, mc);
    return out;
}

std::vector<ObjectRecord> entry_objects(const TaskEntry& entry) {
    return initial_records(apply_action(entry.task, entry.action));
}

RecordTable initial_segment(const RecordTable& table) {
    RecordTable out;
    for (const auto& r : table.records)
        if (r.segment == "INITIAL_STATE") out.records.push_back(r);
    return out;
}

std::vector<TextPair> nlg_pairs(const std::vector<const TaskEntry*>& entries) {
    std::vector<TextPair> pairs;
    for (const TaskEntry* e : entries) {
        pairs.push_back({initial_segment(e->table), e->gold.init_description});
        pairs.push_back({e->table, e->gold.sim_description});
    }
    return pairs;
}

std::vector<Prompt> lm_prompts(const std::vector<const TaskEntry*>& entries) {
    std::vector<Prompt> prompts;
    for (const TaskEntry* e : entries) {
        Prompt init = build_context_init(entry_objects(*e));
        init.target = e->gold.init_description;
        prompts.push_back(std::move(init));
        Prompt sim = build_context_sim(e->gold.init_description);
        sim.target = e->gold.sim_description;
        prompts.push_back(std::move(sim));
    }
    return prompts;
}

NlgArtifacts train_nlg_models(const DatasetBundle& bundle,
                              const RunConfig& cfg) {
    const auto train_pairs = nlg_pairs(bundle.split("train"));
    const auto valid_pairs = nlg_pairs(bundle.split("valid"));
    std::vector<RecordTable> tables;
    std::vector<std::vector<std::string>> texts;
    for (const auto& [table, text] : train_pairs) {
        tables.push_back(table);
        texts.push_back(text);
    }
    NlgArtifacts out;
    out.record_vocab = build_record_vocab(tables);
    out.text_vocab = Vocab::build(texts);

    EntityModelConfig avg_cfg = cfg.nlg;
    avg_cfg.mode = EncoderMode::Avg;
    avg_cfg.seed = stage_seed(cfg.seed, "nlg-avg");
    out.avg = EntityModel::train(train_pairs, valid_pairs, avg_cfg,
                                 out.record_vocab, out.text_vocab);

    EntityModelConfig bi_cfg = cfg.nlg;
    bi_cfg.mode = EncoderMode::BiLstm;
    bi_cfg.seed = stage_seed(cfg.seed, "nlg-bilstm");
    out.bilstm = EntityModel::train(train_pairs, valid_pairs, bi_cfg,
                                    out.record_vocab, out.text_vocab);
    return out;
}

Lm train_lm_model(const DatasetBundle& bundle, const RunConfig& cfg) {
    const auto train_prompts = lm_prompts(bundle.split("train"));
    const auto valid_prompts = lm_prompts(bundle.split("valid"));
    std::vector<std::vector<std::string>> texts;
    for (const auto& p : train_prompts) {
        texts.push_back(p.context);
        texts.push_back(p.target);
    }
    LmConfig lc = cfg.lm;
    lc.seed = stage_seed(cfg.seed, "lm");
    return Lm::train(train_prompts, valid_prompts, lc, Vocab::build(texts));
}

Generations generate_all(const DatasetBundle& bundle, const NlgArtifacts& nlg,
                         const Lm& lm, const RunConfig& cfg) {
    Generations gens;
    std::mt19937_64 rng(stage_seed(cfg.seed, "generate"));
    for (const TaskEntry* e : bundle.split("test")) {
        const RecordTable init_table = initial_segment(e->table);
        gens["avg"]["init"].push_back(nlg.avg.generate(init_table));
        gens["avg"]["sim"].push_back(nlg.avg.generate(e->table));
        gens["bilstm"]["init"].push_back(nlg.bilstm.generate(init_table));
        gens["bilstm"]["sim"].push_back(nlg.bilstm.generate(e->table));
        const Prompt ip = build_context_init(entry_objects(*e));
        gens["lm"]["init"].push_back(
            lm.sample(ip.context, rng, cfg.sample_top_k, cfg.sample_temperature,
                      cfg.sample_max_len));
        const Prompt sp = build_context_sim(e->gold.init_description);
        gens["lm"]["sim"].push_back(
            lm.sample(sp.context, rng, cfg.sample_top_k, cfg.sample_temperature,
                      cfg.sample_max_len));
    }
    return gens;
}

namespace {

json prf_json(const PRF& p) {
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

json evaluate_all(const DatasetBundle& bundle, const Generations& gens,
                  const ClassifierArtifacts& clf,
                  const ConceptLexicon& lexicon) {
    std::vector<FeatureVector13> test_x;
    std::vector<int> test_y;
    event_split(bundle, "test", &test_x, &test_y);
    std::vector<int> all_pos(test_y.size(), 1), tree_pred, mlp_pred;
    for (const auto& x : test_x) {
        tree_pred.push_back(clf.tree.predict(x) ? 1 : 0);
        mlp_pred.push_back(clf.mlp.predict(x) ? 1 : 0);
    }
    json clf_report;
    clf_report["baseline"] = prf_json(evaluate_prf(all_pos, test_y));
    clf_report["tree"] = prf_json(evaluate_prf(tree_pred, test_y));
    clf_report["mlp"] = prf_json(evaluate_prf(mlp_pred, test_y));

    std::vector<TokenSeq> init_refs, sim_refs;
    for (const TaskEntry* e : bundle.split("test")) {
        init_refs.push_back(e->gold.init_description);
        sim_refs.push_back(e->gold.sim_description);
    }
    json gen_report;
    for (const auto& [model, tasks] : gens) {
        for (const auto& [task, cands] : tasks) {
            const auto& refs = task == "init" ? init_refs : sim_refs;
            gen_report[model][task] =
                to_json(evaluate_texts(cands, refs, lexicon));
        }
    }
    return {{"classification", clf_report}, {"generation", gen_report}};
}

std::string format_report(const json& evaluation) {
    std::ostringstream os;
    os << "pivotal-event classification (test events)\n";
    char line[160];
    std::snprintf(line, sizeof(line), "  %-10s %9s %9s %9s\n", "model",
                  "precision", "recall", "f1");
    os << line;
    for (const auto& name : {"baseline", "tree", "mlp"}) {
        const auto& p = evaluation.at("classification").at(name);
        std::snprintf(line, sizeof(line), "  %-10s %9.4f %9.4f %9.4f\n", name,
                      p.at("precision").get<double>(),
                      p.at("recall").get<double>(), p.at("f1").get<double>());
        os << line;
    }
    os << "\ngeneration metrics (test split)\n";
    std::snprintf(line, sizeof(line),
                  "  %-8s %-5s %7s %7s %7s %7s  %s\n", "model", "task", "bleu1",
                  "bleu2", "rougeL", "meteor", "coverage g/f/c");
    os << line;
    for (const auto& [model, tasks] : evaluation.at("generation").items()) {
        for (const auto& [task, r] : tasks.items()) {
            std::snprintf(
                line, sizeof(line),
                "  %-8s %-5s %7.4f %7.4f %7.4f %7.4f  %d/%d/%d\n",
                model.c_str(), task.c_str(), r.at("bleu1").get<double>(),
                r.at("bleu2").get<double>(), r.at("rouge_l").get<double>(),
                r.at("meteor").get<double>(),
                r.at("coverage").at("gravity").get<int>(),
                r.at("coverage").at("friction").get<int>(),
                r.at("coverage").at("collision").get<int>());
            os << line;
        }
    }
    return os.str();
}

namespace {

Scene scene_at_frame(const Scene& start, const Rollout& ro, int frame) {
    Scene s = start;
    if (frame < 0 || frame >= static_cast<int>(ro.frames.size())) return s;
    for (const auto& snap : ro.frames[frame].dynamic_bodies) {
        Body* b = s.find(snap.id);
        if (!b) continue;
        b->position = snap.position;
        b->velocity = snap.velocity;
        b->angle = snap.angle;
    }
    return s;
}

}  // namespace

Image render_strip(const TaskEntry& entry) {
    const Scene start = apply_action(entry.task, entry.action);
    const Rollout ro = simulate(start, kMaxSteps);
    std::vector<Image> panels;
    panels.push_back(render_scene(start));
    for (size_t i = 0; i < entry.events.size(); ++i)
        if (entry.labels[i])
            panels.push_back(
                render_scene(scene_at_frame(start, ro, entry.events[i].timestep)));
    panels.push_back(render_scene(scene_at_frame(start, ro, entry.goal_frame)));
    return concat_strip(panels);
}

std::vector<Image> render_frames(const TaskEntry& entry, int stride) {
    if (stride <= 0) throw std::invalid_argument("stride must be positive");
    const Scene start = apply_action(entry.task, entry.action);
    const Rollout ro = simulate(start, kMaxSteps);
    std::vector<Image> out;
    const int last = entry.goal_frame >= 0
                         ? entry.goal_frame
                         : static_cast<int>(ro.frames.size()) - 1;
    for (int t = 0; t <= last; t += stride)
        out.push_back(render_scene(scene_at_frame(start, ro, t)));
    if ((last % stride) != 0)
        out.push_back(render_scene(scene_at_frame(start, ro, last)));
    return out;
}

}  // namespace esprit
