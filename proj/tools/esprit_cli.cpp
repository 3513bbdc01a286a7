#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "esprit/pipeline.hpp"
#include "esprit/weights_io.hpp"

namespace fs = std::filesystem;
using namespace esprit;

namespace {

struct Paths {
    fs::path run;
    fs::path manifest() const { return run / "manifest.json"; }
    fs::path bundle() const { return run / "dataset" / "bundle.json"; }
    fs::path tree() const { return run / "classifier" / "tree.json"; }
    fs::path mlp() const { return run / "classifier" / "mlp.json"; }
    fs::path nlg(const std::string& m) const { return run / "nlg" / (m + ".json"); }
    fs::path lm() const { return run / "lm" / "lm.json"; }
    fs::path gen(const std::string& model, const std::string& task) const {
        return run / "generate" / (model + "_" + task + ".txt");
    }
    fs::path report() const { return run / "evaluate" / "report.json"; }
};

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return run_config_from_json(read_json_file(path));
}

DatasetBundle load_bundle(const Paths& p) {
    try {
        return bundle_from_json(read_json_file(p.bundle().string()));
    } catch (const MissingArtifact&) {
        throw MissingArtifact("stage build-dataset has not run (missing " +
                              p.bundle().string() + ")");
    }
}

void update_manifest(const Paths& p, const RunConfig& cfg,
                     const DatasetBundle& bundle, const std::string& stage,
                     const std::vector<std::string>& artifacts) {
    Manifest m = fs::exists(p.manifest())
                     ? manifest_from_json(read_json_file(p.manifest().string()))
                     : make_manifest(cfg, bundle);
    for (const auto& a : artifacts) m.artifacts[stage] = a;
    write_json_file(p.manifest().string(), to_json(m));
}

std::vector<std::string> detokenized(const std::vector<TokenSeq>& texts) {
    std::vector<std::string> lines;
    for (const auto& t : texts) lines.push_back(join_tokens(t));
    return lines;
}

NlgArtifacts load_nlg(const Paths& p) {
    NlgArtifacts nlg;
    nlg.avg = EntityModel::from_json(read_json_file(p.nlg("avg").string()));
    nlg.bilstm = EntityModel::from_json(read_json_file(p.nlg("bilstm").string()));
    return nlg;
}

int run(int argc, char** argv) {
    CLI::App app{"physics-puzzle description pipeline"};
    app.require_subcommand(1);

    std::string config_path, run_dir = "run";
    app.add_option("--config", config_path, "declarative run config (json)");
    app.add_option("--run-dir", run_dir, "output directory for all stages");

    auto* cmd_build = app.add_subcommand(
        "build-dataset", "instantiate, solve, label, and split tasks");
    auto* cmd_clf = app.add_subcommand(
        "train-classifier", "train the decision tree and the mlp");
    auto* cmd_nlg = app.add_subcommand(
        "train-nlg", "train the avg and bilstm table-to-text models");
    auto* cmd_lm = app.add_subcommand("train-lm", "train the causal lm");
    auto* cmd_gen = app.add_subcommand(
        "generate", "generate test-split descriptions with every model");
    std::string records_path, weights_path;
    cmd_gen->add_option("--records", records_path,
                        "generate from one value|entity|type|segment file");
    cmd_gen->add_option("--weights", weights_path,
                        "table-to-text weight file used with --records");
    auto* cmd_eval = app.add_subcommand(
        "evaluate", "score generations and classifiers on the test split");
    std::string lexicon_dir;
    cmd_eval->add_option("--lexicon-dir", lexicon_dir,
                         "directory of <concept>.txt word lists");
    auto* cmd_render = app.add_subcommand("render", "rasterize one task");
    std::string task_id, mode = "strip";
    int stride = 60;
    cmd_render->add_option("--task", task_id, "task id, e.g. 00001:007")
        ->required();
    cmd_render->add_option("--mode", mode, "frames or strip");
    cmd_render->add_option("--stride", stride, "frame step in frames mode");
    auto* cmd_report = app.add_subcommand(
        "report", "print the evaluation tables");

    CLI11_PARSE(app, argc, argv);

    const RunConfig cfg = load_config(config_path);
    Paths p{fs::path(run_dir)};

    if (cmd_build->parsed()) {
        const DatasetBundle bundle = build_dataset(cfg);
        fs::create_directories(p.bundle().parent_path());
        write_json_file(p.bundle().string(), to_json(bundle));
        update_manifest(p, cfg, bundle, "build-dataset", {"dataset/bundle.json"});
        std::cout << "solved " << bundle.entries.size() << " tasks, excluded "
                  << bundle.excluded << " (train/valid/test "
                  << bundle.train_ids.size() << "/" << bundle.valid_ids.size()
                  << "/" << bundle.test_ids.size() << ")\n";
    } else if (cmd_clf->parsed()) {
        const DatasetBundle bundle = load_bundle(p);
        const ClassifierArtifacts clf = train_classifiers(bundle, cfg);
        fs::create_directories(p.tree().parent_path());
        write_json_file(p.tree().string(), to_json(clf.tree));
        write_json_file(p.mlp().string(), clf.mlp.to_json());
        update_manifest(p, cfg, bundle, "train-classifier",
                        {"classifier/tree.json", "classifier/mlp.json"});
        std::cout << "wrote " << p.tree() << " and " << p.mlp() << "\n";
    } else if (cmd_nlg->parsed()) {
        const DatasetBundle bundle = load_bundle(p);
        const NlgArtifacts nlg = train_nlg_models(bundle, cfg);
        fs::create_directories(p.nlg("avg").parent_path());
        write_json_file(p.nlg("avg").string(), nlg.avg.to_json());
        write_json_file(p.nlg("bilstm").string(), nlg.bilstm.to_json());
        update_manifest(p, cfg, bundle, "train-nlg",
                        {"nlg/avg.json", "nlg/bilstm.json"});
        std::cout << "wrote " << p.nlg("avg") << " and " << p.nlg("bilstm")
                  << "\n";
    } else if (cmd_lm->parsed()) {
        const DatasetBundle bundle = load_bundle(p);
        const Lm lm = train_lm_model(bundle, cfg);
        fs::create_directories(p.lm().parent_path());
        write_json_file(p.lm().string(), lm.to_json());
        update_manifest(p, cfg, bundle, "train-lm", {"lm/lm.json"});
        std::cout << "wrote " << p.lm() << "\n";
    } else if (cmd_gen->parsed()) {
        if (!records_path.empty()) {
            if (weights_path.empty())
                throw std::runtime_error("--records requires --weights");
            const json w = read_json_file(weights_path);
            if (weight_format(w) != "entity-model-v1")
                throw std::runtime_error("--weights is not a table-to-text model");
            const EntityModel model = EntityModel::from_json(w);
            std::string text;
            for (const auto& line : read_lines(records_path))
                text += line + "\n";
            std::cout << join_tokens(
                             model.generate(record_table_from_pipe(text)))
                      << "\n";
            return 0;
        }
        const DatasetBundle bundle = load_bundle(p);
        const NlgArtifacts nlg = load_nlg(p);
        const Lm lm = Lm::from_json(read_json_file(p.lm().string()));
        const Generations gens = generate_all(bundle, nlg, lm, cfg);
        fs::create_directories(p.gen("lm", "init").parent_path());
        std::vector<std::string> written;
        for (const auto& [model, tasks] : gens) {
            for (const auto& [task, texts] : tasks) {
                write_lines(p.gen(model, task).string(), detokenized(texts));
                written.push_back("generate/" + model + "_" + task + ".txt");
            }
        }
        update_manifest(p, cfg, bundle, "generate", written);
        std::cout << "wrote " << written.size() << " generation files\n";
    } else if (cmd_eval->parsed()) {
        const DatasetBundle bundle = load_bundle(p);
        ClassifierArtifacts clf;
        clf.tree = tree_from_json(read_json_file(p.tree().string()));
        clf.mlp = Mlp::from_json(read_json_file(p.mlp().string()));
        Generations gens;
        for (const auto& model : {"lm", "avg", "bilstm"}) {
            for (const auto& task : {"init", "sim"}) {
                for (const auto& line :
                     read_lines(p.gen(model, task).string()))
                    gens[model][task].push_back(tokenize_text(line));
            }
        }
        ConceptLexicon lexicon = ConceptLexicon::defaults();
        if (!lexicon_dir.empty()) {
            for (auto& [name, words] : lexicon.concepts) {
                const fs::path f = fs::path(lexicon_dir) / (name + ".txt");
                if (fs::exists(f))
                    lexicon.set_concept(name, read_lines(f.string()));
            }
        }
        const json report = evaluate_all(bundle, gens, clf, lexicon);
        fs::create_directories(p.report().parent_path());
        write_json_file(p.report().string(), report);
        update_manifest(p, cfg, bundle, "evaluate", {"evaluate/report.json"});
        std::cout << format_report(report);
    } else if (cmd_render->parsed()) {
        const DatasetBundle bundle = load_bundle(p);
        const TaskEntry* entry = bundle.find(task_id);
        if (!entry) throw std::runtime_error("unknown task id: " + task_id);
        const fs::path dir = p.run / "render";
        fs::create_directories(dir);
        if (mode == "strip") {
            const fs::path out = dir / (task_id + "_strip.ppm");
            render_strip(*entry).write_ppm(out.string());
            std::cout << "wrote " << out << "\n";
        } else if (mode == "frames") {
            const auto frames = render_frames(*entry, stride);
            for (size_t i = 0; i < frames.size(); ++i) {
                char name[64];
                std::snprintf(name, sizeof(name), "%s_f%03zu.ppm",
                              task_id.c_str(), i);
                frames[i].write_ppm((dir / name).string());
            }
            std::cout << "wrote " << frames.size() << " frames to " << dir
                      << "\n";
        } else {
            throw std::runtime_error("mode must be frames or strip");
        }
    } else if (cmd_report->parsed()) {
        std::cout << format_report(read_json_file(p.report().string()));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
