// ecgformer command line: dataset synthesis, fold splitting, training,
// evaluation, score-only reporting, attention export, and the gradient
// suite. Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ecgformer/config.hpp"
#include "ecgformer/dataset.hpp"
#include "ecgformer/export.hpp"
#include "ecgformer/gradsuite.hpp"
#include "ecgformer/metrics.hpp"
#include "ecgformer/synth.hpp"
#include "ecgformer/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecgformer;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spew(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

std::string stem_of(const std::string& path) {
    return fs::path(path).stem().string();
}

std::string default_root(const std::string& manifest_path) {
    const std::string dir = fs::path(manifest_path).parent_path().string();
    return dir.empty() ? "." : dir;
}

void cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    const SyntheticSpec spec = synth_spec_from_json(slurp(spec_path));
    const std::vector<Recording> recs = synth_generate(spec);
    fs::create_directories(out_dir);
    DatasetManifest manifest;
    for (const auto& c : spec.classes) manifest.class_names.push_back(c.name);
    for (const auto& rec : recs) {
        save_recording(rec, out_dir + "/" + rec.id + ".json");
        manifest.entries.push_back(ManifestEntry{rec.id + ".json", rec.labels, -1});
    }
    save_manifest(manifest, out_dir + "/manifest.jsonl");
    save_class_list(manifest.class_names, out_dir + "/classes.txt");
    std::cout << json{{"recordings", recs.size()}, {"out", out_dir}}.dump() << "\n";
}

void cmd_split(const std::string& manifest_path, int folds, uint64_t seed,
               std::string out_path) {
    if (out_path.empty()) out_path = manifest_path;
    const DatasetManifest m = split_folds(load_manifest(manifest_path), folds, seed);
    save_manifest(m, out_path);
    std::vector<size_t> sizes(folds, 0);
    for (const auto& e : m.entries) sizes[e.fold]++;
    std::cout << json{{"folds", sizes}, {"out", out_path}}.dump() << "\n";
}

void cmd_train(const std::string& config_path, const std::string& manifest_path,
               std::string data_root, const std::string& out_dir,
               const std::string& resume) {
    const TrainConfig cfg = train_config_from_json(slurp(config_path));
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (data_root.empty()) data_root = default_root(manifest_path);
    const TrainResult res = train(cfg, manifest, data_root, out_dir, resume);
    std::cout << json{{"final_loss", res.final_loss},
                      {"epochs_run", res.epochs_run},
                      {"checkpoint", res.checkpoint_path},
                      {"log", res.log_path}}
                     .dump()
              << "\n";
}

void cmd_eval(const std::string& ckpt, const std::string& manifest_path,
              std::string data_root, int fold, const std::string& weights_path,
              const std::string& report_path, const std::string& pred_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (data_root.empty()) data_root = default_root(manifest_path);
    WeightMatrix wm;
    const WeightMatrix* wm_ptr = nullptr;
    if (!weights_path.empty()) {
        wm = load_weight_matrix(weights_path);
        wm_ptr = &wm;
    }
    Predictions preds;
    EvalReport report = evaluate(ckpt, manifest, data_root, fold, wm_ptr, &preds);
    if (!weights_path.empty()) report.weight_source = weights_path;
    if (!pred_path.empty()) save_predictions(preds, pred_path);
    const std::string text = report.to_json_string();
    if (!report_path.empty()) spew(report_path, text + "\n");
    std::cout << text << "\n";
}

void cmd_score(const std::string& pred_path, const std::string& manifest_path,
               const std::string& weights_path, const std::string& report_path) {
    const Predictions preds = load_predictions(pred_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const WeightMatrix wm = load_weight_matrix(weights_path);
    const size_t n = wm.n();
    if (preds.class_names.size() != n)
        throw ValueError("predictions have " +
                         std::to_string(preds.class_names.size()) +
                         " classes, weight matrix has " + std::to_string(n));
    std::map<std::string, const std::vector<int>*> by_id;
    for (const auto& e : manifest.entries) by_id[stem_of(e.path)] = &e.labels;
    std::vector<std::vector<int>> truth;
    for (const auto& id : preds.ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw ValueError("prediction id '" + id + "' is not in the manifest");
        truth.push_back(*it->second);
    }
    const EvalReport report =
        evaluate_scores(preds.scores, truth, n, wm.w, weights_path);
    const std::string text = report.to_json_string();
    if (!report_path.empty()) spew(report_path, text + "\n");
    std::cout << text << "\n";
}

void cmd_export(const std::string& ckpt, std::string recording_path,
                const std::string& data_root, const std::string& id,
                const std::string& out_dir, const std::string& classes_path) {
    if (recording_path.empty()) {
        if (data_root.empty() || id.empty())
            throw ValueError("give --recording, or --data-root with --id");
        recording_path = data_root + "/" + id + ".json";
    }
    const Recording rec = load_recording(recording_path);
    std::vector<std::string> class_names;
    if (!classes_path.empty()) class_names = load_class_list(classes_path);
    const auto files = export_attention(ckpt, rec, out_dir, class_names);
    std::cout << json{{"files", files.size()}, {"out", out_dir}}.dump() << "\n";
}

int cmd_gradcheck(uint64_t seed, size_t instances) {
    const GradSuiteResult res = run_gradient_suite(seed, instances);
    for (const auto& e : res.entries)
        std::printf("%-28s instances=%zu max_rel_err=%.3e tol=%.0e %s\n",
                    e.name.c_str(), e.instances, e.max_rel_err, e.tolerance,
                    e.pass ? "PASS" : "FAIL");
    std::printf("gradient suite: %s\n", res.all_pass() ? "PASS" : "FAIL");
    return res.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ecgformer: hierarchical ECG transformer toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string synth_spec, synth_out;
    synth->add_option("--spec", synth_spec, "SyntheticSpec JSON file")->required();
    synth->add_option("--out", synth_out, "output dataset directory")->required();

    auto* split = app.add_subcommand("split", "Assign cross-validation folds");
    std::string split_manifest, split_out;
    int split_folds_n = 5;
    uint64_t split_seed = 0;
    split->add_option("--manifest", split_manifest, "manifest JSONL")->required();
    split->add_option("--folds", split_folds_n, "number of folds");
    split->add_option("--seed", split_seed, "shuffle seed");
    split->add_option("--out", split_out, "output manifest (default: in place)");

    auto* train_cmd = app.add_subcommand("train", "Train a model");
    std::string train_config, train_manifest, train_root, train_out, train_resume;
    train_cmd->add_option("--config", train_config, "TrainConfig JSON file")
        ->required();
    train_cmd->add_option("--manifest", train_manifest, "manifest JSONL")->required();
    train_cmd->add_option("--data-root", train_root,
                          "recording root (default: manifest directory)");
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_manifest, eval_root, eval_weights, eval_report,
        eval_preds;
    int eval_fold = -1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "manifest JSONL")->required();
    eval_cmd->add_option("--data-root", eval_root,
                         "recording root (default: manifest directory)");
    eval_cmd->add_option("--fold", eval_fold, "fold to evaluate (-1 = all)");
    eval_cmd->add_option("--weights", eval_weights, "weight matrix CSV");
    eval_cmd->add_option("--report", eval_report, "write report JSON here");
    eval_cmd->add_option("--predictions", eval_preds, "write predictions CSV here");

    auto* score = app.add_subcommand("score", "Score a predictions CSV");
    std::string score_preds, score_manifest, score_weights, score_report;
    score->add_option("--predictions", score_preds, "predictions CSV")->required();
    score->add_option("--manifest", score_manifest, "manifest JSONL")->required();
    score->add_option("--weights", score_weights, "weight matrix CSV")->required();
    score->add_option("--report", score_report, "write report JSON here");

    auto* exp = app.add_subcommand("export-attn", "Export attention maps");
    std::string exp_ckpt, exp_recording, exp_root, exp_id, exp_out, exp_classes;
    exp->add_option("--checkpoint", exp_ckpt, "checkpoint file")->required();
    exp->add_option("--recording", exp_recording, "recording header JSON");
    exp->add_option("--data-root", exp_root, "recording root, used with --id");
    exp->add_option("--id", exp_id, "recording id, used with --data-root");
    exp->add_option("--out", exp_out, "output directory")->required();
    exp->add_option("--classes", exp_classes, "class list for attribution rows");

    auto* grad = app.add_subcommand("gradcheck", "Run the gradient suite");
    uint64_t grad_seed = 0;
    size_t grad_instances = 50;
    grad->add_option("--seed", grad_seed, "suite seed");
    grad->add_option("--instances", grad_instances, "instances per check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) cmd_synth(synth_spec, synth_out);
        else if (split->parsed())
            cmd_split(split_manifest, split_folds_n, split_seed, split_out);
        else if (train_cmd->parsed())
            cmd_train(train_config, train_manifest, train_root, train_out,
                      train_resume);
        else if (eval_cmd->parsed())
            cmd_eval(eval_ckpt, eval_manifest, eval_root, eval_fold, eval_weights,
                     eval_report, eval_preds);
        else if (score->parsed())
            cmd_score(score_preds, score_manifest, score_weights, score_report);
        else if (exp->parsed())
            cmd_export(exp_ckpt, exp_recording, exp_root, exp_id, exp_out,
                       exp_classes);
        else if (grad->parsed())
            return cmd_gradcheck(grad_seed, grad_instances);
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
