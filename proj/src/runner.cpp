#include "runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "chains.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "threads.hpp"
#include "version.hpp"

namespace lexchain {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void ensure_out_dir(const std::string &out_dir, bool force) {
    std::error_code ec;
    if (fs::exists(out_dir, ec)) {
        if (!fs::is_directory(out_dir, ec))
            throw IoError("output path " + out_dir + " exists and is not a directory");
        if (!fs::is_empty(out_dir, ec) && !force)
            throw IoError("output directory " + out_dir +
                          " is not empty (pass force to overwrite)");
    } else {
        fs::create_directories(out_dir, ec);
        if (ec)
            throw IoError("cannot create output directory " + out_dir + ": " +
                          ec.message());
    }
}

void write_text(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

// Every run records its resolved configuration before doing work, so the
// run is reproducible from the manifest alone.
void write_manifest(const std::string &out_dir, const RunConfig &cfg,
                    const std::string &subcommand, const json &inputs) {
    json j;
    j["tool"] = "lexchain";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["output_dir"] = out_dir;
    j["inputs"] = inputs;
    json snapshot;
    for (const auto &[key, value] : cfg.snapshot()) snapshot[key] = value;
    j["config"] = std::move(snapshot);
    write_text(out_dir + "/run_manifest.json", j.dump(2) + "\n");
}

struct LoadedModel {
    Model model;
    CheckpointMeta meta;
    Vocab vocab;
    LabelSpace space;
};

LoadedModel load_model_dir(const std::string &model_dir) {
    CheckpointMeta meta;
    Model model = load_checkpoint(model_dir + "/best.ckpt", meta);
    Vocab vocab = Vocab::load(model_dir + "/tokens.vocab");
    if (vocab.hash() != meta.vocab_hash)
        throw DataError(model_dir + ": token vocab hash mismatch with checkpoint");
    LabelSpace space = LabelSpace::load(model_dir);
    if (space.hash() != meta.label_hash)
        throw DataError(model_dir + ": label vocab hash mismatch with checkpoint");
    return LoadedModel{std::move(model), std::move(meta), std::move(vocab),
                       std::move(space)};
}

std::vector<CaseRecord> load_eval_cases(const std::string &data_path,
                                        const LabelSpace &space) {
    std::string path = data_path;
    std::error_code ec;
    if (fs::is_directory(data_path, ec)) path = data_path + "/test.jsonl";
    return load_corpus(path, space);
}

// Vocabulary sources: every training input and target the model will see.
Vocab build_token_vocab(const RunConfig &cfg, const std::vector<CaseRecord> &train_cases,
                        const LabelSpace &space) {
    std::vector<std::string> documents;
    for (const auto &rec : train_cases) {
        documents.push_back(rec.fact);
        documents.push_back(render_case_relationships(rec, space));
        for (const auto &d : rec.defendants) {
            documents.push_back(d.name);
            documents.push_back(render_circumstance_set(d.gold.circumstances, space));
            documents.push_back(render_judgment(d.gold, Task::forward_judgment, space));
        }
    }
    std::vector<std::string> required;
    for (const auto &p : cfg.prompts.all()) required.push_back(p);
    // Label surfaces must be emittable even if rare in the sampled split.
    for (const auto &v : {&space.articles, &space.charges, &space.penalties,
                          &space.relationships, &space.circumstances})
        for (const auto &s : v->surfaces()) required.push_back(s);
    required.push_back(std::string(kGroupDelim));
    required.push_back(std::string(kItemDelim));
    required.push_back(std::string(kClauseDelim));
    return Vocab::build(documents, cfg.model.vocab_size, required);
}

json outcome_to_json(const TrainOutcome &outcome) {
    json j;
    j["best_checkpoint"] = outcome.checkpoint_path;
    j["best_val_mean_f1"] = outcome.best_val_metric;
    j["best_val_step"] = outcome.best_val_step;
    j["steps"] = outcome.steps;
    j["last_total_loss"] = outcome.last_total_loss;
    return j;
}

void train_into(const RunConfig &cfg, const std::string &variant,
                const std::vector<CaseRecord> &train_cases,
                const std::vector<CaseRecord> &val_cases, const LabelSpace &space,
                const std::string &out_dir) {
    ChainSettings settings = ChainSettings::for_variant(variant_from_name(variant));
    cfg.prompts.validate();
    Vocab vocab = build_token_vocab(cfg, train_cases, space);
    vocab.save(out_dir + "/tokens.vocab");
    space.save(out_dir);

    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    Model model(mc);
    model.init_weights();

    CheckpointMeta meta;
    meta.vocab_hash = vocab.hash();
    meta.label_hash = space.hash();
    meta.ablation = variant;
    meta.prompts = cfg.prompts;

    std::ofstream log(out_dir + "/train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write training log in " + out_dir);
    TrainOutcome outcome =
        train_model(model, cfg.train, settings, cfg.prompts, train_cases, val_cases,
                    vocab, space, meta, out_dir, &log, default_thread_count());
    write_text(out_dir + "/train_summary.json", outcome_to_json(outcome).dump(2) + "\n");
}

MetricReport eval_into(const RunConfig &cfg, const std::string &model_dir,
                       const std::string &data_path, bool gold_intermediates,
                       const std::string &out_dir) {
    (void)cfg;
    LoadedModel loaded = load_model_dir(model_dir);
    std::vector<CaseRecord> cases = load_eval_cases(data_path, loaded.space);
    ChainContext ctx{loaded.model, loaded.vocab, loaded.space, loaded.meta.prompts,
                     ChainSettings::for_variant(variant_from_name(loaded.meta.ablation))};
    EvalResult result =
        evaluate_cases(ctx, cases, gold_intermediates, default_thread_count());
    write_text(out_dir + "/metrics.json", result.report.to_json() + "\n");
    write_text(out_dir + "/metrics.txt", result.report.to_text());
    save_predictions(result.predictions, loaded.space, out_dir + "/predictions.jsonl");
    return result.report;
}

} // namespace

void op_gen_data(const RunConfig &cfg, const std::string &out_dir, bool force) {
    cfg.validate();
    ensure_out_dir(out_dir, force);
    write_manifest(out_dir, cfg, "gen-data",
                   json{{"seed", cfg.gen.seed}, {"cases", cfg.gen.n_cases}});
    SynthCorpus corpus = generate_corpus(cfg.gen);
    save_corpus(corpus.train, out_dir + "/train.jsonl", corpus.space);
    save_corpus(corpus.val, out_dir + "/val.jsonl", corpus.space);
    save_corpus(corpus.test, out_dir + "/test.jsonl", corpus.space);
    corpus.space.save(out_dir);
    corpus.rules.save(out_dir + "/rule_table.json");
    if (!corpus.warnings.empty()) {
        std::string text;
        for (const auto &w : corpus.warnings) text += w + "\n";
        write_text(out_dir + "/warnings.txt", text);
    }
}

void op_train(const RunConfig &cfg, const std::string &data_dir,
              const std::string &out_dir, bool force) {
    cfg.validate();
    ensure_out_dir(out_dir, force);
    write_manifest(out_dir, cfg, "train", json{{"data_dir", data_dir}});
    LabelSpace space = LabelSpace::load(data_dir);
    std::vector<CaseRecord> train_cases = load_corpus(data_dir + "/train.jsonl", space);
    std::vector<CaseRecord> val_cases = load_corpus(data_dir + "/val.jsonl", space);
    train_into(cfg, cfg.ablation, train_cases, val_cases, space, out_dir);
}

void op_eval(const RunConfig &cfg, const std::string &model_dir,
             const std::string &data_path, bool gold_intermediates,
             const std::string &out_dir, bool force) {
    ensure_out_dir(out_dir, force);
    write_manifest(out_dir, cfg, "eval",
                   json{{"model_dir", model_dir},
                        {"data_path", data_path},
                        {"gold_intermediates", gold_intermediates}});
    eval_into(cfg, model_dir, data_path, gold_intermediates, out_dir);
}

void op_predict(const RunConfig &cfg, const std::string &model_dir,
                const std::string &case_file, const std::string &out_dir, bool force) {
    ensure_out_dir(out_dir, force);
    write_manifest(out_dir, cfg, "predict",
                   json{{"model_dir", model_dir}, {"case_file", case_file}});
    LoadedModel loaded = load_model_dir(model_dir);
    std::vector<CaseRecord> cases = load_corpus(case_file, loaded.space);
    ChainContext ctx{loaded.model, loaded.vocab, loaded.space, loaded.meta.prompts,
                     ChainSettings::for_variant(variant_from_name(loaded.meta.ablation))};
    std::vector<CaseChains> predictions(cases.size());
    for (size_t i = 0; i < cases.size(); ++i)
        predictions[i] = run_case(ctx, cases[i], /*gold_intermediates=*/false);
    save_predictions(predictions, loaded.space, out_dir + "/predictions.jsonl");
}

void op_ablate(const RunConfig &cfg, const std::string &data_dir,
               const std::string &out_dir, bool force) {
    cfg.validate();
    ensure_out_dir(out_dir, force);
    write_manifest(out_dir, cfg, "ablate", json{{"data_dir", data_dir}});
    LabelSpace space = LabelSpace::load(data_dir);
    std::vector<CaseRecord> train_cases = load_corpus(data_dir + "/train.jsonl", space);
    std::vector<CaseRecord> val_cases = load_corpus(data_dir + "/val.jsonl", space);

    json table = json::array();
    std::string text;
    for (Variant v : {Variant::full, Variant::no_relationships, Variant::no_circumstances,
                      Variant::no_forward, Variant::no_backward, Variant::no_chains}) {
        std::string name = variant_name(v);
        std::string vdir = out_dir + "/" + name;
        std::string tdir = vdir + "/train";
        std::string edir = vdir + "/eval";
        std::error_code ec;
        fs::create_directories(tdir, ec);
        fs::create_directories(edir, ec);
        train_into(cfg, name, train_cases, val_cases, space, tdir);
        MetricReport report = eval_into(cfg, tdir, data_dir, false, edir);
        json row;
        row["variant"] = name;
        row["mean_judgment_f1"] = report.mean_judgment_f1();
        for (const auto &task : MetricReport::task_order()) {
            auto it = report.tasks.find(task);
            if (it == report.tasks.end()) continue;
            row[task] = {{"accuracy", it->second.accuracy},
                         {"macro_f1", it->second.macro_f1}};
        }
        table.push_back(std::move(row));
        text += "== " + name + "\n" + report.to_text() + "\n";
    }
    write_text(out_dir + "/ablation.json", table.dump(2) + "\n");
    write_text(out_dir + "/ablation.txt", text);
}

void op_report(const std::vector<std::string> &run_dirs, const std::string &out_dir,
               bool force) {
    ensure_out_dir(out_dir, force);
    // Reports carry no configuration of their own.
    RunConfig cfg;
    json inputs = json::array();
    for (const auto &d : run_dirs) inputs.push_back(d);
    write_manifest(out_dir, cfg, "report", json{{"run_dirs", inputs}});

    json rows = json::array();
    std::string text;
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %10s %10s %10s %10s\n", "run", "articleF1",
                  "chargeF1", "penaltyF1", "meanF1");
    text += line;
    for (const auto &dir : run_dirs) {
        std::string metrics_path = dir + "/metrics.json";
        if (!fs::exists(metrics_path))
            throw IoError("run directory " + dir + " has no metrics.json");
        MetricReport report = MetricReport::from_json_file(metrics_path);
        json row;
        row["run"] = dir;
        row["mean_judgment_f1"] = report.mean_judgment_f1();
        auto f1_of = [&report](const char *task) {
            auto it = report.tasks.find(task);
            return it == report.tasks.end() ? 0.0 : it->second.macro_f1;
        };
        row["articles_f1"] = f1_of("articles");
        row["charges_f1"] = f1_of("charges");
        row["penalty_f1"] = f1_of("penalty");
        rows.push_back(row);
        std::snprintf(line, sizeof line, "%-40s %10.2f %10.2f %10.2f %10.2f\n",
                      dir.c_str(), f1_of("articles"), f1_of("charges"), f1_of("penalty"),
                      report.mean_judgment_f1());
        text += line;
    }
    write_text(out_dir + "/report.json", rows.dump(2) + "\n");
    write_text(out_dir + "/report.txt", text);
}

} // namespace lexchain
