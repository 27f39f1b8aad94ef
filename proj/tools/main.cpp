// lexchain CLI: data generation, training, evaluation, prediction,
// ablation and reporting for the chained-reasoning judgment model. Talks
// to the engine exclusively through the public C API.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lexchain/lexchain.h"

namespace {

struct ConfigHandle {
    lex_config *ptr = nullptr;
    ~ConfigHandle() { lex_config_free(ptr); }
};

int fail(lex_status status) {
    std::cerr << "error (" << lex_status_name(status) << "): " << lex_last_error()
              << "\n";
    return static_cast<int>(status);
}

// LEXCHAIN_OUTPUT_ROOT prefixes relative output paths.
std::string resolve_out(const std::string &out) {
    const char *root = std::getenv("LEXCHAIN_OUTPUT_ROOT");
    if (!root || !*root || out.empty() || out.front() == '/') return out;
    return std::string(root) + "/" + out;
}

lex_status open_config(const std::string &path, ConfigHandle &handle) {
    return path.empty() ? lex_config_create(&handle.ptr)
                        : lex_config_open(path.c_str(), &handle.ptr);
}

void print_warnings(const std::string &out_dir) {
    std::ifstream warn(out_dir + "/warnings.txt");
    std::string line;
    while (std::getline(warn, line))
        if (!line.empty()) std::cerr << "warning: " << line << "\n";
}

void print_file(const std::string &path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) std::cout << line << "\n";
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"multi-defendant judgment prediction with chained seq2seq reasoning"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lex_version()));

    std::string config_path, data, model_dir, out, cases;
    std::vector<std::string> run_dirs;
    bool force = false, gold = false;

    auto add_common = [&](CLI::App *cmd, bool config_required) {
        auto *opt = cmd->add_option("-c,--config", config_path, "run config file");
        if (config_required) opt->required();
        cmd->add_option("-o,--out", out, "output directory")->required();
        cmd->add_flag("--force", force, "allow writing into a non-empty directory");
    };

    CLI::App *gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen, true);

    CLI::App *train = app.add_subcommand("train", "train a model on a data directory");
    add_common(train, true);
    train->add_option("-d,--data", data, "data directory from gen-data")->required();

    CLI::App *eval = app.add_subcommand("eval", "evaluate a trained model");
    add_common(eval, false);
    eval->add_option("-m,--model", model_dir, "training run directory")->required();
    eval->add_option("-d,--data", data, "corpus file or data directory")->required();
    eval->add_flag("--gold-intermediate", gold,
                   "feed gold relationship/circumstance sequences to the "
                   "judgment chains");

    CLI::App *predict = app.add_subcommand("predict", "run chains over a case file");
    add_common(predict, false);
    predict->add_option("-m,--model", model_dir, "training run directory")->required();
    predict->add_option("--cases", cases, "case JSONL file")->required();

    CLI::App *ablate =
        app.add_subcommand("ablate", "train and evaluate the chain ablations");
    add_common(ablate, true);
    ablate->add_option("-d,--data", data, "data directory from gen-data")->required();

    CLI::App *report = app.add_subcommand("report", "merge metric reports");
    add_common(report, false);
    report->add_option("runs", run_dirs, "finished eval run directories")
        ->required()
        ->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        app.exit(e);
        return LEX_ERR_USAGE;
    }

    ConfigHandle cfg;
    if (lex_status s = open_config(config_path, cfg); s != LEX_OK) return fail(s);
    std::string out_dir = resolve_out(out);

    lex_status status = LEX_OK;
    if (gen->parsed()) {
        status = lex_gen_data(cfg.ptr, out_dir.c_str(), force);
        if (status == LEX_OK) print_warnings(out_dir);
    } else if (train->parsed()) {
        status = lex_train(cfg.ptr, data.c_str(), out_dir.c_str(), force);
    } else if (eval->parsed()) {
        status = lex_eval(cfg.ptr, model_dir.c_str(), data.c_str(), gold,
                          out_dir.c_str(), force);
        if (status == LEX_OK) print_file(out_dir + "/metrics.txt");
    } else if (predict->parsed()) {
        status = lex_predict(cfg.ptr, model_dir.c_str(), cases.c_str(),
                             out_dir.c_str(), force);
        if (status == LEX_OK) print_file(out_dir + "/predictions.jsonl");
    } else if (ablate->parsed()) {
        status = lex_ablate(cfg.ptr, data.c_str(), out_dir.c_str(), force);
        if (status == LEX_OK) print_file(out_dir + "/ablation.txt");
    } else if (report->parsed()) {
        std::vector<const char *> dirs;
        dirs.reserve(run_dirs.size());
        for (const auto &d : run_dirs) dirs.push_back(d.c_str());
        status = lex_report(dirs.data(), dirs.size(), out_dir.c_str(), force);
        if (status == LEX_OK) print_file(out_dir + "/report.txt");
    }
    if (status != LEX_OK) return fail(status);
    return 0;
}
