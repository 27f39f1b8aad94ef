#pragma once

#include <string>
#include <vector>

#include "runcfg.hpp"

namespace lexchain {

// The operations behind the CLI subcommands. Each writes a
// run_manifest.json into out_dir before doing any work and refuses a
// non-empty out_dir unless force is set.

void op_gen_data(const RunConfig &cfg, const std::string &out_dir, bool force);

void op_train(const RunConfig &cfg, const std::string &data_dir,
              const std::string &out_dir, bool force);

// data_path: a corpus JSONL file, or a directory holding test.jsonl.
void op_eval(const RunConfig &cfg, const std::string &model_dir,
             const std::string &data_path, bool gold_intermediates,
             const std::string &out_dir, bool force);

void op_predict(const RunConfig &cfg, const std::string &model_dir,
                const std::string &case_file, const std::string &out_dir, bool force);

void op_ablate(const RunConfig &cfg, const std::string &data_dir,
               const std::string &out_dir, bool force);

void op_report(const std::vector<std::string> &run_dirs, const std::string &out_dir,
               bool force);

} // namespace lexchain
