#pragma once

#include <map>
#include <string>

#include "net.hpp"
#include "synthgen.hpp"
#include "train.hpp"

namespace lexchain {

// The one declarative file driving every run: flat key=value lines,
// '#' comments. Anything that affects results lives here; command-line
// flags only choose paths and modes.
struct RunConfig {
    ModelConfig model;   // model.vocab_size acts as the tokenizer cap
    TrainConfig train;
    GenSpec gen;
    PromptSet prompts;
    std::string ablation = "full";

    RunConfig();

    static RunConfig from_file(const std::string &path);
    void set(const std::string &key, const std::string &value); // throws ConfigError
    std::string get(const std::string &key) const;              // throws ConfigError
    bool has(const std::string &key) const;
    // Every key with its current value, in stable order.
    std::map<std::string, std::string> snapshot() const;

    void validate() const;
};

} // namespace lexchain
