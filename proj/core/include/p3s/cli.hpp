#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "p3s/search.hpp"

namespace p3s {

// Resolved CLI configuration. Precedence: flags > config file > P3S_SEED
// environment fallback > defaults. The resolved snapshot is written verbatim
// into result.json.
struct RunConfig {
    std::string data_path;
    std::string target_name;
    std::string method = "clusterp3s";
    int k = 5;
    int outer_iters = 50;
    int inner_iters = 10;
    int folds = 10;
    std::uint64_t seed = 0;
    std::string reward_learner = "dtree";
    std::vector<std::string> eval_learners = {"logistic", "dtree", "forest"};
    std::size_t onehot_cap = 64;
    std::string out_dir = "p3s_run";
    int workers = 1;
    bool dump_embedding = false;
    std::vector<std::string> missing_markers = {"", "?", "NA", "NaN"};
};

// Flag-level overrides; unset fields fall through to the config file / env /
// defaults.
struct ConfigOverrides {
    std::optional<std::string> data_path;
    std::optional<std::string> target_name;
    std::optional<std::string> method;
    std::optional<int> k;
    std::optional<int> outer_iters;
    std::optional<int> inner_iters;
    std::optional<int> folds;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> reward_learner;
    std::optional<std::vector<std::string>> eval_learners;
    std::optional<std::size_t> onehot_cap;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    std::optional<bool> dump_embedding;
    std::optional<std::vector<std::string>> missing_markers;
};

RunConfig resolve_config(const std::string& config_file_json, const ConfigOverrides& flags,
                         std::optional<std::uint64_t> env_seed);

std::string run_config_to_json(const RunConfig&);

SearchConfig to_search_config(const RunConfig&);

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int cmd_search(const RunConfig& config);

struct EvalArgs {
    std::string spec_path;
    std::string data_path;
    std::string target_name;
    int folds = 10;
    std::uint64_t seed = 0;
    std::vector<std::string> learners = {"logistic", "dtree", "forest"};
    std::size_t onehot_cap = 64;
    int workers = 1;
    std::string out_path = "eval.json";
};

int cmd_eval(const EvalArgs& args);

// Prints the 48 pipelines, one per line, as "<id> <json triple>".
int cmd_enumerate();

int cmd_report(const std::string& run_dir);

}  // namespace p3s
