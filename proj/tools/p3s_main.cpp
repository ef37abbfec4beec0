// p3s: personalized per-feature preprocessing pipeline search for tabular
// classification. Subcommands: search, eval, enumerate, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "p3s/cli.hpp"
#include "p3s/errors.hpp"

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* value = std::getenv("P3S_SEED");
    if (!value || !*value) return std::nullopt;
    try {
        return std::stoull(value);
    } catch (...) {
        throw p3s::BadConfig(std::string("P3S_SEED is not an integer: ") + value);
    }
}

std::string read_file_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw p3s::IoError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"personalized preprocessing pipeline search"};
    app.require_subcommand(1);

    // search
    auto* search = app.add_subcommand("search", "run pipeline search on a dataset");
    p3s::ConfigOverrides flags;
    std::string config_path;
    std::string data_path, target_name, method, reward_learner, out_dir;
    int k = 0, outer = 0, inner = 0, folds = 0, workers = 0;
    std::uint64_t seed = 0;
    std::size_t onehot_cap = 0;
    bool dump_embedding = false;
    std::vector<std::string> missing_markers;

    auto* opt_data = search->add_option("--data-path,--data", data_path, "input CSV path");
    auto* opt_target =
        search->add_option("--target-name,--target", target_name, "target column name");
    auto* opt_method = search->add_option("--method", method,
                                          "clusterp3s | heuristic | randcluster | kmeans-variant");
    auto* opt_k = search->add_option("--k", k, "number of clusters (default 5)");
    auto* opt_outer = search->add_option("--outer-iters", outer, "outer iterations (default 50)");
    auto* opt_inner = search->add_option("--inner-iters", inner, "inner iterations (default 10)");
    auto* opt_folds = search->add_option("--folds", folds, "CV folds (default 10)");
    auto* opt_seed = search->add_option("--seed", seed, "random seed (default $P3S_SEED or 0)");
    auto* opt_reward = search->add_option("--reward-learner", reward_learner,
                                          "logistic | dtree | forest | suite (default dtree)");
    std::vector<std::string> eval_learners;
    auto* opt_eval_learners = search->add_option(
        "--eval-learners", eval_learners, "learner suite used when the reward is 'suite'");
    auto* opt_cap = search->add_option("--onehot-cap", onehot_cap,
                                       "max one-hot categories (default 64)");
    auto* opt_out = search->add_option("--out-dir", out_dir, "run directory (default p3s_run)");
    auto* opt_workers = search->add_option("--workers", workers, "fold-evaluation threads");
    auto* opt_dump = search->add_flag("--dump-embedding", dump_embedding,
                                      "write the condensed feature embedding as CSV");
    auto* opt_markers = search->add_option("--missing-markers", missing_markers,
                                           "cell values treated as missing");
    search->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a serialized pipeline spec");
    p3s::EvalArgs eval_args;
    eval->add_option("--spec", eval_args.spec_path, "result.json or {feature: triple} JSON")
        ->required();
    eval->add_option("--data-path,--data", eval_args.data_path, "input CSV path")->required();
    eval->add_option("--target-name,--target", eval_args.target_name, "target column name")
        ->required();
    eval->add_option("--folds", eval_args.folds, "CV folds (default 10)");
    eval->add_option("--seed", eval_args.seed, "random seed");
    eval->add_option("--learners", eval_args.learners, "learner suite (default all three)");
    eval->add_option("--onehot-cap", eval_args.onehot_cap, "max one-hot categories");
    eval->add_option("--workers", eval_args.workers, "fold-evaluation threads");
    eval->add_option("--out", eval_args.out_path, "output JSON path (default eval.json)");

    // enumerate
    auto* enumerate = app.add_subcommand("enumerate", "print the 48 candidate pipelines");

    // report
    auto* report = app.add_subcommand("report", "summarize a finished run directory");
    std::string run_dir;
    report->add_option("--run-dir,run_dir", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (search->parsed()) {
            if (opt_data->count()) flags.data_path = data_path;
            if (opt_target->count()) flags.target_name = target_name;
            if (opt_method->count()) flags.method = method;
            if (opt_k->count()) flags.k = k;
            if (opt_outer->count()) flags.outer_iters = outer;
            if (opt_inner->count()) flags.inner_iters = inner;
            if (opt_folds->count()) flags.folds = folds;
            if (opt_seed->count()) flags.seed = seed;
            if (opt_reward->count()) flags.reward_learner = reward_learner;
            if (opt_eval_learners->count()) flags.eval_learners = eval_learners;
            if (opt_cap->count()) flags.onehot_cap = onehot_cap;
            if (opt_out->count()) flags.out_dir = out_dir;
            if (opt_workers->count()) flags.workers = workers;
            if (opt_dump->count()) flags.dump_embedding = dump_embedding;
            if (opt_markers->count()) flags.missing_markers = missing_markers;

            const std::string config_json =
                config_path.empty() ? "" : read_file_or_throw(config_path);
            const auto config = p3s::resolve_config(config_json, flags, env_seed());
            return p3s::cmd_search(config);
        }
        if (eval->parsed()) return p3s::cmd_eval(eval_args);
        if (enumerate->parsed()) return p3s::cmd_enumerate();
        if (report->parsed()) return p3s::cmd_report(run_dir);
    } catch (const p3s::BadConfig& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
