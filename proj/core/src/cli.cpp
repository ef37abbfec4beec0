#include "p3s/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "p3s/errors.hpp"

namespace p3s {

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

RunConfig resolve_config(const std::string& config_file_json, const ConfigOverrides& flags,
                         std::optional<std::uint64_t> env_seed) {
    RunConfig config;
    if (env_seed) config.seed = *env_seed;

    if (!config_file_json.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(config_file_json);
        } catch (const nlohmann::json::exception& e) {
            throw BadConfig(std::string("config file: ") + e.what());
        }
        take(j, "data_path", config.data_path);
        take(j, "target_name", config.target_name);
        take(j, "method", config.method);
        take(j, "k", config.k);
        take(j, "outer_iters", config.outer_iters);
        take(j, "inner_iters", config.inner_iters);
        take(j, "folds", config.folds);
        take(j, "seed", config.seed);
        take(j, "reward_learner", config.reward_learner);
        take(j, "eval_learners", config.eval_learners);
        take(j, "onehot_cap", config.onehot_cap);
        take(j, "out_dir", config.out_dir);
        take(j, "workers", config.workers);
        take(j, "dump_embedding", config.dump_embedding);
        take(j, "missing_markers", config.missing_markers);
    }

    if (flags.data_path) config.data_path = *flags.data_path;
    if (flags.target_name) config.target_name = *flags.target_name;
    if (flags.method) config.method = *flags.method;
    if (flags.k) config.k = *flags.k;
    if (flags.outer_iters) config.outer_iters = *flags.outer_iters;
    if (flags.inner_iters) config.inner_iters = *flags.inner_iters;
    if (flags.folds) config.folds = *flags.folds;
    if (flags.seed) config.seed = *flags.seed;
    if (flags.reward_learner) config.reward_learner = *flags.reward_learner;
    if (flags.eval_learners) config.eval_learners = *flags.eval_learners;
    if (flags.onehot_cap) config.onehot_cap = *flags.onehot_cap;
    if (flags.out_dir) config.out_dir = *flags.out_dir;
    if (flags.workers) config.workers = *flags.workers;
    if (flags.dump_embedding) config.dump_embedding = *flags.dump_embedding;
    if (flags.missing_markers) config.missing_markers = *flags.missing_markers;
    return config;
}

std::string run_config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["data_path"] = c.data_path;
    j["target_name"] = c.target_name;
    j["method"] = c.method;
    j["k"] = c.k;
    j["outer_iters"] = c.outer_iters;
    j["inner_iters"] = c.inner_iters;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["reward_learner"] = c.reward_learner;
    j["eval_learners"] = c.eval_learners;
    j["onehot_cap"] = c.onehot_cap;
    j["out_dir"] = c.out_dir;
    j["workers"] = c.workers;
    j["dump_embedding"] = c.dump_embedding;
    j["missing_markers"] = c.missing_markers;
    return j.dump();
}

SearchConfig to_search_config(const RunConfig& c) {
    SearchConfig s;
    s.k = c.k;
    s.outer_iters = c.outer_iters;
    s.inner_iters = c.inner_iters;
    s.folds = c.folds;
    s.seed = c.seed;
    if (c.reward_learner == "suite") {
        s.reward_suite = true;
        s.suite_learners.clear();
        for (const auto& name : c.eval_learners) s.suite_learners.push_back(learner_from_string(name));
    } else {
        s.reward_learner = learner_from_string(c.reward_learner);
    }
    s.onehot_cap = c.onehot_cap;
    s.workers = c.workers;
    s.dump_embedding = c.dump_embedding;
    return s;
}

int cmd_search(const RunConfig& config) {
    if (config.data_path.empty()) throw BadConfig("--data-path is required");
    if (config.target_name.empty()) throw BadConfig("--target-name is required");

    CsvOptions csv;
    csv.missing_markers = config.missing_markers;
    std::vector<std::string> load_warnings;
    const Table table = load_csv(config.data_path, config.target_name, csv, &load_warnings);
    for (const auto& w : load_warnings) std::cerr << "warning: " << w << "\n";

    RunResult run = run_method(config.method, table, to_search_config(config));
    run.dataset_label = config.data_path;
    write_run_dir(run, config.out_dir, run_config_to_json(config));

    for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
    if (run.best) {
        std::cout << "best score: " << format_number(run.best->score) << " (source: "
                  << run.best->source << ")\n";
        std::cout << "pipelines:\n";
        for (std::size_t c = 0; c < run.best->pipelines.size(); ++c) {
            std::string members;
            for (std::size_t f = 0; f < run.feature_names.size(); ++f) {
                if (run.best->assignment.labels[f] == static_cast<int>(c) + 1) {
                    if (!members.empty()) members += ", ";
                    members += run.feature_names[f];
                }
            }
            std::cout << "  cluster " << c + 1 << " [" << members << "]: "
                      << triple_to_json(run.best->pipelines[c]) << "\n";
        }
    } else {
        std::cout << "no valid pipeline found\n";
    }
    std::cout << "trials: " << run.trials.size() << " (invalid: " << run.invalid_trials << ")\n";
    std::cout << "run directory: " << config.out_dir << "\n";
    return 0;
}

int cmd_eval(const EvalArgs& args) {
    const Table table = load_csv(args.data_path, args.target_name);

    nlohmann::json spec_json;
    try {
        spec_json = nlohmann::json::parse(read_file(args.spec_path));
    } catch (const nlohmann::json::exception& e) {
        throw BadConfig(args.spec_path + ": " + e.what());
    }
    // accept either a result.json or a flat {feature: triple} map
    if (spec_json.contains("best")) {
        if (spec_json.at("best").is_null())
            throw SpecMismatch(args.spec_path + " records no best pipeline");
        spec_json = spec_json.at("best").at("spec_per_feature");
    }

    const auto names = table.feature_names();
    std::vector<PipelineTriple> spec(names.size());
    std::vector<bool> seen(names.size(), false);
    for (const auto& [feature, triple] : spec_json.items()) {
        const auto it = std::find(names.begin(), names.end(), feature);
        if (it == names.end())
            throw SpecMismatch("spec references unknown feature '" + feature + "'");
        const std::size_t idx = it - names.begin();
        spec[idx] = triple_from_json(triple.dump());
        seen[idx] = true;
    }
    for (std::size_t f = 0; f < names.size(); ++f) {
        if (!seen[f]) throw SpecMismatch("spec is missing feature '" + names[f] + "'");
    }

    std::vector<LearnerKind> kinds;
    for (const auto& name : args.learners) kinds.push_back(learner_from_string(name));

    const SuiteOutcome outcome = evaluate_suite(table, spec, kinds, args.folds, args.seed,
                                                args.onehot_cap, args.workers);
    if (!is_valid(outcome)) {
        const auto& mark = std::get<InvalidMark>(outcome);
        std::cerr << "invalid pipeline: " << mark.message << "\n";
        return 1;
    }
    const auto& suite = std::get<SuiteResult>(outcome);

    nlohmann::ordered_json out;
    out["data"] = args.data_path;
    out["target"] = args.target_name;
    out["spec"] = args.spec_path;
    out["folds"] = args.folds;
    out["seed"] = args.seed;
    nlohmann::ordered_json per_learner;
    for (const auto& r : suite.per_learner) {
        std::cout << to_string(r.learner.kind) << ": " << format_number(r.mean_accuracy) << "\n";
        nlohmann::ordered_json lj;
        lj["mean_accuracy"] = r.mean_accuracy;
        lj["per_fold"] = r.per_fold;
        per_learner[to_string(r.learner.kind)] = lj;
    }
    out["per_learner"] = per_learner;
    out["suite_mean"] = suite.mean_accuracy;
    std::cout << "suite mean: " << format_number(suite.mean_accuracy) << "\n";

    std::ofstream file(args.out_path, std::ios::binary);
    if (!file) throw IoError("cannot write " + args.out_path);
    file << out.dump(2) << "\n";
    return 0;
}

int cmd_enumerate() {
    const auto triples = enumerate_pipelines();
    for (std::size_t i = 0; i < triples.size(); ++i) {
        std::cout << i << " " << triple_to_json(triples[i]) << "\n";
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const std::filesystem::path dir(run_dir);
    nlohmann::json result;
    try {
        result = nlohmann::json::parse(read_file((dir / "result.json").string()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("result.json: " + std::string(e.what()));
    }

    // validate the trial stream, naming the offending line on failure
    const std::string trials_text = read_file((dir / "trials.jsonl").string());
    std::size_t line_no = 0;
    std::size_t trial_count = 0;
    std::istringstream lines(trials_text);
    std::string line;
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            (void)nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("trials.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        ++trial_count;
    }

    std::cout << "method: " << result.at("method").get<std::string>() << "\n";
    std::cout << "dataset: " << result.at("dataset").get<std::string>() << "\n";
    std::cout << "seed: " << result.at("seed").get<std::uint64_t>() << "\n";
    std::cout << "iterations: " << trial_count << "\n";
    if (result.at("best").is_null()) {
        std::cout << "best: none\n";
    } else {
        std::cout << "best score: " << format_number(result.at("best").at("score").get<double>())
                  << " (source: " << result.at("best").at("source").get<std::string>() << ")\n";
    }
    std::cout << "invalid trials: " << result.at("invalid_trials").get<std::size_t>() << "\n";
    std::cout << "curve:\n";
    std::cout << read_file((dir / "curve.csv").string());
    return 0;
}

}  // namespace p3s
