#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p3s/cluster.hpp"
#include "p3s/learners.hpp"
#include "p3s/prims.hpp"
#include "p3s/tabular.hpp"

namespace p3s {

struct SearchConfig {
    int k = 5;
    int outer_iters = 50;
    int inner_iters = 10;
    int folds = 10;
    std::uint64_t seed = 0;
    LearnerKind reward_learner = LearnerKind::DecisionTree;
    // When set, trials are rewarded with the mean over suite_learners
    // instead of the single reward_learner (the CLI spells it
    // "--reward-learner suite").
    bool reward_suite = false;
    std::vector<LearnerKind> suite_learners = {LearnerKind::LogisticSGD,
                                               LearnerKind::DecisionTree,
                                               LearnerKind::RandomForestLite};
    std::size_t onehot_cap = kDefaultOneHotCap;
    int workers = 1;
    int autoencoder_epochs = 100;
    int pretrain_epochs = 200;
    std::size_t vocab_cap = 2048;
    int quantize_digits = kQuantizeDigits;
    bool dump_embedding = false;
    // When set, sampling and brute-force oracles draw from this subset
    // instead of all 48 triples.
    std::optional<std::vector<PipelineTriple>> candidate_triples;
};

std::string search_config_to_json(const SearchConfig&);

struct TrialRecord {
    int outer = 0;
    int inner = 0;
    ClusterAssignment assignment;
    std::vector<PipelineTriple> pipelines;  // one per cluster id 1..K
    std::optional<double> score;
    std::optional<InvalidMark> invalid;
    double wall_time_s = 0.0;
};

struct BestCandidate {
    ClusterAssignment assignment;
    std::vector<PipelineTriple> pipelines;
    std::vector<PipelineTriple> spec_per_feature;
    double score = 0.0;
    std::string source;  // "sampled" | "argmax" | "heuristic" | "heuristic-fallback"
};

struct RunResult {
    std::string method;
    SearchConfig config;
    std::string dataset_label;
    std::vector<std::string> feature_names;
    std::optional<BestCandidate> best;
    std::vector<TrialRecord> trials;
    std::vector<std::optional<double>> curve_best;  // best-so-far per outer iteration
    std::vector<double> curve_wall;                 // cumulative seconds per outer iteration
    std::vector<std::string> warnings;
    std::size_t invalid_trials = 0;
    bool fallback = false;
    std::optional<Matrix> embedding;  // condensed embedding when dump_embedding is set
};

// Deterministic evaluation functional shared by the runners and by
// brute-force oracles: fixed fold plan and eval seed per config, score cache
// keyed by the per-feature pipeline ids, and the invalid-primitive memo.
class EvalContext {
public:
    EvalContext(const Table& table, const SearchConfig& config);

    EvalOutcome score(std::span<const PipelineTriple> spec_per_feature);

    const Table& table() const { return *table_; }
    const SearchConfig& config() const { return config_; }
    const FoldPlan& folds() const { return folds_; }
    std::uint64_t eval_seed() const { return eval_seed_; }
    const std::vector<ColumnClass>& column_classes() const { return classes_; }
    const std::vector<PipelineTriple>& candidates() const { return candidates_; }
    SearchSpace& space() { return space_; }
    const SearchSpace& space() const { return space_; }
    std::size_t evaluations() const { return evaluations_; }

private:
    const Table* table_;
    SearchConfig config_;
    FoldPlan folds_;
    std::uint64_t eval_seed_;
    std::vector<ColumnClass> classes_;
    std::vector<bool> missing_free_;
    std::vector<bool> numeric_;
    std::vector<PipelineTriple> candidates_;
    SearchSpace space_;
    std::map<std::string, EvalOutcome> cache_;
    std::size_t evaluations_ = 0;
};

// Per-feature triples under the assignment's cluster -> pipeline map.
std::vector<PipelineTriple> materialize_spec(const ClusterAssignment& assignment,
                                             std::span<const PipelineTriple> cluster_pipelines);

// Hand-crafted baseline: numeric columns get (Mean when missing else None,
// None, MaxAbs); non-numeric get (MostFrequentValue when missing else None,
// OneHot, None).
std::vector<PipelineTriple> heuristic_spec(const Table& table);

RunResult run_clusterp3s(const Table& table, const SearchConfig& config);
RunResult run_heuristic_p3(const Table& table, const SearchConfig& config);
RunResult run_rand_cluster_p3(const Table& table, const SearchConfig& config);
RunResult run_kmeans_variant(const Table& table, const SearchConfig& config);

RunResult run_method(const std::string& method, const Table& table, const SearchConfig& config);

// result.json content; excludes wall-clock values so seed-pinned reruns are
// byte-identical. config_snapshot_json, when non-empty, is embedded verbatim
// as the "config" object.
std::string result_to_json(const RunResult& run, const std::string& config_snapshot_json = "");
std::string trials_to_jsonl(const RunResult& run);
std::string curve_to_csv(const RunResult& run);

// Writes result.json, trials.jsonl, curve.csv (and embedding.csv when
// present) into dir, creating it if needed.
void write_run_dir(const RunResult& run, const std::filesystem::path& dir,
                   const std::string& config_snapshot_json = "");

}  // namespace p3s
