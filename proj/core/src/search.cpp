#include "p3s/search.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include <json.hpp>

#include "p3s/embed.hpp"
#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::ordered_json triple_json(const PipelineTriple& t) {
    nlohmann::ordered_json j;
    j["imputer"] = to_string(t.imputer);
    j["encoder"] = to_string(t.encoder);
    j["scaler"] = to_string(t.scaler);
    return j;
}

nlohmann::ordered_json assignment_json(const ClusterAssignment& a,
                                       std::span<const std::string> names) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = a.labels[i];
    return j;
}

nlohmann::ordered_json invalid_json(const InvalidMark& m) {
    nlohmann::ordered_json j;
    j["primitive"] = to_string(m.primitive);
    j["column_class"] = to_string(m.column_class);
    j["feature"] = m.feature;
    j["message"] = m.message;
    return j;
}

}  // namespace

std::string search_config_to_json(const SearchConfig& c) {
    nlohmann::ordered_json j;
    j["k"] = c.k;
    j["outer_iters"] = c.outer_iters;
    j["inner_iters"] = c.inner_iters;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["reward_learner"] = c.reward_suite ? "suite" : to_string(c.reward_learner);
    j["onehot_cap"] = c.onehot_cap;
    j["workers"] = c.workers;
    j["autoencoder_epochs"] = c.autoencoder_epochs;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["vocab_cap"] = c.vocab_cap;
    j["quantize_digits"] = c.quantize_digits;
    if (c.candidate_triples) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& t : *c.candidate_triples) arr.push_back(triple_id(t));
        j["candidate_triples"] = arr;
    }
    return j.dump();
}

// The eval seed is the config seed itself: fold assignment and per-fold
// learner seeds already hash in their own stream tags, and reusing the seed
// verbatim lets `eval --folds F --seed S` replay a run's scores exactly.
EvalContext::EvalContext(const Table& table, const SearchConfig& config)
    : table_(&table),
      config_(config),
      folds_(make_folds(table, config.folds, config.seed)),
      eval_seed_(config.seed) {
    classes_.reserve(table.n_features());
    for (const auto& col : table.features) {
        const auto profile = column_profile(col);
        classes_.push_back(classify_column(profile, config.onehot_cap));
        missing_free_.push_back(profile.missing_count == 0);
        numeric_.push_back(col.kind == ColumnKind::Numeric);
    }
    candidates_ = config.candidate_triples ? *config.candidate_triples : space_.triples();
    if (candidates_.empty()) throw BadConfig("empty candidate pipeline set");
}

EvalOutcome EvalContext::score(std::span<const PipelineTriple> spec_per_feature) {
    // Cache key with no-op imputers collapsed: on a column without missing
    // cells, imputers that cannot fail behave identically, so their specs
    // share one evaluation. Validity-distinct choices (Mean/Median on a
    // non-numeric column) keep their own key.
    std::string key;
    key.reserve(spec_per_feature.size());
    for (std::size_t j = 0; j < spec_per_feature.size(); ++j) {
        PipelineTriple t = spec_per_feature[j];
        if (missing_free_[j]) {
            if (numeric_[j] || t.imputer == Imputer::MostFrequentValue) t.imputer = Imputer::None;
        }
        key.push_back(static_cast<char>(triple_id(t)));
    }

    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    ++evaluations_;
    EvalOutcome outcome;
    if (config_.reward_suite) {
        const SuiteOutcome suite =
            evaluate_suite(*table_, spec_per_feature, config_.suite_learners, folds_, eval_seed_,
                           config_.onehot_cap, config_.workers);
        if (is_valid(suite)) {
            EvalResult r;
            r.learner = {config_.reward_learner, eval_seed_};
            r.mean_accuracy = std::get<SuiteResult>(suite).mean_accuracy;
            outcome = r;
        } else {
            outcome = std::get<InvalidMark>(suite);
        }
    } else {
        outcome = evaluate_L(*table_, spec_per_feature, config_.reward_learner, folds_,
                             eval_seed_, config_.onehot_cap, config_.workers);
    }
    if (!is_valid(outcome)) {
        const auto& mark = invalid_of(outcome);
        space_.record_invalid(mark.primitive, mark.column_class);
    }
    cache_.emplace(std::move(key), outcome);
    return outcome;
}

std::vector<PipelineTriple> materialize_spec(const ClusterAssignment& assignment,
                                             std::span<const PipelineTriple> cluster_pipelines) {
    std::vector<PipelineTriple> spec;
    spec.reserve(assignment.labels.size());
    for (int label : assignment.labels) {
        if (label < 1 || static_cast<std::size_t>(label) > cluster_pipelines.size())
            throw ShapeMismatch("cluster label out of range");
        spec.push_back(cluster_pipelines[label - 1]);
    }
    return spec;
}

std::vector<PipelineTriple> heuristic_spec(const Table& table) {
    std::vector<PipelineTriple> spec;
    spec.reserve(table.n_features());
    for (const auto& col : table.features) {
        const auto profile = column_profile(col);
        const bool has_missing = profile.missing_count > 0;
        if (col.kind == ColumnKind::Numeric) {
            spec.push_back({has_missing ? Imputer::Mean : Imputer::None, Encoder::None,
                            Scaler::MaxAbs});
        } else {
            spec.push_back({has_missing ? Imputer::MostFrequentValue : Imputer::None,
                            Encoder::OneHot, Scaler::None});
        }
    }
    return spec;
}

namespace {

struct LoopState {
    std::optional<BestCandidate> best;
    std::vector<TrialRecord> trials;
    std::vector<std::optional<double>> curve_best;
    std::vector<double> curve_wall;
    RewardState rewards;
    std::size_t invalid_count = 0;
    Clock::time_point start = Clock::now();
};

// Distinct member column classes per cluster id (1..K).
std::vector<std::vector<ColumnClass>> member_classes(const ClusterAssignment& assignment,
                                                     const std::vector<ColumnClass>& classes) {
    std::vector<std::set<ColumnClass>> sets(assignment.k);
    for (std::size_t j = 0; j < assignment.labels.size(); ++j)
        sets[assignment.labels[j] - 1].insert(classes[j]);
    std::vector<std::vector<ColumnClass>> out(assignment.k);
    for (int c = 0; c < assignment.k; ++c) out[c].assign(sets[c].begin(), sets[c].end());
    return out;
}

PipelineTriple sample_pipeline(EvalContext& ctx, Rng& rng,
                               std::span<const ColumnClass> classes_in_cluster) {
    std::vector<const PipelineTriple*> allowed;
    allowed.reserve(ctx.candidates().size());
    for (const auto& t : ctx.candidates()) {
        bool ok = true;
        for (ColumnClass cls : classes_in_cluster) {
            if (!ctx.space().allows(t, cls)) {
                ok = false;
                break;
            }
        }
        if (ok) allowed.push_back(&t);
    }
    if (allowed.empty()) {
        std::string classes;
        for (ColumnClass cls : classes_in_cluster) classes += " " + to_string(cls);
        throw NoValidPipeline("invalid-primitive memo excludes every candidate pipeline for "
                              "column classes:" + classes);
    }
    return *allowed[rng.next_index(allowed.size())];
}

// One outer iteration's inner random search. Returns the iteration's best
// valid score (the REINFORCE reward).
std::optional<double> run_inner_loop(EvalContext& ctx, const ClusterAssignment& assignment,
                                     int outer, LoopState& st) {
    const auto classes_by_cluster = member_classes(assignment, ctx.column_classes());
    std::optional<double> iter_best;

    for (int inner = 1; inner <= ctx.config().inner_iters; ++inner) {
        Rng rng(derive_stream(ctx.config().seed, stream::kTrial,
                              static_cast<std::uint64_t>(outer),
                              static_cast<std::uint64_t>(inner)));
        std::vector<PipelineTriple> pipelines;
        pipelines.reserve(assignment.k);
        for (int c = 0; c < assignment.k; ++c)
            pipelines.push_back(sample_pipeline(ctx, rng, classes_by_cluster[c]));

        const auto spec = materialize_spec(assignment, pipelines);
        const auto t0 = Clock::now();
        const EvalOutcome outcome = ctx.score(spec);
        TrialRecord trial;
        trial.outer = outer;
        trial.inner = inner;
        trial.assignment = assignment;
        trial.pipelines = pipelines;
        trial.wall_time_s = seconds_since(t0);

        if (is_valid(outcome)) {
            const double score = result_of(outcome).mean_accuracy;
            trial.score = score;
            if (!iter_best || score > *iter_best) iter_best = score;
            if (!st.best || score > st.best->score) {
                st.best = BestCandidate{assignment, pipelines, spec, score, "sampled"};
            }
        } else {
            trial.invalid = invalid_of(outcome);
            ++st.invalid_count;
        }
        st.trials.push_back(std::move(trial));
    }
    return iter_best;
}

void push_curve_point(LoopState& st) {
    st.curve_best.push_back(st.best ? std::optional<double>(st.best->score) : std::nullopt);
    st.curve_wall.push_back(seconds_since(st.start));
}

RunResult finish_run(std::string method, const Table& table, const SearchConfig& config,
                     LoopState&& st, EvalContext& ctx, std::vector<std::string> warnings) {
    RunResult run;
    run.method = std::move(method);
    run.config = config;
    run.feature_names = table.feature_names();
    run.trials = std::move(st.trials);
    run.curve_best = std::move(st.curve_best);
    run.curve_wall = std::move(st.curve_wall);
    run.invalid_trials = st.invalid_count;
    run.warnings = std::move(warnings);
    run.best = std::move(st.best);

    if (!run.best) {
        // nothing valid found: fall back to the hand-crafted pipeline
        run.fallback = true;
        run.warnings.push_back("no valid trial; falling back to the heuristic pipeline");
        const auto spec = heuristic_spec(table);
        const EvalOutcome outcome = ctx.score(spec);
        if (is_valid(outcome)) {
            // per-feature rule, so each feature forms its own cluster
            ClusterAssignment assignment;
            assignment.source = AssignmentSource::Heuristic;
            assignment.k = static_cast<int>(spec.size());
            for (std::size_t j = 0; j < spec.size(); ++j)
                assignment.labels.push_back(static_cast<int>(j) + 1);
            run.best = BestCandidate{assignment, spec, spec, result_of(outcome).mean_accuracy,
                                     "heuristic-fallback"};
        } else {
            run.warnings.push_back("heuristic fallback is itself invalid: " +
                                   invalid_of(outcome).message);
        }
    }
    return run;
}

int effective_k(const Table& table, const SearchConfig& config,
                std::vector<std::string>& warnings) {
    if (config.k < 1) throw BadK("K must be >= 1");
    const int d = static_cast<int>(table.n_features());
    if (config.k > d) {
        warnings.push_back("K=" + std::to_string(config.k) + " exceeds feature count " +
                           std::to_string(d) + "; clamped to " + std::to_string(d));
        return d;
    }
    return config.k;
}

}  // namespace

RunResult run_clusterp3s(const Table& table, const SearchConfig& config) {
    std::vector<std::string> warnings;
    const int k_eff = effective_k(table, config, warnings);
    EvalContext ctx(table, config);

    const auto vocab = build_vocabulary(table, config.vocab_cap, config.quantize_digits);
    const auto raw = term_frequency_matrix(table, vocab);
    const auto ae = train_autoencoder(raw, derive_stream(config.seed, stream::kAutoencoder),
                                      config.autoencoder_epochs);
    const Matrix& embedding = ae.condensed;

    const auto pseudo = kmeans(embedding, k_eff, config.seed);
    PolicyNet policy = make_policy(embedding.cols, k_eff,
                                   derive_stream(config.seed, stream::kPolicyInit));
    pretrain_policy(policy, embedding, pseudo.assignment, config.pretrain_epochs);

    LoopState st;
    for (int outer = 1; outer <= config.outer_iters; ++outer) {
        const auto assignment = sample_assignment(
            policy, embedding, derive_stream(config.seed, stream::kAssignment, outer),
            AssignmentSource::Sampled);
        const auto iter_best = run_inner_loop(ctx, assignment, outer, st);
        if (iter_best) reinforce_update(policy, embedding, assignment, st.rewards, *iter_best);
        push_curve_point(st);
    }

    // Compare the trained policy's argmax assignment (with the best known
    // per-cluster pipelines) against the best sampled trial.
    if (st.best) {
        const auto argmax = sample_assignment(policy, embedding, 0, AssignmentSource::Argmax);
        const auto spec = materialize_spec(argmax, st.best->pipelines);
        const auto t0 = Clock::now();
        const EvalOutcome outcome = ctx.score(spec);
        TrialRecord trial;
        trial.outer = config.outer_iters + 1;
        trial.inner = 0;
        trial.assignment = argmax;
        trial.pipelines = st.best->pipelines;
        trial.wall_time_s = seconds_since(t0);
        if (is_valid(outcome)) {
            const double score = result_of(outcome).mean_accuracy;
            trial.score = score;
            if (score > st.best->score) {
                st.best = BestCandidate{argmax, st.best->pipelines, spec, score, "argmax"};
            }
        } else {
            trial.invalid = invalid_of(outcome);
            ++st.invalid_count;
        }
        st.trials.push_back(std::move(trial));
    }

    RunResult run = finish_run("clusterp3s", table, config, std::move(st), ctx,
                               std::move(warnings));
    if (config.dump_embedding) run.embedding = embedding;
    return run;
}

RunResult run_heuristic_p3(const Table& table, const SearchConfig& config) {
    EvalContext ctx(table, config);
    LoopState st;

    const auto spec = heuristic_spec(table);
    ClusterAssignment assignment;
    assignment.source = AssignmentSource::Heuristic;
    // cluster features by their rule-assigned triple
    std::vector<PipelineTriple> distinct;
    for (const auto& t : spec) {
        if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
    }
    assignment.k = static_cast<int>(distinct.size());
    for (const auto& t : spec) {
        const auto it = std::find(distinct.begin(), distinct.end(), t);
        assignment.labels.push_back(static_cast<int>(it - distinct.begin()) + 1);
    }

    const auto t0 = Clock::now();
    const EvalOutcome outcome = ctx.score(spec);
    TrialRecord trial;
    trial.outer = 1;
    trial.inner = 1;
    trial.assignment = assignment;
    trial.pipelines = distinct;
    trial.wall_time_s = seconds_since(t0);
    if (is_valid(outcome)) {
        const double score = result_of(outcome).mean_accuracy;
        trial.score = score;
        st.best = BestCandidate{assignment, distinct, spec, score, "heuristic"};
    } else {
        trial.invalid = invalid_of(outcome);
        ++st.invalid_count;
    }
    st.trials.push_back(std::move(trial));
    push_curve_point(st);

    return finish_run("heuristic", table, config, std::move(st), ctx, {});
}

RunResult run_rand_cluster_p3(const Table& table, const SearchConfig& config) {
    std::vector<std::string> warnings;
    const int k_eff = effective_k(table, config, warnings);
    EvalContext ctx(table, config);

    LoopState st;
    for (int outer = 1; outer <= config.outer_iters; ++outer) {
        Rng rng(derive_stream(config.seed, stream::kAssignment,
                              static_cast<std::uint64_t>(outer)));
        ClusterAssignment assignment;
        assignment.k = k_eff;
        assignment.source = AssignmentSource::Random;
        assignment.labels.reserve(table.n_features());
        for (std::size_t j = 0; j < table.n_features(); ++j)
            assignment.labels.push_back(static_cast<int>(rng.next_index(k_eff)) + 1);
        run_inner_loop(ctx, assignment, outer, st);
        push_curve_point(st);
    }
    return finish_run("randcluster", table, config, std::move(st), ctx, std::move(warnings));
}

RunResult run_kmeans_variant(const Table& table, const SearchConfig& config) {
    std::vector<std::string> warnings;
    const int k_eff = effective_k(table, config, warnings);
    EvalContext ctx(table, config);

    const auto vocab = build_vocabulary(table, config.vocab_cap, config.quantize_digits);
    const auto raw = term_frequency_matrix(table, vocab);
    const auto ae = train_autoencoder(raw, derive_stream(config.seed, stream::kAutoencoder),
                                      config.autoencoder_epochs);
    const auto fixed = kmeans(ae.condensed, k_eff, config.seed);

    LoopState st;
    for (int outer = 1; outer <= config.outer_iters; ++outer) {
        run_inner_loop(ctx, fixed.assignment, outer, st);
        push_curve_point(st);
    }
    RunResult run = finish_run("kmeans-variant", table, config, std::move(st), ctx,
                               std::move(warnings));
    if (config.dump_embedding) run.embedding = ae.condensed;
    return run;
}

RunResult run_method(const std::string& method, const Table& table, const SearchConfig& config) {
    if (method == "clusterp3s") return run_clusterp3s(table, config);
    if (method == "heuristic") return run_heuristic_p3(table, config);
    if (method == "randcluster") return run_rand_cluster_p3(table, config);
    if (method == "kmeans-variant") return run_kmeans_variant(table, config);
    throw BadConfig("unknown method: " + method);
}

std::string result_to_json(const RunResult& run, const std::string& config_snapshot_json) {
    nlohmann::ordered_json j;
    j["method"] = run.method;
    j["dataset"] = run.dataset_label;
    j["seed"] = run.config.seed;
    j["config"] = nlohmann::ordered_json::parse(
        config_snapshot_json.empty() ? search_config_to_json(run.config) : config_snapshot_json);
    j["feature_names"] = run.feature_names;

    if (run.best) {
        nlohmann::ordered_json best;
        best["score"] = run.best->score;
        best["source"] = run.best->source;
        best["assignment"] = assignment_json(run.best->assignment, run.feature_names);
        nlohmann::ordered_json pipes;
        for (std::size_t c = 0; c < run.best->pipelines.size(); ++c)
            pipes[std::to_string(c + 1)] = triple_json(run.best->pipelines[c]);
        best["pipelines"] = pipes;
        nlohmann::ordered_json per_feature;
        for (std::size_t f = 0; f < run.feature_names.size(); ++f)
            per_feature[run.feature_names[f]] = triple_json(run.best->spec_per_feature[f]);
        best["spec_per_feature"] = per_feature;
        j["best"] = best;
    } else {
        j["best"] = nullptr;
    }

    auto curve = nlohmann::ordered_json::array();
    for (const auto& point : run.curve_best) {
        if (point) curve.push_back(*point);
        else curve.push_back(nullptr);
    }
    j["learning_curve"] = curve;
    j["trials_total"] = run.trials.size();
    j["invalid_trials"] = run.invalid_trials;
    j["fallback"] = run.fallback;
    j["warnings"] = run.warnings;
    return j.dump(2) + "\n";
}

std::string trials_to_jsonl(const RunResult& run) {
    std::string out;
    for (const auto& trial : run.trials) {
        nlohmann::ordered_json j;
        j["outer"] = trial.outer;
        j["inner"] = trial.inner;
        j["assignment"] = assignment_json(trial.assignment, run.feature_names);
        auto pipes = nlohmann::ordered_json::array();
        for (const auto& t : trial.pipelines) pipes.push_back(triple_json(t));
        j["pipelines"] = pipes;
        if (trial.score) j["score"] = *trial.score;
        else j["score"] = nullptr;
        if (trial.invalid) j["invalid"] = invalid_json(*trial.invalid);
        j["wall_time_s"] = trial.wall_time_s;
        out += j.dump();
        out += "\n";
    }
    return out;
}

std::string curve_to_csv(const RunResult& run) {
    std::string out = "outer_iter,best_score,wall_time\n";
    for (std::size_t i = 0; i < run.curve_best.size(); ++i) {
        out += std::to_string(i + 1);
        out += ",";
        if (run.curve_best[i]) out += format_number(*run.curve_best[i]);
        out += ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", run.curve_wall[i]);
        out += buf;
        out += "\n";
    }
    return out;
}

void write_run_dir(const RunResult& run, const std::filesystem::path& dir,
                   const std::string& config_snapshot_json) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out << content;
    };
    write("result.json", result_to_json(run, config_snapshot_json));
    write("trials.jsonl", trials_to_jsonl(run));
    write("curve.csv", curve_to_csv(run));
    if (run.embedding) {
        std::string csv;
        for (std::size_t r = 0; r < run.embedding->rows; ++r) {
            for (std::size_t c = 0; c < run.embedding->cols; ++c) {
                if (c > 0) csv += ",";
                csv += format_number((*run.embedding)(r, c));
            }
            csv += "\n";
        }
        write("embedding.csv", csv);
    }
}

}  // namespace p3s
