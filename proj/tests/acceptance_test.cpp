// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Budgets assume a small multi-core machine.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "p3s/cli.hpp"
#include "p3s/cluster.hpp"
#include "p3s/embed.hpp"
#include "p3s/learners.hpp"
#include "p3s/prims.hpp"
#include "p3s/search.hpp"
#include "p3s/tabular.hpp"
#include "testsupport.hpp"

using namespace p3s;
using namespace p3s::test;

namespace {

const std::string kBin = P3S_CLI_BIN;
const std::string kDataDir = P3S_DATA_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::string run_and_capture(const std::string& command, int& exit_code) {
    std::string output;
    FILE* pipe = popen((command + " 2>&1").c_str(), "r");
    if (!pipe) {
        exit_code = -1;
        return output;
    }
    std::array<char, 4096> buffer;
    while (fgets(buffer.data(), buffer.size(), pipe)) output += buffer.data();
    const int status = pclose(pipe);
    exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return output;
}

char fmt_buf[256];
std::string fmt(const char* format, auto... args) {
    std::snprintf(fmt_buf, sizeof(fmt_buf), format, args...);
    return fmt_buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome criterion_search_space_count() {
    int exit_code = 0;
    const auto output = run_and_capture(kBin + " enumerate", exit_code);
    std::size_t lines = 0;
    for (char c : output)
        if (c == '\n') ++lines;
    const bool pass = exit_code == 0 && lines == 48;
    return {pass, fmt("enumerate emitted %zu lines (want 48)", lines)};
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion_gradients() {
    Rng rng(424242);
    double worst_mse = 0.0, worst_ce = 0.0, worst_reinforce = 0.0;

    for (int trial = 0; trial < 100; ++trial) {
        DenseNet net = random_net(rng, 2 + rng.next_index(6), 2 + rng.next_index(4),
                                  Activation::Identity);
        const Matrix batch = random_matrix(rng, 1 + rng.next_index(6), net.input_dim());
        const Matrix target = random_matrix(rng, batch.rows, net.output_dim());
        auto trace = forward(net, batch);
        const auto lg = mse_loss(output_of(trace), target);
        const auto grads = backward(net, trace, lg.grad);
        worst_mse = std::max(worst_mse, max_relative_error(net, flatten(grads), [&] {
            return mse_loss(output_of(forward(net, batch)), target).loss;
        }));
    }

    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t out_dim = 2 + rng.next_index(4);
        DenseNet net = random_net(rng, 2 + rng.next_index(6), out_dim,
                                  Activation::SoftmaxOutput);
        const Matrix batch = random_matrix(rng, 1 + rng.next_index(6), net.input_dim());
        std::vector<int> targets;
        for (std::size_t i = 0; i < batch.rows; ++i)
            targets.push_back(static_cast<int>(rng.next_index(out_dim)));
        auto trace = forward(net, batch);
        const auto lg = cross_entropy_loss(output_of(trace), targets);
        const auto grads = backward(net, trace, lg.grad);
        worst_ce = std::max(worst_ce, max_relative_error(net, flatten(grads), [&] {
            return cross_entropy_loss(output_of(forward(net, batch)), targets).loss;
        }));
    }

    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + static_cast<int>(rng.next_index(3));
        DenseNet net = random_net(rng, 3 + rng.next_index(4), k, Activation::SoftmaxOutput);
        const Matrix embeddings = random_matrix(rng, 1 + rng.next_index(4), net.input_dim());
        std::vector<int> sampled;
        for (std::size_t j = 0; j < embeddings.rows; ++j)
            sampled.push_back(static_cast<int>(rng.next_index(k)));
        const double advantage = rng.next_uniform(-1.0, 1.0);

        auto trace = forward(net, embeddings);
        const auto& probs = output_of(trace);
        Matrix grad(probs.rows, probs.cols);
        for (std::size_t j = 0; j < probs.rows; ++j)
            for (int c = 0; c < k; ++c)
                grad(j, c) = advantage * (probs(j, c) - (c == sampled[j] ? 1.0 : 0.0));
        const auto grads = backward(net, trace, grad);
        worst_reinforce = std::max(worst_reinforce, max_relative_error(net, flatten(grads), [&] {
            const auto p = output_of(forward(net, embeddings));
            double loss = 0.0;
            for (std::size_t j = 0; j < embeddings.rows; ++j)
                loss += -advantage * std::log(std::max(p(j, sampled[j]), 1e-12));
            return loss;
        }));
    }

    const bool pass = worst_mse < 1e-4 && worst_ce < 1e-4 && worst_reinforce < 1e-4;
    return {pass, fmt("max rel err: mse %.2e, cross-entropy %.2e, reinforce %.2e (want < 1e-4)",
                      worst_mse, worst_ce, worst_reinforce)};
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion_bandit() {
    std::vector<double> finals;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Matrix embedding(1, 4);
        Rng erng(seed);
        for (double& v : embedding.data) v = erng.next_uniform(-1, 1);
        auto policy = make_policy(4, 2, derive_stream(seed, 1001));
        RewardState rewards;
        for (int step = 0; step < 200; ++step) {
            const auto assignment = sample_assignment(
                policy, embedding, derive_stream(seed, 1002, step), AssignmentSource::Sampled);
            reinforce_update(policy, embedding, assignment, rewards,
                             assignment.labels[0] == 1 ? 1.0 : 0.0);
        }
        finals.push_back(policy_probs(policy, embedding)(0, 0));
    }
    const double med = median(finals);
    return {med > 0.9, fmt("median p(best cluster) after 200 updates = %.4f (want > 0.9)", med)};
}

// ---------------------------------------------------------------- criterion 4
Table planted_oracle_table() {
    Rng rng(515151);
    Table t;
    Column cat;
    cat.name = "grade";
    cat.kind = ColumnKind::NonNumeric;
    Column wide = numeric_column("reading", {});
    Column small = numeric_column("level", {});
    t.target.name = "class";
    t.target.kind = ColumnKind::NonNumeric;
    const char* strong[] = {"p", "q"};
    const char* weak[] = {"m", "n"};
    for (int i = 0; i < 200; ++i) {
        const bool cat_signal = rng.next_double() < 0.5;
        if (rng.next_double() < 0.15) cat.cells.emplace_back(MissingCell{});
        else if (cat_signal) cat.cells.emplace_back(std::string(strong[rng.next_index(2)]));
        else cat.cells.emplace_back(std::string(weak[rng.next_index(2)]));
        // ~150 distinct values in 1..200: OneHot is invalid at cap 64 and the
        // lexicographic ordinal scrambles the threshold signal
        const double reading = 1.0 + static_cast<double>(rng.next_index(200));
        wide.cells.emplace_back(reading);
        small.cells.emplace_back(static_cast<double>(rng.next_index(6)));
        const int votes = (cat_signal ? 1 : 0) + (reading > 100.0 ? 1 : 0);
        const bool flip = rng.next_double() < 0.08;
        const bool yes = (votes >= 1) != flip;
        t.target.cells.emplace_back(std::string(yes ? "yes" : "no"));
    }
    t.features.push_back(std::move(cat));
    t.features.push_back(std::move(wide));
    t.features.push_back(std::move(small));
    return t;
}

Outcome criterion_oracle_equivalence() {
    const Table table = planted_oracle_table();

    std::vector<PipelineTriple> reduced;
    for (const auto& triple : enumerate_pipelines())
        if (triple.scaler == Scaler::None) reduced.push_back(triple);

    SearchConfig base;
    base.k = 3;
    base.outer_iters = 50;
    base.inner_iters = 10;
    base.folds = 10;
    base.candidate_triples = reduced;

    int hits = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SearchConfig config = base;
        config.seed = seed;

        // exhaustive brute force over all 12^3 per-feature combinations under
        // the identical evaluation functional (same folds, same eval seed)
        EvalContext oracle(table, config);
        double optimum = -1.0;
        std::vector<PipelineTriple> spec(3);
        for (const auto& a : reduced)
            for (const auto& b : reduced)
                for (const auto& c : reduced) {
                    spec[0] = a;
                    spec[1] = b;
                    spec[2] = c;
                    const auto outcome = oracle.score(spec);
                    if (is_valid(outcome))
                        optimum = std::max(optimum, result_of(outcome).mean_accuracy);
                }

        const RunResult run = run_clusterp3s(table, config);
        const double found = run.best ? run.best->score : 0.0;
        if (found >= optimum - 0.01) ++hits;
        detail += fmt("%s%.3f/%.3f", seed > 1 ? " " : "", found, optimum);
    }
    return {hits >= 4, fmt("found/optimum per seed: %s; %d of 5 within 1 point (want >= 4)",
                           detail.c_str(), hits)};
}

// ---------------------------------------------------------------- criterion 5
Outcome criterion_directional() {
    struct DatasetSpec {
        std::string file;
        std::string target;
    };
    const std::vector<DatasetSpec> datasets{{"tictactoe.csv", "class"},
                                            {"car.csv", "class"},
                                            {"mixed.csv", "class"}};

    int at_least_even = 0;      // C >= H - 0.5 points
    int clearly_better = 0;     // C >= H + 1.0 point
    int beats_random = 0;       // C >= R
    std::string detail;

    for (const auto& dataset : datasets) {
        const Table table = load_csv(kDataDir + "/" + dataset.file, dataset.target);
        std::vector<double> cluster_scores, rand_scores, heuristic_scores;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SearchConfig config;
            config.k = 5;
            config.outer_iters = 8;
            config.inner_iters = 5;
            config.folds = 10;
            config.seed = seed;
            config.reward_suite = true;  // reward = the measured suite metric
            config.workers = 2;
            const auto h = run_heuristic_p3(table, config);
            const auto c = run_clusterp3s(table, config);
            const auto r = run_rand_cluster_p3(table, config);
            heuristic_scores.push_back(h.best ? h.best->score : 0.0);
            cluster_scores.push_back(c.best ? c.best->score : 0.0);
            rand_scores.push_back(r.best ? r.best->score : 0.0);
        }
        const double h_med = median(heuristic_scores);
        const double c_med = median(cluster_scores);
        const double r_med = median(rand_scores);
        if (c_med >= h_med - 0.005) ++at_least_even;
        if (c_med >= h_med + 0.01) ++clearly_better;
        if (c_med >= r_med) ++beats_random;
        detail += fmt("%s%s C=%.3f H=%.3f R=%.3f", detail.empty() ? "" : "; ",
                      dataset.file.c_str(), c_med, h_med, r_med);
    }

    const bool pass = at_least_even == 3 && clearly_better >= 1 && beats_random >= 2;
    return {pass, fmt("%s | even %d/3, +1pt %d, >=rand %d/3", detail.c_str(), at_least_even,
                      clearly_better, beats_random)};
}

// ---------------------------------------------------------------- criterion 6
Outcome criterion_memo() {
    const Table table = load_csv(kDataDir + "/tictactoe.csv", "class");
    SearchConfig config;
    config.k = 5;
    config.outer_iters = 10;
    config.inner_iters = 6;
    config.folds = 10;
    config.seed = 0;
    const RunResult run = run_clusterp3s(table, config);

    std::vector<ColumnClass> classes;
    for (const auto& col : table.features)
        classes.push_back(classify_column(column_profile(col), config.onehot_cap));

    std::set<std::pair<Primitive, ColumnClass>> seen;
    std::size_t repeats = 0;
    std::size_t invalids = 0;
    for (const auto& trial : run.trials) {
        const auto spec = materialize_spec(trial.assignment, trial.pipelines);
        for (std::size_t j = 0; j < spec.size(); ++j) {
            for (const Primitive prim :
                 {primitive_of(spec[j].imputer), primitive_of(spec[j].encoder),
                  primitive_of(spec[j].scaler)}) {
                if (seen.count({prim, classes[j]})) ++repeats;
            }
        }
        if (trial.invalid) {
            ++invalids;
            seen.insert({trial.invalid->primitive, trial.invalid->column_class});
        }
    }
    const bool pass = repeats == 0 && invalids > 0;
    return {pass, fmt("%zu invalid trials recorded, %zu post-memo repeat samples (want 0)",
                      invalids, repeats)};
}

// ---------------------------------------------------------------- criterion 7
Outcome criterion_monotone_deterministic() {
    const Table table = load_csv(kDataDir + "/mixed.csv", "class");
    SearchConfig config;
    config.k = 3;
    config.outer_iters = 4;
    config.inner_iters = 3;
    config.folds = 5;
    config.seed = 21;
    config.autoencoder_epochs = 30;

    bool monotone = true;
    bool deterministic = true;
    for (const auto* method : {"clusterp3s", "heuristic", "randcluster", "kmeans-variant"}) {
        const RunResult a = run_method(method, table, config);
        const RunResult b = run_method(method, table, config);
        double last = -1.0;
        for (const auto& point : a.curve_best) {
            if (!point) continue;
            if (*point < last) monotone = false;
            last = *point;
        }
        if (result_to_json(a) != result_to_json(b)) deterministic = false;
    }

    // byte-identical result.json through the CLI as well
    const auto dir = temp_dir("acceptance_determinism");
    const std::string command = kBin + " search --data " + kDataDir +
                                "/mixed.csv --target class --method clusterp3s --k 3"
                                " --outer-iters 3 --inner-iters 3 --folds 5 --seed 9"
                                " --out-dir " + (dir / "run").string();
    int code = 0;
    run_and_capture(command, code);
    bool cli_identical = code == 0;
    if (cli_identical) {
        const auto first = read_file(dir / "run" / "result.json");
        run_and_capture(command, code);
        cli_identical = code == 0 && first == read_file(dir / "run" / "result.json");
    }

    const bool pass = monotone && deterministic && cli_identical;
    return {pass, fmt("curves monotone: %s; in-process reruns identical: %s; cli rerun "
                      "byte-identical: %s",
                      monotone ? "yes" : "no", deterministic ? "yes" : "no",
                      cli_identical ? "yes" : "no")};
}

// ---------------------------------------------------------------- criterion 8
Outcome criterion_k_insensitivity() {
    const Table table = load_csv(kDataDir + "/dresses.csv", "Recommendation");
    const std::vector<LearnerKind> suite{LearnerKind::LogisticSGD, LearnerKind::DecisionTree,
                                         LearnerKind::RandomForestLite};
    auto run_k = [&](int k) {
        std::vector<double> scores;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SearchConfig config;
            config.k = k;
            config.outer_iters = 12;
            config.inner_iters = 6;
            config.folds = 10;
            config.seed = seed;
            config.workers = 2;
            const RunResult run = run_clusterp3s(table, config);
            if (!run.best) {
                scores.push_back(0.0);
                continue;
            }
            const auto outcome =
                evaluate_suite(table, run.best->spec_per_feature, suite, 10, 0, 64, 2);
            scores.push_back(is_valid(outcome) ? std::get<SuiteResult>(outcome).mean_accuracy
                                               : 0.0);
        }
        return median(scores);
    };
    const double k5 = run_k(5);
    const double k10 = run_k(10);
    const double gap = std::fabs(k5 - k10);
    return {gap < 0.02, fmt("median suite accuracy: K=5 %.4f vs K=10 %.4f, gap %.4f "
                            "(want < 0.02)",
                            k5, k10, gap)};
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion_wall_clock() {
    const auto dir = temp_dir("acceptance_wallclock");
    const std::string command = kBin + " search --data " + kDataDir +
                                "/dresses.csv --target Recommendation --method clusterp3s"
                                " --seed 3 --out-dir " + (dir / "run").string();
    const auto start = std::chrono::steady_clock::now();
    int code = 0;
    run_and_capture(command, code);
    const double seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();
    const bool pass = code == 0 && seconds < 120.0;
    return {pass, fmt("full default run on the 500x13 dataset took %.1f s (want < 120)",
                      seconds)};
}

// --------------------------------------------------------------- criterion 10
Outcome criterion_preprocessing_conformance() {
    Rng rng(616161);
    std::size_t checked = 0;
    std::string failure;

    for (int trial = 0; trial < 1000 && failure.empty(); ++trial) {
        const bool numeric = rng.next_double() < 0.5;
        const std::size_t n = 6 + rng.next_index(60);
        Column col;
        col.name = "c";
        if (numeric) {
            col.kind = ColumnKind::Numeric;
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.next_double() < 0.12) col.cells.emplace_back(MissingCell{});
                else col.cells.emplace_back(std::floor(rng.next_uniform(-40, 40) * 4.0) / 4.0);
            }
        } else {
            col.kind = ColumnKind::NonNumeric;
            const char* cats[] = {"a", "b", "c", "d", "e", "f"};
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.next_double() < 0.12) col.cells.emplace_back(MissingCell{});
                else col.cells.emplace_back(std::string(cats[rng.next_index(6)]));
            }
        }
        std::vector<std::size_t> fit_rows, held_out;
        for (std::size_t r = 0; r < n; ++r)
            (r < (3 * n) / 4 ? fit_rows : held_out).push_back(r);
        std::size_t observed = 0;
        for (std::size_t r : fit_rows)
            if (!is_missing(col.cells[r])) ++observed;
        if (observed == 0) continue;

        const Imputer imputer = numeric ? Imputer::Median : Imputer::MostFrequentValue;
        const auto check = [&](Scaler scaler, auto&& verify) {
            const PipelineTriple spec{imputer, Encoder::Ordinal, scaler};
            const auto fitted = fit_triple(spec, col, fit_rows);
            const auto snapshot = fitted;
            const auto out = transform_column(fitted, col, fit_rows);
            verify(out);
            (void)transform_column(fitted, col, held_out);
            if (fitted.scale_a != snapshot.scale_a || fitted.scale_b != snapshot.scale_b ||
                fitted.categories != snapshot.categories)
                failure = "leakage: fitted state changed by a held-out transform";
        };

        check(Scaler::MinMax, [&](const Matrix& out) {
            for (double v : out.data)
                if (v < 0.0 || v > 1.0) failure = "MinMax outside [0,1] on fit rows";
        });
        check(Scaler::MaxAbs, [&](const Matrix& out) {
            for (double v : out.data)
                if (v < -1.0 || v > 1.0) failure = "MaxAbs outside [-1,1] on fit rows";
        });
        check(Scaler::Standard, [&](const Matrix& out) {
            double mean = 0.0;
            for (double v : out.data) mean += v;
            mean /= static_cast<double>(out.data.size());
            double var = 0.0;
            for (double v : out.data) var += (v - mean) * (v - mean);
            var /= static_cast<double>(out.data.size());
            const double sd = std::sqrt(var);
            if (std::fabs(mean) >= 1e-9) failure = "Standard fit mean not ~0";
            if (!(sd < 1e-9 || std::fabs(sd - 1.0) < 1e-9)) failure = "Standard fit std not 0/1";
        });
        {
            const PipelineTriple spec{imputer, Encoder::OneHot, Scaler::None};
            const auto fitted = fit_triple(spec, col, fit_rows);
            const auto out = transform_column(fitted, col, fit_rows);
            for (std::size_t r = 0; r < out.rows; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < out.cols; ++c) sum += out(r, c);
                if (sum != 1.0) failure = "OneHot fit row does not sum to 1";
            }
        }
        ++checked;
    }

    const bool pass = failure.empty() && checked >= 900;
    return {pass, pass ? fmt("%zu random columns conform", checked) : failure};
}

}  // namespace

int main() {
    using CriterionFn = std::function<Outcome()>;
    const std::vector<std::pair<std::string, CriterionFn>> criteria{
        {"search-space count", criterion_search_space_count},
        {"gradient correctness", criterion_gradients},
        {"policy-learning sanity", criterion_bandit},
        {"oracle equivalence at desk scale", criterion_oracle_equivalence},
        {"directional comparison vs baselines", criterion_directional},
        {"memo effectiveness", criterion_memo},
        {"monotonicity and determinism", criterion_monotone_deterministic},
        {"K-insensitivity", criterion_k_insensitivity},
        {"wall-clock envelope", criterion_wall_clock},
        {"preprocessing conformance", criterion_preprocessing_conformance},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(
            std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %zu (%s): %s [%.1fs]\n",
                    outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    outcome.detail.c_str(), seconds);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
