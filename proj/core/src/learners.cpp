#include "p3s/learners.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

std::string to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::LogisticSGD: return "logistic";
        case LearnerKind::DecisionTree: return "dtree";
        case LearnerKind::RandomForestLite: return "forest";
    }
    return "?";
}

LearnerKind learner_from_string(std::string_view s) {
    if (s == "logistic") return LearnerKind::LogisticSGD;
    if (s == "dtree") return LearnerKind::DecisionTree;
    if (s == "forest") return LearnerKind::RandomForestLite;
    throw BadConfig("unknown learner: " + std::string(s));
}

namespace {

int majority_label(std::span<const std::size_t> counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;  // tie -> lowest index
    return static_cast<int>(best);
}

double gini(std::span<const std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

}  // namespace

void DecisionTreeModel::fit(const Matrix& x, std::span<const int> y, int n_classes,
                            const TreeParams& params) {
    fit_subsampled(x, y, n_classes, params, 0, nullptr);
}

void DecisionTreeModel::fit_subsampled(const Matrix& x, std::span<const int> y, int n_classes,
                                       const TreeParams& params, std::size_t features_per_split,
                                       Rng* feature_rng) {
    nodes_.clear();
    const std::size_t n_features = x.cols;

    std::vector<std::size_t> indices(x.rows);
    std::iota(indices.begin(), indices.end(), 0);

    struct Work {
        int node;
        std::size_t begin;
        std::size_t end;
        int depth;
    };

    std::vector<std::size_t> counts(n_classes);
    std::vector<std::size_t> left_counts(n_classes);
    std::vector<std::size_t> feature_pool(n_features);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);

    nodes_.push_back({});
    std::vector<Work> stack{{0, 0, indices.size(), 0}};

    while (!stack.empty()) {
        const Work w = stack.back();
        stack.pop_back();
        const std::size_t n = w.end - w.begin;

        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = w.begin; i < w.end; ++i) ++counts[y[indices[i]]];
        const int majority = majority_label(counts);
        nodes_[w.node].label = majority;

        const bool pure = counts[majority] == n;
        if (pure || w.depth >= params.max_depth ||
            n < 2 * static_cast<std::size_t>(params.min_leaf)) {
            continue;
        }

        // candidate features: all, or a fresh random subset per split
        std::span<const std::size_t> candidates(feature_pool);
        std::vector<std::size_t> subset;
        if (features_per_split > 0 && features_per_split < n_features && feature_rng) {
            subset = feature_pool;
            for (std::size_t i = 0; i < features_per_split; ++i) {
                const std::size_t j = i + feature_rng->next_index(subset.size() - i);
                std::swap(subset[i], subset[j]);
            }
            subset.resize(features_per_split);
            std::sort(subset.begin(), subset.end());
            candidates = subset;
        }

        const double parent_score = gini(counts, n) * static_cast<double>(n);
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = parent_score;

        std::vector<std::pair<double, int>> order(n);
        for (std::size_t f : candidates) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t row = indices[w.begin + i];
                order[i] = {x(row, f), y[row]};
            }
            std::sort(order.begin(), order.end());

            std::fill(left_counts.begin(), left_counts.end(), 0);
            std::size_t left_n = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left_counts[order[i].second];
                ++left_n;
                if (order[i].first == order[i + 1].first) continue;
                if (left_n < static_cast<std::size_t>(params.min_leaf)) continue;
                if (n - left_n < static_cast<std::size_t>(params.min_leaf)) break;

                double left_g = 1.0, right_g = 1.0;
                const double ln = static_cast<double>(left_n);
                const double rn = static_cast<double>(n - left_n);
                for (int c = 0; c < n_classes; ++c) {
                    const double lc = static_cast<double>(left_counts[c]);
                    const double rc = static_cast<double>(counts[c] - left_counts[c]);
                    left_g -= (lc / ln) * (lc / ln);
                    right_g -= (rc / rn) * (rc / rn);
                }
                const double score = left_g * ln + right_g * rn;
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (order[i].first + order[i + 1].first);
                }
            }
        }

        if (best_feature < 0) continue;

        // partition indices in place, stable on row order within each side
        const auto mid = std::stable_partition(indices.begin() + w.begin,
                                               indices.begin() + w.end, [&](std::size_t row) {
                                                   return x(row, best_feature) <= best_threshold;
                                               });
        const std::size_t split = static_cast<std::size_t>(mid - indices.begin());

        nodes_[w.node].feature = best_feature;
        nodes_[w.node].threshold = best_threshold;
        const int left = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        const int right = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_[w.node].left = left;
        nodes_[w.node].right = right;
        // push right first so the left child is processed next (stable rng order)
        stack.push_back({right, split, w.end, w.depth + 1});
        stack.push_back({left, w.begin, split, w.depth + 1});
    }
}

int DecisionTreeModel::predict_row(std::span<const double> row) const {
    int node = 0;
    while (nodes_[node].feature >= 0) {
        node = row[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left
                                                                   : nodes_[node].right;
    }
    return nodes_[node].label;
}

std::vector<int> DecisionTreeModel::predict(const Matrix& x) const {
    std::vector<int> out;
    out.reserve(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out.push_back(predict_row(x.row(r)));
    return out;
}

namespace {

std::vector<int> logistic_sgd(const Matrix& train_x, std::span<const int> train_y,
                              const Matrix& test_x, int n_classes, std::uint64_t seed) {
    constexpr int kEpochs = 200;
    constexpr double kLr = 0.01;
    constexpr double kL2 = 1e-4;

    const std::size_t f = train_x.cols;
    Matrix w(n_classes, f);
    std::vector<double> b(n_classes, 0.0);
    std::vector<double> logits(n_classes);

    Rng rng(seed);
    std::vector<std::size_t> order(train_x.rows);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < kEpochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            auto xi = train_x.row(i);
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < n_classes; ++c) {
                double z = b[c];
                auto wc = w.row(c);
                for (std::size_t k = 0; k < f; ++k) z += wc[k] * xi[k];
                logits[c] = z;
                mx = std::max(mx, z);
            }
            double sum = 0.0;
            for (int c = 0; c < n_classes; ++c) {
                logits[c] = std::exp(logits[c] - mx);
                sum += logits[c];
            }
            for (int c = 0; c < n_classes; ++c) {
                const double p = logits[c] / sum;
                const double g = p - (c == train_y[i] ? 1.0 : 0.0);
                auto wc = w.row(c);
                for (std::size_t k = 0; k < f; ++k) wc[k] -= kLr * (g * xi[k] + kL2 * wc[k]);
                b[c] -= kLr * g;
            }
        }
    }

    std::vector<int> pred;
    pred.reserve(test_x.rows);
    for (std::size_t r = 0; r < test_x.rows; ++r) {
        auto xr = test_x.row(r);
        int best = 0;
        double best_z = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_classes; ++c) {
            double z = b[c];
            auto wc = w.row(c);
            for (std::size_t k = 0; k < f; ++k) z += wc[k] * xr[k];
            if (z > best_z) {
                best_z = z;
                best = c;
            }
        }
        pred.push_back(best);
    }
    return pred;
}

std::vector<int> random_forest(const Matrix& train_x, std::span<const int> train_y,
                               const Matrix& test_x, int n_classes, std::uint64_t seed) {
    constexpr int kTrees = 25;
    const TreeParams params{8, 2};
    const std::size_t features_per_split = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(train_x.cols, 1)))));

    Matrix votes(test_x.rows, n_classes);
    std::vector<int> boot_y;
    for (int t = 0; t < kTrees; ++t) {
        Rng rng(derive_stream(seed, stream::kForestTree, static_cast<std::uint64_t>(t)));
        Matrix boot_x(train_x.rows, train_x.cols);
        boot_y.assign(train_x.rows, 0);
        for (std::size_t i = 0; i < train_x.rows; ++i) {
            const std::size_t pick = rng.next_index(train_x.rows);
            std::copy(train_x.row(pick).begin(), train_x.row(pick).end(),
                      boot_x.row(i).begin());
            boot_y[i] = train_y[pick];
        }
        DecisionTreeModel tree;
        tree.fit_subsampled(boot_x, boot_y, n_classes, params, features_per_split, &rng);
        for (std::size_t r = 0; r < test_x.rows; ++r) votes(r, tree.predict_row(test_x.row(r))) += 1.0;
    }

    std::vector<int> pred;
    pred.reserve(test_x.rows);
    for (std::size_t r = 0; r < test_x.rows; ++r) {
        auto row = votes.row(r);
        int best = 0;
        for (int c = 1; c < n_classes; ++c)
            if (row[c] > row[best]) best = c;
        pred.push_back(best);
    }
    return pred;
}

}  // namespace

std::vector<int> fit_predict(const LearnerSpec& spec, const Matrix& train_x,
                             std::span<const int> train_y, const Matrix& test_x, int n_classes) {
    if (train_x.rows == 0) throw DegenerateTraining("empty training set");
    if (train_x.rows != train_y.size()) throw ShapeMismatch("fit_predict: label count");
    std::vector<bool> seen(n_classes, false);
    int distinct = 0;
    for (int y : train_y) {
        if (!seen[y]) {
            seen[y] = true;
            ++distinct;
        }
    }
    if (distinct < 2) throw DegenerateTraining("training set has fewer than 2 classes");

    switch (spec.kind) {
        case LearnerKind::LogisticSGD:
            return logistic_sgd(train_x, train_y, test_x, n_classes, spec.seed);
        case LearnerKind::DecisionTree: {
            DecisionTreeModel tree;
            tree.fit(train_x, train_y, n_classes, TreeParams{});
            return tree.predict(test_x);
        }
        case LearnerKind::RandomForestLite:
            return random_forest(train_x, train_y, test_x, n_classes, spec.seed);
    }
    throw BadConfig("unknown learner kind");
}

namespace {

struct FoldData {
    DesignMatrix train;
    DesignMatrix test;
    std::vector<int> train_y;
    std::vector<int> test_y;
};

// Fit primitives on the fold's training rows and materialize both matrices.
FoldData build_fold(const Table& table, std::span<const PipelineTriple> specs,
                    const FoldPlan& folds, int fold, std::span<const int> encoded,
                    std::size_t onehot_cap) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (folds.assignments[r] == fold) test_rows.push_back(r);
        else train_rows.push_back(r);
    }
    FoldData data;
    const auto fitted = fit_feature_triples(table, specs, train_rows, onehot_cap);
    data.train = transform_features(table, fitted, train_rows);
    data.test = transform_features(table, fitted, test_rows);
    for (std::size_t r : train_rows) data.train_y.push_back(encoded[r]);
    for (std::size_t r : test_rows) data.test_y.push_back(encoded[r]);
    return data;
}

double fold_accuracy(const FoldData& data, LearnerKind kind, std::uint64_t fold_seed,
                     int n_classes) {
    const LearnerSpec spec{kind, fold_seed};
    const auto pred = fit_predict(spec, data.train.x, data.train_y, data.test.x, n_classes);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == data.test_y[i]) ++hits;
    return data.test_y.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.test_y.size());
}

// Runs fn(fold) for folds [0, k) on `workers` threads; exceptions are
// captured per fold and the lowest fold index wins, matching sequential
// fail-fast behaviour.
template <typename Fn>
void for_each_fold(int k, int workers, Fn&& fn) {
    if (workers <= 1) {
        for (int f = 0; f < k; ++f) fn(f);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(k);
    auto worker = [&] {
        for (;;) {
            const int f = next.fetch_add(1);
            if (f >= k) return;
            try {
                fn(f);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(workers, k);
    pool.reserve(count);
    for (int i = 0; i < count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (int f = 0; f < k; ++f) {
        if (errors[f]) std::rethrow_exception(errors[f]);
    }
}

}  // namespace

EvalOutcome evaluate_L(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                       LearnerKind learner, const FoldPlan& folds, std::uint64_t seed,
                       std::size_t onehot_cap, int workers) {
    const auto encoded = table.encoded_target();
    const int n_classes = static_cast<int>(table.class_labels().size());

    EvalResult result;
    result.learner = {learner, seed};
    result.per_fold.assign(folds.k, 0.0);
    try {
        for_each_fold(folds.k, workers, [&](int f) {
            const auto data = build_fold(table, spec_per_feature, folds, f, encoded, onehot_cap);
            result.per_fold[f] = fold_accuracy(
                data, learner, derive_stream(seed, stream::kLearnerFold, f), n_classes);
        });
    } catch (const InvalidPrimitive& e) {
        return InvalidMark{e.primitive, e.column_class, e.feature, e.what()};
    }

    double sum = 0.0;
    for (double a : result.per_fold) sum += a;
    result.mean_accuracy = sum / static_cast<double>(folds.k);
    return result;
}

SuiteOutcome evaluate_suite(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                            std::span<const LearnerKind> learners, int k, std::uint64_t seed,
                            std::size_t onehot_cap, int workers) {
    const FoldPlan folds = make_folds(table, k, seed);
    return evaluate_suite(table, spec_per_feature, learners, folds, seed, onehot_cap, workers);
}

SuiteOutcome evaluate_suite(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                            std::span<const LearnerKind> learners, const FoldPlan& folds,
                            std::uint64_t seed, std::size_t onehot_cap, int workers) {
    const auto encoded = table.encoded_target();
    const int n_classes = static_cast<int>(table.class_labels().size());

    // fold matrices shared across learners
    std::vector<FoldData> fold_data(folds.k);
    try {
        for_each_fold(folds.k, workers, [&](int f) {
            fold_data[f] = build_fold(table, spec_per_feature, folds, f, encoded, onehot_cap);
        });
    } catch (const InvalidPrimitive& e) {
        return InvalidMark{e.primitive, e.column_class, e.feature, e.what()};
    }

    SuiteResult suite;
    suite.per_learner.reserve(learners.size());
    for (LearnerKind kind : learners) {
        EvalResult r;
        r.learner = {kind, seed};
        r.per_fold.assign(folds.k, 0.0);
        for_each_fold(folds.k, workers, [&](int f) {
            r.per_fold[f] = fold_accuracy(fold_data[f], kind,
                                          derive_stream(seed, stream::kLearnerFold, f), n_classes);
        });
        double sum = 0.0;
        for (double a : r.per_fold) sum += a;
        r.mean_accuracy = sum / static_cast<double>(folds.k);
        suite.mean_accuracy += r.mean_accuracy;
        suite.per_learner.push_back(std::move(r));
    }
    if (!learners.empty()) suite.mean_accuracy /= static_cast<double>(learners.size());
    return suite;
}

std::string eval_result_to_json(const EvalResult& r) {
    nlohmann::json j;
    j["learner"] = to_string(r.learner.kind);
    j["mean_accuracy"] = r.mean_accuracy;
    j["per_fold"] = r.per_fold;
    return j.dump();
}

}  // namespace p3s
