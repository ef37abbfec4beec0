#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "p3s/matrix.hpp"
#include "p3s/prims.hpp"
#include "p3s/tabular.hpp"

namespace p3s {

enum class LearnerKind { LogisticSGD, DecisionTree, RandomForestLite };
std::string to_string(LearnerKind);
LearnerKind learner_from_string(std::string_view);

// Fixed hyperparameters per kind:
//   LogisticSGD:      200 epochs, lr 0.01, L2 1e-4, per-sample updates
//   DecisionTree:     CART/Gini, max depth 8, min leaf 2
//   RandomForestLite: 25 depth-8 trees, bootstrap, sqrt-feature splits
struct LearnerSpec {
    LearnerKind kind = LearnerKind::DecisionTree;
    std::uint64_t seed = 0;
};

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 2;
};

// Standalone CART classifier, exposed for the forest and for oracle checks.
class DecisionTreeModel {
public:
    void fit(const Matrix& x, std::span<const int> y, int n_classes, const TreeParams& params);
    // feature_pool: when set, candidate features per split are drawn from it
    // (used by the forest); nullptr means all features.
    void fit_subsampled(const Matrix& x, std::span<const int> y, int n_classes,
                        const TreeParams& params, std::size_t features_per_split,
                        class Rng* feature_rng);
    int predict_row(std::span<const double> row) const;
    std::vector<int> predict(const Matrix& x) const;

private:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int label = 0;
    };
    std::vector<Node> nodes_;
};

// Fit on (train_x, train_y) and predict test_x. Class labels are indices in
// [0, n_classes). Deterministic given spec.seed.
std::vector<int> fit_predict(const LearnerSpec& spec, const Matrix& train_x,
                             std::span<const int> train_y, const Matrix& test_x, int n_classes);

struct EvalResult {
    double mean_accuracy = 0.0;
    std::vector<double> per_fold;
    LearnerSpec learner;
};

// Why a trial was invalid; carries the memo key.
struct InvalidMark {
    Primitive primitive;
    ColumnClass column_class;
    std::string feature;
    std::string message;
};

using EvalOutcome = std::variant<EvalResult, InvalidMark>;

inline bool is_valid(const EvalOutcome& o) { return std::holds_alternative<EvalResult>(o); }
inline const EvalResult& result_of(const EvalOutcome& o) { return std::get<EvalResult>(o); }
inline const InvalidMark& invalid_of(const EvalOutcome& o) { return std::get<InvalidMark>(o); }

// Leakage-safe cross-validation: primitives are fit on each fold's training
// split only. Any InvalidPrimitive marks the whole trial invalid. Fold
// evaluations run on `workers` threads; results are identical for any count.
EvalOutcome evaluate_L(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                       LearnerKind learner, const FoldPlan& folds, std::uint64_t seed,
                       std::size_t onehot_cap = kDefaultOneHotCap, int workers = 1);

struct SuiteResult {
    double mean_accuracy = 0.0;  // mean over learners of their CV means
    std::vector<EvalResult> per_learner;
};

using SuiteOutcome = std::variant<SuiteResult, InvalidMark>;

inline bool is_valid(const SuiteOutcome& o) { return std::holds_alternative<SuiteResult>(o); }

// Shares one set of fold matrices across the learner list; equals running
// evaluate_L per learner with make_folds(table, k, seed).
SuiteOutcome evaluate_suite(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                            std::span<const LearnerKind> learners, int k, std::uint64_t seed,
                            std::size_t onehot_cap = kDefaultOneHotCap, int workers = 1);

SuiteOutcome evaluate_suite(const Table& table, std::span<const PipelineTriple> spec_per_feature,
                            std::span<const LearnerKind> learners, const FoldPlan& folds,
                            std::uint64_t seed, std::size_t onehot_cap = kDefaultOneHotCap,
                            int workers = 1);

std::string eval_result_to_json(const EvalResult& r);

}  // namespace p3s
