#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p3s/matrix.hpp"
#include "p3s/neural.hpp"

namespace p3s {

enum class AssignmentSource { Sampled, Argmax, KMeans, Random, Heuristic };
std::string to_string(AssignmentSource);

// Per-feature cluster labels in [1, K]. Empty clusters are allowed.
struct ClusterAssignment {
    std::vector<int> labels;
    int k = 0;
    AssignmentSource source = AssignmentSource::Random;

    bool operator==(const ClusterAssignment&) const = default;
};

// {"feature_name": cluster_id, ...} in feature order.
std::string assignment_to_json(const ClusterAssignment& assignment,
                               std::span<const std::string> feature_names);

struct KMeansResult {
    ClusterAssignment assignment;
    Matrix centroids;
    double inertia = 0.0;
};

// k-means++ seeding, 10 restarts, <=100 iterations each; empty clusters are
// reseeded to the farthest point. Deterministic given seed.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed);

// Deep clustering network: embedding row -> K-way distribution.
struct PolicyNet {
    DenseNet net;
    AdamState adam;
    int k = 0;
};

// H -> 128 -> 128 -> 128 -> K with a softmax output (four weight layers).
PolicyNet make_policy(std::size_t embed_dim, int k, std::uint64_t seed, double lr = 1e-3,
                      std::size_t hidden = 128);

Matrix policy_probs(const PolicyNet& policy, const Matrix& embeddings);

// Full-batch cross-entropy on k-means pseudo-labels; stops early at 99%
// argmax agreement. Returns the number of epochs run.
int pretrain_policy(PolicyNet& policy, const Matrix& embeddings,
                    const ClusterAssignment& pseudo_labels, int max_epochs = 200);

// mode Sampled draws each feature's cluster from its categorical
// distribution; Argmax takes the mode with ties to the lowest id.
ClusterAssignment sample_assignment(const PolicyNet& policy, const Matrix& embeddings,
                                    std::uint64_t seed, AssignmentSource mode);

// Baseline is the arithmetic mean of all rewards seen so far (0 when empty).
struct RewardState {
    std::vector<double> history;

    double baseline() const {
        if (history.empty()) return 0.0;
        double s = 0.0;
        for (double r : history) s += r;
        return s / static_cast<double>(history.size());
    }
};

// One REINFORCE step: minimizes -(r_perf - baseline) * sum_j log p(c_j|e_j).
// The baseline is taken before r_perf joins the history; a zero advantage
// skips the optimizer step so parameters stay put.
void reinforce_update(PolicyNet& policy, const Matrix& embeddings,
                      const ClusterAssignment& assignment, RewardState& rewards, double r_perf);

}  // namespace p3s
