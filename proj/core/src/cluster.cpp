#include "p3s/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

std::string to_string(AssignmentSource s) {
    switch (s) {
        case AssignmentSource::Sampled: return "sampled";
        case AssignmentSource::Argmax: return "argmax";
        case AssignmentSource::KMeans: return "kmeans";
        case AssignmentSource::Random: return "random";
        case AssignmentSource::Heuristic: return "heuristic";
    }
    return "?";
}

std::string assignment_to_json(const ClusterAssignment& assignment,
                               std::span<const std::string> feature_names) {
    if (assignment.labels.size() != feature_names.size())
        throw ShapeMismatch("assignment_to_json: label/name count");
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < feature_names.size(); ++i)
        j[feature_names[i]] = assignment.labels[i];
    return j.dump();
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct KMeansRun {
    std::vector<int> labels;  // 0-based
    Matrix centroids;
    double inertia = std::numeric_limits<double>::infinity();
};

KMeansRun kmeans_once(const Matrix& points, int k, Rng& rng) {
    const std::size_t n = points.rows;
    const std::size_t dim = points.cols;
    KMeansRun run;
    run.centroids = Matrix(k, dim);

    // k-means++ seeding
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.next_index(n);
    for (std::size_t d = 0; d < dim; ++d) run.centroids(0, d) = points(first, d);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = std::min(min_dist[i], sq_dist(points.row(i), run.centroids.row(c - 1)));
            total += min_dist[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.next_double() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += min_dist[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_index(n);
        }
        for (std::size_t d = 0; d < dim; ++d) run.centroids(c, d) = points(pick, d);
    }

    run.labels.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = sq_dist(points.row(i), run.centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (run.labels[i] != best) {
                run.labels[i] = best;
                changed = true;
            }
        }

        Matrix sums(k, dim);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = points.row(i);
            auto s = sums.row(run.labels[i]);
            for (std::size_t d = 0; d < dim; ++d) s[d] += row[d];
            ++counts[run.labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t d = 0; d < dim; ++d)
                    run.centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
            } else {
                // reseed an empty cluster to the farthest point
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(points.row(i), run.centroids.row(run.labels[i]));
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                for (std::size_t d = 0; d < dim; ++d) run.centroids(c, d) = points(far, d);
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
    }

    run.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        run.inertia += sq_dist(points.row(i), run.centroids.row(run.labels[i]));
    return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed) {
    if (k < 1) throw BadK("kmeans k must be >= 1");
    const std::size_t n = points.rows;
    KMeansResult result;
    result.assignment.k = k;
    result.assignment.source = AssignmentSource::KMeans;

    if (static_cast<std::size_t>(k) >= n) {
        // every point its own cluster; extra ids stay empty
        result.assignment.labels.resize(n);
        result.centroids = Matrix(k, points.cols);
        for (std::size_t i = 0; i < n; ++i) {
            result.assignment.labels[i] = static_cast<int>(i) + 1;
            for (std::size_t d = 0; d < points.cols; ++d)
                result.centroids(i, d) = points(i, d);
        }
        result.inertia = 0.0;
        return result;
    }

    KMeansRun best;
    for (int restart = 0; restart < 10; ++restart) {
        Rng rng(derive_stream(seed, stream::kKMeans, static_cast<std::uint64_t>(restart)));
        KMeansRun run = kmeans_once(points, k, rng);
        if (run.inertia < best.inertia) best = std::move(run);
    }

    result.centroids = std::move(best.centroids);
    result.inertia = best.inertia;
    result.assignment.labels.reserve(n);
    for (int label : best.labels) result.assignment.labels.push_back(label + 1);
    return result;
}

PolicyNet make_policy(std::size_t embed_dim, int k, std::uint64_t seed, double lr,
                      std::size_t hidden) {
    if (k < 1) throw BadK("policy k must be >= 1");
    const std::size_t dims[] = {embed_dim, hidden, hidden, hidden, static_cast<std::size_t>(k)};
    const Activation acts[] = {Activation::Rectifier, Activation::Rectifier,
                               Activation::Rectifier, Activation::SoftmaxOutput};
    PolicyNet policy;
    policy.net = DenseNet::make(dims, acts, seed);
    policy.adam = AdamState::for_net(policy.net, lr);
    policy.k = k;
    return policy;
}

Matrix policy_probs(const PolicyNet& policy, const Matrix& embeddings) {
    return forward(policy.net, embeddings).post.back();
}

int pretrain_policy(PolicyNet& policy, const Matrix& embeddings,
                    const ClusterAssignment& pseudo_labels, int max_epochs) {
    if (pseudo_labels.labels.size() != embeddings.rows)
        throw ShapeMismatch("pretrain_policy: label count");
    std::vector<int> targets;
    targets.reserve(pseudo_labels.labels.size());
    for (int label : pseudo_labels.labels) targets.push_back(label - 1);

    auto agreement = [&](const Matrix& probs) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < probs.rows; ++r) {
            auto row = probs.row(r);
            std::size_t arg = 0;
            for (std::size_t c = 1; c < row.size(); ++c)
                if (row[c] > row[arg]) arg = c;
            if (static_cast<int>(arg) == targets[r]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(probs.rows);
    };

    int epoch = 0;
    for (; epoch < max_epochs; ++epoch) {
        auto trace = forward(policy.net, embeddings);
        if (agreement(trace.post.back()) >= 0.99) break;
        const auto loss = cross_entropy_loss(trace.post.back(), targets);
        const auto grads = backward(policy.net, trace, loss.grad);
        adam_step(policy.adam, policy.net, grads);
    }
    return epoch;
}

ClusterAssignment sample_assignment(const PolicyNet& policy, const Matrix& embeddings,
                                    std::uint64_t seed, AssignmentSource mode) {
    const Matrix probs = policy_probs(policy, embeddings);
    ClusterAssignment assignment;
    assignment.k = policy.k;
    assignment.source = mode;
    assignment.labels.reserve(probs.rows);

    Rng rng(seed);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        auto row = probs.row(r);
        std::size_t chosen = 0;
        if (mode == AssignmentSource::Argmax) {
            for (std::size_t c = 1; c < row.size(); ++c)
                if (row[c] > row[chosen]) chosen = c;
        } else if (mode == AssignmentSource::Sampled) {
            const double u = rng.next_double();
            double cum = 0.0;
            chosen = row.size() - 1;
            for (std::size_t c = 0; c < row.size(); ++c) {
                cum += row[c];
                if (u < cum) {
                    chosen = c;
                    break;
                }
            }
        } else {
            throw BadConfig("sample_assignment mode must be Sampled or Argmax");
        }
        assignment.labels.push_back(static_cast<int>(chosen) + 1);
    }
    return assignment;
}

void reinforce_update(PolicyNet& policy, const Matrix& embeddings,
                      const ClusterAssignment& assignment, RewardState& rewards, double r_perf) {
    if (assignment.source != AssignmentSource::Sampled)
        throw StaleAssignment("reinforce_update requires a Sampled assignment");
    if (assignment.labels.size() != embeddings.rows)
        throw ShapeMismatch("reinforce_update: label count");

    const double advantage = r_perf - rewards.baseline();
    if (advantage != 0.0) {
        auto trace = forward(policy.net, embeddings);
        const Matrix& probs = trace.post.back();
        // d/dlogits of -advantage * sum_j log p(c_j) = advantage * (p - onehot)
        Matrix grad(probs.rows, probs.cols);
        for (std::size_t r = 0; r < probs.rows; ++r) {
            const int target = assignment.labels[r] - 1;
            for (std::size_t c = 0; c < probs.cols; ++c) {
                const double onehot = static_cast<int>(c) == target ? 1.0 : 0.0;
                grad(r, c) = advantage * (probs(r, c) - onehot);
            }
        }
        const auto grads = backward(policy.net, trace, grad);
        adam_step(policy.adam, policy.net, grads);
    }
    rewards.history.push_back(r_perf);
}

}  // namespace p3s
