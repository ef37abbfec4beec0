#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p3s/matrix.hpp"

namespace p3s {

enum class Activation { Rectifier, Identity, SoftmaxOutput };

struct Layer {
    Matrix weights;  // out x in
    std::vector<double> bias;
    Activation activation = Activation::Identity;
};

// Fixed-topology dense network. SoftmaxOutput may only appear on the last
// layer; hidden layers use the rectifier.
struct DenseNet {
    std::vector<Layer> layers;
    std::uint64_t rng_seed = 0;

    // dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
    static DenseNet make(std::span<const std::size_t> dims, std::span<const Activation> acts,
                         std::uint64_t seed);

    std::size_t input_dim() const { return layers.front().weights.cols; }
    std::size_t output_dim() const { return layers.back().weights.rows; }
};

struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per layer
};

ForwardTrace forward(const DenseNet& net, const Matrix& batch);

inline const Matrix& output_of(const ForwardTrace& t) { return t.post.back(); }

struct LossGrad {
    double loss = 0.0;
    Matrix grad;
};

// loss = mean over elements of (pred - target)^2; grad is w.r.t. pred.
LossGrad mse_loss(const Matrix& pred, const Matrix& target);

// probs are softmax outputs; loss = mean over rows of -log p_target with
// p clamped at 1e-12. grad is w.r.t. the logits: (probs - onehot) / rows.
LossGrad cross_entropy_loss(const Matrix& probs, const Matrix& onehot_targets);
LossGrad cross_entropy_loss(const Matrix& probs, std::span<const int> target_class);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
};

// output_grad is w.r.t. the final post-activation for Identity/Rectifier
// outputs, and w.r.t. the final pre-activation (logits) for SoftmaxOutput —
// matching what the loss functions above return.
Gradients backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& output_grad);

struct AdamState {
    std::size_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Gradients m;
    Gradients v;

    static AdamState for_net(const DenseNet& net, double lr = 1e-3);
};

void adam_step(AdamState& state, DenseNet& net, const Gradients& grads);

// Bit-exact JSON round-trip (shape header + flat parameter arrays).
std::string net_to_json(const DenseNet& net);
DenseNet net_from_json(std::string_view text);

// Shared matmul kernels (row-major).
Matrix matmul_abt(const Matrix& a, const Matrix& b);  // a[n,m] * b[p,m]^T -> [n,p]
Matrix matmul_ab(const Matrix& a, const Matrix& b);   // a[n,m] * b[m,p]  -> [n,p]
Matrix matmul_atb(const Matrix& a, const Matrix& b);  // a[n,m]^T * b[n,p] -> [m,p]

}  // namespace p3s
