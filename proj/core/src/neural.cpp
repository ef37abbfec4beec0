#include "p3s/neural.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ShapeMismatch("matmul_abt inner dims");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* bj = b.data.data() + j * b.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix matmul_ab(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeMismatch("matmul_ab inner dims");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ci = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ShapeMismatch("matmul_atb inner dims");
    Matrix c(a.cols, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* bi = b.data.data() + i * b.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            double* ck = c.data.data() + k * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ck[j] += aik * bi[j];
        }
    }
    return c;
}

DenseNet DenseNet::make(std::span<const std::size_t> dims, std::span<const Activation> acts,
                        std::uint64_t seed) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw ShapeMismatch("DenseNet::make dims/acts mismatch");
    DenseNet net;
    net.rng_seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (acts[l] == Activation::SoftmaxOutput && l + 2 != dims.size())
            throw ShapeMismatch("SoftmaxOutput only on the final layer");
        Layer layer;
        layer.activation = acts[l];
        layer.weights = Matrix(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        // fan-based uniform init
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        for (double& w : layer.weights.data) w = rng.next_uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace {

void softmax_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

}  // namespace

ForwardTrace forward(const DenseNet& net, const Matrix& batch) {
    if (batch.cols != net.input_dim()) throw ShapeMismatch("forward: batch width");
    ForwardTrace trace;
    trace.input = batch;
    const Matrix* current = &trace.input;
    for (const auto& layer : net.layers) {
        Matrix z = matmul_abt(*current, layer.weights);
        for (std::size_t r = 0; r < z.rows; ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < z.cols; ++c) row[c] += layer.bias[c];
        }
        trace.pre.push_back(z);
        Matrix a = std::move(z);
        switch (layer.activation) {
            case Activation::Rectifier:
                for (double& v : a.data) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::Identity:
                break;
            case Activation::SoftmaxOutput:
                softmax_rows(a);
                break;
        }
        trace.post.push_back(std::move(a));
        current = &trace.post.back();
    }
    return trace;
}

LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw ShapeMismatch("mse_loss shapes");
    LossGrad out;
    out.grad = Matrix(pred.rows, pred.cols);
    const double count = static_cast<double>(pred.rows * pred.cols);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        out.loss += d * d;
        out.grad.data[i] = 2.0 * d / count;
    }
    out.loss /= count;
    return out;
}

LossGrad cross_entropy_loss(const Matrix& probs, const Matrix& onehot_targets) {
    if (probs.rows != onehot_targets.rows || probs.cols != onehot_targets.cols)
        throw ShapeMismatch("cross_entropy_loss shapes");
    LossGrad out;
    out.grad = Matrix(probs.rows, probs.cols);
    const double rows = static_cast<double>(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        for (std::size_t c = 0; c < probs.cols; ++c) {
            const double t = onehot_targets(r, c);
            if (t != 0.0) out.loss += -t * std::log(std::max(probs(r, c), 1e-12));
            out.grad(r, c) = (probs(r, c) - t) / rows;
        }
    }
    out.loss /= rows;
    return out;
}

LossGrad cross_entropy_loss(const Matrix& probs, std::span<const int> target_class) {
    if (probs.rows != target_class.size()) throw ShapeMismatch("cross_entropy_loss targets");
    Matrix onehot(probs.rows, probs.cols);
    for (std::size_t r = 0; r < probs.rows; ++r) onehot(r, target_class[r]) = 1.0;
    return cross_entropy_loss(probs, onehot);
}

Gradients backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& output_grad) {
    const std::size_t n_layers = net.layers.size();
    if (trace.post.size() != n_layers) throw ShapeMismatch("backward: stale trace");
    if (output_grad.rows != trace.post.back().rows ||
        output_grad.cols != trace.post.back().cols)
        throw ShapeMismatch("backward: output grad shape");

    Gradients grads;
    grads.weights.resize(n_layers);
    grads.bias.resize(n_layers);

    // delta = dL/d(pre-activation) of the current layer
    Matrix delta = output_grad;
    for (std::size_t li = n_layers; li-- > 0;) {
        const Layer& layer = net.layers[li];
        if (layer.activation == Activation::Rectifier) {
            for (std::size_t i = 0; i < delta.data.size(); ++i) {
                if (trace.pre[li].data[i] <= 0.0) delta.data[i] = 0.0;
            }
        }
        // SoftmaxOutput: the loss already supplied d/d(logits); Identity: same.

        const Matrix& input = li == 0 ? trace.input : trace.post[li - 1];
        grads.weights[li] = matmul_atb(delta, input);  // out x in
        grads.bias[li].assign(layer.bias.size(), 0.0);
        for (std::size_t r = 0; r < delta.rows; ++r) {
            for (std::size_t c = 0; c < delta.cols; ++c) grads.bias[li][c] += delta(r, c);
        }
        if (li > 0) delta = matmul_ab(delta, layer.weights);
    }
    return grads;
}

AdamState AdamState::for_net(const DenseNet& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (const auto& layer : net.layers) {
        s.m.weights.emplace_back(layer.weights.rows, layer.weights.cols);
        s.v.weights.emplace_back(layer.weights.rows, layer.weights.cols);
        s.m.bias.emplace_back(layer.bias.size(), 0.0);
        s.v.bias.emplace_back(layer.bias.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, DenseNet& net, const Gradients& grads) {
    if (grads.weights.size() != net.layers.size()) throw ShapeMismatch("adam_step gradients");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    auto update = [&](double& p, double g, double& m, double& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    };

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& layer = net.layers[li];
        if (grads.weights[li].rows != layer.weights.rows ||
            grads.weights[li].cols != layer.weights.cols)
            throw ShapeMismatch("adam_step weight shape");
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
            update(layer.weights.data[i], grads.weights[li].data[i],
                   state.m.weights[li].data[i], state.v.weights[li].data[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            update(layer.bias[i], grads.bias[li][i], state.m.bias[li][i], state.v.bias[li][i]);
    }
}

std::string net_to_json(const DenseNet& net) {
    nlohmann::json j;
    j["rng_seed"] = net.rng_seed;
    auto& layers = j["layers"];
    layers = nlohmann::json::array();
    for (const auto& layer : net.layers) {
        nlohmann::json lj;
        lj["out"] = layer.weights.rows;
        lj["in"] = layer.weights.cols;
        switch (layer.activation) {
            case Activation::Rectifier: lj["activation"] = "rectifier"; break;
            case Activation::Identity: lj["activation"] = "identity"; break;
            case Activation::SoftmaxOutput: lj["activation"] = "softmax"; break;
        }
        lj["weights"] = layer.weights.data;
        lj["bias"] = layer.bias;
        layers.push_back(std::move(lj));
    }
    return j.dump();
}

DenseNet net_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    DenseNet net;
    net.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& lj : j.at("layers")) {
        Layer layer;
        const auto out = lj.at("out").get<std::size_t>();
        const auto in = lj.at("in").get<std::size_t>();
        const auto act = lj.at("activation").get<std::string>();
        if (act == "rectifier") layer.activation = Activation::Rectifier;
        else if (act == "identity") layer.activation = Activation::Identity;
        else if (act == "softmax") layer.activation = Activation::SoftmaxOutput;
        else throw BadConfig("unknown activation: " + act);
        layer.weights = Matrix(out, in);
        layer.weights.data = lj.at("weights").get<std::vector<double>>();
        if (layer.weights.data.size() != out * in) throw ShapeMismatch("net_from_json weights");
        layer.bias = lj.at("bias").get<std::vector<double>>();
        if (layer.bias.size() != out) throw ShapeMismatch("net_from_json bias");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace p3s
