#include "p3s/embed.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

std::string term_of(const Cell& cell, int quantize_digits) {
    if (is_missing(cell)) return kMissingTerm;
    if (is_number(cell)) return quantize_number(std::get<double>(cell), quantize_digits);
    return std::get<std::string>(cell);
}

std::size_t Vocabulary::term_index(const Cell& cell) const {
    const auto it = index.find(term_of(cell, quantize_digits));
    if (it != index.end()) return it->second;
    if (oov_index) return *oov_index;
    throw BadConfig("term not in vocabulary and no oov bucket");
}

Vocabulary build_vocabulary(const Table& table, std::size_t vocab_cap, int quantize_digits) {
    std::map<std::string, std::size_t> counts;
    for (const auto& col : table.features) {
        for (const auto& cell : col.cells) ++counts[term_of(cell, quantize_digits)];
    }

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.quantize_digits = quantize_digits;
    const std::size_t keep = std::min(vocab_cap, ranked.size());
    vocab.terms.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        vocab.index[ranked[i].first] = i;
        vocab.terms.push_back(ranked[i].first);
    }
    if (ranked.size() > vocab_cap) vocab.oov_index = keep;
    return vocab;
}

Matrix term_frequency_matrix(const Table& table, const Vocabulary& vocab) {
    Matrix e(table.n_features(), vocab.size());
    for (std::size_t j = 0; j < table.n_features(); ++j) {
        for (const auto& cell : table.features[j].cells) {
            e(j, vocab.term_index(cell)) += 1.0;
        }
        auto row = e.row(j);
        double norm_sq = 0.0;
        for (double& v : row) {
            v = std::log1p(v);
            norm_sq += v * v;
        }
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (double& v : row) v *= inv;
        }
    }
    return e;
}

AutoencoderResult train_autoencoder(const Matrix& raw, std::uint64_t seed, int epochs,
                                    std::size_t hidden) {
    const std::size_t v = raw.cols;
    const std::size_t dims[] = {v, hidden, hidden, hidden, hidden, hidden, v};
    const Activation acts[] = {Activation::Rectifier, Activation::Rectifier,
                               Activation::Rectifier, Activation::Rectifier,
                               Activation::Rectifier, Activation::Identity};

    AutoencoderResult result;
    result.net = DenseNet::make(dims, acts, seed);
    AdamState adam = AdamState::for_net(result.net);

    auto trace = forward(result.net, raw);
    result.loss_trace.push_back(mse_loss(output_of(trace), raw).loss);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto loss = mse_loss(output_of(trace), raw);
        const auto grads = backward(result.net, trace, loss.grad);
        adam_step(adam, result.net, grads);
        trace = forward(result.net, raw);
        result.loss_trace.push_back(mse_loss(output_of(trace), raw).loss);
    }

    // bottleneck = post-activation of the middle layer
    result.condensed = trace.post[2];
    return result;
}

}  // namespace p3s
