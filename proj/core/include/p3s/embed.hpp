#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "p3s/matrix.hpp"
#include "p3s/neural.hpp"
#include "p3s/tabular.hpp"

namespace p3s {

inline constexpr std::size_t kDefaultVocabCap = 2048;
inline constexpr std::size_t kEmbedHidden = 128;

// Reserved term that missing cells map to, so missingness patterns are part
// of a column's embedding.
inline constexpr const char* kMissingTerm = "⟂missing";

struct Vocabulary {
    // Ordered by descending global frequency, ties lexicographic.
    std::vector<std::string> terms;
    std::optional<std::size_t> oov_index;  // bucket for terms beyond the cap
    int quantize_digits = kQuantizeDigits;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return terms.size() + (oov_index ? 1 : 0); }

    // Index of a cell's canonical term (oov bucket when capped out).
    std::size_t term_index(const Cell& cell) const;
};

std::string term_of(const Cell& cell, int quantize_digits = kQuantizeDigits);

// Treats each feature column as a document and each cell value as a term.
Vocabulary build_vocabulary(const Table& table, std::size_t vocab_cap = kDefaultVocabCap,
                            int quantize_digits = kQuantizeDigits);

// D x V matrix: per-column term counts, log(1+count) transformed, rows
// L2-normalized. Row order matches feature order; row content is independent
// of dataset row order.
Matrix term_frequency_matrix(const Table& table, const Vocabulary& vocab);

struct AutoencoderResult {
    DenseNet net;
    Matrix condensed;                // D x H bottleneck activations
    std::vector<double> loss_trace;  // entry 0 = initial loss, entry e = loss after e updates
};

// V -> 128 -> 128 -> [128] -> 128 -> 128 -> V, rectifier hidden layers,
// identity output, full-batch Adam at lr 1e-3.
AutoencoderResult train_autoencoder(const Matrix& raw, std::uint64_t seed, int epochs = 100,
                                    std::size_t hidden = kEmbedHidden);

}  // namespace p3s
