#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "p3s/errors.hpp"
#include "p3s/matrix.hpp"
#include "p3s/tabular.hpp"

namespace p3s {

inline constexpr std::size_t kDefaultOneHotCap = 64;

enum class Imputer { Median, MostFrequentValue, Mean, None };
enum class Encoder { Ordinal, OneHot, None };
enum class Scaler { MinMax, Standard, MaxAbs, None };

// One per-column pipeline: imputer, then encoder, then scaler (order fixed).
struct PipelineTriple {
    Imputer imputer = Imputer::None;
    Encoder encoder = Encoder::None;
    Scaler scaler = Scaler::None;

    auto operator<=>(const PipelineTriple&) const = default;
};

std::string to_string(Imputer);
std::string to_string(Encoder);
std::string to_string(Scaler);
Imputer imputer_from_string(std::string_view);
Encoder encoder_from_string(std::string_view);
Scaler scaler_from_string(std::string_view);

// {"imputer": ..., "encoder": ..., "scaler": ...} with the canonical names.
std::string triple_to_json(const PipelineTriple&);
PipelineTriple triple_from_json(std::string_view json_text);

// All 48 triples in canonical imputer-major order; element 0 is
// (Median, Ordinal, MinMax) and the id of a triple is its position here.
std::vector<PipelineTriple> enumerate_pipelines();
int triple_id(const PipelineTriple&);
PipelineTriple triple_from_id(int id);

// The 11 primitives (each category includes its skip step).
enum class Primitive {
    ImputerMedian,
    ImputerMostFrequentValue,
    ImputerMean,
    ImputerNone,
    EncoderOrdinal,
    EncoderOneHot,
    EncoderNone,
    ScalerMinMax,
    ScalerStandard,
    ScalerMaxAbs,
    ScalerNone,
};
std::string to_string(Primitive);
Primitive primitive_of(Imputer);
Primitive primitive_of(Encoder);
Primitive primitive_of(Scaler);

// Column classes used as memo keys: coarse enough to generalize across
// columns, fine enough not to ban pipelines that work elsewhere.
enum class ColumnClass { Numeric, NonNumeric, NumericHighCard, AllMissing };
std::string to_string(ColumnClass);
ColumnClass classify_column(const Profile& profile, std::size_t onehot_cap = kDefaultOneHotCap);

// Raised when a primitive cannot apply to a column; carries the memo key.
struct InvalidPrimitive : P3sError {
    InvalidPrimitive(Primitive prim, ColumnClass cls, std::string message,
                     std::string feature = "")
        : P3sError(std::move(message)), primitive(prim), column_class(cls),
          feature(std::move(feature)) {}

    Primitive primitive;
    ColumnClass column_class;
    std::string feature;
};

// State learned from the fitting rows only.
struct FittedTriple {
    PipelineTriple spec;
    std::string column_name;
    ColumnKind column_kind = ColumnKind::NonNumeric;
    ColumnClass column_class = ColumnClass::NonNumeric;
    std::variant<std::monostate, double, std::string> imputer_stat;
    std::vector<std::string> categories;  // encoder state, sorted lexicographically
    // Per-output-column scaler parameters. MinMax: (min, max); Standard:
    // (mean, population std); MaxAbs: (unused, max |x|).
    std::vector<double> scale_a;
    std::vector<double> scale_b;
    std::size_t out_width = 0;
    bool fitted = false;
};

FittedTriple fit_triple(const PipelineTriple& spec, const Column& col,
                        std::span<const std::size_t> fit_rows,
                        std::size_t onehot_cap = kDefaultOneHotCap);

// rows x out_width; Missing cells surviving a None imputer come out as NaN
// on the unencoded numeric path (encoders map them like unseen categories).
Matrix transform_column(const FittedTriple& fitted, const Column& col,
                        std::span<const std::size_t> rows);

struct DesignMatrix {
    Matrix x;
    // Per feature, the [begin, end) span of output columns; spans are
    // contiguous, disjoint, and in original feature order.
    std::vector<std::pair<std::size_t, std::size_t>> column_span;
};

std::vector<FittedTriple> fit_feature_triples(const Table& table,
                                              std::span<const PipelineTriple> spec_per_feature,
                                              std::span<const std::size_t> fit_rows,
                                              std::size_t onehot_cap = kDefaultOneHotCap);

// Residual non-finite values map to 0 so downstream learners stay total.
DesignMatrix transform_features(const Table& table, std::span<const FittedTriple> fitted,
                                std::span<const std::size_t> rows);

DesignMatrix assemble_design_matrix(const Table& table,
                                    std::span<const PipelineTriple> spec_per_feature,
                                    std::span<const std::size_t> fit_rows,
                                    std::span<const std::size_t> transform_rows,
                                    std::size_t onehot_cap = kDefaultOneHotCap);

// Grow-only record of invalid (primitive, column class) pairs. Single writer:
// the trial loop records sequentially; concurrent fold workers only read
// matrices already built.
class SearchSpace {
public:
    SearchSpace() : triples_(enumerate_pipelines()) {}

    const std::vector<PipelineTriple>& triples() const { return triples_; }

    void record_invalid(Primitive prim, ColumnClass cls) { memo_.insert({prim, cls}); }

    bool allows(const PipelineTriple& t, ColumnClass cls) const {
        return !banned(primitive_of(t.imputer), cls) && !banned(primitive_of(t.encoder), cls) &&
               !banned(primitive_of(t.scaler), cls);
    }

    const std::set<std::pair<Primitive, ColumnClass>>& memo() const { return memo_; }

private:
    bool banned(Primitive p, ColumnClass cls) const { return memo_.count({p, cls}) != 0; }

    std::vector<PipelineTriple> triples_;
    std::set<std::pair<Primitive, ColumnClass>> memo_;
};

inline void memo_record(SearchSpace& space, Primitive prim, ColumnClass cls) {
    space.record_invalid(prim, cls);
}

inline bool memo_allows(const SearchSpace& space, const PipelineTriple& t, const Profile& profile,
                        std::size_t onehot_cap = kDefaultOneHotCap) {
    return space.allows(t, classify_column(profile, onehot_cap));
}

}  // namespace p3s
