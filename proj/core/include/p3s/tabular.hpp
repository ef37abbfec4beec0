#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace p3s {

// Significant digits used when a numeric cell stands in for a categorical
// term (vocabulary terms, encoder categories, profile cardinality).
inline constexpr int kQuantizeDigits = 4;

// Shortest decimal that round-trips to the same double.
std::string format_number(double value);

// Value rendered at `digits` significant digits ("%.*g"); -0 normalizes to "0".
std::string quantize_number(double value, int digits = kQuantizeDigits);

struct MissingCell {
    bool operator==(const MissingCell&) const = default;
};

// A cell is missing, a finite number, or verbatim text.
using Cell = std::variant<MissingCell, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<MissingCell>(c); }
inline bool is_number(const Cell& c) { return std::holds_alternative<double>(c); }
inline bool is_text(const Cell& c) { return std::holds_alternative<std::string>(c); }

enum class ColumnKind { Numeric, NonNumeric };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::NonNumeric;
    std::vector<Cell> cells;

    bool operator==(const Column&) const = default;
};

// Immutable after load; safe for concurrent readers. Feature order is stable
// for the lifetime of a run.
struct Table {
    std::vector<Column> features;
    Column target;  // always NonNumeric text cells, never missing

    std::size_t n_rows() const { return target.cells.size(); }
    std::size_t n_features() const { return features.size(); }

    const Column* feature(std::string_view name) const;
    std::vector<std::string> feature_names() const;

    // Distinct class labels, sorted; and per-row index into that list.
    std::vector<std::string> class_labels() const;
    std::vector<int> encoded_target() const;

    bool operator==(const Table&) const = default;
};

struct CsvOptions {
    std::vector<std::string> missing_markers = {"", "?", "NA", "NaN"};
};

// RFC-4180 CSV with a header row. Cells matching a missing marker become
// Missing; a column is Numeric iff every remaining cell parses as a double
// (non-finite parses normalize to Missing). Rows with a missing target cell
// are dropped with a warning.
Table load_csv(const std::filesystem::path& path, std::string_view target_name,
               const CsvOptions& options = {}, std::vector<std::string>* warnings = nullptr);

// Features in order, then the target column; numbers in shortest round-trip
// form. load_csv(save_csv(t)) == t for tables that came from load_csv.
void save_csv(const Table& table, const std::filesystem::path& path);

struct Profile {
    ColumnKind kind = ColumnKind::NonNumeric;
    std::size_t cardinality = 0;  // distinct non-missing values (numeric: quantized form)
    std::size_t missing_count = 0;
};

Profile column_profile(const Column& col);

struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // per-row fold index in [0, k)
    std::vector<std::string> warnings;
};

// Stratified k-fold: per fold, each class count is within 1 of its
// proportional share. Classes smaller than k distribute round-robin with a
// SmallClass warning. Pure function of (table, k, seed).
FoldPlan make_folds(const Table& table, int k, std::uint64_t seed);

}  // namespace p3s
