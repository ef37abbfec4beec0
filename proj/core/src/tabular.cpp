#include "p3s/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "p3s/errors.hpp"
#include "p3s/rng.hpp"

namespace p3s {

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string quantize_number(double value, int digits) {
    if (value == 0.0) return "0";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
    return buf;
}

const Column* Table::feature(std::string_view name) const {
    for (const auto& col : features) {
        if (col.name == name) return &col;
    }
    return nullptr;
}

std::vector<std::string> Table::feature_names() const {
    std::vector<std::string> names;
    names.reserve(features.size());
    for (const auto& col : features) names.push_back(col.name);
    return names;
}

std::vector<std::string> Table::class_labels() const {
    std::set<std::string> labels;
    for (const auto& cell : target.cells) labels.insert(std::get<std::string>(cell));
    return {labels.begin(), labels.end()};
}

std::vector<int> Table::encoded_target() const {
    const auto labels = class_labels();
    std::vector<int> out;
    out.reserve(target.cells.size());
    for (const auto& cell : target.cells) {
        const auto& s = std::get<std::string>(cell);
        const auto it = std::lower_bound(labels.begin(), labels.end(), s);
        out.push_back(static_cast<int>(it - labels.begin()));
    }
    return out;
}

namespace {

// Full-string double parse. std::from_chars rejects a leading '+', which CSV
// numeric cells commonly carry, so it is stripped first.
bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::vector<std::string>> parse_csv_text(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;  // a comma opens the next field
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw IoError("unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

std::string quote_csv_field(const std::string& s) {
    const bool needs_quotes = s.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

Table load_csv(const std::filesystem::path& path, std::string_view target_name,
               const CsvOptions& options, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const auto records = parse_csv_text(buffer.str());
    if (records.empty()) throw IoError("empty file: " + path.string());

    const auto& header = records.front();
    std::size_t target_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == target_name) target_idx = i;
    }
    if (target_idx == header.size())
        throw MissingTarget("target column '" + std::string(target_name) + "' not in header");

    const std::size_t width = header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width)
            throw RaggedRows("row " + std::to_string(r) + " has " +
                             std::to_string(records[r].size()) + " fields, expected " +
                             std::to_string(width));
    }

    const std::set<std::string> markers(options.missing_markers.begin(),
                                        options.missing_markers.end());
    auto is_marker = [&](const std::string& s) { return markers.count(s) != 0; };

    // Rows whose target cell is a missing marker carry no label; drop them.
    std::vector<std::size_t> kept;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (is_marker(records[r][target_idx])) ++dropped;
        else kept.push_back(r);
    }
    if (dropped > 0 && warnings)
        warnings->push_back("dropped " + std::to_string(dropped) + " rows with missing target");

    Table table;
    table.target.name = header[target_idx];
    table.target.kind = ColumnKind::NonNumeric;
    for (std::size_t r : kept) table.target.cells.emplace_back(records[r][target_idx]);

    for (std::size_t c = 0; c < width; ++c) {
        if (c == target_idx) continue;
        Column col;
        col.name = header[c];
        bool numeric = true;
        for (std::size_t r : kept) {
            const auto& raw = records[r][c];
            if (is_marker(raw)) continue;
            double v;
            if (!parse_double(raw, v)) {
                numeric = false;
                break;
            }
        }
        bool any_value = false;
        for (std::size_t r : kept) {
            const auto& raw = records[r][c];
            if (is_marker(raw)) {
                col.cells.emplace_back(MissingCell{});
                continue;
            }
            if (numeric) {
                double v = 0.0;
                parse_double(raw, v);
                if (std::isfinite(v)) {
                    col.cells.emplace_back(v);
                    any_value = true;
                } else {
                    col.cells.emplace_back(MissingCell{});  // NaN/inf normalize to Missing
                }
            } else {
                col.cells.emplace_back(raw);
                any_value = true;
            }
        }
        col.kind = (numeric && any_value) ? ColumnKind::Numeric : ColumnKind::NonNumeric;
        table.features.push_back(std::move(col));
    }

    std::set<std::string> classes;
    for (const auto& cell : table.target.cells) classes.insert(std::get<std::string>(cell));
    if (classes.size() < 2)
        throw DegenerateTarget("target '" + std::string(target_name) + "' has " +
                               std::to_string(classes.size()) + " distinct classes, need >= 2");
    return table;
}

void save_csv(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());

    std::string line;
    for (const auto& col : table.features) {
        line += quote_csv_field(col.name);
        line.push_back(',');
    }
    line += quote_csv_field(table.target.name);
    out << line << "\n";

    auto render = [](const Cell& cell) -> std::string {
        if (is_missing(cell)) return "";
        if (is_number(cell)) return format_number(std::get<double>(cell));
        return quote_csv_field(std::get<std::string>(cell));
    };

    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        line.clear();
        for (const auto& col : table.features) {
            line += render(col.cells[r]);
            line.push_back(',');
        }
        line += render(table.target.cells[r]);
        out << line << "\n";
    }
}

Profile column_profile(const Column& col) {
    Profile p;
    p.kind = col.kind;
    std::set<std::string> distinct;
    for (const auto& cell : col.cells) {
        if (is_missing(cell)) {
            ++p.missing_count;
        } else if (is_number(cell)) {
            distinct.insert(quantize_number(std::get<double>(cell)));
        } else {
            distinct.insert(std::get<std::string>(cell));
        }
    }
    p.cardinality = distinct.size();
    return p;
}

FoldPlan make_folds(const Table& table, int k, std::uint64_t seed) {
    const std::size_t n = table.n_rows();
    if (k < 2 || static_cast<std::size_t>(k) > n)
        throw BadK("k=" + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");

    const auto labels = table.class_labels();
    const auto encoded = table.encoded_target();

    std::vector<std::vector<std::size_t>> by_class(labels.size());
    for (std::size_t r = 0; r < n; ++r) by_class[encoded[r]].push_back(r);

    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(n, 0);

    Rng rng(derive_stream(seed, stream::kFolds));
    std::size_t offset = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rows = by_class[c];
        if (rows.size() < static_cast<std::size_t>(k)) {
            plan.warnings.push_back("SmallClass: class '" + labels[c] + "' has " +
                                    std::to_string(rows.size()) + " members, fewer than k=" +
                                    std::to_string(k) + "; distributed round-robin");
        }
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            plan.assignments[rows[i]] = static_cast<int>((offset + i) % k);
        }
        offset = (offset + rows.size()) % k;
    }
    return plan;
}

}  // namespace p3s
