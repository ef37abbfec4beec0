#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "p3s/rng.hpp"
#include "p3s/tabular.hpp"

namespace p3s::test {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("p3s_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path write_temp_csv(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / ("p3s_" + name + ".csv");
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline Column numeric_column(std::string name, const std::vector<double>& values) {
    Column col;
    col.name = std::move(name);
    col.kind = ColumnKind::Numeric;
    for (double v : values) col.cells.emplace_back(v);
    return col;
}

inline Column text_column(std::string name, const std::vector<std::string>& values) {
    Column col;
    col.name = std::move(name);
    col.kind = ColumnKind::NonNumeric;
    for (const auto& v : values) col.cells.emplace_back(v);
    return col;
}

inline Column target_column(const std::vector<std::string>& values, std::string name = "class") {
    return text_column(std::move(name), values);
}

// Random table with a mix of numeric/text columns and optional missing cells.
inline Table random_table(p3s::Rng& rng, std::size_t rows, std::size_t numeric_cols,
                          std::size_t text_cols, double missing_rate = 0.1) {
    Table t;
    for (std::size_t c = 0; c < numeric_cols; ++c) {
        Column col;
        col.name = "num" + std::to_string(c);
        col.kind = ColumnKind::Numeric;
        bool any = false;
        for (std::size_t r = 0; r < rows; ++r) {
            if (rng.next_double() < missing_rate) {
                col.cells.emplace_back(MissingCell{});
            } else {
                col.cells.emplace_back(std::floor(rng.next_uniform(-50.0, 50.0) * 8.0) / 8.0);
                any = true;
            }
        }
        if (!any) col.kind = ColumnKind::NonNumeric;
        t.features.push_back(std::move(col));
    }
    const char* cats[] = {"alpha", "beta", "gamma", "delta"};
    for (std::size_t c = 0; c < text_cols; ++c) {
        Column col;
        col.name = "cat" + std::to_string(c);
        col.kind = ColumnKind::NonNumeric;
        for (std::size_t r = 0; r < rows; ++r) {
            if (rng.next_double() < missing_rate) col.cells.emplace_back(MissingCell{});
            else col.cells.emplace_back(std::string(cats[rng.next_index(4)]));
        }
        t.features.push_back(std::move(col));
    }
    t.target.name = "class";
    t.target.kind = ColumnKind::NonNumeric;
    for (std::size_t r = 0; r < rows; ++r)
        t.target.cells.emplace_back(std::string(rng.next_double() < 0.5 ? "yes" : "no"));
    // ensure both classes appear
    t.target.cells[0] = std::string("yes");
    if (rows > 1) t.target.cells[1] = std::string("no");
    return t;
}

}  // namespace p3s::test
