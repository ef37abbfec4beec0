#include "p3s/prims.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

namespace p3s {

namespace {
constexpr Imputer kImputers[] = {Imputer::Median, Imputer::MostFrequentValue, Imputer::Mean,
                                 Imputer::None};
constexpr Encoder kEncoders[] = {Encoder::Ordinal, Encoder::OneHot, Encoder::None};
constexpr Scaler kScalers[] = {Scaler::MinMax, Scaler::Standard, Scaler::MaxAbs, Scaler::None};
}  // namespace

std::string to_string(Imputer i) {
    switch (i) {
        case Imputer::Median: return "Median";
        case Imputer::MostFrequentValue: return "MostFrequentValue";
        case Imputer::Mean: return "Mean";
        case Imputer::None: return "None";
    }
    return "?";
}

std::string to_string(Encoder e) {
    switch (e) {
        case Encoder::Ordinal: return "Ordinal";
        case Encoder::OneHot: return "OneHot";
        case Encoder::None: return "None";
    }
    return "?";
}

std::string to_string(Scaler s) {
    switch (s) {
        case Scaler::MinMax: return "MinMax";
        case Scaler::Standard: return "Standard";
        case Scaler::MaxAbs: return "MaxAbs";
        case Scaler::None: return "None";
    }
    return "?";
}

Imputer imputer_from_string(std::string_view s) {
    for (Imputer i : kImputers)
        if (to_string(i) == s) return i;
    throw BadConfig("unknown imputer: " + std::string(s));
}

Encoder encoder_from_string(std::string_view s) {
    for (Encoder e : kEncoders)
        if (to_string(e) == s) return e;
    throw BadConfig("unknown encoder: " + std::string(s));
}

Scaler scaler_from_string(std::string_view s) {
    for (Scaler sc : kScalers)
        if (to_string(sc) == s) return sc;
    throw BadConfig("unknown scaler: " + std::string(s));
}

std::string triple_to_json(const PipelineTriple& t) {
    nlohmann::ordered_json j;
    j["imputer"] = to_string(t.imputer);
    j["encoder"] = to_string(t.encoder);
    j["scaler"] = to_string(t.scaler);
    return j.dump();
}

PipelineTriple triple_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    PipelineTriple t;
    t.imputer = imputer_from_string(j.at("imputer").get<std::string>());
    t.encoder = encoder_from_string(j.at("encoder").get<std::string>());
    t.scaler = scaler_from_string(j.at("scaler").get<std::string>());
    return t;
}

std::vector<PipelineTriple> enumerate_pipelines() {
    std::vector<PipelineTriple> out;
    out.reserve(48);
    for (Imputer i : kImputers)
        for (Encoder e : kEncoders)
            for (Scaler s : kScalers) out.push_back({i, e, s});
    return out;
}

int triple_id(const PipelineTriple& t) {
    return static_cast<int>(t.imputer) * 12 + static_cast<int>(t.encoder) * 4 +
           static_cast<int>(t.scaler);
}

PipelineTriple triple_from_id(int id) {
    if (id < 0 || id >= 48) throw BadConfig("pipeline id out of range: " + std::to_string(id));
    return {static_cast<Imputer>(id / 12), static_cast<Encoder>((id / 4) % 3),
            static_cast<Scaler>(id % 4)};
}

std::string to_string(Primitive p) {
    switch (p) {
        case Primitive::ImputerMedian: return "Imputer:Median";
        case Primitive::ImputerMostFrequentValue: return "Imputer:MostFrequentValue";
        case Primitive::ImputerMean: return "Imputer:Mean";
        case Primitive::ImputerNone: return "Imputer:None";
        case Primitive::EncoderOrdinal: return "Encoder:Ordinal";
        case Primitive::EncoderOneHot: return "Encoder:OneHot";
        case Primitive::EncoderNone: return "Encoder:None";
        case Primitive::ScalerMinMax: return "Scaler:MinMax";
        case Primitive::ScalerStandard: return "Scaler:Standard";
        case Primitive::ScalerMaxAbs: return "Scaler:MaxAbs";
        case Primitive::ScalerNone: return "Scaler:None";
    }
    return "?";
}

Primitive primitive_of(Imputer i) {
    switch (i) {
        case Imputer::Median: return Primitive::ImputerMedian;
        case Imputer::MostFrequentValue: return Primitive::ImputerMostFrequentValue;
        case Imputer::Mean: return Primitive::ImputerMean;
        case Imputer::None: return Primitive::ImputerNone;
    }
    return Primitive::ImputerNone;
}

Primitive primitive_of(Encoder e) {
    switch (e) {
        case Encoder::Ordinal: return Primitive::EncoderOrdinal;
        case Encoder::OneHot: return Primitive::EncoderOneHot;
        case Encoder::None: return Primitive::EncoderNone;
    }
    return Primitive::EncoderNone;
}

Primitive primitive_of(Scaler s) {
    switch (s) {
        case Scaler::MinMax: return Primitive::ScalerMinMax;
        case Scaler::Standard: return Primitive::ScalerStandard;
        case Scaler::MaxAbs: return Primitive::ScalerMaxAbs;
        case Scaler::None: return Primitive::ScalerNone;
    }
    return Primitive::ScalerNone;
}

std::string to_string(ColumnClass c) {
    switch (c) {
        case ColumnClass::Numeric: return "Numeric";
        case ColumnClass::NonNumeric: return "NonNumeric";
        case ColumnClass::NumericHighCard: return "Numeric-highcard";
        case ColumnClass::AllMissing: return "AllMissing";
    }
    return "?";
}

ColumnClass classify_column(const Profile& profile, std::size_t onehot_cap) {
    if (profile.cardinality == 0) return ColumnClass::AllMissing;
    if (profile.kind == ColumnKind::Numeric) {
        return profile.cardinality > onehot_cap ? ColumnClass::NumericHighCard
                                                : ColumnClass::Numeric;
    }
    return ColumnClass::NonNumeric;
}

namespace {

std::string canonical_value(const Cell& cell) {
    if (is_number(cell)) return quantize_number(std::get<double>(cell));
    return std::get<std::string>(cell);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Encode the given rows through imputer + encoder only. Missing values that
// survive a None imputer become NaN (numeric path) or the unseen-category
// treatment (encoder paths).
Matrix encode_rows(const FittedTriple& ft, const Column& col,
                   std::span<const std::size_t> rows) {
    Matrix out(rows.size(), ft.out_width);

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ft.categories.size(); ++i) index[ft.categories[i]] = i;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Cell* cell = &col.cells[rows[i]];
        Cell imputed;
        if (is_missing(*cell) && ft.spec.imputer != Imputer::None) {
            if (std::holds_alternative<double>(ft.imputer_stat))
                imputed = std::get<double>(ft.imputer_stat);
            else
                imputed = std::get<std::string>(ft.imputer_stat);
            cell = &imputed;
        }
        switch (ft.spec.encoder) {
            case Encoder::None: {
                if (ft.column_kind == ColumnKind::NonNumeric)
                    throw InvalidPrimitive(Primitive::EncoderNone, ft.column_class,
                                           "column '" + ft.column_name +
                                               "' is non-numeric and has no encoder");
                out(i, 0) = is_missing(*cell) ? std::nan("") : std::get<double>(*cell);
                break;
            }
            case Encoder::Ordinal: {
                std::size_t idx = ft.categories.size();  // overflow index for unseen
                if (!is_missing(*cell)) {
                    const auto it = index.find(canonical_value(*cell));
                    if (it != index.end()) idx = it->second;
                }
                out(i, 0) = static_cast<double>(idx);
                break;
            }
            case Encoder::OneHot: {
                if (!is_missing(*cell)) {
                    const auto it = index.find(canonical_value(*cell));
                    if (it != index.end()) out(i, it->second) = 1.0;
                }
                break;
            }
        }
    }
    return out;
}

}  // namespace

FittedTriple fit_triple(const PipelineTriple& spec, const Column& col,
                        std::span<const std::size_t> fit_rows, std::size_t onehot_cap) {
    FittedTriple ft;
    ft.spec = spec;
    ft.column_name = col.name;
    ft.column_kind = col.kind;
    ft.column_class = classify_column(column_profile(col), onehot_cap);

    std::vector<double> numbers;
    std::vector<std::string> texts;
    std::size_t missing = 0;
    for (std::size_t r : fit_rows) {
        const Cell& cell = col.cells[r];
        if (is_missing(cell)) ++missing;
        else if (is_number(cell)) numbers.push_back(std::get<double>(cell));
        else texts.push_back(std::get<std::string>(cell));
    }

    if (spec.imputer != Imputer::None) {
        if (numbers.empty() && texts.empty())
            throw InvalidPrimitive(primitive_of(spec.imputer), ColumnClass::AllMissing,
                                   "imputer " + to_string(spec.imputer) + " on column '" +
                                       col.name + "' with no observed fit values");
        if ((spec.imputer == Imputer::Mean || spec.imputer == Imputer::Median) &&
            col.kind == ColumnKind::NonNumeric)
            throw InvalidPrimitive(primitive_of(spec.imputer), ft.column_class,
                                   to_string(spec.imputer) + " imputer on non-numeric column '" +
                                       col.name + "'");
        switch (spec.imputer) {
            case Imputer::Mean:
                ft.imputer_stat = mean_of(numbers);
                break;
            case Imputer::Median:
                ft.imputer_stat = median_of(numbers);
                break;
            case Imputer::MostFrequentValue: {
                if (col.kind == ColumnKind::Numeric) {
                    std::map<double, std::size_t> counts;
                    for (double v : numbers) ++counts[v];
                    double best = 0.0;
                    std::size_t best_count = 0;
                    for (const auto& [v, c] : counts) {
                        if (c > best_count) {
                            best = v;
                            best_count = c;
                        }
                    }
                    ft.imputer_stat = best;
                } else {
                    std::map<std::string, std::size_t> counts;
                    for (const auto& s : texts) ++counts[s];
                    std::string best;
                    std::size_t best_count = 0;
                    for (const auto& [s, c] : counts) {
                        if (c > best_count) {
                            best = s;
                            best_count = c;
                        }
                    }
                    ft.imputer_stat = best;
                }
                break;
            }
            case Imputer::None:
                break;
        }
    }

    if (spec.encoder != Encoder::None) {
        std::set<std::string> cats;
        for (std::size_t r : fit_rows) {
            const Cell& cell = col.cells[r];
            if (is_missing(cell)) {
                if (spec.imputer == Imputer::None) continue;  // stays missing, not a category
                if (std::holds_alternative<double>(ft.imputer_stat))
                    cats.insert(quantize_number(std::get<double>(ft.imputer_stat)));
                else
                    cats.insert(std::get<std::string>(ft.imputer_stat));
            } else {
                cats.insert(canonical_value(cell));
            }
        }
        ft.categories.assign(cats.begin(), cats.end());
        if (spec.encoder == Encoder::OneHot && ft.categories.size() > onehot_cap) {
            const ColumnClass cls = col.kind == ColumnKind::Numeric ? ColumnClass::NumericHighCard
                                                                    : ColumnClass::NonNumeric;
            throw InvalidPrimitive(Primitive::EncoderOneHot, cls,
                                   "OneHot on column '" + col.name + "' with " +
                                       std::to_string(ft.categories.size()) +
                                       " categories exceeds cap " + std::to_string(onehot_cap));
        }
    }

    ft.out_width = spec.encoder == Encoder::OneHot ? ft.categories.size() : 1;

    if (spec.scaler != Scaler::None) {
        if (spec.encoder == Encoder::None && col.kind == ColumnKind::NonNumeric) {
            // The root cause is the skipped encoder: every scaler fails here,
            // while scalers after OneHot/Ordinal are fine on this column.
            throw InvalidPrimitive(Primitive::EncoderNone, ft.column_class,
                                   to_string(spec.scaler) + " scaler on non-numeric column '" +
                                       col.name + "' with no encoder");
        }
        ft.fitted = true;  // encode_rows requires a usable state
        const Matrix enc = encode_rows(ft, col, fit_rows);
        ft.scale_a.assign(ft.out_width, 0.0);
        ft.scale_b.assign(ft.out_width, 0.0);
        for (std::size_t c = 0; c < ft.out_width; ++c) {
            std::vector<double> vals;
            vals.reserve(enc.rows);
            for (std::size_t r = 0; r < enc.rows; ++r) {
                if (std::isfinite(enc(r, c))) vals.push_back(enc(r, c));
            }
            switch (spec.scaler) {
                case Scaler::MinMax: {
                    double lo = 0.0, hi = 0.0;
                    if (!vals.empty()) {
                        lo = *std::min_element(vals.begin(), vals.end());
                        hi = *std::max_element(vals.begin(), vals.end());
                    }
                    ft.scale_a[c] = lo;
                    ft.scale_b[c] = hi;
                    break;
                }
                case Scaler::Standard: {
                    double mu = vals.empty() ? 0.0 : mean_of(vals);
                    double var = 0.0;
                    for (double v : vals) var += (v - mu) * (v - mu);
                    if (!vals.empty()) var /= static_cast<double>(vals.size());
                    ft.scale_a[c] = mu;
                    ft.scale_b[c] = std::sqrt(var);  // population std
                    break;
                }
                case Scaler::MaxAbs: {
                    double m = 0.0;
                    for (double v : vals) m = std::max(m, std::fabs(v));
                    ft.scale_b[c] = m;
                    break;
                }
                case Scaler::None:
                    break;
            }
        }
    }

    ft.fitted = true;
    return ft;
}

Matrix transform_column(const FittedTriple& ft, const Column& col,
                        std::span<const std::size_t> rows) {
    if (!ft.fitted) throw UnfittedState("transform_column on unfitted state");

    Matrix out = encode_rows(ft, col, rows);
    if (ft.spec.scaler == Scaler::None) return out;

    for (std::size_t c = 0; c < out.cols; ++c) {
        const double a = ft.scale_a[c];
        const double b = ft.scale_b[c];
        for (std::size_t r = 0; r < out.rows; ++r) {
            const double x = out(r, c);
            double y = x;
            switch (ft.spec.scaler) {
                case Scaler::MinMax:
                    y = (b == a) ? 0.0 : (x - a) / (b - a);
                    break;
                case Scaler::Standard:
                    y = (b == 0.0) ? 0.0 : (x - a) / b;
                    break;
                case Scaler::MaxAbs:
                    y = x / (b == 0.0 ? 1.0 : b);
                    break;
                case Scaler::None:
                    break;
            }
            if (std::isfinite(x) && !std::isfinite(y))
                throw NumericOverflow("scaler output overflow on column '" + ft.column_name + "'");
            out(r, c) = y;
        }
    }
    return out;
}

std::vector<FittedTriple> fit_feature_triples(const Table& table,
                                              std::span<const PipelineTriple> spec_per_feature,
                                              std::span<const std::size_t> fit_rows,
                                              std::size_t onehot_cap) {
    if (spec_per_feature.size() != table.n_features())
        throw ShapeMismatch("need one pipeline per feature");
    std::vector<FittedTriple> fitted;
    fitted.reserve(table.n_features());
    for (std::size_t j = 0; j < table.n_features(); ++j) {
        try {
            fitted.push_back(fit_triple(spec_per_feature[j], table.features[j], fit_rows,
                                        onehot_cap));
        } catch (const InvalidPrimitive& e) {
            throw InvalidPrimitive(e.primitive, e.column_class, e.what(),
                                   table.features[j].name);
        }
    }
    return fitted;
}

DesignMatrix transform_features(const Table& table, std::span<const FittedTriple> fitted,
                                std::span<const std::size_t> rows) {
    std::size_t width = 0;
    for (const auto& ft : fitted) width += ft.out_width;

    DesignMatrix dm;
    dm.x = Matrix(rows.size(), width);
    dm.column_span.reserve(fitted.size());

    std::size_t offset = 0;
    for (std::size_t j = 0; j < fitted.size(); ++j) {
        Matrix part;
        try {
            part = transform_column(fitted[j], table.features[j], rows);
        } catch (const InvalidPrimitive& e) {
            throw InvalidPrimitive(e.primitive, e.column_class, e.what(),
                                   table.features[j].name);
        }
        for (std::size_t r = 0; r < part.rows; ++r) {
            for (std::size_t c = 0; c < part.cols; ++c) {
                const double v = part(r, c);
                dm.x(r, offset + c) = std::isfinite(v) ? v : 0.0;
            }
        }
        dm.column_span.emplace_back(offset, offset + part.cols);
        offset += part.cols;
    }
    return dm;
}

DesignMatrix assemble_design_matrix(const Table& table,
                                    std::span<const PipelineTriple> spec_per_feature,
                                    std::span<const std::size_t> fit_rows,
                                    std::span<const std::size_t> transform_rows,
                                    std::size_t onehot_cap) {
    const auto fitted = fit_feature_triples(table, spec_per_feature, fit_rows, onehot_cap);
    return transform_features(table, fitted, transform_rows);
}

}  // namespace p3s
