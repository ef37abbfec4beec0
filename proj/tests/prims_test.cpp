#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "p3s/prims.hpp"
#include "testsupport.hpp"

using namespace p3s;
using namespace p3s::test;

namespace {

std::vector<std::size_t> all_rows(const Column& col) {
    std::vector<std::size_t> rows(col.cells.size());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

Column with_missing(Column col, std::size_t at) {
    col.cells[at] = MissingCell{};
    return col;
}

}  // namespace

TEST_CASE("enumerate_pipelines yields 48 distinct triples in canonical order") {
    const auto all = enumerate_pipelines();
    REQUIRE(all.size() == 48);
    CHECK(all.front() == PipelineTriple{Imputer::Median, Encoder::Ordinal, Scaler::MinMax});
    CHECK(all.back() == PipelineTriple{Imputer::None, Encoder::None, Scaler::None});

    std::set<PipelineTriple> distinct(all.begin(), all.end());
    CHECK(distinct.size() == 48);

    std::size_t encoder_none = 0;
    for (const auto& t : all)
        if (t.encoder == Encoder::None) ++encoder_none;
    CHECK(encoder_none == 16);  // 4 imputers x 4 scalers

    for (int id = 0; id < 48; ++id) CHECK(triple_id(all[id]) == id);
    for (int id = 0; id < 48; ++id) CHECK(triple_from_id(id) == all[id]);
}

TEST_CASE("triple json names are exact") {
    const PipelineTriple t{Imputer::MostFrequentValue, Encoder::OneHot, Scaler::MaxAbs};
    CHECK(triple_to_json(t) ==
          R"({"imputer":"MostFrequentValue","encoder":"OneHot","scaler":"MaxAbs"})");
    CHECK(triple_from_json(triple_to_json(t)) == t);
}

TEST_CASE("imputer fit statistics") {
    const Column mean_col = with_missing(numeric_column("a", {1.0, 0.0, 3.0}), 1);
    const auto mean_fit =
        fit_triple({Imputer::Mean, Encoder::None, Scaler::None}, mean_col, all_rows(mean_col));
    CHECK(std::get<double>(mean_fit.imputer_stat) == 2.0);

    const Column med_col = with_missing(numeric_column("a", {1.0, 0.0, 3.0, 100.0}), 1);
    const auto med_fit =
        fit_triple({Imputer::Median, Encoder::None, Scaler::None}, med_col, all_rows(med_col));
    CHECK(std::get<double>(med_fit.imputer_stat) == 3.0);

    const Column freq_col = text_column("a", {"b", "a", "b", "c"});
    const auto freq_fit = fit_triple({Imputer::MostFrequentValue, Encoder::OneHot, Scaler::None},
                                     freq_col, all_rows(freq_col));
    CHECK(std::get<std::string>(freq_fit.imputer_stat) == "b");

    // tie -> lexicographically smallest
    const Column tie_col = text_column("a", {"b", "a"});
    const auto tie_fit = fit_triple({Imputer::MostFrequentValue, Encoder::OneHot, Scaler::None},
                                    tie_col, all_rows(tie_col));
    CHECK(std::get<std::string>(tie_fit.imputer_stat) == "a");
}

TEST_CASE("invalid primitives carry memo keys") {
    const Column text = text_column("t", {"a", "b"});
    CHECK_THROWS_AS(
        fit_triple({Imputer::Mean, Encoder::None, Scaler::None}, text, all_rows(text)),
        InvalidPrimitive);
    try {
        fit_triple({Imputer::Mean, Encoder::None, Scaler::None}, text, all_rows(text));
    } catch (const InvalidPrimitive& e) {
        CHECK(e.primitive == Primitive::ImputerMean);
        CHECK(e.column_class == ColumnClass::NonNumeric);
    }

    // any imputer on all-missing fit rows
    Column missing;
    missing.name = "m";
    missing.kind = ColumnKind::NonNumeric;
    missing.cells = {MissingCell{}, MissingCell{}};
    try {
        fit_triple({Imputer::MostFrequentValue, Encoder::OneHot, Scaler::None}, missing,
                   all_rows(missing));
        CHECK(false);
    } catch (const InvalidPrimitive& e) {
        CHECK(e.primitive == Primitive::ImputerMostFrequentValue);
        CHECK(e.column_class == ColumnClass::AllMissing);
    }

    // scaler on an unencoded non-numeric column blames the skipped encoder
    try {
        fit_triple({Imputer::None, Encoder::None, Scaler::MinMax}, text, all_rows(text));
        CHECK(false);
    } catch (const InvalidPrimitive& e) {
        CHECK(e.primitive == Primitive::EncoderNone);
        CHECK(e.column_class == ColumnClass::NonNumeric);
    }

    // OneHot over the cap
    Column wide;
    wide.name = "w";
    wide.kind = ColumnKind::Numeric;
    for (int i = 0; i < 80; ++i) wide.cells.emplace_back(static_cast<double>(i));
    try {
        fit_triple({Imputer::None, Encoder::OneHot, Scaler::None}, wide, all_rows(wide), 64);
        CHECK(false);
    } catch (const InvalidPrimitive& e) {
        CHECK(e.primitive == Primitive::EncoderOneHot);
        CHECK(e.column_class == ColumnClass::NumericHighCard);
    }
}

TEST_CASE("standard scaler uses population std") {
    const Column col = numeric_column("a", {1.0, 2.0, 3.0});
    const auto fit =
        fit_triple({Imputer::None, Encoder::None, Scaler::Standard}, col, all_rows(col));
    CHECK(fit.scale_a[0] == doctest::Approx(2.0));
    CHECK(fit.scale_b[0] == doctest::Approx(0.816497).epsilon(1e-6));
}

TEST_CASE("scaler transforms") {
    const Column a = numeric_column("a", {1.0, 2.0, 3.0});
    const auto minmax = fit_triple({Imputer::None, Encoder::None, Scaler::MinMax}, a, all_rows(a));
    const auto out = transform_column(minmax, a, all_rows(a));
    CHECK(out(0, 0) == doctest::Approx(0.0));
    CHECK(out(1, 0) == doctest::Approx(0.5));
    CHECK(out(2, 0) == doctest::Approx(1.0));

    const Column b = numeric_column("b", {-2.0, 1.0, 4.0});
    const auto maxabs = fit_triple({Imputer::None, Encoder::None, Scaler::MaxAbs}, b, all_rows(b));
    const auto out_b = transform_column(maxabs, b, all_rows(b));
    CHECK(out_b(0, 0) == doctest::Approx(-0.5));
    CHECK(out_b(1, 0) == doctest::Approx(0.25));
    CHECK(out_b(2, 0) == doctest::Approx(1.0));

    // constant column -> all zero under MinMax; zero std -> zero under Standard
    const Column c = numeric_column("c", {5.0, 5.0});
    const auto const_minmax =
        fit_triple({Imputer::None, Encoder::None, Scaler::MinMax}, c, all_rows(c));
    CHECK(transform_column(const_minmax, c, all_rows(c))(0, 0) == 0.0);
    const auto const_std =
        fit_triple({Imputer::None, Encoder::None, Scaler::Standard}, c, all_rows(c));
    CHECK(transform_column(const_std, c, all_rows(c))(1, 0) == 0.0);
}

TEST_CASE("encoders: ordinal indices and one-hot rows, unseen handling") {
    const Column fit_col = text_column("e", {"b", "a", "b"});
    const auto ord =
        fit_triple({Imputer::None, Encoder::Ordinal, Scaler::None}, fit_col, all_rows(fit_col));
    CHECK(ord.categories == std::vector<std::string>{"a", "b"});

    const Column query = text_column("e", {"b", "a", "z"});
    const auto ord_out = transform_column(ord, query, all_rows(query));
    CHECK(ord_out(0, 0) == 1.0);
    CHECK(ord_out(1, 0) == 0.0);
    CHECK(ord_out(2, 0) == 2.0);  // unseen -> overflow index |categories|

    const Column oh_fit = text_column("e", {"x", "y"});
    const auto oh =
        fit_triple({Imputer::None, Encoder::OneHot, Scaler::None}, oh_fit, all_rows(oh_fit));
    const Column oh_query = text_column("e", {"y", "x", "z"});
    const auto oh_out = transform_column(oh, oh_query, all_rows(oh_query));
    REQUIRE(oh_out.cols == 2);
    CHECK(oh_out(0, 0) == 0.0);
    CHECK(oh_out(0, 1) == 1.0);
    CHECK(oh_out(1, 0) == 1.0);
    CHECK(oh_out(1, 1) == 0.0);
    CHECK(oh_out(2, 0) == 0.0);
    CHECK(oh_out(2, 1) == 0.0);  // unseen -> all-zero row
}

TEST_CASE("transform before fit raises UnfittedState") {
    FittedTriple unfitted;
    const Column col = numeric_column("a", {1.0});
    CHECK_THROWS_AS(transform_column(unfitted, col, all_rows(col)), UnfittedState);
}

TEST_CASE("scaler overflow on extreme magnitudes raises NumericOverflow") {
    const Column col = numeric_column("a", {-1e308, 1e308});
    const auto fitted =
        fit_triple({Imputer::None, Encoder::None, Scaler::MinMax}, col, all_rows(col));
    // the fit range itself overflows to inf, so finite inputs stop mapping
    CHECK_THROWS_AS(transform_column(fitted, col, all_rows(col)), NumericOverflow);
}

TEST_CASE("design matrix assembly: widths, spans, identity") {
    Table t;
    t.features.push_back(text_column("c2", {"a", "b", "a", "b"}));
    t.features.push_back(text_column("c3", {"x", "y", "z", "x"}));
    t.target = target_column({"p", "q", "p", "q"});
    const std::vector<PipelineTriple> onehot(2, {Imputer::None, Encoder::OneHot, Scaler::None});
    std::vector<std::size_t> rows{0, 1, 2, 3};
    const auto dm = assemble_design_matrix(t, onehot, rows, rows);
    CHECK(dm.x.cols == 5);  // cardinalities 2 + 3
    CHECK(dm.column_span[0] == std::pair<std::size_t, std::size_t>{0, 2});
    CHECK(dm.column_span[1] == std::pair<std::size_t, std::size_t>{2, 5});

    Table num;
    num.features.push_back(numeric_column("a", {1.0, 2.0}));
    num.features.push_back(numeric_column("b", {3.0, 4.0}));
    num.target = target_column({"p", "q"});
    const std::vector<PipelineTriple> identity(2, {Imputer::None, Encoder::None, Scaler::None});
    std::vector<std::size_t> r2{0, 1};
    const auto raw = assemble_design_matrix(num, identity, r2, r2);
    CHECK(raw.x(0, 0) == 1.0);
    CHECK(raw.x(1, 1) == 4.0);

    // invalid feature fails the whole assembly, tagged with the feature
    std::vector<PipelineTriple> specs = onehot;
    specs[1] = {Imputer::Mean, Encoder::OneHot, Scaler::None};
    try {
        assemble_design_matrix(t, specs, rows, rows);
        CHECK(false);
    } catch (const InvalidPrimitive& e) {
        CHECK(e.feature == "c3");
    }
}

TEST_CASE("memo recording and filtering") {
    SearchSpace space;
    const Profile non_numeric{ColumnKind::NonNumeric, 3, 0};

    // fresh memo allows everything
    for (const auto& t : space.triples()) CHECK(memo_allows(space, t, non_numeric));

    memo_record(space, Primitive::ImputerMean, ColumnClass::NonNumeric);
    CHECK_FALSE(memo_allows(space, {Imputer::Mean, Encoder::OneHot, Scaler::None}, non_numeric));
    CHECK(memo_allows(space, {Imputer::Median, Encoder::OneHot, Scaler::None}, non_numeric));

    // the same primitive on another class stays allowed
    const Profile numeric{ColumnKind::Numeric, 3, 0};
    CHECK(memo_allows(space, {Imputer::Mean, Encoder::OneHot, Scaler::None}, numeric));
}

TEST_CASE("memo: OneHot ban on high-cardinality numeric excludes exactly the 16 OneHot triples") {
    SearchSpace space;
    memo_record(space, Primitive::EncoderOneHot, ColumnClass::NumericHighCard);
    const Profile highcard{ColumnKind::Numeric, 100, 0};

    std::size_t banned = 0;
    for (const auto& t : space.triples()) {
        if (!memo_allows(space, t, highcard)) {
            ++banned;
            CHECK(t.encoder == Encoder::OneHot);
        }
    }
    CHECK(banned == 16);  // 4 imputers x 4 scalers with the encoder pinned
    CHECK_FALSE(memo_allows(space, {Imputer::Median, Encoder::OneHot, Scaler::MinMax}, highcard));
}

TEST_CASE("fit is leakage-safe: held-out transforms never touch fitted state") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Table t = random_table(rng, 30, 1, 1, 0.2);
        const PipelineTriple spec{Imputer::MostFrequentValue, Encoder::OneHot, Scaler::Standard};
        std::vector<std::size_t> fit_rows, held_out;
        for (std::size_t r = 0; r < 30; ++r) (r < 20 ? fit_rows : held_out).push_back(r);
        const auto& col = t.features[1];
        std::size_t observed = 0;
        for (std::size_t r : fit_rows)
            if (!is_missing(col.cells[r])) ++observed;
        if (observed == 0) continue;
        const auto fitted = fit_triple(spec, col, fit_rows);
        const auto snapshot = fitted;
        (void)transform_column(fitted, col, held_out);
        CHECK(fitted.categories == snapshot.categories);
        CHECK(fitted.scale_a == snapshot.scale_a);
        CHECK(fitted.scale_b == snapshot.scale_b);
        // refit on the same rows is bit-identical
        const auto refit = fit_triple(spec, col, fit_rows);
        CHECK(refit.scale_a == fitted.scale_a);
        CHECK(refit.scale_b == fitted.scale_b);
        CHECK(refit.categories == fitted.categories);
    }
}

TEST_CASE("scaler and encoder invariants over random columns") {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const bool numeric = rng.next_double() < 0.5;
        const std::size_t n = 3 + rng.next_index(40);
        Column col;
        col.name = "c";
        if (numeric) {
            col.kind = ColumnKind::Numeric;
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.next_double() < 0.15) col.cells.emplace_back(MissingCell{});
                else col.cells.emplace_back(std::floor(rng.next_uniform(-9, 9) * 4.0) / 4.0);
            }
        } else {
            col.kind = ColumnKind::NonNumeric;
            const char* cats[] = {"u", "v", "w"};
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.next_double() < 0.15) col.cells.emplace_back(MissingCell{});
                else col.cells.emplace_back(std::string(cats[rng.next_index(3)]));
            }
        }
        std::size_t observed = 0;
        for (const auto& cell : col.cells)
            if (!is_missing(cell)) ++observed;
        if (observed == 0) continue;

        const auto rows = all_rows(col);
        const Imputer imputer = numeric ? Imputer::Median : Imputer::MostFrequentValue;

        {
            const auto f = fit_triple({imputer, Encoder::Ordinal, Scaler::MinMax}, col, rows);
            const auto out = transform_column(f, col, rows);
            for (double v : out.data) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
        {
            const auto f = fit_triple({imputer, Encoder::Ordinal, Scaler::MaxAbs}, col, rows);
            const auto out = transform_column(f, col, rows);
            for (double v : out.data) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
        }
        {
            const auto f = fit_triple({imputer, Encoder::Ordinal, Scaler::Standard}, col, rows);
            const auto out = transform_column(f, col, rows);
            double mean = 0.0;
            for (double v : out.data) mean += v;
            mean /= static_cast<double>(out.data.size());
            CHECK(std::abs(mean) < 1e-9);
            double var = 0.0;
            for (double v : out.data) var += (v - mean) * (v - mean);
            var /= static_cast<double>(out.data.size());
            const double sd = std::sqrt(var);
            CHECK((sd < 1e-9 || std::abs(sd - 1.0) < 1e-9));
        }
        {
            const auto f = fit_triple({imputer, Encoder::OneHot, Scaler::None}, col, rows);
            const auto out = transform_column(f, col, rows);
            for (std::size_t r = 0; r < out.rows; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < out.cols; ++c) sum += out(r, c);
                CHECK(sum == 1.0);  // imputed fit rows one-hot exactly once
            }
        }
        if (numeric) {
            // no NaN after a non-None imputer
            const auto f = fit_triple({imputer, Encoder::None, Scaler::None}, col, rows);
            const auto out = transform_column(f, col, rows);
            for (double v : out.data) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("fit/transform determinism is bit-exact") {
    const Column col = numeric_column("a", {0.1, 0.7, 0.3, 0.9, 0.5});
    const auto rows = all_rows(col);
    for (const auto& spec : enumerate_pipelines()) {
        const auto f1 = fit_triple(spec, col, rows);
        const auto f2 = fit_triple(spec, col, rows);
        const auto o1 = transform_column(f1, col, rows);
        const auto o2 = transform_column(f2, col, rows);
        CHECK(o1.data == o2.data);
    }
}
