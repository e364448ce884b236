#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "arprl/data.hpp"

using namespace arprl;

namespace {

// circle geometry before standardization: undo the stored column transform
double raw_coord(const Dataset& d, Index row, Index col) {
    return d.x.at(row, col) * d.col_std[static_cast<std::size_t>(col)] +
           d.col_mean[static_cast<std::size_t>(col)];
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
}

} // namespace

TEST_CASE("circles: counts, split sizes, and on-circle geometry") {
    const Dataset d = gen_circles(5000, 7);
    CHECK(d.n_rows() == 10000);
    CHECK(d.train_idx.size() == 8000);
    CHECK(d.test_idx.size() == 2000);
    CHECK(d.num_classes == 2);
    CHECK(d.num_attr_values == 2);

    for (Index i = 0; i < d.n_rows(); ++i) {
        const double cx = (d.y[static_cast<std::size_t>(i)] == 0) ? 0.0 : 1.0;
        const double px = raw_coord(d, i, 0) - cx;
        const double py = raw_coord(d, i, 1);
        CHECK(std::abs(std::sqrt(px * px + py * py) - 0.25) < 1e-12);
        CHECK(d.u[static_cast<std::size_t>(i)] == ((py > 0.0) ? 1 : 0));
    }
}

TEST_CASE("circles: standardized train columns and determinism") {
    const Dataset a = gen_circles(500, 123);
    const Dataset b = gen_circles(500, 123);
    for (std::size_t i = 0; i < a.x.v.size(); ++i) CHECK(a.x.v[i] == b.x.v[i]);
    CHECK(a.train_idx == b.train_idx);

    for (Index c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (Index i : a.train_idx) mean += a.x.at(i, c);
        mean /= static_cast<double>(a.train_idx.size());
        for (Index i : a.train_idx) {
            const double dv = a.x.at(i, c) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(a.train_idx.size());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(gen_circles(5, 1), std::invalid_argument);
}

TEST_CASE("split is disjoint and covering for every seed") {
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        const Dataset d = gen_circles(100, seed);
        std::set<Index> seen;
        for (Index i : d.train_idx) seen.insert(i);
        for (Index i : d.test_idx) seen.insert(i);
        CHECK(seen.size() == static_cast<std::size_t>(d.n_rows()));
        CHECK(d.train_idx.size() + d.test_idx.size() == static_cast<std::size_t>(d.n_rows()));
    }
}

TEST_CASE("tabular loading: one-hot widths, value maps, errors") {
    const std::string path = "tab_test.csv";
    write_file(path,
               "f1,color,label,attr\n"
               "1.5,red,yes,a\n"
               "2.5,green,no,b\n"
               "0.5,blue,yes,a\n"
               "1.0,red,no,b\n");
    TabularSchema schema;
    schema.label_column = "label";
    schema.attribute_column = "attr";
    schema.categorical_columns = {"color"};

    const Dataset d = load_tabular(path, schema, 3);
    CHECK(d.n_rows() == 4);
    CHECK(d.n_features() == 1 + 3); // numeric f1 + one-hot(color) of 3 values
    CHECK(d.num_classes == 2);
    CHECK(d.num_attr_values == 2);

    // one-hot block sums to 1 per row
    for (Index i = 0; i < d.n_rows(); ++i) {
        double s = 0.0;
        for (Index c = 1; c < 4; ++c) s += d.x.at(i, c);
        CHECK(s == doctest::Approx(1.0));
    }

    TabularSchema bad = schema;
    bad.attribute_column = "label";
    CHECK_THROWS_WITH_AS(load_tabular(path, bad, 3), doctest::Contains("label"),
                         std::invalid_argument);

    TabularSchema missing = schema;
    missing.label_column = "revenue";
    CHECK_THROWS_WITH_AS(load_tabular(path, missing, 3), doctest::Contains("revenue"),
                         std::runtime_error);

    write_file(path, "f1,label,attr\nnot_a_number,yes,a\n2.0,no,b\n");
    TabularSchema numeric_schema;
    numeric_schema.label_column = "label";
    numeric_schema.attribute_column = "attr";
    CHECK_THROWS_WITH_AS(load_tabular(path, numeric_schema, 3), doctest::Contains("f1"),
                         std::runtime_error);

    write_file(path, "f1,label,attr\n");
    CHECK_THROWS_AS(load_tabular(path, numeric_schema, 3), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("rows with missing cells are dropped") {
    const std::string path = "tab_missing.csv";
    write_file(path,
               "f1,label,attr\n"
               "1.0,yes,a\n"
               "?,yes,b\n"
               "2.0,no,a\n"
               "3.0,,b\n"
               "4.0,no,b\n");
    TabularSchema schema;
    schema.label_column = "label";
    schema.attribute_column = "attr";
    const Dataset d = load_tabular(path, schema, 1);
    CHECK(d.n_rows() == 3);
    std::remove(path.c_str());
}

TEST_CASE("dataset cache round-trips bit-exactly") {
    const Dataset d = gen_circles(50, 11);
    const std::string path = "cache_test.txt";
    save_dataset_cache(d, path);
    const Dataset r = load_dataset_cache(path);
    std::remove(path.c_str());

    CHECK(r.kind == d.kind);
    CHECK(r.x.rows == d.x.rows);
    for (std::size_t i = 0; i < d.x.v.size(); ++i) CHECK(r.x.v[i] == d.x.v[i]);
    CHECK(r.y == d.y);
    CHECK(r.u == d.u);
    CHECK(r.train_idx == d.train_idx);
    CHECK(r.test_idx == d.test_idx);
    for (std::size_t i = 0; i < d.col_mean.size(); ++i) {
        CHECK(r.col_mean[i] == d.col_mean[i]);
        CHECK(r.col_std[i] == d.col_std[i]);
    }
}

TEST_CASE("synthetic census generates both attribute schemas") {
    const std::string path = "census_test.csv";
    write_synthetic_census_csv(path, 400, 5);

    const Dataset gender = load_tabular(path, synthetic_census_schema("sex"), 5);
    CHECK(gender.num_attr_values == 2);
    CHECK(gender.num_classes == 2);

    const Dataset marital = load_tabular(path, synthetic_census_schema("marital_status"), 5);
    CHECK(marital.num_attr_values == 7);
    std::remove(path.c_str());

    CHECK_THROWS_AS(synthetic_census_schema("age"), std::invalid_argument);
}
