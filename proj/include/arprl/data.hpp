#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arprl/config.hpp"
#include "arprl/tensor.hpp"

namespace arprl {

// Aligned inputs, task labels and private attributes with a fixed
// train/test split. Features are standardized on train-split statistics;
// the per-column mean/stddev used are kept for reference.
struct Dataset {
    DatasetKind kind = DatasetKind::toy;
    Mat x;                         // (N, d) standardized features
    std::vector<int> y;            // task labels in [0, num_classes)
    std::vector<int> u;            // private attributes in [0, num_attr_values)
    std::vector<Index> train_idx;
    std::vector<Index> test_idx;
    int num_classes = 0;
    int num_attr_values = 0;
    std::vector<double> col_mean;
    std::vector<double> col_std;
    std::vector<std::string> feature_names;

    Index n_rows() const { return x.rows; }
    Index n_features() const { return x.cols; }

    Mat rows(const std::vector<Index>& idx) const;
    std::vector<int> labels_at(const std::vector<Index>& idx) const;
    std::vector<int> attrs_at(const std::vector<Index>& idx) const;

    // most frequent attribute value on the given split, as a rate
    double attr_majority_rate(const std::vector<Index>& idx) const;
    // |Pr(y=1|u=0) - Pr(y=1|u=1)| on the given split (binary y and u)
    double label_rate_gap(const std::vector<Index>& idx) const;
};

// Two circles of radius 0.25 centered at (0,0) and (1,0), points uniform on
// the circumference. Class = circle id, attribute = 1 iff the point lies
// above the x-axis. 80/20 split, then features standardized on train stats.
Dataset gen_circles(int n_per_class, std::uint64_t seed);

struct TabularSchema {
    std::string label_column;
    std::string attribute_column;
    std::vector<std::string> categorical_columns;
    char delimiter = ',';
};

// CSV with a header row. Categorical feature columns are one-hot encoded,
// numeric columns standardized on train statistics. Rows with missing
// values ('?' or empty cells) are dropped with a counted warning on stderr.
Dataset load_tabular(const std::string& path, const TabularSchema& schema, std::uint64_t seed);

// Synthetic census-style table: numeric and categorical features, a binary
// income label and binary sex plus 7-valued marital-status attributes.
// Used as the tabular benchmark; written as ordinary CSV so it flows
// through the same load_tabular path as external data.
void write_synthetic_census_csv(const std::string& path, int n_rows, std::uint64_t seed);
TabularSchema synthetic_census_schema(const std::string& attribute = "sex");

// internal cache format ("arprl-data v1"); round-trips bit-exactly
void save_dataset_cache(const Dataset& d, const std::string& path);
Dataset load_dataset_cache(const std::string& path);

} // namespace arprl
