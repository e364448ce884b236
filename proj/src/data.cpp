#include "arprl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "arprl/nn.hpp"
#include "arprl/rng.hpp"

namespace arprl {

Mat Dataset::rows(const std::vector<Index>& idx) const {
    Mat out(static_cast<Index>(idx.size()), x.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(x.v.data() + idx[i] * x.cols, x.cols, out.v.data() + static_cast<Index>(i) * x.cols);
    return out;
}

std::vector<int> Dataset::labels_at(const std::vector<Index>& idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[static_cast<std::size_t>(idx[i])];
    return out;
}

std::vector<int> Dataset::attrs_at(const std::vector<Index>& idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = u[static_cast<std::size_t>(idx[i])];
    return out;
}

double Dataset::attr_majority_rate(const std::vector<Index>& idx) const {
    std::vector<Index> counts(static_cast<std::size_t>(num_attr_values), 0);
    for (Index i : idx) counts[static_cast<std::size_t>(u[static_cast<std::size_t>(i)])]++;
    Index best = 0;
    for (Index c : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(idx.size());
}

double Dataset::label_rate_gap(const std::vector<Index>& idx) const {
    if (num_attr_values != 2)
        throw std::invalid_argument("label_rate_gap: attribute must be binary");
    double n0 = 0, n1 = 0, y0 = 0, y1 = 0;
    for (Index i : idx) {
        const auto k = static_cast<std::size_t>(i);
        if (u[k] == 0) {
            n0 += 1;
            if (y[k] == 1) y0 += 1;
        } else {
            n1 += 1;
            if (y[k] == 1) y1 += 1;
        }
    }
    if (n0 == 0 || n1 == 0) throw std::runtime_error("label_rate_gap: empty attribute slice");
    return std::abs(y0 / n0 - y1 / n1);
}

namespace {

// 80/20 split from a seeded shuffle, then standardize the flagged columns
// on train statistics (population stddev; constant columns keep stddev 1).
void finalize_dataset(Dataset& d, std::uint64_t seed, const std::vector<bool>& standardize_col) {
    const Index n = d.x.rows;
    Rng rng(derive_seed(seed, {0x5eedULL}));
    std::vector<Index> perm = rng.permutation(n);
    const Index n_train = (n * 8) / 10;
    d.train_idx.assign(perm.begin(), perm.begin() + n_train);
    d.test_idx.assign(perm.begin() + n_train, perm.end());

    const Index cols = d.x.cols;
    d.col_mean.assign(static_cast<std::size_t>(cols), 0.0);
    d.col_std.assign(static_cast<std::size_t>(cols), 1.0);
    for (Index c = 0; c < cols; ++c) {
        if (!standardize_col[static_cast<std::size_t>(c)]) continue;
        double mean = 0.0;
        for (Index i : d.train_idx) mean += d.x.at(i, c);
        mean /= static_cast<double>(n_train);
        double var = 0.0;
        for (Index i : d.train_idx) {
            const double dv = d.x.at(i, c) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(n_train);
        double sd = std::sqrt(var);
        if (sd < 1e-12) sd = 1.0; // constant column
        d.col_mean[static_cast<std::size_t>(c)] = mean;
        d.col_std[static_cast<std::size_t>(c)] = sd;
        for (Index i = 0; i < n; ++i) d.x.at(i, c) = (d.x.at(i, c) - mean) / sd;
    }
}

} // namespace

Dataset gen_circles(int n_per_class, std::uint64_t seed) {
    if (n_per_class < 10)
        throw std::invalid_argument("gen_circles: n_per_class must be >= 10, got " +
                                    std::to_string(n_per_class));
    const Index n = 2 * static_cast<Index>(n_per_class);
    Dataset d;
    d.kind = DatasetKind::toy;
    d.x = Mat(n, 2);
    d.y.resize(static_cast<std::size_t>(n));
    d.u.resize(static_cast<std::size_t>(n));
    d.num_classes = 2;
    d.num_attr_values = 2;
    d.feature_names = {"x0", "x1"};

    Rng rng(seed);
    constexpr double radius = 0.25;
    for (int cls = 0; cls < 2; ++cls) {
        const double cx = (cls == 0) ? 0.0 : 1.0;
        for (int i = 0; i < n_per_class; ++i) {
            const Index row = static_cast<Index>(cls) * n_per_class + i;
            const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double px = cx + radius * std::cos(theta);
            const double py = radius * std::sin(theta);
            d.x.at(row, 0) = px;
            d.x.at(row, 1) = py;
            d.y[static_cast<std::size_t>(row)] = cls;
            d.u[static_cast<std::size_t>(row)] = (py > 0.0) ? 1 : 0;
        }
    }
    finalize_dataset(d, seed, {true, true});
    return d;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    }
    return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "?"; }

} // namespace

Dataset load_tabular(const std::string& path, const TabularSchema& schema, std::uint64_t seed) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);

    std::string header_line;
    if (!std::getline(is, header_line) || header_line.empty())
        throw std::runtime_error(path + ": empty file");
    const std::vector<std::string> header = split_line(header_line, schema.delimiter);

    auto col_of = [&header, &path](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<Index>(i);
        throw std::runtime_error(path + ": column '" + name + "' not found");
    };

    if (schema.label_column == schema.attribute_column)
        throw std::invalid_argument("schema: label and attribute columns must differ, both are '" +
                                    schema.label_column + "'");
    const Index label_col = col_of(schema.label_column);
    const Index attr_col = col_of(schema.attribute_column);
    std::set<Index> categorical;
    for (const auto& name : schema.categorical_columns) {
        const Index c = col_of(name);
        if (c == label_col || c == attr_col)
            throw std::invalid_argument("schema: '" + name +
                                        "' is the label or attribute column, not a feature");
        categorical.insert(c);
    }

    std::vector<std::vector<std::string>> rows;
    std::string line;
    Index dropped = 0;
    Index line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line, schema.delimiter);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        bool missing = false;
        for (const auto& c : cells)
            if (is_missing(c)) { missing = true; break; }
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(cells));
    }
    if (dropped > 0)
        std::cerr << "load_tabular: dropped " << dropped << " rows with missing values from "
                  << path << "\n";
    if (rows.empty()) throw std::runtime_error(path + ": no usable data rows");

    // value maps for label, attribute and categorical features (sorted order)
    auto value_map = [&rows](Index col) {
        std::map<std::string, int> m;
        for (const auto& r : rows) m.emplace(r[static_cast<std::size_t>(col)], 0);
        int next = 0;
        for (auto& kv : m) kv.second = next++;
        return m;
    };
    const auto label_map = value_map(label_col);
    const auto attr_map = value_map(attr_col);
    std::map<Index, std::map<std::string, int>> cat_maps;
    for (Index c : categorical) cat_maps[c] = value_map(c);

    // feature layout: original column order, categoricals expanded in place
    struct FeatCol {
        Index src;
        bool cat;
        int width;
    };
    std::vector<FeatCol> feats;
    Index width = 0;
    for (Index c = 0; c < static_cast<Index>(header.size()); ++c) {
        if (c == label_col || c == attr_col) continue;
        if (categorical.count(c)) {
            const int w = static_cast<int>(cat_maps[c].size());
            feats.push_back({c, true, w});
            width += w;
        } else {
            feats.push_back({c, false, 1});
            width += 1;
        }
    }

    Dataset d;
    d.kind = DatasetKind::tabular;
    d.x = Mat(static_cast<Index>(rows.size()), width);
    d.y.resize(rows.size());
    d.u.resize(rows.size());
    d.num_classes = static_cast<int>(label_map.size());
    d.num_attr_values = static_cast<int>(attr_map.size());

    std::vector<bool> standardize_col;
    for (const auto& fc : feats) {
        if (fc.cat) {
            for (const auto& kv : cat_maps[fc.src])
                d.feature_names.push_back(header[static_cast<std::size_t>(fc.src)] + "=" + kv.first);
            for (int k = 0; k < fc.width; ++k) standardize_col.push_back(false);
        } else {
            d.feature_names.push_back(header[static_cast<std::size_t>(fc.src)]);
            standardize_col.push_back(true);
        }
    }

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        d.y[r] = label_map.at(cells[static_cast<std::size_t>(label_col)]);
        d.u[r] = attr_map.at(cells[static_cast<std::size_t>(attr_col)]);
        Index out_c = 0;
        for (const auto& fc : feats) {
            const std::string& cell = cells[static_cast<std::size_t>(fc.src)];
            if (fc.cat) {
                const int k = cat_maps[fc.src].at(cell);
                d.x.at(static_cast<Index>(r), out_c + k) = 1.0;
                out_c += fc.width;
            } else {
                try {
                    d.x.at(static_cast<Index>(r), out_c) = parse_double(cell);
                } catch (const std::exception&) {
                    throw std::runtime_error(path + ": row " + std::to_string(r + 2) + ", column '" +
                                             header[static_cast<std::size_t>(fc.src)] +
                                             "': cannot parse numeric cell '" + cell + "'");
                }
                out_c += 1;
            }
        }
    }

    finalize_dataset(d, seed, standardize_col);
    return d;
}

// --- synthetic census-style table ---

namespace {

std::size_t weighted_pick(Rng& rng, const std::vector<double>& w) { return rng.categorical(w); }

} // namespace

void write_synthetic_census_csv(const std::string& path, int n_rows, std::uint64_t seed) {
    if (n_rows < 10) throw std::invalid_argument("write_synthetic_census_csv: need at least 10 rows");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);

    const std::vector<std::string> workclass = {"private", "self_emp", "government", "other"};
    const std::vector<std::string> occupation = {"craft", "sales", "clerical", "managerial",
                                                 "service", "technical"};
    const std::vector<std::string> relationship = {"married_primary", "married_secondary",
                                                   "own_child", "unmarried", "other_relative"};
    const std::vector<std::string> marital = {"divorced", "af_spouse", "civ_spouse",
                                              "spouse_absent", "never_married", "separated",
                                              "widowed"};

    os << "age,workclass,education_num,marital_status,occupation,relationship,sex,"
          "capital_gain,hours_per_week,tenure_years,household_size,income\n";

    // The attribute signal forms a ladder: a cheap high-contrast channel
    // (household_size, no task value), channels riding on the same latent
    // as the label (hours/tenure/education via w, expensive to strip), and
    // pure-task floor channels (age, capital_gain). Privacy pressure then
    // removes attribute information in cost order as its weight grows.
    Rng rng(seed);
    for (int i = 0; i < n_rows; ++i) {
        const int u = (rng.uniform() < 0.45) ? 1 : 0; // 0 = male-coded majority
        const double s = rng.normal();                // latent earning propensity
        const double w = s + (u == 0 ? 0.85 : -0.85); // contaminated earning channel

        const double logit_y = 1.6 * s + (u == 0 ? 0.35 : -0.65);
        const int y = (rng.uniform() < stable_sigmoid(logit_y)) ? 1 : 0;

        const double age = rng.normal(38.0 + 2.0 * s, 10.0);
        const double edu = rng.normal(10.0 + 0.5 * s + 1.1 * w, 2.0);
        const double hours = rng.normal(40.0 + 4.2 * w, 3.6);
        const double tenure = std::max(0.0, rng.normal(8.0 + 3.0 * w, 2.5));
        const double household = rng.normal(3.0 + (u == 0 ? 0.7 : -0.7), 0.9);
        double gain = 0.0;
        if (rng.uniform() < 0.06 + 0.10 * stable_sigmoid(2.0 * s))
            gain = std::exp(rng.normal(7.0 + 0.5 * s, 0.8));

        // occupation mixes the attribute with the earning latent
        std::vector<double> occ_w(6);
        {
            const double b = 0.6 * s;
            const double a = (u == 0) ? 0.8 : -0.8;
            occ_w = {std::exp(a + 0.1 * b), std::exp(0.2 * b), std::exp(-a + 0.1 * b),
                     std::exp(0.9 * b),     std::exp(-a - 0.4 * b), std::exp(a + 0.5 * b)};
        }
        const std::size_t occ = weighted_pick(rng, occ_w);

        // relationship carries a strong, task-independent attribute signal
        const std::vector<double> rel_w = (u == 0)
            ? std::vector<double>{0.62, 0.03, 0.09, 0.19, 0.07}
            : std::vector<double>{0.04, 0.44, 0.13, 0.29, 0.10};
        const std::size_t rel = weighted_pick(rng, rel_w);

        // marital status tracks relationship loosely (7 values)
        std::vector<double> mar_w(7, 0.05);
        if (rel == 0 || rel == 1) {
            mar_w = {0.06, 0.02, 0.72, 0.04, 0.06, 0.05, 0.05};
        } else if (rel == 2) {
            mar_w = {0.05, 0.01, 0.04, 0.05, 0.78, 0.04, 0.03};
        } else {
            mar_w = {0.26, 0.01, 0.08, 0.09, 0.38, 0.12, 0.06};
        }
        const std::size_t mar = weighted_pick(rng, mar_w);

        std::vector<double> wc_w = {std::exp(0.1 * s), std::exp(0.3 * s - 1.2),
                                    std::exp(-0.1 * s - 0.9), std::exp(-1.6)};
        const std::size_t wc = weighted_pick(rng, wc_w);

        os << format_double(std::round(age)) << "," << workclass[wc] << ","
           << format_double(std::round(edu * 2.0) / 2.0) << "," << marital[mar] << ","
           << occupation[occ] << "," << relationship[rel] << "," << (u == 1 ? "female" : "male")
           << "," << format_double(std::round(gain)) << "," << format_double(std::round(hours))
           << "," << format_double(std::round(tenure * 2.0) / 2.0) << ","
           << format_double(std::round(household * 10.0) / 10.0) << ","
           << (y == 1 ? ">50K" : "<=50K") << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

TabularSchema synthetic_census_schema(const std::string& attribute) {
    TabularSchema s;
    s.label_column = "income";
    s.attribute_column = attribute;
    s.categorical_columns = {"workclass", "marital_status", "occupation", "relationship"};
    if (attribute == "sex") {
        // marital/relationship stay features; sex is the protected attribute
    } else if (attribute == "marital_status") {
        s.categorical_columns = {"workclass", "occupation", "relationship", "sex"};
    } else {
        throw std::invalid_argument("synthetic census: unsupported attribute '" + attribute + "'");
    }
    return s;
}

// --- cache format ---

void save_dataset_cache(const Dataset& d, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "arprl-data v1\n";
    os << "kind " << to_string(d.kind) << "\n";
    os << "dims " << d.x.rows << " " << d.x.cols << " " << d.num_classes << " "
       << d.num_attr_values << "\n";
    os << "names";
    for (const auto& n : d.feature_names) os << " " << n;
    os << "\n";
    for (Index i = 0; i < d.x.rows; ++i) {
        for (Index c = 0; c < d.x.cols; ++c) os << (c ? " " : "") << format_double(d.x.at(i, c));
        os << "\n";
    }
    auto write_ints = [&os](const char* tag, const std::vector<int>& v) {
        os << tag;
        for (int x : v) os << " " << x;
        os << "\n";
    };
    auto write_idx = [&os](const char* tag, const std::vector<Index>& v) {
        os << tag << " " << v.size();
        for (Index x : v) os << " " << x;
        os << "\n";
    };
    write_ints("y", d.y);
    write_ints("u", d.u);
    write_idx("train", d.train_idx);
    write_idx("test", d.test_idx);
    os << "mean";
    for (double m : d.col_mean) os << " " << format_double(m);
    os << "\nstd";
    for (double s : d.col_std) os << " " << format_double(s);
    os << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset_cache(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open dataset cache: " + path);
    std::string header;
    std::getline(is, header);
    if (header != "arprl-data v1")
        throw std::runtime_error(path + ": bad header '" + header + "'");

    Dataset d;
    std::string tag, kind_s;
    Index n = 0, cols = 0;
    if (!(is >> tag >> kind_s) || tag != "kind") throw std::runtime_error(path + ": bad kind line");
    d.kind = dataset_kind_from_string(kind_s);
    if (!(is >> tag >> n >> cols >> d.num_classes >> d.num_attr_values) || tag != "dims")
        throw std::runtime_error(path + ": bad dims line");
    if (!(is >> tag) || tag != "names") throw std::runtime_error(path + ": bad names line");
    d.feature_names.resize(static_cast<std::size_t>(cols));
    for (auto& nm : d.feature_names)
        if (!(is >> nm)) throw std::runtime_error(path + ": truncated names");

    d.x = Mat(n, cols);
    std::string tok;
    for (auto& v : d.x.v) {
        if (!(is >> tok)) throw std::runtime_error(path + ": truncated feature matrix");
        v = parse_double(tok);
    }
    auto read_ints = [&is, &path](const char* want, std::vector<int>& v, std::size_t count) {
        std::string t;
        if (!(is >> t) || t != want) throw std::runtime_error(path + ": expected '" + want + "'");
        v.resize(count);
        for (auto& x : v)
            if (!(is >> x)) throw std::runtime_error(path + ": truncated " + std::string(want));
    };
    read_ints("y", d.y, static_cast<std::size_t>(n));
    read_ints("u", d.u, static_cast<std::size_t>(n));
    auto read_idx = [&is, &path](const char* want, std::vector<Index>& v) {
        std::string t;
        std::size_t count = 0;
        if (!(is >> t >> count) || t != want) throw std::runtime_error(path + ": expected '" + want + "'");
        v.resize(count);
        for (auto& x : v)
            if (!(is >> x)) throw std::runtime_error(path + ": truncated " + std::string(want));
    };
    read_idx("train", d.train_idx);
    read_idx("test", d.test_idx);
    auto read_doubles = [&is, &path, &tok](const char* want, std::vector<double>& v, std::size_t count) {
        std::string t;
        if (!(is >> t) || t != want) throw std::runtime_error(path + ": expected '" + want + "'");
        v.resize(count);
        for (auto& x : v) {
            if (!(is >> tok)) throw std::runtime_error(path + ": truncated " + std::string(want));
            x = parse_double(tok);
        }
    };
    read_doubles("mean", d.col_mean, static_cast<std::size_t>(cols));
    read_doubles("std", d.col_std, static_cast<std::size_t>(cols));
    return d;
}

} // namespace arprl
