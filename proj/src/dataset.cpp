#include "botdet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace botdet {

std::vector<double> Dataset::column(size_t i) const {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r[i]);
    return col;
}

int Dataset::feature_index(const std::string& name) const {
    for (size_t i = 0; i < feature_names.size(); ++i)
        if (feature_names[i] == name) return static_cast<int>(i);
    return -1;
}

Dataset dataset_from_flows(const std::vector<FeatureVector>& flows) {
    Dataset ds;
    ds.feature_names.assign(feature_names().begin(), feature_names().end());
    bool labeled = !flows.empty() && flows.front().label.has_value();
    for (const auto& fv : flows) {
        ds.rows.emplace_back(fv.values.begin(), fv.values.end());
        if (labeled) ds.labels.push_back(fv.label.value());
    }
    return ds;
}

NormalizationParams NormalizationParams::fit(const Dataset& ds) {
    NormalizationParams p;
    p.per_feature.resize(ds.num_features());
    for (size_t j = 0; j < ds.num_features(); ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& r : ds.rows) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        if (ds.rows.empty()) lo = hi = 0.0;
        p.per_feature[j] = {lo, hi};
    }
    return p;
}

double normalize(double x, const MinMax& p) {
    if (!std::isfinite(x)) throw std::invalid_argument("normalize: non-finite input");
    if (p.hi <= p.lo) return 0.5;
    // lerp form of 0.05 + 0.9*t keeps the endpoints exact
    double t = (x - p.lo) / (p.hi - p.lo);
    return 0.05 * (1.0 - t) + 0.95 * t;
}

double denormalize(double x_n, const MinMax& p) {
    if (!std::isfinite(x_n)) throw std::invalid_argument("denormalize: non-finite input");
    return p.lo + (x_n - 0.05) * (p.hi - p.lo) / 0.9;
}

double normalize_clamped(double x, const MinMax& p) {
    return std::clamp(normalize(x, p), 0.05, 0.95);
}

double entropy(const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("entropy: empty input");
    std::map<int, size_t> counts;
    for (int c : labels) ++counts[c];
    double n = static_cast<double>(labels.size());
    double h = 0.0;
    for (const auto& [cls, cnt] : counts) {
        double p = static_cast<double>(cnt) / n;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

namespace {

std::vector<int> discretize_equal_frequency(const std::vector<double>& column, int bins) {
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    std::vector<double> cuts;
    for (int b = 1; b < bins; ++b) {
        size_t pos = b * n / static_cast<size_t>(bins);
        cuts.push_back(sorted[pos]);
    }
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<int> out;
    out.reserve(n);
    for (double x : column) {
        // bin = number of cut values <= x; invariant under monotone transforms
        auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
        out.push_back(static_cast<int>(it - cuts.begin()));
    }
    return out;
}

double entropy_of_counts(const std::map<int, size_t>& counts, size_t total) {
    double h = 0.0;
    for (const auto& [cls, cnt] : counts) {
        if (cnt == 0) continue;
        double p = static_cast<double>(cnt) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

// Fayyad & Irani style recursive entropy minimization with MDL stopping.
void mdl_split(const std::vector<std::pair<double, int>>& sl, size_t lo, size_t hi,
               std::vector<double>& cuts) {
    size_t n = hi - lo;
    if (n < 2) return;

    std::map<int, size_t> total;
    for (size_t i = lo; i < hi; ++i) ++total[sl[i].second];
    if (total.size() < 2) return;
    double h_s = entropy_of_counts(total, n);

    std::map<int, size_t> left;
    double best_e = std::numeric_limits<double>::infinity();
    size_t best_i = 0;
    std::map<int, size_t> best_left;
    for (size_t i = lo; i + 1 < hi; ++i) {
        ++left[sl[i].second];
        if (sl[i].first == sl[i + 1].first) continue;  // cut only between distinct values
        size_t nl = i + 1 - lo, nr = hi - (i + 1);
        std::map<int, size_t> right;
        for (const auto& [cls, cnt] : total) {
            size_t lc = left.count(cls) ? left.at(cls) : 0;
            if (cnt > lc) right[cls] = cnt - lc;
        }
        double e = (static_cast<double>(nl) / n) * entropy_of_counts(left, nl) +
                   (static_cast<double>(nr) / n) * entropy_of_counts(right, nr);
        if (e < best_e) {
            best_e = e;
            best_i = i;
            best_left = left;
        }
    }
    if (!std::isfinite(best_e)) return;

    double gain = h_s - best_e;
    std::map<int, size_t> right;
    size_t nl = best_i + 1 - lo, nr = hi - (best_i + 1);
    for (const auto& [cls, cnt] : total) {
        size_t lc = best_left.count(cls) ? best_left.at(cls) : 0;
        if (cnt > lc) right[cls] = cnt - lc;
    }
    double k = static_cast<double>(total.size());
    double k1 = static_cast<double>(best_left.size());
    double k2 = static_cast<double>(right.size());
    double h1 = entropy_of_counts(best_left, nl);
    double h2 = entropy_of_counts(right, nr);
    double delta = std::log2(std::pow(3.0, k) - 2.0) - (k * h_s - k1 * h1 - k2 * h2);
    double threshold = (std::log2(static_cast<double>(n) - 1.0) + delta) / static_cast<double>(n);
    if (gain <= threshold) return;

    cuts.push_back((sl[best_i].first + sl[best_i + 1].first) / 2.0);
    mdl_split(sl, lo, best_i + 1, cuts);
    mdl_split(sl, best_i + 1, hi, cuts);
}

std::vector<int> discretize_mdl(const std::vector<double>& column, const std::vector<int>& labels) {
    std::vector<std::pair<double, int>> sl(column.size());
    for (size_t i = 0; i < column.size(); ++i) sl[i] = {column[i], labels[i]};
    std::sort(sl.begin(), sl.end());
    std::vector<double> cuts;
    mdl_split(sl, 0, sl.size(), cuts);
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> out;
    out.reserve(column.size());
    for (double x : column) {
        auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
        out.push_back(static_cast<int>(it - cuts.begin()));
    }
    return out;
}

}  // namespace

std::vector<int> discretize(const std::vector<double>& column, const std::vector<int>& labels,
                            const Discretizer& d) {
    if (column.empty()) throw std::invalid_argument("discretize: empty column");
    if (d.kind == Discretizer::Kind::equal_frequency)
        return discretize_equal_frequency(column, d.bins);
    return discretize_mdl(column, labels);
}

double info_gain(const std::vector<double>& column, const std::vector<int>& labels,
                 const Discretizer& d) {
    if (column.empty() || column.size() != labels.size())
        throw std::invalid_argument("info_gain: empty input or size mismatch");
    std::vector<int> bins = discretize(column, labels, d);
    double h = entropy(labels);
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < bins.size(); ++i) groups[bins[i]].push_back(labels[i]);
    double cond = 0.0;
    double n = static_cast<double>(labels.size());
    for (const auto& [bin, ls] : groups)
        cond += (static_cast<double>(ls.size()) / n) * entropy(ls);
    double gain = h - cond;
    return gain < 0.0 ? 0.0 : gain;
}

Dataset drop_identifier_features(const Dataset& ds) {
    std::set<std::string> drop(std::begin(kIdentifierFeatures), std::end(kIdentifierFeatures));
    Dataset out;
    std::vector<size_t> keep;
    for (size_t j = 0; j < ds.feature_names.size(); ++j) {
        if (!drop.count(ds.feature_names[j])) {
            keep.push_back(j);
            out.feature_names.push_back(ds.feature_names[j]);
        }
    }
    out.rows.reserve(ds.rows.size());
    for (const auto& r : ds.rows) {
        std::vector<double> nr;
        nr.reserve(keep.size());
        for (size_t j : keep) nr.push_back(r[j]);
        out.rows.push_back(std::move(nr));
    }
    out.labels = ds.labels;
    return out;
}

RankedFeatures rank_features(const Dataset& ds, size_t k, const Discretizer& d) {
    if (!ds.labeled()) throw std::invalid_argument("rank_features: dataset is unlabeled");
    if (k > ds.num_features())
        throw std::invalid_argument("rank_features: k exceeds feature count");
    std::vector<std::pair<std::string, double>> gains;
    gains.reserve(ds.num_features());
    for (size_t j = 0; j < ds.num_features(); ++j)
        gains.emplace_back(ds.feature_names[j], info_gain(ds.column(j), ds.labels, d));
    std::sort(gains.begin(), gains.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    gains.resize(k);
    return RankedFeatures{std::move(gains)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0, 1)");
    if (!ds.labeled()) throw std::invalid_argument("split: dataset is unlabeled");

    std::map<int, std::vector<size_t>> strata;
    for (size_t i = 0; i < ds.rows.size(); ++i) strata[ds.labels[i]].push_back(i);

    std::vector<size_t> train_idx, test_idx;
    for (auto& [label, idx] : strata) {
        if (idx.size() < 2)
            throw std::invalid_argument("split: stratum with fewer than 2 rows");
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(label + 1)));
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t n_train = static_cast<size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        n_train = std::clamp<size_t>(n_train, 1, idx.size() - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        test_idx.insert(test_idx.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto take = [&ds](const std::vector<size_t>& idx) {
        Dataset out;
        out.feature_names = ds.feature_names;
        out.rows.reserve(idx.size());
        for (size_t i : idx) {
            out.rows.push_back(ds.rows[i]);
            out.labels.push_back(ds.labels[i]);
        }
        return out;
    };
    return {take(train_idx), take(test_idx)};
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("csv: unparsable number '" + s + "'");
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot create " + path);
    for (size_t j = 0; j < ds.feature_names.size(); ++j) {
        if (ds.feature_names[j].find(',') != std::string::npos ||
            ds.feature_names[j].empty())
            throw std::invalid_argument("csv: bad feature name '" + ds.feature_names[j] + "'");
        if (j) out << ',';
        out << ds.feature_names[j];
    }
    if (ds.labeled()) out << ",class";
    out << '\n';
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        for (size_t j = 0; j < ds.rows[i].size(); ++j) {
            if (j) out << ',';
            out << format_double(ds.rows[i][j]);
        }
        if (ds.labeled()) out << ',' << ds.labels[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failure on " + path);
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header in " + path);
    std::vector<std::string> header = split_fields(line);
    if (header.empty() || header.front().empty())
        throw std::runtime_error("csv: missing header in " + path);

    Dataset ds;
    bool labeled = header.back() == "class";
    size_t n_feat = labeled ? header.size() - 1 : header.size();
    ds.feature_names.assign(header.begin(), header.begin() + n_feat);

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f = split_fields(line);
        if (f.size() != header.size())
            throw std::runtime_error("csv: row " + std::to_string(lineno) + " has " +
                                     std::to_string(f.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(n_feat);
        for (size_t j = 0; j < n_feat; ++j) row.push_back(parse_double(f[j]));
        ds.rows.push_back(std::move(row));
        if (labeled) {
            const std::string& c = f.back();
            if (c == "0" || c == "nonmalicious")
                ds.labels.push_back(0);
            else if (c == "1" || c == "malicious")
                ds.labels.push_back(1);
            else
                throw std::runtime_error("csv: bad class value '" + c + "' on row " +
                                         std::to_string(lineno));
        }
    }
    return ds;
}

void write_arff(const Dataset& ds, const std::string& path, const std::string& relation) {
    if (!ds.labeled() && !ds.rows.empty())
        throw std::invalid_argument("arff: dataset must be labeled");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("arff: cannot create " + path);
    out << "@relation " << relation << '\n' << '\n';
    for (const auto& name : ds.feature_names) out << "@attribute " << name << " numeric\n";
    out << "@attribute class {nonmalicious,malicious}\n";
    out << '\n' << "@data\n";
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        for (size_t j = 0; j < ds.rows[i].size(); ++j) {
            if (j) out << ',';
            out << format_double(ds.rows[i][j]);
        }
        out << ',' << (ds.labels[i] == 1 ? "malicious" : "nonmalicious") << '\n';
    }
    if (!out) throw std::runtime_error("arff: write failure on " + path);
}

}  // namespace botdet
