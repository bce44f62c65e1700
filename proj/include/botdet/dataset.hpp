/* dataset.hpp
 *
 * Labeled feature rows, the 0.05..0.95 normalization, information-gain
 * feature ranking, stratified splitting, and CSV/ARFF serialization.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "botdet/flow_meter.hpp"

namespace botdet {

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;  // empty when unlabeled; else one 0/1 per row

    bool labeled() const { return !labels.empty(); }
    size_t num_rows() const { return rows.size(); }
    size_t num_features() const { return feature_names.size(); }
    std::vector<double> column(size_t i) const;
    int feature_index(const std::string& name) const;  // -1 when absent
};

Dataset dataset_from_flows(const std::vector<FeatureVector>& flows);

// Per-feature (min, max) taken from training data.
struct MinMax {
    double lo = 0.0;
    double hi = 0.0;
};

struct NormalizationParams {
    std::vector<MinMax> per_feature;

    static NormalizationParams fit(const Dataset& ds);
};

// x_n = 0.05 + 0.9 * (x - min) / (max - min); constant features map to 0.5
double normalize(double x, const MinMax& p);
// inverse mapping
double denormalize(double x_n, const MinMax& p);
// inference-time variant, clamped to [0.05, 0.95]
double normalize_clamped(double x, const MinMax& p);

// Shannon entropy of a label list, in bits
double entropy(const std::vector<int>& labels);

struct Discretizer {
    enum class Kind { equal_frequency, mdl_entropy };
    Kind kind = Kind::equal_frequency;
    int bins = 10;  // equal_frequency only
};

// bin ids in [0, nbins) for each value
std::vector<int> discretize(const std::vector<double>& column, const std::vector<int>& labels,
                            const Discretizer& d);

double info_gain(const std::vector<double>& column, const std::vector<int>& labels,
                 const Discretizer& d);

struct RankedFeatures {
    std::vector<std::pair<std::string, double>> entries;  // (name, gain), gain descending
};

inline const char* kIdentifierFeatures[] = {"srcip", "srcport", "dstip", "dstport"};

// drops srcip/srcport/dstip/dstport columns
Dataset drop_identifier_features(const Dataset& ds);

RankedFeatures rank_features(const Dataset& ds, size_t k, const Discretizer& d = {});

// Stratified split; deterministic for a fixed seed.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed);

void write_csv(const Dataset& ds, const std::string& path);
Dataset read_csv(const std::string& path);
void write_arff(const Dataset& ds, const std::string& path,
                const std::string& relation = "p2pflows");

}  // namespace botdet
