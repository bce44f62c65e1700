/* stats.hpp
 *
 * Evaluation battery: Pearson correlation, confusion counts, two-sample
 * F-test and Levene's test with F-distribution p-values, five-number
 * summaries and histograms, and the on-disk report layout.
 */
#pragma once

#include <string>
#include <vector>

namespace botdet {

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct ConfusionResult {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_defined = true;  // false when tp + fp == 0
    bool recall_defined = true;     // false when tp + fn == 0
};

ConfusionResult confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold);

struct TestResult {
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p_value = 1.0;
};

// F = s_a^2 / s_b^2 with a two-tailed p-value
TestResult f_test(const std::vector<double>& a, const std::vector<double>& b);

enum class LeveneCenter { median, mean };

// Two-group Levene's test; median centering (Brown-Forsythe) by default
TestResult levene(const std::vector<double>& a, const std::vector<double>& b,
                  LeveneCenter center = LeveneCenter::median);

// CDF of the F distribution via the regularized incomplete beta function
double f_cdf(double x, double df1, double df2);

struct FiveNumber {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// quartiles by linear interpolation at h = (n-1)*q
FiveNumber five_number(const std::vector<double>& series);

struct Histogram {
    std::vector<double> edges;   // bins + 1 edges, equal width
    std::vector<long> counts;    // right edge inclusive on the last bin
};

Histogram histogram(const std::vector<double>& series, int bins);

struct EvalReport {
    double pearson_r = 0.0;
    ConfusionResult confusion;
    TestResult f_test;
    TestResult levene;
    FiveNumber experimental_summary;  // series C1: experimental labels
    FiveNumber predicted_summary;     // series C2: predicted scores
    Histogram hist_nonmalicious;      // score distribution per experimental class
    Histogram hist_malicious;
    std::vector<double> scores;
    std::vector<int> labels;
    double threshold = 0.5;
};

EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold = 0.5, int hist_bins = 10);

// Writes report.txt, boxplot.csv, histogram_<class>.csv and pr_curve.csv
// (threshold sweep 0..1 in steps of 0.01) into an existing directory.
void emit_report(const EvalReport& report, const std::string& dir);

}  // namespace botdet
