#include "botdet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace botdet {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Continued-fraction evaluation of the regularized incomplete beta
// function I_x(a, b), modified Lentz method.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kFpMin = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson: constant series");
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

ConfusionResult confusion(const std::vector<double>& scores, const std::vector<int>& labels,
                          double threshold) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("confusion: empty input or size mismatch");
    ConfusionResult r;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool truth = labels[i] == 1;
        if (pred && truth)
            ++r.tp;
        else if (pred && !truth)
            ++r.fp;
        else if (!pred && !truth)
            ++r.tn;
        else
            ++r.fn;
    }
    double n = static_cast<double>(scores.size());
    r.accuracy = static_cast<double>(r.tp + r.tn) / n;
    if (r.tp + r.fp > 0) {
        r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    } else {
        r.precision_defined = false;
    }
    if (r.tp + r.fn > 0) {
        r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    } else {
        r.recall_defined = false;
    }
    return r;
}

double f_cdf(double x, double df1, double df2) {
    if (!std::isfinite(df1) || !std::isfinite(df2) || df1 < 1.0 || df2 < 1.0)
        throw std::invalid_argument("f_cdf: bad degrees of freedom");
    if (std::isnan(x)) throw std::invalid_argument("f_cdf: non-finite input");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return inc_beta(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2));
}

TestResult f_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("f_test: need 2+ per group");
    double va = sample_variance(a), vb = sample_variance(b);
    if (va == 0.0 || vb == 0.0) throw std::invalid_argument("f_test: zero variance group");
    TestResult r;
    r.statistic = va / vb;
    r.df1 = static_cast<double>(a.size() - 1);
    r.df2 = static_cast<double>(b.size() - 1);
    double c = f_cdf(r.statistic, r.df1, r.df2);
    r.p_value = 2.0 * std::min(c, 1.0 - c);
    return r;
}

TestResult levene(const std::vector<double>& a, const std::vector<double>& b,
                  LeveneCenter center) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("levene: need 2+ per group");
    auto deviations = [center](const std::vector<double>& g) {
        double c = center == LeveneCenter::median ? median_of(g) : mean_of(g);
        std::vector<double> z;
        z.reserve(g.size());
        for (double x : g) z.push_back(std::fabs(x - c));
        return z;
    };
    std::vector<double> za = deviations(a), zb = deviations(b);
    double na = static_cast<double>(za.size()), nb = static_cast<double>(zb.size());
    double ma = mean_of(za), mb = mean_of(zb);
    double grand = (na * ma + nb * mb) / (na + nb);

    double between = na * (ma - grand) * (ma - grand) + nb * (mb - grand) * (mb - grand);
    double within = 0.0;
    for (double z : za) within += (z - ma) * (z - ma);
    for (double z : zb) within += (z - mb) * (z - mb);

    TestResult r;
    r.df1 = 1.0;
    r.df2 = na + nb - 2.0;
    if (within == 0.0) {
        r.statistic = between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = between == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (r.df2 / r.df1) * between / within;
    r.p_value = 1.0 - f_cdf(r.statistic, r.df1, r.df2);
    return r;
}

FiveNumber five_number(const std::vector<double>& series) {
    if (series.empty()) throw std::invalid_argument("five_number: empty series");
    std::vector<double> v = series;
    std::sort(v.begin(), v.end());
    auto quantile = [&v](double q) {
        double h = (static_cast<double>(v.size()) - 1.0) * q;
        size_t lo = static_cast<size_t>(std::floor(h));
        size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
    };
    return {v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

Histogram histogram(const std::vector<double>& series, int bins) {
    if (series.empty()) throw std::invalid_argument("histogram: empty series");
    if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
    double lo = *std::min_element(series.begin(), series.end());
    double hi = *std::max_element(series.begin(), series.end());
    Histogram h;
    h.counts.assign(static_cast<size_t>(bins), 0);
    double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + width * i);
    h.edges.back() = hi;
    for (double x : series) {
        int idx = width > 0.0 ? static_cast<int>((x - lo) / width) : 0;
        idx = std::clamp(idx, 0, bins - 1);  // right edge joins the last bin
        ++h.counts[static_cast<size_t>(idx)];
    }
    return h;
}

EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold, int hist_bins) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("evaluate: empty input or size mismatch");
    EvalReport rep;
    rep.scores = scores;
    rep.labels = labels;
    rep.threshold = threshold;
    rep.confusion = confusion(scores, labels, threshold);

    std::vector<double> exper(labels.begin(), labels.end());
    bool exper_const =
        std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); });
    bool score_const = std::all_of(scores.begin(), scores.end(),
                                   [&](double s) { return s == scores.front(); });
    if (!exper_const && !score_const && scores.size() >= 2) {
        rep.pearson_r = pearson(exper, scores);
        rep.f_test = f_test(exper, scores);
        rep.levene = levene(exper, scores);
    }
    rep.experimental_summary = five_number(exper);
    rep.predicted_summary = five_number(scores);

    std::vector<double> s0, s1;
    for (size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? s1 : s0).push_back(scores[i]);
    if (!s0.empty()) rep.hist_nonmalicious = histogram(s0, hist_bins);
    if (!s1.empty()) rep.hist_malicious = histogram(s1, hist_bins);
    return rep;
}

namespace {

void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot create " + path);
    out << "bin_lo,bin_hi,count\n";
    char buf[128];
    for (size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%ld\n", h.edges[i], h.edges[i + 1],
                      h.counts[i]);
        out << buf;
    }
}

}  // namespace

void emit_report(const EvalReport& rep, const std::string& dir) {
    {
        std::ofstream out(dir + "/report.txt");
        if (!out) throw std::runtime_error("report: cannot create " + dir + "/report.txt");
        char buf[256];
        const auto& c = rep.confusion;
        out << "instances\t" << rep.labels.size() << '\n';
        std::snprintf(buf, sizeof(buf), "threshold\t%.17g\n", rep.threshold);
        out << buf;
        std::snprintf(buf, sizeof(buf), "pearson_r\t%.17g\n", rep.pearson_r);
        out << buf;
        out << "tp\t" << c.tp << "\nfp\t" << c.fp << "\ntn\t" << c.tn << "\nfn\t" << c.fn << '\n';
        std::snprintf(buf, sizeof(buf), "accuracy\t%.17g\nprecision\t%.17g\nrecall\t%.17g\n",
                      c.accuracy, c.precision, c.recall);
        out << buf;
        if (!c.precision_defined) out << "precision_undefined\t1\n";
        if (!c.recall_defined) out << "recall_undefined\t1\n";
        std::snprintf(buf, sizeof(buf), "f_test\tF=%.17g df1=%g df2=%g p=%.17g\n",
                      rep.f_test.statistic, rep.f_test.df1, rep.f_test.df2, rep.f_test.p_value);
        out << buf;
        std::snprintf(buf, sizeof(buf), "levene\tW=%.17g df1=%g df2=%g p=%.17g\n",
                      rep.levene.statistic, rep.levene.df1, rep.levene.df2, rep.levene.p_value);
        out << buf;
    }
    {
        std::ofstream out(dir + "/boxplot.csv");
        if (!out) throw std::runtime_error("report: cannot create " + dir + "/boxplot.csv");
        out << "series,min,q1,median,q3,max\n";
        char buf[256];
        auto line = [&](const char* name, const FiveNumber& f) {
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", name, f.min,
                          f.q1, f.median, f.q3, f.max);
            out << buf;
        };
        line("C1_experimental", rep.experimental_summary);
        line("C2_predicted", rep.predicted_summary);
    }
    if (!rep.hist_nonmalicious.counts.empty())
        write_histogram_csv(rep.hist_nonmalicious, dir + "/histogram_nonmalicious.csv");
    if (!rep.hist_malicious.counts.empty())
        write_histogram_csv(rep.hist_malicious, dir + "/histogram_malicious.csv");
    {
        std::ofstream out(dir + "/pr_curve.csv");
        if (!out) throw std::runtime_error("report: cannot create " + dir + "/pr_curve.csv");
        out << "threshold,precision,recall\n";
        char buf[128];
        for (int i = 0; i <= 100; ++i) {
            // the sweep alerts on strict exceedance, so a fully separated
            // scorer shows precision 1 at every recall level
            double t = static_cast<double>(i) / 100.0;
            long tp = 0, fp = 0, fn = 0;
            for (size_t j = 0; j < rep.scores.size(); ++j) {
                bool pred = rep.scores[j] > t;
                if (pred && rep.labels[j] == 1)
                    ++tp;
                else if (pred)
                    ++fp;
                else if (rep.labels[j] == 1)
                    ++fn;
            }
            double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
            double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
            std::snprintf(buf, sizeof(buf), "%.2f,%.17g,%.17g\n", t, precision, recall);
            out << buf;
        }
    }
}

}  // namespace botdet
