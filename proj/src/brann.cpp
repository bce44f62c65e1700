#include "botdet/brann.hpp"

#include "botdet/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace botdet {

namespace {

constexpr double kBetaMax = 1e10;
constexpr double kBetaFloor = 1e-12;

// uniform double in [0, 1) from the raw engine, stable across platforms
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct WeightView {
    const double* w1;  // n_hidden x n_in, row-major
    const double* b1;
    const double* w2;
    double b2;
};

WeightView view(const NetworkModel& m) {
    const double* p = m.weights.data();
    size_t nw1 = static_cast<size_t>(m.n_hidden) * m.n_in;
    return {p, p + nw1, p + nw1 + m.n_hidden, p[nw1 + 2 * static_cast<size_t>(m.n_hidden)]};
}

}  // namespace

double forward(const NetworkModel& model, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != model.n_in)
        throw std::invalid_argument("forward: input dimension mismatch");
    WeightView v = view(model);
    double acc = v.b2;
    for (int j = 0; j < model.n_hidden; ++j) {
        double z = v.b1[j];
        const double* row = v.w1 + static_cast<size_t>(j) * model.n_in;
        for (int i = 0; i < model.n_in; ++i) z += row[i] * x[i];
        acc += v.w2[j] * std::tanh(z);
    }
    return std::tanh(acc);
}

double data_error(const NetworkModel& model, const Batch& batch) {
    if (batch.size() == 0) throw std::invalid_argument("data_error: empty batch");
    double e = 0.0;
    for (size_t m = 0; m < batch.size(); ++m) {
        double r = forward(model, batch.inputs[m]) - batch.targets[m];
        e += r * r;
    }
    return 0.5 * e;
}

double weight_error(const NetworkModel& model) {
    double e = 0.0;
    for (double w : model.weights) e += w * w;
    return 0.5 * e;
}

void jacobian(const NetworkModel& model, const Batch& batch, std::vector<double>& jac,
              std::vector<double>& residuals) {
    if (batch.size() == 0) throw std::invalid_argument("jacobian: empty batch");
    const int ni = model.n_in, nh = model.n_hidden;
    const int k = model.weight_count();
    const size_t n = batch.size();
    jac.assign(n * static_cast<size_t>(k), 0.0);
    residuals.assign(n, 0.0);
    WeightView v = view(model);

    std::vector<double> h(static_cast<size_t>(nh));
    for (size_t m = 0; m < n; ++m) {
        const std::vector<double>& x = batch.inputs[m];
        if (static_cast<int>(x.size()) != ni)
            throw std::invalid_argument("jacobian: input dimension mismatch");
        double acc = v.b2;
        for (int j = 0; j < nh; ++j) {
            double z = v.b1[j];
            const double* row = v.w1 + static_cast<size_t>(j) * ni;
            for (int i = 0; i < ni; ++i) z += row[i] * x[i];
            h[static_cast<size_t>(j)] = std::tanh(z);
            acc += v.w2[j] * h[static_cast<size_t>(j)];
        }
        double y = std::tanh(acc);
        residuals[m] = y - batch.targets[m];

        double g2 = 1.0 - y * y;
        double* jrow = jac.data() + m * static_cast<size_t>(k);
        for (int j = 0; j < nh; ++j) {
            double hj = h[static_cast<size_t>(j)];
            double t = g2 * v.w2[j] * (1.0 - hj * hj);
            double* w1row = jrow + static_cast<size_t>(j) * ni;
            for (int i = 0; i < ni; ++i) w1row[i] = t * x[i];
            jrow[static_cast<size_t>(nh) * ni + j] = t;           // b1
            jrow[static_cast<size_t>(nh) * ni + nh + j] = g2 * hj; // w2
        }
        jrow[k - 1] = g2;  // b2
    }
}

namespace {

// J^T J (k x k, dense) and J^T r from the row-major Jacobian
void normal_equations(const std::vector<double>& jac, const std::vector<double>& residuals,
                      int k, Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
    const size_t n = residuals.size();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> J(
        jac.data(), static_cast<Eigen::Index>(n), k);
    jtj = J.transpose() * J;
    jtr = J.transpose() * Eigen::Map<const Eigen::VectorXd>(residuals.data(),
                                                            static_cast<Eigen::Index>(n));
}

double objective(const NetworkModel& model, const Batch& batch, double alpha, double beta) {
    return beta * data_error(model, batch) + alpha * weight_error(model);
}

}  // namespace

LmStep lm_step(const NetworkModel& model, const Batch& batch, double alpha, double beta,
               double mu) {
    if (mu <= 0.0) throw std::invalid_argument("lm_step: mu must be positive");
    const int k = model.weight_count();
    std::vector<double> jac, res;
    jacobian(model, batch, jac, res);

    Eigen::MatrixXd jtj;
    Eigen::VectorXd jtr;
    normal_equations(jac, res, k, jtj, jtr);

    Eigen::MatrixXd a = beta * jtj;
    a.diagonal().array() += alpha + mu;
    Eigen::VectorXd g =
        beta * jtr + alpha * Eigen::Map<const Eigen::VectorXd>(model.weights.data(), k);

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    LmStep step;
    if (llt.info() != Eigen::Success) {
        step.solved = false;
        step.weights = model.weights;
        return step;
    }
    Eigen::VectorXd delta = llt.solve(-g);
    if (!delta.allFinite()) {
        step.solved = false;
        step.weights = model.weights;
        return step;
    }

    NetworkModel cand = model;
    for (int i = 0; i < k; ++i) cand.weights[static_cast<size_t>(i)] += delta[i];
    step.weights = cand.weights;
    step.delta_f = objective(cand, batch, alpha, beta) - objective(model, batch, alpha, beta);
    return step;
}

HyperUpdate update_hyperparams(const std::vector<double>& jtj, int k, double e_data,
                               double e_weight, size_t n_data, double alpha, double beta) {
    HyperUpdate up;
    double gamma;
    if (alpha == 0.0) {
        gamma = static_cast<double>(k);  // limit of the formula
    } else {
        Eigen::Map<const Eigen::MatrixXd> jtj_m(jtj.data(), k, k);
        Eigen::MatrixXd h = beta * jtj_m;
        h.diagonal().array() += alpha;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            gamma = 0.0;  // tr(H^-1) effectively unbounded
        } else {
            double tr = ldlt.solve(Eigen::MatrixXd::Identity(k, k)).trace();
            gamma = static_cast<double>(k) - 2.0 * alpha * tr;
        }
        gamma = std::clamp(gamma, 0.0, static_cast<double>(k));
    }
    up.gamma = gamma;
    up.alpha = e_weight > 0.0 ? gamma / (2.0 * e_weight) : 0.0;
    if (e_data > 0.0) {
        double nd = static_cast<double>(n_data);
        up.beta = std::max(nd - gamma, 0.0) / (2.0 * e_data);
        if (up.beta == 0.0) up.beta = kBetaFloor;
        up.beta = std::min(up.beta, kBetaMax);
    } else {
        up.beta = kBetaMax;
        up.perfect_fit = true;
    }
    return up;
}

namespace {

Batch make_batch(const Dataset& ds, const std::vector<int>& index_map,
                 const NormalizationParams& norm, const MinMax& target_norm, bool clamp) {
    Batch b;
    b.inputs.reserve(ds.rows.size());
    b.targets.reserve(ds.rows.size());
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        std::vector<double> x;
        x.reserve(index_map.size());
        for (size_t j = 0; j < index_map.size(); ++j) {
            double raw = ds.rows[i][static_cast<size_t>(index_map[j])];
            x.push_back(clamp ? normalize_clamped(raw, norm.per_feature[j])
                              : normalize(raw, norm.per_feature[j]));
        }
        b.inputs.push_back(std::move(x));
        b.targets.push_back(normalize(static_cast<double>(ds.labels[i]), target_norm));
    }
    return b;
}

void init_weights(NetworkModel& m, uint64_t seed) {
    std::mt19937_64 rng(seed);
    m.weights.assign(static_cast<size_t>(m.weight_count()), 0.0);
    size_t nw1 = static_cast<size_t>(m.n_hidden) * m.n_in;
    double s1 = 1.0 / std::sqrt(static_cast<double>(m.n_in));
    double s2 = 1.0 / std::sqrt(static_cast<double>(m.n_hidden));
    for (size_t i = 0; i < m.weights.size(); ++i) {
        double u = uniform01(rng) - 0.5;  // [-0.5, 0.5)
        double scale = i < nw1 ? s1 : (i < nw1 + static_cast<size_t>(m.n_hidden) ? 1.0 : s2);
        m.weights[i] = u * scale;
    }
}

}  // namespace

TrainResult train(const Dataset& ds, const std::vector<std::string>& selected, int n_hidden,
                  const TrainingConfig& cfg) {
    if (ds.num_rows() < 10) throw std::invalid_argument("train: need at least 10 rows");
    if (!ds.labeled()) throw std::invalid_argument("train: dataset is unlabeled");
    if (n_hidden < 1) throw std::invalid_argument("train: n_hidden must be >= 1");

    auto [train_ds, test_ds] = split(ds, cfg.train_fraction, cfg.seed);

    NetworkModel model;
    model.n_in = static_cast<int>(selected.size());
    model.n_hidden = n_hidden;
    model.feature_names = selected;

    std::vector<int> index_map;
    for (const auto& name : selected) {
        int idx = train_ds.feature_index(name);
        if (idx < 0) throw std::invalid_argument("train: feature '" + name + "' not in dataset");
        index_map.push_back(idx);
    }

    // normalization fitted on the training split only
    model.input_norm.per_feature.clear();
    for (int idx : index_map) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& r : train_ds.rows) {
            lo = std::min(lo, r[static_cast<size_t>(idx)]);
            hi = std::max(hi, r[static_cast<size_t>(idx)]);
        }
        model.input_norm.per_feature.push_back({lo, hi});
    }
    model.target_norm = {0.0, 1.0};

    Batch batch = make_batch(train_ds, index_map, model.input_norm, model.target_norm, false);
    const size_t n_data = batch.size();
    const int k = model.weight_count();

    init_weights(model, cfg.seed + static_cast<uint64_t>(n_hidden));
    model.alpha = 0.0;
    model.beta = 1.0;

    TrainingReport report;
    report.n_hidden = n_hidden;
    double mu = cfg.mu_init;
    double alpha = model.alpha, beta = model.beta;
    double prev_f = objective(model, batch, alpha, beta);
    std::string stop = "max_epochs";

    std::vector<double> jac, res;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        jacobian(model, batch, jac, res);
        Eigen::MatrixXd jtj;
        Eigen::VectorXd jtr;
        normal_equations(jac, res, k, jtj, jtr);
        Eigen::VectorXd grad =
            beta * jtr + alpha * Eigen::Map<const Eigen::VectorXd>(model.weights.data(), k);
        if (grad.norm() < cfg.gradient_tol) {
            stop = "gradient";
            break;
        }

        double f_cur = objective(model, batch, alpha, beta);
        bool accepted = false;
        while (mu <= cfg.mu_max) {
            Eigen::MatrixXd a = beta * jtj;
            a.diagonal().array() += alpha + mu;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            if (llt.info() == Eigen::Success) {
                Eigen::VectorXd delta = llt.solve(-grad);
                if (delta.allFinite()) {
                    NetworkModel cand = model;
                    for (int i = 0; i < k; ++i) cand.weights[static_cast<size_t>(i)] += delta[i];
                    double f_new = objective(cand, batch, alpha, beta);
                    if (!std::isfinite(f_new))
                        throw std::runtime_error("train: objective diverged (non-finite)");
                    if (f_new < f_cur) {
                        model.weights = std::move(cand.weights);
                        f_cur = f_new;
                        mu = std::max(mu * cfg.mu_decrease, 1e-20);
                        accepted = true;
                        break;
                    }
                }
            }
            mu *= cfg.mu_increase;
        }
        if (!accepted) {
            stop = "mu_max";
            break;
        }

        double e_d = data_error(model, batch);
        double e_w = weight_error(model);
        jacobian(model, batch, jac, res);
        normal_equations(jac, res, k, jtj, jtr);
        std::vector<double> jtj_flat(static_cast<size_t>(k) * k);
        Eigen::Map<Eigen::MatrixXd>(jtj_flat.data(), k, k) = jtj;
        HyperUpdate up = update_hyperparams(jtj_flat, k, e_d, e_w, n_data, alpha, beta);
        if (up.perfect_fit) report.perfect_fit = true;
        alpha = up.alpha;
        beta = up.beta;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.e_data = e_d;
        rec.e_weight = e_w;
        rec.objective = f_cur;
        rec.alpha = alpha;
        rec.beta = beta;
        rec.gamma = up.gamma;
        rec.mu = mu;
        report.trace.push_back(rec);

        if (std::fabs(f_cur - prev_f) < cfg.objective_tol * std::max(1.0, std::fabs(prev_f))) {
            stop = "objective";
            break;
        }
        prev_f = f_cur;
    }
    report.stop_reason = stop;
    model.alpha = alpha;
    model.beta = beta;

    // held-out correlation between experimental labels and raw outputs
    Batch test = make_batch(test_ds, index_map, model.input_norm, model.target_norm, true);
    std::vector<double> outputs, targets;
    for (size_t i = 0; i < test.size(); ++i) {
        outputs.push_back(forward(model, test.inputs[i]));
        targets.push_back(test.targets[i]);
    }
    bool const_out = std::all_of(outputs.begin(), outputs.end(),
                                 [&](double v) { return v == outputs.front(); });
    bool const_t = std::all_of(targets.begin(), targets.end(),
                               [&](double v) { return v == targets.front(); });
    report.heldout_pearson =
        (outputs.size() >= 2 && !const_out && !const_t) ? pearson(targets, outputs) : 0.0;

    return {std::move(model), std::move(report)};
}

HiddenSweep select_hidden(const Dataset& ds, const std::vector<std::string>& selected,
                          const TrainingConfig& cfg) {
    if (cfg.hidden_min > cfg.hidden_max)
        throw std::invalid_argument("select_hidden: empty hidden range");
    HiddenSweep sweep;
    double best_r = -2.0;
    for (int h = cfg.hidden_min; h <= cfg.hidden_max; ++h) {
        try {
            TrainResult res = train(ds, selected, h, cfg);
            sweep.correlations.emplace_back(h, res.report.heldout_pearson);
            if (res.report.heldout_pearson > best_r) {  // ties keep the smaller size
                best_r = res.report.heldout_pearson;
                sweep.best = h;
            }
        } catch (const std::exception& e) {
            sweep.failures.emplace_back(h, e.what());
        }
    }
    if (sweep.correlations.empty())
        throw std::runtime_error("select_hidden: every candidate failed");
    return sweep;
}

namespace {

double score_from_output(const NetworkModel& model, double y) {
    return std::clamp(denormalize(y, model.target_norm), 0.0, 1.0);
}

}  // namespace

Classification classify_row(const NetworkModel& model, const std::vector<double>& row,
                            const std::vector<int>& index_map, double threshold) {
    std::vector<double> x;
    x.reserve(index_map.size());
    for (size_t j = 0; j < index_map.size(); ++j)
        x.push_back(normalize_clamped(row[static_cast<size_t>(index_map[j])],
                                      model.input_norm.per_feature[j]));
    double score = score_from_output(model, forward(model, x));
    return {score, score >= threshold ? 1 : 0};
}

std::vector<int> build_index_map(const NetworkModel& model, const Dataset& ds) {
    std::vector<int> map;
    map.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) {
        int idx = ds.feature_index(name);
        if (idx < 0)
            throw std::invalid_argument("model feature '" + name + "' missing from dataset");
        map.push_back(idx);
    }
    return map;
}

Classification classify(const NetworkModel& model, const FeatureVector& fv, double threshold) {
    const auto& names = feature_names();
    std::vector<double> x;
    x.reserve(model.feature_names.size());
    for (size_t j = 0; j < model.feature_names.size(); ++j) {
        auto it = std::find_if(names.begin(), names.end(), [&](const char* n) {
            return model.feature_names[j] == n;
        });
        if (it == names.end())
            throw std::invalid_argument("classify: model feature '" + model.feature_names[j] +
                                        "' is not a flow feature");
        double raw = fv.values[static_cast<size_t>(it - names.begin())];
        x.push_back(normalize_clamped(raw, model.input_norm.per_feature[j]));
    }
    double score = score_from_output(model, forward(model, x));
    return {score, score >= threshold ? 1 : 0};
}

namespace {

constexpr const char* kModelTag = "brann-model/1";

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double_or_throw(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw model_format_error("model: bad number '" + s + "'");
    return v;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string checksum_hex(const std::string& payload) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(payload)));
    return buf;
}

}  // namespace

std::string save_model(const NetworkModel& model, const std::string& path) {
    std::ostringstream body;
    body << kModelTag << '\n';
    body << "layout " << model.n_in << ' ' << model.n_hidden << ' ' << model.n_out << '\n';
    body << "features";
    for (const auto& n : model.feature_names) body << ' ' << n;
    body << '\n';
    body << "input_norm " << model.input_norm.per_feature.size() << '\n';
    for (const auto& mm : model.input_norm.per_feature)
        body << fmt_double(mm.lo) << ' ' << fmt_double(mm.hi) << '\n';
    body << "target_norm " << fmt_double(model.target_norm.lo) << ' '
         << fmt_double(model.target_norm.hi) << '\n';
    body << "alpha " << fmt_double(model.alpha) << '\n';
    body << "beta " << fmt_double(model.beta) << '\n';
    body << "weights " << model.weights.size() << '\n';
    for (double w : model.weights) body << fmt_double(w) << '\n';

    std::string payload = body.str();
    std::string sum = checksum_hex(payload);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("model: cannot create " + path);
    out << payload << "checksum " << sum << '\n';
    if (!out) throw std::runtime_error("model: write failure on " + path);
    return sum;
}

NetworkModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("model: cannot open " + path);
    std::ostringstream all;
    all << in.rdbuf();
    std::string content = all.str();

    size_t cs_pos = content.rfind("checksum ");
    if (cs_pos == std::string::npos || cs_pos == 0)
        throw model_format_error("model: missing checksum line");
    std::string payload = content.substr(0, cs_pos);
    std::string cs_line = content.substr(cs_pos);

    std::istringstream header(payload);
    std::string line;
    if (!std::getline(header, line)) throw model_format_error("model: empty file");
    if (line != kModelTag) {
        if (line.rfind("brann-model/", 0) == 0)
            throw model_version_error("model: unsupported version '" + line + "'");
        throw model_format_error("model: bad format tag");
    }

    std::istringstream cs(cs_line);
    std::string word, sum;
    cs >> word >> sum;
    if (sum != checksum_hex(payload)) throw model_checksum_error("model: checksum mismatch");

    NetworkModel m;
    auto expect = [&](const char* key) {
        std::string k;
        header >> k;
        if (k != key) throw model_format_error(std::string("model: expected '") + key + "'");
    };
    expect("layout");
    header >> m.n_in >> m.n_hidden >> m.n_out;
    if (!header || m.n_in < 1 || m.n_hidden < 1 || m.n_out != 1)
        throw model_format_error("model: bad layout");
    expect("features");
    m.feature_names.resize(static_cast<size_t>(m.n_in));
    for (auto& n : m.feature_names) header >> n;
    expect("input_norm");
    size_t n_norm = 0;
    header >> n_norm;
    if (n_norm != static_cast<size_t>(m.n_in)) throw model_format_error("model: norm count");
    m.input_norm.per_feature.resize(n_norm);
    for (auto& mm : m.input_norm.per_feature) {
        std::string lo, hi;
        header >> lo >> hi;
        mm.lo = parse_double_or_throw(lo);
        mm.hi = parse_double_or_throw(hi);
    }
    std::string tok;
    expect("target_norm");
    header >> tok;
    m.target_norm.lo = parse_double_or_throw(tok);
    header >> tok;
    m.target_norm.hi = parse_double_or_throw(tok);
    expect("alpha");
    header >> tok;
    m.alpha = parse_double_or_throw(tok);
    expect("beta");
    header >> tok;
    m.beta = parse_double_or_throw(tok);
    expect("weights");
    size_t n_weights = 0;
    header >> n_weights;
    if (n_weights != static_cast<size_t>(m.weight_count()))
        throw model_format_error("model: weight count mismatch");
    m.weights.resize(n_weights);
    for (auto& w : m.weights) {
        header >> tok;
        if (!header) throw model_format_error("model: truncated weights");
        w = parse_double_or_throw(tok);
    }
    for (double w : m.weights)
        if (!std::isfinite(w)) throw model_format_error("model: non-finite weight");
    m.model_id = sum;
    return m;
}

}  // namespace botdet
