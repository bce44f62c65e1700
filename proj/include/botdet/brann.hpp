/* brann.hpp
 *
 * Feed-forward network (tan-sigmoid hidden and output units) trained by
 * Levenberg-Marquardt under Bayesian regularization: the objective is
 * F = beta*E_D + alpha*E_W with alpha and beta re-estimated from the
 * evidence framework every epoch. Hidden-layer width is selected by
 * held-out correlation.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "botdet/dataset.hpp"

namespace botdet {

struct NetworkModel {
    int n_in = 0;
    int n_hidden = 0;
    int n_out = 1;
    // layout: W1 row-major (n_hidden x n_in), b1, w2, b2
    std::vector<double> weights;
    std::vector<std::string> feature_names;  // selected inputs, in order
    NormalizationParams input_norm;          // one entry per selected input
    MinMax target_norm{0.0, 1.0};
    double alpha = 0.0;
    double beta = 1.0;
    std::string model_id;  // checksum of the serialized form, set by save/load

    int weight_count() const { return (n_in + 1) * n_hidden + (n_hidden + 1) * n_out; }
};

struct TrainingConfig {
    int hidden_min = 2;
    int hidden_max = 20;
    int max_epochs = 300;
    double mu_init = 0.005;
    double mu_increase = 10.0;
    double mu_decrease = 0.1;
    double mu_max = 1e10;
    double gradient_tol = 1e-7;
    double objective_tol = 1e-9;  // relative F change
    uint64_t seed = 1;
    double train_fraction = 0.9;
};

struct EpochRecord {
    int epoch = 0;
    double e_data = 0.0;    // E_D, half the SSE
    double e_weight = 0.0;  // E_W, half the squared weight norm
    double objective = 0.0; // F = beta*E_D + alpha*E_W
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double mu = 0.0;
};

struct TrainingReport {
    std::vector<EpochRecord> trace;
    double heldout_pearson = 0.0;
    int n_hidden = 0;
    std::string stop_reason;
    bool perfect_fit = false;
};

// Normalized batch: inputs in [0.05, 0.95], targets 0.05/0.95.
struct Batch {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    size_t size() const { return inputs.size(); }
};

double forward(const NetworkModel& model, const std::vector<double>& x);

// Eq.-style half sum of squared residuals over the batch
double data_error(const NetworkModel& model, const Batch& batch);
// half sum of squared weights
double weight_error(const NetworkModel& model);

// residuals r_m = y(x^m) - t^m and the N x k Jacobian d r_m / d w_j,
// row-major (k = weight_count())
void jacobian(const NetworkModel& model, const Batch& batch, std::vector<double>& jac,
              std::vector<double>& residuals);

struct LmStep {
    std::vector<double> weights;  // candidate w + delta
    double delta_f = 0.0;         // F(candidate) - F(current)
    bool solved = true;           // false: raise mu and retry
};

LmStep lm_step(const NetworkModel& model, const Batch& batch, double alpha, double beta,
               double mu);

struct HyperUpdate {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    bool perfect_fit = false;
};

// Evidence-framework re-estimation from the Gauss-Newton Hessian
// H = beta*J^T J + alpha*I:
//   gamma  = k - 2*alpha*tr(H^-1), clamped to [0, k] (alpha = 0 gives
//            gamma = k exactly, the limit of the formula)
//   alpha' = gamma / (2*E_W)        (0 when E_W = 0)
//   beta'  = (N - gamma) / (2*E_D)  (floored at a tiny positive value;
//            capped at 1e10 with a perfect-fit flag when E_D = 0)
HyperUpdate update_hyperparams(const std::vector<double>& jtj, int k, double e_data,
                               double e_weight, size_t n_data, double alpha, double beta);

struct TrainResult {
    NetworkModel model;
    TrainingReport report;
};

// Trains on a stratified train_fraction split of ds (inputs restricted
// to `selected`), reports Pearson correlation on the held-out remainder.
TrainResult train(const Dataset& ds, const std::vector<std::string>& selected, int n_hidden,
                  const TrainingConfig& cfg);

struct HiddenSweep {
    int best = 0;
    std::vector<std::pair<int, double>> correlations;  // (size, held-out r)
    std::vector<std::pair<int, std::string>> failures; // skipped candidates
};

HiddenSweep select_hidden(const Dataset& ds, const std::vector<std::string>& selected,
                          const TrainingConfig& cfg);

struct Classification {
    double score = 0.0;  // in [0, 1]
    int label = 0;       // 1 = malicious
};

Classification classify(const NetworkModel& model, const FeatureVector& fv, double threshold);
// row variant used when scoring dataset rows; index_map maps model input
// position -> column of the row
Classification classify_row(const NetworkModel& model, const std::vector<double>& row,
                            const std::vector<int>& index_map, double threshold);
std::vector<int> build_index_map(const NetworkModel& model, const Dataset& ds);

struct model_format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct model_version_error : model_format_error {
    using model_format_error::model_format_error;
};
struct model_checksum_error : model_format_error {
    using model_format_error::model_format_error;
};

// returns the model id (payload checksum)
std::string save_model(const NetworkModel& model, const std::string& path);
NetworkModel load_model(const std::string& path);

}  // namespace botdet
