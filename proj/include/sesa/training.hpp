#pragma once

#include "sesa/attention.hpp"
#include "sesa/dataset.hpp"
#include "sesa/fiml.hpp"
#include "sesa/sem.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sesa {

struct LossWeights {
    double alpha = 1.0;   // MSE
    double beta = 0.1;    // covariance mismatch
    double gamma = 1e-3;  // L1 on attention parameters

    void validate() const;
};

enum class TrainMode { benchmark, self_supervised };

struct TrainConfig {
    double lr = 1e-3;
    int max_epochs = 500;
    /// Stop when |L_e - L_{e-window}| / |L_{e-window}| < rel_tol.
    double rel_tol = 1e-5;
    int window = 10;
    /// Fraction of observed cells hidden each epoch in self-supervised mode.
    double self_mask_rate = 0.1;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::self_supervised;
    /// Query/key width; 0 means d.
    Eigen::Index dk = 0;
    Eigen::Index block_rows = 4096;

    void validate() const;
};

struct LossTerms {
    double total = 0.0;
    double mse = 0.0;
    double cov = 0.0;
    double l1 = 0.0;
};

struct GradientSet {
    Matrix d_wq;
    Matrix d_wk;
    Matrix d_wv;

    double max_abs() const;
};

/// alpha * mean((imputed - reference)^2 over eval cells)
///   + beta * ||Cov(imputed) - reference_cov||_F + gamma * sum |theta|.
/// Covariances use the ML denominator n. An empty eval mask gives mse = 0
/// and a warning.
LossTerms composite_loss(const Matrix& imputed, const Matrix& reference, const Mask& eval_mask,
                         const Matrix& reference_cov, const AttentionParams& params, const LossWeights& w,
                         std::vector<std::string>* warnings = nullptr);

/// Same, with reference_cov = Cov(reference).
LossTerms composite_loss(const Matrix& imputed, const Matrix& reference, const Mask& eval_mask,
                         const AttentionParams& params, const LossWeights& w,
                         std::vector<std::string>* warnings = nullptr);

/// One loss evaluation's fixed inputs. Cells in `refine_mask` take their
/// value from the attention output of `input`; the rest keep `input`.
struct LossProblem {
    Matrix input;
    Mask refine_mask;
    Matrix reference;
    Mask eval_mask;
    Matrix reference_cov;
};

/// Forward pass followed by composite_loss.
LossTerms problem_loss(const LossProblem& problem, const AttentionParams& params, const LossWeights& w);

/// Exact gradient of problem_loss with respect to wq, wk, wv. The L1 part
/// uses sign(theta) with sign(0) = 0; the covariance part has gradient 0
/// where the mismatch is exactly zero.
GradientSet grad_composite(const LossProblem& problem, const AttentionParams& params, const LossWeights& w,
                           LossTerms* terms = nullptr);

/// Central differences (f(theta + h) - f(theta - h)) / 2h on every coordinate.
GradientSet finite_diff_grad(const LossProblem& problem, const AttentionParams& params, const LossWeights& w,
                             double h);

double central_difference(const std::function<double(double)>& f, double x, double h);

/// First and second moment estimates for one parameter matrix.
struct AdamMoments {
    Matrix m;
    Matrix v;

    static AdamMoments zeros_like(const Matrix& w);
};

/// Bias-corrected Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8; t >= 1.
void adam_update(Matrix& w, const Matrix& g, AdamMoments& s, double lr, int t);

struct AdamState {
    AdamMoments wq;
    AdamMoments wk;
    AdamMoments wv;

    static AdamState zeros_like(const AttentionParams& p);
};

struct AdamResult {
    AttentionParams params;
    AdamState state;
};

AdamResult adam_step(const AttentionParams& params, const GradientSet& grads, const AdamState& state, double lr,
                     int t);

struct EpochRecord {
    int epoch = 0;
    LossTerms loss;
};

struct TrainResult {
    AttentionParams params;
    std::vector<EpochRecord> history;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Full-batch training of the attention refiner.
///
/// `ds` is the (normalized) observed data and `init` its FIML-filled
/// version. Benchmark mode supervises the missing cells with `truth`.
/// Self-supervised mode hides a fresh seeded subset of observed cells every
/// epoch, refills them by conditional expectation under `moments`, and uses
/// their observed values as targets; `truth` must then be absent.
TrainResult train(const Dataset& ds, const Imputed& init, const Dataset* truth, const MvnParams& moments,
                  const TrainConfig& cfg, const LossWeights& w);

/// Builds the epoch-e loss problem used by train() (exposed for tests).
LossProblem training_problem(const Dataset& ds, const Imputed& init, const Dataset* truth,
                             const MvnParams& moments, const Matrix& reference_cov, const TrainConfig& cfg,
                             int epoch);

enum class InitMoments { implied, saturated };

struct ImputeOptions {
    TrainConfig train;
    LossWeights weights;
    EmConfig em;
    /// Which moments drive the FIML initialization when a spec is supplied.
    InitMoments init_moments = InitMoments::implied;
};

struct ImputeReport {
    Mask provenance;
    std::size_t imputed_cells = 0;
    int em_iterations = 0;
    double em_loglik = 0.0;
    std::optional<FitIndices> sem_fit;
    std::vector<EpochRecord> history;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct ImputeResult {
    /// Complete dataset in original units with ordinal cells snapped.
    Dataset data;
    ImputeReport report;
};

/// encode -> normalize -> FIML init -> train -> refine -> denormalize ->
/// snap. Observed cells of the result are bit-identical to `ds`. `truth`
/// (same shape, complete) switches training to benchmark mode.
ImputeResult impute(const Dataset& ds, const std::optional<SemSpec>& spec, const ImputeOptions& options,
                    const Dataset* truth = nullptr);

}  // namespace sesa
