#pragma once

#include "sesa/dataset.hpp"

#include <string>
#include <vector>

namespace sesa {

/// Joint multivariate-normal parameters.
struct MvnParams {
    Vector mu;
    Matrix sigma;
};

struct EmConfig {
    int max_iter = 500;
    /// Relative log-likelihood change below which EM may stop.
    double tol = 1e-6;
    /// Diagonal ridge added whenever a Cholesky factorization fails.
    double ridge = 1e-6;
    /// Largest absolute parameter change allowed at convergence.
    double param_tol = 1e-7;

    void validate() const;
};

struct EmResult {
    MvnParams params;
    int iterations = 0;
    double final_loglik = 0.0;
    bool converged = false;
    /// Log-likelihood of the start point followed by one entry per iteration.
    std::vector<double> loglik_trace;
    std::vector<std::string> warnings;
};

/// One missingness pattern: which columns are observed and which rows share it.
struct Pattern {
    std::vector<Eigen::Index> observed;
    std::vector<Eigen::Index> missing;
    std::vector<Eigen::Index> rows;
};

/// Patterns in lexicographic order of their observed-column masks.
std::vector<Pattern> missingness_patterns(const Mask& mask);

/// Observed-data log-likelihood: sum over rows of log N(x_o; mu_o, Sigma_oo).
/// Rows with no observed cell contribute 0 and are reported in `warnings`.
double loglik_observed(const MvnParams& params, const Dataset& ds,
                       std::vector<std::string>* warnings = nullptr, double ridge = 1e-6);

/// EM for the saturated MVN model, started from pairwise_stats().
EmResult em_fit(const Dataset& ds, const EmConfig& cfg = {});

/// EM from an explicit start point.
EmResult em_fit(const Dataset& ds, const MvnParams& start, const EmConfig& cfg = {});

/// Fills missing cells with E[x_m | x_o] = mu_m + Sigma_mo Sigma_oo^{-1} (x_o - mu_o).
/// Fully missing rows get mu. Observed cells are copied bit-for-bit.
Imputed conditional_impute(const MvnParams& params, const Dataset& ds, double ridge = 1e-6);

}  // namespace sesa
