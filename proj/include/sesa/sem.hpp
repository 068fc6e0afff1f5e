#pragma once

#include "sesa/dataset.hpp"
#include "sesa/fiml.hpp"

#include <string>
#include <vector>

namespace sesa {

struct Equation {
    std::string outcome;
    std::vector<std::string> predictors;
};

/// Observed-variable path model written as "Y ~ X1 + X2" lines.
struct SemSpec {
    std::vector<Equation> equations;
    /// Every name mentioned, in order of first appearance.
    std::vector<std::string> variables;

    std::string to_text() const;
};

/// Lines of the form "Y ~ X1 + X2 + ..."; '#' starts a comment. Names that
/// only appear as predictors are exogenous.
SemSpec parse_spec(const std::string& text);
SemSpec load_spec(const std::string& path);

/// Linear recursive path model over a fixed variable list.
///
/// b(i, j) is the coefficient of variable j in the equation for variable i.
/// Exogenous variables have an all-zero row in b; their joint covariance is
/// `phi` (ordered as `exogenous`) and their means sit in `intercepts`.
/// For endogenous variables `psi` holds the residual variance and
/// `intercepts` the regression intercept.
struct PathModel {
    std::vector<std::string> names;
    Matrix b;
    Vector psi;
    std::vector<Eigen::Index> exogenous;
    Matrix phi;
    Vector intercepts;

    bool is_exogenous(Eigen::Index j) const;
    Eigen::Index free_parameters() const;
    void validate() const;
};

/// mu = A c and Sigma = A Omega A^T with A = (I - B)^{-1}, where Omega holds
/// phi on the exogenous block and psi on the endogenous diagonal.
Moments implied_moments(const PathModel& pm);

struct FitIndices {
    double cfi = 1.0;
    double rmsea = 0.0;
    double chi2_model = 0.0;
    double chi2_baseline = 0.0;
};

/// CFI = 1 - (chi2_m - df_m) / max(chi2_b - df_b, chi2_m - df_m), left
/// unclamped so it exceeds 1 when chi2_m < df_m.
/// RMSEA = sqrt(max(chi2_m - df_m, 0) / (df_m * n)). A saturated model
/// (df_m = 0) reports CFI = 1 and RMSEA = 0.
FitIndices fit_indices(double loglik_model, double loglik_saturated, double loglik_baseline,
                       int df_model, int df_baseline, long n);

struct PathFit {
    PathModel model;
    /// Saturated EM estimate the coefficients were derived from.
    MvnParams saturated;
    /// Moments implied by `model`.
    MvnParams implied;
    double loglik = 0.0;
    double loglik_saturated = 0.0;
    double loglik_baseline = 0.0;
    int df_model = 0;
    int df_baseline = 0;
    FitIndices indices;
    int em_iterations = 0;
    std::vector<std::string> warnings;
};

/// Two-stage FIML path analysis: saturated EM moments, then per equation
/// coefficients Sigma_pp^{-1} sigma_po and residual variance
/// sigma_oo - sigma_op^T Sigma_pp^{-1} sigma_po. Variables of `ds` that the
/// spec does not mention are treated as exogenous.
PathFit fit_paths_fiml(const SemSpec& spec, const Dataset& ds, const EmConfig& cfg = {});

/// Table of estimates ("Y ~ X  estimate", "Y ~~ Y  residual variance") plus
/// fit indices, one line each.
std::string describe(const PathFit& fit, const SemSpec& spec);

}  // namespace sesa
