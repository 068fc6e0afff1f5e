#pragma once

#include "sesa/dataset.hpp"
#include "sesa/sem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sesa {

/// Weighted directed graph; w(i, j) is the strength of edge i -> j.
///
/// Weights from notears_fit() are on the standardized scale; `scale` holds
/// the column standard deviations so original_units() can map them back.
struct WeightedGraph {
    Matrix w;
    std::vector<std::string> names;
    Vector scale;
    /// False when the augmented Lagrangian ran out of rho before h < h_tol.
    bool converged = true;
    double h = 0.0;

    /// w(i, j) * sd_j / sd_i, i.e. the coefficient of i in the raw equation of j.
    Matrix original_units() const;
    Eigen::Index edge_count() const;
};

struct NotearsConfig {
    double lambda1 = 0.1;
    double h_tol = 1e-8;
    double rho_max = 1e16;
    double inner_lr = 1e-2;
    int inner_steps = 500;
    double threshold = 0.3;
    int max_outer = 100;
    /// Fit on centered data in its original scale instead of standardizing.
    bool standardize = true;

    void validate() const;
};

/// Scaling and squaring with a truncated Taylor series.
Matrix matrix_exp(const Matrix& m);

struct Acyclicity {
    double h = 0.0;
    Matrix grad;
};

/// h(W) = tr(exp(W o W)) - d and its gradient 2 exp(W o W)^T o W.
Acyclicity acyclicity_h(const Matrix& w);

/// Linear NOTEARS on column-standardized data: minimizes
/// 1/(2n) ||X - XW||_F^2 + lambda1 ||W||_1 subject to h(W) = 0 by an
/// augmented Lagrangian (rho x10 while h > h_prev / 4, alpha += rho h), with
/// proximal Adam as the inner solver. `x` must be complete.
WeightedGraph notears_fit(const Matrix& x, const std::vector<std::string>& names, const NotearsConfig& cfg = {});
WeightedGraph notears_fit(const Dataset& ds, const NotearsConfig& cfg = {});

/// Zeroes |w| < threshold; throws NumericalError if a cycle survives.
WeightedGraph threshold_dag(const WeightedGraph& g, double threshold);

/// One equation per node with parents, in topological order. With an
/// outcome, only that node and its ancestors are kept.
SemSpec suggest_spec(const WeightedGraph& g, const std::optional<std::string>& outcome = std::nullopt);

/// Node pairs whose edge status differs (missing, extra or reversed).
int structural_hamming_distance(const Matrix& a, const Matrix& b);

std::string graph_to_json(const WeightedGraph& g, double threshold, const std::string& data_source);
std::string graph_to_dot(const WeightedGraph& g);

}  // namespace sesa
