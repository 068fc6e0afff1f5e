#pragma once

#include "sesa/dataset.hpp"
#include "sesa/random.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <string>
#include <vector>

namespace sesa::testing {

inline std::vector<std::string> default_names(Eigen::Index d) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

inline std::vector<Eigen::Index> all_columns(Eigen::Index d) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < d; ++j) cols.push_back(j);
    return cols;
}

inline std::vector<VariableSpec> continuous_specs(const std::vector<std::string>& names) {
    std::vector<VariableSpec> specs;
    for (const auto& n : names) specs.push_back(VariableSpec::continuous(n));
    return specs;
}

inline Matrix standard_normals(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.normal();
    }
    return z;
}

inline Matrix equicorrelated(Eigen::Index d, double rho) {
    Matrix s = Matrix::Constant(d, d, rho);
    s.diagonal().setOnes();
    return s;
}

/// n draws from N(mu, sigma).
inline Matrix mvn_sample(Eigen::Index n, const Vector& mu, const Matrix& sigma, std::uint64_t seed) {
    const Matrix l = Eigen::LLT<Matrix>(sigma).matrixL();
    Matrix x = standard_normals(n, mu.size(), seed) * l.transpose();
    x.rowwise() += mu.transpose();
    return x;
}

inline Dataset complete_dataset(const Matrix& x, const std::vector<std::string>& names) {
    return Dataset(x, Mask::Constant(x.rows(), x.cols(), true), continuous_specs(names));
}

inline Dataset complete_dataset(const Matrix& x) { return complete_dataset(x, default_names(x.cols())); }

/// Strictly upper-triangular weights: each pair gets an edge with
/// probability `p`, magnitude uniform in [0.5, 2], random sign.
inline Matrix random_dag(Eigen::Index d, double p, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix w = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (rng.uniform() < p) {
                const double mag = rng.uniform(0.5, 2.0);
                w(i, j) = rng.uniform() < 0.5 ? -mag : mag;
            }
        }
    }
    return w;
}

/// X = X W + E with unit-variance Gaussian noise, W upper triangular.
inline Matrix sample_linear_sem(const Matrix& w, Eigen::Index n, std::uint64_t seed) {
    const Eigen::Index d = w.rows();
    const Matrix e = standard_normals(n, d, seed);
    const Matrix ident = Matrix::Identity(d, d);
    return e * (ident - w).inverse();
}

/// Root mean squared difference over cells flagged in `mask`.
inline double masked_rmse(const Matrix& a, const Matrix& b, const Mask& mask) {
    double ss = 0.0;
    long count = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (!mask(i, j)) continue;
            ss += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
            ++count;
        }
    }
    return count == 0 ? 0.0 : std::sqrt(ss / static_cast<double>(count));
}

}  // namespace sesa::testing
