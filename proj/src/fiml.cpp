#include "sesa/fiml.hpp"

#include "sesa/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace sesa {

namespace {

Matrix take(const Matrix& m, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = m(rows[a], cols[b]);
        }
    }
    return out;
}

Vector take(const Vector& v, const std::vector<Eigen::Index>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Eigen::Index>(a)) = v(idx[a]);
    return out;
}

/// Cholesky of a covariance block, retried once with a diagonal ridge.
Eigen::LLT<Matrix> factor(const Matrix& s, double ridge, const char* what,
                          std::vector<std::string>* warnings) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() == Eigen::Success) return llt;
    const double r = ridge > 0.0 ? ridge : 1e-6;
    Matrix stabilized = s;
    stabilized.diagonal().array() += r;
    llt.compute(stabilized);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(what) + ": covariance block is not positive definite");
    }
    if (warnings) warnings->push_back(std::string(what) + ": ridge added to non-PD covariance block");
    return llt;
}

constexpr double log_two_pi = 1.8378770664093454835606594728112;

double pattern_loglik(const MvnParams& params, const Dataset& ds, const Pattern& p, double ridge,
                      std::vector<std::string>* warnings) {
    const auto k = static_cast<Eigen::Index>(p.observed.size());
    const Matrix s_oo = take(params.sigma, p.observed, p.observed);
    const Vector mu_o = take(params.mu, p.observed);
    const auto llt = factor(s_oo, ridge, "loglik_observed", warnings);
    const Matrix l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    double total = 0.0;
    Vector r(k);
    for (auto row : p.rows) {
        for (Eigen::Index a = 0; a < k; ++a) r(a) = ds.value(row, p.observed[static_cast<std::size_t>(a)]) - mu_o(a);
        const Vector z = llt.matrixL().solve(r);
        total += -0.5 * (static_cast<double>(k) * log_two_pi + logdet + z.squaredNorm());
    }
    return total;
}

/// Replace an indefinite matrix by its eigenvalue-clipped projection.
Matrix nearest_pd(const Matrix& s, double floor_value) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
    Vector ev = eig.eigenvalues().cwiseMax(floor_value);
    Matrix out = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

double max_abs_change(const MvnParams& a, const MvnParams& b) {
    return std::max((a.mu - b.mu).cwiseAbs().maxCoeff(), (a.sigma - b.sigma).cwiseAbs().maxCoeff());
}

}  // namespace

void EmConfig::validate() const {
    if (max_iter < 1) throw InputError("EM max_iter must be >= 1");
    if (!(tol > 0.0)) throw InputError("EM tol must be > 0");
    if (!(ridge >= 0.0)) throw InputError("EM ridge must be >= 0");
    if (!(param_tol > 0.0)) throw InputError("EM param_tol must be > 0");
}

std::vector<Pattern> missingness_patterns(const Mask& mask) {
    std::map<std::vector<bool>, std::vector<Eigen::Index>> groups;
    std::vector<bool> key(static_cast<std::size_t>(mask.cols()));
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) key[static_cast<std::size_t>(j)] = mask(i, j);
        groups[key].push_back(i);
    }
    std::vector<Pattern> out;
    out.reserve(groups.size());
    for (auto& [k, rows] : groups) {
        Pattern p;
        for (std::size_t j = 0; j < k.size(); ++j) {
            (k[j] ? p.observed : p.missing).push_back(static_cast<Eigen::Index>(j));
        }
        p.rows = std::move(rows);
        out.push_back(std::move(p));
    }
    return out;
}

double loglik_observed(const MvnParams& params, const Dataset& ds, std::vector<std::string>* warnings,
                       double ridge) {
    if (params.mu.size() != ds.cols() || params.sigma.rows() != ds.cols() || params.sigma.cols() != ds.cols()) {
        throw InputError("loglik_observed: parameter dimension does not match dataset");
    }
    double total = 0.0;
    for (const auto& p : missingness_patterns(ds.mask())) {
        if (p.observed.empty()) {
            if (warnings) {
                warnings->push_back(std::to_string(p.rows.size()) +
                                    " fully missing row(s) skipped in log-likelihood");
            }
            continue;
        }
        total += pattern_loglik(params, ds, p, ridge, warnings);
    }
    return total;
}

EmResult em_fit(const Dataset& ds, const EmConfig& cfg) {
    cfg.validate();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        if (ds.mask().col(j).count() < 2) {
            throw InputError("em_fit: column '" + ds.spec(j).name + "' has fewer than 2 observed cells");
        }
    }
    Moments init = pairwise_stats(ds);
    MvnParams start{init.mean, init.cov};
    EmResult result;
    result.warnings = init.warnings;
    Eigen::LLT<Matrix> llt(start.sigma);
    if (llt.info() != Eigen::Success) {
        start.sigma = nearest_pd(start.sigma, std::max(cfg.ridge, 1e-10));
        result.warnings.push_back("pairwise covariance was indefinite; projected to nearest PD matrix");
    }
    EmResult fit = em_fit(ds, start, cfg);
    fit.warnings.insert(fit.warnings.begin(), result.warnings.begin(), result.warnings.end());
    return fit;
}

EmResult em_fit(const Dataset& ds, const MvnParams& start, const EmConfig& cfg) {
    cfg.validate();
    const Eigen::Index d = ds.cols();
    if (d < 1) throw InputError("em_fit: dataset has no columns");
    if (start.mu.size() != d || start.sigma.rows() != d || start.sigma.cols() != d) {
        throw InputError("em_fit: start parameters do not match dataset dimension");
    }

    EmResult result;
    std::vector<Pattern> patterns;
    for (auto& p : missingness_patterns(ds.mask())) {
        if (p.observed.empty()) {
            result.warnings.push_back(std::to_string(p.rows.size()) + " fully missing row(s) ignored by EM");
            continue;
        }
        patterns.push_back(std::move(p));
    }
    Eigen::Index n = 0;
    for (const auto& p : patterns) n += static_cast<Eigen::Index>(p.rows.size());
    if (n == 0) throw InputError("em_fit: no row has an observed cell");

    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = a + 1; b < d; ++b) {
            if ((ds.mask().col(a).array() && ds.mask().col(b).array()).count() == 0) {
                result.warnings.push_back("columns '" + ds.spec(a).name + "' and '" + ds.spec(b).name +
                                          "' are never jointly observed; their covariance is not identified");
            }
        }
    }

    MvnParams params = start;
    double ll = 0.0;
    for (const auto& p : patterns) ll += pattern_loglik(params, ds, p, cfg.ridge, &result.warnings);
    result.loglik_trace.push_back(ll);

    for (int it = 1; it <= cfg.max_iter; ++it) {
        Vector t1 = Vector::Zero(d);
        Matrix t2 = Matrix::Zero(d, d);
        Vector x(d);
        for (const auto& p : patterns) {
            const auto ko = static_cast<Eigen::Index>(p.observed.size());
            const auto km = static_cast<Eigen::Index>(p.missing.size());
            Matrix coef;      // Sigma_mo Sigma_oo^{-1}
            Matrix cond_cov;  // Sigma_mm - coef Sigma_om
            if (km > 0) {
                const Matrix s_oo = take(params.sigma, p.observed, p.observed);
                const Matrix s_mo = take(params.sigma, p.missing, p.observed);
                const auto llt = factor(s_oo, cfg.ridge, "em_fit", &result.warnings);
                coef = llt.solve(s_mo.transpose()).transpose();
                cond_cov = take(params.sigma, p.missing, p.missing) - coef * s_mo.transpose();
            }
            Matrix pattern_t2 = Matrix::Zero(d, d);
            for (auto row : p.rows) {
                Vector r(ko);
                for (Eigen::Index a = 0; a < ko; ++a) {
                    const auto j = p.observed[static_cast<std::size_t>(a)];
                    x(j) = ds.value(row, j);
                    r(a) = x(j) - params.mu(j);
                }
                if (km > 0) {
                    const Vector xm = coef * r;
                    for (Eigen::Index a = 0; a < km; ++a) {
                        const auto j = p.missing[static_cast<std::size_t>(a)];
                        x(j) = params.mu(j) + xm(a);
                    }
                }
                t1 += x;
                pattern_t2.noalias() += x * x.transpose();
            }
            if (km > 0) {
                const double rows = static_cast<double>(p.rows.size());
                for (Eigen::Index a = 0; a < km; ++a) {
                    for (Eigen::Index b = 0; b < km; ++b) {
                        pattern_t2(p.missing[static_cast<std::size_t>(a)], p.missing[static_cast<std::size_t>(b)]) +=
                            rows * cond_cov(a, b);
                    }
                }
            }
            t2 += pattern_t2;
        }

        MvnParams next;
        next.mu = t1 / static_cast<double>(n);
        next.sigma = t2 / static_cast<double>(n) - next.mu * next.mu.transpose();
        next.sigma = 0.5 * (next.sigma + next.sigma.transpose()).eval();
        bool ridged = false;
        if (Eigen::LLT<Matrix>(next.sigma).info() != Eigen::Success) {
            next.sigma.diagonal().array() += cfg.ridge > 0.0 ? cfg.ridge : 1e-6;
            result.warnings.push_back("em_fit: ridge added to non-PD covariance at iteration " + std::to_string(it));
            ridged = true;
        }

        double next_ll = 0.0;
        for (const auto& p : patterns) next_ll += pattern_loglik(next, ds, p, cfg.ridge, &result.warnings);
        const double scale = std::max(1.0, std::abs(ll));
        if (!ridged && next_ll < ll - 1e-8 * scale) {
            throw InvariantError("em_fit: log-likelihood decreased from " + std::to_string(ll) + " to " +
                                 std::to_string(next_ll) + " at iteration " + std::to_string(it));
        }
        const double change = max_abs_change(params, next);
        const double rel = std::abs(next_ll - ll) / scale;
        params = std::move(next);
        ll = next_ll;
        result.loglik_trace.push_back(ll);
        result.iterations = it;
        if (rel < cfg.tol && change < cfg.param_tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        result.warnings.push_back("em_fit: stopped at max_iter=" + std::to_string(cfg.max_iter) +
                                  " before convergence");
    }
    result.params = std::move(params);
    result.final_loglik = ll;
    return result;
}

Imputed conditional_impute(const MvnParams& params, const Dataset& ds, double ridge) {
    const Eigen::Index d = ds.cols();
    if (params.mu.size() != d || params.sigma.rows() != d || params.sigma.cols() != d) {
        throw InputError("conditional_impute: parameter dimension does not match dataset");
    }
    Imputed out{ds.values(), Mask::Constant(ds.rows(), d, false)};
    for (const auto& p : missingness_patterns(ds.mask())) {
        if (p.missing.empty()) continue;
        const auto ko = static_cast<Eigen::Index>(p.observed.size());
        const auto km = static_cast<Eigen::Index>(p.missing.size());
        Matrix coef = Matrix::Zero(km, ko);
        if (ko > 0) {
            const Matrix s_oo = take(params.sigma, p.observed, p.observed);
            const Matrix s_mo = take(params.sigma, p.missing, p.observed);
            const auto llt = factor(s_oo, ridge, "conditional_impute", nullptr);
            coef = llt.solve(s_mo.transpose()).transpose();
        }
        Vector r(ko);
        for (auto row : p.rows) {
            for (Eigen::Index a = 0; a < ko; ++a) {
                const auto j = p.observed[static_cast<std::size_t>(a)];
                r(a) = ds.value(row, j) - params.mu(j);
            }
            const Vector xm = ko > 0 ? Vector(coef * r) : Vector::Zero(km);
            for (Eigen::Index a = 0; a < km; ++a) {
                const auto j = p.missing[static_cast<std::size_t>(a)];
                out.values(row, j) = params.mu(j) + xm(a);
                out.provenance(row, j) = true;
            }
        }
    }
    return out;
}

}  // namespace sesa
