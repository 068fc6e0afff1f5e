#include "sesa/sem.hpp"

#include "sesa/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sesa {

namespace {

bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string checked_name(const std::string& raw, int line) {
    std::string name = trim(raw);
    if (name.empty() || !std::all_of(name.begin(), name.end(), name_char)) {
        throw InputError("SEM spec syntax error on line " + std::to_string(line) + ": bad variable name '" +
                         name + "'");
    }
    return name;
}

/// Kahn's algorithm over equation edges predictor -> outcome.
bool acyclic(const SemSpec& spec) {
    std::map<std::string, std::vector<std::string>> children;
    std::map<std::string, int> indegree;
    for (const auto& v : spec.variables) indegree[v] = 0;
    for (const auto& eq : spec.equations) {
        for (const auto& p : eq.predictors) {
            children[p].push_back(eq.outcome);
            ++indegree[eq.outcome];
        }
    }
    std::vector<std::string> ready;
    for (const auto& [v, deg] : indegree) {
        if (deg == 0) ready.push_back(v);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        const std::string v = ready.back();
        ready.pop_back();
        ++seen;
        for (const auto& c : children[v]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    return seen == indegree.size();
}

Matrix take(const Matrix& m, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = m(rows[a], cols[c]);
        }
    }
    return out;
}

}  // namespace

std::string SemSpec::to_text() const {
    std::string out;
    for (const auto& eq : equations) {
        out += eq.outcome + " ~ ";
        for (std::size_t k = 0; k < eq.predictors.size(); ++k) {
            if (k) out += " + ";
            out += eq.predictors[k];
        }
        out += '\n';
    }
    return out;
}

SemSpec parse_spec(const std::string& text) {
    SemSpec spec;
    std::set<std::string> known;
    std::set<std::string> outcomes;
    auto remember = [&](const std::string& name) {
        if (known.insert(name).second) spec.variables.push_back(name);
    };
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto tilde = line.find('~');
        if (tilde == std::string::npos) {
            throw InputError("SEM spec syntax error on line " + std::to_string(number) + ": expected 'Y ~ X1 + X2'");
        }
        if (line.find('~', tilde + 1) != std::string::npos) {
            throw InputError("SEM spec syntax error on line " + std::to_string(number) +
                             ": only regression lines 'Y ~ ...' are supported");
        }
        Equation eq;
        eq.outcome = checked_name(line.substr(0, tilde), number);
        const std::string right = trim(line.substr(tilde + 1));
        if (right.empty() || right.back() == '+') {
            throw InputError("SEM spec syntax error on line " + std::to_string(number) + ": missing predictor");
        }
        std::stringstream rhs(right);
        std::string term;
        std::set<std::string> seen;
        while (std::getline(rhs, term, '+')) {
            std::string name = checked_name(term, number);
            if (name == eq.outcome) {
                throw InputError("SEM spec error on line " + std::to_string(number) + ": self-loop '" + name +
                                 " ~ " + name + "'");
            }
            if (!seen.insert(name).second) {
                throw InputError("SEM spec error on line " + std::to_string(number) + ": predictor '" + name +
                                 "' repeated");
            }
            eq.predictors.push_back(std::move(name));
        }
        if (!outcomes.insert(eq.outcome).second) {
            throw InputError("SEM spec error on line " + std::to_string(number) + ": duplicate outcome '" +
                             eq.outcome + "'");
        }
        remember(eq.outcome);
        for (const auto& p : eq.predictors) remember(p);
        spec.equations.push_back(std::move(eq));
    }
    return spec;
}

SemSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open SEM spec: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
}

// ---------------------------------------------------------------------------

bool PathModel::is_exogenous(Eigen::Index j) const {
    return std::find(exogenous.begin(), exogenous.end(), j) != exogenous.end();
}

Eigen::Index PathModel::free_parameters() const {
    const auto d = static_cast<Eigen::Index>(names.size());
    const auto k = static_cast<Eigen::Index>(exogenous.size());
    Eigen::Index paths = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) paths += b(i, j) != 0.0 ? 1 : 0;
    }
    return d + k * (k + 1) / 2 + (d - k) + paths;
}

void PathModel::validate() const {
    const auto d = static_cast<Eigen::Index>(names.size());
    if (b.rows() != d || b.cols() != d || psi.size() != d || intercepts.size() != d) {
        throw InputError("path model: inconsistent dimensions");
    }
    const auto k = static_cast<Eigen::Index>(exogenous.size());
    if (phi.rows() != k || phi.cols() != k) throw InputError("path model: phi does not match exogenous set");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (b(i, i) != 0.0) throw InputError("path model: nonzero diagonal in B for '" + names[static_cast<std::size_t>(i)] + "'");
        if (is_exogenous(i)) {
            if (b.row(i).cwiseAbs().maxCoeff() != 0.0) {
                throw InputError("path model: exogenous variable '" + names[static_cast<std::size_t>(i)] +
                                 "' has incoming paths");
            }
        } else if (!(psi(i) > 0.0)) {
            throw InputError("path model: residual variance of '" + names[static_cast<std::size_t>(i)] +
                             "' must be positive");
        }
    }
    if (k > 0) {
        if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw InputError("path model: phi not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(phi);
        if (eig.eigenvalues().minCoeff() < -1e-10) throw InputError("path model: phi not positive semi-definite");
    }
}

Moments implied_moments(const PathModel& pm) {
    pm.validate();
    const auto d = static_cast<Eigen::Index>(pm.names.size());
    const Matrix i_minus_b = Matrix::Identity(d, d) - pm.b;
    Eigen::FullPivLU<Matrix> lu(i_minus_b);
    if (!lu.isInvertible()) throw NumericalError("path model: (I - B) is singular");
    const Matrix a = lu.inverse();

    Matrix omega = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!pm.is_exogenous(i)) omega(i, i) = pm.psi(i);
    }
    for (std::size_t r = 0; r < pm.exogenous.size(); ++r) {
        for (std::size_t c = 0; c < pm.exogenous.size(); ++c) {
            omega(pm.exogenous[r], pm.exogenous[c]) =
                pm.phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
    Moments m;
    m.mean = a * pm.intercepts;
    m.cov = a * omega * a.transpose();
    m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
    return m;
}

FitIndices fit_indices(double loglik_model, double loglik_saturated, double loglik_baseline, int df_model,
                       int df_baseline, long n) {
    if (n <= 0) throw InputError("fit_indices: n must be positive");
    if (df_model < 0 || df_baseline < 0) throw InputError("fit_indices: degrees of freedom must be >= 0");
    FitIndices out;
    out.chi2_model = 2.0 * (loglik_saturated - loglik_model);
    out.chi2_baseline = 2.0 * (loglik_saturated - loglik_baseline);
    if (df_model == 0) return out;
    const double excess_m = out.chi2_model - df_model;
    const double excess_b = out.chi2_baseline - df_baseline;
    const double denom = std::max(excess_b, excess_m);
    out.cfi = denom > 0.0 ? 1.0 - excess_m / denom : 1.0;
    out.rmsea = std::sqrt(std::max(excess_m, 0.0) / (static_cast<double>(df_model) * static_cast<double>(n)));
    return out;
}

PathFit fit_paths_fiml(const SemSpec& spec, const Dataset& ds, const EmConfig& cfg) {
    const Eigen::Index d = ds.cols();
    if (d < 2) throw InputError("fit_paths_fiml: need at least 2 variables");
    for (const auto& v : spec.variables) {
        if (!ds.find_column(v)) throw InputError("SEM spec variable '" + v + "' is not a dataset column");
    }
    if (!acyclic(spec)) {
        throw InputError("SEM spec is non-recursive (its equations form a cycle); only recursive path models are supported");
    }

    PathFit fit;
    EmResult em = em_fit(ds, cfg);
    fit.saturated = em.params;
    fit.loglik_saturated = em.final_loglik;
    fit.em_iterations = em.iterations;
    fit.warnings = em.warnings;
    const Matrix& s = fit.saturated.sigma;
    const Vector& mu = fit.saturated.mu;

    PathModel pm;
    pm.names = ds.names();
    pm.b = Matrix::Zero(d, d);
    pm.psi = Vector::Zero(d);
    pm.intercepts = Vector::Zero(d);
    std::vector<bool> endogenous(static_cast<std::size_t>(d), false);
    for (const auto& eq : spec.equations) {
        const Eigen::Index o = ds.column_index(eq.outcome);
        endogenous[static_cast<std::size_t>(o)] = true;
        std::vector<Eigen::Index> preds;
        for (const auto& p : eq.predictors) preds.push_back(ds.column_index(p));
        const Matrix s_pp = take(s, preds, preds);
        Vector s_po(static_cast<Eigen::Index>(preds.size()));
        for (std::size_t k = 0; k < preds.size(); ++k) s_po(static_cast<Eigen::Index>(k)) = s(preds[k], o);

        Eigen::LLT<Matrix> llt(s_pp);
        if (llt.info() != Eigen::Success) {
            Matrix stabilized = s_pp;
            stabilized.diagonal().array() += cfg.ridge > 0.0 ? cfg.ridge : 1e-6;
            llt.compute(stabilized);
            fit.warnings.push_back("predictor block of '" + eq.outcome + "' is singular; ridge-stabilized solve");
            if (llt.info() != Eigen::Success) {
                throw NumericalError("predictor covariance of '" + eq.outcome + "' is not positive definite");
            }
        }
        const Vector coef = llt.solve(s_po);
        double intercept = mu(o);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            pm.b(o, preds[k]) = coef(static_cast<Eigen::Index>(k));
            intercept -= coef(static_cast<Eigen::Index>(k)) * mu(preds[k]);
        }
        pm.intercepts(o) = intercept;
        double resid = s(o, o) - s_po.dot(coef);
        if (!(resid > 0.0)) {
            fit.warnings.push_back("residual variance of '" + eq.outcome + "' is not positive; floored at ridge");
            resid = std::max(cfg.ridge, 1e-12);
        }
        pm.psi(o) = resid;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!endogenous[static_cast<std::size_t>(j)]) pm.exogenous.push_back(j);
    }
    pm.phi = take(s, pm.exogenous, pm.exogenous);
    for (auto j : pm.exogenous) {
        pm.intercepts(j) = mu(j);
        pm.psi(j) = s(j, j);
    }
    fit.model = pm;

    const Moments implied = implied_moments(pm);
    fit.implied = {implied.mean, implied.cov};
    fit.loglik = loglik_observed(fit.implied, ds, nullptr, cfg.ridge);

    // Independence baseline: per-column ML mean/variance is the exact FIML
    // solution because the likelihood factorizes over columns.
    MvnParams baseline{Vector::Zero(d), Matrix::Zero(d, d)};
    for (Eigen::Index j = 0; j < d; ++j) {
        double sum = 0.0;
        double count = 0.0;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (ds.observed(i, j)) {
                sum += ds.value(i, j);
                count += 1.0;
            }
        }
        const double m = sum / count;
        double ss = 0.0;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (ds.observed(i, j)) ss += (ds.value(i, j) - m) * (ds.value(i, j) - m);
        }
        baseline.mu(j) = m;
        baseline.sigma(j, j) = std::max(ss / count, 1e-12);
    }
    fit.loglik_baseline = loglik_observed(baseline, ds, nullptr, cfg.ridge);

    const auto saturated_params = d + d * (d + 1) / 2;
    fit.df_model = static_cast<int>(saturated_params - pm.free_parameters());
    fit.df_baseline = static_cast<int>(d * (d - 1) / 2);
    fit.indices = fit_indices(fit.loglik, fit.loglik_saturated, fit.loglik_baseline, std::max(fit.df_model, 0),
                              fit.df_baseline, static_cast<long>(ds.rows()));
    return fit;
}

std::string describe(const PathFit& fit, const SemSpec& spec) {
    std::string out;
    char buf[256];
    const auto& pm = fit.model;
    auto index_of = [&](const std::string& name) {
        return static_cast<Eigen::Index>(std::find(pm.names.begin(), pm.names.end(), name) - pm.names.begin());
    };
    for (const auto& eq : spec.equations) {
        const auto o = index_of(eq.outcome);
        for (const auto& p : eq.predictors) {
            std::snprintf(buf, sizeof(buf), "%s ~ %s\t%.4f\n", eq.outcome.c_str(), p.c_str(), pm.b(o, index_of(p)));
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%s ~~ %s\t%.4f\n", eq.outcome.c_str(), eq.outcome.c_str(), pm.psi(o));
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "loglik: %.6f; df: %d; CFI: %.4f; RMSEA: %.4f\n", fit.loglik, fit.df_model,
                  fit.indices.cfi, fit.indices.rmsea);
    out += buf;
    return out;
}

}  // namespace sesa
