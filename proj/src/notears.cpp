#include "sesa/notears.hpp"

#include "sesa/error.hpp"
#include "sesa/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sesa {

Matrix WeightedGraph::original_units() const {
    Matrix out = w;
    if (scale.size() != w.rows()) return out;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) out(i, j) = w(i, j) * scale(j) / scale(i);
    }
    return out;
}

Eigen::Index WeightedGraph::edge_count() const { return (w.array() != 0.0).count(); }

void NotearsConfig::validate() const {
    if (!(lambda1 >= 0.0)) throw InputError("notears: lambda1 must be >= 0");
    if (!(h_tol > 0.0) || !(rho_max > 0.0) || !(inner_lr > 0.0)) {
        throw InputError("notears: h_tol, rho_max and inner_lr must be > 0");
    }
    if (inner_steps < 1 || max_outer < 1) throw InputError("notears: step counts must be >= 1");
    if (!(threshold >= 0.0)) throw InputError("notears: threshold must be >= 0");
}

Matrix matrix_exp(const Matrix& m) {
    if (m.rows() != m.cols()) throw InputError("matrix_exp: matrix must be square");
    const Eigen::Index d = m.rows();
    if (d == 0) return m;
    const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Matrix a = m / std::ldexp(1.0, squarings);

    Matrix sum = Matrix::Identity(d, d);
    Matrix term = Matrix::Identity(d, d);
    for (int k = 1; k <= 40; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() <= std::numeric_limits<double>::epsilon() * 1e-3 * sum.cwiseAbs().maxCoeff()) {
            break;
        }
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

Acyclicity acyclicity_h(const Matrix& w) {
    if (w.rows() != w.cols()) throw InputError("acyclicity_h: matrix must be square");
    const Matrix e = matrix_exp(w.cwiseProduct(w));
    return {e.trace() - static_cast<double>(w.rows()), 2.0 * e.transpose().cwiseProduct(w)};
}

namespace {

struct Objective {
    Matrix gram;  // X^T X / n on standardized data
    double lambda1;

    // Smooth part: least squares + rho/2 h^2 + alpha h.
    double smooth(const Matrix& w, double rho, double alpha, Matrix* grad) const {
        const Eigen::Index d = w.rows();
        const Matrix r = Matrix::Identity(d, d) - w;
        const double loss = 0.5 * (r.transpose() * gram * r).trace();
        const Acyclicity a = acyclicity_h(w);
        if (grad) *grad = -gram * r + (rho * a.h + alpha) * a.grad;
        return loss + 0.5 * rho * a.h * a.h + alpha * a.h;
    }
};

/// Proximal Adam: Adam step on the smooth part, then soft-thresholding with
/// the per-coordinate step lr_t / (sqrt(v_hat) + eps), lr_t = lr / (1 + t/50).
/// The diagonal stays 0.
Matrix inner_solve(const Objective& obj, Matrix w, double rho, double alpha, const NotearsConfig& cfg) {
    const Eigen::Index d = w.rows();
    AdamMoments s = AdamMoments::zeros_like(w);
    Matrix g;
    for (int t = 1; t <= cfg.inner_steps; ++t) {
        obj.smooth(w, rho, alpha, &g);
        g.diagonal().setZero();
        s.m = 0.9 * s.m + 0.1 * g;
        s.v = 0.999 * s.v + 0.001 * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(0.9, t);
        const double c2 = 1.0 - std::pow(0.999, t);
        const double lr = cfg.inner_lr / (1.0 + t / 50.0);
        const Matrix step = lr / ((s.v.array() / c2).sqrt() + 1e-8);
        w.array() -= step.array() * (s.m.array() / c1);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                if (i == j) {
                    w(i, j) = 0.0;
                    continue;
                }
                const double shrink = step(i, j) * obj.lambda1;
                const double v = w(i, j);
                w(i, j) = v > shrink ? v - shrink : (v < -shrink ? v + shrink : 0.0);
            }
        }
    }
    return w;
}

}  // namespace

WeightedGraph notears_fit(const Matrix& x, const std::vector<std::string>& names, const NotearsConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (d < 2) throw InputError("notears_fit: need at least 2 variables");
    if (n < 2) throw InputError("notears_fit: need at least 2 rows");
    if (static_cast<std::size_t>(d) != names.size()) throw InputError("notears_fit: name count mismatch");
    if (!x.allFinite()) throw InputError("notears_fit: data must be complete and finite");

    const Vector mean = x.colwise().mean().transpose();
    Matrix z = x.rowwise() - mean.transpose();
    Vector sd(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        sd(j) = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
        if (!(sd(j) > 0.0)) throw InputError("notears_fit: column '" + names[static_cast<std::size_t>(j)] + "' is constant");
        if (cfg.standardize) {
            z.col(j) /= sd(j);
        } else {
            sd(j) = 1.0;
        }
    }
    const Objective obj{z.transpose() * z / static_cast<double>(n), cfg.lambda1};

    Matrix w = Matrix::Zero(d, d);
    double rho = 1.0;
    double alpha = 0.0;
    double h = std::numeric_limits<double>::infinity();
    Matrix best = w;
    double best_h = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        Matrix candidate;
        double h_new = 0.0;
        while (true) {
            candidate = inner_solve(obj, w, rho, alpha, cfg);
            h_new = acyclicity_h(candidate).h;
            if (h_new > 0.25 * h && rho < cfg.rho_max) {
                rho *= 10.0;
            } else {
                break;
            }
        }
        w = candidate;
        h = h_new;
        alpha += rho * h;
        if (h < best_h) {
            best_h = h;
            best = w;
        }
        if (h < cfg.h_tol) {
            converged = true;
            break;
        }
        if (rho >= cfg.rho_max) break;
    }

    WeightedGraph g;
    g.w = converged ? w : best;
    g.names = names;
    g.scale = sd;
    g.converged = converged;
    g.h = converged ? h : best_h;
    return g;
}

WeightedGraph notears_fit(const Dataset& ds, const NotearsConfig& cfg) {
    if (!ds.complete()) throw InputError("notears_fit: dataset has missing cells; impute or drop them first");
    return notears_fit(ds.values(), ds.names(), cfg);
}

WeightedGraph threshold_dag(const WeightedGraph& g, double threshold) {
    if (!(threshold >= 0.0)) throw InputError("threshold_dag: threshold must be >= 0");
    WeightedGraph out = g;
    out.w = g.w.unaryExpr([threshold](double v) { return std::abs(v) < threshold ? 0.0 : v; });
    out.h = acyclicity_h(out.w).h;
    if (!(out.h < 1e-12)) {
        throw NumericalError("thresholded graph still has a cycle (h = " + std::to_string(out.h) +
                             "); use a larger threshold");
    }
    return out;
}

SemSpec suggest_spec(const WeightedGraph& g, const std::optional<std::string>& outcome) {
    const Eigen::Index d = g.w.rows();
    if (acyclicity_h(g.w).h >= 1e-12) throw InputError("suggest_spec: graph is cyclic");
    std::vector<bool> keep(static_cast<std::size_t>(d), true);
    if (outcome) {
        const auto it = std::find(g.names.begin(), g.names.end(), *outcome);
        if (it == g.names.end()) throw InputError("suggest_spec: unknown outcome '" + *outcome + "'");
        std::fill(keep.begin(), keep.end(), false);
        std::vector<Eigen::Index> stack{static_cast<Eigen::Index>(it - g.names.begin())};
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            if (keep[static_cast<std::size_t>(v)]) continue;
            keep[static_cast<std::size_t>(v)] = true;
            for (Eigen::Index p = 0; p < d; ++p) {
                if (g.w(p, v) != 0.0) stack.push_back(p);
            }
        }
    }

    // Kahn's algorithm, smallest index first for a stable order.
    std::vector<int> indegree(static_cast<std::size_t>(d), 0);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) indegree[static_cast<std::size_t>(j)] += g.w(i, j) != 0.0 ? 1 : 0;
    }
    std::vector<bool> done(static_cast<std::size_t>(d), false);
    std::vector<Eigen::Index> order;
    for (Eigen::Index step = 0; step < d; ++step) {
        Eigen::Index next = -1;
        for (Eigen::Index v = 0; v < d; ++v) {
            if (!done[static_cast<std::size_t>(v)] && indegree[static_cast<std::size_t>(v)] == 0) {
                next = v;
                break;
            }
        }
        if (next < 0) throw InputError("suggest_spec: graph is cyclic");
        done[static_cast<std::size_t>(next)] = true;
        order.push_back(next);
        for (Eigen::Index j = 0; j < d; ++j) {
            if (g.w(next, j) != 0.0) --indegree[static_cast<std::size_t>(j)];
        }
    }

    std::string text;
    for (auto v : order) {
        if (!keep[static_cast<std::size_t>(v)]) continue;
        std::string rhs;
        for (auto p : order) {
            if (g.w(p, v) == 0.0) continue;
            if (!rhs.empty()) rhs += " + ";
            rhs += g.names[static_cast<std::size_t>(p)];
        }
        if (!rhs.empty()) text += g.names[static_cast<std::size_t>(v)] + " ~ " + rhs + "\n";
    }
    return parse_spec(text);
}

int structural_hamming_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("SHD: shape mismatch");
    int shd = 0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
            const bool a_ij = a(i, j) != 0.0;
            const bool a_ji = a(j, i) != 0.0;
            const bool b_ij = b(i, j) != 0.0;
            const bool b_ji = b(j, i) != 0.0;
            if (a_ij != b_ij || a_ji != b_ji) ++shd;
        }
    }
    return shd;
}

std::string graph_to_json(const WeightedGraph& g, double threshold, const std::string& data_source) {
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json raw = nlohmann::json::array();
    const Matrix original = g.original_units();
    for (Eigen::Index i = 0; i < g.w.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        nlohmann::json raw_row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < g.w.cols(); ++j) {
            row.push_back(g.w(i, j));
            raw_row.push_back(original(i, j));
        }
        weights.push_back(std::move(row));
        raw.push_back(std::move(raw_row));
    }
    nlohmann::json doc{{"names", g.names},       {"weights", weights}, {"weights_original_units", raw},
                       {"threshold", threshold}, {"h", g.h},           {"converged", g.converged},
                       {"data_source", data_source}};
    return doc.dump(2);
}

std::string graph_to_dot(const WeightedGraph& g) {
    std::string out = "digraph G {\n";
    char buf[64];
    for (const auto& name : g.names) out += "  \"" + name + "\";\n";
    for (Eigen::Index i = 0; i < g.w.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.w.cols(); ++j) {
            if (g.w(i, j) == 0.0) continue;
            std::snprintf(buf, sizeof(buf), "%.4f", g.w(i, j));
            out += "  \"" + g.names[static_cast<std::size_t>(i)] + "\" -> \"" + g.names[static_cast<std::size_t>(j)] +
                   "\" [label=\"" + buf + "\"];\n";
        }
    }
    out += "}\n";
    return out;
}

}  // namespace sesa
