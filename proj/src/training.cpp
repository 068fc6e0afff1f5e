#include "sesa/training.hpp"

#include "sesa/error.hpp"
#include "sesa/missingness.hpp"
#include "sesa/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sesa {

namespace {

constexpr double adam_beta1 = 0.9;
constexpr double adam_beta2 = 0.999;
constexpr double adam_eps = 1e-8;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Matrix ml_cov(const Matrix& x) { return matrix_moments(x).cov; }

struct Forward {
    Matrix q;
    Matrix k;
    Matrix v;
    Matrix a;
    Matrix imputed;
};

Forward forward(const LossProblem& problem, const AttentionParams& p) {
    Forward f;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.dk()));
    f.q = problem.input * p.wq;
    f.k = problem.input * p.wk;
    f.v = problem.input * p.wv;
    f.a = softmax_rows(scale * f.q * f.k.transpose());
    const Matrix y = f.a * f.v;
    f.imputed = problem.input;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            if (problem.refine_mask(i, j)) f.imputed(i, j) = y(i, j);
        }
    }
    return f;
}

template <typename Stage>
auto run_stage(const char* name, Stage&& stage) -> decltype(stage()) {
    try {
        return stage();
    } catch (const InputError& e) {
        throw InputError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

void LossWeights::validate() const {
    for (double v : {alpha, beta, gamma}) {
        if (!std::isfinite(v) || v < 0.0) throw InputError("loss weights must be finite and non-negative");
    }
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw InputError("learning rate must be > 0");
    if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
    if (window < 1) throw InputError("convergence window must be >= 1");
    if (!(self_mask_rate >= 0.0 && self_mask_rate < 1.0)) throw InputError("self_mask_rate must lie in [0, 1)");
    if (dk < 0) throw InputError("dk must be >= 0");
}

double GradientSet::max_abs() const {
    return std::max({d_wq.cwiseAbs().maxCoeff(), d_wk.cwiseAbs().maxCoeff(), d_wv.cwiseAbs().maxCoeff()});
}

LossTerms composite_loss(const Matrix& imputed, const Matrix& reference, const Mask& eval_mask,
                         const Matrix& reference_cov, const AttentionParams& params, const LossWeights& w,
                         std::vector<std::string>* warnings) {
    if (imputed.rows() != reference.rows() || imputed.cols() != reference.cols() ||
        eval_mask.rows() != imputed.rows() || eval_mask.cols() != imputed.cols()) {
        throw InputError("composite_loss: shape mismatch");
    }
    if (reference_cov.rows() != imputed.cols() || reference_cov.cols() != imputed.cols()) {
        throw InputError("composite_loss: reference covariance has the wrong size");
    }
    LossTerms t;
    const auto cells = eval_mask.count();
    if (cells == 0) {
        if (warnings) warnings->push_back("composite_loss: empty eval mask, MSE term is 0");
    } else {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < imputed.cols(); ++j) {
            for (Eigen::Index i = 0; i < imputed.rows(); ++i) {
                if (!eval_mask(i, j)) continue;
                const double e = imputed(i, j) - reference(i, j);
                sum += e * e;
            }
        }
        t.mse = sum / static_cast<double>(cells);
    }
    t.cov = (ml_cov(imputed) - reference_cov).norm();
    t.l1 = params.wq.cwiseAbs().sum() + params.wk.cwiseAbs().sum() + params.wv.cwiseAbs().sum();
    t.total = w.alpha * t.mse + w.beta * t.cov + w.gamma * t.l1;
    return t;
}

LossTerms composite_loss(const Matrix& imputed, const Matrix& reference, const Mask& eval_mask,
                         const AttentionParams& params, const LossWeights& w, std::vector<std::string>* warnings) {
    return composite_loss(imputed, reference, eval_mask, ml_cov(reference), params, w, warnings);
}

LossTerms problem_loss(const LossProblem& problem, const AttentionParams& params, const LossWeights& w) {
    const Forward f = forward(problem, params);
    return composite_loss(f.imputed, problem.reference, problem.eval_mask, problem.reference_cov, params, w);
}

GradientSet grad_composite(const LossProblem& problem, const AttentionParams& params, const LossWeights& w,
                           LossTerms* terms) {
    params.validate();
    const Forward f = forward(problem, params);
    const LossTerms t =
        composite_loss(f.imputed, problem.reference, problem.eval_mask, problem.reference_cov, params, w);
    if (terms) *terms = t;

    const Matrix& x = problem.input;
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();

    // dL/d(imputed)
    Matrix d_imp = Matrix::Zero(n, d);
    const auto cells = problem.eval_mask.count();
    if (cells > 0 && w.alpha != 0.0) {
        const double c = 2.0 * w.alpha / static_cast<double>(cells);
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (problem.eval_mask(i, j)) d_imp(i, j) = c * (f.imputed(i, j) - problem.reference(i, j));
            }
        }
    }
    if (w.beta != 0.0 && t.cov > 0.0) {
        const Vector mean = f.imputed.colwise().mean().transpose();
        const Matrix centered = f.imputed.rowwise() - mean.transpose();
        const Matrix diff = ml_cov(f.imputed) - problem.reference_cov;
        // d||C - R||_F / dZ = (2/n) Zc (C - R) / ||C - R||_F
        d_imp += (2.0 * w.beta / (static_cast<double>(n) * t.cov)) * centered * diff;
    }

    Matrix d_y = Matrix::Zero(n, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (problem.refine_mask(i, j)) d_y(i, j) = d_imp(i, j);
        }
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(params.dk()));
    const Matrix d_v = f.a.transpose() * d_y;
    const Matrix d_a = d_y * f.v.transpose();
    const Vector row_dot = (f.a.array() * d_a.array()).rowwise().sum();
    const Matrix d_s = f.a.array() * (d_a.colwise() - row_dot).array();
    const Matrix d_q = scale * d_s * f.k;
    const Matrix d_k = scale * d_s.transpose() * f.q;

    GradientSet g;
    g.d_wq = x.transpose() * d_q;
    g.d_wk = x.transpose() * d_k;
    g.d_wv = x.transpose() * d_v;
    if (w.gamma != 0.0) {
        g.d_wq += w.gamma * params.wq.unaryExpr(&sign);
        g.d_wk += w.gamma * params.wk.unaryExpr(&sign);
        g.d_wv += w.gamma * params.wv.unaryExpr(&sign);
    }

    auto check = [](const Matrix& m, const char* name) {
        if (!m.allFinite()) throw NumericalError(std::string("non-finite gradient for ") + name);
    };
    check(g.d_wq, "wq");
    check(g.d_wk, "wk");
    check(g.d_wv, "wv");
    return g;
}

GradientSet finite_diff_grad(const LossProblem& problem, const AttentionParams& params, const LossWeights& w,
                             double h) {
    if (!(h > 0.0)) throw InputError("finite_diff_grad: step h must be > 0");
    AttentionParams probe = params;
    auto diff = [&](Matrix AttentionParams::*member) {
        Matrix& m = probe.*member;
        Matrix out(m.rows(), m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                const double keep = m(r, c);
                m(r, c) = keep + h;
                const double up = problem_loss(problem, probe, w).total;
                m(r, c) = keep - h;
                const double down = problem_loss(problem, probe, w).total;
                m(r, c) = keep;
                out(r, c) = (up - down) / (2.0 * h);
            }
        }
        return out;
    };
    GradientSet g;
    g.d_wq = diff(&AttentionParams::wq);
    g.d_wk = diff(&AttentionParams::wk);
    g.d_wv = diff(&AttentionParams::wv);
    return g;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
    if (!(h > 0.0)) throw InputError("central_difference: step h must be > 0");
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

AdamMoments AdamMoments::zeros_like(const Matrix& w) {
    return {Matrix::Zero(w.rows(), w.cols()), Matrix::Zero(w.rows(), w.cols())};
}

void adam_update(Matrix& w, const Matrix& g, AdamMoments& s, double lr, int t) {
    if (t < 1) throw InputError("adam step index t must be >= 1");
    s.m = adam_beta1 * s.m + (1.0 - adam_beta1) * g;
    s.v = adam_beta2 * s.v + (1.0 - adam_beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(adam_beta1, t);
    const double c2 = 1.0 - std::pow(adam_beta2, t);
    w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + adam_eps);
}

AdamState AdamState::zeros_like(const AttentionParams& p) {
    return {AdamMoments::zeros_like(p.wq), AdamMoments::zeros_like(p.wk), AdamMoments::zeros_like(p.wv)};
}

AdamResult adam_step(const AttentionParams& params, const GradientSet& grads, const AdamState& state, double lr,
                     int t) {
    AdamResult r{params, state};
    adam_update(r.params.wq, grads.d_wq, r.state.wq, lr, t);
    adam_update(r.params.wk, grads.d_wk, r.state.wk, lr, t);
    adam_update(r.params.wv, grads.d_wv, r.state.wv, lr, t);
    return r;
}

// ---------------------------------------------------------------------------

LossProblem training_problem(const Dataset& ds, const Imputed& init, const Dataset* truth,
                             const MvnParams& moments, const Matrix& reference_cov, const TrainConfig& cfg,
                             int epoch) {
    LossProblem problem;
    problem.reference_cov = reference_cov;
    if (cfg.mode == TrainMode::benchmark) {
        if (!truth) throw InputError("benchmark training needs truth data");
        problem.input = init.values;
        problem.refine_mask = init.provenance;
        problem.eval_mask = init.provenance;
        problem.reference = truth->values();
        return problem;
    }

    // Hide a seeded subset of observed cells for this epoch.
    std::vector<Eigen::Index> observed;
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (ds.observed(i, j)) observed.push_back(j * ds.rows() + i);
        }
    }
    const auto total = static_cast<std::uint64_t>(observed.size());
    const auto pick = static_cast<std::uint64_t>(std::llround(cfg.self_mask_rate * static_cast<double>(total)));
    CounterRng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::uint64_t k = 0; k < pick; ++k) {
        std::swap(observed[k], observed[k + rng.below(total - k)]);
    }
    Mask hidden = Mask::Constant(ds.rows(), ds.cols(), false);
    for (std::uint64_t k = 0; k < pick; ++k) {
        hidden(observed[k] % ds.rows(), observed[k] / ds.rows()) = true;
    }
    const Mask visible = ds.mask().array() && !hidden.array();
    const Imputed refilled = conditional_impute(moments, ds.with_mask(visible));
    problem.input = refilled.values;
    problem.refine_mask = init.provenance.array() || hidden.array();
    problem.eval_mask = hidden;
    problem.reference = ds.observed_or(0.0);
    return problem;
}

TrainResult train(const Dataset& ds, const Imputed& init, const Dataset* truth, const MvnParams& moments,
                  const TrainConfig& cfg, const LossWeights& w) {
    cfg.validate();
    w.validate();
    if (init.values.rows() != ds.rows() || init.values.cols() != ds.cols()) {
        throw InputError("train: initial imputation does not match dataset shape");
    }
    if (!init.values.allFinite()) throw InputError("train: initial imputation is not complete");
    if (cfg.mode == TrainMode::benchmark) {
        if (!truth) throw InputError("train: benchmark mode requires truth");
        if (truth->rows() != ds.rows() || truth->cols() != ds.cols() || !truth->complete()) {
            throw InputError("train: truth must be complete and match the dataset shape");
        }
    } else if (truth) {
        throw InputError("train: self-supervised mode must not receive truth");
    }

    const Eigen::Index d = ds.cols();
    const Eigen::Index k = cfg.dk > 0 ? cfg.dk : d;
    TrainResult result;
    result.params = AttentionParams::random(d, k, derive_seed(cfg.seed, 0xA77E));
    AdamState state = AdamState::zeros_like(result.params);

    const Matrix reference_cov =
        cfg.mode == TrainMode::benchmark ? matrix_moments(truth->values()).cov : pairwise_stats(ds).cov;

    std::optional<LossProblem> fixed;
    if (cfg.mode == TrainMode::benchmark) {
        fixed = training_problem(ds, init, truth, moments, reference_cov, cfg, 0);
    }

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const LossProblem problem =
            fixed ? *fixed : training_problem(ds, init, truth, moments, reference_cov, cfg, epoch);
        LossTerms terms;
        const GradientSet g = grad_composite(problem, result.params, w, &terms);
        const std::pair<const char*, double> parts[] = {
            {"total", terms.total}, {"mse", terms.mse}, {"cov", terms.cov}, {"l1", terms.l1}};
        for (const auto& [name, value] : parts) {
            if (!std::isfinite(value)) {
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " + name +
                                     " loss is not finite");
            }
        }
        result.history.push_back({epoch, terms});
        auto stepped = adam_step(result.params, g, state, cfg.lr, epoch);
        result.params = std::move(stepped.params);
        state = std::move(stepped.state);

        const auto e = result.history.size();
        if (e > static_cast<std::size_t>(cfg.window)) {
            const double before = result.history[e - 1 - static_cast<std::size_t>(cfg.window)].loss.total;
            const double now = terms.total;
            const double denom = std::max(std::abs(before), 1e-300);
            if (std::abs(now - before) / denom < cfg.rel_tol) {
                result.converged = true;
                break;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

ImputeResult impute(const Dataset& ds, const std::optional<SemSpec>& spec, const ImputeOptions& options,
                    const Dataset* truth) {
    options.train.validate();
    options.weights.validate();
    options.em.validate();

    const Dataset encoded = run_stage("encode", [&] { return encode_ordinal(ds); });
    ImputeResult result;
    result.report.provenance = encoded.mask().array() == false;
    result.report.imputed_cells = encoded.missing_count();
    if (encoded.missing_count() == 0) {
        result.data = encoded;
        result.report.converged = true;
        return result;
    }

    const Dataset normalized = run_stage("normalize", [&] { return normalize(encoded); });

    MvnParams moments;
    if (spec && !spec->equations.empty()) {
        const PathFit fit = run_stage("fiml", [&] { return fit_paths_fiml(*spec, normalized, options.em); });
        moments = options.init_moments == InitMoments::implied ? fit.implied : fit.saturated;
        result.report.em_iterations = fit.em_iterations;
        result.report.em_loglik = fit.loglik_saturated;
        result.report.sem_fit = fit.indices;
        result.report.warnings.insert(result.report.warnings.end(), fit.warnings.begin(), fit.warnings.end());
    } else {
        const EmResult em = run_stage("fiml", [&] { return em_fit(normalized, options.em); });
        moments = em.params;
        result.report.em_iterations = em.iterations;
        result.report.em_loglik = em.final_loglik;
        result.report.warnings.insert(result.report.warnings.end(), em.warnings.begin(), em.warnings.end());
    }
    const Imputed init = run_stage("fiml", [&] { return conditional_impute(moments, normalized, options.em.ridge); });

    TrainConfig cfg = options.train;
    std::optional<Dataset> truth_normalized;
    if (cfg.mode == TrainMode::benchmark) {
        if (!truth) throw InputError("train: benchmark mode requires truth data");
        truth_normalized = run_stage("train", [&] {
            return normalize_with(encode_ordinal(*truth), *normalized.normalization());
        });
    }
    const TrainResult trained = run_stage("train", [&] {
        return train(normalized, init, truth_normalized ? &*truth_normalized : nullptr, moments, cfg, options.weights);
    });
    result.report.history = trained.history;
    result.report.converged = trained.converged;
    result.report.warnings.insert(result.report.warnings.end(), trained.warnings.begin(), trained.warnings.end());

    const Imputed refined = run_stage("refine", [&] { return refine(init, trained.params, cfg.block_rows); });
    Dataset out = as_complete(normalized, refined);
    out = snap_ordinal(denormalize(out));

    // Observed cells come straight from the input, bit for bit.
    Matrix values = out.values();
    for (Eigen::Index j = 0; j < encoded.cols(); ++j) {
        for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
            if (encoded.observed(i, j)) values(i, j) = encoded.value(i, j);
        }
    }
    result.data = out.with_values(std::move(values));
    return result;
}

}  // namespace sesa
