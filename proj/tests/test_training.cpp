#include "sesa/error.hpp"
#include "sesa/missingness.hpp"
#include "sesa/training.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace sesa;

namespace {

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

/// Random problem with a third of the cells refined and evaluated.
LossProblem random_problem(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    LossProblem p;
    p.input = testing::standard_normals(n, d, seed);
    p.reference = testing::standard_normals(n, d, seed + 1000);
    p.refine_mask = mcar_selection(n, d, testing::all_columns(d), 0.33, seed);
    p.eval_mask = p.refine_mask;
    p.reference_cov = matrix_moments(p.reference).cov;
    return p;
}

double max_rel_error(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a(i)), std::abs(b(i)), 1e-6});
        worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
    }
    return worst;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("loss of a perfect imputation with zero parameters is zero") {
    const Matrix x = testing::standard_normals(10, 3, 90);
    const LossTerms t = composite_loss(x, x, Mask::Constant(10, 3, true), AttentionParams::zeros(3, 3), LossWeights{});
    CHECK(t.total == 0.0);
    CHECK(t.mse == 0.0);
    CHECK(t.cov == 0.0);
    CHECK(t.l1 == 0.0);
}

TEST_CASE("one evaluated cell with error two") {
    Matrix a = Matrix::Zero(3, 2);
    const Matrix b = Matrix::Zero(3, 2);
    a(1, 1) = 2.0;
    Mask m = Mask::Constant(3, 2, false);
    m(1, 1) = true;
    const LossTerms t = composite_loss(a, b, m, AttentionParams::zeros(2, 2), LossWeights{1.0, 0.0, 0.0});
    CHECK(t.total == doctest::Approx(4.0));
    CHECK(t.mse == doctest::Approx(4.0));
}

TEST_CASE("L1 term") {
    AttentionParams p = AttentionParams::zeros(1, 1);
    p.wq(0, 0) = 1.0;
    p.wk(0, 0) = -1.0;
    const Matrix x = Matrix::Zero(2, 1);
    const LossTerms t = composite_loss(x, x, Mask::Constant(2, 1, true), p, LossWeights{1.0, 0.1, 0.001});
    CHECK(t.l1 == 2.0);
    CHECK(t.total == doctest::Approx(0.002));
}

TEST_CASE("covariance term is the Frobenius distance of ML covariances") {
    const Matrix a = testing::standard_normals(25, 3, 91);
    const Matrix b = testing::standard_normals(25, 3, 92);
    Matrix ca = a.rowwise() - a.colwise().mean();
    Matrix cb = b.rowwise() - b.colwise().mean();
    const double expected = (ca.transpose() * ca / 25.0 - cb.transpose() * cb / 25.0).norm();
    const LossTerms t =
        composite_loss(a, b, Mask::Constant(25, 3, false), AttentionParams::zeros(3, 3), LossWeights{0.0, 1.0, 0.0});
    CHECK(t.cov == doctest::Approx(expected).epsilon(1e-12));
    CHECK(t.mse == 0.0);
}

TEST_CASE("empty eval mask warns and gives zero MSE") {
    const Matrix x = testing::standard_normals(4, 2, 93);
    std::vector<std::string> warnings;
    const LossTerms t = composite_loss(x, 2.0 * x, Mask::Constant(4, 2, false), AttentionParams::zeros(2, 2),
                                       LossWeights{}, &warnings);
    CHECK(t.mse == 0.0);
    CHECK(warnings.size() == 1);
}

TEST_CASE("analytic gradient matches central differences") {
    const LossWeights w{1.0, 0.1, 1e-3};
    int coordinates = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const LossProblem problem = random_problem(12, 4, 100 + seed);
        AttentionParams p = AttentionParams::random(4, 3, 200 + seed);
        p.wq *= 3.0;
        const GradientSet g = grad_composite(problem, p, w);
        const GradientSet fd = finite_diff_grad(problem, p, w, 1e-5);
        CHECK(max_rel_error(g.d_wq, fd.d_wq) < 1e-4);
        CHECK(max_rel_error(g.d_wk, fd.d_wk) < 1e-4);
        CHECK(max_rel_error(g.d_wv, fd.d_wv) < 1e-4);
        coordinates += static_cast<int>(g.d_wq.size() + g.d_wk.size() + g.d_wv.size());
    }
    CHECK(coordinates >= 100);
}

TEST_CASE("L1-only gradient is gamma times the sign") {
    const LossProblem problem = random_problem(8, 3, 94);
    AttentionParams p = AttentionParams::random(3, 3, 95);
    p.wk(1, 2) = 0.0;
    const GradientSet g = grad_composite(problem, p, LossWeights{0.0, 0.0, 0.01});
    for (Eigen::Index i = 0; i < p.wq.size(); ++i) CHECK(g.d_wq(i) == (p.wq(i) > 0 ? 0.01 : -0.01));
    CHECK(g.d_wk(1, 2) == 0.0);
    for (Eigen::Index i = 0; i < p.wv.size(); ++i) CHECK(g.d_wv(i) == (p.wv(i) > 0 ? 0.01 : -0.01));
}

TEST_CASE("zero parameters on symmetric data leave the logit path flat") {
    LossProblem problem;
    Matrix x(4, 2);
    x << 1, 0, -1, 0, 0, 1, 0, -1;
    problem.input = x;
    problem.reference = 0.5 * x;
    problem.refine_mask = Mask::Constant(4, 2, true);
    problem.eval_mask = problem.refine_mask;
    problem.reference_cov = matrix_moments(problem.reference).cov;
    const AttentionParams p = AttentionParams::zeros(2, 2);
    const LossWeights w{1.0, 0.1, 0.0};
    const GradientSet g = grad_composite(problem, p, w);
    const GradientSet fd = finite_diff_grad(problem, p, w, 1e-5);
    CHECK(g.d_wq.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.d_wk.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fd.d_wq.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fd.d_wk.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("finite differences of a quadratic") {
    CHECK(std::abs(central_difference([](double t) { return t * t; }, 3.0, 1e-5) - 6.0) < 1e-8);
    CHECK_THROWS_AS(central_difference([](double t) { return t; }, 1.0, 0.0), InputError);
    const LossProblem problem = random_problem(5, 2, 96);
    CHECK_THROWS_AS(finite_diff_grad(problem, AttentionParams::zeros(2, 2), LossWeights{}, 0.0), InputError);
}

TEST_CASE("first Adam step moves every coordinate by about lr") {
    const AttentionParams p = AttentionParams::random(3, 2, 97);
    GradientSet g{testing::standard_normals(3, 2, 98), testing::standard_normals(3, 2, 99),
                  testing::standard_normals(3, 3, 100)};
    const AdamResult r = adam_step(p, g, AdamState::zeros_like(p), 0.01, 1);
    for (Eigen::Index i = 0; i < g.d_wq.size(); ++i) {
        const double step = p.wq(i) - r.params.wq(i);
        CHECK(std::abs(step - 0.01 * (g.d_wq(i) > 0 ? 1.0 : -1.0)) < 1e-7);
    }
    for (Eigen::Index i = 0; i < g.d_wv.size(); ++i) {
        CHECK(std::abs(std::abs(p.wv(i) - r.params.wv(i)) - 0.01) < 1e-7);
    }
}

TEST_CASE("zero gradient leaves parameters unchanged and Adam is deterministic") {
    const AttentionParams p = AttentionParams::random(3, 3, 101);
    const GradientSet zero{Matrix::Zero(3, 3), Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
    const AdamResult r = adam_step(p, zero, AdamState::zeros_like(p), 0.1, 1);
    CHECK(r.params.wq == p.wq);
    CHECK(r.params.wk == p.wk);
    CHECK(r.params.wv == p.wv);

    const GradientSet g{testing::standard_normals(3, 3, 102), testing::standard_normals(3, 3, 103),
                        testing::standard_normals(3, 3, 104)};
    const AdamResult a = adam_step(p, g, AdamState::zeros_like(p), 0.1, 1);
    const AdamResult b = adam_step(p, g, AdamState::zeros_like(p), 0.1, 1);
    CHECK(a.params.wq == b.params.wq);
    CHECK(a.state.wv.v == b.state.wv.v);
    CHECK_THROWS_AS(adam_step(p, g, AdamState::zeros_like(p), 0.1, 0), InputError);
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = TrainConfig{};
    c.max_epochs = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = TrainConfig{};
    c.self_mask_rate = 1.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    CHECK_THROWS_AS((LossWeights{-1.0, 0.0, 0.0}.validate()), InputError);
}

namespace {

struct SmallProblem {
    Dataset ds;
    Dataset truth;
    Imputed init;
    MvnParams moments;
};

SmallProblem small_problem(std::uint64_t seed) {
    const Matrix x = testing::mvn_sample(80, Vector::Zero(3), testing::equicorrelated(3, 0.7), seed);
    const MaskedData md = apply_mcar(normalize(testing::complete_dataset(x)), {0.3, seed, {}});
    const EmResult em = em_fit(md.masked);
    return {md.masked, md.truth, conditional_impute(em.params, md.masked), em.params};
}

}  // namespace

TEST_CASE("training is deterministic") {
    const SmallProblem sp = small_problem(105);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.seed = 9;
    const TrainResult a = train(sp.ds, sp.init, nullptr, sp.moments, cfg, LossWeights{});
    const TrainResult b = train(sp.ds, sp.init, nullptr, sp.moments, cfg, LossWeights{});
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(bitwise_equal(a.history[e].loss.total, b.history[e].loss.total));
    }
    CHECK(a.params.wv == b.params.wv);
}

TEST_CASE("self-supervised problems hide observed cells and never use missing ones") {
    const SmallProblem sp = small_problem(106);
    TrainConfig cfg;
    cfg.seed = 4;
    const Matrix ref_cov = pairwise_stats(sp.ds).cov;
    const LossProblem p1 = training_problem(sp.ds, sp.init, nullptr, sp.moments, ref_cov, cfg, 1);
    const LossProblem p2 = training_problem(sp.ds, sp.init, nullptr, sp.moments, ref_cov, cfg, 2);
    const auto observed = static_cast<double>(sp.ds.mask().count());
    CHECK(static_cast<double>(p1.eval_mask.count()) == std::round(0.1 * observed));
    CHECK((p1.eval_mask.array() && !sp.ds.mask().array()).count() == 0);
    CHECK(p1.eval_mask != p2.eval_mask);
    CHECK((p1.refine_mask.array() || !sp.init.provenance.array()).all());
}

TEST_CASE("training on a solved problem converges without increasing the loss") {
    const SmallProblem sp = small_problem(107);
    const Dataset solved = as_complete(sp.ds, sp.init);
    TrainConfig cfg;
    cfg.mode = TrainMode::benchmark;
    cfg.max_epochs = 3000;
    cfg.lr = 1e-2;
    cfg.seed = 5;
    const TrainResult r = train(sp.ds, sp.init, &solved, sp.moments, cfg, LossWeights{});
    CHECK(r.converged);
    CHECK(r.history.back().loss.total <= r.history.front().loss.total);
}

TEST_CASE("mode and truth must agree") {
    const SmallProblem sp = small_problem(108);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    CHECK_THROWS_AS(train(sp.ds, sp.init, &sp.truth, sp.moments, cfg, LossWeights{}), InputError);
    cfg.mode = TrainMode::benchmark;
    CHECK_THROWS_AS(train(sp.ds, sp.init, nullptr, sp.moments, cfg, LossWeights{}), InputError);
}

TEST_CASE("impute of a complete dataset is the identity") {
    const Dataset ds = testing::complete_dataset(testing::standard_normals(20, 3, 109));
    const ImputeResult r = impute(ds, std::nullopt, ImputeOptions{});
    CHECK(r.report.imputed_cells == 0);
    CHECK(r.data.values() == ds.values());
}

TEST_CASE("impute keeps observed cells and fills every missing one") {
    const Matrix x = testing::mvn_sample(150, Vector::Constant(3, 10.0), 4.0 * testing::equicorrelated(3, 0.6), 110);
    const MaskedData md = apply_mcar(testing::complete_dataset(x), {0.25, 111, {}});
    ImputeOptions opt;
    opt.train.max_epochs = 40;
    opt.train.seed = 1;
    const ImputeResult r = impute(md.masked, std::nullopt, opt);
    CHECK(r.data.complete());
    CHECK(r.data.values().allFinite());
    CHECK(r.report.provenance == md.removed);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (md.masked.observed(i, j)) CHECK(bitwise_equal(r.data.value(i, j), md.masked.value(i, j)));
        }
    }
    const ImputeResult again = impute(md.masked, std::nullopt, opt);
    CHECK(again.data.values() == r.data.values());
}

TEST_CASE("independent columns are imputed near their means") {
    const Matrix x = testing::standard_normals(400, 3, 112);
    const MaskedData md = apply_mcar(testing::complete_dataset(x), {0.3, 113, {}});
    ImputeOptions opt;
    opt.train.lr = 1e-2;
    opt.weights.gamma = 1e-4;
    const ImputeResult r = impute(md.masked, std::nullopt, opt);
    for (Eigen::Index j = 0; j < 3; ++j) {
        double sum = 0.0;
        long count = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (md.masked.observed(i, j)) {
                sum += x(i, j);
                ++count;
            }
        }
        const double mean = sum / static_cast<double>(count);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (md.removed(i, j)) CHECK(std::abs(r.data.value(i, j) - mean) < 0.25);
        }
    }
}

TEST_CASE("ordinal columns come back as valid levels") {
    const Matrix z = testing::mvn_sample(200, Vector::Zero(2), testing::equicorrelated(2, 0.5), 114);
    Matrix x = z;
    for (Eigen::Index i = 0; i < z.rows(); ++i) x(i, 1) = std::clamp(std::round(z(i, 1) + 2.0), 0.0, 4.0);
    std::vector<VariableSpec> specs{VariableSpec::continuous("c"),
                                    VariableSpec::ordinal("o", {"a", "b", "c", "d", "e"})};
    const Dataset ds(x, Mask::Constant(200, 2, true), specs);
    const MaskedData md = apply_mcar(ds, {0.3, 115, {}});
    ImputeOptions opt;
    opt.train.max_epochs = 30;
    const ImputeResult r = impute(md.masked, std::nullopt, opt);
    for (Eigen::Index i = 0; i < 200; ++i) {
        const double v = r.data.value(i, 1);
        CHECK(v == std::round(v));
        CHECK(v >= 0.0);
        CHECK(v <= 4.0);
    }
}

TEST_CASE("impute accepts a spec and reports fit indices") {
    const Matrix x = testing::mvn_sample(200, Vector::Zero(3), testing::equicorrelated(3, 0.5), 116);
    const MaskedData md = apply_mcar(testing::complete_dataset(x), {0.2, 117, {}});
    ImputeOptions opt;
    opt.train.max_epochs = 10;
    const ImputeResult r = impute(md.masked, parse_spec("x3 ~ x1 + x2"), opt);
    REQUIRE(r.report.sem_fit.has_value());
    CHECK(r.report.sem_fit->cfi == 1.0);
    CHECK(r.data.complete());
}

}
