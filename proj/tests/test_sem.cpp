#include "sesa/error.hpp"
#include "sesa/missingness.hpp"
#include "sesa/sem.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace sesa;

namespace {

PathModel single_path(double coef) {
    PathModel pm;
    pm.names = {"x", "y"};
    pm.b = Matrix::Zero(2, 2);
    pm.b(1, 0) = coef;
    pm.psi = Vector::Ones(2);
    pm.exogenous = {0};
    pm.phi = Matrix::Identity(1, 1);
    pm.intercepts = Vector::Zero(2);
    return pm;
}

/// OLS of column `y` on the columns in `xs` with an intercept.
Vector ols(const Matrix& data, Eigen::Index y, const std::vector<Eigen::Index>& xs) {
    Matrix design(data.rows(), static_cast<Eigen::Index>(xs.size()) + 1);
    design.col(0).setOnes();
    for (std::size_t k = 0; k < xs.size(); ++k) design.col(static_cast<Eigen::Index>(k) + 1) = data.col(xs[k]);
    return design.colPivHouseholderQr().solve(data.col(y));
}

}  // namespace

TEST_SUITE("sem") {

TEST_CASE("the BMI model line parses into one equation with five predictors") {
    const SemSpec s = parse_spec("BMI ~ GeneralHealth + AgeCategory + SleepHours + HadDiabetes + SmokerStatus\n");
    REQUIRE(s.equations.size() == 1);
    CHECK(s.equations[0].outcome == "BMI");
    CHECK(s.equations[0].predictors.size() == 5);
    CHECK(s.variables.size() == 6);
    CHECK(s.variables.front() == "BMI");
}

TEST_CASE("comments and blank lines are ignored") {
    const SemSpec s = parse_spec("# a model\n\ny ~ x # trailing\n  z ~ y + x\n");
    REQUIRE(s.equations.size() == 2);
    CHECK(s.equations[1].predictors == std::vector<std::string>{"y", "x"});
    CHECK(parse_spec(s.to_text()).equations.size() == 2);
}

TEST_CASE("empty text is a model with no equations") {
    const SemSpec s = parse_spec("");
    CHECK(s.equations.empty());
    CHECK(s.variables.empty());
}

TEST_CASE("spec errors carry line numbers") {
    auto message = [](const std::string& text) {
        try {
            parse_spec(text);
        } catch (const InputError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("Y ~ Y").find("self-loop") != std::string::npos);
    CHECK(message("a ~ b\na ~ c").find("line 2") != std::string::npos);
    CHECK(message("a ~ b\na ~ c").find("duplicate") != std::string::npos);
    CHECK(message("a ~ b + b").find("repeated") != std::string::npos);
    CHECK(message("a b").find("line 1") != std::string::npos);
    CHECK(message("a ~~ a").find("syntax") != std::string::npos);
    CHECK(message("a ~ b +").find("line 1") != std::string::npos);
}

TEST_CASE("no paths gives the identity covariance") {
    PathModel pm;
    pm.names = {"a", "b", "c"};
    pm.b = Matrix::Zero(3, 3);
    pm.psi = Vector::Ones(3);
    pm.phi = Matrix(0, 0);
    pm.intercepts = Vector::Zero(3);
    const Moments m = implied_moments(pm);
    CHECK((m.cov - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single path y = 0.5 x") {
    const Moments m = implied_moments(single_path(0.5));
    CHECK(m.cov(1, 1) == doctest::Approx(1.25));
    CHECK(m.cov(0, 1) == doctest::Approx(0.5));
    CHECK(m.cov(0, 0) == doctest::Approx(1.0));
    CHECK((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("saturated exogenous model reproduces its covariance") {
    const Matrix x = testing::standard_normals(50, 3, 60);
    const Moments sample = matrix_moments(x);
    PathModel pm;
    pm.names = {"a", "b", "c"};
    pm.b = Matrix::Zero(3, 3);
    pm.psi = sample.cov.diagonal();
    pm.exogenous = {0, 1, 2};
    pm.phi = sample.cov;
    pm.intercepts = sample.mean;
    const Moments m = implied_moments(pm);
    CHECK((m.cov - sample.cov).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m.mean - sample.mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("singular I - B is a numerical error") {
    PathModel pm;
    pm.names = {"a", "b"};
    pm.b = Matrix::Zero(2, 2);
    pm.b(0, 1) = 1.0;
    pm.b(1, 0) = 1.0;
    pm.psi = Vector::Ones(2);
    pm.phi = Matrix(0, 0);
    pm.intercepts = Vector::Zero(2);
    CHECK_THROWS_AS(implied_moments(pm), NumericalError);
}

TEST_CASE("invalid path models are rejected") {
    PathModel pm = single_path(0.5);
    pm.b(1, 1) = 0.1;
    CHECK_THROWS_AS(pm.validate(), InputError);
    pm = single_path(0.5);
    pm.psi(1) = 0.0;
    CHECK_THROWS_AS(pm.validate(), InputError);
    pm = single_path(0.5);
    pm.b(0, 1) = 0.3;
    CHECK_THROWS_AS(pm.validate(), InputError);
}

TEST_CASE("bivariate regression recovers its coefficient") {
    const Matrix e = testing::standard_normals(2000, 2, 61);
    Matrix x(2000, 2);
    x.col(0) = e.col(0);
    x.col(1) = 0.5 * e.col(0) + e.col(1);
    const PathFit fit = fit_paths_fiml(parse_spec("y ~ x"), testing::complete_dataset(x, {"x", "y"}));
    CHECK(std::abs(fit.model.b(1, 0) - 0.5) < 0.05);
    CHECK(fit.df_model == 0);
    CHECK(fit.indices.cfi == 1.0);
    CHECK(fit.indices.rmsea == 0.0);
}

TEST_CASE("complete-data fit equals equation-by-equation OLS") {
    const Matrix e = testing::standard_normals(300, 4, 62);
    Matrix x = e;
    x.col(2) = 0.7 * e.col(0) - 0.4 * e.col(1) + e.col(2);
    x.col(3) = 0.3 * x.col(2) + 0.2 * e.col(0) + e.col(3);
    const Dataset ds = testing::complete_dataset(x, {"a", "b", "c", "d"});
    const PathFit fit = fit_paths_fiml(parse_spec("c ~ a + b\nd ~ c + a"), ds);
    const Vector c = ols(x, 2, {0, 1});
    const Vector d = ols(x, 3, {2, 0});
    CHECK(std::abs(fit.model.b(2, 0) - c(1)) < 1e-8);
    CHECK(std::abs(fit.model.b(2, 1) - c(2)) < 1e-8);
    CHECK(std::abs(fit.model.intercepts(2) - c(0)) < 1e-8);
    CHECK(std::abs(fit.model.b(3, 2) - d(1)) < 1e-8);
    CHECK(std::abs(fit.model.b(3, 0) - d(2)) < 1e-8);
    // d ~ c + a leaves out b, so the model has one restriction
    CHECK(fit.df_model == 1);
    CHECK(fit.df_baseline == 6);
    CHECK(fit.indices.chi2_model >= -1e-9);
    CHECK(fit.implied.sigma.isApprox(fit.implied.sigma.transpose(), 1e-12));
}

TEST_CASE("zero equations leaves the saturated moments") {
    const Matrix x = testing::standard_normals(100, 3, 63);
    const MaskedData md = apply_mcar(testing::complete_dataset(x), {0.2, 1, {}});
    const PathFit fit = fit_paths_fiml(parse_spec(""), md.masked);
    CHECK(fit.model.b.cwiseAbs().maxCoeff() == 0.0);
    CHECK((fit.implied.sigma - fit.saturated.sigma).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit.df_model == 0);
}

TEST_CASE("fit works with missing data and unmentioned columns are exogenous") {
    const Matrix e = testing::standard_normals(500, 3, 64);
    Matrix x = e;
    x.col(1) = 0.8 * e.col(0) + 0.6 * e.col(1);
    const MaskedData md = apply_mcar(testing::complete_dataset(x), {0.3, 2, {}});
    const PathFit fit = fit_paths_fiml(parse_spec("x2 ~ x1"), md.masked);
    CHECK(std::abs(fit.model.b(1, 0) - 0.8) < 0.1);
    CHECK(fit.model.is_exogenous(2));
    CHECK(fit.model.is_exogenous(0));
    CHECK_FALSE(fit.model.is_exogenous(1));
    CHECK(fit.loglik <= fit.loglik_saturated + 1e-9);
    CHECK(fit.loglik_baseline <= fit.loglik_saturated + 1e-9);
    CHECK(describe(fit, parse_spec("x2 ~ x1")).find("x2 ~ x1") != std::string::npos);
}

TEST_CASE("spec errors against a dataset") {
    const Dataset ds = testing::complete_dataset(testing::standard_normals(20, 2, 65));
    CHECK_THROWS_AS(fit_paths_fiml(parse_spec("x2 ~ nope"), ds), InputError);
    CHECK_THROWS_AS(fit_paths_fiml(parse_spec("x1 ~ x2\nx2 ~ x1"), ds), InputError);
}

TEST_CASE("fit index formulas") {
    SUBCASE("saturated") {
        const FitIndices f = fit_indices(-10.0, -10.0, -50.0, 0, 3, 100);
        CHECK(f.cfi == 1.0);
        CHECK(f.rmsea == 0.0);
    }
    SUBCASE("chi-square equal to df") {
        const FitIndices f = fit_indices(-12.5, -10.0, -200.0, 5, 10, 100);
        CHECK(f.chi2_model == doctest::Approx(5.0));
        CHECK(f.rmsea == 0.0);
        CHECK(f.cfi == doctest::Approx(1.0));
    }
    SUBCASE("chi-square below df reports CFI above one") {
        // chi2_m = 5, df_m = 10, chi2_b = 200, df_b = 15
        const FitIndices f = fit_indices(-102.5, -100.0, -200.0, 10, 15, 1000);
        CHECK(f.chi2_model == doctest::Approx(5.0));
        CHECK(f.chi2_baseline == doctest::Approx(200.0));
        CHECK(f.cfi == doctest::Approx(1.0 + 5.0 / 185.0));
        CHECK(f.cfi > 1.0);
        CHECK(f.rmsea == 0.0);
    }
    SUBCASE("misfit") {
        // chi2_m = 40, df_m = 10, chi2_b = 200, df_b = 15, n = 500
        const FitIndices f = fit_indices(-120.0, -100.0, -200.0, 10, 15, 500);
        CHECK(f.cfi == doctest::Approx(1.0 - 30.0 / 185.0));
        CHECK(f.rmsea == doctest::Approx(std::sqrt(30.0 / (10.0 * 500.0))));
    }
    CHECK_THROWS_AS(fit_indices(0, 0, 0, 1, 1, 0), InputError);
}

}
