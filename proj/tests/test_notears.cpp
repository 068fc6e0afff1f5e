#include "sesa/error.hpp"
#include "sesa/notears.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace sesa;

namespace {

/// Taylor series summed until the terms stop changing the result.
Matrix series_exp(const Matrix& m) {
    Matrix sum = Matrix::Identity(m.rows(), m.cols());
    Matrix term = sum;
    for (int k = 1; k < 200; ++k) {
        term = term * m / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18 * sum.cwiseAbs().maxCoeff()) break;
    }
    return sum;
}

double ols_slope(const Vector& x, const Vector& y) {
    const Vector xc = x.array() - x.mean();
    const Vector yc = y.array() - y.mean();
    return xc.dot(yc) / xc.squaredNorm();
}

double rel_error(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

WeightedGraph graph(const Matrix& w) {
    WeightedGraph g;
    g.w = w;
    g.names = testing::default_names(w.rows());
    g.scale = Vector::Ones(w.rows());
    return g;
}

}  // namespace

TEST_SUITE("notears") {

TEST_CASE("matrix exponential closed forms") {
    CHECK(matrix_exp(Matrix::Zero(3, 3)) == Matrix::Identity(3, 3));
    CHECK(matrix_exp(Matrix::Identity(2, 2))(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const Matrix e = matrix_exp(swap);
    CHECK(e(0, 0) == doctest::Approx(std::cosh(1.0)).epsilon(1e-14));
    CHECK(e(0, 1) == doctest::Approx(std::sinh(1.0)).epsilon(1e-14));
    CHECK(e(1, 1) == doctest::Approx(std::cosh(1.0)).epsilon(1e-14));
}

TEST_CASE("matrix exponential agrees with the plain series") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Matrix m = testing::standard_normals(5, 5, 120 + seed) * (0.3 * static_cast<double>(seed));
        const Matrix ref = series_exp(m);
        CHECK(rel_error(matrix_exp(m), ref) < 1e-10);
        const Matrix sq = m.cwiseProduct(m);
        CHECK(rel_error(matrix_exp(sq), series_exp(sq)) < 1e-10);
    }
}

TEST_CASE("acyclicity closed forms") {
    CHECK(acyclicity_h(Matrix::Zero(4, 4)).h == 0.0);
    const Matrix dag = testing::random_dag(6, 0.8, 130);
    CHECK(std::abs(acyclicity_h(dag).h) < 1e-12);
    Matrix cyc(2, 2);
    cyc << 0, 1, 1, 0;
    CHECK(acyclicity_h(cyc).h == doctest::Approx(2.0 * std::cosh(1.0) - 2.0).epsilon(1e-12));
    CHECK(acyclicity_h(cyc).h == doctest::Approx(1.086161).epsilon(1e-6));
}

TEST_CASE("acyclicity gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix w = 0.5 * testing::standard_normals(4, 4, 140 + seed);
        const Acyclicity a = acyclicity_h(w);
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            Matrix up = w;
            Matrix down = w;
            up(i) += h;
            down(i) -= h;
            const double fd = (acyclicity_h(up).h - acyclicity_h(down).h) / (2.0 * h);
            CHECK(std::abs(fd - a.grad(i)) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("two-variable regression") {
    const Matrix e = testing::standard_normals(2000, 2, 150);
    Matrix x(2000, 2);
    x.col(0) = e.col(0);
    x.col(1) = 2.0 * e.col(0) + e.col(1);
    const double slope = ols_slope(x.col(0), x.col(1));
    const double back = ols_slope(x.col(1), x.col(0));

    SUBCASE("standardized fit keeps one edge with the least-squares coefficient") {
        // After standardization both directions fit equally well, so only
        // the edge count and the coefficient in the chosen direction are fixed.
        const WeightedGraph fit = notears_fit(x, {"x", "y"});
        const WeightedGraph g = threshold_dag(fit, 0.3);
        CHECK(g.edge_count() == 1);
        const Matrix raw = g.original_units();
        if (g.w(0, 1) != 0.0) {
            CHECK(std::abs(raw(0, 1) - slope) < 0.5);
        } else {
            CHECK(std::abs(raw(1, 0) - back) < 0.15);
        }
        CHECK(fit.h < 1e-8);
    }
    SUBCASE("raw-scale fit gives the forward edge") {
        NotearsConfig cfg;
        cfg.standardize = false;
        const WeightedGraph g = threshold_dag(notears_fit(x, {"x", "y"}, cfg), 0.3);
        CHECK(g.w(1, 0) == 0.0);
        CHECK(std::abs(g.w(0, 1) - slope) < 0.4);
    }
}

TEST_CASE("independent columns give no edges") {
    const Matrix x = testing::standard_normals(1000, 4, 151);
    const WeightedGraph g = notears_fit(x, testing::default_names(4));
    CHECK(g.w.cwiseAbs().maxCoeff() < 0.3);
    CHECK(threshold_dag(g, 0.3).edge_count() == 0);
}

TEST_CASE("thresholded output is acyclic and the edge set ignores column scale") {
    const Matrix w = testing::random_dag(4, 0.6, 152);
    const Matrix x = testing::sample_linear_sem(w, 800, 153);
    const WeightedGraph a = threshold_dag(notears_fit(x, testing::default_names(4)), 0.3);
    CHECK(acyclicity_h(a.w).h < 1e-12);
    Matrix scaled = x;
    scaled.col(0) *= 100.0;
    scaled.col(2) *= 0.01;
    const WeightedGraph b = threshold_dag(notears_fit(scaled, testing::default_names(4)), 0.3);
    CHECK(((a.w.array() != 0.0) == (b.w.array() != 0.0)).all());
}

TEST_CASE("threshold behaviour") {
    Matrix w(2, 2);
    w << 0, 0.2, 0, 0;
    CHECK(threshold_dag(graph(w), 0.3).edge_count() == 0);
    CHECK(threshold_dag(graph(w), 0.0).w == w);
    Matrix cyc(2, 2);
    cyc << 0, 0.9, 0.8, 0;
    CHECK_THROWS_AS(threshold_dag(graph(cyc), 0.5), NumericalError);
    CHECK(threshold_dag(graph(cyc), 0.85).edge_count() == 1);
}

TEST_CASE("spec suggestions follow the graph") {
    Matrix chain = Matrix::Zero(3, 3);
    chain(0, 1) = 1.0;
    chain(1, 2) = -0.7;
    const SemSpec s = suggest_spec(graph(chain));
    REQUIRE(s.equations.size() == 2);
    CHECK(s.equations[0].outcome == "x2");
    CHECK(s.equations[0].predictors == std::vector<std::string>{"x1"});
    CHECK(s.equations[1].outcome == "x3");
    CHECK(s.equations[1].predictors == std::vector<std::string>{"x2"});
    CHECK(suggest_spec(graph(Matrix::Zero(3, 3))).equations.empty());

    Matrix w = Matrix::Zero(4, 4);
    w(0, 3) = 1.0;
    w(1, 3) = 1.0;
    w(2, 1) = 1.0;
    const SemSpec bmi = suggest_spec(graph(w), std::string("x4"));
    REQUIRE(bmi.equations.size() == 2);
    CHECK(bmi.equations[0].outcome == "x2");
    CHECK(bmi.equations[1].outcome == "x4");
    CHECK(bmi.equations[1].predictors.size() == 2);
    CHECK(suggest_spec(graph(w), std::string("x1")).equations.empty());

    Matrix cyc = Matrix::Zero(2, 2);
    cyc(0, 1) = cyc(1, 0) = 1.0;
    CHECK_THROWS(suggest_spec(graph(cyc)));
}

TEST_CASE("structural Hamming distance") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 1.0;
    a(1, 2) = 1.0;
    CHECK(structural_hamming_distance(a, a) == 0);
    Matrix b = a;
    b(1, 2) = 0.0;
    b(2, 1) = 0.5;
    CHECK(structural_hamming_distance(a, b) == 1);
    b(0, 2) = 2.0;
    CHECK(structural_hamming_distance(a, b) == 2);
    CHECK(structural_hamming_distance(a, Matrix::Zero(3, 3)) == 2);
}

TEST_CASE("graph export") {
    Matrix w = Matrix::Zero(2, 2);
    w(0, 1) = 0.75;
    WeightedGraph g = graph(w);
    g.scale << 1.0, 2.0;
    const auto j = nlohmann::json::parse(graph_to_json(g, 0.3, "complete"));
    CHECK(j["names"][1] == "x2");
    CHECK(j["weights"][0][1] == 0.75);
    CHECK(j["weights_original_units"][0][1] == doctest::Approx(1.5));
    CHECK(j["threshold"] == 0.3);
    CHECK(j["data_source"] == "complete");
    const std::string dot = graph_to_dot(g);
    CHECK(dot.find("\"x1\" -> \"x2\"") != std::string::npos);
    CHECK(dot.find("0.7500") != std::string::npos);
}

TEST_CASE("config and input validation") {
    NotearsConfig c;
    c.lambda1 = -1.0;
    CHECK_THROWS_AS(c.validate(), InputError);
    CHECK_THROWS_AS(notears_fit(Matrix::Zero(10, 1), {"a"}), InputError);
}

}
