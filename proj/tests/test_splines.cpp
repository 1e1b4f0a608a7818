// Spline basis and penalty matrix tests.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Cholesky>

#include "lpsmc/rng.hpp"
#include "lpsmc/splines.hpp"
#include "lpsmc/data.hpp"

using namespace lpsmc;

TEST_CASE("basis is a nonnegative local partition of unity", "[splines]") {
    const KnotGrid grid(10, 11.0);
    Xoshiro256pp rng(42);
    for (int rep = 0; rep < 1000; ++rep) {
        const double t = rng.uniform() * 11.0;
        const Eigen::VectorXd b = bspline_eval(grid, t);
        REQUIRE(std::fabs(b.sum() - 1.0) < 1e-10);
        REQUIRE(b.minCoeff() >= 0.0);
        int nonzero = 0;
        for (int k = 0; k < b.size(); ++k) nonzero += b[k] != 0.0 ? 1 : 0;
        REQUIRE(nonzero <= 4);
    }
}

TEST_CASE("clamped boundary puts full mass on the edge basis functions", "[splines]") {
    const KnotGrid grid(10, 11.0);
    const Eigen::VectorXd at_zero = bspline_eval(grid, 0.0);
    REQUIRE(at_zero[0] == Catch::Approx(1.0).margin(1e-15));
    for (int k = 1; k < 10; ++k) REQUIRE(at_zero[k] == 0.0);

    const KnotGrid grid15(15, 11.0);
    const Eigen::VectorXd at_end = bspline_eval(grid15, 11.0);
    REQUIRE(at_end.allFinite());
    REQUIRE(std::fabs(at_end.sum() - 1.0) < 1e-12);
    REQUIRE(at_end[14] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("evaluation outside [0, t_upper] is a domain error", "[splines]") {
    const KnotGrid grid(10, 11.0);
    REQUIRE_THROWS_AS(bspline_eval(grid, -0.001), DomainError);
    REQUIRE_THROWS_AS(bspline_eval(grid, 11.001), DomainError);
    REQUIRE_THROWS_AS(KnotGrid(3, 11.0), InvalidArgument);
}

TEST_CASE("basis_matrix stacks bspline_eval rows", "[splines]") {
    const KnotGrid grid(10, 11.0);
    Eigen::VectorXd times(3);
    times << 0.3, 4.4, 10.2;
    const Eigen::MatrixXd B = basis_matrix(grid, times);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(B.row(i).sum() == Catch::Approx(1.0));
        REQUIRE((B.row(i).transpose() - bspline_eval(grid, times[i])).cwiseAbs().maxCoeff() == 0.0);
    }

    const Eigen::VectorXd same = Eigen::VectorXd::Constant(3, 7.7);
    const Eigen::MatrixXd B2 = basis_matrix(grid, same);
    REQUIRE((B2.row(0) - B2.row(1)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((B2.row(0) - B2.row(2)).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd bad(2);
    bad << 1.0, 12.0;
    REQUIRE_THROWS_WITH(basis_matrix(grid, bad), Catch::Matchers::ContainsSubstring("times[1]"));
}

TEST_CASE("midpoint basis matrix agrees with pointwise evaluation", "[splines]") {
    const KnotGrid grid(15, 11.0);
    const BinGrid bins(300, 11.0);
    const Eigen::MatrixXd B = basis_matrix(grid, bins.midpoints());
    REQUIRE(B.rows() == 300);
    REQUIRE(B.cols() == 15);
    const Eigen::VectorXd row = bspline_eval(grid, bins.midpoints()[123]);
    REQUIRE((B.row(123).transpose() - row).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("first-order penalty matrix for K=4 matches the hand product", "[splines]") {
    const PenaltyMatrix P = penalty_matrix(4, 1, 0.0);
    Eigen::MatrixXd expected(4, 4);
    expected << 1, -1, 0, 0,
                -1, 2, -1, 0,
                0, -1, 2, -1,
                0, 0, -1, 1;
    REQUIRE((P.matrix - expected).cwiseAbs().maxCoeff() == 0.0);

    const PenaltyMatrix Pr = penalty_matrix(4, 1, 1e-6);
    const Eigen::MatrixXd ridged = expected + 1e-6 * Eigen::MatrixXd::Identity(4, 4);
    REQUIRE((Pr.matrix - ridged).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("difference penalty annihilates constants without the ridge", "[splines]") {
    for (int K : {5, 9, 15}) {
        const PenaltyMatrix P = penalty_matrix(K, 2, 0.0);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(K);
        REQUIRE((P.matrix * ones).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("penalty is symmetric and positive definite with the ridge", "[splines]") {
    Xoshiro256pp rng(7);
    for (int rep = 0; rep < 12; ++rep) {
        const int K = 5 + static_cast<int>(rng.uniform() * 26);
        const int r = 1 + static_cast<int>(rng.uniform() * 3);
        const PenaltyMatrix P = penalty_matrix(K, r, 1e-6);
        REQUIRE((P.matrix - P.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::LLT<Eigen::MatrixXd> llt(P.matrix);
        REQUIRE(llt.info() == Eigen::Success);
    }
}

TEST_CASE("difference operator kills polynomials below its order", "[splines]") {
    const int K = 12;
    for (int r : {1, 2, 3}) {
        const Eigen::MatrixXd D = difference_matrix(K, r);
        for (int deg = 0; deg < r; ++deg) {
            Eigen::VectorXd poly(K);
            for (int k = 0; k < K; ++k) poly[k] = std::pow(static_cast<double>(k + 1), deg);
            REQUIRE((D * poly).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("penalty order must stay below K", "[splines]") {
    REQUIRE_THROWS_AS(penalty_matrix(4, 4, 1e-6), InvalidArgument);
    REQUIRE_THROWS_AS(penalty_matrix(4, 0, 1e-6), InvalidArgument);
    REQUIRE_THROWS_AS(penalty_matrix(4, 1, -1.0), InvalidArgument);
}
