// splines.hpp
// Cubic B-spline basis on an equally spaced grid over [0, t_upper] and the
// finite-difference penalty matrix.
//
// Knot convention: clamped basis. The K - degree segments of [0, t_upper]
// are equally spaced and the boundary knots are repeated degree+1 times, so
// exactly K basis functions exist, the basis sums to one on the whole
// closed interval, b_1(0) = 1 and b_K(t_upper) = 1. The right endpoint is
// included in the support of the last basis function.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lpsmc/errors.hpp"

namespace lpsmc {

class KnotGrid {
public:
    KnotGrid(int num_basis, double t_upper, int degree = 3)
        : num_basis_(num_basis), t_upper_(t_upper), degree_(degree) {
        if (degree_ != 3) {
            throw InvalidArgument("KnotGrid: only cubic (degree 3) bases are supported");
        }
        if (num_basis_ < degree_ + 1) {
            throw InvalidArgument("KnotGrid: need at least degree+1 = 4 basis functions, got " +
                                  std::to_string(num_basis_));
        }
        if (!(t_upper_ > 0.0) || !std::isfinite(t_upper_)) {
            throw InvalidArgument("KnotGrid: t_upper must be positive and finite");
        }
        // Knot vector of length K + degree + 1 with repeated boundary knots.
        const int segments = num_basis_ - degree_;
        const double h = t_upper_ / segments;
        knots_.assign(num_basis_ + degree_ + 1, 0.0);
        for (int i = 0; i <= degree_; ++i) knots_[i] = 0.0;
        for (int i = 1; i < segments; ++i) knots_[degree_ + i] = i * h;
        for (int i = num_basis_; i <= num_basis_ + degree_; ++i) knots_[i] = t_upper_;
        segment_width_ = h;
    }

    int num_basis() const { return num_basis_; }
    int degree() const { return degree_; }
    double t_upper() const { return t_upper_; }
    const std::vector<double>& knots() const { return knots_; }

    bool contains(double t) const { return t >= 0.0 && t <= t_upper_; }

private:
    int num_basis_;
    double t_upper_;
    int degree_;
    double segment_width_ = 0.0;
    std::vector<double> knots_;

    friend Eigen::VectorXd bspline_eval(const KnotGrid&, double);
};

// Evaluates all K basis functions at t. Entries are nonnegative, sum to one
// and at most degree+1 of them are nonzero (Cox-de Boor recursion).
inline Eigen::VectorXd bspline_eval(const KnotGrid& grid, double t) {
    if (!grid.contains(t)) {
        throw DomainError("bspline_eval: t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(grid.t_upper()) + "]");
    }
    const int d = grid.degree();
    const int K = grid.num_basis();
    const auto& knots = grid.knots();

    // Span index mu with knots[mu] <= t < knots[mu+1]; t = t_upper falls in
    // the last nonempty span.
    const int segments = K - d;
    int seg = static_cast<int>(std::floor(t / grid.segment_width_));
    if (seg < 0) seg = 0;
    if (seg > segments - 1) seg = segments - 1;
    const int mu = d + seg;

    // Basis functions b_{mu-d},...,b_mu (algorithm A2.2, The NURBS Book).
    double N[4] = {1.0, 0.0, 0.0, 0.0};
    double left[4], right[4];
    for (int j = 1; j <= d; ++j) {
        left[j] = t - knots[mu + 1 - j];
        right[j] = knots[mu + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
    for (int r = 0; r <= d; ++r) out[mu - d + r] = N[r];
    return out;
}

// Row i holds bspline_eval(grid, times[i]).
inline Eigen::MatrixXd basis_matrix(const KnotGrid& grid, const Eigen::VectorXd& times) {
    Eigen::MatrixXd out(times.size(), grid.num_basis());
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        if (!grid.contains(times[i])) {
            throw DomainError("basis_matrix: times[" + std::to_string(i) + "]=" +
                              std::to_string(times[i]) + " outside [0, " +
                              std::to_string(grid.t_upper()) + "]");
        }
        out.row(i) = bspline_eval(grid, times[i]).transpose();
    }
    return out;
}

struct PenaltyMatrix {
    Eigen::MatrixXd matrix;  // K x K, symmetric, D_r^T D_r + epsilon*I
    int order;               // r
    double epsilon;
};

// The (K-r) x K finite-difference operator of order r.
inline Eigen::MatrixXd difference_matrix(int K, int r) {
    if (r < 1 || r >= K) {
        throw InvalidArgument("difference_matrix: order r must satisfy 1 <= r < K (r=" +
                              std::to_string(r) + ", K=" + std::to_string(K) + ")");
    }
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(K, K);
    for (int step = 0; step < r; ++step) {
        const Eigen::Index rows = D.rows() - 1;
        Eigen::MatrixXd next(rows, K);
        for (Eigen::Index i = 0; i < rows; ++i) {
            next.row(i) = D.row(i + 1) - D.row(i);
        }
        D.swap(next);
    }
    return D;
}

inline PenaltyMatrix penalty_matrix(int K, int r, double epsilon) {
    if (epsilon < 0.0) {
        throw InvalidArgument("penalty_matrix: epsilon must be nonnegative");
    }
    const Eigen::MatrixXd D = difference_matrix(K, r);
    Eigen::MatrixXd P = D.transpose() * D;
    P.diagonal().array() += epsilon;
    // Exact symmetry regardless of accumulation order.
    P = ((P + P.transpose()) * 0.5).eval();
    return PenaltyMatrix{std::move(P), r, epsilon};
}

}  // namespace lpsmc
