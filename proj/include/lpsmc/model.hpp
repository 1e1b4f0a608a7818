// model.hpp
// Mixture cure model quantities: incidence, latency/population survival with
// the Riemann-midpoint baseline, the approximated log-likelihood and its
// analytical gradient and Hessian.
//
// Per-unit notation used throughout (unit i, event indicator tau_i):
//   lp    = x_i' beta          (incidence linear predictor)
//   p     = sigmoid(lp),  pm1 = 1 - p computed as sigmoid(-lp)
//   eta   = z_i' gamma,   e = exp(eta)
//   omega = Delta * sum_{j <= j(t_i)} h0(s_j),  h0 = exp(theta' b(s_j))
//   A     = exp(-e * omega) = S_u(t_i | z_i)
//   S_p   = pm1 + p * A
// Censored contributions are expressed through the bounded ratios
//   R1 = p*A/S_p and R2 = pm1/S_p (both in [0,1]),
// evaluated as exponentials of log-scale differences so that saturated
// incidence or vanishing susceptible survival cannot overflow.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "lpsmc/data.hpp"
#include "lpsmc/errors.hpp"
#include "lpsmc/numeric.hpp"
#include "lpsmc/splines.hpp"

namespace lpsmc {

// Riemann-sum building blocks for a fixed spline coefficient vector. The
// omega quantities carry the Delta factor; with theta = 0 they reduce to
// exactly j(t_i) * Delta.
struct OmegaCache {
    Eigen::VectorXd omega0;             // n:     Delta * prefix hazard sums
    Eigen::MatrixXd omega1;             // n x K: Delta * prefix hazard-basis sums
    Eigen::MatrixXd basis_at_midpoints; // J x K
    Eigen::VectorXd hazard_at_midpoints;// J:     exp(theta' b(s_j))
};

inline double incidence(const Eigen::VectorXd& beta, const Eigen::VectorXd& x_row) {
    if (beta.size() != x_row.size()) {
        throw InvalidArgument("incidence: beta and x_row dimensions differ");
    }
    return sigmoid(x_row.dot(beta));
}

// Evaluator bound to one (dataset, knot grid, bin grid) triple. Immutable
// after construction; all methods are const and safe to call concurrently.
class MixtureCureModel {
public:
    MixtureCureModel(const SurvivalDataset& data, const KnotGrid& grid, const BinGrid& bins)
        : data_(data),
          grid_(grid),
          bins_(bins),
          basis_mid_(basis_matrix(grid, bins.midpoints())),
          basis_obs_(data.n(), grid.num_basis()),
          obs_bin_(data.n()) {
        for (Eigen::Index i = 0; i < data_.n(); ++i) {
            if (!grid_.contains(data_.times[i])) {
                throw DomainError("follow-up time at row " + std::to_string(i) +
                                  " exceeds the spline interval [0, " +
                                  std::to_string(grid_.t_upper()) + "]");
            }
            basis_obs_.row(i) = bspline_eval(grid_, data_.times[i]).transpose();
            obs_bin_[i] = bins_.bin_index(data_.times[i]);
        }
    }

    const SurvivalDataset& data() const { return data_; }
    const KnotGrid& grid() const { return grid_; }
    const BinGrid& bins() const { return bins_; }
    const Eigen::MatrixXd& basis_at_midpoints() const { return basis_mid_; }
    const Eigen::MatrixXd& basis_at_observations() const { return basis_obs_; }

    LatentLayout layout() const {
        return LatentLayout{grid_.num_basis(), static_cast<int>(data_.X.cols()),
                            static_cast<int>(data_.Z.cols())};
    }
    int dim() const { return layout().dim(); }

    OmegaCache omega_cache(const Eigen::VectorXd& theta) const {
        OmegaCache cache;
        cache.basis_at_midpoints = basis_mid_;
        cache.hazard_at_midpoints = (basis_mid_ * theta).array().exp();
        const int J = bins_.num_bins();
        const int K = grid_.num_basis();
        // Prefix sums over bins, without Delta.
        Eigen::VectorXd prefix0(J);
        Eigen::MatrixXd prefix1(J, K);
        double acc0 = 0.0;
        Eigen::RowVectorXd acc1 = Eigen::RowVectorXd::Zero(K);
        for (int j = 0; j < J; ++j) {
            acc0 += cache.hazard_at_midpoints[j];
            acc1 += cache.hazard_at_midpoints[j] * basis_mid_.row(j);
            prefix0[j] = acc0;
            prefix1.row(j) = acc1;
        }
        const double delta = bins_.delta();
        cache.omega0.resize(data_.n());
        cache.omega1.resize(data_.n(), K);
        for (Eigen::Index i = 0; i < data_.n(); ++i) {
            const int j = obs_bin_[i] - 1;
            cache.omega0[i] = delta * prefix0[j];
            cache.omega1.row(i) = delta * prefix1.row(j);
        }
        return cache;
    }

    // Log-likelihood for a flat latent vector. Returns -inf instead of
    // throwing when an iterate wanders into the overflow regime (cumulative
    // hazard exponent beyond ~1e300); the Newton line search rejects such
    // points. Use loglik() for the throwing contract.
    double value(const Eigen::VectorXd& xi_flat) const {
        const OmegaCache cache = omega_cache(theta_of(xi_flat));
        return value(xi_flat, cache, nullptr);
    }

    double value(const Eigen::VectorXd& xi_flat, const OmegaCache& cache,
                 Eigen::Index* bad_unit) const {
        const LatentLayout lay = layout();
        const Eigen::VectorXd theta = xi_flat.segment(lay.theta_start(), lay.K);
        const Eigen::VectorXd beta = xi_flat.segment(lay.beta_start(), lay.p1);
        const Eigen::VectorXd gamma = xi_flat.segment(lay.gamma_start(), lay.q);
        const double neg_inf = -std::numeric_limits<double>::infinity();

        double total = 0.0;
        for (Eigen::Index i = 0; i < data_.n(); ++i) {
            const double lp = data_.X.row(i).dot(beta);
            const double eta = data_.Z.row(i).dot(gamma);
            const double eo = std::exp(eta) * cache.omega0[i];
            if (!(eo <= kOverflowGuard)) {  // catches inf and nan
                if (bad_unit) *bad_unit = i;
                return neg_inf;
            }
            double g;
            if (data_.events[i] == 1) {
                g = -log1pexp(-lp) + eta + basis_obs_.row(i).dot(theta) - eo;
            } else {
                g = logsumexp2(-log1pexp(lp), -log1pexp(-lp) - eo);
            }
            if (std::isnan(g) || g == neg_inf) {
                if (bad_unit) *bad_unit = i;
                return neg_inf;
            }
            total += g;
        }
        return total;
    }

    // Fused log-likelihood, gradient and Hessian. The theta-theta block is
    // accumulated as Delta * B' diag(W .* h0) B over the midpoint grid plus
    // per-unit rank-one terms, so the K x K-per-unit tensor omega^{kl} is
    // never materialized.
    void value_grad_hess(const Eigen::VectorXd& xi_flat, const OmegaCache& cache,
                         double& value_out, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        const LatentLayout lay = layout();
        const int K = lay.K, p1 = lay.p1, q = lay.q;
        const Eigen::VectorXd theta = xi_flat.segment(0, K);
        const Eigen::VectorXd beta = xi_flat.segment(K, p1);
        const Eigen::VectorXd gamma = xi_flat.segment(K + p1, q);

        grad = Eigen::VectorXd::Zero(lay.dim());
        auto g_theta = grad.segment(0, K);
        auto g_beta = grad.segment(K, p1);
        auto g_gamma = grad.segment(K + p1, q);

        Eigen::MatrixXd H11 = Eigen::MatrixXd::Zero(K, K);
        Eigen::MatrixXd H12 = Eigen::MatrixXd::Zero(K, p1);
        Eigen::MatrixXd H13 = Eigen::MatrixXd::Zero(K, q);
        Eigen::MatrixXd H22 = Eigen::MatrixXd::Zero(p1, p1);
        Eigen::MatrixXd H23 = Eigen::MatrixXd::Zero(p1, q);
        Eigen::MatrixXd H33 = Eigen::MatrixXd::Zero(q, q);

        const int J = bins_.num_bins();
        Eigen::VectorXd bucket = Eigen::VectorXd::Zero(J);  // suffix weights for H11

        double total = 0.0;
        for (Eigen::Index i = 0; i < data_.n(); ++i) {
            const auto x = data_.X.row(i);
            const auto z = data_.Z.row(i);
            const auto wk = cache.omega1.row(i);
            const double omega = cache.omega0[i];
            const double lp = x.dot(beta);
            const double eta = z.dot(gamma);
            const double e = std::exp(eta);
            const double eo = e * omega;
            if (!(eo <= kOverflowGuard)) {
                throw NumericError("likelihood overflow while computing derivatives", i);
            }
            const double p = sigmoid(lp);
            const double pm1 = sigmoid(-lp);

            if (data_.events[i] == 1) {
                total += -log1pexp(-lp) + eta + basis_obs_.row(i).dot(theta) - eo;
                g_theta += basis_obs_.row(i).transpose() - e * wk.transpose();
                g_beta += pm1 * x.transpose();
                g_gamma += (1.0 - eo) * z.transpose();
                bucket[obs_bin_[i] - 1] += -e;
                H13.noalias() += (-e) * wk.transpose() * z;
                H22.noalias() += (-p * pm1) * x.transpose() * x;
                H33.noalias() += (-e * omega) * z.transpose() * z;
            } else {
                const double log_p = -log1pexp(-lp);
                const double log_pm1 = -log1pexp(lp);
                const double logA = -eo;
                const double logSp = logsumexp2(log_pm1, log_p + logA);
                total += logSp;
                // Bounded ratios, computed on the log scale.
                const double eR1 = std::exp(eta + log_p + logA - logSp);
                const double eoR1 = omega * eR1;
                const double c2 = std::exp(2.0 * eta + log_p + logA + log_pm1 - 2.0 * logSp);
                const double d = -std::exp(eta + log_p + logA + log_pm1 - 2.0 * logSp);
                const double u = std::exp(log_p + log_pm1 + logA - logSp) -
                                 std::exp(log_p + log_pm1 - logSp);
                const double s22 = (pm1 - p) * u - u * u;
                const double m = eR1 * (1.0 - eo) + eR1 * eoR1;

                g_theta += -eR1 * wk.transpose();
                g_beta += u * x.transpose();
                g_gamma += -eoR1 * z.transpose();

                bucket[obs_bin_[i] - 1] += -eR1;
                H11.noalias() += c2 * wk.transpose() * wk;
                H12.noalias() += d * wk.transpose() * x;
                H13.noalias() += (-m) * wk.transpose() * z;
                H22.noalias() += s22 * x.transpose() * x;
                H23.noalias() += (d * omega) * x.transpose() * z;
                H33.noalias() += (-m * omega) * z.transpose() * z;
            }
        }
        if (std::isnan(total)) {
            throw NumericError("non-finite log-likelihood while computing derivatives", -1);
        }
        value_out = total;

        // Suffix-sum the bucket weights: W_j = sum over units with j(t_i) >= j.
        Eigen::VectorXd W(J);
        double acc = 0.0;
        for (int j = J - 1; j >= 0; --j) {
            acc += bucket[j];
            W[j] = acc;
        }
        const Eigen::VectorXd scaled =
            (W.array() * cache.hazard_at_midpoints.array()).matrix() * bins_.delta();
        H11.noalias() += basis_mid_.transpose() * scaled.asDiagonal() * basis_mid_;

        hess.resize(lay.dim(), lay.dim());
        hess.block(0, 0, K, K) = 0.5 * (H11 + H11.transpose());
        hess.block(0, K, K, p1) = H12;
        hess.block(K, 0, p1, K) = H12.transpose();
        hess.block(0, K + p1, K, q) = H13;
        hess.block(K + p1, 0, q, K) = H13.transpose();
        hess.block(K, K, p1, p1) = 0.5 * (H22 + H22.transpose());
        hess.block(K, K + p1, p1, q) = H23;
        hess.block(K + p1, K, q, p1) = H23.transpose();
        hess.block(K + p1, K + p1, q, q) = 0.5 * (H33 + H33.transpose());
    }

    Eigen::VectorXd theta_of(const Eigen::VectorXd& xi_flat) const {
        return xi_flat.segment(0, grid_.num_basis());
    }

private:
    SurvivalDataset data_;
    KnotGrid grid_;
    BinGrid bins_;
    Eigen::MatrixXd basis_mid_;  // J x K
    Eigen::MatrixXd basis_obs_;  // n x K
    Eigen::VectorXi obs_bin_;    // 1-based

    static constexpr double kOverflowGuard = 1e300;
};

// ---------------------------------------------------------------------------
// Free-function surface mirroring the evaluator, convenient for single calls.

inline double baseline_survival(const Eigen::VectorXd& theta, const KnotGrid& grid,
                                const BinGrid& bins, double t) {
    if (!grid.contains(t)) {
        throw DomainError("baseline_survival: t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(grid.t_upper()) + "]");
    }
    const int m = bins.bin_index(t);
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
        sum += std::exp(bspline_eval(grid, bins.midpoints()[j]).dot(theta));
    }
    return std::exp(-sum * bins.delta());
}

inline double latency_survival(const Eigen::VectorXd& theta, const Eigen::VectorXd& gamma,
                               const Eigen::VectorXd& z_row, const KnotGrid& grid,
                               const BinGrid& bins, double t) {
    const int m = bins.bin_index(t);
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
        sum += std::exp(bspline_eval(grid, bins.midpoints()[j]).dot(theta));
    }
    return std::exp(-std::exp(z_row.dot(gamma)) * (sum * bins.delta()));
}

inline double population_survival(const LatentVector& xi, const Eigen::VectorXd& x_row,
                                  const Eigen::VectorXd& z_row, const KnotGrid& grid,
                                  const BinGrid& bins, double t) {
    const double p = incidence(xi.beta, x_row);
    const double su = latency_survival(xi.theta, xi.gamma, z_row, grid, bins, t);
    return sigmoid(-x_row.dot(xi.beta)) + p * su;
}

inline OmegaCache make_omega_cache(const Eigen::VectorXd& theta, const SurvivalDataset& data,
                                   const KnotGrid& grid, const BinGrid& bins) {
    return MixtureCureModel(data, grid, bins).omega_cache(theta);
}

inline double loglik(const LatentVector& xi, const SurvivalDataset& data, const KnotGrid& grid,
                     const BinGrid& bins) {
    MixtureCureModel model(data, grid, bins);
    const Eigen::VectorXd flat = xi.flatten();
    Eigen::Index bad = -1;
    const double value = model.value(flat, model.omega_cache(xi.theta), &bad);
    if (!std::isfinite(value)) {
        throw NumericError("non-finite log-likelihood contribution", bad);
    }
    return value;
}

inline Eigen::VectorXd loglik_gradient(const LatentVector& xi, const SurvivalDataset& data,
                                       const KnotGrid& grid, const BinGrid& bins,
                                       const OmegaCache& cache) {
    MixtureCureModel model(data, grid, bins);
    double value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    model.value_grad_hess(xi.flatten(), cache, value, grad, hess);
    return grad;
}

inline Eigen::MatrixXd loglik_hessian(const LatentVector& xi, const SurvivalDataset& data,
                                      const KnotGrid& grid, const BinGrid& bins,
                                      const OmegaCache& cache) {
    MixtureCureModel model(data, grid, bins);
    double value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    model.value_grad_hess(xi.flatten(), cache, value, grad, hess);
    return hess;
}

}  // namespace lpsmc
