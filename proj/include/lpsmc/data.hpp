// data.hpp
// Core data containers: the right-censored survival dataset with its two
// design matrices, the latent coefficient vector in (theta, beta, gamma)
// order, and the Riemann bin grid used for the baseline-survival sums.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lpsmc/errors.hpp"

namespace lpsmc {

// Observables (t_i, tau_i, x_i, z_i) for n units. X carries the incidence
// design with the intercept as the first column; Z carries the latency
// design (no intercept).
struct SurvivalDataset {
    Eigen::VectorXd times;   // follow-up times, >= 0
    Eigen::VectorXi events;  // tau_i in {0,1}
    Eigen::MatrixXd X;       // n x (p+1), first column all ones
    Eigen::MatrixXd Z;       // n x q

    Eigen::Index n() const { return times.size(); }
    int p() const { return static_cast<int>(X.cols()) - 1; }
    int q() const { return static_cast<int>(Z.cols()); }

    // Throws DataError on hard violations; returns soft warnings.
    std::vector<std::string> validate() const {
        if (times.size() == 0) throw DataError("dataset is empty");
        if (events.size() != times.size() || X.rows() != times.size() ||
            Z.rows() != times.size()) {
            throw DataError("dataset fields have inconsistent row counts");
        }
        if (X.cols() < 1) throw DataError("incidence design X needs at least the intercept column");
        bool any_event = false;
        for (Eigen::Index i = 0; i < times.size(); ++i) {
            if (!(times[i] >= 0.0) || !std::isfinite(times[i])) {
                throw DataError("time at row " + std::to_string(i) + " is negative or non-finite");
            }
            if (events[i] != 0 && events[i] != 1) {
                throw DataError("event indicator at row " + std::to_string(i) +
                                " must be 0 or 1, got " + std::to_string(events[i]));
            }
            if (X(i, 0) != 1.0) {
                throw DataError("X at row " + std::to_string(i) +
                                " does not start with the intercept 1");
            }
            any_event = any_event || events[i] == 1;
        }
        if (!any_event) throw DataError("dataset has no events (all units censored)");
        if (!X.allFinite() || !Z.allFinite()) throw DataError("covariates contain non-finite values");
        return {};
    }
};

// Dimension bookkeeping for the flattened latent vector (theta, beta, gamma).
struct LatentLayout {
    int K;   // spline coefficients
    int p1;  // incidence block, p+1 including intercept
    int q;   // latency block

    int dim() const { return K + p1 + q; }
    int theta_start() const { return 0; }
    int beta_start() const { return K; }
    int gamma_start() const { return K + p1; }
};

struct LatentVector {
    Eigen::VectorXd theta;
    Eigen::VectorXd beta;   // (beta_0, beta_1, ..., beta_p)
    Eigen::VectorXd gamma;

    int dim() const {
        return static_cast<int>(theta.size() + beta.size() + gamma.size());
    }

    LatentLayout layout() const {
        return LatentLayout{static_cast<int>(theta.size()), static_cast<int>(beta.size()),
                            static_cast<int>(gamma.size())};
    }

    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(dim());
        out << theta, beta, gamma;
        return out;
    }

    static LatentVector unflatten(const LatentLayout& layout, const Eigen::VectorXd& flat) {
        if (flat.size() != layout.dim()) {
            throw InvalidArgument("LatentVector::unflatten: size mismatch");
        }
        LatentVector xi;
        xi.theta = flat.segment(layout.theta_start(), layout.K);
        xi.beta = flat.segment(layout.beta_start(), layout.p1);
        xi.gamma = flat.segment(layout.gamma_start(), layout.q);
        return xi;
    }
};

// Equal-width partition of [0, t_upper] into J bins with midpoints s_j.
// bin_index maps t to the 1-based bin enumerating the interval holding t:
// j(t) = floor(t/Delta) + 1, so t = 0 maps to bin 1 and bin boundaries to
// the bin on their right (capped at J). Every t in [0, t_upper] therefore
// gets an index in {1,...,J} and the cumulative-hazard sum is never empty.
class BinGrid {
public:
    BinGrid(int num_bins, double t_upper) : num_bins_(num_bins), t_upper_(t_upper) {
        if (num_bins_ < 1) throw InvalidArgument("BinGrid: need at least one bin");
        if (!(t_upper_ > 0.0) || !std::isfinite(t_upper_)) {
            throw InvalidArgument("BinGrid: t_upper must be positive and finite");
        }
        delta_ = t_upper_ / num_bins_;
        midpoints_.resize(num_bins_);
        for (int j = 0; j < num_bins_; ++j) midpoints_[j] = (j + 0.5) * delta_;
    }

    int num_bins() const { return num_bins_; }
    double delta() const { return delta_; }
    double t_upper() const { return t_upper_; }
    const Eigen::VectorXd& midpoints() const { return midpoints_; }

    int bin_index(double t) const {
        if (!(t >= 0.0 && t <= t_upper_)) {
            throw DomainError("BinGrid::bin_index: t=" + std::to_string(t) + " outside [0, " +
                              std::to_string(t_upper_) + "]");
        }
        const int j = static_cast<int>(std::floor(t / delta_)) + 1;
        return j > num_bins_ ? num_bins_ : j;
    }

private:
    int num_bins_;
    double t_upper_;
    double delta_;
    Eigen::VectorXd midpoints_;
};

}  // namespace lpsmc
