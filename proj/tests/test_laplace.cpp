// Laplace approximation, penalty posterior and fit pipeline tests.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>

#include "lpsmc/kaplan_meier.hpp"
#include "lpsmc/laplace.hpp"
#include "lpsmc/simulation.hpp"
#include "test_util.hpp"

using namespace lpsmc;
using namespace lpsmc_test;

namespace {

// Quadratic test log-density -(xi-m)'A(xi-m)/2; Laplace is exact for it.
struct QuadraticLogLik {
    Eigen::MatrixXd A;
    Eigen::VectorXd m;

    double value(const Eigen::VectorXd& xi) const {
        const Eigen::VectorXd d = xi - m;
        return -0.5 * d.dot(A * d);
    }
    void value_grad_hess(const Eigen::VectorXd& xi, double& value, Eigen::VectorXd& grad,
                         Eigen::MatrixXd& hess) const {
        const Eigen::VectorXd d = xi - m;
        value = -0.5 * d.dot(A * d);
        grad = -(A * d);
        hess = -A;
    }
};

QuadraticLogLik random_quadratic(int dim, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    Eigen::MatrixXd root(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) root(i, j) = rng.normal();
    }
    QuadraticLogLik target;
    target.A = root * root.transpose() + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
    target.m.resize(dim);
    for (int i = 0; i < dim; ++i) target.m[i] = rng.normal();
    return target;
}

}  // namespace

TEST_CASE("prior precision is the block-diagonal lambda P / zeta I", "[laplace]") {
    PenaltyMatrix identity{Eigen::MatrixXd::Identity(4, 4), 1, 0.0};
    const Eigen::MatrixXd Q = prior_precision(1.0, identity, 1, 2, 1.0);
    REQUIRE((Q - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);

    const PenaltyMatrix P = penalty_matrix(5, 2, 1e-6);
    const Eigen::MatrixXd Q1 = prior_precision(1.0, P, 2, 1, 1e-6);
    const Eigen::MatrixXd Q2 = prior_precision(2.0, P, 2, 1, 1e-6);
    REQUIRE((Q2.topLeftCorner(5, 5) - 2.0 * Q1.topLeftCorner(5, 5)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((Q2.bottomRightCorner(4, 4) - Q1.bottomRightCorner(4, 4)).cwiseAbs().maxCoeff() == 0.0);

    // det(Q) = lambda^K det(P) zeta^{p+1+q} for K=5, p=2, q=1.
    const double lambda = 3.7, zeta = 0.2;
    const Eigen::MatrixXd Q3 = prior_precision(lambda, P, 2, 1, zeta);
    const double expected = std::pow(lambda, 5) * P.matrix.determinant() * std::pow(zeta, 4);
    REQUIRE(Q3.determinant() == Catch::Approx(expected).epsilon(1e-8));
}

TEST_CASE("laplace is exact in one iteration for a quadratic target", "[laplace]") {
    const int dim = 7;
    const QuadraticLogLik target = random_quadratic(dim, 5);
    const Eigen::MatrixXd Q =
        0.8 * Eigen::MatrixXd::Identity(dim, dim) + 0.1 * Eigen::MatrixXd::Ones(dim, dim);

    NewtonOptions opt;
    const Eigen::VectorXd init = Eigen::VectorXd::Constant(dim, 2.0);
    const ConditionalPosterior post = laplace_newton(target, Q, init, opt);

    const Eigen::MatrixXd precision = target.A + Q;
    const Eigen::VectorXd exact_mean = precision.ldlt().solve(target.A * target.m);
    const Eigen::MatrixXd exact_cov =
        precision.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));

    REQUIRE(post.converged);
    REQUIRE(post.iterations == 1);
    REQUIRE((post.mean - exact_mean).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((post.covariance - exact_cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pinned coordinate is honored and its covariance row is zero", "[laplace]") {
    const int dim = 6;
    const QuadraticLogLik target = random_quadratic(dim, 9);
    const Eigen::MatrixXd Q = 0.5 * Eigen::MatrixXd::Identity(dim, dim);

    NewtonOptions opt;
    opt.fixed_coordinate = {2, 1.0};
    const ConditionalPosterior post =
        laplace_newton(target, Q, Eigen::VectorXd::Zero(dim), opt);

    REQUIRE(post.mean[2] == 1.0);
    REQUIRE(post.covariance.row(2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(post.covariance.col(2).cwiseAbs().maxCoeff() == 0.0);

    // Stationarity on the free coordinates of loglik - xi'Q xi/2.
    double value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    target.value_grad_hess(post.mean, value, grad, hess);
    const Eigen::VectorXd grad_post = grad - Q * post.mean;
    for (int c = 0; c < dim; ++c) {
        if (c != 2) REQUIRE(std::fabs(grad_post[c]) < 1e-8);
    }
}

TEST_CASE("laplace approximation converges quickly on simulated data", "[laplace]") {
    const GeneratedData generated = generate_dataset(scenario1(), 20260119ULL);
    Hyperparameters hyper;
    const KnotGrid grid(hyper.K, 11.0);
    const BinGrid bins(hyper.J, 11.0);

    const LatentLayout lay{hyper.K, 3, 2};
    const LatentVector init = LatentVector::unflatten(
        lay, lpsmc::detail::initial_latent(generated.data, lay));
    const ConditionalPosterior post =
        laplace_approx(50.0, generated.data, grid, bins, init, hyper);

    REQUIRE(post.converged);
    REQUIRE(post.iterations <= 20);

    // The converged mean satisfies grad loglik - Q xi = 0 within tolerance.
    const MixtureCureModel model(generated.data, grid, bins);
    const OmegaCache cache = model.omega_cache(post.mean.head(hyper.K));
    double value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    model.value_grad_hess(post.mean, cache, value, grad, hess);
    const PenaltyMatrix P = penalty_matrix(hyper.K, hyper.penalty_order, hyper.epsilon);
    const Eigen::MatrixXd Q = prior_precision(50.0, P, 2, 2, hyper.zeta);
    REQUIRE((grad - Q * post.mean).cwiseAbs().maxCoeff() < 1e-8);

    // Covariance is symmetric positive definite.
    REQUIRE((post.covariance - post.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(Eigen::LLT<Eigen::MatrixXd>(post.covariance).info() == Eigen::Success);
}

TEST_CASE("larger penalties give smoother spline modes", "[laplace]") {
    const GeneratedData generated = generate_dataset(scenario1(), 7ULL);
    Hyperparameters hyper;
    const KnotGrid grid(hyper.K, 11.0);
    const BinGrid bins(hyper.J, 11.0);
    const Eigen::MatrixXd D = difference_matrix(hyper.K, hyper.penalty_order);
    const LatentLayout lay{hyper.K, 3, 2};
    LatentVector init =
        LatentVector::unflatten(lay, lpsmc::detail::initial_latent(generated.data, lay));

    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
        const ConditionalPosterior post =
            laplace_approx(lambda, generated.data, grid, bins, init, hyper);
        const Eigen::VectorXd theta = post.mean.head(hyper.K);
        const double roughness = (D * theta).squaredNorm();
        REQUIRE(roughness <= previous * (1.0 + 1e-9));
        previous = roughness;
        init = LatentVector::unflatten(lay, post.mean);
    }
}

TEST_CASE("gamma prior term on the v scale has the closed increment", "[laplace]") {
    Hyperparameters hyper;
    for (double v : {-3.0, 0.0, 2.5, 8.0}) {
        const double diff = log_penalty_prior(v + 1.0, hyper) - log_penalty_prior(v, hyper);
        const double expected =
            hyper.a_lambda - hyper.b_lambda * (std::exp(v + 1.0) - std::exp(v));
        REQUIRE(diff == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("penalty posterior matches the conjugate-Gaussian marginal", "[laplace]") {
    const int K = 6, reg = 3;
    const int dim = K + reg;
    const QuadraticLogLik target = random_quadratic(dim, 13);
    const PenaltyMatrix P = penalty_matrix(K, 2, 1e-6);
    Hyperparameters hyper;
    const PriorSpec prior(P, reg, hyper.zeta);

    const Eigen::VectorXd b = target.A * target.m;
    const auto closed_form = [&](double v) {
        const Eigen::MatrixXd precision = target.A + prior.precision(std::exp(v));
        const Eigen::LLT<Eigen::MatrixXd> llt(precision);
        const double logdet =
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return 0.5 * b.dot(llt.solve(b)) - 0.5 * logdet + 0.5 * prior.logdet_precision(v) +
               log_penalty_prior(v, hyper);
    };

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(dim);
    double reference_shift = std::numeric_limits<double>::quiet_NaN();
    for (double v = -2.0; v <= 10.0; v += 1.5) {
        const auto [value, post] = log_posterior_v_impl(target, prior, hyper, v, warm);
        warm = post.mean;
        const double shift = value - closed_form(v);
        if (std::isnan(reference_shift)) {
            reference_shift = shift;
        } else {
            REQUIRE(shift == Catch::Approx(reference_shift).margin(1e-8));
        }
    }
}

TEST_CASE("penalty posterior profile is unimodal on simulated data", "[laplace]") {
    const GeneratedData generated = generate_dataset(scenario1(), 31ULL);
    Hyperparameters hyper;
    const KnotGrid grid(hyper.K, 11.0);
    const BinGrid bins(hyper.J, 11.0);
    const LatentLayout lay{hyper.K, 3, 2};
    LatentVector warm =
        LatentVector::unflatten(lay, lpsmc::detail::initial_latent(generated.data, lay));

    std::vector<double> values;
    for (double v = 15.0; v >= -2.0; v -= 0.5) {
        const auto [value, post] = log_posterior_v(v, generated.data, grid, bins, hyper, warm);
        warm = LatentVector::unflatten(lay, post.mean);
        values.push_back(value);
    }
    int sign_changes = 0;
    for (std::size_t i = 2; i < values.size(); ++i) {
        const bool rising_before = values[i - 1] > values[i - 2];
        const bool rising_after = values[i] > values[i - 1];
        if (rising_before != rising_after) ++sign_changes;
    }
    REQUIRE(sign_changes <= 1);
}

TEST_CASE("bracketing walk locates unimodal maxima", "[laplace]") {
    const auto parabola = [](double v) { return -(v - 3.0) * (v - 3.0); };
    const BracketResult coarse = bracket_mode(parabola, 15.0, 0.2, -10.0);
    REQUIRE(!coarse.hit_lower_bound);
    REQUIRE(std::fabs(coarse.v_star - 3.0) <= 0.1 + 1e-9);

    const BracketResult fine = bracket_mode(parabola, 15.0, 0.01, -10.0);
    REQUIRE(std::fabs(fine.v_star - 3.0) <= 0.005 + 0.01);

    // Mode at or above the start: the walk turns around immediately.
    const BracketResult right = bracket_mode([](double v) { return v; }, 15.0, 0.2, -10.0);
    REQUIRE(right.v_star == Catch::Approx(15.0 - 0.1));

    // Monotone rise to the left: the lower guard is reported.
    const BracketResult guard = bracket_mode([](double v) { return -v; }, 15.0, 0.2, -10.0);
    REQUIRE(guard.hit_lower_bound);
    REQUIRE(guard.v_star == -10.0);

    REQUIRE_THROWS_AS(bracket_mode(parabola, 15.0, -0.1, -10.0), InvalidArgument);
    REQUIRE_THROWS_AS(bracket_mode(parabola, 15.0, 0.2, 16.0), InvalidArgument);
}

TEST_CASE("fit produces a converged constrained posterior deterministically", "[laplace][fit]") {
    const GeneratedData generated = generate_dataset(scenario1(), 11ULL);
    Hyperparameters hyper;

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult fit1 = fit(generated.data, hyper, {.t_upper = 11.0});
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    INFO("fit wall time " << elapsed.count() << "s");

    REQUIRE(fit1.posterior.converged);
    REQUIRE(!fit1.v_at_lower_bound);
    REQUIRE(fit1.constrained_index.has_value());
    REQUIRE(*fit1.constrained_index == hyper.K - 1);
    REQUIRE(fit1.posterior.mean[hyper.K - 1] == 1.0);
    REQUIRE(fit1.posterior.covariance.row(hyper.K - 1).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(fit1.posterior.covariance.col(hyper.K - 1).cwiseAbs().maxCoeff() == 0.0);

    const FitResult fit2 = fit(generated.data, hyper, {.t_upper = 11.0});
    REQUIRE(fit1.v_star == fit2.v_star);
    REQUIRE((fit1.posterior.mean - fit2.posterior.mean).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((fit1.posterior.covariance - fit2.posterior.covariance).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theta_K constraint only reshapes the right tail of S0", "[laplace][fit]") {
    const GeneratedData generated = generate_dataset(scenario1(), 29ULL);
    Hyperparameters hyper;
    FitOptions with, without;
    with.t_upper = 11.0;
    without.t_upper = 11.0;
    without.constrain_last_theta = false;
    const FitResult constrained = fit(generated.data, hyper, with);
    const FitResult unconstrained = fit(generated.data, hyper, without);
    REQUIRE(!unconstrained.constrained_index.has_value());

    const KnotGrid grid = constrained.grid();
    const BinGrid bins = constrained.bins();
    double sup = 0.0;
    for (double t = 0.05; t <= 0.8 * 11.0; t += 0.11) {
        const double a =
            baseline_survival(constrained.posterior.mean.head(hyper.K), grid, bins, t);
        const double b =
            baseline_survival(unconstrained.posterior.mean.head(hyper.K), grid, bins, t);
        sup = std::max(sup, std::fabs(a - b));
    }
    REQUIRE(sup < 0.02);
}

TEST_CASE("intercept-only incidence recovers the observed cure plateau", "[laplace][fit]") {
    ScenarioConfig high_cure = scenario2();
    high_cure.n = 2000;
    const GeneratedData generated = generate_dataset(high_cure, 99ULL);

    SurvivalDataset reduced;
    reduced.times = generated.data.times;
    reduced.events = generated.data.events;
    reduced.X = Eigen::MatrixXd::Ones(generated.data.n(), 1);
    reduced.Z = Eigen::MatrixXd::Zero(generated.data.n(), 1);

    Hyperparameters hyper;
    const FitResult result = fit(reduced, hyper, {.t_upper = 11.0});
    const double p_hat = sigmoid(result.posterior.mean[hyper.K]);
    const double plateau = kaplan_meier(reduced).plateau;
    REQUIRE(std::fabs((1.0 - p_hat) - plateau) < 0.05);
}

TEST_CASE("newton failure carries its last state", "[laplace]") {
    const GeneratedData generated = generate_dataset(scenario1(), 3ULL);
    Hyperparameters hyper;
    hyper.newton_max_iter = 1;
    const KnotGrid grid(hyper.K, 11.0);
    const BinGrid bins(hyper.J, 11.0);
    LatentVector init;
    init.theta = Eigen::VectorXd::Zero(hyper.K);
    init.beta = Eigen::VectorXd::Zero(3);
    init.gamma = Eigen::VectorXd::Zero(2);
    try {
        laplace_approx(10.0, generated.data, grid, bins, init, hyper);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        REQUIRE(e.iterations <= 1);
        REQUIRE(std::isfinite(e.gradient_norm));
        REQUIRE(e.last_iterate.size() == static_cast<std::size_t>(hyper.K + 5));
    }
}

TEST_CASE("emitted v-profile is normalized and peaks at v_star", "[laplace][fit]") {
    const GeneratedData generated = generate_dataset(scenario1(), 47ULL);
    Hyperparameters hyper;
    FitOptions options;
    options.t_upper = 11.0;
    options.profile = ProfileRequest{-2.0, 12.0, 141};
    const FitResult result = fit(generated.data, hyper, options);
    REQUIRE(result.v_profile.size() == 141);

    const double step = result.v_profile[1].first - result.v_profile[0].first;
    double mass = 0.0;
    double best_v = result.v_profile[0].first;
    double best_density = result.v_profile[0].second;
    for (std::size_t i = 0; i + 1 < result.v_profile.size(); ++i) {
        mass += 0.5 * (result.v_profile[i].second + result.v_profile[i + 1].second) * step;
        if (result.v_profile[i + 1].second > best_density) {
            best_density = result.v_profile[i + 1].second;
            best_v = result.v_profile[i + 1].first;
        }
    }
    REQUIRE(mass == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(std::fabs(best_v - result.v_star) <= std::max(step, hyper.delta_v) + 1e-9);
}

TEST_CASE("small samples trigger the dimension warning", "[laplace][fit]") {
    ScenarioConfig tiny = scenario1();
    tiny.n = 18;  // below dim(xi) = 15 + 3 + 2
    GeneratedData generated = generate_dataset(tiny, 8ULL);
    generated.data.events[0] = 1;
    Hyperparameters hyper;
    hyper.newton_max_iter = 400;
    const FitResult result = fit(generated.data, hyper, {.t_upper = 11.0});
    bool warned = false;
    for (const auto& warning : result.warnings) {
        warned = warned || warning.find("below dim") != std::string::npos;
    }
    REQUIRE(warned);
}
