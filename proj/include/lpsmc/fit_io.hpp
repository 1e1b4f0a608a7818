// fit_io.hpp
// Versioned JSON serialization of a FitResult, round-trip exact: doubles are
// emitted in shortest-round-trip form and keys in a fixed order, so saving
// the same fit twice yields identical bytes.

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpsmc/laplace.hpp"

namespace lpsmc {

inline constexpr int kFitFileVersion = 1;

namespace detail {

inline nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i];
    return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

}  // namespace detail

inline std::string fit_to_json(const FitResult& fit,
                               const std::vector<std::string>& incidence_names = {},
                               const std::vector<std::string>& latency_names = {}) {
    nlohmann::ordered_json j;
    j["format"] = "lpsmc-fit";
    j["version"] = kFitFileVersion;
    j["n"] = static_cast<long>(fit.n);
    j["p"] = fit.p;
    j["q"] = fit.q;
    j["t_upper"] = fit.t_upper;
    j["v_star"] = fit.v_star;
    j["v_at_lower_bound"] = fit.v_at_lower_bound;
    if (fit.constrained_index) {
        j["constrained_index"] = *fit.constrained_index;
    } else {
        j["constrained_index"] = nullptr;
    }
    nlohmann::ordered_json hyper;
    hyper["a_lambda"] = fit.hyper.a_lambda;
    hyper["b_lambda"] = fit.hyper.b_lambda;
    hyper["zeta"] = fit.hyper.zeta;
    hyper["epsilon"] = fit.hyper.epsilon;
    hyper["penalty_order"] = fit.hyper.penalty_order;
    hyper["K"] = fit.hyper.K;
    hyper["J"] = fit.hyper.J;
    hyper["v0"] = fit.hyper.v0;
    hyper["delta_v"] = fit.hyper.delta_v;
    hyper["v_min"] = fit.hyper.v_min;
    hyper["newton_tol"] = fit.hyper.newton_tol;
    hyper["newton_max_iter"] = fit.hyper.newton_max_iter;
    j["hyper"] = std::move(hyper);
    nlohmann::ordered_json post;
    post["lambda"] = fit.posterior.lambda;
    post["converged"] = fit.posterior.converged;
    post["iterations"] = fit.posterior.iterations;
    post["loglik_at_mean"] = fit.posterior.loglik_at_mean;
    post["logdet_covariance"] = fit.posterior.logdet_covariance;
    post["mean"] = detail::vector_json(fit.posterior.mean);
    post["covariance"] = detail::matrix_json(fit.posterior.covariance);
    j["posterior"] = std::move(post);
    nlohmann::ordered_json profile = nlohmann::ordered_json::array();
    for (const auto& [v, density] : fit.v_profile) {
        profile.push_back(nlohmann::ordered_json::array({v, density}));
    }
    j["v_profile"] = std::move(profile);
    j["incidence_names"] = incidence_names;
    j["latency_names"] = latency_names;
    j["warnings"] = fit.warnings;
    return j.dump(2) + "\n";
}

struct LoadedFit {
    FitResult fit;
    std::vector<std::string> incidence_names;
    std::vector<std::string> latency_names;
};

inline LoadedFit fit_from_json(const std::string& content) {
    const nlohmann::json j = nlohmann::json::parse(content);
    if (!j.contains("format") || j["format"] != "lpsmc-fit") {
        throw Error("fit file: unrecognized format tag");
    }
    if (j["version"].get<int>() != kFitFileVersion) {
        throw Error("fit file: unsupported version " + std::to_string(j["version"].get<int>()));
    }
    LoadedFit loaded;
    FitResult& fit = loaded.fit;
    fit.n = j["n"].get<long>();
    fit.p = j["p"].get<int>();
    fit.q = j["q"].get<int>();
    fit.t_upper = j["t_upper"].get<double>();
    fit.v_star = j["v_star"].get<double>();
    fit.v_at_lower_bound = j["v_at_lower_bound"].get<bool>();
    if (!j["constrained_index"].is_null()) {
        fit.constrained_index = j["constrained_index"].get<int>();
    }
    const auto& hyper = j["hyper"];
    fit.hyper.a_lambda = hyper["a_lambda"].get<double>();
    fit.hyper.b_lambda = hyper["b_lambda"].get<double>();
    fit.hyper.zeta = hyper["zeta"].get<double>();
    fit.hyper.epsilon = hyper["epsilon"].get<double>();
    fit.hyper.penalty_order = hyper["penalty_order"].get<int>();
    fit.hyper.K = hyper["K"].get<int>();
    fit.hyper.J = hyper["J"].get<int>();
    fit.hyper.v0 = hyper["v0"].get<double>();
    fit.hyper.delta_v = hyper["delta_v"].get<double>();
    fit.hyper.v_min = hyper["v_min"].get<double>();
    fit.hyper.newton_tol = hyper["newton_tol"].get<double>();
    fit.hyper.newton_max_iter = hyper["newton_max_iter"].get<int>();
    const auto& post = j["posterior"];
    fit.posterior.lambda = post["lambda"].get<double>();
    fit.posterior.converged = post["converged"].get<bool>();
    fit.posterior.iterations = post["iterations"].get<int>();
    fit.posterior.loglik_at_mean = post["loglik_at_mean"].get<double>();
    fit.posterior.logdet_covariance = post["logdet_covariance"].get<double>();
    fit.posterior.mean = detail::vector_from_json(post["mean"]);
    fit.posterior.covariance = detail::matrix_from_json(post["covariance"]);
    for (const auto& pair : j["v_profile"]) {
        fit.v_profile.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    loaded.incidence_names = j["incidence_names"].get<std::vector<std::string>>();
    loaded.latency_names = j["latency_names"].get<std::vector<std::string>>();
    fit.warnings = j["warnings"].get<std::vector<std::string>>();
    return loaded;
}

inline void save_fit(const std::string& path, const FitResult& fit,
                     const std::vector<std::string>& incidence_names = {},
                     const std::vector<std::string>& latency_names = {}) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write fit file '" + path + "'");
    file << fit_to_json(fit, incidence_names, latency_names);
}

inline LoadedFit load_fit(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw Error("cannot read fit file '" + path + "'");
    std::string content((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return fit_from_json(content);
}

}  // namespace lpsmc
