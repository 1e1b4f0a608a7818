// kaplan_meier.hpp
// Product-limit estimator with censoring marks and the plateau height used
// as a cure-fraction diagnostic.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "lpsmc/data.hpp"

namespace lpsmc {

struct KaplanMeierCurve {
    Eigen::VectorXd times;         // distinct event times, ascending
    Eigen::VectorXd survival;      // estimate just after each event time
    Eigen::VectorXd censor_times;  // censored follow-up times (tick marks)
    double plateau = 1.0;          // last survival value
};

inline KaplanMeierCurve kaplan_meier(const SurvivalDataset& data) {
    const Eigen::Index n = data.n();
    if (n < 1) throw DataError("kaplan_meier: empty dataset");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (data.times[a] != data.times[b]) return data.times[a] < data.times[b];
        return data.events[a] > data.events[b];  // events precede censorings at ties
    });

    std::vector<double> step_times, step_survival, censored;
    double survival = 1.0;
    Eigen::Index at_risk = n;
    Eigen::Index i = 0;
    while (i < n) {
        const double t = data.times[order[i]];
        Eigen::Index deaths = 0, leaving = 0;
        while (i < n && data.times[order[i]] == t) {
            deaths += data.events[order[i]];
            if (data.events[order[i]] == 0) censored.push_back(t);
            ++leaving;
            ++i;
        }
        if (deaths > 0) {
            survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            step_times.push_back(t);
            step_survival.push_back(survival);
        }
        at_risk -= leaving;
    }

    KaplanMeierCurve curve;
    curve.times = Eigen::Map<const Eigen::VectorXd>(step_times.data(), step_times.size());
    curve.survival = Eigen::Map<const Eigen::VectorXd>(step_survival.data(), step_survival.size());
    curve.censor_times = Eigen::Map<const Eigen::VectorXd>(censored.data(), censored.size());
    curve.plateau = survival;
    return curve;
}

}  // namespace lpsmc
