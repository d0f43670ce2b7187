#pragma once

// Statistical scores used for training, tuning and thresholding.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "leakdet/common.hpp"

namespace leakdet::metrics {

inline void check_lengths(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw std::invalid_argument("metrics: inputs must be non-empty and of equal length");
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        s += d * d;
    }
    return std::sqrt(s / double(y.size()));
}

inline double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - yhat[i]);
    return s / double(y.size());
}

// Coefficient of determination.  Throws on a constant target, where the
// variance normalisation is undefined; callers that want the single-leaf
// fit-report convention handle that case themselves.
inline double r2(const std::vector<double>& y, const std::vector<double>& yhat) {
    check_lengths(y, yhat);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= double(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0)
        throw std::domain_error("r2: target variance is zero, score undefined");
    return 1.0 - ss_res / ss_tot;
}

}  // namespace leakdet::metrics
