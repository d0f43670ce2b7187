#pragma once

// Epsilon-insensitive support vector regression.  The dual is solved by
// sequential minimal optimization over maximal-violating pairs with a
// bounded kernel-row cache.  Stops at KKT gap <= tol or at the iteration
// cap, in which case the best iterate is kept and flagged.

#include <cmath>
#include <cstring>
#include <limits>
#include <list>
#include <memory>
#include <unordered_map>
#include <vector>

#include "leakdet/common.hpp"

namespace leakdet::ml {

enum class Kernel { rbf, linear };

struct SvrParams {
    Kernel kernel = Kernel::rbf;
    double c = 1.0;
    double epsilon = 0.01;
    double gamma = 0.0;  // <= 0 selects "scale": 1 / (d * var(X))
    double tol = 1e-3;
    long long max_iter = -1;  // -1: 100 * n, at least 200000
    std::size_t cache_bytes = 400ull << 20;
};

namespace svr_detail {

class KernelEval {
  public:
    KernelEval(const Matrix& x, Kernel kind, double gamma)
        : x_(x), kind_(kind), gamma_(gamma) {
        if (kind_ == Kernel::rbf) {
            sqnorm_.resize(x.rows());
            for (std::size_t r = 0; r < x.rows(); ++r) {
                double s = 0.0;
                const double* row = x.row(r);
                for (std::size_t c = 0; c < x.cols(); ++c) s += row[c] * row[c];
                sqnorm_[r] = s;
            }
        }
    }

    double dot(std::size_t a, std::size_t b) const {
        const double* ra = x_.row(a);
        const double* rb = x_.row(b);
        double s = 0.0;
        for (std::size_t c = 0; c < x_.cols(); ++c) s += ra[c] * rb[c];
        return s;
    }

    double operator()(std::size_t a, std::size_t b) const {
        if (kind_ == Kernel::linear) return dot(a, b);
        return std::exp(-gamma_ * (sqnorm_[a] + sqnorm_[b] - 2.0 * dot(a, b)));
    }

  private:
    const Matrix& x_;
    Kernel kind_;
    double gamma_;
    std::vector<double> sqnorm_;
};

// LRU cache of kernel rows (by original sample index).
class RowCache {
  public:
    RowCache(std::size_t n, std::size_t budget_bytes, const KernelEval& k)
        : n_(n), kernel_(k) {
        max_rows_ = std::max<std::size_t>(2, budget_bytes / (n * sizeof(double)));
    }

    const double* row(std::size_t r) {
        auto it = index_.find(r);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            return it->second.first.get();
        }
        if (index_.size() >= max_rows_) {
            const std::size_t victim = lru_.back();
            lru_.pop_back();
            index_.erase(victim);
        }
        auto data = std::make_unique<double[]>(n_);
        for (std::size_t s = 0; s < n_; ++s) data[s] = kernel_(r, s);
        lru_.push_front(r);
        const double* ptr = data.get();
        index_.emplace(r, std::make_pair(std::move(data), lru_.begin()));
        return ptr;
    }

  private:
    std::size_t n_;
    const KernelEval& kernel_;
    std::size_t max_rows_;
    std::list<std::size_t> lru_;
    std::unordered_map<std::size_t,
                       std::pair<std::unique_ptr<double[]>, std::list<std::size_t>::iterator>>
        index_;
};

}  // namespace svr_detail

class Svr {
  public:
    struct FitStatus {
        bool converged = false;
        long long iterations = 0;
        double kkt_gap = 0.0;
    };

    FitStatus fit(const Matrix& x, const std::vector<double>& y, const SvrParams& params) {
        if (params.c <= 0.0) throw config_error("svr: C must be positive");
        if (params.epsilon < 0.0) throw config_error("svr: epsilon must be non-negative");
        if (x.rows() == 0 || x.rows() != y.size())
            throw data_error("svr: empty input or row/target mismatch");
        params_ = params;
        n_features_ = x.cols();
        gamma_used_ = params.gamma;
        if (params_.kernel == Kernel::rbf && gamma_used_ <= 0.0) gamma_used_ = scale_gamma(x);

        const std::size_t n = x.rows();
        const double c = params.c;
        svr_detail::KernelEval kernel(x, params_.kernel, gamma_used_);
        svr_detail::RowCache cache(n, params_.cache_bytes, kernel);

        // Unified variables a[0..2n): a[i] = alpha_i (label +1), a[n+i] = alpha*_i (label -1).
        const std::size_t m = 2 * n;
        std::vector<double> a(m, 0.0);
        std::vector<double> grad(m);
        std::vector<double> qdiag(m);
        for (std::size_t i = 0; i < n; ++i) {
            const double kd = kernel(i, i);
            qdiag[i] = kd;
            qdiag[n + i] = kd;
            grad[i] = params.epsilon - y[i];
            grad[n + i] = params.epsilon + y[i];
        }
        auto label = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };

        const long long cap = params.max_iter > 0
                                  ? params.max_iter
                                  : std::max<long long>(200000, 100 * (long long)n);
        constexpr double tau = 1e-12;
        FitStatus status;
        long long iter = 0;
        for (; iter < cap; ++iter) {
            // Maximal violating pair.
            double gmax = -std::numeric_limits<double>::infinity();
            double gmin = std::numeric_limits<double>::infinity();
            std::ptrdiff_t i = -1, j = -1;
            for (std::size_t t = 0; t < m; ++t) {
                const double yt = label(t);
                const double v = -yt * grad[t];
                const bool up = (yt > 0 && a[t] < c) || (yt < 0 && a[t] > 0);
                const bool low = (yt > 0 && a[t] > 0) || (yt < 0 && a[t] < c);
                if (up && v > gmax) {
                    gmax = v;
                    i = std::ptrdiff_t(t);
                }
                if (low && v < gmin) {
                    gmin = v;
                    j = std::ptrdiff_t(t);
                }
            }
            status.kkt_gap = gmax - gmin;
            if (i < 0 || j < 0 || status.kkt_gap < params.tol) {
                status.converged = true;
                break;
            }

            const std::size_t ui = std::size_t(i), uj = std::size_t(j);
            const double yi = label(ui), yj = label(uj);
            const double* ki = cache.row(ui % n);
            const double* kj = cache.row(uj % n);
            auto q = [&](const double* krow, double ylab, std::size_t t) {
                return ylab * label(t) * krow[t % n];
            };

            const double old_ai = a[ui], old_aj = a[uj];
            if (yi != yj) {
                double quad = qdiag[ui] + qdiag[uj] + 2.0 * yi * yj * ki[uj % n];
                if (quad <= 0) quad = tau;
                const double delta = (-grad[ui] - grad[uj]) / quad;
                const double diff = a[ui] - a[uj];
                a[ui] += delta;
                a[uj] += delta;
                if (diff > 0 && a[uj] < 0) {
                    a[uj] = 0;
                    a[ui] = diff;
                } else if (diff <= 0 && a[ui] < 0) {
                    a[ui] = 0;
                    a[uj] = -diff;
                }
                if (diff > 0 && a[ui] > c) {
                    a[ui] = c;
                    a[uj] = c - diff;
                } else if (diff <= 0 && a[uj] > c) {
                    a[uj] = c;
                    a[ui] = c + diff;
                }
            } else {
                double quad = qdiag[ui] + qdiag[uj] - 2.0 * yi * yj * ki[uj % n];
                if (quad <= 0) quad = tau;
                const double delta = (grad[ui] - grad[uj]) / quad;
                const double sum = a[ui] + a[uj];
                a[ui] -= delta;
                a[uj] += delta;
                if (sum > c) {
                    if (a[ui] > c) {
                        a[ui] = c;
                        a[uj] = sum - c;
                    }
                } else if (a[uj] < 0) {
                    a[uj] = 0;
                    a[ui] = sum;
                }
                if (sum > c) {
                    if (a[uj] > c) {
                        a[uj] = c;
                        a[ui] = sum - c;
                    }
                } else if (a[ui] < 0) {
                    a[ui] = 0;
                    a[uj] = sum;
                }
            }

            const double dai = a[ui] - old_ai;
            const double daj = a[uj] - old_aj;
            if (dai == 0.0 && daj == 0.0) {
                status.converged = true;  // numerically stuck at optimum
                break;
            }
            for (std::size_t t = 0; t < m; ++t)
                grad[t] += q(ki, yi, t) * dai + q(kj, yj, t) * daj;
        }
        status.iterations = iter;

        // rho via free (unbounded) variables, falling back to the bound midpoint.
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        std::size_t nr_free = 0;
        for (std::size_t t = 0; t < m; ++t) {
            const double yg = label(t) * grad[t];
            if (a[t] >= c) {
                if (label(t) < 0)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else if (a[t] <= 0) {
                if (label(t) > 0)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else {
                ++nr_free;
                sum_free += yg;
            }
        }
        const double rho = nr_free > 0 ? sum_free / double(nr_free) : (ub + lb) / 2.0;
        bias_ = -rho;

        // Retain support vectors.
        coef_.clear();
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < n; ++r) {
            const double beta = a[r] - a[n + r];
            if (beta != 0.0) {
                idx.push_back(r);
                coef_.push_back(beta);
            }
        }
        support_ = x.take_rows(idx);
        status_ = status;
        return status;
    }

    double predict_row(const double* row) const {
        double f = bias_;
        for (std::size_t s = 0; s < support_.rows(); ++s) {
            const double* sv = support_.row(s);
            double k;
            if (params_.kernel == Kernel::linear) {
                k = 0.0;
                for (std::size_t c = 0; c < n_features_; ++c) k += sv[c] * row[c];
            } else {
                double d2 = 0.0;
                for (std::size_t c = 0; c < n_features_; ++c) {
                    const double d = sv[c] - row[c];
                    d2 += d * d;
                }
                k = std::exp(-gamma_used_ * d2);
            }
            f += coef_[s] * k;
        }
        return f;
    }

    std::vector<double> predict(const Matrix& x) const {
        if (x.cols() != n_features_)
            throw data_error("svr: input width " + std::to_string(x.cols()) +
                             " does not match fitted width " + std::to_string(n_features_));
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    static double scale_gamma(const Matrix& x) {
        double mean = 0.0;
        for (double v : x.data()) mean += v;
        mean /= double(x.data().size());
        double var = 0.0;
        for (double v : x.data()) var += (v - mean) * (v - mean);
        var /= double(x.data().size());
        if (var <= 0.0) var = 1.0;
        return 1.0 / (double(x.cols()) * var);
    }

    const Matrix& support_vectors() const { return support_; }
    const std::vector<double>& dual_coef() const { return coef_; }
    double bias() const { return bias_; }
    double gamma_used() const { return gamma_used_; }
    const SvrParams& params() const { return params_; }
    const FitStatus& status() const { return status_; }

    // Used by deserialization.
    void restore(const SvrParams& p, double gamma_used, double bias, Matrix support,
                 std::vector<double> coef, std::size_t n_features) {
        params_ = p;
        gamma_used_ = gamma_used;
        bias_ = bias;
        support_ = std::move(support);
        coef_ = std::move(coef);
        n_features_ = n_features;
    }

  private:
    SvrParams params_;
    double gamma_used_ = 0.0;
    double bias_ = 0.0;
    Matrix support_;
    std::vector<double> coef_;
    std::size_t n_features_ = 0;
    FitStatus status_;
};

}  // namespace leakdet::ml
