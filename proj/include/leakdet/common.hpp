#pragma once

// Shared plumbing: error types, deterministic RNG streams, a small row-major
// matrix, and a fixed-size thread pool used for grid cells / forest trees /
// sweep cells.

#include <cstdint>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace leakdet {

// ---------------------------------------------------------------------------
// Errors.  CLI maps these onto its exit-code contract: config/usage -> 1,
// data problems -> 3.  Domain errors from correlations use std::domain_error.
// ---------------------------------------------------------------------------

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct schema_error : data_error {
    using data_error::data_error;
};

struct scenario_infeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG streams.  Every source of randomness in the toolkit is a
// function of (master seed, role index...) so that runs are reproducible and
// concurrent workers never share an engine.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(master ^ 0x5bf03635ULL);
    s = splitmix64(s ^ splitmix64(a));
    s = splitmix64(s ^ splitmix64(b + 0x9e3779b9ULL));
    s = splitmix64(s ^ splitmix64(c + 0x85ebca6bULL));
    return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Unbiased integer in [0, n) drawn with explicit rejection sampling so the
// sequence does not depend on the standard library's distribution internals.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw config_error("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    const double u = double(rng() >> 11) * 0x1.0p-53;  // [0,1)
    return lo + (hi - lo) * u;
}

inline double gaussian(Rng& rng, double mean, double stddev) {
    // Box-Muller, one value per call; deterministic across platforms.
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = double(rng() >> 11) * 0x1.0p-53;
    const double u2 = double(rng() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

// In-place Fisher-Yates with our own index draws.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Row-major matrix of doubles with named columns.
// ---------------------------------------------------------------------------

class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const double* row(std::size_t r) const { return data_.data() + r * cols_; }
    double* row(std::size_t r) { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
        return out;
    }

    Matrix take_rows(const std::vector<std::size_t>& idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy(row(idx[i]), row(idx[i]) + cols_, out.row(i));
        return out;
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Minimal thread pool.  run_indexed(n, f) executes f(0..n-1); results must be
// written into pre-sized slots so aggregation order never depends on thread
// scheduling.
// ---------------------------------------------------------------------------

class ThreadPool {
  public:
    explicit ThreadPool(unsigned jobs) {
        if (jobs == 0) jobs = 1;
        jobs_ = jobs;
    }

    unsigned jobs() const { return jobs_; }

    void run_indexed(std::size_t n, const std::function<void(std::size_t)>& f) const {
        if (n == 0) return;
        const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(jobs_, n));
        if (workers <= 1) {
            for (std::size_t i = 0; i < n; ++i) f(i);
            return;
        }
        std::vector<std::thread> threads;
        std::mutex mu;
        std::size_t next = 0;
        std::exception_ptr err;
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= n || err) return;
                        i = next++;
                    }
                    try {
                        f(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(mu);
                        if (!err) err = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : threads) t.join();
        if (err) std::rethrow_exception(err);
    }

  private:
    unsigned jobs_ = 1;
};

inline unsigned default_jobs() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

}  // namespace leakdet
