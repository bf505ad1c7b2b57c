#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace itpg {

using cplx = std::complex<double>;
using std::size_t;

inline constexpr double pi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// error taxonomy
// ---------------------------------------------------------------------------

struct invalid_metric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct branch_failure_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degeneracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct grid_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// deterministic PRNG (splitmix64; stable across platforms, unlike the
// std <random> distributions)
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ull) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

    size_t index(size_t n) { return size_t(next_u64() % uint64_t(n)); }

  private:
    uint64_t state_;
};

// ---------------------------------------------------------------------------
// small parallel helper; worker count comes from the run config
// ---------------------------------------------------------------------------

inline unsigned& worker_count() {
    static unsigned n = 1;
    return n;
}

template <typename F>
void parallel_for(size_t n, F&& body) {
    unsigned workers = worker_count();
    if (workers <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) body(i);
        return;
    }
    workers = std::min<unsigned>(workers, unsigned(n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<size_t> next{0};
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                body(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// banded LU with partial pivoting (LAPACK gbtrf-style storage).
// kl/ku are the lower/upper bandwidths of the assembled matrix.
// ---------------------------------------------------------------------------

class BandedMatrix {
  public:
    BandedMatrix() = default;
    BandedMatrix(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), rows_(2 * kl + ku + 1), a_(size_t(rows_) * n, 0.0) {}

    void zero() { std::fill(a_.begin(), a_.end(), 0.0); }

    // entry (i,j); stored iff |i-j| within bands
    double& at(int i, int j) {
        return a_[size_t(kl_ + ku_ + i - j) + size_t(j) * rows_];
    }
    double at(int i, int j) const {
        return a_[size_t(kl_ + ku_ + i - j) + size_t(j) * rows_];
    }

    // in-place factorization; returns false on a (near-)singular pivot
    bool factorize() {
        piv_.assign(n_, 0);
        for (int j = 0; j < n_; ++j) {
            int pmax = std::min(j + kl_, n_ - 1);
            int ip = j;
            double amax = std::abs(at(j, j));
            for (int i = j + 1; i <= pmax; ++i) {
                double v = std::abs(at(i, j));
                if (v > amax) { amax = v; ip = i; }
            }
            if (amax < 1e-300) return false;
            piv_[j] = ip;
            int jmax = std::min(j + kl_ + ku_, n_ - 1);
            if (ip != j)
                for (int c = j; c <= jmax; ++c) std::swap(at(j, c), at(ip, c));
            for (int i = j + 1; i <= pmax; ++i) {
                double m = at(i, j) / at(j, j);
                at(i, j) = m;
                for (int c = j + 1; c <= jmax; ++c) at(i, c) -= m * at(j, c);
            }
        }
        factored_ = true;
        return true;
    }

    void solve(std::vector<double>& b) const {
        for (int j = 0; j < n_; ++j) {
            if (piv_[j] != j) std::swap(b[j], b[piv_[j]]);
            int pmax = std::min(j + kl_, n_ - 1);
            for (int i = j + 1; i <= pmax; ++i) b[i] -= at(i, j) * b[j];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            int jmax = std::min(i + kl_ + ku_, n_ - 1);
            double s = b[i];
            for (int j = i + 1; j <= jmax; ++j) s -= at(i, j) * b[j];
            b[i] = s / at(i, i);
        }
    }

    bool factored() const { return factored_; }
    int size() const { return n_; }

  private:
    int n_ = 0, kl_ = 0, ku_ = 0, rows_ = 0;
    std::vector<double> a_;
    std::vector<int> piv_;
    bool factored_ = false;
};

// Gauss-Legendre nodes/weights on [-1,1] by Newton on Legendre polynomials
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        double p0, p1, dp;
        for (int it = 0; it < 100; ++it) {
            p0 = 1.0; p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1; p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

} // namespace itpg
