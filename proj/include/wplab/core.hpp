#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace wplab {

using cplx = std::complex<double>;
constexpr double pi = std::numbers::pi;

// points in R^n or R^{n+1}; n <= 2 so three slots always suffice
using Vec = std::array<double, 3>;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double dot(const Vec& a, const Vec& b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}
inline double norm(const Vec& a, int d) { return std::sqrt(dot(a, a, d)); }
inline double norm_inf(const Vec& a, int d) {
    double m = 0;
    for (int i = 0; i < d; ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline bool is_pow2(long v) { return v > 0 && (v & (v - 1)) == 0; }

inline long ipow(long b, int e) {
    long r = 1;
    while (e-- > 0) r *= b;
    return r;
}

// c_n = 1/(2 sqrt n)
inline double c_n(int n) { return 0.5 / std::sqrt(double(n)); }

inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* e = std::getenv("WPLAB_THREADS")) {
        long v = std::strtol(e, nullptr, 10);
        if (v >= 1) return unsigned(std::min<long>(v, hw));
    }
    return hw;
}

// dynamic queue; callers write per-index results, so output never depends on the thread count
template <class F>
void parallel_for(size_t n, F&& f) {
    unsigned T = std::min<size_t>(thread_count(), n);
    if (T <= 1) {
        for (size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::atomic_flag failed;
    {
        std::vector<std::jthread> pool;
        pool.reserve(T);
        for (unsigned w = 0; w < T; ++w)
            pool.emplace_back([&] {
                try {
                    for (size_t i; (i = next.fetch_add(1)) < n;) f(i);
                } catch (...) {
                    if (!failed.test_and_set()) err = std::current_exception();
                    next = n;
                }
            });
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace wplab
