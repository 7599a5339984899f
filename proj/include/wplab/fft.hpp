#pragma once
// thin FFTW wrapper; plans are cached and shared, execution is thread-safe

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "core.hpp"

namespace wplab::fft {

namespace detail {

struct PlanCache {
    std::mutex mu;
    std::map<std::tuple<int, int, int>, fftw_plan> plans;
    ~PlanCache() {
        for (auto& [k, p] : plans) fftw_destroy_plan(p);
    }
};

inline PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace detail

// sign = +1 computes sum_k c_k e^{+2 pi i jk/N}, sign = -1 the forward sum
inline fftw_plan plan(int rank, int N, int sign) {
    auto& c = detail::cache();
    std::lock_guard lk(c.mu);
    auto key = std::make_tuple(rank, N, sign);
    if (auto it = c.plans.find(key); it != c.plans.end()) return it->second;
    std::vector<int> dims(rank, N);
    size_t total = size_t(ipow(N, rank));
    auto* a = fftw_alloc_complex(total);
    auto* b = fftw_alloc_complex(total);
    fftw_plan p = fftw_plan_dft(rank, dims.data(), a, b, sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(a);
    fftw_free(b);
    if (!p) throw ConfigError("fftw plan creation failed");
    c.plans.emplace(key, p);
    return p;
}

// out-of-place transform of an N^rank row-major array
inline void transform(int rank, int N, int sign, const cplx* in, cplx* out) {
    fftw_plan p = plan(rank, N, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

inline void transform(int rank, int N, int sign, std::vector<cplx>& inout) {
    std::vector<cplx> tmp(inout.size());
    fft::transform(rank, N, sign, inout.data(), tmp.data());
    inout.swap(tmp);
}

}  // namespace wplab::fft
