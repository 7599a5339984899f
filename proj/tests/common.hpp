#pragma once
#include <gtest/gtest.h>

#include <random>

#include "wplab/xcheck.hpp"

namespace wt {

using namespace wplab;

inline Grid small_grid(int n, double L = 0, int Nx = 0) {
    Grid g;
    g.n = n;
    g.L = L > 0 ? L : (n == 1 ? 64 : 32);
    g.Nx = Nx > 0 ? Nx : (n == 1 ? 128 : 64);
    g.Tmin = -1;
    g.Tmax = 1;
    return g;
}

inline Datum ball_datum(const Grid& g, double r, uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_in(g, [&](const Vec& xi) { return norm(xi, g.n) < r; }, rng);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace wt
