#pragma once
// Smooth compactly supported profiles: the exp(-1/(1-x^2)) bump, its
// integral, and the cutoffs built from it by convolving with indicators.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"

namespace wplab::bump {

// bump on (-1/2, 1/2), unnormalised
inline double raw(double s) {
    double u = 1.0 - 4.0 * s * s;
    return u > 0 ? std::exp(-1.0 / u) : 0.0;
}

namespace detail {

struct Table {
    static constexpr int N = 8192;
    double Z = 0;
    std::vector<double> B;  // B[i] = cdf at -1/2 + i/N

    Table() {
        using boost::math::quadrature::gauss_kronrod;
        B.assign(N + 1, 0.0);
        double h = 1.0 / N;
        double acc = 0;
        for (int i = 0; i < N; ++i) {
            double a = -0.5 + i * h;
            acc += gauss_kronrod<double, 31>::integrate(raw, a, a + h, 0, 1e-16);
            B[i + 1] = acc;
        }
        Z = acc;
        for (auto& v : B) v /= Z;
        B[N] = 1.0;
    }
};

inline const Table& table() {
    static const Table t;
    return t;
}

}  // namespace detail

// normalised density of the bump
inline double density(double s) { return raw(s) / detail::table().Z; }

// cumulative integral: 0 below -1/2, 1 above 1/2, C^infinity in between.
// cubic Hermite on a fine table with the exact derivative.
inline double cdf(double y) {
    if (y <= -0.5) return 0.0;
    if (y >= 0.5) return 1.0;
    const auto& T = detail::table();
    double u = (y + 0.5) * T.N;
    int i = std::min(int(u), T.N - 1);
    double s = u - i, h = 1.0 / T.N;
    double y0 = -0.5 + i * h, y1 = y0 + h;
    double p0 = T.B[i], p1 = T.B[i + 1];
    double m0 = density(y0) * h, m1 = density(y1) * h;
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 +
           (s3 - s2) * m1;
}

// (indicator of [-1/2,1/2]) * bump: supported in [-1,1], integer translates sum to 1
inline double plateau1(double s) { return cdf(s + 0.5) - cdf(s - 0.5); }

// 1 on [-a,a], 0 outside [-b,b], smooth monotone transition
inline double cutoff(double r, double a, double b) {
    r = std::abs(r);
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    return 1.0 - cdf((r - 0.5 * (a + b)) / (b - a));
}

// tensor partition piece: supp in [-c,c]^n, sum over c Z^n translates == 1
inline double partition(const Vec& xi, int n, double c) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= plateau1(xi[i] / c);
    return v;
}

// radial packet profile: 1 on B(0,2), 0 off B(0,4)
inline double packet_profile(double r) { return cutoff(r, 2.0, 4.0); }

}  // namespace wplab::bump
