#pragma once
// Paraboloid geometry: caps, Gauss map, parabolic rescaling, tubes, strips,
// parallelepipeds, transversality.

#include <functional>

#include "field.hpp"

namespace wplab {

using Mat = std::array<std::array<double, 3>, 3>;

inline Vec mat_vec(const Mat& A, const Vec& z, int d) {
    Vec r{0, 0, 0};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) r[i] += A[i][j] * z[j];
    return r;
}
inline Mat transpose(const Mat& A) {
    Mat T{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) T[i][j] = A[j][i];
    return T;
}
inline Mat mat_mul(const Mat& A, const Mat& B, int d) {
    Mat C{};
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) C[i][j] += A[i][k] * B[k][j];
    return C;
}

inline double det(const Mat& A, int d) {
    if (d == 1) return A[0][0];
    if (d == 2) return A[0][0] * A[1][1] - A[0][1] * A[1][0];
    return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
           A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
           A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
}

// Sigma(xi) = (xi, |xi|^2)
inline Vec lift(const Vec& xi, int n) {
    Vec s{0, 0, 0};
    for (int a = 0; a < n; ++a) s[a] = xi[a];
    s[n] = dot(xi, xi, n);
    return s;
}

// G(xi) = (1+4|xi|^2)^{-1/2} (-2 xi, 1)
inline Vec gauss_map(const Vec& xi, int n) {
    double c = 1.0 / std::sqrt(1 + 4 * dot(xi, xi, n));
    Vec g{0, 0, 0};
    for (int a = 0; a < n; ++a) g[a] = -2 * xi[a] * c;
    g[n] = c;
    return g;
}

struct Cap {
    Vec center{0, 0, 0};
    double radius = 1;

    bool contains(const Vec& xi, int n, double tol = 1e-12) const {
        Vec d{0, 0, 0};
        for (int a = 0; a < n; ++a) d[a] = xi[a] - center[a];
        return norm(d, n) <= radius * (1 + tol);
    }

    // centre, then points on the boundary sphere in the 3^n - 1 stencil directions
    std::vector<Vec> samples(int n) const {
        std::vector<Vec> s;
        int cnt = int(ipow(3, n));
        for (int m = 0; m < cnt; ++m) {
            Vec dir{0, 0, 0};
            int q = m;
            for (int a = 0; a < n; ++a) {
                dir[a] = double(q % 3) - 1;
                q /= 3;
            }
            double l = norm(dir, n);
            Vec p = center;
            if (l > 0)
                for (int a = 0; a < n; ++a) p[a] += radius * dir[a] / l;
            s.push_back(p);
        }
        return s;
    }
};

struct CapCover {
    int n = 1;
    double K = 2;
    std::vector<Cap> caps;
};

// ---------- parabolic rescaling ----------

struct RescaleMaps {
    int n = 1;
    Cap cap;
    Mat M{}, D{}, Lmat{};

    // A(zeta) = L^T zeta + Sigma(xi_theta)
    Vec affine(const Vec& zeta) const {
        Vec r = mat_vec(transpose(Lmat), zeta, n + 1);
        Vec s = lift(cap.center, n);
        for (int a = 0; a <= n; ++a) r[a] += s[a];
        return r;
    }
    Vec affine_inverse(const Vec& w) const {
        // L^T = M D, inverted blockwise
        Vec s = lift(cap.center, n), y{0, 0, 0};
        for (int a = 0; a <= n; ++a) y[a] = w[a] - s[a];
        // M^{-1} = [[I,0],[-2 xi^T,1]]
        Vec u = y;
        for (int a = 0; a < n; ++a) u[n] -= 2 * cap.center[a] * y[a];
        double r = cap.radius;
        for (int a = 0; a < n; ++a) u[a] /= r;
        u[n] /= r * r;
        return u;
    }
    // space-time side: z -> L z
    Vec spacetime(const Vec& z) const { return mat_vec(Lmat, z, n + 1); }
};

inline RescaleMaps cap_rescaling_maps(const Cap& cap, int n) {
    if (!(cap.radius > 0)) throw PreconditionError("cap_rescaling_maps: radius must be positive");
    RescaleMaps R;
    R.n = n;
    R.cap = cap;
    double r = cap.radius;
    for (int a = 0; a <= n; ++a) R.M[a][a] = 1;
    for (int a = 0; a < n; ++a) R.M[n][a] = 2 * cap.center[a];
    for (int a = 0; a < n; ++a) R.D[a][a] = r;
    R.D[n][n] = r * r;
    R.Lmat = mat_mul(R.D, transpose(R.M), n + 1);
    return R;
}

// f~(eta) = r^{n/2} f^(xi_theta + r eta), on the lattice (2 pi/(rL))(Z^n + offset')
inline Datum rescale_datum(const Datum& f, const Cap& cap) {
    const Grid& g = f.grid;
    int n = g.n;
    double r = cap.radius;
    for (size_t i = 0; i < f.coef.size(); ++i) {
        if (f.coef[i] == cplx(0)) continue;
        Vec xi = f.xi(i);
        if (!cap.contains(xi, n, 1e-9) || norm(xi, n) > 1 + 1e-9)
            throw PreconditionError("rescale_datum: coefficient outside cap intersect unit ball");
    }
    Grid h = g;
    h.L = r * g.L;
    h.Nx = std::max(g.Nx, int(std::bit_ceil(unsigned(std::ceil(4 * h.L / pi)))));
    Datum out(h);
    std::array<long, 2> shift{0, 0};
    for (int a = 0; a < n; ++a) {
        double w = f.offset[a] - g.L * cap.center[a] / (2 * pi);
        double fl = std::floor(w);
        double frac = w - fl;
        if (frac < 1e-12) frac = 0;
        if (frac > 1 - 1e-12) {
            frac = 0;
            fl += 1;
        }
        out.offset[a] = frac;
        shift[a] = long(fl);
    }
    double amp = std::pow(r, 0.5 * n);
    for (size_t i = 0; i < f.coef.size(); ++i) {
        if (f.coef[i] == cplx(0)) continue;
        auto k = f.k_of(i);
        std::array<long, 2> kk{k[0] + shift[0], n == 2 ? k[1] + shift[1] : 0};
        size_t j = out.index_of(kk);
        if (out.k_of(j) != kk) throw PreconditionError("rescale_datum: target lattice too small");
        out.coef[j] = amp * f.coef[i];
    }
    return out;
}

// ---------- transversality ----------

// |G(xi_1) ^ ... ^ G(xi_{n+1})| = |det| of the stacked normals
inline double wedge_at(const std::vector<Vec>& xis, int n) {
    Mat A{};
    for (int j = 0; j <= n; ++j) {
        Vec g = gauss_map(xis[j], n);
        for (int a = 0; a <= n; ++a) A[a][j] = g[a];
    }
    return std::abs(det(A, n + 1));
}

// infimum over the 3^n-point samples of each cap
inline double wedge_transversality(const std::vector<Cap>& caps, int n) {
    if (int(caps.size()) != n + 1) throw PreconditionError("wedge_transversality: need n+1 caps");
    std::vector<std::vector<Vec>> S;
    for (auto& c : caps) S.push_back(c.samples(n));
    size_t per = S[0].size();
    size_t total = size_t(ipow(long(per), n + 1));
    double best = std::numeric_limits<double>::infinity();
    std::vector<Vec> pick(n + 1);
    for (size_t m = 0; m < total; ++m) {
        size_t q = m;
        for (int j = 0; j <= n; ++j) {
            pick[j] = S[j][q % per];
            q /= per;
        }
        best = std::min(best, wedge_at(pick, n));
    }
    return std::min(best, 1.0);
}

inline std::vector<std::vector<int>> enumerate_transverse_tuples(const CapCover& cover, double K) {
    int n = cover.n;
    double thr = std::pow(K, -n);
    int m = int(cover.caps.size());
    std::vector<std::vector<int>> cand;
    std::vector<int> idx(n + 1);
    std::function<void(int, int)> rec = [&](int pos, int from) {
        if (pos == n + 1) {
            std::vector<Vec> c;
            for (int i : idx) c.push_back(cover.caps[i].center);
            // the sampled infimum never exceeds the centre value
            if (wedge_at(c, n) >= thr) cand.push_back(idx);
            return;
        }
        for (int i = from; i < m; ++i) {
            idx[pos] = i;
            rec(pos + 1, i + 1);
        }
    };
    rec(0, 0);
    std::vector<char> keep(cand.size(), 0);
    parallel_for(cand.size(), [&](size_t k) {
        std::vector<Cap> caps;
        for (int i : cand[k]) caps.push_back(cover.caps[i]);
        keep[k] = wedge_transversality(caps, n) >= thr;
    });
    std::vector<std::vector<int>> out;
    for (size_t k = 0; k < cand.size(); ++k)
        if (keep[k]) out.push_back(cand[k]);
    return out;
}

// ---------- tubes ----------

// distance on a period-L torus (L <= 0: plain line)
inline double wrap(double d, double L) {
    if (L <= 0) return d;
    d = std::fmod(d, L);
    if (d > 0.5 * L) d -= L;
    if (d < -0.5 * L) d += L;
    return d;
}

enum class TubeZone { core, enlarged, outside };

struct Tube {
    int n = 1;
    Vec x0{0, 0, 0};  // x(T)
    Vec v{0, 0, 0};   // v(T)
    double rho = 16;

    Vec xi() const {
        Vec c{0, 0, 0};
        for (int a = 0; a < n; ++a) c[a] = -0.5 * v[a];
        return c;
    }
    Cap cap() const { return Cap{xi(), 1 / std::sqrt(rho)}; }
    Vec direction() const { return gauss_map(xi(), n); }

    // |x - x(T) - t v(T)|, minimum image when a period is given
    double offset(const Vec& z, double L = 0) const {
        double t = z[n];
        Vec d{0, 0, 0};
        for (int a = 0; a < n; ++a) d[a] = wrap(z[a] - x0[a] - t * v[a], L);
        return norm(d, n);
    }
    TubeZone zone(const Vec& z, double delta, double L = 0) const {
        if (std::abs(z[n]) > rho) return TubeZone::outside;
        double d = offset(z, L);
        if (d <= std::sqrt(rho)) return TubeZone::core;
        if (d <= std::pow(rho, 0.5 + delta)) return TubeZone::enlarged;
        return TubeZone::outside;
    }
};

inline std::function<TubeZone(const Vec&)> tube_region(const Tube& T, double delta, double L = 0) {
    if (delta < 0 || delta >= 1) throw PreconditionError("tube_region: 0 <= delta < 1");
    return [T, delta, L](const Vec& z) { return T.zone(z, delta, L); };
}

// ---------- strips ----------

struct Strip {
    int n = 1;
    std::array<long, 2> lattice{0, 0};  // x(S) = (R/K) * lattice
    Vec v{0, 0, 0};
    double R = 64, K = 4;

    Vec x0() const {
        Vec x{0, 0, 0};
        for (int a = 0; a < n; ++a) x[a] = R / K * double(lattice[a]);
        return x;
    }
    double offset(const Vec& z, double L = 0) const {
        Vec x = x0(), d{0, 0, 0};
        for (int a = 0; a < n; ++a) d[a] = wrap(z[a] - x[a] - z[n] * v[a], L);
        return norm(d, n);
    }
    bool contains(const Vec& z, double L = 0) const {
        return std::abs(z[n]) <= R && offset(z, L) <= R / K;
    }
    bool contains_enlarged(const Vec& z, double L = 0) const {
        return std::abs(z[n]) <= R && offset(z, L) <= 20 * R / K;
    }
};

// min over |t| <= R of |x0 + t v|
inline double line_distance_to_origin(const Vec& x0, const Vec& v, double R, int n) {
    double vv = dot(v, v, n);
    double t = vv > 0 ? std::clamp(-dot(x0, v, n) / vv, -R, R) : 0.0;
    Vec p{0, 0, 0};
    for (int a = 0; a < n; ++a) p[a] = x0[a] + t * v[a];
    return norm(p, n);
}

inline std::vector<Strip> strips_for_cap(const Cap& tau, double R, double K, int n) {
    if (K < 1 || K > std::sqrt(R) * (1 + 1e-12)) throw PreconditionError("strips_for_cap: need 1 <= K <= R^{1/2}");
    Vec v{0, 0, 0};
    for (int a = 0; a < n; ++a) v[a] = -2 * tau.center[a];
    double w = R / K;
    long span = long(std::ceil((R + w + R * norm(v, n)) / w)) + 1;
    std::vector<Strip> out;
    for (long i = -span; i <= span; ++i)
        for (long j = (n == 2 ? -span : 0); j <= (n == 2 ? span : 0); ++j) {
            Strip S{n, {i, j}, v, R, K};
            // strip meets the product ball iff its core line comes within R + R/K
            if (line_distance_to_origin(S.x0(), v, R, n) <= R + w) out.push_back(S);
        }
    return out;
}

struct StripMap {
    Strip S;
    double Rtilde;
    Vec operator()(const Vec& z) const {
        int n = S.n;
        Vec x = S.x0(), r{0, 0, 0};
        for (int a = 0; a < n; ++a) r[a] = (z[a] - x[a] - z[n] * S.v[a]) / S.K;
        r[n] = z[n] / (S.K * S.K);
        return r;
    }
    Vec inverse(const Vec& w) const {
        int n = S.n;
        Vec x = S.x0(), z{0, 0, 0};
        z[n] = w[n] * S.K * S.K;
        for (int a = 0; a < n; ++a) z[a] = w[a] * S.K + x[a] + z[n] * S.v[a];
        return z;
    }
};

inline StripMap strip_rescaling(const Strip& S) { return StripMap{S, 20 * S.R / (S.K * S.K)}; }

// ---------- parallelepipeds ----------

struct Parallelepiped {
    int n = 1;
    Strip S;
    double Kt = 1;                       // K tilde
    std::array<long, 3> cube{0, 0, 0};  // image cube centre in units of Kt^2

    double side() const { return Kt * Kt; }
    // centre (x(P), t(P)) in original coordinates
    Vec center() const {
        Vec w{0, 0, 0};
        for (int a = 0; a <= n; ++a) w[a] = side() * double(cube[a]);
        Vec z = strip_rescaling(S).inverse(w);
        // x(P) is the position at t = 0 of the sheared axis
        for (int a = 0; a < n; ++a) z[a] -= z[n] * S.v[a];
        return z;
    }
    // membership via the rescaled cube, closed
    bool contains(const Vec& z) const {
        Vec w = strip_rescaling(S)(z);
        for (int a = 0; a <= n; ++a)
            if (std::abs(w[a] - side() * double(cube[a])) > 0.5 * side() * (1 + 1e-12)) return false;
        return true;
    }
};

inline std::vector<Parallelepiped> parallelepiped_cover(const Strip& S, double Kt) {
    if (Kt < 1) throw PreconditionError("parallelepiped_cover: K tilde >= 1");
    int n = S.n;
    double s = Kt * Kt;
    double half = S.R / (S.K * S.K);  // A_S(S) sits in [-half, half]^{n+1}
    long m = long(std::floor((half + 0.5 * s) / s + 1e-12));
    std::vector<Parallelepiped> out;
    for (long i = -m; i <= m; ++i)
        for (long j = (n == 2 ? -m : 0); j <= (n == 2 ? m : 0); ++j)
            for (long k = -m; k <= m; ++k) {
                Parallelepiped P{n, S, Kt, {i, n == 2 ? j : k, n == 2 ? k : 0}};
                out.push_back(P);
            }
    return out;
}

}  // namespace wplab
