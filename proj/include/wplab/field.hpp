#pragma once
// Grids, band-limited data, Fourier synthesis, norms, envelopes, weights.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>

#include "bump.hpp"
#include "fft.hpp"

namespace wplab {

struct Grid {
    int n = 1;
    double L = 2 * pi;
    int Nx = 16;
    double Tmin = 0, Tmax = 1;
    int Nt = 2;

    double dx() const { return L / Nx; }
    double dxi() const { return 2 * pi / L; }
    double dt() const { return (Tmax - Tmin) / (Nt - 1); }
    double x(int i) const { return -0.5 * L + i * dx(); }
    double t(int j) const { return Tmin + j * dt(); }
    size_t points() const { return size_t(ipow(Nx, n)); }
    // integer frequency for fft slot i
    int k_of(int i) const { return i < Nx / 2 ? i : i - Nx; }
    int slot_of(long k) const { return int(((k % Nx) + Nx) % Nx); }

    // band = largest frequency the grid must represent without aliasing
    void validate(double band = 2.0) const {
        if (n != 1 && n != 2) throw ConfigError("grid: n must be 1 or 2");
        if (!(L > 0)) throw ConfigError("grid: L must be positive");
        if (!is_pow2(Nx)) throw ConfigError("grid: Nx must be a power of two");
        if (Nx < 4 * L / (2 * pi) * band)
            throw ConfigError("grid: Nyquist bound Nx >= 4 L band/(2 pi) violated (Nx=" +
                              std::to_string(Nx) + ", L=" + std::to_string(L) + ")");
        if (!(Tmax > Tmin)) throw ConfigError("grid: empty time window");
        if (Nt < 2) throw ConfigError("grid: Nt must be >= 2");
    }

    // smallest valid grid with period >= 4R and time window [-R,R] sampled at dt
    static Grid for_ball(int n, double R, double dt_max, double period_unit = 0) {
        Grid g;
        g.n = n;
        g.L = 4 * R;
        if (period_unit > 0) g.L = std::ceil(4 * R / period_unit) * period_unit;
        g.Nx = int(std::bit_ceil(unsigned(std::ceil(4 * g.L / pi))));
        g.Tmin = -R;
        g.Tmax = R;
        g.Nt = int(std::ceil(2 * R / dt_max)) + 1;
        g.validate();
        return g;
    }
};

// multi-index helpers over Nx^n arrays, row-major, axis 0 slowest
inline std::array<int, 2> unflatten(size_t idx, int n, int Nx) {
    if (n == 1) return {int(idx), 0};
    return {int(idx / Nx), int(idx % Nx)};
}

struct Datum {
    Grid grid;
    Vec offset{0, 0, 0};     // lattice is (2 pi/L)(Z^n + offset)
    std::vector<cplx> coef;  // fft slot order

    Datum() = default;
    explicit Datum(const Grid& g) : grid(g), coef(g.points(), cplx(0)) {}

    Vec xi(size_t idx) const {
        auto s = unflatten(idx, grid.n, grid.Nx);
        Vec v{0, 0, 0};
        for (int a = 0; a < grid.n; ++a) v[a] = grid.dxi() * (grid.k_of(s[a]) + offset[a]);
        return v;
    }
    double xi2(size_t idx) const {
        Vec v = xi(idx);
        return dot(v, v, grid.n);
    }
    size_t index_of(std::array<long, 2> k) const {
        size_t i = grid.slot_of(k[0]);
        if (grid.n == 2) i = i * grid.Nx + grid.slot_of(k[1]);
        return i;
    }
    std::array<long, 2> k_of(size_t idx) const {
        auto s = unflatten(idx, grid.n, grid.Nx);
        return {grid.k_of(s[0]), grid.n == 2 ? grid.k_of(s[1]) : 0};
    }

    void set(std::array<long, 2> k, cplx a) {
        size_t i = index_of(k);
        if (k_of(i) != k) throw PreconditionError("datum: frequency index outside grid");
        if (std::sqrt(xi2(i)) >= 2.0) throw PreconditionError("datum: |xi| >= 2 not storable");
        coef[i] = a;
    }

    std::vector<size_t> support() const {
        std::vector<size_t> s;
        for (size_t i = 0; i < coef.size(); ++i)
            if (coef[i] != cplx(0)) s.push_back(i);
        return s;
    }
    double band_radius() const {
        double r = 0;
        for (size_t i = 0; i < coef.size(); ++i)
            if (coef[i] != cplx(0)) r = std::max(r, std::sqrt(xi2(i)));
        return r;
    }
    double cell() const { return std::pow(grid.L, -grid.n); }
    double norm() const {
        double s = 0;
        for (auto& c : coef) s += std::norm(c);
        return std::sqrt(s * cell());
    }
    Datum& operator+=(const Datum& o) {
        for (size_t i = 0; i < coef.size(); ++i) coef[i] += o.coef[i];
        return *this;
    }
    Datum& operator*=(cplx a) {
        for (auto& c : coef) c *= a;
        return *this;
    }
};

inline Datum operator-(Datum a, const Datum& b) {
    for (size_t i = 0; i < a.coef.size(); ++i) a.coef[i] -= b.coef[i];
    return a;
}

struct SpatialField {
    Grid grid;
    std::vector<cplx> values;
};

// values stored time-slice contiguous: values[j*points + i]
struct SpaceTimeField {
    Grid grid;
    std::vector<cplx> values;
    size_t points() const { return grid.points(); }
    cplx at(size_t i, int j) const { return values[size_t(j) * points() + i]; }
    const cplx* slice(int j) const { return values.data() + size_t(j) * points(); }
};

// U f(x,t) at one point by direct summation; the oracle for the fast path
inline cplx evaluate_direct(const Datum& f, const Vec& x, double t) {
    cplx s = 0;
    int n = f.grid.n;
    for (size_t i = 0; i < f.coef.size(); ++i) {
        if (f.coef[i] == cplx(0)) continue;
        Vec xi = f.xi(i);
        double ph = dot(x, xi, n) + t * dot(xi, xi, n);
        s += f.coef[i] * std::polar(1.0, ph);
    }
    return s * f.cell();
}

// one inverse DFT per slice; writes Nx^n samples at x_j = -L/2 + j dx
inline void synthesize_into(const Datum& f, double t, cplx* out) {
    const Grid& g = f.grid;
    int n = g.n;
    size_t P = g.points();
    std::vector<cplx> buf(P, cplx(0));
    double x0 = -0.5 * g.L;
    for (size_t i = 0; i < P; ++i) {
        if (f.coef[i] == cplx(0)) continue;
        Vec xi = f.xi(i);
        double sx = 0;
        for (int a = 0; a < n; ++a) sx += xi[a];
        buf[i] = f.coef[i] * std::polar(1.0, t * dot(xi, xi, n) + x0 * sx);
    }
    fft::transform(n, g.Nx, +1, buf.data(), out);
    double c = f.cell();
    bool shifted = false;
    for (int a = 0; a < n; ++a) shifted |= f.offset[a] != 0;
    if (!shifted) {
        for (size_t i = 0; i < P; ++i) out[i] *= c;
        return;
    }
    // off-lattice shift: the x0 phase above used the full xi; undo for the
    // e^{2 pi i jk/N} kernel by a spatial modulation with the offset only
    for (size_t i = 0; i < P; ++i) {
        auto s = unflatten(i, n, g.Nx);
        double ph = 0;
        for (int a = 0; a < n; ++a) ph += s[a] * g.dx() * g.dxi() * f.offset[a];
        out[i] *= c * std::polar(1.0, ph);
    }
}

inline SpatialField synthesize(const Datum& f, double t) {
    f.grid.validate();
    SpatialField F{f.grid, std::vector<cplx>(f.grid.points())};
    synthesize_into(f, t, F.values.data());
    return F;
}

// ---------- weights ----------

struct Weight {
    enum class Body { ball, box } body = Body::ball;
    Vec half{1, 1, 1};  // radius (ball) or half-widths (box)
    Vec center{0, 0, 0};
    int dim = 2;
    double N = 100;

    // Minkowski gauge of z - center
    double gauge(const Vec& z) const {
        Vec d{0, 0, 0};
        for (int a = 0; a < dim; ++a) d[a] = (z[a] - center[a]) / half[a];
        return body == Body::ball ? norm(d, dim) : norm_inf(d, dim);
    }
    double operator()(const Vec& z) const { return std::pow(1.0 + gauge(z), -N); }
};

inline Weight adapted_weight(Weight::Body body, const Vec& half, const Vec& center, int dim,
                             double N = 100) {
    if (N < 1) throw PreconditionError("weight: decay order must be >= 1");
    for (int a = 0; a < dim; ++a)
        if (!(half[a] > 0)) throw PreconditionError("weight: degenerate body");
    return Weight{body, half, center, dim, N};
}

// ---------- norms ----------

struct Region {
    enum class Kind { all, box, weight, ball } kind = Kind::all;
    Vec lo{0, 0, 0}, hi{0, 0, 0};
    Weight w;
    int sdim = 0;  // ball: leading euclidean coordinates
    double radius = 0;

    static Region all() { return {}; }
    static Region box(Vec lo, Vec hi) { return {Kind::box, lo, hi, {}}; }
    static Region weighted(const Weight& w) { return {Kind::weight, {}, {}, w}; }
    // product-metric ball max(|x - c_x|, |t - c_t|) <= R; lo holds the centre
    static Region ball(int n, double R, Vec center = {0, 0, 0}) {
        Region r;
        r.kind = Kind::ball;
        r.lo = center;
        r.sdim = n;
        r.radius = R;
        return r;
    }

    bool contains(const Vec& z, int dim) const {
        if (kind == Kind::box) {
            for (int d = 0; d < dim; ++d)
                if (z[d] < lo[d] || z[d] > hi[d]) return false;
            return true;
        }
        if (kind == Kind::ball) {
            double s = 0;
            for (int d = 0; d < std::min(sdim, dim); ++d) s += (z[d] - lo[d]) * (z[d] - lo[d]);
            if (std::sqrt(s) > radius) return false;
            for (int d = sdim; d < dim; ++d)
                if (std::abs(z[d] - lo[d]) > radius) return false;
            return true;
        }
        return true;
    }
};

struct NormResult {
    double value = 0;
    bool empty = false;
};

namespace detail {

// accumulate |F|^p * weight over samples, calling sample(k) -> (z, |F|)
template <class Sample>
NormResult reduce_norm(size_t count, int dim, double p, const Region& r, double cell, Sample&& sample) {
    double acc = 0, mx = 0;
    size_t hit = 0;
    for (size_t k = 0; k < count; ++k) {
        auto [z, a] = sample(k);
        double w = 1;
        if (!r.contains(z, dim)) continue;
        if (r.kind == Region::Kind::weight) {
            w = r.w(z);
        }
        ++hit;
        if (std::isinf(p))
            mx = std::max(mx, a * (r.kind == Region::Kind::weight ? w : 1.0));
        else
            acc += std::pow(a, p) * w;
    }
    if (hit == 0) return {0, true};
    if (std::isinf(p)) return {mx, false};
    return {std::pow(acc * cell, 1.0 / p), false};
}

}  // namespace detail

inline NormResult lp_norm_checked(const SpatialField& F, double p, const Region& r = Region::all()) {
    if (p < 1) throw PreconditionError("lp_norm: p >= 1 required");
    const Grid& g = F.grid;
    return detail::reduce_norm(F.values.size(), g.n, p, r, std::pow(g.dx(), g.n), [&](size_t k) {
        auto s = unflatten(k, g.n, g.Nx);
        Vec z{g.x(s[0]), g.n == 2 ? g.x(s[1]) : 0.0, 0};
        return std::pair{z, std::abs(F.values[k])};
    });
}

inline NormResult lp_norm_checked(const SpaceTimeField& F, double p, const Region& r = Region::all()) {
    if (p < 1) throw PreconditionError("lp_norm: p >= 1 required");
    const Grid& g = F.grid;
    size_t P = F.points();
    return detail::reduce_norm(F.values.size(), g.n + 1, p, r, std::pow(g.dx(), g.n) * g.dt(),
                               [&](size_t k) {
                                   size_t i = k % P;
                                   int j = int(k / P);
                                   auto s = unflatten(i, g.n, g.Nx);
                                   Vec z{g.x(s[0]), 0, 0};
                                   if (g.n == 2) z[1] = g.x(s[1]);
                                   z[g.n] = g.t(j);
                                   return std::pair{z, std::abs(F.values[k])};
                               });
}

template <class F>
double lp_norm(const F& field, double p, const Region& r = Region::all()) {
    return lp_norm_checked(field, p, r).value;
}

inline double sobolev_norm(const Datum& f, double s) {
    if (s < 0) throw PreconditionError("sobolev_norm: s >= 0 required");
    double acc = 0;
    for (size_t i = 0; i < f.coef.size(); ++i)
        if (f.coef[i] != cplx(0)) acc += std::pow(1 + f.xi2(i), s) * std::norm(f.coef[i]);
    return std::sqrt(acc * f.cell());
}

// annuli A(2^k) = {2^{k-1} <= |xi| < 2^k}, k >= 0; frequencies below 1/2 only
// enter through the plain L^2 term
inline double littlewood_paley_norm(const Datum& f, double s) {
    if (s < 0) throw PreconditionError("littlewood_paley_norm: s >= 0 required");
    std::map<int, double> pieces;
    for (size_t i = 0; i < f.coef.size(); ++i) {
        if (f.coef[i] == cplx(0)) continue;
        double r = std::sqrt(f.xi2(i));
        if (r < 0.5) continue;
        int k = int(std::floor(std::log2(r))) + 1;
        // guard the log at exact powers of two
        while (std::ldexp(1.0, k - 1) > r) --k;
        while (r >= std::ldexp(1.0, k)) ++k;
        pieces[k] += std::norm(f.coef[i]) * f.cell();
    }
    double acc = 0;
    for (auto& [k, m] : pieces) acc += std::pow(2.0, 2 * k * s) * m;
    return std::sqrt(acc) + f.norm();
}

// ---------- locally constant envelopes ----------

using CubeKey = std::array<long, 3>;

struct Envelope {
    double M = 1;
    int dim = 1;
    std::map<CubeKey, double> a;  // lattice cube centred at M*key

    // sum of a_Q chi_Q(z) over the closed cubes containing z
    double cover(const Vec& z) const {
        double s = 0;
        std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int d = 0; d < dim; ++d) {
            lo[d] = long(std::ceil(z[d] / M - 0.5 - 1e-12));
            hi[d] = long(std::floor(z[d] / M + 0.5 + 1e-12));
        }
        for (long i = lo[0]; i <= hi[0]; ++i)
            for (long j = lo[1]; j <= hi[1]; ++j)
                for (long k = lo[2]; k <= hi[2]; ++k)
                    if (auto it = a.find({i, j, k}); it != a.end()) s += it->second;
        return s;
    }
};

namespace detail {

template <class Sample>
Envelope envelope_from(size_t count, int dim, double M, Sample&& sample) {
    Envelope E;
    E.M = M;
    E.dim = dim;
    for (size_t k = 0; k < count; ++k) {
        auto [z, v] = sample(k);
        std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
        for (int d = 0; d < dim; ++d) {
            lo[d] = long(std::ceil(z[d] / M - 0.5 - 1e-12));
            hi[d] = long(std::floor(z[d] / M + 0.5 + 1e-12));
        }
        for (long i = lo[0]; i <= hi[0]; ++i)
            for (long j = lo[1]; j <= hi[1]; ++j)
                for (long l = lo[2]; l <= hi[2]; ++l) {
                    double& slot = E.a[{i, j, l}];
                    slot = std::max(slot, v);
                }
    }
    return E;
}

}  // namespace detail

inline Envelope locally_constant_envelope(const SpatialField& F, double M) {
    const Grid& g = F.grid;
    if (M < g.dx()) throw ConfigError("envelope: cube side below grid spacing");
    return detail::envelope_from(F.values.size(), g.n, M, [&](size_t k) {
        auto s = unflatten(k, g.n, g.Nx);
        Vec z{g.x(s[0]), g.n == 2 ? g.x(s[1]) : 0.0, 0};
        return std::pair{z, std::abs(F.values[k])};
    });
}

inline Envelope locally_constant_envelope(const SpaceTimeField& F, double M) {
    const Grid& g = F.grid;
    if (M < g.dx() || M < g.dt()) throw ConfigError("envelope: cube side below grid spacing");
    size_t P = F.points();
    return detail::envelope_from(F.values.size(), g.n + 1, M, [&](size_t k) {
        size_t i = k % P;
        auto s = unflatten(i, g.n, g.Nx);
        Vec z{g.x(s[0]), 0, 0};
        if (g.n == 2) z[1] = g.x(s[1]);
        z[g.n] = g.t(int(k / P));
        return std::pair{z, std::abs(F.values[k])};
    });
}

// eta_0 with Fourier transform 1 on [-1,1]^d, 0 off [-2,2]^d, tensor form.
// One axis: eta1(w) = (1/pi) int_0^2 h(s) cos(ws) ds.
namespace mollifier {

inline double eta1(double w) {
    using boost::math::quadrature::gauss_kronrod;
    auto h = [&](double s) { return bump::cutoff(s, 1.0, 2.0) * std::cos(w * s); };
    double a = gauss_kronrod<double, 61>::integrate(h, 0.0, 1.0, 0, 1e-14);
    double b = gauss_kronrod<double, 61>::integrate(h, 1.0, 2.0, 8, 1e-14);
    return (a + b) / pi;
}

// tabulated sup_{|u-w|<=1} |eta1(u)|, even in w
struct Table {
    double h = 1.0 / 64, W = 64;
    std::vector<double> raw, sup;
    Table() {
        int N = int(W / h) + int(2 / h) + 1;
        raw.resize(N);
        for (int i = 0; i < N; ++i) raw[i] = std::abs(eta1(i * h));
        int S = int(W / h) + 1, r = int(1 / h);
        sup.resize(S);
        for (int i = 0; i < S; ++i) {
            double m = 0;
            for (int j = i - r; j <= i + r; ++j) m = std::max(m, raw[std::abs(j)]);
            sup[i] = m;
        }
    }
};

inline const Table& table() {
    static const Table t;
    return t;
}

// eta(z) = sup_{|w-z|_inf <= 1} |eta_0(w)| = prod over axes of the 1d sup
inline double eta(const Vec& z, int dim) {
    const auto& T = table();
    double v = 1;
    for (int d = 0; d < dim; ++d) {
        double a = std::abs(z[d]);
        if (a >= T.W) return 0.0;
        v *= T.sup[size_t(std::lround(a / T.h))];
    }
    return v;
}

// eta_M = M^{-d} sup_{|w-z|_inf <= M} |eta_0(w)|^s, separable as above
inline double eta_M(const Vec& z, int dim, double M, double s) {
    double v = std::pow(M, -dim);
    for (int d = 0; d < dim; ++d) {
        double a = std::abs(z[d]);
        // sup of |eta1| over [a-M, a+M]
        double lo = std::max(0.0, a - M), hi = a + M;
        const auto& T = table();
        if (lo >= T.W) return 0.0;
        double m = 0;
        for (double u = lo; u <= std::min(hi, T.W); u += T.h)
            m = std::max(m, T.raw[size_t(std::lround(u / T.h))]);
        v *= std::pow(m, s);
    }
    return v;
}

}  // namespace mollifier

// ---------- snapshot i/o ----------

namespace snapshot {

static_assert(std::endian::native == std::endian::little, "snapshot i/o assumes little-endian host");

inline void write(const SpaceTimeField& F, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("snapshot: cannot open " + path);
    const Grid& g = F.grid;
    auto put_i = [&](int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_d = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_i(g.n);
    put_d(g.L);
    put_i(g.Nx);
    put_i(g.Nt);
    put_d(g.Tmin);
    put_d(g.Tmax);
    // row-major over (x..., t): time varies fastest
    size_t P = F.points();
    std::vector<float> row(2 * size_t(g.Nt));
    for (size_t i = 0; i < P; ++i) {
        for (int j = 0; j < g.Nt; ++j) {
            cplx v = F.at(i, j);
            row[2 * j] = float(v.real());
            row[2 * j + 1] = float(v.imag());
        }
        os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * 4));
    }
    if (!os) throw ConfigError("snapshot: write failed " + path);
}

inline SpaceTimeField read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("snapshot: cannot open " + path);
    auto get_i = [&] {
        int64_t v;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    auto get_d = [&] {
        double v;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    Grid g;
    g.n = int(get_i());
    g.L = get_d();
    g.Nx = int(get_i());
    g.Nt = int(get_i());
    g.Tmin = get_d();
    g.Tmax = get_d();
    if (!is || g.n < 1 || g.n > 2 || g.Nx < 1 || g.Nt < 2) throw ConfigError("snapshot: bad header");
    SpaceTimeField F{g, std::vector<cplx>(g.points() * size_t(g.Nt))};
    size_t P = F.points();
    std::vector<float> row(2 * size_t(g.Nt));
    for (size_t i = 0; i < P; ++i) {
        is.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 4));
        for (int j = 0; j < g.Nt; ++j) F.values[size_t(j) * P + i] = cplx(row[2 * j], row[2 * j + 1]);
    }
    if (!is) throw ConfigError("snapshot: truncated " + path);
    return F;
}

}  // namespace snapshot

}  // namespace wplab
