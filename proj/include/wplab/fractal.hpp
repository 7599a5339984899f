#pragma once
// Lattice cube families: densities, vertical line test, pigeonholing,
// multiplicity counting.

#include <fstream>
#include <set>
#include <sstream>

#include "geometry.hpp"

namespace wplab {

using CubeIndex = std::array<long, 3>;  // centre = M * index; last used slot is time

struct CubeFamily {
    int n = 1;
    double M = 1;
    double R = 1;
    std::set<CubeIndex> cubes;

    int dim() const { return n + 1; }
    Vec center(const CubeIndex& c) const {
        Vec z{0, 0, 0};
        for (int a = 0; a <= n; ++a) z[a] = M * double(c[a]);
        return z;
    }
    bool fits(const CubeIndex& c) const {
        for (int a = 0; a <= n; ++a)
            if (std::abs(M * double(c[a])) + 0.5 * M > R * (1 + 1e-12)) return false;
        return true;
    }
    void insert(const CubeIndex& c) {
        if (!fits(c)) throw PreconditionError("cube family: cube leaves B(0,R)");
        cubes.insert(c);
    }
    size_t size() const { return cubes.size(); }
};

struct DensityReport {
    double alpha = 1;
    double value = 0;
    Vec center{0, 0, 0};
    double radius = 0;
    size_t count = 0;  // cubes inside the witness
};

// #{Q inside the closed max-metric ball} / r^alpha
inline double density_at(const CubeFamily& F, const Vec& c, double r, double alpha) {
    size_t k = 0;
    for (auto& q : F.cubes) {
        Vec z = F.center(q);
        bool in = true;
        for (int a = 0; a <= F.n; ++a) in &= std::abs(z[a] - c[a]) + 0.5 * F.M <= r * (1 + 1e-12);
        k += in;
    }
    return double(k) / std::pow(r, alpha);
}

namespace detail {

// occupancy prefix sums over the lattice bounding box
struct Occupancy {
    int d = 2;
    std::array<long, 3> lo{0, 0, 0}, ext{1, 1, 1};
    std::vector<int32_t> S;  // (ext+1)^d inclusive prefix sums

    explicit Occupancy(const CubeFamily& F) : d(F.dim()) {
        std::array<long, 3> hi{0, 0, 0};
        lo = {LONG_MAX, LONG_MAX, LONG_MAX};
        hi = {LONG_MIN, LONG_MIN, LONG_MIN};
        for (auto& c : F.cubes)
            for (int a = 0; a < d; ++a) {
                lo[a] = std::min(lo[a], c[a]);
                hi[a] = std::max(hi[a], c[a]);
            }
        for (int a = 0; a < d; ++a) ext[a] = hi[a] - lo[a] + 1;
        for (int a = d; a < 3; ++a) {
            lo[a] = 0;
            ext[a] = 1;
        }
        S.assign(size_t((ext[0] + 1) * (ext[1] + 1) * (ext[2] + 1)), 0);
        for (auto& c : F.cubes) {
            std::array<long, 3> p{0, 0, 0};
            for (int a = 0; a < d; ++a) p[a] = c[a] - lo[a] + 1;
            S[at(p[0], p[1], p[2])] += 1;
        }
        for (long i = 1; i <= ext[0]; ++i)
            for (long j = 0; j <= ext[1]; ++j)
                for (long k = 0; k <= ext[2]; ++k) S[at(i, j, k)] += S[at(i - 1, j, k)];
        for (long i = 0; i <= ext[0]; ++i)
            for (long j = 1; j <= ext[1]; ++j)
                for (long k = 0; k <= ext[2]; ++k) S[at(i, j, k)] += S[at(i, j - 1, k)];
        for (long i = 0; i <= ext[0]; ++i)
            for (long j = 0; j <= ext[1]; ++j)
                for (long k = 1; k <= ext[2]; ++k) S[at(i, j, k)] += S[at(i, j, k - 1)];
    }
    size_t at(long i, long j, long k) const { return size_t((i * (ext[1] + 1) + j) * (ext[2] + 1) + k); }

    // count in cells [a, a+w) per axis (prefix coordinates), clamped
    long box(std::array<long, 3> a, std::array<long, 3> b) const {
        long s = 0;
        for (int m = 0; m < 8; ++m) {
            std::array<long, 3> p;
            int sign = 1;
            bool skip = false;
            for (int ax = 0; ax < 3; ++ax) {
                bool upper = (m >> ax) & 1;
                if (ax >= d && !upper) {
                    skip = true;
                    break;
                }
                p[ax] = upper ? b[ax] : a[ax];
                if (!upper) sign = -sign;
            }
            if (skip) continue;
            s += sign * long(S[at(p[0], p[1], p[2])]);
        }
        return s;
    }

    // best window of w cells per axis: (count, lower lattice index)
    std::pair<long, std::array<long, 3>> best(long w) const {
        std::array<long, 3> span{1, 1, 1};
        for (int a = 0; a < d; ++a) span[a] = std::max(1L, ext[a] - w + 1);
        long bc = -1;
        std::array<long, 3> arg{0, 0, 0};
        for (long i = 0; i < span[0]; ++i)
            for (long j = 0; j < span[1]; ++j)
                for (long k = 0; k < span[2]; ++k) {
                    std::array<long, 3> a{i, j, k}, b{0, 0, 0};
                    for (int ax = 0; ax < 3; ++ax) b[ax] = ax < d ? std::min(a[ax] + w, ext[ax]) : 1;
                    long c = box(a, b);
                    if (c > bc) {
                        bc = c;
                        arg = a;
                    }
                }
        return {bc, arg};
    }
};

}  // namespace detail

// Exact sup over max-metric balls of radius >= M/2. A ball of radius r holds
// exactly the cubes whose centres sit in a window of floor(2r/M) lattice cells
// per axis, so only r = wM/2 (w = 1, 2, ...) can attain the sup.
inline DensityReport fractal_density(const CubeFamily& F, double alpha) {
    if (F.cubes.empty()) throw PreconditionError("fractal_density: empty family");
    if (alpha < 1 || alpha > F.n + 2) throw PreconditionError("fractal_density: alpha outside [1, n+2]");
    detail::Occupancy occ(F);
    long W = 1;
    for (int a = 0; a < F.dim(); ++a) W = std::max(W, occ.ext[a]);
    std::map<long, std::pair<long, std::array<long, 3>>> memo;
    auto count = [&](long w) -> const std::pair<long, std::array<long, 3>>& {
        auto it = memo.find(w);
        if (it == memo.end()) it = memo.emplace(w, occ.best(w)).first;
        return it->second;
    };
    auto ratio = [&](long w) { return double(count(w).first) / std::pow(0.5 * F.M * double(w), alpha); };
    long bw = 1;
    double bv = ratio(1);
    // branch and bound on w: count is nondecreasing, r^alpha increasing
    std::vector<std::pair<long, long>> stack{{1, W}};
    while (!stack.empty()) {
        auto [a, b] = stack.back();
        stack.pop_back();
        for (long w : {a, b}) {
            double v = ratio(w);
            if (v > bv || (v == bv && w < bw)) {
                bv = v;
                bw = w;
            }
        }
        if (b - a <= 1) continue;
        double bound = double(count(b).first) / std::pow(0.5 * F.M * double(a), alpha);
        if (bound <= bv) continue;
        long m = (a + b) / 2;
        stack.push_back({m, b});
        stack.push_back({a, m});
    }
    DensityReport rep;
    rep.alpha = alpha;
    rep.value = bv;
    rep.radius = 0.5 * F.M * double(bw);
    auto [c, lo] = count(bw);
    rep.count = size_t(c);
    for (int a = 0; a < F.dim(); ++a)
        rep.center[a] = F.M * (double(occ.lo[a] + lo[a]) + 0.5 * double(bw - 1));
    return rep;
}

// brute force over every window position and size; desk-scale oracle
inline double fractal_density_brute(const CubeFamily& F, double alpha) {
    detail::Occupancy occ(F);
    long W = 1;
    for (int a = 0; a < F.dim(); ++a) W = std::max(W, occ.ext[a]);
    double best = 0;
    for (long w = 1; w <= W; ++w) {
        std::array<long, 3> span{1, 1, 1};
        for (int a = 0; a < F.dim(); ++a) span[a] = occ.ext[a] + w;
        for (long i = -w; i < span[0]; ++i)
            for (long j = (F.dim() > 1 ? -w : 0); j < (F.dim() > 1 ? span[1] : 1); ++j)
                for (long k = (F.dim() > 2 ? -w : 0); k < (F.dim() > 2 ? span[2] : 1); ++k) {
                    Vec c{0, 0, 0};
                    std::array<long, 3> q{i, j, k};
                    for (int a = 0; a < F.dim(); ++a) c[a] = F.M * (double(occ.lo[a] + q[a]) + 0.5 * double(w - 1));
                    best = std::max(best, density_at(F, c, 0.5 * F.M * double(w), alpha));
                }
    }
    return best;
}

inline bool vertical_line_test(const CubeFamily& F) {
    std::set<std::array<long, 2>> cols;
    for (auto& c : F.cubes) {
        std::array<long, 2> col{c[0], F.n == 2 ? c[1] : 0};
        if (!cols.insert(col).second) return false;
    }
    return true;
}

// ---------- pigeonholing ----------

struct PigeonholeResult {
    long exponent = 0;           // selected class [2^j, 2^{j+1})
    std::vector<size_t> members;
    size_t classes_used = 0;
    size_t class_bound = 0;      // ceil(log2(R^2)) + 1
};

inline long dyadic_class(double v) {
    int e;
    double m = std::frexp(v, &e);  // v = m 2^e, m in [1/2,1)
    (void)m;
    return long(e - 1);
}

inline size_t pigeon_bound(double R) { return size_t(std::ceil(std::log2(R * R) - 1e-12)) + 1; }

// values in [M/R, M R]; weights optional (empty = counting)
inline PigeonholeResult dyadic_pigeonhole(const std::vector<double>& values, double M, double R,
                                          const std::vector<double>& weights = {}) {
    if (values.empty()) throw PreconditionError("dyadic_pigeonhole: empty input");
    for (double v : values)
        if (!(v > 0) || v < M / R * (1 - 1e-12) || v > M * R * (1 + 1e-12))
            throw PreconditionError("dyadic_pigeonhole: value outside [M/R, MR]");
    std::map<long, std::vector<size_t>> cls;
    for (size_t i = 0; i < values.size(); ++i) cls[dyadic_class(values[i])].push_back(i);
    PigeonholeResult r;
    r.classes_used = cls.size();
    r.class_bound = pigeon_bound(R);
    double best = -1;
    for (auto& [j, mem] : cls) {
        double s = 0;
        for (size_t i : mem) s += weights.empty() ? 1.0 : weights[i];
        if (s > best) {
            best = s;
            r.exponent = j;
            r.members = mem;
        }
    }
    return r;
}

struct HolderClass {
    long exponent;
    std::vector<size_t> members;
    double factor;  // (sum H^q)^{1/q} N^{1/p-1/q} / (sum H^p)^{1/p}
};

// reverse Hoelder on each dyadic class: (sum H^q)^{1/q} <= factor N^{-(1/p-1/q)} (sum H^p)^{1/p}
inline std::vector<HolderClass> reverse_holder_partition(const std::vector<double>& H, double p, double q,
                                                          double M, double R) {
    if (!(1 <= p && p <= q)) throw PreconditionError("reverse_holder_partition: need 1 <= p <= q");
    for (double v : H)
        if (!(v > 0) || v < M / R * (1 - 1e-12) || v > M * R * (1 + 1e-12))
            throw PreconditionError("reverse_holder_partition: value outside [M/R, MR]");
    std::map<long, std::vector<size_t>> cls;
    for (size_t i = 0; i < H.size(); ++i) cls[dyadic_class(H[i])].push_back(i);
    std::vector<HolderClass> out;
    for (auto& [j, mem] : cls) {
        double sp = 0, sq = 0;
        for (size_t i : mem) {
            sp += std::pow(H[i], p);
            sq += std::pow(H[i], q);
        }
        double N = double(mem.size());
        double f = std::pow(sq, 1 / q) * std::pow(N, 1 / p - 1 / q) / std::pow(sp, 1 / p);
        out.push_back({j, mem, f});
    }
    return out;
}

// ---------- multiplicity ----------

// closed cube (centre c, side M) meets the closed strip
inline bool cube_meets_strip(const Vec& c, double M, const Strip& S) {
    int n = S.n;
    double h = 0.5 * M;
    double ta = std::max(c[n] - h, -S.R), tb = std::min(c[n] + h, S.R);
    if (ta > tb) return false;
    Vec x0 = S.x0();
    double w = S.R / S.K;
    if (n == 1) {
        // distance between [c-h, c+h] and x0 + t v is |c - x0 - t v| - h, linear in t
        double u0 = c[0] - x0[0] - ta * S.v[0], u1 = c[0] - x0[0] - tb * S.v[0];
        double m = (u0 > 0) == (u1 > 0) && u0 != 0 && u1 != 0 ? std::min(std::abs(u0), std::abs(u1)) : 0.0;
        return m <= w + h + 1e-12 * (1 + w);
    }
    // distance from the moving centre to the square is convex in t
    auto dist = [&](double t) {
        double s = 0;
        for (int a = 0; a < n; ++a) {
            double p = x0[a] + t * S.v[a];
            double e = std::max(0.0, std::abs(p - c[a]) - h);
            s += e * e;
        }
        return std::sqrt(s);
    };
    double a = ta, b = tb;
    for (int it = 0; it < 200 && b - a > 1e-13 * (1 + std::abs(a)); ++it) {
        double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (dist(m1) <= dist(m2))
            b = m2;
        else
            a = m1;
    }
    double m = std::min({dist(a), dist(b), dist(ta), dist(tb)});
    return m <= w + 1e-12 * (1 + w);
}

// closed cube meets parallelepiped: per-axis linear constraints in t
inline bool cube_meets_piped(const Vec& c, double M, const Parallelepiped& P) {
    int n = P.n;
    const Strip& S = P.S;
    double h = 0.5 * M, s = P.side(), K = S.K;
    double ta = c[n] - h, tb = c[n] + h;
    double tc = K * K * s * double(P.cube[n]);
    ta = std::max(ta, tc - K * K * s / 2);
    tb = std::min(tb, tc + K * K * s / 2);
    Vec x0 = S.x0();
    for (int a = 0; a < n && ta <= tb; ++a) {
        // |c_a - x0_a - K s cube_a - t v_a| <= h + K s / 2
        double base = c[a] - x0[a] - K * s * double(P.cube[a]);
        double lim = h + K * s / 2;
        double v = S.v[a];
        if (v == 0) {
            if (std::abs(base) > lim * (1 + 1e-12)) return false;
            continue;
        }
        double t1 = (base - lim) / v, t2 = (base + lim) / v;
        if (t1 > t2) std::swap(t1, t2);
        ta = std::max(ta, t1 - 1e-12 * (1 + std::abs(t1)));
        tb = std::min(tb, t2 + 1e-12 * (1 + std::abs(t2)));
    }
    return ta <= tb;
}

struct MultiplicityTable {
    std::vector<size_t> per_cube;   // #S(Q)
    std::vector<size_t> per_strip;  // #Q(S)
    std::vector<size_t> per_piped;  // #Q(P)
    size_t incidences_cubes() const {
        size_t s = 0;
        for (auto v : per_cube) s += v;
        return s;
    }
    size_t incidences_strips() const {
        size_t s = 0;
        for (auto v : per_strip) s += v;
        return s;
    }
};

inline MultiplicityTable multiplicity_counts(const CubeFamily& F, const std::vector<Strip>& strips,
                                             const std::vector<Parallelepiped>& pipeds) {
    MultiplicityTable T;
    std::vector<CubeIndex> cs(F.cubes.begin(), F.cubes.end());
    T.per_cube.assign(cs.size(), 0);
    T.per_strip.assign(strips.size(), 0);
    T.per_piped.assign(pipeds.size(), 0);
    std::vector<std::vector<char>> hit(strips.size(), std::vector<char>(cs.size(), 0));
    parallel_for(strips.size(), [&](size_t s) {
        for (size_t q = 0; q < cs.size(); ++q) hit[s][q] = cube_meets_strip(F.center(cs[q]), F.M, strips[s]);
    });
    for (size_t s = 0; s < strips.size(); ++s)
        for (size_t q = 0; q < cs.size(); ++q)
            if (hit[s][q]) {
                ++T.per_strip[s];
                ++T.per_cube[q];
            }
    parallel_for(pipeds.size(), [&](size_t p) {
        size_t k = 0;
        for (auto& c : cs) k += cube_meets_piped(F.center(c), F.M, pipeds[p]);
        T.per_piped[p] = k;
    });
    return T;
}

struct DensityComparison {
    double lhs = 0, rhs = 0, ratio = 0;
    size_t min_piped = 0;
    CubeFamily rescaled;
};

inline DensityComparison density_comparison_check(const CubeFamily& F, const Strip& S,
                                                  const std::vector<Parallelepiped>& pipeds, double alpha) {
    auto T = multiplicity_counts(F, {}, pipeds);
    DensityComparison d;
    d.rescaled.n = F.n;
    size_t mn = SIZE_MAX;
    double side = 0, reach = 0;
    for (size_t i = 0; i < pipeds.size(); ++i) {
        if (T.per_piped[i] == 0) continue;
        mn = std::min(mn, T.per_piped[i]);
        side = pipeds[i].side();
        CubeIndex c{pipeds[i].cube[0], pipeds[i].cube[1], pipeds[i].cube[2]};
        for (int a = 0; a <= F.n; ++a) reach = std::max(reach, side * (std::abs(double(c[a])) + 0.5));
        d.rescaled.cubes.insert(c);
    }
    if (d.rescaled.cubes.empty()) throw PreconditionError("density_comparison_check: no parallelepiped meets a cube");
    d.rescaled.M = side;
    d.rescaled.R = reach;
    d.min_piped = mn;
    d.lhs = double(mn) * fractal_density(d.rescaled, alpha).value;
    d.rhs = std::pow(S.K, 1 + alpha) * fractal_density(F, alpha).value;
    d.ratio = d.lhs / d.rhs;
    return d;
}

// ---------- text format ----------

inline void write_cubes(const CubeFamily& F, std::ostream& os) {
    os << "# cube family: n=" << F.n << " M=" << F.M << " R=" << F.R << "\n";
    os.precision(17);
    for (auto& c : F.cubes) {
        Vec z = F.center(c);
        for (int a = 0; a <= F.n; ++a) os << z[a] << ' ';
        os << F.M << '\n';
    }
}

// R is taken as the smallest radius holding every cube unless given
inline CubeFamily read_cubes(std::istream& is, int n, double R = -1) {
    CubeFamily F;
    F.n = n;
    F.M = -1;
    std::string line;
    std::vector<std::pair<Vec, double>> rows;
    while (std::getline(is, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ss(line);
        std::vector<double> v;
        for (double x; ss >> x;) v.push_back(x);
        if (v.empty()) continue;
        if (int(v.size()) != n + 2) throw ConfigError("cube file: expected " + std::to_string(n + 2) + " numbers per line");
        Vec z{0, 0, 0};
        for (int a = 0; a <= n; ++a) z[a] = v[a];
        rows.push_back({z, v[n + 1]});
    }
    if (rows.empty()) throw ConfigError("cube file: no cubes");
    F.M = rows[0].second;
    double reach = 0;
    for (auto& [z, m] : rows) {
        if (m != F.M) throw ConfigError("cube file: mixed cube sides");
        CubeIndex c{0, 0, 0};
        for (int a = 0; a <= n; ++a) {
            double u = z[a] / F.M;
            c[a] = std::lround(u);
            if (std::abs(u - double(c[a])) > 1e-9) throw ConfigError("cube file: centre off the M-lattice");
            reach = std::max(reach, std::abs(z[a]) + 0.5 * F.M);
        }
        F.cubes.insert(c);
    }
    F.R = R > 0 ? R : reach;
    for (auto& c : F.cubes)
        if (!F.fits(c)) throw ConfigError("cube file: cube outside B(0,R)");
    return F;
}

}  // namespace wplab
