#pragma once
// Experiment runner: scenario data, ratio sweeps over dyadic R, growth fits,
// reports, key=value config.

#include <boost/math/quadrature/gauss.hpp>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

#include "broadnarrow.hpp"
#include "fractal.hpp"
#include "json.hpp"
#include "wavepacket.hpp"

namespace wplab {

struct Scenario {
    std::string data = "random_band";  // single_packet | packet_superposition | single_mode | random_band | focusing_bump
    int n = 1;
    double K = 8;
    double alpha = 1;
    uint64_t seed = 1;
    int packets = 8;
    double q = 0;  // 0: experiment default
    std::string family = "graph";
    double M = 1;
    double xi = 0;                      // single packet frequency, first axis
    double band_lo = 0.5, band_hi = 1;  // random_band support: band_lo <= |xi| < band_hi
};

struct Row {
    double R, lhs, rhs, ratio;
};

struct RatioTable {
    std::vector<Row> rows;
    std::map<std::string, std::string> meta;
    void add(double R, double lhs, double rhs) { rows.push_back({R, lhs, rhs, lhs / rhs}); }
};

// ---------- config ----------

using Config = std::map<std::string, std::string>;

inline Config parse_config(std::istream& is) {
    Config c;
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key=value");
        std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (k.empty()) throw ConfigError("config line " + std::to_string(no) + ": empty key");
        c[k] = v;
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path);
    return parse_config(f);
}

inline double parse_number(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " is not a number: '" + v + "'");
    }
}

inline void apply_config(const Config& c, Scenario& s) {
    for (auto& [k, v] : c) {
        if (k == "data") s.data = v;
        else if (k == "n") s.n = int(parse_number(k, v));
        else if (k == "K") s.K = parse_number(k, v);
        else if (k == "alpha") s.alpha = parse_number(k, v);
        else if (k == "seed") s.seed = uint64_t(parse_number(k, v));
        else if (k == "packets") s.packets = int(parse_number(k, v));
        else if (k == "q") s.q = parse_number(k, v);
        else if (k == "family") s.family = v;
        else if (k == "M") s.M = parse_number(k, v);
        else if (k == "xi") s.xi = parse_number(k, v);
        else if (k == "band_lo") s.band_lo = parse_number(k, v);
        else if (k == "band_hi") s.band_hi = parse_number(k, v);
        else if (k == "threads" || k == "experiment" || k == "rmin" || k == "rmax" || k == "out") continue;
        else throw ConfigError("config: unknown key '" + k + "'");
    }
    if (s.n != 1 && s.n != 2) throw ConfigError("config: n must be 1 or 2");
}

// ---------- scenario data ----------

inline std::mt19937_64 scenario_rng(const Scenario& s, double R) {
    return std::mt19937_64(s.seed * 0x9E3779B97F4A7C15ULL + uint64_t(R * 1024));
}

inline Datum random_in(const Grid& g, const std::function<bool(const Vec&)>& in, std::mt19937_64& rng) {
    Datum f(g);
    std::normal_distribution<double> N(0, 1);
    for (size_t i = 0; i < f.coef.size(); ++i)
        if (in(f.xi(i))) {
            double a = N(rng), b = N(rng);
            f.coef[i] = {a, b};
        }
    double m = f.norm();
    if (m == 0) throw ConfigError("random datum: no lattice frequency in the support");
    f *= 1 / m;
    return f;
}

inline Datum random_in_cap(const Grid& g, const Cap& c, std::mt19937_64& rng) {
    return random_in(g, [&](const Vec& xi) { return c.contains(xi, g.n, 0); }, rng);
}

inline Datum packet_at(const Grid& g, const Vec& xi, double rho) {
    Tube T;
    T.n = g.n;
    T.rho = rho;
    for (int a = 0; a < g.n; ++a) T.v[a] = -2 * xi[a];
    return build_packet_datum(T, g);
}

inline Datum make_datum(const Scenario& s, const Grid& g, double R, std::mt19937_64& rng) {
    int n = g.n;
    if (s.data == "random_band") {
        return random_in(g, [&](const Vec& xi) {
            double r = norm(xi, n);
            return r >= s.band_lo && r < s.band_hi;
        }, rng);
    }
    if (s.data == "single_packet") return packet_at(g, Vec{s.xi, 0, 0}, R);
    if (s.data == "packet_superposition") {
        Datum f(g);
        std::uniform_real_distribution<double> U(-1, 1);
        double lim = 1 - 4 / std::sqrt(R);
        for (int k = 0; k < s.packets; ++k) {
            Vec xi{0, 0, 0};
            do {
                for (int a = 0; a < n; ++a) xi[a] = lim * U(rng);
            } while (norm(xi, n) > lim);
            Tube T;
            T.n = n;
            T.rho = R;
            for (int a = 0; a < n; ++a) {
                T.v[a] = -2 * xi[a];
                T.x0[a] = 0.5 * R * U(rng);
            }
            Datum p = build_packet_datum(T, g);
            p *= std::polar(1.0, pi * U(rng));
            f += p;
        }
        f *= 1 / f.norm();
        return f;
    }
    if (s.data == "single_mode") {
        Datum f(g);
        long k = std::lround(0.75 / g.dxi());
        f.set({k, 0}, 1.0);
        f *= 1 / f.norm();
        return f;
    }
    if (s.data == "focusing_bump") {
        Datum f(g);
        double t0 = 0.5 * R;
        for (size_t i = 0; i < f.coef.size(); ++i) {
            Vec xi = f.xi(i);
            double r = norm(xi, n);
            double a = bump::cutoff(std::abs(r - 0.75), 0.15, 0.25);
            if (a > 0) f.coef[i] = a * std::polar(1.0, -t0 * r * r);
        }
        f *= 1 / f.norm();
        return f;
    }
    throw ConfigError("unknown data kind '" + s.data + "'");
}

// n+1 caps with well separated normals
inline std::vector<Cap> transverse_caps(int n) {
    if (n == 1) return {Cap{{-0.5, 0, 0}, 0.25}, Cap{{0.5, 0, 0}, 0.25}};
    std::vector<Cap> c;
    for (int j = 0; j < 3; ++j) {
        double a = pi / 2 + 2 * pi * j / 3;
        c.push_back(Cap{{0.5 * std::cos(a), 0.5 * std::sin(a), 0}, 0.2});
    }
    return c;
}

inline std::vector<Datum> cap_data(const Scenario& s, const Grid& g, double R, const std::vector<Cap>& caps,
                                   std::mt19937_64& rng) {
    std::vector<Datum> out;
    for (auto& c : caps)
        out.push_back(s.data == "single_packet" ? packet_at(g, c.center, R) : random_in_cap(g, c, rng));
    return out;
}

// ---------- cube families ----------

inline CubeFamily build_cube_family(const std::string& kind, int n, double R, double M = 1, double alpha = 1,
                                    uint64_t seed = 1) {
    if (!(M > 0) || R < M) throw PreconditionError("build_cube_family: need 0 < M <= R");
    CubeFamily F;
    F.n = n;
    F.M = M;
    F.R = R;
    long m = long(std::floor(R / M - 0.5 + 1e-12));  // |c| <= m keeps the cube inside B(0,R)
    if (m < 0) throw PreconditionError("build_cube_family: R too small for one cube");
    long jn = n == 2 ? m : 0;
    if (kind == "graph") {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<long> T(-m, m);
        for (long i = -m; i <= m; ++i)
            for (long j = -jn; j <= jn; ++j) {
                long t = T(rng);
                F.insert(n == 1 ? CubeIndex{i, t, 0} : CubeIndex{i, j, t});
            }
        return F;
    }
    if (kind == "ball") {
        for (long i = -m; i <= m; ++i)
            for (long j = -jn; j <= jn; ++j)
                for (long t = -m; t <= m; ++t) F.insert(n == 1 ? CubeIndex{i, t, 0} : CubeIndex{i, j, t});
        return F;
    }
    if (kind == "vertical_stack") {
        for (long t = -m; t <= m; ++t) F.insert(CubeIndex{0, t, 0});
        return F;
    }
    if (kind == "cantor") {
        int d = n + 1;
        if (!(alpha >= 0 && alpha <= d)) throw PreconditionError("build_cube_family: cantor needs 0 <= alpha <= n+1");
        int J = int(std::floor(std::log2(R / M) + 1e-12));
        // children in a fixed order spreading the kept ones: corners first
        std::vector<int> order{0, (1 << d) - 1};
        for (int c = 1; c < (1 << d) - 1; ++c) order.push_back(c);
        std::vector<std::array<long, 3>> cur{{0, 0, 0}};
        double P = 1;
        for (int j = 1; j <= J; ++j) {
            long c = std::clamp(std::lround(std::pow(2.0, j * alpha) / P), 1L, long(1) << d);
            P *= double(c);
            std::vector<std::array<long, 3>> nxt;
            for (auto& p : cur)
                for (long k = 0; k < c; ++k) {
                    std::array<long, 3> q{0, 0, 0};
                    for (int a = 0; a < d; ++a) q[a] = 2 * p[a] + ((order[k] >> a) & 1);
                    nxt.push_back(q);
                }
            cur.swap(nxt);
        }
        long half = J > 0 ? (long(1) << (J - 1)) : 0;
        for (auto& p : cur) {
            CubeIndex q{0, 0, 0};
            for (int a = 0; a < d; ++a) q[a] = p[a] - half;
            F.insert(q);
        }
        return F;
    }
    throw PreconditionError("build_cube_family: unknown kind '" + kind + "'");
}

// n = 1 strips through the origin plus one cube per strip near the top of the ball
struct CountingExample {
    CubeFamily cubes;
    std::vector<Strip> strips;
};

inline CountingExample cube_counting_example(long M) {
    if (M < 2) throw PreconditionError("cube_counting_example: M >= 2");
    CountingExample E;
    double K = 4.0 * double(M), R = 64.0 * double(M * M);
    E.cubes.n = 1;
    E.cubes.M = 1;
    E.cubes.R = R;
    E.cubes.insert({0, 0, 0});
    long t1 = long(R) - 1;
    for (long i = 0; i < M; ++i) {
        double v = -1 + 2.0 * double(i) / double(M - 1);
        E.strips.push_back(Strip{1, {0, 0}, Vec{v, 0, 0}, R, K});
        E.cubes.insert({std::lround(v * double(t1)), t1, 0});
    }
    return E;
}

// ---------- space-time integrals ----------

inline void check_feasible(const Grid& g) {
    g.validate();
    long cap = g.n == 1 ? (1L << 17) : 2048;
    if (g.Nx > cap)
        throw ConfigError("grid infeasible: Nx=" + std::to_string(g.Nx) + " exceeds " + std::to_string(cap) +
                          " for n=" + std::to_string(g.n));
}

inline Grid experiment_grid(int n, double R) {
    Grid g = Grid::for_ball(n, R, time_step_bound(1.0));
    check_feasible(g);
    return g;
}

// int_{t0}^{t1} int_{|x| <= R} fn(u_1, ..., u_m) with a trapezoid rule in t
template <class Fn>
double ball_integral(const std::vector<Datum>& fs, double R, double t0, double t1, Fn&& fn) {
    const Grid& g = fs[0].grid;
    int n = g.n;
    double band = 0;
    for (auto& f : fs) band = std::max(band, f.band_radius());
    int nt = int(std::ceil((t1 - t0) / time_step_bound(std::max(band, 1.0)))) + 1;
    double dt = (t1 - t0) / (nt - 1);
    size_t P = g.points();
    std::vector<size_t> idx;
    for (size_t i = 0; i < P; ++i) {
        auto s = unflatten(i, n, g.Nx);
        Vec x{g.x(s[0]), n == 2 ? g.x(s[1]) : 0.0, 0};
        if (norm(x, n) <= R) idx.push_back(i);
    }
    size_t m = fs.size();
    std::vector<double> part(size_t(nt), 0.0);
    parallel_for(size_t(nt), [&](size_t j) {
        thread_local std::vector<std::vector<cplx>> buf;
        if (buf.size() < m) buf.resize(m);
        for (size_t k = 0; k < m; ++k) {
            buf[k].resize(P);
            synthesize_into(fs[k], t0 + double(j) * dt, buf[k].data());
        }
        std::array<cplx, 3> v{};
        double s = 0;
        for (size_t i : idx) {
            for (size_t k = 0; k < m; ++k) v[k] = buf[k][i];
            s += fn(v);
        }
        part[j] = (j == 0 || j + 1 == size_t(nt)) ? 0.5 * s : s;
    });
    double s = 0;
    for (double p : part) s += p;
    return s * std::pow(g.dx(), n) * dt;
}

// int over Z_Q (union of closed cubes) of fn(u_1, ..., u_m): midpoint rule in t
// with an even number of samples per cube side, exact cell overlaps in x
template <class Fn>
double family_integral(const std::vector<Datum>& fs, const CubeFamily& Q, Fn&& fn) {
    const Grid& g = fs[0].grid;
    int n = g.n;
    double M = Q.M;
    double band = 0;
    for (auto& f : fs) band = std::max(band, f.band_radius());
    int per = 2 * int(std::ceil(M / (2 * time_step_bound(std::max(band, 1.0)))));
    double dt = M / per;
    std::map<long, std::vector<CubeIndex>> by_time;
    for (auto& c : Q.cubes) by_time[c[n]].push_back(c);
    size_t P = g.points();
    size_t m = fs.size();
    std::vector<std::pair<long, int>> jobs;
    for (auto& [tc, list] : by_time)
        for (int k = 0; k < per; ++k) jobs.push_back({tc, k});
    double dx = g.dx();
    auto overlap = [&](double x, double c) {
        double a = std::max(x - dx / 2, c - M / 2), b = std::min(x + dx / 2, c + M / 2);
        return std::max(0.0, b - a);
    };
    auto axis_points = [&](double c) {
        std::vector<std::pair<int, double>> out;
        // grid index range touching [c - M/2 - dx/2, c + M/2 + dx/2]
        int lo = int(std::floor((c - M / 2 - dx / 2 + 0.5 * g.L) / dx)) - 1;
        int hi = int(std::ceil((c + M / 2 + dx / 2 + 0.5 * g.L) / dx)) + 1;
        for (int i = lo; i <= hi; ++i) {
            double x = -0.5 * g.L + i * dx;
            double w = overlap(x, c);
            if (w > 0) out.push_back({((i % g.Nx) + g.Nx) % g.Nx, w});
        }
        return out;
    };
    std::vector<double> part(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](size_t jb) {
        auto [tc, k] = jobs[jb];
        double t = M * (double(tc) - 0.5) + (k + 0.5) * dt;
        thread_local std::vector<std::vector<cplx>> buf;
        if (buf.size() < m) buf.resize(m);
        for (size_t q = 0; q < m; ++q) {
            buf[q].resize(P);
            synthesize_into(fs[q], t, buf[q].data());
        }
        std::unordered_map<size_t, double> w;
        for (auto& c : by_time.at(tc)) {
            auto ax = axis_points(M * double(c[0]));
            if (n == 1) {
                for (auto [i, a] : ax) w[size_t(i)] += a;
                continue;
            }
            auto ay = axis_points(M * double(c[1]));
            for (auto [i, a] : ax)
                for (auto [j, b] : ay) w[size_t(i) * size_t(g.Nx) + size_t(j)] += a * b;
        }
        std::vector<std::pair<size_t, double>> ws(w.begin(), w.end());
        std::sort(ws.begin(), ws.end());
        std::array<cplx, 3> v{};
        double s = 0;
        for (auto [i, a] : ws) {
            for (size_t q = 0; q < m; ++q) v[q] = buf[q][i];
            s += a * fn(v);
        }
        part[jb] = s;
    });
    double s = 0;
    for (double p : part) s += p;
    return s * dt;
}

// ---------- bilinear identity ----------

// (1/(8 pi^2)) int int |f1^|^2 |f2^|^2 / |xi1 - xi2| for Gaussian bumps
inline double bilinear_rhs(double c1, double c2, double sigma) {
    using boost::math::quadrature::gauss;
    auto g2 = [&](double x, double c) { return std::exp(-(x - c) * (x - c) / (sigma * sigma)); };
    const int pieces = 16;
    // windows must stay disjoint or 1/|xi1-xi2| hits a node
    double half = std::min(8 * sigma, 0.5 * std::abs(c1 - c2));
    auto integrate = [&](double c, auto&& h) {
        double s = 0, a = c - half, w = 2 * half / pieces;
        for (int p = 0; p < pieces; ++p) s += gauss<double, 30>::integrate(h, a + p * w, a + (p + 1) * w);
        return s;
    };
    double v = integrate(c1, [&](double x1) {
        return g2(x1, c1) * integrate(c2, [&](double x2) { return g2(x2, c2) / std::abs(x1 - x2); });
    });
    return v / (8 * pi * pi);
}

struct BilinearPair {
    double c1, c2;
};

inline const std::vector<BilinearPair>& bilinear_pairs() {
    static const std::vector<BilinearPair> p{{-0.5, 0.5}, {-0.6, 0.2}, {0.1, 0.7}, {-0.8, -0.2}, {0.3, -0.4}};
    return p;
}

// box |t| <= T doubling from T0 until the LHS moves by <= 0.5%
inline RatioTable bilinear_identity_sweep(BilinearPair pr, double sigma = 0.05, double T0 = 8, double Tmax = 512) {
    Grid g;
    g.n = 1;
    g.L = 2048;
    g.Nx = 4096;
    g.Tmin = -1;
    g.Tmax = 1;
    g.Nt = 2;
    g.validate();
    std::array<Datum, 2> f{Datum(g), Datum(g)};
    double cs[2] = {pr.c1, pr.c2};
    for (int j = 0; j < 2; ++j)
        for (size_t i = 0; i < f[j].coef.size(); ++i) {
            double x = f[j].xi(i)[0];
            double e = (x - cs[j]) * (x - cs[j]) / (2 * sigma * sigma);
            if (e < 700) f[j].coef[i] = std::exp(-e);
        }
    const double dt = 0.25;
    double rhs = bilinear_rhs(pr.c1, pr.c2, sigma);
    RatioTable tab;
    tab.meta["experiment"] = "bilinear_identity";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", pr.c1, pr.c2);
    tab.meta["centres"] = buf;
    tab.meta["sigma"] = std::to_string(sigma);
    tab.meta["grid"] = "L=2048 Nx=4096 dt=0.25";
    std::map<long, double> slice;  // time index -> int |u1 u2|^2 dx
    size_t P = g.points();
    auto need = [&](long J) {
        std::vector<long> todo;
        for (long j = -J; j <= J; ++j)
            if (!slice.count(j)) todo.push_back(j);
        std::vector<double> v(todo.size());
        parallel_for(todo.size(), [&](size_t k) {
            std::vector<cplx> a(P), b(P);
            synthesize_into(f[0], todo[k] * dt, a.data());
            synthesize_into(f[1], todo[k] * dt, b.data());
            double s = 0;
            for (size_t i = 0; i < P; ++i) s += std::norm(a[i] * b[i]);
            v[k] = s * g.dx();
        });
        for (size_t k = 0; k < todo.size(); ++k) slice[todo[k]] = v[k];
    };
    double prev = -1;
    bool conv = false;
    for (double T = T0; T <= Tmax; T *= 2) {
        long J = std::lround(T / dt);
        need(J);
        double lhs = 0;
        for (long j = -J; j <= J; ++j) lhs += slice[j];
        lhs *= dt;
        tab.add(T, lhs, rhs);
        if (prev > 0 && std::abs(lhs - prev) <= 0.005 * lhs) {
            conv = true;
            break;
        }
        prev = lhs;
    }
    tab.meta["converged"] = conv ? "true" : "false";
    return tab;
}

// ---------- experiments ----------

inline std::vector<double> dyadic_range(double rmin, double rmax) {
    if (!(rmin >= 1) || rmax < rmin) throw ConfigError("R range: need 1 <= rmin <= rmax");
    std::vector<double> r;
    for (double R = rmin; R <= rmax * (1 + 1e-12); R *= 2) r.push_back(R);
    return r;
}

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"energy",      "strichartz",          "sharpness",
                                            "bilinear_identity", "bilinear_strichartz", "multilinear",
                                            "multilinear_fractal", "fractal_energy", "maximal"};
    return k;
}

inline std::string fmt_double(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

inline double default_q(const std::string& kind, int n) {
    if (kind == "multilinear") return 2.0 * (n + 1) / n;
    return 2.0 * (n + 2) / n;
}

// family_for(R) supplies the cube family for the fractal kinds
inline RatioTable run_experiment(const std::string& kind, const Scenario& s, const std::vector<double>& Rs,
                                 std::function<CubeFamily(double)> family_for = {}) {
    int n = s.n;
    if (n != 1 && n != 2) throw ConfigError("n must be 1 or 2");
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), kind) == experiment_kinds().end())
        throw ConfigError("unknown experiment '" + kind + "'");
    if (kind == "bilinear_identity") {
        if (n != 1) throw ConfigError("bilinear_identity is n=1 only");
        auto pr = bilinear_pairs()[s.seed % bilinear_pairs().size()];
        auto t = bilinear_identity_sweep(pr, 0.05, Rs.front(), Rs.back());
        t.meta["seed"] = std::to_string(s.seed);
        return t;
    }
    if (kind == "bilinear_strichartz" && n != 1) throw ConfigError("bilinear_strichartz is n=1 only");
    bool fractal = kind == "fractal_energy" || kind == "multilinear_fractal";
    if (fractal && !family_for)
        family_for = [&](double R) { return build_cube_family(s.family, n, R, s.M, s.alpha, s.seed); };
    RatioTable tab;
    tab.meta["experiment"] = kind;
    tab.meta["n"] = std::to_string(n);
    tab.meta["data"] = kind == "sharpness" && s.data == "random_band" ? "single_packet" : s.data;
    tab.meta["seed"] = std::to_string(s.seed);
    tab.meta["grid"] = "L=4R Nx=pow2>=16R/pi dt<=pi/8";
    double q = s.q > 0 ? s.q : default_q(kind, n);
    if (kind == "strichartz" || kind == "sharpness" || kind == "multilinear") tab.meta["q"] = fmt_double(q);
    if (kind == "bilinear_strichartz") tab.meta["K"] = fmt_double(s.K);
    if (fractal) {
        tab.meta["family"] = s.family;
        tab.meta["alpha"] = fmt_double(s.alpha);
    }
    double prevR = 0;
    for (double R : Rs) {
        if (R <= prevR) throw ConfigError("R values must increase");
        prevR = R;
        Grid g = experiment_grid(n, R);
        auto rng = scenario_rng(s, R);
        double lhs = 0, rhs = 0;
        if (kind == "energy" || kind == "strichartz" || kind == "sharpness") {
            Scenario ss = s;
            if (kind == "sharpness" && s.data == "random_band") ss.data = "single_packet";
            Datum f = make_datum(ss, g, R, rng);
            double p = kind == "energy" ? 2.0 : q;
            lhs = std::pow(ball_integral({f}, R, -R, R, [p](const std::array<cplx, 3>& v) {
                               return std::pow(std::abs(v[0]), p);
                           }), 1 / p);
            if (kind == "energy") rhs = std::sqrt(R) * f.norm();
            else if (kind == "strichartz") rhs = f.norm();
            else rhs = std::pow(R, -n / 4.0 + (n + 2) / (2 * q));
        } else if (kind == "bilinear_strichartz") {
            double a = -0.5;
            std::vector<Cap> caps{Cap{{a + 0.5 / s.K, 0, 0}, 0.5 / s.K}, Cap{{a + 2.5 / s.K, 0, 0}, 0.5 / s.K}};
            auto fs = cap_data(s, g, R, caps, rng);
            lhs = std::pow(ball_integral(fs, R, -R, R, [](const std::array<cplx, 3>& v) {
                               return std::norm(v[0] * v[1]);
                           }), 0.25);
            rhs = std::pow(s.K, 0.25) * std::sqrt(fs[0].norm() * fs[1].norm());
        } else if (kind == "multilinear" || kind == "multilinear_fractal") {
            auto fs = cap_data(s, g, R, transverse_caps(n), rng);
            double e = 1.0 / (n + 1);
            auto gm = [n, e](const std::array<cplx, 3>& v) {
                double p = 1;
                for (int j = 0; j <= n; ++j) p *= std::pow(std::abs(v[j]), e);
                return p;
            };
            double prod = 1;
            for (auto& f : fs) prod *= std::pow(f.norm(), e);
            if (kind == "multilinear") {
                lhs = std::pow(ball_integral(fs, R, -R, R, [&](const std::array<cplx, 3>& v) {
                                   return std::pow(gm(v), q);
                               }), 1 / q);
                rhs = prod;
            } else {
                CubeFamily Q = family_for(R);
                double D = fractal_density(Q, s.alpha).value;
                lhs = std::sqrt(family_integral(fs, Q, [&](const std::array<cplx, 3>& v) {
                    double x = gm(v);
                    return x * x;
                }));
                rhs = std::pow(D, 0.5 * e) * std::pow(R, s.alpha * 0.5 * e) * prod;
            }
        } else if (kind == "fractal_energy") {
            Datum f = make_datum(s, g, R, rng);
            CubeFamily Q = family_for(R);
            double D = fractal_density(Q, s.alpha).value;
            lhs = std::sqrt(family_integral({f}, Q, [](const std::array<cplx, 3>& v) { return std::norm(v[0]); }));
            rhs = std::pow(D, 1.0 / (n + 1)) * std::pow(R, s.alpha / (2.0 * (n + 1))) * f.norm();
        } else if (kind == "maximal") {
            Datum f = make_datum(s, g, R, rng);
            auto w = TimeWindow::for_band(0, R, std::max(f.band_radius(), 1.0));
            MaximalField mf = maximal_function(f, w);
            lhs = lp_norm(mf.as_field(), 2, Region::ball(n, R));
            rhs = std::pow(R, n / (2.0 * (n + 1))) * f.norm();
        }
        if (!(lhs > 0) || !(rhs > 0) || !std::isfinite(lhs) || !std::isfinite(rhs))
            throw PreconditionError(kind + ": non-positive or non-finite entry at R=" + fmt_double(R));
        tab.add(R, lhs, rhs);
    }
    return tab;
}

// ---------- fits and reports ----------

struct GrowthFit {
    double slope = 0, intercept = 0, residual = 0;
};

// least squares of log2 y on log2 x; residual is the rms misfit
inline GrowthFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 3 || x.size() != y.size()) throw PreconditionError("fit: need >= 3 rows");
    size_t m = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < m; ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw PreconditionError("fit: entries must be positive");
        double a = std::log2(x[i]), b = std::log2(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    double den = m * sxx - sx * sx;
    GrowthFit f;
    f.slope = (m * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / m;
    double r = 0;
    for (size_t i = 0; i < m; ++i) {
        double e = std::log2(y[i]) - (f.slope * std::log2(x[i]) + f.intercept);
        r += e * e;
    }
    f.residual = std::sqrt(r / m);
    return f;
}

inline GrowthFit fit_growth_exponent(const RatioTable& t) {
    std::vector<double> x, y;
    for (auto& r : t.rows) {
        x.push_back(r.R);
        y.push_back(r.ratio);
    }
    return fit_log_log(x, y);
}

inline std::string table_csv(const RatioTable& t) {
    std::string s = "R,lhs,rhs,ratio\n";
    for (auto& r : t.rows)
        s += fmt_double(r.R) + "," + fmt_double(r.lhs) + "," + fmt_double(r.rhs) + "," + fmt_double(r.ratio) + "\n";
    return s;
}

inline std::string table_json(const RatioTable& t) {
    nlohmann::ordered_json j;
    j["metadata"] = nlohmann::ordered_json::object();
    for (auto& [k, v] : t.meta) j["metadata"][k] = v;
    j["rows"] = nlohmann::ordered_json::array();
    for (auto& r : t.rows) j["rows"].push_back({{"R", r.R}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}});
    return j.dump(2) + "\n";
}

inline void emit_report(const RatioTable& t, const std::string& format, const std::string& path) {
    std::string body;
    if (format == "csv") body = table_csv(t);
    else if (format == "json") body = table_json(t);
    else throw ConfigError("report format must be csv or json");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << body;
    if (!f) throw ConfigError("write failed: " + path);
}

inline RatioTable parse_table(const std::string& text) {
    RatioTable t;
    size_t p = text.find_first_not_of(" \t\r\n");
    if (p != std::string::npos && text[p] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
            for (auto& [k, v] : j.at("metadata").items()) t.meta[k] = v.get<std::string>();
            for (auto& r : j.at("rows"))
                t.rows.push_back({r.at("R").get<double>(), r.at("lhs").get<double>(), r.at("rhs").get<double>(),
                                  r.at("ratio").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("report json: ") + e.what());
        }
        return t;
    }
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "R,lhs,rhs,ratio") throw ConfigError("report csv: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<double, 4> v{};
        std::istringstream ls(line);
        std::string cell;
        for (int k = 0; k < 4; ++k) {
            if (!std::getline(ls, cell, ',')) throw ConfigError("report csv: short row");
            v[k] = parse_number("csv", cell);
        }
        t.rows.push_back({v[0], v[1], v[2], v[3]});
    }
    return t;
}

inline RatioTable read_table(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_table(ss.str());
}

// asserted invariants of a finished table; returns failure messages
inline std::vector<std::string> table_invariants(const std::string& kind, int n, const RatioTable& t, double q = 0) {
    std::vector<std::string> bad;
    double prev = 0;
    for (auto& r : t.rows) {
        if (!(r.R > prev)) bad.push_back("R not strictly increasing");
        prev = r.R;
        for (double v : {r.lhs, r.rhs, r.ratio})
            if (!(v > 0) || !std::isfinite(v)) bad.push_back("non-positive or non-finite entry at R=" + fmt_double(r.R));
    }
    if (!bad.empty()) return bad;
    if (kind == "energy")
        for (auto& r : t.rows)
            if (r.ratio > 4) bad.push_back("energy ratio " + fmt_double(r.ratio) + " > 4 at R=" + fmt_double(r.R));
    if (kind == "bilinear_identity" && !t.rows.empty()) {
        double r = t.rows.back().ratio;
        if (t.meta.count("converged") && t.meta.at("converged") != "true") bad.push_back("box sweep did not converge");
        if (r < 0.99 || r > 1.01) bad.push_back("bilinear ratio " + fmt_double(r) + " outside [0.99, 1.01]");
    }
    if (t.rows.size() >= 3) {
        if (kind == "maximal") {
            double s = fit_growth_exponent(t).slope, lim = n / (2.0 * (n + 1)) + 0.15;
            if (s > lim) bad.push_back("maximal slope " + fmt_double(s) + " > " + fmt_double(lim));
        }
        if (kind == "sharpness") {
            if (q <= 0) q = default_q(kind, n);
            std::vector<double> x, y;
            for (auto& r : t.rows) {
                x.push_back(r.R);
                y.push_back(r.lhs);
            }
            double s = fit_log_log(x, y).slope, target = -n / 4.0 + (n + 2) / (2 * q);
            if (std::abs(s - target) > 0.05)
                bad.push_back("sharpness slope " + fmt_double(s) + " differs from " + fmt_double(target) + " by > 0.05");
        }
    }
    return bad;
}

}  // namespace wplab
