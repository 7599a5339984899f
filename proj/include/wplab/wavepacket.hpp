#pragma once
// Wave packets at scale rho: decomposition, reconstruction, and the
// dispersion / orthogonality / localisation checks. Also strip grouping and
// time-interval bookkeeping.

#include <map>
#include "json.hpp"
#include <random>

#include "geometry.hpp"
#include "propagator.hpp"

namespace wplab {

// psi^_theta(xi) = psi^(rho^{1/2}(xi - xi_theta)), radial
inline double packet_symbol(const Vec& xi, const Vec& center, double rho, int n) {
    Vec d{0, 0, 0};
    for (int a = 0; a < n; ++a) d[a] = xi[a] - center[a];
    return bump::packet_profile(std::sqrt(rho) * norm(d, n));
}

// L^2-normalised psi_T on the grid of g
inline Datum build_packet_datum(const Tube& T, const Grid& g) {
    int n = g.n;
    if (T.rho < 10) throw PreconditionError("build_packet_datum: rho >= 10 required");
    if (norm(T.xi(), n) + 1 / std::sqrt(T.rho) > 1 + 1e-12)
        throw PreconditionError("build_packet_datum: cap escapes the unit ball");
    Datum f(g);
    for (size_t i = 0; i < f.coef.size(); ++i) {
        Vec xi = f.xi(i);
        double s = packet_symbol(xi, T.xi(), T.rho, n);
        if (s == 0) continue;
        f.coef[i] = s * std::polar(1.0, -dot(xi, T.x0, n));
    }
    double m = f.norm();
    if (m == 0) throw ConfigError("build_packet_datum: grid too coarse to resolve the packet");
    f *= 1.0 / m;
    return f;
}

struct TubeKey {
    std::array<long, 2> cap{0, 0};  // xi_theta = c_n rho^{-1/2} * cap
    std::array<long, 2> pos{0, 0};  // x(T) = rho^{1/2} * pos
    auto operator<=>(const TubeKey&) const = default;
};

struct PacketEntry {
    TubeKey key;
    cplx a;       // Fourier-series coefficient
    double mass;  // ||f_T||_2
};

struct PacketFamily {
    Grid grid;
    double rho = 16;
    double fnorm = 0;            // ||f||_2 of the decomposed datum
    double threshold = 1e-14;    // relative mass below which tubes are dropped
    long period_positions = 0;   // positions per axis: L / rho^{1/2}; series is exact on the torus
    std::vector<PacketEntry> tubes;  // sorted by key

    int n() const { return grid.n; }
    double step() const { return std::sqrt(rho); }
    Vec cap_center(const std::array<long, 2>& m) const {
        Vec c{0, 0, 0};
        for (int a = 0; a < n(); ++a) c[a] = c_n(n()) / std::sqrt(rho) * double(m[a]);
        return c;
    }
    Tube tube(const TubeKey& k) const {
        Tube T;
        T.n = n();
        T.rho = rho;
        Vec c = cap_center(k.cap);
        for (int a = 0; a < n(); ++a) {
            T.x0[a] = step() * double(k.pos[a]);
            T.v[a] = -2 * c[a];
        }
        return T;
    }

    // sum of the selected components (indices into tubes), one P^n transform per cap
    Datum sum(const std::vector<size_t>& sel) const {
        Datum out(grid);
        std::map<std::array<long, 2>, std::vector<size_t>> by_cap;
        for (size_t i : sel) by_cap[tubes[i].key.cap].push_back(i);
        int nn = n();
        long P = period_positions;
        for (auto& [m, list] : by_cap) {
            std::vector<cplx> b(size_t(ipow(P, nn)), cplx(0));
            auto slot = [&](const std::array<long, 2>& p) {
                size_t s = size_t(((p[0] % P) + P) % P);
                if (nn == 2) s = s * P + size_t(((p[1] % P) + P) % P);
                return s;
            };
            for (size_t i : list) b[slot(tubes[i].key.pos)] += tubes[i].a;
            // B(k) = sum_p b_p e^{-2 pi i k p / P}
            fft::transform(nn, int(P), -1, b);
            Vec c = cap_center(m);
            add_cap(out, c, [&](const std::array<long, 2>& k) { return b[slot(k)]; });
        }
        return out;
    }

    Datum component(size_t i) const { return sum({i}); }

    Datum total() const {
        std::vector<size_t> all(tubes.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        return sum(all);
    }

    // adds psi^_theta(xi_k) * B(k) over the lattice points of 4 theta
    template <class Fn>
    void add_cap(Datum& out, const Vec& c, Fn&& B) const {
        int nn = n();
        double rad = 4 / std::sqrt(rho);
        double u = grid.L / (2 * pi);
        long lo0 = long(std::floor((c[0] - rad) * u)), hi0 = long(std::ceil((c[0] + rad) * u));
        long lo1 = nn == 2 ? long(std::floor((c[1] - rad) * u)) : 0;
        long hi1 = nn == 2 ? long(std::ceil((c[1] + rad) * u)) : 0;
        for (long k0 = lo0; k0 <= hi0; ++k0)
            for (long k1 = lo1; k1 <= hi1; ++k1) {
                std::array<long, 2> k{k0, k1};
                Vec xi{k0 / u, k1 / u, 0};
                double s = packet_symbol(xi, c, rho, nn);
                if (s == 0) continue;
                out.coef[out.index_of(k)] += s * B(k);
            }
    }
};

namespace detail {

inline PacketFamily decompose_impl(const Datum& f, double rho) {
    const Grid& g = f.grid;
    int n = g.n;
    if (rho < 10) throw PreconditionError("decompose: rho >= 10 required");
    for (int a = 0; a < n; ++a)
        if (f.offset[a] != 0) throw PreconditionError("decompose: datum must sit on the standard lattice");
    double s = std::sqrt(rho);
    double Pd = g.L / s;
    long P = std::lround(Pd);
    if (std::abs(Pd - double(P)) > 1e-9 * Pd || P < 1)
        throw ConfigError("decompose: period L must be an integer multiple of rho^{1/2}");
    if (f.band_radius() + 4.5 / s >= 2.0)
        throw PreconditionError("decompose: packet caps would leave the grid band");

    PacketFamily fam;
    fam.grid = g;
    fam.rho = rho;
    fam.fnorm = f.norm();
    fam.period_positions = P;
    double cn = c_n(n);

    // per cap: g_theta = phi^_theta f^ on the lattice
    std::map<std::array<long, 2>, std::vector<std::pair<std::array<long, 2>, cplx>>> pieces;
    for (size_t i = 0; i < f.coef.size(); ++i) {
        if (f.coef[i] == cplx(0)) continue;
        Vec xi = f.xi(i);
        auto k = f.k_of(i);
        std::array<long, 2> mlo{0, 0}, mhi{0, 0};
        for (int a = 0; a < n; ++a) {
            double u = s * xi[a] / cn;
            mlo[a] = long(std::floor(u)) - 1;
            mhi[a] = long(std::ceil(u)) + 1;
        }
        for (long m0 = mlo[0]; m0 <= mhi[0]; ++m0)
            for (long m1 = mlo[1]; m1 <= mhi[1]; ++m1) {
                Vec eta{s * xi[0] - cn * double(m0), s * xi[1] - cn * double(m1), 0};
                double w = bump::partition(eta, n, cn);
                if (w == 0) continue;
                pieces[{m0, m1}].push_back({k, w * f.coef[i]});
            }
    }

    std::vector<std::array<long, 2>> caps;
    for (auto& [m, v] : pieces) caps.push_back(m);
    std::vector<std::vector<PacketEntry>> per(caps.size());
    double cut = fam.threshold * fam.fnorm;
    parallel_for(caps.size(), [&](size_t ci) {
        auto m = caps[ci];
        size_t tot = size_t(ipow(P, n));
        std::vector<cplx> A(tot, cplx(0));
        auto slot = [&](const std::array<long, 2>& k) {
            size_t q = size_t(((k[0] % P) + P) % P);
            if (n == 2) q = q * P + size_t(((k[1] % P) + P) % P);
            return q;
        };
        for (auto& [k, v] : pieces[m]) A[slot(k)] += v;
        // a_p = P^{-n} sum_k g_k e^{+2 pi i k p / P}
        fft::transform(n, int(P), +1, A);
        double inv = std::pow(double(P), -n);
        // profile norm is translation invariant: ||psi_theta|| on the lattice
        Vec c = fam.cap_center(m);
        double pn = 0;
        {
            Datum tmp(g);
            fam.add_cap(tmp, c, [](const std::array<long, 2>&) { return cplx(1); });
            pn = tmp.norm();
        }
        for (size_t q = 0; q < tot; ++q) {
            cplx a = A[q] * inv;
            double mass = std::abs(a) * pn;
            if (mass <= cut || mass == 0) continue;
            std::array<long, 2> p{long(n == 2 ? q / P : q), long(n == 2 ? q % P : 0)};
            // centre positions on [-P/2, P/2)
            for (int d = 0; d < n; ++d)
                if (p[d] >= P / 2 + (P % 2)) p[d] -= P;
            per[ci].push_back({TubeKey{m, p}, a, mass});
        }
    });
    for (auto& v : per) fam.tubes.insert(fam.tubes.end(), v.begin(), v.end());
    std::sort(fam.tubes.begin(), fam.tubes.end(),
              [](const PacketEntry& x, const PacketEntry& y) { return x.key < y.key; });
    return fam;
}

}  // namespace detail

inline PacketFamily decompose(const Datum& f, double rho) {
    if (f.band_radius() > 0.5 + 1e-12) throw PreconditionError("decompose: supp f^ must lie in B(0,1/2)");
    return detail::decompose_impl(f, rho);
}

// ---------- verified properties ----------

// min over support frequencies of |v(T) + 2 xi| <= 2 rho^{-1/2}, per nonzero tube
inline bool dispersion_holds(const PacketFamily& fam, const Datum& f) {
    int n = fam.n();
    auto sup = f.support();
    for (auto& e : fam.tubes) {
        Tube T = fam.tube(e.key);
        double best = std::numeric_limits<double>::infinity();
        for (size_t i : sup) {
            Vec xi = f.xi(i), d{0, 0, 0};
            for (int a = 0; a < n; ++a) d[a] = T.v[a] + 2 * xi[a];
            best = std::min(best, norm(d, n));
        }
        if (!(best <= 2 / std::sqrt(fam.rho))) return false;
    }
    return true;
}

struct Orthogonality {
    double subset_ratio = 0;  // max ||sum_W f_T||^2 / sum_W ||f_T||^2
    double total_ratio = 0;   // sum ||f_T||^2 / ||f||^2
};

inline Orthogonality orthogonality_constant(const PacketFamily& fam,
                                            const std::vector<std::vector<size_t>>& subsets) {
    Orthogonality o;
    double tot = 0;
    for (auto& e : fam.tubes) tot += e.mass * e.mass;
    o.total_ratio = fam.fnorm > 0 ? tot / (fam.fnorm * fam.fnorm) : 0;
    for (auto& W : subsets) {
        if (W.empty()) continue;
        double den = 0;
        for (size_t i : W) den += fam.tubes[i].mass * fam.tubes[i].mass;
        if (den == 0) continue;
        double num = fam.sum(W).norm();
        o.subset_ratio = std::max(o.subset_ratio, num * num / den);
    }
    return o;
}

inline std::vector<std::vector<size_t>> random_subsets(size_t count, size_t tubes, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::vector<size_t>> out(count);
    for (auto& W : out)
        for (size_t i = 0; i < tubes; ++i)
            if (coin(rng)) W.push_back(i);
    return out;
}

struct LocalizationReport {
    double delta = 0.1, R = 0;
    std::vector<double> per_tube;  // exterior sup / ||f||, same order as family.tubes
    double max() const { return per_tube.empty() ? 0.0 : *std::max_element(per_tube.begin(), per_tube.end()); }
};

// exterior sup of |U psi_theta| (unit coefficient, x(T) = 0) over |t| <= R,
// minimum-image distance from the core line above rho^{1/2+delta}.
// Taken over every spatial sample, so it bounds each tube's exterior sup on B_R.
inline double cap_exterior_sup(const PacketFamily& fam, const std::array<long, 2>& m, double delta, double R) {
    const Grid& g = fam.grid;
    int n = g.n;
    Vec c = fam.cap_center(m);
    Datum psi(g);
    fam.add_cap(psi, c, [](const std::array<long, 2>&) { return cplx(1); });
    Vec v{0, 0, 0};
    for (int a = 0; a < n; ++a) v[a] = -2 * c[a];
    double rad = std::pow(fam.rho, 0.5 + delta);
    // envelope sampling in t: packet moves O(1) per unit time, width rho^{1/2}
    int nt = int(std::ceil(2 * R / (std::sqrt(fam.rho) / 8))) + 1;
    std::vector<double> best(nt, 0.0);
    parallel_for(size_t(nt), [&](size_t j) {
        double t = -R + 2 * R * double(j) / (nt - 1);
        std::vector<cplx> buf(g.points());
        synthesize_into(psi, t, buf.data());
        double mx = 0;
        for (size_t i = 0; i < buf.size(); ++i) {
            auto s = unflatten(i, n, g.Nx);
            Vec d{0, 0, 0};
            for (int a = 0; a < n; ++a) d[a] = wrap(g.x(s[a]) - t * v[a], g.L);
            if (norm(d, n) > rad) mx = std::max(mx, std::abs(buf[i]));
        }
        best[j] = mx;
    });
    return *std::max_element(best.begin(), best.end());
}

inline LocalizationReport localization_report(const PacketFamily& fam, double delta, double R = -1) {
    if (R < 0) R = fam.rho;
    R = std::min(R, fam.rho);  // tubes only extend over |t| <= rho
    LocalizationReport rep{delta, R, std::vector<double>(fam.tubes.size(), 0.0)};
    if (fam.fnorm == 0) return rep;
    std::map<std::array<long, 2>, double> G;
    for (auto& e : fam.tubes) G[e.key.cap] = 0;
    for (auto& [m, val] : G) val = cap_exterior_sup(fam, m, delta, R);
    for (size_t i = 0; i < fam.tubes.size(); ++i)
        rep.per_tube[i] = std::abs(fam.tubes[i].a) * G[fam.tubes[i].key.cap] / fam.fnorm;
    return rep;
}

// sup of |U psi_T| over B(0,R) outside T^{(delta)}, on the grid samples
inline double packet_exterior_sup(const Tube& T, const Datum& psi, double delta, double R) {
    const Grid& g = psi.grid;
    int n = g.n;
    int nt = int(std::ceil(2 * R / (std::sqrt(T.rho) / 8))) + 1;
    std::vector<double> best(nt, 0.0);
    parallel_for(size_t(nt), [&](size_t j) {
        double t = -R + 2 * R * double(j) / (nt - 1);
        std::vector<cplx> buf(g.points());
        synthesize_into(psi, t, buf.data());
        double mx = 0;
        for (size_t i = 0; i < buf.size(); ++i) {
            auto s = unflatten(i, n, g.Nx);
            Vec z{g.x(s[0]), n == 2 ? g.x(s[1]) : 0.0, 0};
            if (norm(z, n) > R) continue;
            z[n] = t;
            if (T.zone(z, delta, g.L) == TubeZone::outside && std::abs(t) <= T.rho)
                mx = std::max(mx, std::abs(buf[i]));
        }
        best[j] = mx;
    });
    return *std::max_element(best.begin(), best.end());
}

// ---------- strips ----------

struct StripGroup {
    Cap tau;
    double R = 0, K = 0;
    PacketFamily family;  // scale R decomposition of f_tau
    std::vector<Strip> strips;
    std::vector<std::vector<size_t>> members;  // tube indices per strip

    Datum datum(size_t s) const { return family.sum(members[s]); }
    Datum total() const {
        Datum out(family.grid);
        for (size_t s = 0; s < strips.size(); ++s) out += datum(s);
        return out;
    }
};

// each tube goes to the strip whose x(S) is the nearest (R/K)-lattice point to x(T)
inline StripGroup group_by_strip(const Datum& f_tau, const Cap& tau, double R, double K) {
    int n = f_tau.grid.n;
    if (std::abs(tau.radius - 0.5 / K) > 1e-12 * tau.radius)
        throw PreconditionError("group_by_strip: cap radius must be (2K)^{-1}");
    for (size_t i : f_tau.support())
        if (!tau.contains(f_tau.xi(i), n, 1e-9)) throw PreconditionError("group_by_strip: supp f^ not inside tau");
    StripGroup G;
    G.tau = tau;
    G.R = R;
    G.K = K;
    G.family = detail::decompose_impl(f_tau, R);
    Vec v{0, 0, 0};
    for (int a = 0; a < n; ++a) v[a] = -2 * tau.center[a];
    std::map<std::array<long, 2>, size_t> index;
    double w = R / K;
    for (size_t i = 0; i < G.family.tubes.size(); ++i) {
        Tube T = G.family.tube(G.family.tubes[i].key);
        std::array<long, 2> l{std::lround(T.x0[0] / w), n == 2 ? std::lround(T.x0[1] / w) : 0};
        auto [it, fresh] = index.try_emplace(l, G.strips.size());
        if (fresh) {
            G.strips.push_back(Strip{n, l, v, R, K});
            G.members.emplace_back();
        }
        G.members[it->second].push_back(i);
    }
    return G;
}

// max over B_R outside the enlarged strip of |U f_S|, relative to ||f_tau||
inline double strip_leakage(const StripGroup& G, size_t s, double ftau_norm) {
    Datum fS = G.datum(s);
    const Grid& g = fS.grid;
    int n = g.n;
    const Strip& S = G.strips[s];
    auto win = TimeWindow::for_band(-G.R, G.R, std::max(fS.band_radius(), 1e-3));
    auto times = win.samples();
    std::vector<double> best(times.size(), 0.0);
    for_each_slice(fS, times, [&](size_t j, const cplx* u) {
        double mx = 0;
        for (size_t i = 0; i < g.points(); ++i) {
            auto q = unflatten(i, n, g.Nx);
            Vec z{g.x(q[0]), n == 2 ? g.x(q[1]) : 0.0, 0};
            if (norm(z, n) > G.R) continue;
            z[n] = times[j];
            if (!S.contains_enlarged(z, g.L)) mx = std::max(mx, std::abs(u[i]));
        }
        best[j] = mx;
    });
    double m = *std::max_element(best.begin(), best.end());
    return ftau_norm > 0 ? m / ftau_norm : 0.0;
}

// ---------- time intervals ----------

// min over t in [a,b] of |x0 + t v|
inline double segment_distance_to_origin(const Vec& x0, const Vec& v, double a, double b, int n) {
    double vv = dot(v, v, n);
    double t = vv > 0 ? std::clamp(-dot(x0, v, n) / vv, a, b) : a;
    Vec p{0, 0, 0};
    for (int d = 0; d < n; ++d) p[d] = x0[d] + t * v[d];
    return norm(p, n);
}

// intervals I_j = jR + [-R/2, R/2], j = 0..R^2/R; tubes taken as full lines in t
inline std::map<long, std::vector<size_t>> assign_time_intervals(const PacketFamily& fam, double R, double delta) {
    int n = fam.n();
    long J = long(std::floor(R * R / R + 1e-9));
    double grow = std::pow(R, delta);
    std::map<long, std::vector<size_t>> out;
    for (size_t i = 0; i < fam.tubes.size(); ++i) {
        Tube T = fam.tube(fam.tubes[i].key);
        double sp = norm(T.v, n);
        if (sp < 0.25 || sp > 2) continue;
        for (long j = 0; j <= J; ++j) {
            double c = j * R, h = grow * R / 2;
            // T meets B(0, R^{1+delta}) x [c-h, c+h]
            if (segment_distance_to_origin(T.x0, T.v, c - h, c + h, n) <= grow * R + std::sqrt(fam.rho))
                out[j].push_back(i);
        }
    }
    return out;
}

// ---------- export ----------

inline void export_jsonl(const PacketFamily& fam, std::ostream& os) {
    for (auto& e : fam.tubes) {
        Tube T = fam.tube(e.key);
        nlohmann::json j;
        j["x"] = std::vector<double>(T.x0.begin(), T.x0.begin() + fam.n());
        j["v"] = std::vector<double>(T.v.begin(), T.v.begin() + fam.n());
        j["rho"] = fam.rho;
        j["mass"] = e.mass;
        j["coef"] = {e.a.real(), e.a.imag()};
        std::string ref = "cap[" + std::to_string(e.key.cap[0]);
        if (fam.n() == 2) ref += "," + std::to_string(e.key.cap[1]);
        ref += "]/pos[" + std::to_string(e.key.pos[0]);
        if (fam.n() == 2) ref += "," + std::to_string(e.key.pos[1]);
        ref += "]";
        j["ref"] = ref;
        os << j.dump() << '\n';
    }
}

}  // namespace wplab
