#pragma once
// Cap covers at scale 1/K, V-aligned caps, the broad functional, broad/narrow
// splits, fuzzy L^q norms, cube classification.

#include "fractal.hpp"
#include "propagator.hpp"

namespace wplab {

// centres on (2 c_n / K)(Z^n + 1/2), radius (2K)^{-1}: each ball circumscribes its
// lattice cell, so the family covers and a point sits in at most 2^n balls
inline CapCover cap_cover(double K, int n) {
    if (K < 2) throw PreconditionError("cap_cover: K >= 2");
    if (n != 1 && n != 2) throw PreconditionError("cap_cover: n must be 1 or 2");
    double h = 2 * c_n(n) / K, r = 0.5 / K;
    long m = long(std::ceil((1 + r) / h)) + 1;
    CapCover C{n, K, {}};
    for (long i = -m; i < m; ++i)
        for (long j = (n == 2 ? -m : 0); j < (n == 2 ? m : 1); ++j) {
            Vec c{h * (double(i) + 0.5), n == 2 ? h * (double(j) + 0.5) : 0.0, 0};
            if (norm(c, n) < 1 + r) C.caps.push_back(Cap{c, r});
        }
    return C;
}

// nearest centre; ties to the lower index
inline size_t cap_of(const CapCover& C, const Vec& xi) {
    size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < C.caps.size(); ++i) {
        Vec d{0, 0, 0};
        for (int a = 0; a < C.n; ++a) d[a] = xi[a] - C.caps[i].center[a];
        double v = norm(d, C.n);
        if (v < bd - 1e-15) {
            bd = v;
            best = i;
        }
    }
    return best;
}

inline std::vector<Datum> split_by_cover(const Datum& f, const CapCover& C) {
    std::vector<Datum> out(C.caps.size(), Datum(f.grid));
    for (auto& d : out) d.offset = f.offset;
    for (size_t i : f.support()) {
        Vec xi = f.xi(i);
        if (norm(xi, C.n) > 1 + 1e-12) throw PreconditionError("split_by_cover: coefficient outside B(0,1)");
        out[cap_of(C, xi)].coef[i] = f.coef[i];
    }
    return out;
}

// ---------- subspaces ----------

struct SubspaceCandidate {
    Vec normal{0, 0, 0};
    std::vector<int> span;  // cap indices whose centre normals span V
};

inline std::vector<SubspaceCandidate> candidate_subspaces(const CapCover& C) {
    int n = C.n;
    std::vector<Vec> G;
    for (auto& c : C.caps) G.push_back(gauss_map(c.center, n));
    std::vector<SubspaceCandidate> out;
    if (n == 1) {
        for (size_t i = 0; i < G.size(); ++i) out.push_back({Vec{-G[i][1], G[i][0], 0}, {int(i)}});
        return out;
    }
    for (size_t i = 0; i < G.size(); ++i)
        for (size_t j = i + 1; j < G.size(); ++j) {
            const Vec &a = G[i], &b = G[j];
            Vec c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
            double l = norm(c, 3);
            if (l < 1e-12) continue;
            for (auto& x : c) x /= l;
            out.push_back({c, {int(i), int(j)}});
        }
    return out;
}

// |sin angle(G(xi), V)| = |G(xi) . normal|, minimised over the cap samples
inline bool cap_aligned(const Cap& c, const Vec& normal, int n, double K, double Cn) {
    for (auto& xi : c.samples(n))
        if (std::abs(dot(gauss_map(xi, n), normal, n + 1)) <= Cn / K) return true;
    return false;
}

inline std::vector<int> aligned_caps(const SubspaceCandidate& V, const CapCover& C, double K, double Cn = 4) {
    if (Cn < 1) throw PreconditionError("aligned_caps: C_n >= 1");
    std::vector<int> out;
    for (size_t i = 0; i < C.caps.size(); ++i)
        if (cap_aligned(C.caps[i], V.normal, C.n, K, Cn)) out.push_back(int(i));
    return out;
}

// precomputed incidence between caps and candidate subspaces
struct BroadContext {
    CapCover cover;
    double K = 2, Cn = 4;
    std::vector<SubspaceCandidate> cands;
    size_t words = 0;
    size_t cap_words = 0;
    std::vector<std::vector<uint64_t>> by_cap;  // bitset over candidates aligning the cap
    std::vector<std::vector<uint64_t>> by_cand; // bitset over caps aligned with the candidate

    bool aligned(size_t v, size_t c) const { return (by_cand[v][c / 64] >> (c % 64)) & 1; }

    BroadContext(const CapCover& C, double Cn_ = 4) : cover(C), K(C.K), Cn(Cn_) {
        if (Cn < 1) throw PreconditionError("broad: C_n >= 1");
        cands = candidate_subspaces(C);
        if (cands.empty()) throw PreconditionError("broad: empty candidate subspace set");
        size_t m = C.caps.size();
        words = (cands.size() + 63) / 64;
        cap_words = (m + 63) / 64;
        by_cap.assign(m, std::vector<uint64_t>(words, 0));
        by_cand.assign(cands.size(), std::vector<uint64_t>(cap_words, 0));
        // gauss map of every cap sample, computed once
        std::vector<std::vector<Vec>> G(m);
        for (size_t c = 0; c < m; ++c)
            for (auto& xi : C.caps[c].samples(C.n)) G[c].push_back(gauss_map(xi, C.n));
        double thr = Cn / K;
        parallel_for(cands.size(), [&](size_t v) {
            for (size_t c = 0; c < m; ++c)
                for (auto& g : G[c])
                    if (std::abs(dot(g, cands[v].normal, C.n + 1)) <= thr) {
                        by_cand[v][c / 64] |= uint64_t(1) << (c % 64);
                        break;
                    }
        });
        for (size_t v = 0; v < cands.size(); ++v)
            for (size_t c = 0; c < m; ++c)
                if (aligned(v, c)) by_cap[c][v / 64] |= uint64_t(1) << (v % 64);
    }
};

struct BroadResult {
    double value = 0;
    size_t V = 0;               // index into the candidate list
    std::vector<int> witness;   // n+1 caps, empty when value is 0
    double witness_wedge = 0;
};

namespace detail {

inline std::vector<int> find_witness(const BroadContext& B, const std::vector<double>& a, double broad,
                                     size_t V, double& wedge) {
    int n = B.cover.n;
    double thr = std::pow(B.K, -n);
    std::vector<int> pool;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] >= broad && a[i] > 0) pool.push_back(int(i));
    std::stable_sort(pool.begin(), pool.end(), [&](int x, int y) { return a[x] > a[y]; });
    auto check = [&](const std::vector<int>& t) {
        std::vector<Cap> cs;
        for (int i : t) cs.push_back(B.cover.caps[i]);
        return wedge_transversality(cs, n);
    };
    // greedy construction: top cap, then top caps off the spans built so far
    {
        std::vector<int> t{pool.empty() ? -1 : pool[0]};
        if (t[0] >= 0) {
            Vec g0 = gauss_map(B.cover.caps[t[0]].center, n);
            for (int c : pool) {
                if (int(t.size()) == n + 1) break;
                Vec g = gauss_map(B.cover.caps[c].center, n);
                if (t.size() == 1) {
                    if (n == 1) {
                        if (std::abs(g0[0] * g[1] - g0[1] * g[0]) > B.Cn / B.K) t.push_back(c);
                    } else {
                        Vec x{g0[1] * g[2] - g0[2] * g[1], g0[2] * g[0] - g0[0] * g[2], g0[0] * g[1] - g0[1] * g[0]};
                        if (norm(x, 3) > B.Cn / B.K) t.push_back(c);
                    }
                } else {
                    std::vector<Vec> xs{B.cover.caps[t[0]].center, B.cover.caps[t[1]].center, B.cover.caps[c].center};
                    if (wedge_at(xs, n) >= 2 * thr) t.push_back(c);
                }
            }
            if (int(t.size()) == n + 1) {
                double w = check(t);
                if (w >= thr) {
                    wedge = w;
                    return t;
                }
            }
        }
    }
    (void)V;
    // fallback: lexicographic search in value order
    std::vector<int> idx(n + 1);
    std::vector<int> found;
    std::function<bool(int, int)> rec = [&](int pos, int from) {
        if (pos == n + 1) {
            std::vector<Vec> xs;
            for (int i : idx) xs.push_back(B.cover.caps[pool[i]].center);
            if (wedge_at(xs, n) < thr) return false;
            std::vector<int> t;
            for (int i : idx) t.push_back(pool[i]);
            double w = check(t);
            if (w >= thr) {
                found = t;
                wedge = w;
                return true;
            }
            return false;
        }
        for (int i = from; i < int(pool.size()); ++i) {
            idx[pos] = i;
            if (rec(pos + 1, i + 1)) return true;
        }
        return false;
    };
    rec(0, 0);
    return found;
}

}  // namespace detail

// min over candidate V of max over caps off V; ties go to the V aligning the most
// caps at or above the value, then to the lowest candidate index
inline BroadResult broad_functional(const BroadContext& B, const std::vector<double>& a) {
    size_t m = B.cover.caps.size();
    if (a.size() != m) throw PreconditionError("broad_functional: one value per cap");
    for (double v : a)
        if (!(v >= 0)) throw PreconditionError("broad_functional: values must be nonnegative");
    std::vector<int> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = int(i);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a[x] > a[y]; });
    // grow the prefix of top caps while some candidate aligns them all
    std::vector<uint64_t> live(B.words, ~uint64_t(0));
    if (B.cands.size() % 64) live.back() = (uint64_t(1) << (B.cands.size() % 64)) - 1;
    auto any = [](const std::vector<uint64_t>& s) {
        for (auto w : s)
            if (w) return true;
        return false;
    };
    BroadResult r;
    size_t k = 0;
    for (; k < m; ++k) {
        std::vector<uint64_t> nxt(B.words);
        for (size_t w = 0; w < B.words; ++w) nxt[w] = live[w] & B.by_cap[order[k]][w];
        if (!any(nxt)) break;
        live.swap(nxt);
    }
    r.value = k < m ? a[order[k]] : 0.0;
    // every cap strictly above the value must be aligned: recompute the argmin set
    std::vector<uint64_t> arg(B.words, ~uint64_t(0));
    if (B.cands.size() % 64) arg.back() = (uint64_t(1) << (B.cands.size() % 64)) - 1;
    for (size_t i = 0; i < m; ++i)
        if (a[i] > r.value)
            for (size_t w = 0; w < B.words; ++w) arg[w] &= B.by_cap[i][w];
    std::vector<uint64_t> high(B.cap_words, 0);
    for (size_t i = 0; i < m; ++i)
        if (a[i] >= r.value) high[i / 64] |= uint64_t(1) << (i % 64);
    long best = -1;
    for (size_t v = 0; v < B.cands.size(); ++v) {
        if (!((arg[v / 64] >> (v % 64)) & 1)) continue;
        long cnt = 0;
        for (size_t w = 0; w < B.cap_words; ++w) cnt += std::popcount(B.by_cand[v][w] & high[w]);
        if (cnt > best) {
            best = cnt;
            r.V = v;
        }
    }
    if (r.value > 0) r.witness = detail::find_witness(B, a, r.value, r.V, r.witness_wedge);
    return r;
}

// direct min-max over all candidates; oracle for the bitset scan
inline double broad_value_direct(const BroadContext& B, const std::vector<double>& a) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t v = 0; v < B.cands.size(); ++v) {
        double mx = 0;
        for (size_t i = 0; i < a.size(); ++i)
            if (!B.aligned(v, i)) mx = std::max(mx, a[i]);
        best = std::min(best, mx);
    }
    return best;
}

struct BroadNarrowSplit {
    double lhs = 0;     // |sum_tau Uf_tau(z)|
    double narrow = 0;  // |sum over caps aligned with V_z|
    double broad = 0;
    size_t V = 0;
    std::vector<int> witness;
    double witness_wedge = 0;
    double constant = 0;  // lhs / (narrow + K^n broad)
};

inline BroadNarrowSplit pointwise_broad_narrow(const BroadContext& B, const std::vector<cplx>& u) {
    std::vector<double> a(u.size());
    for (size_t i = 0; i < u.size(); ++i) a[i] = std::abs(u[i]);
    auto br = broad_functional(B, a);
    BroadNarrowSplit s;
    cplx tot = 0, nar = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        tot += u[i];
        if (B.aligned(br.V, i)) nar += u[i];
    }
    s.lhs = std::abs(tot);
    s.narrow = std::abs(nar);
    s.broad = br.value;
    s.V = br.V;
    s.witness = br.witness;
    s.witness_wedge = br.witness_wedge;
    double den = s.narrow + std::pow(B.K, B.cover.n) * s.broad;
    s.constant = den > 0 ? s.lhs / den : 0.0;
    return s;
}

// largest C the split can need: lhs <= narrow + #caps * broad
inline double broad_narrow_bound(const CapCover& C) {
    return std::max(1.0, double(C.caps.size()) / std::pow(C.K, C.n));
}

// ---------- fuzzy norm ----------

struct CubeRegion {
    Vec center{0, 0, 0};
    double side = 1;
};

// sample indices (spatial index, time index) of grid points inside a closed cube
inline std::vector<std::pair<size_t, int>> cube_samples(const Grid& g, const CubeRegion& Q) {
    std::vector<std::pair<size_t, int>> out;
    double h = 0.5 * Q.side * (1 + 1e-12);
    std::vector<int> xs[2];
    for (int a = 0; a < g.n; ++a)
        for (int i = 0; i < g.Nx; ++i)
            if (std::abs(g.x(i) - Q.center[a]) <= h) xs[a].push_back(i);
    for (int j = 0; j < g.Nt; ++j) {
        if (std::abs(g.t(j) - Q.center[g.n]) > h) continue;
        for (int i0 : xs[0]) {
            if (g.n == 1) {
                out.push_back({size_t(i0), j});
                continue;
            }
            for (int i1 : xs[1]) out.push_back({size_t(i0) * size_t(g.Nx) + size_t(i1), j});
        }
    }
    return out;
}

// stencil = 1: shifts K^2 {-1,0,1}^{n+1} per factor; stencil = 0: point mass
inline double fuzzy_norm(const std::vector<SpaceTimeField>& F, double q, const CubeRegion& Q, double K,
                         int stencil = 1) {
    if (F.empty()) throw PreconditionError("fuzzy_norm: no fields");
    const Grid& g = F[0].grid;
    int n = g.n, d = n + 1;
    size_t m = F.size();
    double M = K * K;
    // margin: the shifted cube must stay inside the sampled time window
    double reach = 0.5 * Q.side + (stencil ? M : 0.0);
    if (Q.center[n] - reach < g.Tmin - 1e-9 || Q.center[n] + reach > g.Tmax + 1e-9)
        throw ConfigError("fuzzy_norm: insufficient time margin around Q");
    for (int a = 0; a < n; ++a)
        if (2 * reach > g.L) throw ConfigError("fuzzy_norm: insufficient spatial margin around Q");
    auto pts = cube_samples(g, Q);
    if (pts.empty()) throw ConfigError("fuzzy_norm: Q holds no samples");
    // shift per factor, in grid steps
    std::vector<std::array<long, 3>> sh;
    std::vector<double> wt;
    int per = stencil ? int(ipow(3, d)) : 1;
    double wsum = 0;
    for (int s = 0; s < per; ++s) {
        std::array<long, 3> st{0, 0, 0};
        Vec w{0, 0, 0};
        int r = s;
        for (int a = 0; a < d && stencil; ++a) {
            int o = r % 3 - 1;
            r /= 3;
            w[a] = o * M;
            st[a] = std::lround(w[a] / (a < n ? g.dx() : g.dt()));
        }
        sh.push_back(st);
        double e = stencil ? mollifier::eta_M(w, d, M, 1.0 / d) : 1.0;
        wt.push_back(e);
        wsum += e;
    }
    for (auto& e : wt) e /= wsum;
    size_t combos = size_t(ipow(long(per), int(m)));
    double cell = std::pow(g.dx(), n) * g.dt();
    std::vector<double> part(combos);
    parallel_for(combos, [&](size_t c) {
        std::vector<size_t> pick(m);
        size_t r = c;
        double w = 1;
        for (size_t j = 0; j < m; ++j) {
            pick[j] = r % per;
            r /= per;
            w *= wt[pick[j]];
        }
        double acc = 0;
        for (auto [i, t] : pts) {
            auto s = unflatten(i, n, g.Nx);
            double prod = 1;
            for (size_t j = 0; j < m; ++j) {
                auto& st = sh[pick[j]];
                long i0 = ((long(s[0]) - st[0]) % g.Nx + g.Nx) % g.Nx;
                size_t ii = size_t(i0);
                if (n == 2) ii = ii * size_t(g.Nx) + size_t(((long(s[1]) - st[1]) % g.Nx + g.Nx) % g.Nx);
                int tj = int(t - st[n]);
                prod *= std::pow(std::abs(F[j].at(ii, tj)), 1.0 / double(m));
            }
            acc += std::pow(prod, q);
        }
        part[c] = w * std::pow(acc * cell, 1 / q);
    });
    double s = 0;
    for (double v : part) s += v;
    return s;
}

// ---------- cube classification ----------

struct Thresholds {
    double C = 4, eps = 0.1, N = 100;
};

// ||F||_{L^q(w_Q)} with w_Q = (1 + dist_inf(z, Q)/side)^{-N}
inline double weighted_cube_norm(const SpaceTimeField& F, double q, const CubeRegion& Q, double N = 100) {
    const Grid& g = F.grid;
    int n = g.n;
    size_t P = g.points();
    double acc = 0;
    for (int j = 0; j < g.Nt; ++j)
        for (size_t i = 0; i < P; ++i) {
            auto s = unflatten(i, n, g.Nx);
            Vec z{g.x(s[0]), n == 2 ? g.x(s[1]) : 0.0, 0};
            z[n] = g.t(j);
            double dist = 0;
            for (int a = 0; a <= n; ++a)
                dist = std::max(dist, std::abs(z[a] - Q.center[a]) - 0.5 * Q.side);
            double w = dist <= 0 ? 1.0 : std::pow(1 + dist / Q.side, -N);
            if (w < 1e-300) continue;
            acc += w * std::pow(std::abs(F.at(i, j)), q);
        }
    return std::pow(acc * std::pow(g.dx(), n) * g.dt(), 1 / q);
}

inline double cube_norm(const SpaceTimeField& F, double q, const CubeRegion& Q) {
    double acc = 0;
    for (auto [i, j] : cube_samples(F.grid, Q)) acc += std::pow(std::abs(F.at(i, j)), q);
    return std::pow(acc * std::pow(F.grid.dx(), F.grid.n) * F.grid.dt(), 1 / q);
}

struct CubeClass {
    CubeIndex cube;
    bool broad = false;
    double lhs = 0, square_sum = 0;
    std::vector<int> witness;  // broad cubes: best transverse tuple
    double multilinear = 0;    // its geometric-mean L^q(w_Q) norm
    double bct_ratio = 0;      // lhs / (K^E multilinear)
};

struct Classification {
    std::vector<CubeClass> cubes;
    size_t broad() const {
        size_t b = 0;
        for (auto& c : cubes) b += c.broad;
        return b;
    }
    size_t narrow() const { return cubes.size() - broad(); }
};

inline SpaceTimeField spacetime_on(const Datum& f) {
    const Grid& g = f.grid;
    SpaceTimeField F{g, std::vector<cplx>(g.points() * size_t(g.Nt))};
    parallel_for(size_t(g.Nt), [&](size_t j) { synthesize_into(f, g.t(int(j)), F.values.data() + j * g.points()); });
    return F;
}

inline Classification classify_cubes(const CubeFamily& Qs, const Datum& f, const CapCover& cover, double q,
                                     const Thresholds& th = {}) {
    int n = cover.n;
    double K = cover.K;
    if (q < 2 || (n > 1 && q > 2.0 * (n + 1) / (n - 1))) throw PreconditionError("classify_cubes: q outside [2, 2(n+1)/(n-1)]");
    if (std::abs(Qs.M - K * K) > 1e-9 * K * K) throw PreconditionError("classify_cubes: cubes must have side K^2");
    auto parts = split_by_cover(f, cover);
    std::vector<size_t> live;
    for (size_t i = 0; i < parts.size(); ++i)
        if (!parts[i].support().empty()) live.push_back(i);
    SpaceTimeField U = spacetime_on(f);
    std::vector<SpaceTimeField> Ut;
    for (size_t i : live) Ut.push_back(spacetime_on(parts[i]));
    // transverse tuples among the live caps
    CapCover sub{n, K, {}};
    for (size_t i : live) sub.caps.push_back(cover.caps[i]);
    auto tuples = sub.caps.size() >= size_t(n + 1) ? enumerate_transverse_tuples(sub, K)
                                                   : std::vector<std::vector<int>>{};
    double E = 4.0 * n * n;
    Classification out;
    std::vector<CubeIndex> cs(Qs.cubes.begin(), Qs.cubes.end());
    out.cubes.resize(cs.size());
    parallel_for(cs.size(), [&](size_t k) {
        CubeRegion Q{Qs.center(cs[k]), Qs.M};
        CubeClass c;
        c.cube = cs[k];
        c.lhs = cube_norm(U, q, Q);
        double s2 = 0;
        for (auto& F : Ut) {
            double v = weighted_cube_norm(F, q, Q, th.N);
            s2 += v * v;
        }
        c.square_sum = std::sqrt(s2);
        c.broad = c.lhs > 2 * th.C * std::pow(K, th.eps) * c.square_sum;
        if (c.broad) {
            for (auto& t : tuples) {
                SpaceTimeField G{U.grid, std::vector<cplx>(U.values.size())};
                for (size_t z = 0; z < G.values.size(); ++z) {
                    double p = 1;
                    for (int j : t) p *= std::pow(std::abs(Ut[j].values[z]), 1.0 / (n + 1));
                    G.values[z] = p;
                }
                double v = weighted_cube_norm(G, q, Q, th.N);
                if (v > c.multilinear) {
                    c.multilinear = v;
                    c.witness.clear();
                    for (int j : t) c.witness.push_back(int(live[j]));
                }
            }
            c.bct_ratio = c.multilinear > 0 ? c.lhs / (std::pow(K, E) * c.multilinear)
                                            : std::numeric_limits<double>::infinity();
        }
        out.cubes[k] = c;
    });
    return out;
}

struct DecouplingRatio {
    double lhs = 0, trivial_rhs = 0, square_sum = 0, ratio = 0, trivial_factor = 1;
    std::vector<int> caps;
};

// lhs = ||U f_V||_{L^q(Q)} against the square sum over the V-aligned caps
inline DecouplingRatio decoupling_ratio(const Datum& f, const SubspaceCandidate& V, const CubeRegion& Q,
                                        double q, const CapCover& cover, double Cn = 4) {
    int d = cover.n;
    if (q < 2 || (d > 1 && q > 2.0 * (d + 1) / (d - 1))) throw PreconditionError("decoupling_ratio: q outside range");
    double K = cover.K;
    auto parts = split_by_cover(f, cover);
    auto al = aligned_caps(V, cover, K, Cn);
    DecouplingRatio r;
    Datum fV(f.grid);
    fV.offset = f.offset;
    double s2 = 0;
    for (int i : al) {
        if (parts[i].support().empty()) continue;
        r.caps.push_back(i);
        fV += parts[i];
        double v = weighted_cube_norm(spacetime_on(parts[i]), q, Q);
        s2 += v * v;
    }
    r.square_sum = std::sqrt(s2);
    r.lhs = cube_norm(spacetime_on(fV), q, Q);
    r.trivial_factor = std::pow(K, (d - 1) * (0.5 - 1 / q));
    r.trivial_rhs = r.trivial_factor * r.square_sum;
    r.ratio = r.square_sum > 0 ? r.lhs / r.square_sum : 0.0;
    return r;
}

}  // namespace wplab
