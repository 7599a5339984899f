#pragma once
// Schroedinger evolution, space-time fields, maximal and linearised maximal operators.

#include <mutex>
#include <unordered_map>

#include "field.hpp"

namespace wplab {

// multiplier e^{it|xi|^2} applied to the coefficients
inline Datum evolve(Datum f, double t) {
    for (size_t i = 0; i < f.coef.size(); ++i)
        if (f.coef[i] != cplx(0)) f.coef[i] *= std::polar(1.0, t * f.xi2(i));
    return f;
}

inline SpatialField propagate(const Datum& f, double t) { return synthesize(f, t); }

// per-mode phase step below pi/8
inline double time_step_bound(double band) {
    return band > 0 ? pi / (8 * band * band) : std::numeric_limits<double>::infinity();
}

// calls fn(j, slice) for each time sample; slices computed in parallel,
// fn must only touch per-j state
template <class Fn>
void for_each_slice(const Datum& f, const std::vector<double>& times, Fn&& fn) {
    size_t P = f.grid.points();
    parallel_for(times.size(), [&](size_t j) {
        std::vector<cplx> buf(P);
        synthesize_into(f, times[j], buf.data());
        fn(j, buf.data());
    });
}

inline SpaceTimeField solve_spacetime(const Datum& f, double R) {
    const Grid& g = f.grid;
    g.validate();
    if (g.L < 4 * R) throw ConfigError("solve_spacetime: period L must be >= 4R");
    if (g.Tmin > -R || g.Tmax < R) throw ConfigError("solve_spacetime: time window must contain [-R,R]");
    SpaceTimeField F{g, std::vector<cplx>(g.points() * size_t(g.Nt))};
    size_t P = g.points();
    parallel_for(size_t(g.Nt), [&](size_t j) { synthesize_into(f, g.t(int(j)), F.values.data() + j * P); });
    return F;
}

struct MaximalField {
    Grid grid;
    std::vector<double> value;   // per spatial sample
    std::vector<double> argmax;  // sampled time attaining it (smallest on ties)
    std::vector<double> times;

    SpatialField as_field() const {
        SpatialField F{grid, std::vector<cplx>(value.size())};
        for (size_t i = 0; i < value.size(); ++i) F.values[i] = value[i];
        return F;
    }
};

struct TimeWindow {
    double t0 = 0, t1 = 1;
    int nt = 2;
    double step() const { return nt > 1 ? (t1 - t0) / (nt - 1) : 0.0; }
    std::vector<double> samples() const {
        std::vector<double> s(nt);
        for (int j = 0; j < nt; ++j) s[j] = t0 + j * step();
        return s;
    }
    static TimeWindow for_band(double t0, double t1, double band) {
        int nt = int(std::ceil((t1 - t0) / time_step_bound(band))) + 1;
        return {t0, t1, std::max(nt, 2)};
    }
};

inline MaximalField maximal_function(const Datum& f, const TimeWindow& w) {
    f.grid.validate();
    double band = f.band_radius();
    if (w.nt < 2 || !(w.t1 > w.t0)) throw ConfigError("maximal_function: bad time window");
    if (w.step() > time_step_bound(band) * (1 + 1e-12))
        throw ConfigError("maximal_function: time grid undersampled for datum band");
    size_t P = f.grid.points();
    MaximalField M{f.grid, std::vector<double>(P, -1.0), std::vector<double>(P, w.t0), w.samples()};
    // per-slice moduli reduced in time order for a deterministic tie-break
    const size_t chunk = 64;
    std::vector<std::vector<double>> mods(chunk, std::vector<double>(P));
    for (size_t base = 0; base < M.times.size(); base += chunk) {
        size_t cnt = std::min(chunk, M.times.size() - base);
        parallel_for(cnt, [&](size_t c) {
            std::vector<cplx> buf(P);
            synthesize_into(f, M.times[base + c], buf.data());
            for (size_t i = 0; i < P; ++i) mods[c][i] = std::abs(buf[i]);
        });
        for (size_t c = 0; c < cnt; ++c)
            for (size_t i = 0; i < P; ++i)
                if (mods[c][i] > M.value[i]) {
                    M.value[i] = mods[c][i];
                    M.argmax[i] = M.times[base + c];
                }
    }
    return M;
}

struct TimeAssignment {
    double t0 = 0, t1 = 1;
    std::vector<double> t;  // per spatial sample
};

inline double linearized_maximal(const Datum& f, const TimeAssignment& a, const Region& region = Region::all()) {
    const Grid& g = f.grid;
    size_t P = g.points();
    if (a.t.size() != P) throw PreconditionError("linearized_maximal: assignment size mismatch");
    for (double t : a.t)
        if (t < a.t0 || t > a.t1) throw PreconditionError("linearized_maximal: t(x) outside window");
    std::vector<double> distinct(a.t.begin(), a.t.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    SpatialField F{g, std::vector<cplx>(P)};
    if (distinct.size() * 4 <= P) {
        std::unordered_map<double, size_t> slot;
        for (size_t k = 0; k < distinct.size(); ++k) slot[distinct[k]] = k;
        std::vector<std::vector<size_t>> who(distinct.size());
        for (size_t i = 0; i < P; ++i) who[slot[a.t[i]]].push_back(i);
        parallel_for(distinct.size(), [&](size_t k) {
            std::vector<cplx> buf(P);
            synthesize_into(f, distinct[k], buf.data());
            for (size_t i : who[k]) F.values[i] = buf[i];
        });
    } else {
        parallel_for(P, [&](size_t i) {
            auto s = unflatten(i, g.n, g.Nx);
            Vec x{g.x(s[0]), g.n == 2 ? g.x(s[1]) : 0.0, 0};
            F.values[i] = evaluate_direct(f, x, a.t[i]);
        });
    }
    return lp_norm(F, 2, region);
}

}  // namespace wplab
