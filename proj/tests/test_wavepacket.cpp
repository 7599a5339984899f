#include <sstream>

#include "common.hpp"

using namespace wt;

namespace {

Grid packet_grid(int n, double L, int Nx) {
    Grid g = small_grid(n, L, Nx);
    return g;
}

Datum half_ball(const Grid& g, uint64_t seed) { return ball_datum(g, 0.5, seed); }

std::vector<size_t> all_tubes(const PacketFamily& F) {
    std::vector<size_t> s(F.tubes.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = i;
    return s;
}

}  // namespace

TEST(Wavepacket, PacketAtOriginIsEvenAndReal) {
    Grid g = packet_grid(1, 256, 512);
    Tube T;
    T.rho = 64;
    Datum f = build_packet_datum(T, g);
    for (size_t i = 0; i < f.coef.size(); ++i) {
        auto k = f.k_of(i);
        if (k[0] == -g.Nx / 2) continue;
        EXPECT_EQ(f.coef[i].imag(), 0);
        EXPECT_EQ(f.coef[i], f.coef[f.index_of({-k[0], 0})]);
    }
}

TEST(Wavepacket, PacketIsNormalised) {
    for (int n : {1, 2}) {
        Grid g = n == 1 ? packet_grid(1, 256, 512) : packet_grid(2, 64, 128);
        Tube T;
        T.n = n;
        T.rho = n == 1 ? 100 : 16;
        T.x0 = {3, n == 2 ? -5.0 : 0.0, 0};
        T.v = {0.6, n == 2 ? -0.4 : 0.0, 0};
        EXPECT_NEAR(build_packet_datum(T, g).norm(), 1, 1e-10);
    }
    Tube bad;
    bad.rho = 4;
    EXPECT_THROW(build_packet_datum(bad, packet_grid(1, 64, 128)), PreconditionError);
    bad.rho = 16;
    bad.v = {-1.9, 0, 0};
    EXPECT_THROW(build_packet_datum(bad, packet_grid(1, 64, 128)), PreconditionError);
}

TEST(Wavepacket, PacketStaysOnItsTube) {
    // at short times the mass sits inside the enlarged tube
    Grid g = packet_grid(1, 512, 1024);
    Tube T;
    T.rho = 256;
    T.x0 = {20, 0, 0};
    T.v = {-0.5, 0, 0};
    Datum psi = build_packet_datum(T, g);
    for (double t : {0.0, 8.0, -8.0}) {
        auto F = synthesize(psi, t);
        double in = 0, all = 0;
        for (int i = 0; i < g.Nx; ++i) {
            double m = std::norm(F.values[i]);
            all += m;
            if (T.zone({g.x(i), t, 0}, 0.1, g.L) != TubeZone::outside) in += m;
        }
        EXPECT_GT(in / all, 0.98);
    }
}

TEST(Wavepacket, PacketLowerBoundOnInnerTube) {
    // |U psi_T| >= c R^{-n/4} on (1/100) T, c >= 0.01
    for (double R : {64.0, 256.0}) {
        Grid g = packet_grid(1, 8 * R, int(std::bit_ceil(unsigned(32 * R / pi))));
        Tube T;
        T.rho = R;
        T.v = {0.4, 0, 0};
        Datum psi = build_packet_datum(T, g);
        double lo = 1e9;
        for (int j = -4; j <= 4; ++j) {
            double t = j * R / 400;
            for (int s = -2; s <= 2; ++s) {
                double x = t * T.v[0] + s * std::sqrt(R) / 200;
                lo = std::min(lo, std::abs(evaluate_direct(psi, {x, 0, 0}, t)));
            }
        }
        EXPECT_GE(lo / std::pow(R, -0.25), 0.01);
    }
}

TEST(Wavepacket, ZeroDatumGivesEmptyFamily) {
    Datum z(packet_grid(1, 64, 128));
    auto F = decompose(z, 64);
    EXPECT_TRUE(F.tubes.empty());
    EXPECT_EQ(localization_report(F, 0.1).max(), 0);
}

TEST(Wavepacket, RejectsWideBand) {
    Datum f = ball_datum(packet_grid(1, 64, 128), 0.9, 1);
    EXPECT_THROW(decompose(f, 64), PreconditionError);
}

TEST(Wavepacket, ReconstructionAndDispersion) {
    struct Case {
        int n;
        double L, rho;
        int Nx;
    };
    for (auto c : {Case{1, 256, 64, 512}, Case{1, 512, 256, 1024}, Case{2, 64, 16, 128}}) {
        Datum f = half_ball(packet_grid(c.n, c.L, c.Nx), 3);
        auto F = decompose(f, c.rho);
        EXPECT_LE((F.total() - f).norm(), 1e-8 * f.norm());
        EXPECT_TRUE(dispersion_holds(F, f));
    }
}

TEST(Wavepacket, SingleModeTubesMoveWithItsVelocity) {
    Grid g = packet_grid(1, 256, 512);
    Datum f(g);
    f.set({9, 0}, 1.0);
    Vec xi0 = f.xi(f.support()[0]);
    auto F = decompose(f, 64);
    ASSERT_FALSE(F.tubes.empty());
    for (auto& e : F.tubes) EXPECT_LE(std::abs(F.tube(e.key).v[0] + 2 * xi0[0]), 2 / std::sqrt(64.0) + 1e-12);
}

TEST(Wavepacket, PacketDecomposesNearItself) {
    double rho = 256;
    Grid g = packet_grid(1, 512, 1024);
    Tube T0;
    T0.rho = rho;
    T0.x0 = {48, 0, 0};
    T0.v = {-0.4, 0, 0};
    Datum psi = build_packet_datum(T0, g);
    auto F = decompose(psi, rho);
    EXPECT_LE((F.total() - psi).norm(), 1e-8);
    // psi^ fills B(0, 4 rho^{-1/2}) so velocities spread by 8 rho^{-1/2}
    auto near_mass = [&](double vwin) {
        std::vector<size_t> near;
        for (size_t i = 0; i < F.tubes.size(); ++i) {
            Tube T = F.tube(F.tubes[i].key);
            if (std::abs(wrap(T.x0[0] - T0.x0[0], g.L)) <= 2 * std::sqrt(rho) &&
                std::abs(T.v[0] - T0.v[0]) <= vwin / std::sqrt(rho))
                near.push_back(i);
        }
        double m = F.sum(near).norm();
        return m * m;
    };
    RecordProperty("mass_within_v4", std::to_string(near_mass(4)));
    EXPECT_GE(near_mass(8), 0.9);
}

TEST(Wavepacket, Orthogonality) {
    Datum f = half_ball(packet_grid(1, 256, 512), 5);
    auto F = decompose(f, 64);
    auto single = orthogonality_constant(F, {{3}});
    EXPECT_NEAR(single.subset_ratio, 1, 1e-12);
    auto o = orthogonality_constant(F, random_subsets(32, F.tubes.size(), 9));
    EXPECT_LE(o.subset_ratio, 10);
    EXPECT_LE(o.total_ratio, 10);
}

TEST(Wavepacket, DisjointCapsNearlyOrthogonal) {
    // cap spacing rho^{-1/2}/2, support radius 4 rho^{-1/2}: 17 steps apart are disjoint
    Datum f = half_ball(packet_grid(1, 1024, 2048), 5);
    auto F = decompose(f, 1024);
    std::map<long, size_t> first;
    for (size_t i = 0; i < F.tubes.size(); ++i)
        if (F.tubes[i].key.cap[0] % 17 == 0) first.try_emplace(F.tubes[i].key.cap[0], i);
    std::vector<size_t> W;
    for (auto& [m, i] : first) W.push_back(i);
    ASSERT_GE(W.size(), 2u);
    EXPECT_LE(orthogonality_constant(F, {W}).subset_ratio, 2);
}

TEST(Wavepacket, LocalizationDecreasesInDelta) {
    Datum f = half_ball(packet_grid(1, 256, 512), 6);
    auto F = decompose(f, 64);
    double prev = std::numeric_limits<double>::infinity();
    for (double d : {0.05, 0.1, 0.2, 0.3}) {
        double v = localization_report(F, d).max();
        EXPECT_LE(v, prev);
        prev = v;
    }
}

// Threshold not reached at this scale: the profile is 1 on B(0,2) in units of
// rho^{-1/2}, so velocities spread by 4 rho^{-1/2} and the packet drifts by
// 4 rho^{1/2} over |t| <= rho, well past rho^{1/2+delta} for delta = 0.1.
TEST(Wavepacket, DISABLED_ExteriorDecayAtFullScale) {
    double rho = 1024;
    Grid g = packet_grid(1, 4096, 8192);
    Tube T;
    T.rho = rho;
    Datum psi = build_packet_datum(T, g);
    double v = packet_exterior_sup(T, psi, 0.1, rho);
    RecordProperty("exterior_sup", std::to_string(v));
    EXPECT_LE(v, 1e-6);
}

TEST(Wavepacket, StripGrouping) {
    double R = 256, K = 4;
    Grid g = packet_grid(1, 4 * R, int(std::bit_ceil(unsigned(16 * R / pi))));
    Cap tau{{0.25, 0, 0}, 0.5 / K};
    std::mt19937_64 rng(2);
    Datum f = random_in_cap(g, tau, rng);
    auto G = group_by_strip(f, tau, R, K);
    EXPECT_LE((G.total() - f).norm(), 1e-8 * f.norm());
    size_t total = 0;
    for (auto& m : G.members) total += m.size();
    EXPECT_EQ(total, G.family.tubes.size());
    // a single packet fills one strip
    Tube T;
    T.rho = 4 * R;  // support radius 4 rho^{-1/2} must fit in tau
    T.x0 = {64, 0, 0};
    T.v = {-0.5, 0, 0};
    Cap small{{0.25, 0, 0}, 0.5 / K};
    Datum psi = build_packet_datum(T, g);
    auto P = group_by_strip(psi, small, R, K);
    // scale-R tubes of a wider packet leak a little into the neighbours
    size_t top = 0;
    for (size_t s = 0; s < P.strips.size(); ++s)
        if (P.datum(s).norm() > P.datum(top).norm()) top = s;
    EXPECT_EQ(P.strips[top].lattice[0], 1);
    EXPECT_GE(std::pow(P.datum(top).norm(), 2), 0.95);
    EXPECT_THROW(group_by_strip(f, Cap{{0.25, 0, 0}, 0.3}, R, K), PreconditionError);
}

TEST(Wavepacket, StripLeakage) {
    double R = 1024, K = 4;
    Grid g = packet_grid(1, 4 * R, 8192);
    Cap tau{{0.125, 0, 0}, 0.5 / K};
    std::mt19937_64 rng(8);
    Datum f = random_in_cap(g, tau, rng);
    auto G = group_by_strip(f, tau, R, K);
    double worst = 0;
    for (size_t s = 0; s < G.strips.size(); s += std::max<size_t>(1, G.strips.size() / 3))
        worst = std::max(worst, strip_leakage(G, s, f.norm()));
    EXPECT_LE(worst, 1e-5);
}

TEST(Wavepacket, TimeIntervals) {
    double R = 1024;
    PacketFamily F;
    F.grid = packet_grid(1, 4096, 8192);
    F.rho = R;
    F.tubes.push_back({TubeKey{{3, 0}, {0, 0}}, 1.0, 1.0});    // |v| = 3/32, too slow
    F.tubes.push_back({TubeKey{{32, 0}, {0, 0}}, 1.0, 1.0});   // |v| = 1 through the origin
    F.tubes.push_back({TubeKey{{-32, 0}, {40, 0}}, 1.0, 1.0});
    auto I = assign_time_intervals(F, R, 0.1);
    std::map<size_t, size_t> count;
    for (auto& [j, tubes] : I)
        for (size_t i : tubes) ++count[i];
    EXPECT_EQ(count.count(0), 0u);
    EXPECT_GE(count[1], 1u);
    EXPECT_LE(double(count[1]), 32 * std::pow(R, 0.1));
    EXPECT_LE(double(count[2]), 32 * std::pow(R, 0.1));
    // the |v| = 1 tube at x = 0 sits in the first interval
    EXPECT_TRUE(std::find(I[0].begin(), I[0].end(), 1u) != I[0].end());
}

TEST(Wavepacket, JsonlExport) {
    Datum f = half_ball(packet_grid(1, 64, 128), 1);
    auto F = decompose(f, 64);
    std::ostringstream os;
    export_jsonl(F, os);
    std::istringstream is(os.str());
    std::string line;
    size_t n = 0;
    while (std::getline(is, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("x") && j.contains("v") && j.contains("rho") && j.contains("coef"));
        EXPECT_EQ(j["rho"].get<double>(), 64);
        ++n;
    }
    EXPECT_EQ(n, F.tubes.size());
}
