#include "common.hpp"

using namespace wt;

TEST(Geometry, GaussMapValues) {
    Vec a = gauss_map({0, 0, 0}, 1);
    EXPECT_EQ(a[0], 0);
    EXPECT_EQ(a[1], 1);
    Vec b = gauss_map({0.5, 0, 0}, 1);
    EXPECT_NEAR(b[0], -1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(b[1], 1 / std::sqrt(2.0), 1e-15);
    Vec c = gauss_map({0.5, 0, 0}, 2);
    EXPECT_NEAR(c[0], -1 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(c[1], 0);
    EXPECT_NEAR(c[2], 1 / std::sqrt(2.0), 1e-15);
}

TEST(Geometry, GaussMapUnitNorm) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int n : {1, 2})
        for (int k = 0; k < 1000; ++k) EXPECT_NEAR(norm(gauss_map({U(rng), U(rng), 0}, n), n + 1), 1, 1e-14);
}

TEST(Geometry, RescalingMapsOnUnitCap) {
    for (int n : {1, 2}) {
        auto R = cap_rescaling_maps(Cap{{0, 0, 0}, 1}, n);
        for (int a = 0; a <= n; ++a)
            for (int b = 0; b <= n; ++b) EXPECT_EQ(R.Lmat[a][b], a == b ? 1 : 0);
        Vec z{0.3, -0.2, 0.7};
        Vec w = R.affine(z);
        for (int a = 0; a <= n; ++a) EXPECT_EQ(w[a], z[a]);
    }
}

TEST(Geometry, RescalingMapsShiftedCap) {
    auto R = cap_rescaling_maps(Cap{{1, 0, 0}, 0.5}, 1);
    EXPECT_DOUBLE_EQ(R.Lmat[0][0], 0.5);
    EXPECT_DOUBLE_EQ(R.Lmat[0][1], 1);
    EXPECT_DOUBLE_EQ(R.Lmat[1][0], 0);
    EXPECT_DOUBLE_EQ(R.Lmat[1][1], 0.25);
    Vec s = R.affine(lift({1, 0, 0}, 1));
    EXPECT_DOUBLE_EQ(s[0], 1.5);
    EXPECT_DOUBLE_EQ(s[1], 2.25);
    Vec back = R.affine_inverse(s);
    EXPECT_NEAR(back[0], 1, 1e-15);
    EXPECT_NEAR(back[1], 1, 1e-15);
}

TEST(Geometry, CompositionClosure) {
    // A_{2} o A_{1}^{-1} maps Sigma over cap 1 onto Sigma over cap 2
    int n = 2;
    Cap c1{{0.2, -0.3, 0}, 0.25}, c2{{-0.5, 0.1, 0}, 0.1};
    auto A1 = cap_rescaling_maps(c1, n), A2 = cap_rescaling_maps(c2, n);
    for (auto& xi : c1.samples(n)) {
        Vec w = A2.affine(A1.affine_inverse(lift(xi, n)));
        Vec eta{(xi[0] - c1.center[0]) / c1.radius, (xi[1] - c1.center[1]) / c1.radius, 0};
        Vec target = lift({c2.center[0] + c2.radius * eta[0], c2.center[1] + c2.radius * eta[1], 0}, n);
        for (int a = 0; a <= n; ++a) EXPECT_NEAR(w[a], target[a], 1e-13);
    }
}

TEST(Geometry, RescaleDatumIdentityAndNorm) {
    Grid g = small_grid(1);
    Datum f = ball_datum(g, 1.0, 2);
    Datum same = rescale_datum(f, Cap{{0, 0, 0}, 1});
    for (size_t i = 0; i < f.coef.size(); ++i) EXPECT_EQ(same.coef[i], f.coef[i]);
    for (int n : {1, 2}) {
        Grid h = small_grid(n);
        Cap cap{{0.3, n == 2 ? -0.2 : 0.0, 0}, 0.25};
        std::mt19937_64 rng(4);
        Datum d = random_in_cap(h, cap, rng);
        EXPECT_LT(rel(rescale_datum(d, cap).norm(), d.norm()), 1e-12);
    }
}

TEST(Geometry, RescaleSingleModePointwise) {
    int n = 2;
    Grid g = small_grid(n);
    Cap cap{{0.4, 0.1, 0}, 0.3};
    Datum f(g);
    f.set({2, 1}, cplx(1, 1));
    ASSERT_TRUE(cap.contains(f.xi(f.support()[0]), n));
    Datum ft = rescale_datum(f, cap);
    ASSERT_EQ(ft.support().size(), 1u);
    Vec eta = ft.xi(ft.support()[0]), xi = f.xi(f.support()[0]);
    for (int a = 0; a < n; ++a) EXPECT_NEAR(eta[a], (xi[a] - cap.center[a]) / cap.radius, 1e-12);
    auto M = cap_rescaling_maps(cap, n);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            Vec z{2.0 * i - 15, 1.5 * j - 11, 0.5 * (i - j)};
            Vec w = M.spacetime(z);
            double lhs = std::abs(evaluate_direct(f, {z[0], z[1], 0}, z[2]));
            double rhs = std::pow(cap.radius, n / 2.0) * std::abs(evaluate_direct(ft, {w[0], w[1], 0}, w[2]));
            EXPECT_NEAR(lhs, rhs, 1e-12 * lhs);
        }
}

TEST(Geometry, WedgeValues) {
    Cap a{{0, 0, 0}, 0.01}, b{{0.6, 0, 0}, 0.01};
    EXPECT_EQ(wedge_transversality({a, a}, 1), 0);
    double xi = 0.6, expect = 2 * xi / std::sqrt(1 + 4 * xi * xi);
    EXPECT_NEAR(wedge_at({a.center, b.center}, 1), expect, 1e-14);
    EXPECT_LE(wedge_transversality({a, b}, 1), expect);
    EXPECT_EQ(wedge_transversality({a, b}, 1), wedge_transversality({b, a}, 1));
}

TEST(Geometry, WedgeSampledInfimumNearDenseOracle) {
    int n = 2;
    std::vector<Cap> caps{{{0, 0, 0}, 0.05}, {{0.5, 0, 0}, 0.05}, {{0, 0.5, 0}, 0.05}};
    double w = wedge_transversality(caps, n);
    EXPECT_GT(w, 0);
    // dense: 9x9 disc samples per cap
    std::vector<std::vector<Vec>> S(3);
    for (int j = 0; j < 3; ++j)
        for (int a = -4; a <= 4; ++a)
            for (int b = -4; b <= 4; ++b) {
                Vec p{caps[j].center[0] + caps[j].radius * a / 4.0, caps[j].center[1] + caps[j].radius * b / 4.0, 0};
                if (caps[j].contains(p, n)) S[j].push_back(p);
            }
    double dense = 1e9;
    for (auto& p : S[0])
        for (auto& q : S[1])
            for (auto& r : S[2]) dense = std::min(dense, wedge_at({p, q, r}, n));
    EXPECT_NEAR(w, dense, 0.05 * dense);
    // permutation invariance
    EXPECT_NEAR(wedge_transversality({caps[2], caps[0], caps[1]}, n), w, 1e-15);
}

TEST(Geometry, TransverseTuplesBruteForce) {
    CapCover C{1, 2, {}};
    for (double c : {-0.75, -0.25, 0.25, 0.75}) C.caps.push_back(Cap{{c, 0, 0}, 0.25});
    auto T = enumerate_transverse_tuples(C, 2);
    std::set<std::vector<int>> got(T.begin(), T.end()), want;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (wedge_transversality({C.caps[i], C.caps[j]}, 1) >= 0.5) want.insert({i, j});
    EXPECT_EQ(got, want);
    EXPECT_TRUE(got.count({0, 3}));
    CapCover same{1, 2, {C.caps[1], C.caps[1], C.caps[1]}};
    EXPECT_TRUE(enumerate_transverse_tuples(same, 2).empty());
}

TEST(Geometry, TubeZones) {
    Tube T;
    T.n = 1;
    T.rho = 1024;
    T.x0 = {5, 0, 0};
    T.v = {0.5, 0, 0};
    auto zone = tube_region(T, 0.1);
    EXPECT_EQ(zone({5, 0, 0}), TubeZone::core);
    for (double t : {-1024.0, -3.0, 0.0, 700.0, 1024.0}) EXPECT_EQ(zone({5 + 0.5 * t, t, 0}), TubeZone::core);
    double d = std::pow(1024.0, 0.55);
    EXPECT_EQ(zone({5 + d + 10 * 0.5, 10, 0}), TubeZone::enlarged);
    EXPECT_EQ(zone({5 + 200, 0, 0}), TubeZone::outside);
    EXPECT_THROW(tube_region(T, 1.5), PreconditionError);
}

TEST(Geometry, StripsForCap) {
    double R = 64, K = 4;
    auto S = strips_for_cap(Cap{{0, 0, 0}, 0.25}, R, K, 1);
    // exhaustive: the strip centred at 16 i meets the ball iff |16 i| <= R + R/K
    size_t want = 0;
    for (long i = -100; i <= 100; ++i)
        if (std::abs(16.0 * i) <= R + R / K) ++want;
    EXPECT_EQ(S.size(), want);
    for (auto& s : S) EXPECT_EQ(std::fmod(s.x0()[0], 16.0), 0.0);
    auto one = strips_for_cap(Cap{{0, 0, 0}, 1}, R, 1, 1);
    for (double x : {-63.0, 0.0, 63.0})
        for (double t : {-60.0, 60.0}) {
            int hits = 0;
            for (auto& s : one) hits += s.contains({x, t, 0});
            EXPECT_GE(hits, 1);
        }
    // closed strips overlap on their edges; the nearest core line is x(S) = 0
    const Strip* best = nullptr;
    for (auto& s : S)
        if (s.contains({0, 0, 0}) && (!best || s.offset({0, 0, 0}) < best->offset({0, 0, 0}))) best = &s;
    ASSERT_NE(best, nullptr);
    EXPECT_EQ(best->lattice[0], 0);
}

TEST(Geometry, StripRescaling) {
    Strip S{1, {2, 0}, {0.4, 0, 0}, 256, 4};
    auto A = strip_rescaling(S);
    Vec o = A({S.x0()[0], 0, 0});
    EXPECT_EQ(o[0], 0);
    EXPECT_EQ(o[1], 0);
    Vec c = A({S.x0()[0] + 0.4 * 100, 100, 0});
    EXPECT_NEAR(c[0], 0, 1e-13);
    EXPECT_DOUBLE_EQ(c[1], 100 / 16.0);
    double w = S.R / S.K;
    for (double t : {-S.R, S.R})
        for (double s : {-w, w}) {
            Vec b = A({S.x0()[0] + s + t * 0.4, t, 0});
            EXPECT_LE(std::abs(b[0]), S.R / (S.K * S.K) * (1 + 1e-12));
            EXPECT_LE(std::abs(b[1]), S.R / (S.K * S.K) * (1 + 1e-12));
        }
    Vec z{3, -7, 0};
    Vec back = A.inverse(A(z));
    EXPECT_NEAR(back[0], 3, 1e-12);
    EXPECT_NEAR(back[1], -7, 1e-12);
}

TEST(Geometry, ParallelepipedCover) {
    Strip S{1, {0, 0}, {0.5, 0, 0}, 256, 4};
    auto P = parallelepiped_cover(S, 2);
    // image cubes sit on the Kt^2 lattice exactly
    auto A = strip_rescaling(S);
    for (auto& p : P)
        for (double a : {-2.0, 2.0})
            for (double b : {-2.0, 2.0}) {
                Vec corner = A.inverse({4.0 * p.cube[0] + a, 4.0 * p.cube[1] + b, 0});
                EXPECT_TRUE(p.contains(corner));
                Vec w = A(corner);
                EXPECT_NEAR(std::remainder(w[0], 2.0), 0, 1e-12);
                EXPECT_NEAR(std::remainder(w[1], 2.0), 0, 1e-12);
            }
    // volume count: strip image is [-16,16]^2, cells of side 4
    double cells = (32.0 / 4) * (32.0 / 4);
    EXPECT_GE(double(P.size()), cells);
    EXPECT_LE(double(P.size()), (32.0 / 4 + 2) * (32.0 / 4 + 2));
    // every strip point is covered
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int k = 0; k < 500; ++k) {
        double t = S.R * U(rng), x = S.x0()[0] + t * S.v[0] + S.R / S.K * U(rng);
        bool in = false;
        for (auto& p : P) in |= p.contains({x, t, 0});
        EXPECT_TRUE(in);
    }
    // K = Kt = 1: unit cubes
    Strip U1{1, {0, 0}, {0, 0, 0}, 4, 1};
    for (auto& p : parallelepiped_cover(U1, 1)) EXPECT_EQ(p.side(), 1);
}
