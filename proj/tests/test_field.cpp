#include "common.hpp"

using namespace wt;

TEST(Field, PlancherelMatchesSobolevZero) {
    for (int n : {1, 2})
        for (uint64_t s = 1; s <= 5; ++s) {
            Datum f = ball_datum(small_grid(n), 1.0, s);
            f *= cplx(3.0, -1.0);
            EXPECT_LT(rel(lp_norm(synthesize(f, 0), 2), sobolev_norm(f, 0)), 1e-10);
        }
}

TEST(Field, SynthesisAgreesWithDirectSum) {
    for (int n : {1, 2}) {
        Grid g = small_grid(n);
        Datum f = ball_datum(g, 1.0, 7);
        f.offset = {0.25, n == 2 ? -0.5 : 0.0, 0};
        double t = 3.7;
        auto F = synthesize(f, t);
        for (size_t i = 0; i < F.values.size(); i += 97) {
            auto s = unflatten(i, n, g.Nx);
            Vec x{g.x(s[0]), n == 2 ? g.x(s[1]) : 0.0, 0};
            EXPECT_LT(std::abs(F.values[i] - evaluate_direct(f, x, t)), 1e-12);
        }
    }
}

TEST(Field, SingleModeHasConstantModulus) {
    Grid g = small_grid(2);
    Datum f(g);
    f.set({3, -2}, cplx(0, 2));
    auto F = synthesize(f, 1.3);
    double expect = 2 * f.cell();
    for (auto& v : F.values) EXPECT_NEAR(std::abs(v), expect, 1e-15);
}

TEST(Field, LpNormBasics) {
    Grid g = small_grid(1);
    Datum f = ball_datum(g, 1.0, 3);
    auto F = synthesize(f, 0);
    double mx = 0;
    for (auto& v : F.values) mx = std::max(mx, std::abs(v));
    EXPECT_EQ(lp_norm(F, std::numeric_limits<double>::infinity()), mx);
    // monotone in the region
    double a = lp_norm(F, 3, Region::box({-4, 0, 0}, {4, 0, 0}));
    double b = lp_norm(F, 3, Region::box({-10, 0, 0}, {10, 0, 0}));
    EXPECT_LE(a, b);
    EXPECT_LE(b, lp_norm(F, 3));
    EXPECT_TRUE(lp_norm_checked(F, 2, Region::box({100, 0, 0}, {101, 0, 0})).empty);
    EXPECT_THROW(lp_norm(F, 0.5), PreconditionError);
}

TEST(Field, BernsteinShadow) {
    // interval of lattice frequencies of length ell: sup / L2 <= C ell^{1/2}
    Grid g = small_grid(1, 128, 256);
    double worst = 0;
    for (double ell : {0.1, 0.25, 0.5, 1.0}) {
        std::mt19937_64 rng(11);
        Datum f = random_in(g, [&](const Vec& xi) { return xi[0] >= 0.2 && xi[0] < 0.2 + ell; }, rng);
        auto F = synthesize(f, 0);
        double r = lp_norm(F, std::numeric_limits<double>::infinity()) / lp_norm(F, 2);
        worst = std::max(worst, r / std::sqrt(ell));
    }
    EXPECT_LE(worst, 10);
}

TEST(Field, SobolevMonotoneAndLittlewoodPaleyComparable) {
    for (int n : {1, 2})
        for (uint64_t s = 1; s <= 4; ++s) {
            Datum f = ball_datum(small_grid(n), 1.9, s);
            double prev = 0;
            for (double r : {0.0, 0.5, 1.0, 2.0}) {
                double v = sobolev_norm(f, r);
                EXPECT_GE(v, prev);
                prev = v;
                double lp = littlewood_paley_norm(f, r);
                EXPECT_LE(lp / v, 4);
                EXPECT_LE(v / lp, 4);
            }
        }
}

TEST(Field, LittlewoodPaleyUnitAnnulus) {
    Grid g = small_grid(1);
    std::mt19937_64 rng(5);
    Datum f = random_in(g, [&](const Vec& xi) { return std::abs(xi[0]) >= 0.5 && std::abs(xi[0]) < 1; }, rng);
    EXPECT_NEAR(littlewood_paley_norm(f, 0), 2 * f.norm(), 1e-12);
}

TEST(Field, EnvelopeCoversSamples) {
    for (int n : {1, 2}) {
        Grid g = small_grid(n);
        auto F = synthesize(ball_datum(g, 1.0, 9), 0.5);
        auto E = locally_constant_envelope(F, 2.0);
        for (size_t i = 0; i < F.values.size(); ++i) {
            auto s = unflatten(i, n, g.Nx);
            Vec z{g.x(s[0]), n == 2 ? g.x(s[1]) : 0.0, 0};
            ASSERT_GE(E.cover(z) * (1 + 1e-14), std::abs(F.values[i]));
        }
    }
}

TEST(Field, EnvelopeDominatedByMollifiedField) {
    // sum a_Q chi_Q <= C (|F| * eta_M) on sample points, 1d
    Grid g = small_grid(1, 64, 256);
    auto F = synthesize(ball_datum(g, 1.0, 4), 0);
    double M = 1;
    auto E = locally_constant_envelope(F, M);
    double worst = 0;
    for (size_t i = 0; i < F.values.size(); i += 4) {
        double z = g.x(int(i)), conv = 0;
        for (size_t j = 0; j < F.values.size(); ++j) {
            double d = wrap(z - g.x(int(j)), g.L);
            conv += std::abs(F.values[j]) * mollifier::eta_M({d, 0, 0}, 1, M, 1.0) * g.dx();
        }
        worst = std::max(worst, E.cover({z, 0, 0}) / conv);
    }
    EXPECT_TRUE(std::isfinite(worst));
    RecordProperty("envelope_constant", std::to_string(worst));
    EXPECT_LE(worst, 100);
}

TEST(Field, AdaptedWeight) {
    auto w = adapted_weight(Weight::Body::ball, {2, 2, 0}, {1, 1, 0}, 2);
    EXPECT_DOUBLE_EQ(w({1, 1, 0}), 1.0);
    EXPECT_GT(w({2, 1, 0}), w({3, 1, 0}));
    EXPECT_NEAR(w({3, 1, 0}), std::pow(2.0, -100), 1e-40);
    EXPECT_THROW(adapted_weight(Weight::Body::box, {1, 0, 0}, {0, 0, 0}, 2), PreconditionError);
    EXPECT_THROW(adapted_weight(Weight::Body::box, {1, 1, 0}, {0, 0, 0}, 2, 0.5), PreconditionError);
}

TEST(Field, MollifierShape) {
    double e0 = mollifier::eta1(0);
    EXPECT_GT(e0, 0);
    EXPECT_NEAR(mollifier::eta1(1.3), mollifier::eta1(-1.3), 1e-15);
    EXPECT_GT(mollifier::eta({0, 0, 0}, 2), mollifier::eta({5, 5, 0}, 2));
    EXPECT_GE(mollifier::eta_M({0, 0, 0}, 1, 4, 1), mollifier::eta_M({30, 0, 0}, 1, 4, 1));
    EXPECT_NEAR(mollifier::eta_M({0, 0, 0}, 1, 4, 1), 0.25 * mollifier::table().sup[0] * 1.0, 0.25 * e0);
    EXPECT_EQ(mollifier::eta({100, 0, 0}, 1), 0);
}

TEST(Field, GridValidation) {
    Grid g = small_grid(1);
    g.Nx = 32;
    EXPECT_THROW(g.validate(), ConfigError);
    g.Nx = 100;
    EXPECT_THROW(g.validate(), ConfigError);
    Grid b = Grid::for_ball(1, 16, 0.1);
    EXPECT_GE(b.L, 64);
    EXPECT_NO_THROW(b.validate());
    Datum f(small_grid(1));
    EXPECT_THROW(f.set({1000, 0}, 1.0), PreconditionError);
}

TEST(Field, SnapshotRoundTrip) {
    Grid g = small_grid(1, 16, 32);
    g.Tmin = -4;
    g.Tmax = 4;
    g.Nt = 9;
    Datum f = ball_datum(g, 1.0, 2);
    SpaceTimeField F = solve_spacetime(f, 4);
    std::string path = ::testing::TempDir() + "snap.bin";
    snapshot::write(F, path);
    auto G = snapshot::read(path);
    EXPECT_EQ(G.grid.Nx, g.Nx);
    EXPECT_EQ(G.grid.Nt, g.Nt);
    ASSERT_EQ(G.values.size(), F.values.size());
    for (size_t i = 0; i < F.values.size(); ++i) {
        EXPECT_EQ(G.values[i].real(), double(float(F.values[i].real())));
        EXPECT_EQ(G.values[i].imag(), double(float(F.values[i].imag())));
    }
    EXPECT_THROW(snapshot::read(path + ".missing"), ConfigError);
}
