#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "plab/grid.hpp"

using namespace plab::grid;

namespace {

GridFunction random_field(const LatticeSpec& spec, unsigned seed, GridFunction::Tag tag) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    GridFunction f(spec, tag);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = tag == GridFunction::Tag::Real ? Complex(g(rng), 0.0) : Complex(g(rng), g(rng));
    return f;
}

} // namespace

TEST_CASE("wavevectors: d=1, n_c=4, M=1 in FFT order") {
    LatticeSpec spec(1, 1.0, 4, 1);
    auto ks = wavevectors(spec);
    REQUIRE(ks.size() == 4);
    const double pi = M_PI;
    CHECK(ks[0][0] == doctest::Approx(0.0));
    CHECK(ks[1][0] == doctest::Approx(2 * pi));
    CHECK(ks[2][0] == doctest::Approx(-4 * pi));  // Nyquist
    CHECK(ks[3][0] == doctest::Approx(-2 * pi));
}

TEST_CASE("wavevectors: doubling the supercell halves the spacing") {
    LatticeSpec spec(1, 1.0, 4, 2);
    auto ks = wavevectors(spec);
    REQUIRE(ks.size() == 8);
    CHECK(ks[1][0] == doctest::Approx(M_PI));
}

TEST_CASE("wavevectors: exactly one zero vector") {
    for (int d : {1, 2, 3}) {
        LatticeSpec spec(d, 0.7, 4, d == 3 ? 1 : 2);
        int zeros = 0;
        for (const auto& k : wavevectors(spec))
            if (k[0] == 0.0 && k[1] == 0.0 && k[2] == 0.0)
                ++zeros;
        CHECK(zeros == 1);
    }
}

TEST_CASE("fourier: constant maps to the zero mode only") {
    LatticeSpec spec(2, 1.5, 6, 1);
    GridFunction f(spec, GridFunction::Tag::Real);
    f.values().setConstant(3.25);
    auto c = fourier(f);
    CHECK(std::abs(c[0] - Complex(3.25, 0.0)) < 1e-12);
    double rest = 0.0;
    for (std::size_t i = 1; i < c.size(); ++i)
        rest += std::abs(c[i]);
    CHECK(rest < 1e-10);
}

TEST_CASE("fourier: plane wave has a single coefficient") {
    LatticeSpec spec(1, 2.0, 8, 2);
    auto ks = wavevectors(spec);
    const std::size_t mode = 3;
    GridFunction f(spec, GridFunction::Tag::Complex);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = point_of(spec, i);
        f[i] = std::exp(Complex(0.0, ks[mode][0] * x[0]));
    }
    auto c = fourier(f);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::abs(c[i] - (i == mode ? Complex(1.0) : Complex(0.0))) < 1e-12);
}

TEST_CASE("fourier round trip and Parseval") {
    LatticeSpec spec(2, 1.0, 8, 1);
    auto f = random_field(spec, 7, GridFunction::Tag::Complex);
    auto back = inverse_fourier(fourier(f));
    CHECK((back.values() - f.values()).cwiseAbs().maxCoeff() < 1e-12);

    // h^d sum |f|^2 = L^d sum |c|^2
    auto c = fourier(f);
    double lhs = spec.cell_weight() * f.values().squaredNorm();
    double rhs = spec.volume() * c.values().squaredNorm();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("laplacian: plane waves are exact eigenfunctions") {
    LatticeSpec spec(1, 1.0, 8, 3);
    auto ks = wavevectors(spec);
    const std::size_t mode = 5;
    GridFunction f(spec, GridFunction::Tag::Complex);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = point_of(spec, i);
        f[i] = std::exp(Complex(0.0, ks[mode][0] * x[0]));
    }
    auto lf = laplacian_apply(f);
    const double k2 = ks[mode][0] * ks[mode][0];
    CHECK((lf.values() - k2 * f.values()).cwiseAbs().maxCoeff() < 1e-9);

    GridFunction one(spec, GridFunction::Tag::Real);
    one.values().setConstant(1.0);
    CHECK(laplacian_apply(one).values().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient_norm_sq agrees with <f, -Lap f>") {
    LatticeSpec spec(2, 1.3, 6, 1);
    auto f = random_field(spec, 11, GridFunction::Tag::Complex);
    double direct = gradient_norm_sq(f);
    double quad = std::real(f.inner(laplacian_apply(f)));
    CHECK(direct == doctest::Approx(quad).epsilon(1e-10));
    CHECK(direct >= 0.0);
}

TEST_CASE("gradient_norm_sq vanishes only for constants") {
    LatticeSpec spec(1, 1.0, 8, 1);
    GridFunction c(spec, GridFunction::Tag::Real);
    c.values().setConstant(-2.0);
    CHECK(gradient_norm_sq(c) < 1e-12);
    auto f = random_field(spec, 3, GridFunction::Tag::Real);
    CHECK(gradient_norm_sq(f) > 1e-6);
}

TEST_CASE("translate: exact roll, norm preserving, composes") {
    LatticeSpec spec(1, 1.0, 4, 4);
    auto f = random_field(spec, 5, GridFunction::Tag::Real);

    auto id = translate(f, {0, 0, 0});
    CHECK((id.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);

    auto fwd = translate(f, {1.0, 0, 0});
    auto back = translate(fwd, {-1.0, 0, 0});
    CHECK((back.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fwd.norm() == doctest::Approx(f.norm()).epsilon(1e-14));

    auto two_step = translate(translate(f, {1.0, 0, 0}), {2.0, 0, 0});
    auto one_step = translate(f, {3.0, 0, 0});
    CHECK((two_step.values() - one_step.values()).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS(translate(f, {0.3, 0, 0}));
}

TEST_CASE("translate by one cell permutes a bump exactly") {
    LatticeSpec spec(1, 1.0, 4, 3);
    GridFunction f = GridFunction::zero(spec);
    f[2] = 1.0;
    auto g = translate(f, {1.0, 0, 0});
    CHECK(std::abs(g[6] - Complex(1.0)) == 0.0);
    CHECK(g.values().cwiseAbs().sum() == doctest::Approx(1.0));
}

TEST_CASE("serialization round trip with sidecar") {
    LatticeSpec spec(1, 1.0, 8, 2);
    auto f = random_field(spec, 13, GridFunction::Tag::Complex);
    const std::string path = "test_grid_roundtrip.bin";
    save_grid_function(f, path);
    auto g = load_grid_function(path);
    CHECK(g.spec() == spec);
    CHECK(g.tag() == f.tag());
    CHECK((g.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}
