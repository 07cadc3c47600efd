#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "plab/crystal.hpp"

using namespace plab::grid;
using namespace plab::crystal;

namespace {

// Single deep Gaussian well per cell; regression values below were frozen
// from the first converged run at this resolution.
NuclearDensity deep_well() {
    return NuclearDensity({{{0.5, 0.0, 0.0}, 0.12, 1.0}});
}

LatticeSpec cell_spec() { return LatticeSpec(1, 1.0, 16, 1); }

} // namespace

TEST_CASE("nuclear density: nonnegative and unit-cell charge Z") {
    LatticeSpec spec(1, 1.0, 16, 3);
    auto mu = deep_well().realize(spec);
    CHECK(mu.real_values().minCoeff() >= 0.0);
    // supercell integral = Z * M^d
    CHECK(std::real(mu.integral()) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("scf: near-uniform nuclei give gapless free bands in d=1") {
    LatticeSpec spec(1, 1.0, 16, 4);
    NuclearDensity uniform({{{0.5, 0.0, 0.0}, 4.0, 1.0}});  // sigma >> a: flat
    ScfParams params;
    CHECK_THROWS_AS(scf_solve(uniform, spec, params), InsulatorViolation);
}

TEST_CASE("scf: deep well converges to a gapped crystal") {
    auto st = scf_solve(deep_well(), cell_spec(), {});
    CHECK(st.gap > 0.0);
    CHECK(st.scf_residual < 1e-9);
    CHECK(st.gap == doctest::Approx(19.7237631604).epsilon(1e-6));
    CHECK(st.e_per == doctest::Approx(-0.00548211204226).epsilon(1e-5));
    // zero-mean potential under the bare-kernel convention
    CHECK(std::abs(st.v0.integral()) < 1e-8);
    // the band bottom sits below the Fermi level
    CHECK(st.e_per < st.fermi_level);
    CHECK(st.band_minimum_at_k0);
}

TEST_CASE("scf: gamma0 is an exact spectral projector") {
    auto st = scf_solve(deep_well(), LatticeSpec(1, 1.0, 16, 2), {});
    auto g = st.gamma0();
    CHECK((g * g - g).norm() < 1e-8);
    CHECK(std::abs(g.trace().real() - st.n_occupied) < 1e-10);
    CHECK(st.n_occupied == st.z * st.spec.multiplier);

    auto h = hamiltonian(st.spec, st.v0, 1.0);
    CHECK((h * g - g * h).norm() < 1e-6);

    // density of the projector integrates to Z per cell
    CHECK(std::real(st.rho0.integral()) ==
          doctest::Approx(static_cast<double>(st.n_occupied)).epsilon(1e-6));
}

TEST_CASE("scf: energy trace is monotone nonincreasing") {
    auto st = scf_solve(deep_well(), cell_spec(), {});
    for (std::size_t i = 1; i < st.energy_trace.size(); ++i)
        CHECK(st.energy_trace[i] <= st.energy_trace[i - 1] + 1e-8);
}

TEST_CASE("band_structure: V=0 reproduces the exact free bands") {
    LatticeSpec spec(1, 1.0, 16, 4);
    auto v = GridFunction::zero(spec);
    auto kpts = commensurate_k_points(spec);
    auto bands = band_structure(v, 1.0, kpts);
    for (std::size_t ik = 0; ik < kpts.size(); ++ik) {
        // free fiber eigenvalues are |k+G|^2/2 over reciprocal shifts G
        std::vector<double> expected;
        for (int g = -spec.n_cell / 2; g < spec.n_cell / 2; ++g) {
            double kg = kpts[ik][0] + 2 * M_PI * g / spec.a;
            expected.push_back(0.5 * kg * kg);
        }
        std::sort(expected.begin(), expected.end());
        for (std::size_t b = 0; b < 4; ++b)
            CHECK(bands[ik][b] == doctest::Approx(expected[b]).epsilon(1e-8));
    }
}

TEST_CASE("band_structure: fibers match the dense supercell spectrum") {
    auto st = scf_solve(deep_well(), LatticeSpec(1, 1.0, 16, 3), {});
    auto kpts = commensurate_k_points(st.spec);
    auto bands = band_structure(st.v0, 1.0, kpts);
    std::vector<double> pooled;
    for (const auto& fiber : bands)
        pooled.insert(pooled.end(), fiber.begin(), fiber.end());
    std::sort(pooled.begin(), pooled.end());
    REQUIRE(pooled.size() == st.spec.n_points());
    // The topmost plane-wave modes differ by the Nyquist convention of the
    // two grids; the lower half of the spectrum must match exactly.
    for (std::size_t i = 0; i < pooled.size() / 2; ++i)
        CHECK(pooled[i] ==
              doctest::Approx(st.eigenvalues(static_cast<Eigen::Index>(i))).epsilon(1e-7));
}

TEST_CASE("insulator_check: gap and midgap level, shift covariance") {
    auto st = scf_solve(deep_well(), LatticeSpec(1, 1.0, 16, 2), {});
    auto kpts = commensurate_k_points(st.spec);
    auto bands = band_structure(st.v0, 1.0, kpts);
    auto [gap, ef] = insulator_check(bands, st.z);
    CHECK(gap == doctest::Approx(st.gap).epsilon(1e-8));
    CHECK(ef == doctest::Approx(st.fermi_level).epsilon(1e-8));

    // shifting the potential by a constant shifts eps_F, not the gap
    GridFunction shifted = st.v0;
    shifted.values().array() += 2.5;
    auto bands2 = band_structure(shifted, 1.0, kpts);
    auto [gap2, ef2] = insulator_check(bands2, st.z);
    CHECK(gap2 == doctest::Approx(gap).epsilon(1e-8));
    CHECK(ef2 == doctest::Approx(ef + 2.5).epsilon(1e-8));
}

TEST_CASE("polaron_band: free case and heavy-mass limit") {
    LatticeSpec spec(1, 1.0, 16, 1);
    auto v = GridFunction::zero(spec);
    auto pb = polaron_band(v, 1.0);
    CHECK(std::abs(pb.e_per) < 1e-12);
    CHECK(pb.minimum_at_k0);
    auto u = pb.u_per.real_values();
    CHECK((u.array() - u(0)).abs().maxCoeff() < 1e-8);

    auto st = scf_solve(deep_well(), spec, {});
    const double vmin = st.v0.real_values().minCoeff();
    double prev = 1e300;
    for (double m : {1.0, 4.0, 16.0, 64.0}) {
        auto band = polaron_band(st.v0, m);
        CHECK(band.e_per < prev);  // monotone descent toward min V
        CHECK(band.e_per > vmin);
        prev = band.e_per;
    }
}

TEST_CASE("u_per is normalized on the unit cell") {
    auto st = scf_solve(deep_well(), cell_spec(), {});
    CHECK(st.u_per.norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("crystal cache: round trip honors the config hash") {
    auto st = scf_solve(deep_well(), cell_spec(), {});
    const std::string path = "test_crystal_cache.bin";
    save_crystal(st, path, "deadbeef");
    auto miss = load_crystal(path, "feedface");
    CHECK(!miss.has_value());
    auto hit = load_crystal(path, "deadbeef");
    REQUIRE(hit.has_value());
    CHECK(hit->gap == doctest::Approx(st.gap).epsilon(1e-14));
    CHECK(hit->e_per == doctest::Approx(st.e_per).epsilon(1e-14));
    CHECK((hit->eigenvectors - st.eigenvectors).norm() < 1e-12);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}
