#pragma once

#include "plab/grid.hpp"

namespace plab::coulomb {

using grid::GridFunction;
using grid::LatticeSpec;

/// Periodic Coulomb interaction as a Fourier multiplier w(k) on the
/// supercell. Bare mode uses 4*pi/|k|^2 with the k=0 mode dropped (uniform
/// compensating background); Yukawa mode uses 4*pi/(|k|^2 + mu^2).
class CoulombKernel {
public:
    enum class Mode { Bare, Yukawa };

    static CoulombKernel bare(const LatticeSpec& spec);
    static CoulombKernel yukawa(const LatticeSpec& spec, double mu);

    const LatticeSpec& spec() const { return spec_; }
    Mode mode() const { return mode_; }
    double screening() const { return mu_; }
    /// Multiplier values in FFT order; entry 0 is the k=0 coefficient.
    const Eigen::VectorXd& multiplier() const { return what_; }
    double max_multiplier() const { return what_.maxCoeff(); }

    /// D(f,g) = L^d sum_{k!=0} w(k) conj(c_f) c_g; symmetric bilinear form.
    double d_pair(const GridFunction& f, const GridFunction& g) const;
    /// sqrt(D(f,f)).
    double coulomb_norm(const GridFunction& f) const;
    /// V with c_V(k) = w(k) c_rho(k); in bare mode V has zero mean.
    GridFunction potential_of(const GridFunction& rho) const;
    /// Real-space pair potential W(z) = (1/L^d) sum_{k!=0} w(k) e^{ikz},
    /// chosen so that the many-body interaction is exactly consistent with
    /// d_pair on disjoint densities.
    GridFunction real_space_kernel() const;

private:
    CoulombKernel(const LatticeSpec& spec, Mode mode, double mu);

    LatticeSpec spec_;
    Mode mode_;
    double mu_;
    Eigen::VectorXd what_;
};

} // namespace plab::coulomb
