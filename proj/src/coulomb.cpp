#include "plab/coulomb.hpp"

#include <cmath>

namespace plab::coulomb {

CoulombKernel::CoulombKernel(const LatticeSpec& spec, Mode mode, double mu)
    : spec_(spec), mode_(mode), mu_(mu) {
    const Eigen::VectorXd k2 = grid::k_squared(spec);
    what_.resize(k2.size());
    for (Eigen::Index i = 0; i < k2.size(); ++i) {
        if (mode == Mode::Bare) {
            what_[i] = (k2[i] > 0.0) ? 4.0 * M_PI / k2[i] : 0.0;
        } else {
            what_[i] = 4.0 * M_PI / (k2[i] + mu * mu);
        }
    }
}

CoulombKernel CoulombKernel::bare(const LatticeSpec& spec) {
    return CoulombKernel(spec, Mode::Bare, 0.0);
}

CoulombKernel CoulombKernel::yukawa(const LatticeSpec& spec, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("CoulombKernel::yukawa: mu must be positive");
    return CoulombKernel(spec, Mode::Yukawa, mu);
}

double CoulombKernel::d_pair(const GridFunction& f, const GridFunction& g) const {
    if (!(f.spec() == spec_) || !(g.spec() == spec_))
        throw std::invalid_argument("CoulombKernel::d_pair: spec mismatch");
    const GridFunction cf = grid::fourier(f);
    const GridFunction cg = grid::fourier(g);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < what_.size(); ++i)
        acc += what_[i] * std::real(std::conj(cf.values()[i]) * cg.values()[i]);
    return spec_.volume() * acc;
}

double CoulombKernel::coulomb_norm(const GridFunction& f) const {
    return std::sqrt(std::max(0.0, d_pair(f, f)));
}

GridFunction CoulombKernel::potential_of(const GridFunction& rho) const {
    if (!(rho.spec() == spec_))
        throw std::invalid_argument("CoulombKernel::potential_of: spec mismatch");
    GridFunction c = grid::fourier(rho);
    c.values().array() *= what_.array().cast<grid::Complex>();
    GridFunction v = grid::inverse_fourier(c);
    if (rho.is_real()) v.enforce_real(1e-9);
    return v;
}

GridFunction CoulombKernel::real_space_kernel() const {
    GridFunction c(spec_, GridFunction::Tag::Complex);
    for (Eigen::Index i = 0; i < what_.size(); ++i)
        c.values()[i] = what_[i] / spec_.volume();
    GridFunction w = grid::inverse_fourier(c);
    w.enforce_real(1e-8);
    return w;
}

} // namespace plab::coulomb
