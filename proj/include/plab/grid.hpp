#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace plab::grid {

using Complex = std::complex<double>;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Cubic periodic lattice with an M-fold supercell.
/// Unit cell is [0,a)^d sampled with n_c points per axis; the supercell has
/// side L = M*a and n = n_c*M points per axis.
struct LatticeSpec {
    int dim = 1;        // d in {1,2,3}
    double a = 1.0;     // unit-cell side
    int n_cell = 16;    // points per cell per axis, even, >= 4
    int multiplier = 1; // supercell multiplier M >= 1

    LatticeSpec() = default;
    LatticeSpec(int d, double a_, int nc, int M);

    int n_axis() const { return n_cell * multiplier; }
    double length() const { return a * multiplier; }
    double spacing() const { return a / n_cell; }
    std::size_t n_points() const;
    /// Quadrature weight h^d.
    double cell_weight() const;
    /// Supercell volume L^d.
    double volume() const;

    bool operator==(const LatticeSpec&) const = default;
};

/// Scalar field on the supercell grid, row-major over the axes.
/// A real-tagged function keeps a complex buffer but promises negligible
/// imaginary parts.
class GridFunction {
public:
    enum class Tag { Real, Complex };

    GridFunction() : tag_(Tag::Real) {}
    GridFunction(LatticeSpec spec, Tag tag);
    GridFunction(LatticeSpec spec, VectorXcd values, Tag tag);
    static GridFunction zero(const LatticeSpec& spec, Tag tag = Tag::Real);

    const LatticeSpec& spec() const { return spec_; }
    Tag tag() const { return tag_; }
    bool is_real() const { return tag_ == Tag::Real; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    const VectorXcd& values() const { return values_; }
    VectorXcd& values() { return values_; }
    VectorXd real_values() const;

    Complex operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
    Complex& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

    /// L2 inner product h^d * sum conj(f) g.
    Complex inner(const GridFunction& other) const;
    /// Integral h^d * sum f.
    Complex integral() const;
    double norm() const;
    double max_imag() const;

    /// Asserts the real tag is honest (|Im| <= tol) and strips it.
    GridFunction& enforce_real(double tol = 1e-12);

private:
    LatticeSpec spec_;
    VectorXcd values_;
    Tag tag_;
};

/// Position of grid point `idx` (row-major multi-index).
std::array<double, 3> point_of(const LatticeSpec& spec, std::size_t idx);

/// The N_pts wavevectors of the supercell in FFT order, k = 2*pi*n/L with n
/// in the symmetric integer range.
std::vector<std::array<double, 3>> wavevectors(const LatticeSpec& spec);

/// |k|^2 for every grid point in FFT order.
VectorXd k_squared(const LatticeSpec& spec);

/// Forward transform to spectral coefficients c(k) = (1/N) sum_x f(x) e^{-ikx},
/// so f(x) = sum_k c(k) e^{ikx}.
GridFunction fourier(const GridFunction& f);
GridFunction inverse_fourier(const GridFunction& c);

/// -Laplacian as the spectral multiplier |k|^2.
GridFunction laplacian_apply(const GridFunction& f);

/// Kinetic integrand: integral |grad f|^2 = L^d sum_k |k|^2 |c(k)|^2.
double gradient_norm_sq(const GridFunction& f);

/// Exact cyclic shift by a lattice vector (whole number of grid points per
/// axis). Rejects non-commensurate translations.
GridFunction translate(const GridFunction& f, const std::array<double, 3>& tau);

/// Minimal-image distance between two points on the torus.
double torus_distance(const LatticeSpec& spec, const std::array<double, 3>& x,
                      const std::array<double, 3>& y);

/// Serialization: raw little-endian doubles (re/im interleaved when complex)
/// plus a JSON sidecar `<path>.json`.
void save_grid_function(const GridFunction& f, const std::string& path);
GridFunction load_grid_function(const std::string& path);

} // namespace plab::grid
