#include "plab/grid.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>

#include <fftw3.h>
#include <json.hpp>

namespace plab::grid {

LatticeSpec::LatticeSpec(int d, double a_, int nc, int M)
    : dim(d), a(a_), n_cell(nc), multiplier(M) {
    if (d < 1 || d > 3) throw std::invalid_argument("LatticeSpec: dim must be 1, 2 or 3");
    if (!(a_ > 0.0)) throw std::invalid_argument("LatticeSpec: cell side must be positive");
    if (nc < 4 || nc % 2 != 0) throw std::invalid_argument("LatticeSpec: n_cell must be even and >= 4");
    if (M < 1) throw std::invalid_argument("LatticeSpec: multiplier must be >= 1");
}

std::size_t LatticeSpec::n_points() const {
    std::size_t n = 1;
    for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(n_axis());
    return n;
}

double LatticeSpec::cell_weight() const { return std::pow(spacing(), dim); }
double LatticeSpec::volume() const { return std::pow(length(), dim); }

GridFunction::GridFunction(LatticeSpec spec, Tag tag)
    : spec_(spec), values_(VectorXcd::Zero(static_cast<Eigen::Index>(spec.n_points()))), tag_(tag) {}

GridFunction::GridFunction(LatticeSpec spec, VectorXcd values, Tag tag)
    : spec_(spec), values_(std::move(values)), tag_(tag) {
    if (static_cast<std::size_t>(values_.size()) != spec_.n_points())
        throw std::invalid_argument("GridFunction: value count does not match spec");
}

GridFunction GridFunction::zero(const LatticeSpec& spec, Tag tag) { return GridFunction(spec, tag); }

VectorXd GridFunction::real_values() const { return values_.real(); }

Complex GridFunction::inner(const GridFunction& other) const {
    if (!(spec_ == other.spec_)) throw std::invalid_argument("GridFunction::inner: spec mismatch");
    return spec_.cell_weight() * values_.dot(other.values_);
}

Complex GridFunction::integral() const { return spec_.cell_weight() * values_.sum(); }

double GridFunction::norm() const { return std::sqrt(std::real(inner(*this))); }

double GridFunction::max_imag() const { return values_.imag().cwiseAbs().maxCoeff(); }

GridFunction& GridFunction::enforce_real(double tol) {
    if (max_imag() > tol)
        throw std::runtime_error("GridFunction: real tag violated, |Im| = " + std::to_string(max_imag()));
    values_ = values_.real().cast<Complex>();
    tag_ = Tag::Real;
    return *this;
}

namespace {

// Decompose row-major index into per-axis indices.
inline void multi_index(const LatticeSpec& spec, std::size_t idx, int out[3]) {
    const int n = spec.n_axis();
    for (int ax = spec.dim - 1; ax >= 0; --ax) {
        out[ax] = static_cast<int>(idx % static_cast<std::size_t>(n));
        idx /= static_cast<std::size_t>(n);
    }
}

// FFT-order frequency integer: 0..n/2-1, then -n/2..-1.
inline int freq_int(int j, int n) { return (j < n - n / 2) ? j : j - n; }

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// d-dimensional c2c transform; sign = FFTW_FORWARD or FFTW_BACKWARD.
VectorXcd run_fft(const LatticeSpec& spec, const VectorXcd& in, int sign) {
    VectorXcd out(in.size());
    int dims[3];
    for (int i = 0; i < spec.dim; ++i) dims[i] = spec.n_axis();
    VectorXcd buf = in;
    {
        // FFTW planning is not thread-safe.
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft(
            spec.dim, dims,
            reinterpret_cast<fftw_complex*>(buf.data()),
            reinterpret_cast<fftw_complex*>(out.data()),
            sign, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    return out;
}

} // namespace

std::array<double, 3> point_of(const LatticeSpec& spec, std::size_t idx) {
    int mi[3] = {0, 0, 0};
    multi_index(spec, idx, mi);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int ax = 0; ax < spec.dim; ++ax) x[ax] = mi[ax] * spec.spacing();
    return x;
}

std::vector<std::array<double, 3>> wavevectors(const LatticeSpec& spec) {
    const double two_pi_over_L = 2.0 * M_PI / spec.length();
    const int n = spec.n_axis();
    std::vector<std::array<double, 3>> ks(spec.n_points(), {0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < ks.size(); ++i) {
        int mi[3] = {0, 0, 0};
        multi_index(spec, i, mi);
        for (int ax = 0; ax < spec.dim; ++ax)
            ks[i][ax] = two_pi_over_L * freq_int(mi[ax], n);
    }
    return ks;
}

VectorXd k_squared(const LatticeSpec& spec) {
    auto ks = wavevectors(spec);
    VectorXd k2(static_cast<Eigen::Index>(ks.size()));
    for (std::size_t i = 0; i < ks.size(); ++i)
        k2[static_cast<Eigen::Index>(i)] =
            ks[i][0] * ks[i][0] + ks[i][1] * ks[i][1] + ks[i][2] * ks[i][2];
    return k2;
}

GridFunction fourier(const GridFunction& f) {
    VectorXcd out = run_fft(f.spec(), f.values(), FFTW_FORWARD);
    out /= static_cast<double>(f.spec().n_points());
    return GridFunction(f.spec(), std::move(out), GridFunction::Tag::Complex);
}

GridFunction inverse_fourier(const GridFunction& c) {
    VectorXcd out = run_fft(c.spec(), c.values(), FFTW_BACKWARD);
    return GridFunction(c.spec(), std::move(out), GridFunction::Tag::Complex);
}

GridFunction laplacian_apply(const GridFunction& f) {
    GridFunction c = fourier(f);
    const VectorXd k2 = k_squared(f.spec());
    c.values().array() *= k2.array().cast<Complex>();
    GridFunction out = inverse_fourier(c);
    if (f.is_real()) out.enforce_real(1e-9);
    return out;
}

double gradient_norm_sq(const GridFunction& f) {
    GridFunction c = fourier(f);
    const VectorXd k2 = k_squared(f.spec());
    return f.spec().volume() * (k2.array() * c.values().array().abs2()).sum();
}

GridFunction translate(const GridFunction& f, const std::array<double, 3>& tau) {
    const LatticeSpec& spec = f.spec();
    const int n = spec.n_axis();
    int shift[3] = {0, 0, 0};
    for (int ax = 0; ax < spec.dim; ++ax) {
        const double steps = tau[ax] / spec.spacing();
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-9)
            throw std::invalid_argument("translate: tau is not grid-commensurate");
        const double cells = tau[ax] / spec.a;
        if (std::abs(cells - std::round(cells)) > 1e-9)
            throw std::invalid_argument("translate: tau is not a lattice vector");
        shift[ax] = static_cast<int>(rounded) % n;
        if (shift[ax] < 0) shift[ax] += n;
    }
    GridFunction out(spec, f.tag());
    for (std::size_t i = 0; i < f.size(); ++i) {
        int mi[3] = {0, 0, 0};
        multi_index(spec, i, mi);
        std::size_t j = 0;
        for (int ax = 0; ax < spec.dim; ++ax)
            j = j * static_cast<std::size_t>(n) + static_cast<std::size_t>((mi[ax] + shift[ax]) % n);
        out[j] = f[i];
    }
    return out;
}

double torus_distance(const LatticeSpec& spec, const std::array<double, 3>& x,
                      const std::array<double, 3>& y) {
    const double L = spec.length();
    double s = 0.0;
    for (int ax = 0; ax < spec.dim; ++ax) {
        double dx = std::fmod(x[ax] - y[ax], L);
        if (dx > 0.5 * L) dx -= L;
        if (dx < -0.5 * L) dx += L;
        s += dx * dx;
    }
    return std::sqrt(s);
}

void save_grid_function(const GridFunction& f, const std::string& path) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("save_grid_function: cannot open " + path);
    const bool complex_tag = !f.is_real();
    if (complex_tag) {
        bin.write(reinterpret_cast<const char*>(f.values().data()),
                  static_cast<std::streamsize>(f.size() * 2 * sizeof(double)));
    } else {
        VectorXd re = f.real_values();
        bin.write(reinterpret_cast<const char*>(re.data()),
                  static_cast<std::streamsize>(f.size() * sizeof(double)));
    }
    nlohmann::json sidecar = {
        {"d", f.spec().dim},       {"a", f.spec().a},
        {"n_c", f.spec().n_cell},  {"M", f.spec().multiplier},
        {"tag", complex_tag ? "complex" : "real"},
        {"version", 1},
    };
    std::ofstream js(path + ".json");
    js << sidecar.dump(2) << "\n";
}

GridFunction load_grid_function(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("load_grid_function: missing sidecar for " + path);
    nlohmann::json sidecar = nlohmann::json::parse(js);
    LatticeSpec spec(sidecar.at("d").get<int>(), sidecar.at("a").get<double>(),
                     sidecar.at("n_c").get<int>(), sidecar.at("M").get<int>());
    const bool complex_tag = sidecar.at("tag").get<std::string>() == "complex";
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("load_grid_function: cannot open " + path);
    VectorXcd values(static_cast<Eigen::Index>(spec.n_points()));
    if (complex_tag) {
        bin.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(spec.n_points() * 2 * sizeof(double)));
    } else {
        VectorXd re(static_cast<Eigen::Index>(spec.n_points()));
        bin.read(reinterpret_cast<char*>(re.data()),
                 static_cast<std::streamsize>(spec.n_points() * sizeof(double)));
        values = re.cast<Complex>();
    }
    if (!bin) throw std::runtime_error("load_grid_function: short read on " + path);
    return GridFunction(spec, std::move(values),
                        complex_tag ? GridFunction::Tag::Complex : GridFunction::Tag::Real);
}

} // namespace plab::grid
