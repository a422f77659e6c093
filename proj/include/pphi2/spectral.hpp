#pragma once

// Spatial discretization of the interval [-l/2, l/2] and exact spectral
// calculus for functions of m^2 - Delta on the retained modes.

#include "pphi2/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace pphi2 {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Boundary { periodic, dirichlet, neumann };

inline std::string_view to_string(Boundary b)
{
    switch (b) {
    case Boundary::periodic: return "periodic";
    case Boundary::dirichlet: return "dirichlet";
    case Boundary::neumann: return "neumann";
    }
    return "unknown";
}

inline Boundary parse_boundary(std::string_view name)
{
    if (name == "periodic") return Boundary::periodic;
    if (name == "dirichlet") return Boundary::dirichlet;
    if (name == "neumann") return Boundary::neumann;
    throw ValidationError("boundary: expected periodic|dirichlet|neumann, got '" + std::string(name) + "'");
}

/// Uniform grid on [-l/2, l/2].
///
/// Node placement depends on the boundary condition: periodic grids start at
/// the left endpoint, Dirichlet grids exclude both endpoints, Neumann grids
/// are cell-centred. Every layout makes the sampled eigenmodes exactly
/// orthonormal under the uniform quadrature weight `spacing()`.
class Grid {
public:
    Grid(double length, int num_nodes, Boundary boundary = Boundary::periodic)
        : length_(length), num_nodes_(num_nodes), boundary_(boundary)
    {
        detail::require(std::isfinite(length) && length > 0, "grid.length: must be positive");
        detail::require(num_nodes >= 2, "grid.num_nodes: must be >= 2");
        spacing_ = boundary == Boundary::dirichlet ? length / (num_nodes + 1) : length / num_nodes;
    }

    double length() const { return length_; }
    int num_nodes() const { return num_nodes_; }
    Boundary boundary() const { return boundary_; }
    double spacing() const { return spacing_; }

    double node(int j) const
    {
        const double left = -0.5 * length_;
        switch (boundary_) {
        case Boundary::periodic: return left + j * spacing_;
        case Boundary::dirichlet: return left + (j + 1) * spacing_;
        case Boundary::neumann: return left + (j + 0.5) * spacing_;
        }
        return left;
    }

    Vector nodes() const
    {
        Vector x(num_nodes_);
        for (int j = 0; j < num_nodes_; ++j) x[j] = node(j);
        return x;
    }

private:
    double length_;
    int num_nodes_;
    Boundary boundary_;
    double spacing_;
};

class ModeBasis;
using BasisPtr = std::shared_ptr<const ModeBasis>;

/// Eigenmodes of m^2 - Delta on a Grid, ordered by nondecreasing frequency.
///
/// Periodic ordering: constant, then (cos, sin) pairs of increasing
/// wavenumber 2 pi q / l, then the Nyquist cosine when num_nodes is even.
/// Dirichlet modes are sin(q pi s / l), q >= 1; Neumann modes are
/// cos(q pi s / l), q >= 0, with s = x + l/2.
class ModeBasis {
public:
    ModeBasis(const Grid& grid, double mass, int mode_count = 0) : grid_(grid), mass_(mass)
    {
        detail::require(std::isfinite(mass) && mass > 0, "mass: must be positive");
        const int n = grid.num_nodes();
        if (mode_count <= 0) mode_count = n;
        if (mode_count > n) {
            throw ValidationError("modes: requested " + std::to_string(mode_count) +
                                  " modes but the grid holds only " + std::to_string(n) + " nodes");
        }
        const double l = grid.length();
        const double pi = std::numbers::pi;
        wavenumbers_.resize(mode_count);
        shapes_.resize(n, mode_count);
        for (int i = 0; i < mode_count; ++i) {
            double xi = 0;
            for (int j = 0; j < n; ++j) {
                const double s = grid.node(j) + 0.5 * l;
                double value = 0;
                switch (grid.boundary()) {
                case Boundary::periodic: {
                    const int q = (i + 1) / 2;
                    xi = 2 * pi * q / l;
                    if (i == 0) {
                        value = 1 / std::sqrt(l);
                    } else if (n % 2 == 0 && q == n / 2) {
                        value = std::cos(xi * s) / std::sqrt(l);
                    } else if (i % 2 == 1) {
                        value = std::sqrt(2 / l) * std::cos(xi * s);
                    } else {
                        value = std::sqrt(2 / l) * std::sin(xi * s);
                    }
                    break;
                }
                case Boundary::dirichlet: {
                    xi = (i + 1) * pi / l;
                    value = std::sqrt(2 / l) * std::sin(xi * s);
                    break;
                }
                case Boundary::neumann: {
                    xi = i * pi / l;
                    value = (i == 0 ? 1 / std::sqrt(l) : std::sqrt(2 / l) * std::cos(xi * s));
                    break;
                }
                }
                shapes_(j, i) = value;
            }
            wavenumbers_[i] = xi;
        }
        frequencies_ = (mass * mass + wavenumbers_.array().square()).sqrt().matrix();
        weighted_shapes_t_ = (grid.spacing() * shapes_).transpose();
    }

    const Grid& grid() const { return grid_; }
    double mass() const { return mass_; }
    int size() const { return static_cast<int>(wavenumbers_.size()); }
    int num_nodes() const { return grid_.num_nodes(); }
    double weight() const { return grid_.spacing(); }

    double wavenumber(int k) const { return wavenumbers_[k]; }
    double frequency(int k) const { return frequencies_[k]; }
    const Vector& wavenumbers() const { return wavenumbers_; }
    const Vector& frequencies() const { return frequencies_; }

    /// Sampled mode shapes, one column per mode.
    const Matrix& shapes() const { return shapes_; }

    Vector to_modes(const Vector& values) const
    {
        detail::require(values.size() == num_nodes(), "field: node vector has wrong length");
        return weighted_shapes_t_ * values;
    }

    Vector to_nodes(const Vector& coefficients) const
    {
        detail::require(coefficients.size() == size(), "field: coefficient vector has wrong length");
        return shapes_ * coefficients;
    }

    /// Grid quadrature of node values.
    double integrate(const Vector& values) const { return weight() * values.sum(); }

    /// Mode-space matrix of multiplication by v: (e_i, v e_j) under the grid quadrature.
    Matrix multiplication_matrix(const Vector& v) const
    {
        detail::require(v.size() == num_nodes(), "multiplier: node vector has wrong length");
        return weighted_shapes_t_ * v.asDiagonal() * shapes_;
    }

private:
    Grid grid_;
    double mass_;
    Vector wavenumbers_;
    Vector frequencies_;
    Matrix shapes_;
    Matrix weighted_shapes_t_;
};

inline BasisPtr build_basis(const Grid& grid, double mass, int mode_count = 0)
{
    return std::make_shared<const ModeBasis>(grid, mass, mode_count);
}

/// Real function on the grid, stored by its mode coefficients.
class Field {
public:
    Field() = default;
    Field(BasisPtr basis, Vector coefficients) : basis_(std::move(basis)), coefficients_(std::move(coefficients))
    {
        detail::require(basis_ != nullptr, "field: null basis");
        detail::require(coefficients_.size() == basis_->size(), "field: coefficient vector has wrong length");
    }

    static Field zero(BasisPtr basis)
    {
        const int n = basis->size();
        return Field(std::move(basis), Vector::Zero(n));
    }

    static Field from_values(BasisPtr basis, const Vector& values)
    {
        Vector c = basis->to_modes(values);
        return Field(std::move(basis), std::move(c));
    }

    template <class F>
    static Field from_function(BasisPtr basis, F&& f)
    {
        const Vector x = basis->grid().nodes();
        Vector values(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) values[j] = f(x[j]);
        return from_values(std::move(basis), values);
    }

    static Field constant(BasisPtr basis, double c)
    {
        return from_values(basis, Vector::Constant(basis->num_nodes(), c));
    }

    /// The k-th orthonormal eigenmode.
    static Field mode(BasisPtr basis, int k)
    {
        detail::require(k >= 0 && k < basis->size(), "field: mode index out of range");
        Vector c = Vector::Zero(basis->size());
        c[k] = 1;
        return Field(std::move(basis), std::move(c));
    }

    const BasisPtr& basis() const { return basis_; }
    const Vector& coefficients() const { return coefficients_; }
    Vector& coefficients() { return coefficients_; }
    Vector values() const { return basis_->to_nodes(coefficients_); }

    double l2_norm() const { return coefficients_.norm(); }
    double dot(const Field& other) const
    {
        check_same_basis(other);
        return coefficients_.dot(other.coefficients_);
    }

    bool is_finite() const { return coefficients_.allFinite(); }

    Field& operator+=(const Field& other)
    {
        check_same_basis(other);
        coefficients_ += other.coefficients_;
        return *this;
    }
    Field& operator-=(const Field& other)
    {
        check_same_basis(other);
        coefficients_ -= other.coefficients_;
        return *this;
    }
    Field& operator*=(double s)
    {
        coefficients_ *= s;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator*(Field a, double s) { return a *= s; }
    friend Field operator-(Field a) { return a *= -1.0; }

    void check_same_basis(const Field& other) const
    {
        if (basis_ != other.basis_) throw ValidationError("field: operands live on different bases");
    }

private:
    BasisPtr basis_;
    Vector coefficients_;
};

/// g(m^2 - Delta) h: mode coefficient c_k becomes f(omega_k^2) c_k.
template <class F>
Field apply_spectral_function(F&& f, const Field& field)
{
    const ModeBasis& basis = *field.basis();
    Vector c = field.coefficients();
    for (int k = 0; k < basis.size(); ++k) {
        const double w2 = basis.frequency(k) * basis.frequency(k);
        const double factor = f(w2);
        if (!std::isfinite(factor)) {
            throw NumericalError("spectral function is not finite at omega^2 = " + std::to_string(w2));
        }
        c[k] *= factor;
    }
    return Field(field.basis(), std::move(c));
}

/// ||h||_{H^s} = ||(m^2 - Delta)^{s/2} h||_{L^2}.
inline double sobolev_norm(const Field& field, double s)
{
    if (!field.is_finite()) throw NumericalError("sobolev_norm: non-finite field");
    const Vector& w = field.basis()->frequencies();
    return std::sqrt((w.array().pow(2 * s) * field.coefficients().array().square()).sum());
}

/// S_t h = exp(-t sqrt(m^2 - Delta)) h.
inline Field cauchy_semigroup(const Field& field, double t)
{
    detail::require(t >= 0, "cauchy_semigroup: t must be nonnegative");
    const Vector& w = field.basis()->frequencies();
    Vector c = (field.coefficients().array() * (-t * w.array()).exp()).matrix();
    return Field(field.basis(), std::move(c));
}

} // namespace pphi2
