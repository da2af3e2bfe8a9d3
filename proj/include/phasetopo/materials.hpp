#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "phasetopo/fem.hpp"

namespace phasetopo {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Elasticity tensor stored as its Voigt matrix (engineering shear), so
/// sigma_voigt = D * strain_voigt.
struct ElasticTensor {
    VoigtMatrix voigt;

    /// C E = 2 mu E + lambda tr(E) I (plane strain in 2D).
    static ElasticTensor isotropic(double mu, double lambda, int dim);

    [[nodiscard]] int dim() const { return voigt.rows() == 3 ? 2 : 3; }
    /// Frobenius norm of the rank-4 tensor.
    [[nodiscard]] double frobenius() const;
    [[nodiscard]] bool positive_definite() const;

    ElasticTensor operator*(double s) const { return {voigt * s}; }
};

enum class Interpolation { Linear, Quadratic };

/// Phase tensors C^1..C^N with the void tensor already scaled:
/// C^N = eps^2 * template.
class MaterialSet {
public:
    /// `materials` are C^1..C^(N-1); the void is eps^2 * void_template.
    MaterialSet(std::vector<ElasticTensor> materials, const ElasticTensor& void_template,
                double eps, Interpolation scheme);

    [[nodiscard]] int num_phases() const { return static_cast<int>(phases_.size()); }
    [[nodiscard]] int dim() const { return phases_.front().dim(); }
    [[nodiscard]] const ElasticTensor& phase(int i) const { return phases_[i]; }
    [[nodiscard]] Interpolation scheme() const { return scheme_; }
    [[nodiscard]] double eps() const { return eps_; }

    /// Phase indices sorted from stiffest to softest (descending Frobenius
    /// norm, ties by index).
    [[nodiscard]] const std::vector<int>& stiffness_order() const { return order_; }

    /// Scalar weights c_k(phi) with C(phi) = sum_k c_k C^k. No simplex check.
    void coefficients(std::span<const double> phi, std::span<double> out) const;
    /// d c_k / d phi^i, written to out[k * N + i]. No simplex check.
    void coefficient_jacobian(std::span<const double> phi, std::span<double> out) const;

    /// Weighted sum of the phase tensors.
    [[nodiscard]] VoigtMatrix combine(std::span<const double> weights) const;

private:
    std::vector<ElasticTensor> phases_;
    std::vector<int> order_;
    std::vector<int> rank_;
    Interpolation scheme_;
    double eps_;
};

/// Largest violation of the simplex constraints at one point.
double simplex_violation(std::span<const double> phi);

/// C(phi). Quadratic: sum_{i,j} C^{max(i,j)} phi^i phi^j with indices taken
/// in stiffness order; linear: sum_i C^i phi^i.
/// Throws DomainError if phi is off the simplex by more than `tol`.
ElasticTensor interpolate(const MaterialSet& ms, std::span<const double> phi, double tol = 1e-8);

/// Directional derivative C'(phi) h. Requires sum(h) == 0 (within tol).
ElasticTensor interpolate_derivative(const MaterialSet& ms, std::span<const double> phi,
                                     std::span<const double> h, double tol = 1e-8);

}  // namespace phasetopo
