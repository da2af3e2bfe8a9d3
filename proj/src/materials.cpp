#include "phasetopo/materials.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

namespace phasetopo {

ElasticTensor ElasticTensor::isotropic(double mu, double lambda, int dim) {
    if (!(mu > 0.0) || !(2.0 * mu + dim * lambda > 0.0)) {
        throw DomainError("isotropic tensor needs mu > 0 and 2 mu + d lambda > 0");
    }
    const int v = voigt_size(dim);
    VoigtMatrix d = VoigtMatrix::Zero(v, v);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) d(i, j) = lambda;
        d(i, i) += 2.0 * mu;
    }
    for (int i = dim; i < v; ++i) d(i, i) = mu;
    return {d};
}

double ElasticTensor::frobenius() const {
    // Mandel scaling turns the Voigt matrix into an isometric representation.
    const int v = static_cast<int>(voigt.rows());
    const int d = dim();
    double s = 0.0;
    for (int i = 0; i < v; ++i) {
        for (int j = 0; j < v; ++j) {
            const double wi = i < d ? 1.0 : std::sqrt(2.0);
            const double wj = j < d ? 1.0 : std::sqrt(2.0);
            const double m = wi * wj * voigt(i, j);
            s += m * m;
        }
    }
    return std::sqrt(s);
}

bool ElasticTensor::positive_definite() const {
    Eigen::LLT<VoigtMatrix> llt(voigt);
    return llt.info() == Eigen::Success;
}

MaterialSet::MaterialSet(std::vector<ElasticTensor> materials, const ElasticTensor& void_template,
                         double eps, Interpolation scheme)
    : phases_(std::move(materials)), scheme_(scheme), eps_(eps) {
    if (!(eps > 0.0)) throw DomainError("interface parameter eps must be positive");
    phases_.push_back(void_template * (eps * eps));
    const int n = num_phases();
    if (n < 2) throw DomainError("need at least one material and void");
    for (const auto& p : phases_) {
        if (p.voigt.rows() != phases_.front().voigt.rows()) throw DomainError("tensor dimensions differ");
        if (!p.positive_definite()) throw DomainError("phase tensor is not positive definite");
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    std::vector<double> norms(n);
    for (int i = 0; i < n; ++i) norms[i] = phases_[i].frobenius();
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return norms[a] > norms[b]; });
    rank_.resize(n);
    for (int r = 0; r < n; ++r) rank_[order_[r]] = r;
}

void MaterialSet::coefficients(std::span<const double> phi, std::span<double> out) const {
    const int n = num_phases();
    if (scheme_ == Interpolation::Linear) {
        for (int i = 0; i < n; ++i) out[i] = phi[i];
        return;
    }
    // c_{s_k} = P_k^2 - P_{k-1}^2 with P_k the cumulative sum in stiffness order.
    double prev = 0.0;
    for (int r = 0; r < n; ++r) {
        const double cur = prev + phi[order_[r]];
        out[order_[r]] = cur * cur - prev * prev;
        prev = cur;
    }
}

void MaterialSet::coefficient_jacobian(std::span<const double> phi, std::span<double> out) const {
    const int n = num_phases();
    std::fill(out.begin(), out.end(), 0.0);
    if (scheme_ == Interpolation::Linear) {
        for (int i = 0; i < n; ++i) out[i * n + i] = 1.0;
        return;
    }
    double prev = 0.0;
    for (int r = 0; r < n; ++r) {
        const int k = order_[r];
        const double cur = prev + phi[k];
        for (int i = 0; i < n; ++i) {
            const int ri = rank_[i];
            double d = 0.0;
            if (ri <= r) d += 2.0 * cur;
            if (ri <= r - 1) d -= 2.0 * prev;
            out[k * n + i] = d;
        }
        prev = cur;
    }
}

VoigtMatrix MaterialSet::combine(std::span<const double> weights) const {
    VoigtMatrix d = VoigtMatrix::Zero(phases_[0].voigt.rows(), phases_[0].voigt.cols());
    for (int k = 0; k < num_phases(); ++k) {
        if (weights[k] != 0.0) d += weights[k] * phases_[k].voigt;
    }
    return d;
}

double simplex_violation(std::span<const double> phi) {
    double sum = 0.0;
    double neg = 0.0;
    for (double v : phi) {
        sum += v;
        neg = std::max(neg, -v);
    }
    return std::max(neg, std::abs(sum - 1.0));
}

ElasticTensor interpolate(const MaterialSet& ms, std::span<const double> phi, double tol) {
    const int n = ms.num_phases();
    if (static_cast<int>(phi.size()) != n) throw DomainError("phase vector has wrong length");
    if (simplex_violation(phi) > tol) throw DomainError("phase vector is off the Gibbs simplex");
    std::vector<double> c(n);
    ms.coefficients(phi, c);
    return {ms.combine(c)};
}

ElasticTensor interpolate_derivative(const MaterialSet& ms, std::span<const double> phi,
                                     std::span<const double> h, double tol) {
    const int n = ms.num_phases();
    if (static_cast<int>(phi.size()) != n || static_cast<int>(h.size()) != n) {
        throw DomainError("phase vector has wrong length");
    }
    if (simplex_violation(phi) > tol) throw DomainError("phase vector is off the Gibbs simplex");
    if (std::abs(std::accumulate(h.begin(), h.end(), 0.0)) > tol) {
        throw DomainError("direction is not tangent to the simplex");
    }
    std::vector<double> jac(static_cast<std::size_t>(n) * n);
    ms.coefficient_jacobian(phi, jac);
    std::vector<double> w(n, 0.0);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) w[k] += jac[k * n + i] * h[i];
    }
    return {ms.combine(w)};
}

}  // namespace phasetopo
