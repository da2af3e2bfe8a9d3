#include <array>
#include <cmath>

#include "phasetopo/random.hpp"
#include "phasetopo/verify.hpp"

namespace phasetopo::verify {

std::vector<FdSample> fd_check(ReducedCost& cost, const PhaseField& phi, const PhaseField& eta,
                               const std::vector<double>& ts) {
    const Eigen::VectorXd u = cost.solve_state(phi);
    // The general adjoint path, no shortcut.
    const Eigen::VectorXd p = cost.solve_adjoint(phi, u, false);
    const double j0 = cost.cost(phi, u).total;
    const double exact = cost.reduced_derivative(phi, u, p, eta);
    std::vector<FdSample> out;
    for (double t : ts) {
        PhaseField moved(phi.values() + t * eta.values());
        const double jt = cost.evaluate(moved).total;
        FdSample s;
        s.t = t;
        s.fd = (jt - j0) / t;
        s.exact = exact;
        s.rel_error = std::abs(s.fd - exact) / std::max(std::abs(exact), 1e-300);
        out.push_back(s);
    }
    return out;
}

PhaseField random_interior_field(const Mesh& mesh, int num_phases, std::uint64_t seed, double floor) {
    std::mt19937_64 rng(seed);
    PhaseField f(mesh.num_nodes(), num_phases);
    const double spare = 1.0 - floor * num_phases;
    for (int k = 0; k < mesh.num_nodes(); ++k) {
        Eigen::VectorXd w(num_phases);
        for (int i = 0; i < num_phases; ++i) w[i] = -std::log(1.0 - unit_double(rng));
        w /= w.sum();
        for (int i = 0; i < num_phases; ++i) f(k, i) = floor + spare * w[i];
    }
    return f;
}

PhaseField random_tangent(const Mesh& mesh, int num_phases, std::uint64_t seed, double amplitude) {
    // A few low Fourier modes per phase, so the direction is resolved by the
    // mesh and j'(phi) eta does not cancel down to roundoff.
    std::mt19937_64 rng(seed);
    const int n = mesh.num_nodes();
    const Box& box = mesh.domain();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, num_phases);
    for (int i = 0; i < num_phases; ++i) {
        for (int mode = 0; mode < 4; ++mode) {
            std::array<double, 3> freq{}, shift{};
            for (int d = 0; d < mesh.dim(); ++d) {
                freq[d] = 1.0 + static_cast<double>(rng() % 3);
                shift[d] = uniform(rng, 0.0, 6.283185307179586);
            }
            const double a = uniform(rng, -1.0, 1.0);
            for (int k = 0; k < n; ++k) {
                double v = a;
                for (int d = 0; d < mesh.dim(); ++d) {
                    const double x = (mesh.node(k)[d] - box.lo[d]) / (box.hi[d] - box.lo[d]);
                    v *= std::cos(3.141592653589793 * freq[d] * x + shift[d]);
                }
                e(k, i) += v;
            }
        }
    }
    const Eigen::VectorXd& w = mesh.lumped_mass();
    for (int i = 0; i < num_phases; ++i) e.col(i).array() -= w.dot(e.col(i)) / w.sum();
    // Removing the nodal mean keeps the phase means at zero.
    const Eigen::VectorXd row_mean = e.rowwise().mean();
    e.colwise() -= row_mean;
    e *= amplitude / e.cwiseAbs().maxCoeff();
    return PhaseField(e);
}

}  // namespace phasetopo::verify
