#include "phasetopo/phase_field.hpp"

#include <cmath>

namespace phasetopo {

PhaseField PhaseField::constant(int num_nodes, const Eigen::VectorXd& v) {
    PhaseField f(num_nodes, static_cast<int>(v.size()));
    f.values_.rowwise() = v.transpose();
    return f;
}

PhaseOperators PhaseOperators::from(const Mesh& mesh) {
    PhaseOperators ops;
    ops.laplacian = assemble_laplacian(mesh);
    ops.lumped = mesh.lumped_mass();
    ops.volume = ops.lumped.sum();
    return ops;
}

void Masses::validate() const {
    if (m.size() < 2) throw DomainError("masses: need at least two phases");
    for (int i = 0; i < m.size(); ++i) {
        if (!(m[i] > 0.0 && m[i] < 1.0)) {
            throw DomainError("masses: m^" + std::to_string(i + 1) + " = " + std::to_string(m[i]) +
                              " is not in (0,1)");
        }
    }
    if (std::abs(m.sum() - 1.0) > 1e-12) {
        throw DomainError("masses: sum of m^i is " + std::to_string(m.sum()) + ", expected 1");
    }
}

double obstacle_psi0(const Eigen::Ref<const Eigen::VectorXd>& phi) { return 0.5 * (1.0 - phi.squaredNorm()); }

double double_well_psi(double s) {
    const double t = 1.0 - s * s;
    return 0.25 * t * t;
}

double double_well_dpsi(double s) { return s * s * s - s; }

Eigen::VectorXd phase_means(const PhaseField& phi, const PhaseOperators& ops) {
    return phi.values().transpose() * ops.lumped / ops.volume;
}

double max_simplex_violation(const PhaseField& phi) {
    const auto& v = phi.values();
    const double neg = std::max(0.0, -v.minCoeff());
    const double sum = (v.rowwise().sum().array() - 1.0).abs().maxCoeff();
    return std::max(neg, sum);
}

double max_mass_violation(const PhaseField& phi, const PhaseOperators& ops, const Masses& masses) {
    return (phase_means(phi, ops) - masses.m).cwiseAbs().maxCoeff();
}

namespace {

void require_two_phases(const PhaseField& phi) {
    if (phi.num_phases() != 2) throw DomainError("the scalar reduction needs exactly two phases");
}

}  // namespace

double ginzburg_landau(const PhaseField& phi, const PhaseOperators& ops, double eps,
                       const Potential& potential) {
    const auto& v = phi.values();
    if (potential.kind == Potential::Kind::DoubleWell) {
        require_two_phases(phi);
        const Eigen::VectorXd s = v.col(1) - v.col(0);
        double bulk = 0.0;
        for (int n = 0; n < s.size(); ++n) bulk += ops.lumped[n] * double_well_psi(s[n]);
        return 0.5 * eps * s.dot(ops.laplacian * s) + bulk / eps;
    }
    double grad = 0.0;
    for (int i = 0; i < v.cols(); ++i) grad += v.col(i).dot(ops.laplacian * v.col(i));
    double bulk = 0.0;
    for (int n = 0; n < v.rows(); ++n) bulk += ops.lumped[n] * obstacle_psi0(v.row(n).transpose());
    return 0.5 * eps * grad + bulk / eps;
}

Eigen::MatrixXd ginzburg_landau_gradient(const PhaseField& phi, const PhaseOperators& ops, double eps,
                                         const Potential& potential) {
    const auto& v = phi.values();
    Eigen::MatrixXd g(v.rows(), v.cols());
    if (potential.kind == Potential::Kind::DoubleWell) {
        require_two_phases(phi);
        const Eigen::VectorXd s = v.col(1) - v.col(0);
        Eigen::VectorXd ds = eps * (ops.laplacian * s);
        for (int n = 0; n < s.size(); ++n) ds[n] += ops.lumped[n] * double_well_dpsi(s[n]) / eps;
        g.col(0) = -ds;
        g.col(1) = ds;
        return g;
    }
    // Psi0'(phi) = -phi.
    for (int i = 0; i < v.cols(); ++i) {
        g.col(i) = eps * (ops.laplacian * v.col(i)) - ops.lumped.cwiseProduct(v.col(i)) / eps;
    }
    return g;
}

Eigen::VectorXd scalar_reduce(const PhaseField& phi) {
    require_two_phases(phi);
    return phi.values().col(1) - phi.values().col(0);
}

PhaseField scalar_expand(const Eigen::VectorXd& s) {
    PhaseField f(static_cast<int>(s.size()), 2);
    f.values().col(0) = 0.5 * (1.0 - s.array());
    f.values().col(1) = 0.5 * (1.0 + s.array());
    return f;
}

bool interface_resolved(double eps, double h) { return eps >= 2.0 * h; }

}  // namespace phasetopo
