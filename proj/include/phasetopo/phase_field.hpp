#pragma once

#include <string>

#include <Eigen/Core>

#include "phasetopo/fem.hpp"
#include "phasetopo/materials.hpp"
#include "phasetopo/mesh.hpp"

namespace phasetopo {

/// Nodal N-vector field; column i holds phase i, the last column is void.
class PhaseField {
public:
    PhaseField() = default;
    PhaseField(int num_nodes, int num_phases) : values_(Eigen::MatrixXd::Zero(num_nodes, num_phases)) {}
    explicit PhaseField(Eigen::MatrixXd values) : values_(std::move(values)) {}

    [[nodiscard]] int num_nodes() const { return static_cast<int>(values_.rows()); }
    [[nodiscard]] int num_phases() const { return static_cast<int>(values_.cols()); }

    [[nodiscard]] double operator()(int node, int phase) const { return values_(node, phase); }
    double& operator()(int node, int phase) { return values_(node, phase); }

    [[nodiscard]] const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }

    /// Copies the phase vector of one node.
    [[nodiscard]] Eigen::VectorXd at(int node) const { return values_.row(node).transpose(); }

    /// Constant field equal to `v` at every node.
    static PhaseField constant(int num_nodes, const Eigen::VectorXd& v);

private:
    Eigen::MatrixXd values_;
};

/// Mesh operators shared by the phase-field computations.
struct PhaseOperators {
    SparseMatrix laplacian;   // (grad, grad), scalar P1
    Eigen::VectorXd lumped;   // lumped mass diagonal
    double volume = 0.0;      // |Omega|

    static PhaseOperators from(const Mesh& mesh);
};

/// Prescribed mean values m^i in (0,1) with sum 1.
struct Masses {
    Eigen::VectorXd m;

    /// Throws DomainError naming the violated constraint.
    void validate() const;
};

struct Potential {
    enum class Kind { Obstacle, DoubleWell };
    Kind kind = Kind::Obstacle;

    static Potential obstacle() { return {Kind::Obstacle}; }
    static Potential double_well() { return {Kind::DoubleWell}; }
    [[nodiscard]] std::string name() const { return kind == Kind::Obstacle ? "obstacle" : "double_well"; }
};

/// Smooth part of the obstacle potential, 1/2 (1 - phi.phi).
double obstacle_psi0(const Eigen::Ref<const Eigen::VectorXd>& phi);
/// Scalar double well 1/4 (1 - s^2)^2 and its derivative s^3 - s.
double double_well_psi(double s);
double double_well_dpsi(double s);

/// Lumped-mass means of each phase, i.e. (1/|Omega|) int phi^i.
Eigen::VectorXd phase_means(const PhaseField& phi, const PhaseOperators& ops);

/// Largest pointwise simplex violation over all nodes.
double max_simplex_violation(const PhaseField& phi);
/// Largest |mean(phi^i) - m^i|.
double max_mass_violation(const PhaseField& phi, const PhaseOperators& ops, const Masses& masses);

/// Ginzburg-Landau energy: exact P1 quadrature for eps/2 |grad phi|^2 and
/// lumped quadrature for the potential divided by eps. The double well acts
/// on the reduced scalar phi^2 - phi^1 and needs N == 2.
double ginzburg_landau(const PhaseField& phi, const PhaseOperators& ops, double eps,
                       const Potential& potential);

/// Nodal derivative of ginzburg_landau with respect to every phi^i_n.
Eigen::MatrixXd ginzburg_landau_gradient(const PhaseField& phi, const PhaseOperators& ops, double eps,
                                         const Potential& potential);

/// phi^2 - phi^1 per node. Throws DomainError unless N == 2.
Eigen::VectorXd scalar_reduce(const PhaseField& phi);
/// Inverse of scalar_reduce: phi^1 = (1 - s)/2, phi^2 = (1 + s)/2.
PhaseField scalar_expand(const Eigen::VectorXd& s);

/// False when eps < 2h, i.e. the diffuse interface is under-resolved.
bool interface_resolved(double eps, double h);

}  // namespace phasetopo
