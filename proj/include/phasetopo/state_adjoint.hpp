#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phasetopo/fem.hpp"
#include "phasetopo/materials.hpp"
#include "phasetopo/mesh.hpp"
#include "phasetopo/phase_field.hpp"

namespace phasetopo {

/// Loads and targets of one elasticity problem. Vector fields are nodal,
/// dof-interleaved (node * dim + component). Tractions live on the mesh
/// patches tagged NeumannG.
struct LoadCase {
    Eigen::VectorXd volume_force;  // f
    Eigen::VectorXd target;        // u_Omega
    Eigen::VectorXd weight;        // c >= 0, per node
    std::vector<char> s0;          // nodes with phi^N pinned to 0
    std::vector<char> s1;          // nodes with phi^N pinned to 1

    /// No volume force, zero target, zero weight, no pinned nodes.
    static LoadCase zero(const Mesh& mesh);
};

struct CostParams {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 1.0;
    double eps = 0.05;
    Potential potential;

    void validate() const;
};

struct CostParts {
    double total = 0.0;
    double compliance = 0.0;  // F(u, phi)
    double mechanism = 0.0;   // J0(u, phi)
    double perimeter = 0.0;   // Ginzburg-Landau energy
};

class DegenerateCostError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WellPosednessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// State, adjoint, cost and reduced derivative of
/// J = alpha F(u, phi) + beta J0(u, phi) + gamma E(phi) with u = S(phi).
///
/// The (1 - phi^N) factors of F and J0 use lumped quadrature, the same rule
/// the adjoint right-hand side uses, so the nodal gradient is the exact
/// derivative of the discrete reduced cost.
class ReducedCost {
public:
    ReducedCost(const Mesh& mesh, MaterialSet materials, LoadCase loads, CostParams params,
                SolverKind solver = SolverKind::Cholesky);

    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const MaterialSet& materials() const { return materials_; }
    [[nodiscard]] const LoadCase& loads() const { return loads_; }
    [[nodiscard]] const CostParams& params() const { return params_; }
    [[nodiscard]] const PhaseOperators& ops() const { return ops_; }
    [[nodiscard]] int num_phases() const { return materials_.num_phases(); }
    [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

    /// Volume-integrated cell tensors int_T C(phi) for the current field.
    [[nodiscard]] std::vector<VoigtMatrix> cell_tensors(const PhaseField& phi) const;

    /// Load vector F(., phi) over all dofs.
    [[nodiscard]] Eigen::VectorXd load_vector(const PhaseField& phi) const;

    /// Displacement solving the discrete state equation (zero on Dirichlet nodes).
    Eigen::VectorXd solve_state(const PhaseField& phi);

    /// Discrete adjoint. With beta == 0 and `allow_shortcut` it returns
    /// alpha * u without a solve. Throws DegenerateCostError when beta > 0
    /// and J0 == 0.
    Eigen::VectorXd solve_adjoint(const PhaseField& phi, const Eigen::VectorXd& u, bool allow_shortcut = true);

    [[nodiscard]] CostParts cost(const PhaseField& phi, const Eigen::VectorXd& u) const;

    /// Nodal derivative dj/dphi^i_n (n x N), so j'(phi) eta = sum(G .* eta).
    [[nodiscard]] Eigen::MatrixXd gradient(const PhaseField& phi, const Eigen::VectorXd& u,
                                           const Eigen::VectorXd& p,
                                           KernelMode mode = KernelMode::Parallel) const;

    /// Elastic part -<E(p), E(u)>_{C'(phi) e_{n,i}} alone, per kernel.
    [[nodiscard]] Eigen::MatrixXd elastic_sensitivity(const PhaseField& phi, const Eigen::VectorXd& u,
                                                      const Eigen::VectorXd& p, KernelMode mode) const;

    /// j'(phi) eta from the nodal gradient. Throws DomainError if eta is not
    /// tangent to the sum constraint.
    [[nodiscard]] double reduced_derivative(const PhaseField& phi, const Eigen::VectorXd& u,
                                            const Eigen::VectorXd& p, const PhaseField& eta) const;

    /// Mean-compliance form evaluated cell by cell from the directional
    /// tensor derivative: gamma eps (grad phi, grad eta) + gamma/eps
    /// (Psi0'(phi), eta) - alpha <C'(phi)(eta) E(u), E(u)>. Only valid for
    /// beta == 0 and f == 0.
    [[nodiscard]] double compliance_derivative(const PhaseField& phi, const Eigen::VectorXd& u,
                                               const PhaseField& eta) const;

    /// Convenience: solve and evaluate j(phi).
    CostParts evaluate(const PhaseField& phi);

    [[nodiscard]] int state_solves() const { return state_solves_; }

private:
    void factorize(const PhaseField& phi);

    const Mesh* mesh_;
    MaterialSet materials_;
    LoadCase loads_;
    CostParams params_;
    PhaseOperators ops_;
    ElasticityAssembler assembler_;
    SpdSolver solver_;
    Eigen::VectorXd traction_;
    std::optional<Eigen::MatrixXd> factorized_for_;
    std::vector<std::string> warnings_;
    int state_solves_ = 0;
};

}  // namespace phasetopo
