#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phasetopo/fem.hpp"
#include "phasetopo/phase_field.hpp"

namespace phasetopo {

/// Node pins on the last (void) phase.
enum class Pin : char { None = 0, VoidZero = 1, VoidOne = 2 };

/// min 1/2 sum_i (z^i - phi^i)^T Q (z^i - phi^i) + lambda sum_i G^i.(z^i - phi^i)
/// subject to sum_i z^i_n = 1, w^T z^i = m^i |Omega|, z >= 0 and the pins.
///
/// Q is a scalar nodal matrix shared by all phases: the Laplacian for the
/// projected gradient method, a mass-plus-Laplacian matrix for the flow.
struct ProjectionProblem {
    PhaseField phi;
    double lambda = 1.0;
    Eigen::MatrixXd grad;     // nodal load of j'(phi), n x N
    const SparseMatrix* metric = nullptr;
    Eigen::VectorXd lumped;   // mass weights w
    Eigen::VectorXd masses;   // m, target means
    std::vector<Pin> pins;    // empty or one entry per node
    bool bounds = true;       // false drops z >= 0 (smooth potentials)
    double c_pdas = 1.0;
    int max_iter = 100;
};

struct ProjectionResult {
    PhaseField zeta;
    Eigen::VectorXd mass_multiplier;  // kappa, per phase (last one is 0)
    Eigen::VectorXd sum_multiplier;   // s, per node
    Eigen::MatrixXd bound_multiplier; // mu, n x N (0 on inactive entries)
    std::vector<char> active;         // n * N, row-major, 1 = held at 0
    int iterations = 0;
    double kkt_residual = 0.0;
};

class ProjectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfeasibleMassError : public ProjectionError {
public:
    using ProjectionError::ProjectionError;
};

/// Working state of the primal-dual active set iteration.
struct PdasState {
    std::vector<char> active;  // n * N, row-major
    ProjectionResult result;
    bool changed = true;
    double mass_defect = 0.0;  // mean-value error of the last solve
};

/// Initial state with active set {phi <= 0} (none without bounds).
PdasState pdas_start(const ProjectionProblem& pp);

/// One active-set solve and update. Solves the equality-constrained problem
/// on the current inactive set, recovers multipliers, then predicts the next
/// active set from mu - c_pdas Q_nn z > 0. `changed` reports whether the
/// active set moved.
void pdas_iterate(const ProjectionProblem& pp, PdasState& state);

/// Iterates until the active set repeats. Throws ProjectionError after
/// max_iter iterations and InfeasibleMassError when the pins make the
/// masses unreachable.
ProjectionResult project(const ProjectionProblem& pp);

/// Same as project but starting from the given active set.
ProjectionResult project_from(const ProjectionProblem& pp, std::vector<char> active);

/// zeta - phi.
PhaseField descent_direction(const ProjectionProblem& pp, ProjectionResult* result = nullptr);

/// Largest violation of stationarity, primal feasibility, dual feasibility
/// and complementarity, each scaled to be dimensionless.
double kkt_residual(const ProjectionProblem& pp, const ProjectionResult& r);

/// Objective value of the projection problem at z.
double projection_objective(const ProjectionProblem& pp, const Eigen::MatrixXd& z);

}  // namespace phasetopo
