#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "phasetopo/mesh.hpp"
#include "phasetopo/projection.hpp"
#include "phasetopo/state_adjoint.hpp"

namespace phasetopo::verify {

struct OracleResult {
    Eigen::MatrixXd zeta;
    double objective = 0.0;
    long long candidates = 0;  // complete patterns solved
    long long feasible = 0;    // patterns whose minimizer stayed >= 0
};

/// Active-set enumeration for tiny projection problems. Every choice of
/// nonempty inactive phase subset per node is either solved through its
/// dense KKT system or discarded because the equality-constrained minimum of
/// a partial choice already exceeds the best primal-feasible candidate. The
/// result is the feasible candidate of least objective.
OracleResult enumerate_projection(const ProjectionProblem& pp);

/// Random projection instance on `mesh`: phi is a random simplex field
/// (some entries exactly zero), masses are its means, the gradient has
/// entries of both signs, lambda is drawn log-uniformly in [0.1, 10].
ProjectionProblem random_projection(const Mesh& mesh, const SparseMatrix& metric, int num_phases,
                                    std::uint64_t seed, const std::vector<Pin>& pins = {});

struct FdSample {
    double t = 0.0;
    double fd = 0.0;        // (j(phi + t eta) - j(phi)) / t
    double exact = 0.0;     // j'(phi) eta
    double rel_error = 0.0;
};

/// Forward-difference check of the reduced derivative with full state
/// re-solves. eta must keep phi + t eta inside the simplex.
std::vector<FdSample> fd_check(ReducedCost& cost, const PhaseField& phi, const PhaseField& eta,
                               const std::vector<double>& ts);

/// Interior simplex field with all entries in [floor, 1] and a tangent
/// direction (zero nodal sums and zero phase means) scaled to max-norm
/// `amplitude`.
PhaseField random_interior_field(const Mesh& mesh, int num_phases, std::uint64_t seed, double floor = 0.2);
PhaseField random_tangent(const Mesh& mesh, int num_phases, std::uint64_t seed, double amplitude);

}  // namespace phasetopo::verify
