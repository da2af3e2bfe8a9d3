#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phasetopo/projection.hpp"
#include "phasetopo/state_adjoint.hpp"

namespace phasetopo {

/// A mesh with its reduced cost and mass constraint. Owns the mesh so the
/// cost's reference stays valid.
struct Problem {
    std::unique_ptr<Mesh> mesh;
    std::unique_ptr<ReducedCost> cost;
    Masses masses;
    /// Obstacle potential keeps z >= 0; the smooth double well drops it.
    [[nodiscard]] bool bounded() const { return cost->params().potential.kind == Potential::Kind::Obstacle; }
    /// S0 / S1 node sets as projection pins.
    [[nodiscard]] std::vector<Pin> pins() const;
};

struct OptimizerConfig {
    double c_armijo = 1e-4;   // sufficient decrease constant
    double shrink = 0.5;      // backtracking factor
    double cbar = 0.5;        // lambda update factor
    double tol = 1e-3;        // on sqrt(eps) |v|_H
    int max_iter = 2000;
    int max_backtracks = 60;
    bool scaled = true;       // false: lambda stays at lambda_fixed
    double lambda_fixed = 1.0;
    double lambda0 = 0.0;     // 0 selects 0.01 / eps
    /// lambda grows when the previous step length is at least this.
    double full_step = 1.0;
    double c_pdas = 1.0;
    int pdas_max_iter = 100;
    std::optional<double> target_cost;  // stop once J <= target
    KernelMode kernel = KernelMode::Parallel;
};

struct IterationRecord {
    int iter = 0;
    CostParts parts;
    double v_norm = 0.0;      // sqrt(eps) |v|_H
    double lambda = 0.0;
    double beta = 0.0;        // accepted step length, 0 on the final record
    double dj = 0.0;          // j'(phi) v
    int pdas_iters = 0;
    int ls_trials = 0;
    double seconds = 0.0;     // since the start of the run
    double simplex_violation = 0.0;
    double mass_violation = 0.0;
};

struct OptimizerState {
    PhaseField phi;
    Eigen::VectorXd u;
    CostParts parts;
    double lambda = 0.0;
    double last_beta = 1.0;
    int k = 0;
    bool done = false;
    bool converged = false;
    std::string reason;
    std::vector<IterationRecord> history;
};

struct OptimizerResult {
    PhaseField phi;
    Eigen::VectorXd u;
    CostParts parts;
    std::vector<IterationRecord> history;
    bool converged = false;
    std::string reason;
    double seconds = 0.0;
    /// Steps taken; the last record is a step unless the run stopped on it.
    [[nodiscard]] int iterations() const {
        if (history.empty()) return 0;
        return history.back().iter + (history.back().beta > 0.0 ? 1 : 0);
    }
};

class StagnationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using IterationObserver = std::function<void(const IterationRecord&, const PhaseField&, const Eigen::VectorXd&)>;

/// lambda_k from lambda_{k-1}: divided by cbar after a full step, times
/// cbar otherwise.
double update_lambda(double lambda, double last_beta, const OptimizerConfig& cfg);

/// Initial lambda: 0.01 / eps in scaled mode, lambda_fixed otherwise.
double initial_lambda(const OptimizerConfig& cfg, double eps);

/// sqrt(eps * sum_i v_i^T K v_i).
double stopping_norm(const PhaseField& v, const SparseMatrix& laplacian, double eps);

/// Projected H1-gradient method with Armijo backtracking along
/// v = P(phi, lambda) - phi.
class ProjectedGradient {
public:
    ProjectedGradient(Problem& problem, OptimizerConfig cfg);

    /// Restores feasibility of phi0 if needed (lambda = 0 projection) and
    /// evaluates the cost.
    OptimizerState start(PhaseField phi0);

    /// One iteration. Appends a record; sets done when the stopping test
    /// holds. Throws StagnationError when backtracking runs out.
    void step(OptimizerState& st);

    OptimizerResult run(PhaseField phi0, const IterationObserver& observer = {});

    /// Projection problem at the current iterate with the given gradient.
    [[nodiscard]] ProjectionProblem projection_problem(const PhaseField& phi, double lambda,
                                                       const Eigen::MatrixXd& grad) const;

    [[nodiscard]] const OptimizerConfig& config() const { return cfg_; }

private:
    Problem* problem_;
    OptimizerConfig cfg_;
    std::vector<Pin> pins_;
    double t0_ = 0.0;
};

/// Coarse P1 field on the next nested level. Nodes of the fine grid are
/// coarse nodes or midpoints of coarse edges, so this is exact.
PhaseField prolongate(const Mesh& coarse, const PhaseField& phi, const Mesh& fine);

struct NestedLevel {
    int level = 0;
    double tol = 0.0;
    OptimizerResult result;
};

using ProblemFactory = std::function<Problem(int level)>;
using Initializer = std::function<PhaseField(const Problem&)>;

/// Solves on each level in turn; every level after the first starts from
/// the prolongated result of the previous one.
std::vector<NestedLevel> nested_run(const ProblemFactory& factory, const Initializer& initial,
                                    const std::vector<int>& levels, const std::vector<double>& tols,
                                    OptimizerConfig cfg, const IterationObserver& observer = {});

}  // namespace phasetopo
