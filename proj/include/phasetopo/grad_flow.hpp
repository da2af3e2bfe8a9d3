#pragma once

#include <string>
#include <vector>

#include "phasetopo/optimizer.hpp"

namespace phasetopo {

struct FlowConfig {
    double tau0 = 0.0;        // 0 selects eps
    double grow = 1.2;        // tau factor after `grow_after` accepted steps in a row
    int grow_after = 5;
    double tau_min_factor = 1e-8;  // abort when tau < tau_min_factor * tau0
    double tol = 1e-4;        // on |phi_{n+1} - phi_n|_{L2} / tau
    int max_steps = 2000;
    int max_rejects = 40;     // consecutive rejections before giving up
    /// Also reject steps that raise the mechanism functional J0.
    bool monotone_mechanism = false;
    double c_pdas = 1.0;
    int pdas_max_iter = 100;
    KernelMode kernel = KernelMode::Parallel;
};

struct FlowRecord {
    int step = 0;
    CostParts parts;          // at phi_n, before the step
    double tau = 0.0;
    double change = 0.0;      // |phi_{n+1} - phi_n|_{L2} / tau of the accepted step
    int pdas_iters = 0;
    int rejected = 0;         // rejections before this step was accepted
    double seconds = 0.0;
    double simplex_violation = 0.0;
    double mass_violation = 0.0;
    double pin_violation = 0.0;
};

struct FlowResult {
    PhaseField phi;
    Eigen::VectorXd u;
    CostParts parts;
    std::vector<FlowRecord> history;
    bool converged = false;
    std::string reason;
    double seconds = 0.0;
};

using FlowObserver = std::function<void(const FlowRecord&, const PhaseField&, const Eigen::VectorXd&)>;

/// Semi-implicit L2 gradient flow. Each step solves
///   min 1/2 d^T ((eps/tau) M + gamma eps K) d + G^T d
/// over feasible phi + d, where G is the nodal reduced gradient at phi_n:
/// implicit in the time and gradient terms, explicit in the potential,
/// elastic and mechanism terms. A step that raises J is rejected and tau
/// halved.
class GradientFlow {
public:
    GradientFlow(Problem& problem, FlowConfig cfg);

    /// QP of one step from phi with step tau and gradient g.
    [[nodiscard]] ProjectionProblem step_problem(const PhaseField& phi, const Eigen::MatrixXd& g, double tau);

    /// One trial step; returns the new field without acceptance test.
    PhaseField flow_step(const PhaseField& phi, const Eigen::VectorXd& u, double tau, int* pdas_iters = nullptr);

    FlowResult run(PhaseField phi0, const FlowObserver& observer = {});

private:
    Problem* problem_;
    FlowConfig cfg_;
    std::vector<Pin> pins_;
    SparseMatrix metric_;
    double metric_tau_ = -1.0;
};

}  // namespace phasetopo
