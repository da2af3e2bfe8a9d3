#include "phasetopo/grad_flow.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace phasetopo {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double l2_norm(const Eigen::MatrixXd& d, const Eigen::VectorXd& w) {
    double s = 0.0;
    for (int i = 0; i < d.cols(); ++i) s += d.col(i).cwiseAbs2().dot(w);
    return std::sqrt(s);
}

}  // namespace

GradientFlow::GradientFlow(Problem& problem, FlowConfig cfg) : problem_(&problem), cfg_(cfg), pins_(problem.pins()) {
    if (cfg_.tau0 <= 0.0) cfg_.tau0 = problem.cost->params().eps;
    if (!(cfg_.grow >= 1.0)) throw DomainError("flow: grow factor must be >= 1");
    problem.masses.validate();
}

ProjectionProblem GradientFlow::step_problem(const PhaseField& phi, const Eigen::MatrixXd& g, double tau) {
    const auto& ops = problem_->cost->ops();
    const auto& cp = problem_->cost->params();
    if (tau != metric_tau_) {
        SparseMatrix m(ops.lumped.size(), ops.lumped.size());
        m.reserve(Eigen::VectorXi::Constant(ops.lumped.size(), 1));
        for (int n = 0; n < ops.lumped.size(); ++n) m.insert(n, n) = ops.lumped[n];
        metric_ = (cp.eps / tau) * m + (cp.gamma * cp.eps) * ops.laplacian;
        metric_tau_ = tau;
    }
    ProjectionProblem pp;
    pp.phi = phi;
    pp.lambda = 1.0;
    pp.grad = g;
    pp.metric = &metric_;
    pp.lumped = ops.lumped;
    pp.masses = problem_->masses.m;
    pp.pins = pins_;
    pp.bounds = problem_->bounded();
    pp.c_pdas = cfg_.c_pdas;
    pp.max_iter = cfg_.pdas_max_iter;
    return pp;
}

PhaseField GradientFlow::flow_step(const PhaseField& phi, const Eigen::VectorXd& u, double tau, int* pdas_iters) {
    auto& cost = *problem_->cost;
    const Eigen::VectorXd p = cost.solve_adjoint(phi, u);
    const Eigen::MatrixXd g = cost.gradient(phi, u, p, cfg_.kernel);
    const ProjectionResult r = project(step_problem(phi, g, tau));
    if (pdas_iters) *pdas_iters = r.iterations;
    return r.zeta;
}

FlowResult GradientFlow::run(PhaseField phi0, const FlowObserver& observer) {
    auto& cost = *problem_->cost;
    const auto& ops = cost.ops();
    const double t0 = now_seconds();
    const int last = phi0.num_phases() - 1;

    FlowResult res;
    PhaseField phi = std::move(phi0);
    {
        // Feasible start: project with a zero gradient if needed.
        const double viol = std::max(max_mass_violation(phi, ops, problem_->masses),
                                     problem_->bounded() ? max_simplex_violation(phi) : 0.0);
        bool pins_ok = true;
        for (int n = 0; n < phi.num_nodes(); ++n) {
            if (cost.loads().s0[n] && phi(n, last) != 0.0) pins_ok = false;
            if (cost.loads().s1[n] && phi(n, last) != 1.0) pins_ok = false;
        }
        if (viol > 1e-9 || !pins_ok) {
            const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(phi.num_nodes(), phi.num_phases());
            phi = project(step_problem(phi, zero, cfg_.tau0)).zeta;
        }
    }
    Eigen::VectorXd u = cost.solve_state(phi);
    CostParts parts = cost.cost(phi, u);
    double tau = cfg_.tau0;
    int streak = 0;

    for (int step = 0;; ++step) {
        if (step >= cfg_.max_steps) {
            res.reason = "max_steps";
            break;
        }
        const Eigen::VectorXd p = cost.solve_adjoint(phi, u);
        const Eigen::MatrixXd g = cost.gradient(phi, u, p, cfg_.kernel);

        FlowRecord rec;
        rec.step = step;
        rec.parts = parts;
        rec.simplex_violation = problem_->bounded() ? max_simplex_violation(phi) : 0.0;
        rec.mass_violation = max_mass_violation(phi, ops, problem_->masses);
        for (int n = 0; n < phi.num_nodes(); ++n) {
            if (cost.loads().s0[n]) rec.pin_violation = std::max(rec.pin_violation, std::abs(phi(n, last)));
            if (cost.loads().s1[n]) rec.pin_violation = std::max(rec.pin_violation, std::abs(phi(n, last) - 1.0));
        }

        bool accepted = false;
        PhaseField next;
        Eigen::VectorXd next_u;
        CostParts next_parts;
        while (!accepted) {
            // An active set that does not settle counts as a rejected step.
            bool solved = true;
            try {
                const ProjectionResult r = project(step_problem(phi, g, tau));
                rec.pdas_iters = r.iterations;
                next = r.zeta;
            } catch (const InfeasibleMassError&) {
                throw;
            } catch (const ProjectionError&) {
                solved = false;
            }
            bool descent = false;
            if (solved) {
                next_u = cost.solve_state(next);
                next_parts = cost.cost(next, next_u);
                descent = next_parts.total <= parts.total;
            }
            if (descent && (!cfg_.monotone_mechanism || next_parts.mechanism <= parts.mechanism)) {
                accepted = true;
                break;
            }
            ++rec.rejected;
            streak = 0;
            tau *= 0.5;
            if (rec.rejected > cfg_.max_rejects || tau < cfg_.tau_min_factor * cfg_.tau0) {
                std::ostringstream os;
                os << "step " << step << " rejected " << rec.rejected << " times, tau = " << tau
                   << ", J = " << parts.total << ", J0 = " << parts.mechanism;
                // J still decreases but only by raising J0: a minimum of J0
                // along the flow, not a failure of the time stepping.
                res.reason = (descent ? "mechanism stationary: " : "stalled: ") + os.str();
                break;
            }
        }
        if (!accepted) {
            rec.seconds = now_seconds() - t0;
            res.history.push_back(rec);
            break;
        }
        rec.tau = tau;
        rec.change = l2_norm(next.values() - phi.values(), ops.lumped) / tau;
        rec.seconds = now_seconds() - t0;
        res.history.push_back(rec);
        if (observer) observer(rec, phi, u);

        phi = std::move(next);
        u = std::move(next_u);
        parts = next_parts;
        if (rec.change < cfg_.tol) {
            res.converged = true;
            res.reason = "tolerance";
            break;
        }
        if (++streak >= cfg_.grow_after) {
            tau *= cfg_.grow;
            streak = 0;
        }
    }
    res.phi = std::move(phi);
    res.u = std::move(u);
    res.parts = parts;
    res.seconds = now_seconds() - t0;
    return res;
}

}  // namespace phasetopo
