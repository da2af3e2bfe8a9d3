#include "phasetopo/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace phasetopo {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double feasibility(const PhaseField& phi, const Problem& p, bool bounded) {
    const auto& ops = p.cost->ops();
    double v = max_mass_violation(phi, ops, p.masses);
    if (bounded) {
        v = std::max(v, max_simplex_violation(phi));
    } else {
        v = std::max(v, (phi.values().rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
    const auto& lc = p.cost->loads();
    const int last = phi.num_phases() - 1;
    for (int n = 0; n < phi.num_nodes(); ++n) {
        if (lc.s0[n]) v = std::max(v, std::abs(phi(n, last)));
        if (lc.s1[n]) v = std::max(v, std::abs(phi(n, last) - 1.0));
    }
    return v;
}

}  // namespace

std::vector<Pin> Problem::pins() const {
    const auto& lc = cost->loads();
    std::vector<Pin> pins(mesh->num_nodes(), Pin::None);
    bool any = false;
    for (int n = 0; n < mesh->num_nodes(); ++n) {
        if (lc.s0[n]) pins[n] = Pin::VoidZero;
        if (lc.s1[n]) pins[n] = Pin::VoidOne;
        any = any || pins[n] != Pin::None;
    }
    if (!any) pins.clear();
    return pins;
}

double update_lambda(double lambda, double last_beta, const OptimizerConfig& cfg) {
    if (!cfg.scaled) return cfg.lambda_fixed;
    return last_beta >= cfg.full_step ? lambda / cfg.cbar : lambda * cfg.cbar;
}

double initial_lambda(const OptimizerConfig& cfg, double eps) {
    if (!cfg.scaled) return cfg.lambda_fixed;
    return cfg.lambda0 > 0.0 ? cfg.lambda0 : 0.01 / eps;
}

double stopping_norm(const PhaseField& v, const SparseMatrix& laplacian, double eps) {
    double s = 0.0;
    for (int i = 0; i < v.num_phases(); ++i) s += v.values().col(i).dot(laplacian * v.values().col(i));
    return std::sqrt(std::max(0.0, eps * s));
}

ProjectedGradient::ProjectedGradient(Problem& problem, OptimizerConfig cfg)
    : problem_(&problem), cfg_(cfg), pins_(problem.pins()) {
    if (!(cfg_.cbar > 0.0 && cfg_.cbar < 1.0)) throw DomainError("optimizer: cbar must lie in (0,1)");
    if (!(cfg_.c_armijo > 0.0 && cfg_.c_armijo < 1.0)) throw DomainError("optimizer: Armijo constant must lie in (0,1)");
    if (!(cfg_.shrink > 0.0 && cfg_.shrink < 1.0)) throw DomainError("optimizer: shrink factor must lie in (0,1)");
    if (!(cfg_.tol > 0.0)) throw DomainError("optimizer: tol must be positive");
    problem.masses.validate();
}

ProjectionProblem ProjectedGradient::projection_problem(const PhaseField& phi, double lambda,
                                                        const Eigen::MatrixXd& grad) const {
    const auto& ops = problem_->cost->ops();
    ProjectionProblem pp;
    pp.phi = phi;
    pp.lambda = lambda;
    pp.grad = grad;
    pp.metric = &ops.laplacian;
    pp.lumped = ops.lumped;
    pp.masses = problem_->masses.m;
    pp.pins = pins_;
    pp.bounds = problem_->bounded();
    pp.c_pdas = cfg_.c_pdas;
    pp.max_iter = cfg_.pdas_max_iter;
    return pp;
}

OptimizerState ProjectedGradient::start(PhaseField phi0) {
    auto& cost = *problem_->cost;
    if (phi0.num_nodes() != problem_->mesh->num_nodes() || phi0.num_phases() != cost.num_phases()) {
        throw DomainError("optimizer: initial field does not match the problem");
    }
    t0_ = now_seconds();
    OptimizerState st;
    if (feasibility(phi0, *problem_, problem_->bounded()) > 1e-9) {
        const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(phi0.num_nodes(), phi0.num_phases());
        phi0 = project(projection_problem(phi0, 0.0, zero)).zeta;
    }
    st.phi = std::move(phi0);
    st.u = cost.solve_state(st.phi);
    st.parts = cost.cost(st.phi, st.u);
    st.lambda = initial_lambda(cfg_, cost.params().eps);
    st.last_beta = 1.0;
    return st;
}

void ProjectedGradient::step(OptimizerState& st) {
    auto& cost = *problem_->cost;
    const double eps = cost.params().eps;

    const Eigen::VectorXd p = cost.solve_adjoint(st.phi, st.u);
    const Eigen::MatrixXd g = cost.gradient(st.phi, st.u, p, cfg_.kernel);
    if (st.k > 0) st.lambda = update_lambda(st.lambda, st.last_beta, cfg_);

    ProjectionResult pr;
    const PhaseField v = descent_direction(projection_problem(st.phi, st.lambda, g), &pr);

    IterationRecord rec;
    rec.iter = st.k;
    rec.parts = st.parts;
    rec.lambda = st.lambda;
    rec.v_norm = stopping_norm(v, cost.ops().laplacian, eps);
    rec.pdas_iters = pr.iterations;
    rec.dj = g.cwiseProduct(v.values()).sum();
    rec.simplex_violation = problem_->bounded() ? max_simplex_violation(st.phi) : 0.0;
    rec.mass_violation = max_mass_violation(st.phi, cost.ops(), problem_->masses);

    auto finish = [&](bool converged, std::string reason) {
        rec.seconds = now_seconds() - t0_;
        st.history.push_back(rec);
        st.done = true;
        st.converged = converged;
        st.reason = std::move(reason);
    };

    if (rec.v_norm < cfg_.tol) return finish(true, "tolerance");
    if (cfg_.target_cost && st.parts.total <= *cfg_.target_cost) return finish(true, "target cost");
    if (!(rec.dj < 0.0)) return finish(false, "no descent: j'(phi) v >= 0");

    double beta = 1.0;
    for (int m = 0; m <= cfg_.max_backtracks; ++m) {
        PhaseField trial(st.phi.values() + beta * v.values());
        Eigen::VectorXd u = cost.solve_state(trial);
        const CostParts parts = cost.cost(trial, u);
        rec.ls_trials = m + 1;
        if (parts.total <= st.parts.total + cfg_.c_armijo * beta * rec.dj) {
            rec.beta = beta;
            rec.seconds = now_seconds() - t0_;
            st.history.push_back(rec);
            st.phi = std::move(trial);
            st.u = std::move(u);
            st.parts = parts;
            st.last_beta = beta;
            ++st.k;
            return;
        }
        beta *= cfg_.shrink;
    }
    std::ostringstream os;
    os << "line search failed after " << cfg_.max_backtracks << " backtracks at iteration " << st.k
       << " (J = " << st.parts.total << ", j'v = " << rec.dj << ", |v| = " << rec.v_norm << ", lambda = "
       << st.lambda << ")";
    throw StagnationError(os.str());
}

OptimizerResult ProjectedGradient::run(PhaseField phi0, const IterationObserver& observer) {
    OptimizerState st = start(std::move(phi0));
    while (!st.done) {
        if (st.k >= cfg_.max_iter) {
            st.done = true;
            st.reason = "max_iter";
            break;
        }
        try {
            step(st);
        } catch (const StagnationError& e) {
            st.done = true;
            st.reason = std::string("stagnation: ") + e.what();
            break;
        }
        if (observer && !st.history.empty()) observer(st.history.back(), st.phi, st.u);
    }
    OptimizerResult r;
    r.phi = std::move(st.phi);
    r.u = std::move(st.u);
    r.parts = st.parts;
    r.history = std::move(st.history);
    r.converged = st.converged;
    r.reason = st.reason;
    r.seconds = now_seconds() - t0_;
    return r;
}

PhaseField prolongate(const Mesh& coarse, const PhaseField& phi, const Mesh& fine) {
    const int dim = coarse.dim();
    if (fine.dim() != dim || fine.level() < coarse.level()) throw DomainError("prolongate: meshes do not nest");
    for (int d = 0; d < dim; ++d) {
        if (std::abs(coarse.domain().lo[d] - fine.domain().lo[d]) > 1e-12 ||
            std::abs(coarse.domain().hi[d] - fine.domain().hi[d]) > 1e-12) {
            throw DomainError("prolongate: domains differ");
        }
    }
    const int r = 1 << (fine.level() - coarse.level());
    const auto cells = coarse.cells_per_axis();
    PhaseField out(fine.num_nodes(), phi.num_phases());
    for (int n = 0; n < fine.num_nodes(); ++n) {
        const auto gi = fine.grid_index(n);
        // Kuhn simplex walk: start at the floor corner, step along axes in
        // order of decreasing fractional part.
        std::array<int, 3> base{0, 0, 0};
        std::array<double, 3> frac{0, 0, 0};
        for (int d = 0; d < dim; ++d) {
            base[d] = std::min(gi[d] / r, cells[d] - 1);
            frac[d] = static_cast<double>(gi[d] - base[d] * r) / r;
        }
        std::array<int, 3> axes{0, 1, 2};
        std::stable_sort(axes.begin(), axes.begin() + dim, [&](int a, int b) { return frac[a] > frac[b]; });
        std::array<int, 3> corner = base;
        double prev = 1.0;
        for (int s = 0; s <= dim; ++s) {
            const double f = s < dim ? frac[axes[s]] : 0.0;
            const double wgt = prev - f;
            if (wgt != 0.0) {
                const int cn = coarse.node_at(corner[0], corner[1], dim == 3 ? corner[2] : 0);
                out.values().row(n) += wgt * phi.values().row(cn);
            }
            if (s < dim) corner[axes[s]] += 1;
            prev = f;
        }
    }
    return out;
}

std::vector<NestedLevel> nested_run(const ProblemFactory& factory, const Initializer& initial,
                                    const std::vector<int>& levels, const std::vector<double>& tols,
                                    OptimizerConfig cfg, const IterationObserver& observer) {
    if (levels.empty() || levels.size() != tols.size()) throw DomainError("nested: levels and tolerances differ");
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (levels[i] <= levels[i - 1]) throw DomainError("nested: levels must increase");
        if (tols[i] > tols[i - 1]) throw DomainError("nested: tolerances must not increase");
    }
    std::vector<NestedLevel> out;
    std::unique_ptr<Mesh> prev_mesh;
    PhaseField prev_phi;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        Problem problem = factory(levels[i]);
        PhaseField phi0 = i == 0 ? initial(problem) : prolongate(*prev_mesh, prev_phi, *problem.mesh);
        cfg.tol = tols[i];
        ProjectedGradient opt(problem, cfg);
        NestedLevel lvl;
        lvl.level = levels[i];
        lvl.tol = tols[i];
        lvl.result = opt.run(std::move(phi0), observer);
        prev_phi = lvl.result.phi;
        prev_mesh = std::move(problem.mesh);
        // The cost holds a pointer to the mesh; drop it before the mesh moves on.
        problem.cost.reset();
        out.push_back(std::move(lvl));
    }
    return out;
}

}  // namespace phasetopo
