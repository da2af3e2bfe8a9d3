#include "phasetopo/state_adjoint.hpp"

#include <cmath>

namespace phasetopo {

LoadCase LoadCase::zero(const Mesh& mesh) {
    LoadCase lc;
    const int nd = mesh.num_nodes() * mesh.dim();
    lc.volume_force = Eigen::VectorXd::Zero(nd);
    lc.target = Eigen::VectorXd::Zero(nd);
    lc.weight = Eigen::VectorXd::Zero(mesh.num_nodes());
    lc.s0.assign(mesh.num_nodes(), 0);
    lc.s1.assign(mesh.num_nodes(), 0);
    return lc;
}

void CostParams::validate() const {
    if (!(alpha >= 0.0)) throw DomainError("cost: alpha must be >= 0");
    if (!(beta >= 0.0)) throw DomainError("cost: beta must be >= 0");
    if (!(gamma > 0.0)) throw DomainError("cost: gamma must be > 0");
    if (!(eps > 0.0)) throw DomainError("cost: eps must be > 0");
    if (alpha == 0.0 && beta == 0.0) throw DomainError("cost: alpha and beta cannot both vanish");
}

ReducedCost::ReducedCost(const Mesh& mesh, MaterialSet materials, LoadCase loads, CostParams params,
                         SolverKind solver)
    : mesh_(&mesh),
      materials_(std::move(materials)),
      loads_(std::move(loads)),
      params_(params),
      ops_(PhaseOperators::from(mesh)),
      assembler_(mesh, true),
      solver_(solver, 1e-10),
      traction_(traction_load(mesh)) {
    params_.validate();
    if (!mesh.has_dirichlet()) {
        throw WellPosednessError("no Dirichlet boundary: the elasticity problem is not well posed");
    }
    if (materials_.dim() != mesh.dim()) throw DomainError("material dimension does not match mesh");
    if (std::abs(materials_.eps() - params_.eps) > 1e-15 * params_.eps) {
        throw DomainError("material void scaling uses a different eps than the cost");
    }
    const int nn = mesh.num_nodes();
    const int nd = nn * mesh.dim();
    if (loads_.volume_force.size() != nd || loads_.target.size() != nd || loads_.weight.size() != nn ||
        static_cast<int>(loads_.s0.size()) != nn || static_cast<int>(loads_.s1.size()) != nn) {
        throw DomainError("load case does not match the mesh");
    }
    if (loads_.weight.size() > 0 && loads_.weight.minCoeff() < 0.0) throw DomainError("weight c must be >= 0");
    bool s0_meets_c = false;
    for (int n = 0; n < nn; ++n) {
        if (loads_.s0[n] && loads_.s1[n]) throw DomainError("S0 and S1 intersect");
        if (loads_.s0[n] && loads_.weight[n] > 0.0) s0_meets_c = true;
    }
    if (params_.beta > 0.0) {
        if (loads_.weight.maxCoeff() <= 0.0) throw DomainError("beta > 0 needs a weight c with positive support");
        if (!s0_meets_c) warnings_.push_back("S0 does not meet supp c; J0 may degenerate");
    }
    if (!interface_resolved(params_.eps, mesh.h())) {
        warnings_.push_back("eps < 2h: the diffuse interface is under-resolved");
    }
}

std::vector<VoigtMatrix> ReducedCost::cell_tensors(const PhaseField& phi) const {
    const auto& mesh = *mesh_;
    const auto& quad = SimplexQuadrature::for_dim(mesh.dim());
    const int nv = mesh.nodes_per_cell();
    const int np = num_phases();
    std::vector<VoigtMatrix> out(mesh.num_cells());
#pragma omp parallel
    {
        std::vector<double> phq(np), cq(np), w(np);
#pragma omp for schedule(static)
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const auto& cn = mesh.cell(c);
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t q = 0; q < quad.weights.size(); ++q) {
                for (int i = 0; i < np; ++i) {
                    double s = 0.0;
                    for (int a = 0; a < nv; ++a) s += quad.points[q][a] * phi(cn[a], i);
                    phq[i] = s;
                }
                materials_.coefficients(phq, cq);
                const double wq = quad.weights[q] * mesh.cell_volume(c);
                for (int k = 0; k < np; ++k) w[k] += wq * cq[k];
            }
            out[c] = materials_.combine(w);
        }
    }
    return out;
}

Eigen::VectorXd ReducedCost::load_vector(const PhaseField& phi) const {
    const int dim = mesh_->dim();
    const int last = num_phases() - 1;
    Eigen::VectorXd f = traction_;
    for (int n = 0; n < mesh_->num_nodes(); ++n) {
        const double s = ops_.lumped[n] * (1.0 - phi(n, last));
        for (int k = 0; k < dim; ++k) f[n * dim + k] += s * loads_.volume_force[n * dim + k];
    }
    return f;
}

void ReducedCost::factorize(const PhaseField& phi) {
    if (factorized_for_ && factorized_for_->rows() == phi.values().rows() &&
        factorized_for_->cols() == phi.values().cols() && *factorized_for_ == phi.values()) {
        return;
    }
    const auto tensors = cell_tensors(phi);
    solver_.factorize(assembler_.assemble(tensors));
    factorized_for_ = phi.values();
}

Eigen::VectorXd ReducedCost::solve_state(const PhaseField& phi) {
    if (phi.num_phases() != num_phases() || phi.num_nodes() != mesh_->num_nodes()) {
        throw DomainError("phase field does not match problem");
    }
    factorize(phi);
    ++state_solves_;
    const Eigen::VectorXd rhs = assembler_.dofs().restrict(load_vector(phi));
    if (rhs.norm() == 0.0) return Eigen::VectorXd::Zero(assembler_.dofs().num_dofs());
    return assembler_.dofs().extend(solver_.solve(rhs));
}

Eigen::VectorXd ReducedCost::solve_adjoint(const PhaseField& phi, const Eigen::VectorXd& u, bool allow_shortcut) {
    const double alpha = params_.alpha;
    const double beta = params_.beta;
    if (beta == 0.0 && allow_shortcut) return alpha * u;

    Eigen::VectorXd rhs = alpha * load_vector(phi);
    if (beta > 0.0) {
        const double j0 = cost(phi, u).mechanism;
        if (!(j0 > 0.0)) throw DegenerateCostError("J0 vanishes: the mechanism cost is not differentiable");
        const int dim = mesh_->dim();
        const int last = num_phases() - 1;
        for (int n = 0; n < mesh_->num_nodes(); ++n) {
            const double s = beta / j0 * ops_.lumped[n] * (1.0 - phi(n, last)) * loads_.weight[n];
            for (int k = 0; k < dim; ++k) rhs[n * dim + k] += s * (u[n * dim + k] - loads_.target[n * dim + k]);
        }
    }
    factorize(phi);
    const Eigen::VectorXd r = assembler_.dofs().restrict(rhs);
    if (r.norm() == 0.0) return Eigen::VectorXd::Zero(rhs.size());
    return assembler_.dofs().extend(solver_.solve(r));
}

CostParts ReducedCost::cost(const PhaseField& phi, const Eigen::VectorXd& u) const {
    CostParts parts;
    parts.compliance = load_vector(phi).dot(u);
    const int dim = mesh_->dim();
    const int last = num_phases() - 1;
    double j0sq = 0.0;
    for (int n = 0; n < mesh_->num_nodes(); ++n) {
        if (loads_.weight[n] == 0.0) continue;
        double d2 = 0.0;
        for (int k = 0; k < dim; ++k) {
            const double d = u[n * dim + k] - loads_.target[n * dim + k];
            d2 += d * d;
        }
        j0sq += ops_.lumped[n] * (1.0 - phi(n, last)) * loads_.weight[n] * d2;
    }
    parts.mechanism = std::sqrt(std::max(0.0, j0sq));
    parts.perimeter = ginzburg_landau(phi, ops_, params_.eps, params_.potential);
    parts.total = params_.alpha * parts.compliance + params_.beta * parts.mechanism +
                  params_.gamma * parts.perimeter;
    return parts;
}

CostParts ReducedCost::evaluate(const PhaseField& phi) { return cost(phi, solve_state(phi)); }

namespace {

// Per-cell contribution of -<E(p), E(u)>_{C'(phi) e_{a,i}}, written as
// local[a * N + i].
void cell_sensitivity(const Mesh& mesh, const MaterialSet& ms, const PhaseField& phi,
                      const VoigtVector& eu, const VoigtVector& ep, int c, std::vector<double>& scratch,
                      double* local) {
    const auto& quad = SimplexQuadrature::for_dim(mesh.dim());
    const int nv = mesh.nodes_per_cell();
    const int np = ms.num_phases();
    double* e = scratch.data();
    double* phq = e + np;
    double* jac = phq + np;
    for (int k = 0; k < np; ++k) e[k] = ep.dot(ms.phase(k).voigt * eu);
    std::fill(local, local + nv * np, 0.0);
    const auto& cn = mesh.cell(c);
    for (std::size_t q = 0; q < quad.weights.size(); ++q) {
        for (int i = 0; i < np; ++i) {
            double s = 0.0;
            for (int a = 0; a < nv; ++a) s += quad.points[q][a] * phi(cn[a], i);
            phq[i] = s;
        }
        ms.coefficient_jacobian(std::span<const double>(phq, np), std::span<double>(jac, np * np));
        const double wq = quad.weights[q] * mesh.cell_volume(c);
        for (int i = 0; i < np; ++i) {
            double d = 0.0;
            for (int k = 0; k < np; ++k) d += jac[k * np + i] * e[k];
            for (int a = 0; a < nv; ++a) local[a * np + i] -= wq * quad.points[q][a] * d;
        }
    }
}

}  // namespace

Eigen::MatrixXd ReducedCost::elastic_sensitivity(const PhaseField& phi, const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& p, KernelMode mode) const {
    const auto& mesh = *mesh_;
    const int nv = mesh.nodes_per_cell();
    const int np = num_phases();
    const int nc = mesh.num_cells();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(mesh.num_nodes(), np);
    const std::size_t scratch_size = static_cast<std::size_t>(2 * np + np * np);

    if (mode == KernelMode::Serial) {
        std::vector<double> scratch(scratch_size);
        std::vector<double> local(static_cast<std::size_t>(nv) * np);
        for (int c = 0; c < nc; ++c) {
            const VoigtVector eu = cell_strain(mesh, c, u);
            const VoigtVector ep = cell_strain(mesh, c, p);
            cell_sensitivity(mesh, materials_, phi, eu, ep, c, scratch, local.data());
            const auto& cn = mesh.cell(c);
            for (int a = 0; a < nv; ++a) {
                for (int i = 0; i < np; ++i) g(cn[a], i) += local[a * np + i];
            }
        }
        return g;
    }

    std::vector<double> buffer(static_cast<std::size_t>(nc) * nv * np);
#pragma omp parallel
    {
        std::vector<double> scratch(scratch_size);
#pragma omp for schedule(static)
        for (int c = 0; c < nc; ++c) {
            const VoigtVector eu = cell_strain(mesh, c, u);
            const VoigtVector ep = cell_strain(mesh, c, p);
            cell_sensitivity(mesh, materials_, phi, eu, ep, c, scratch,
                             buffer.data() + static_cast<std::size_t>(c) * nv * np);
        }
    }
    const auto& ptr = mesh.node_cell_offsets();
    const auto& cells = mesh.node_cells();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        for (int k = ptr[n]; k < ptr[n + 1]; ++k) {
            const int c = cells[k];
            const auto& cn = mesh.cell(c);
            int a = 0;
            while (cn[a] != n) ++a;
            const double* local = buffer.data() + static_cast<std::size_t>(c) * nv * np;
            for (int i = 0; i < np; ++i) g(n, i) += local[a * np + i];
        }
    }
    return g;
}

Eigen::MatrixXd ReducedCost::gradient(const PhaseField& phi, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                                      KernelMode mode) const {
    Eigen::MatrixXd g = params_.gamma * ginzburg_landau_gradient(phi, ops_, params_.eps, params_.potential);
    g += elastic_sensitivity(phi, u, p, mode);

    const int dim = mesh_->dim();
    const int last = num_phases() - 1;
    const double alpha = params_.alpha;
    double j0 = 0.0;
    if (params_.beta > 0.0) {
        j0 = cost(phi, u).mechanism;
        if (!(j0 > 0.0)) throw DegenerateCostError("J0 vanishes: the mechanism cost is not differentiable");
    }
    for (int n = 0; n < mesh_->num_nodes(); ++n) {
        double fu = 0.0;
        double d2 = 0.0;
        for (int k = 0; k < dim; ++k) {
            const int dof = n * dim + k;
            fu += loads_.volume_force[dof] * (alpha * u[dof] + p[dof]);
            const double d = u[dof] - loads_.target[dof];
            d2 += d * d;
        }
        double s = -ops_.lumped[n] * fu;
        if (params_.beta > 0.0) s -= 0.5 * params_.beta / j0 * ops_.lumped[n] * loads_.weight[n] * d2;
        g(n, last) += s;
    }
    return g;
}

double ReducedCost::reduced_derivative(const PhaseField& phi, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                                       const PhaseField& eta) const {
    const double sum_dev = eta.values().rowwise().sum().cwiseAbs().maxCoeff();
    if (sum_dev > 1e-10) throw DomainError("direction is not tangent to the sum constraint");
    return gradient(phi, u, p).cwiseProduct(eta.values()).sum();
}

double ReducedCost::compliance_derivative(const PhaseField& phi, const Eigen::VectorXd& u,
                                          const PhaseField& eta) const {
    const auto& mesh = *mesh_;
    const double eps = params_.eps;
    const double gamma = params_.gamma;
    const auto& v = phi.values();
    const auto& e = eta.values();

    double value = 0.0;
    if (params_.potential.kind == Potential::Kind::Obstacle) {
        for (int i = 0; i < v.cols(); ++i) value += gamma * eps * e.col(i).dot(ops_.laplacian * v.col(i));
        for (int n = 0; n < mesh.num_nodes(); ++n) value -= gamma / eps * ops_.lumped[n] * v.row(n).dot(e.row(n));
    } else {
        const Eigen::VectorXd s = v.col(1) - v.col(0);
        const Eigen::VectorXd t = e.col(1) - e.col(0);
        value += gamma * eps * t.dot(ops_.laplacian * s);
        for (int n = 0; n < mesh.num_nodes(); ++n) value += gamma / eps * ops_.lumped[n] * double_well_dpsi(s[n]) * t[n];
    }

    const auto& quad = SimplexQuadrature::for_dim(mesh.dim());
    const int nv = mesh.nodes_per_cell();
    const int np = num_phases();
    std::vector<double> phq(np), hq(np), jac(static_cast<std::size_t>(np) * np), w(np);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& cn = mesh.cell(c);
        const VoigtVector eu = cell_strain(mesh, c, u);
        for (std::size_t q = 0; q < quad.weights.size(); ++q) {
            for (int i = 0; i < np; ++i) {
                double a = 0.0, b = 0.0;
                for (int k = 0; k < nv; ++k) {
                    a += quad.points[q][k] * v(cn[k], i);
                    b += quad.points[q][k] * e(cn[k], i);
                }
                phq[i] = a;
                hq[i] = b;
            }
            materials_.coefficient_jacobian(phq, jac);
            for (int k = 0; k < np; ++k) {
                double s = 0.0;
                for (int i = 0; i < np; ++i) s += jac[k * np + i] * hq[i];
                w[k] = s;
            }
            const VoigtMatrix dc = materials_.combine(w);
            value -= params_.alpha * quad.weights[q] * mesh.cell_volume(c) * eu.dot(dc * eu);
        }
    }
    return value;
}

}  // namespace phasetopo
