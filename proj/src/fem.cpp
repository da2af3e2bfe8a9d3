#include "phasetopo/fem.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace phasetopo {

StrainOperator strain_operator(const Mesh& mesh, int cell) {
    const int dim = mesh.dim();
    const int nv = dim + 1;
    StrainOperator b = StrainOperator::Zero(voigt_size(dim), dim * nv);
    for (int a = 0; a < nv; ++a) {
        const auto& g = mesh.grad_lambda(cell, a);
        const int c = a * dim;
        if (dim == 2) {
            b(0, c) = g[0];
            b(1, c + 1) = g[1];
            b(2, c) = g[1];
            b(2, c + 1) = g[0];
        } else {
            b(0, c) = g[0];
            b(1, c + 1) = g[1];
            b(2, c + 2) = g[2];
            b(3, c + 1) = g[2];
            b(3, c + 2) = g[1];
            b(4, c) = g[2];
            b(4, c + 2) = g[0];
            b(5, c) = g[1];
            b(5, c + 1) = g[0];
        }
    }
    return b;
}

VoigtVector cell_strain(const Mesh& mesh, int cell, const Eigen::VectorXd& u) {
    const int dim = mesh.dim();
    const int nv = dim + 1;
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 12, 1> ue(dim * nv);
    const auto& nodes = mesh.cell(cell);
    for (int a = 0; a < nv; ++a) {
        for (int k = 0; k < dim; ++k) ue[a * dim + k] = u[nodes[a] * dim + k];
    }
    return strain_operator(mesh, cell) * ue;
}

const SimplexQuadrature& SimplexQuadrature::for_dim(int dim) {
    static const SimplexQuadrature tri = [] {
        SimplexQuadrature q;
        q.dim = 2;
        q.points = {{0.5, 0.5, 0.0, 0.0}, {0.0, 0.5, 0.5, 0.0}, {0.5, 0.0, 0.5, 0.0}};
        q.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        return q;
    }();
    static const SimplexQuadrature tet = [] {
        SimplexQuadrature q;
        q.dim = 3;
        const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
        const double b = (5.0 - std::sqrt(5.0)) / 20.0;
        q.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
        q.weights = {0.25, 0.25, 0.25, 0.25};
        return q;
    }();
    return dim == 2 ? tri : tet;
}

DofMap::DofMap(const Mesh& mesh, bool eliminate_dirichlet) {
    const int dim = mesh.dim();
    const int n = mesh.num_nodes() * dim;
    free_.assign(n, -1);
    constrained_.assign(n, 0);
    const auto& dn = mesh.dirichlet_nodes();
    for (int node = 0; node < mesh.num_nodes(); ++node) {
        for (int k = 0; k < dim; ++k) {
            const int dof = node * dim + k;
            if (eliminate_dirichlet && dn[node]) {
                constrained_[dof] = 1;
            } else {
                free_[dof] = num_free_++;
            }
        }
    }
}

Eigen::VectorXd DofMap::restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r(num_free_);
    for (int d = 0; d < num_dofs(); ++d) {
        if (free_[d] >= 0) r[free_[d]] = full[d];
    }
    return r;
}

Eigen::VectorXd DofMap::extend(const Eigen::VectorXd& reduced) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(num_dofs());
    for (int d = 0; d < num_dofs(); ++d) {
        if (free_[d] >= 0) f[d] = reduced[free_[d]];
    }
    return f;
}

ElasticityAssembler::ElasticityAssembler(const Mesh& mesh, bool eliminate_dirichlet)
    : mesh_(&mesh), dofs_(mesh, eliminate_dirichlet) {
    const int dim = mesh.dim();
    const int nv = dim + 1;
    local_size_ = dim * nv;
    const int nc = mesh.num_cells();

    strain_ops_.reserve(nc);
    for (int c = 0; c < nc; ++c) strain_ops_.push_back(strain_operator(mesh, c));

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(nc) * local_size_ * local_size_);
    auto gdof = [&](int c, int l) { return dofs_.free_index(mesh.cell(c)[l / dim] * dim + l % dim); };
    for (int c = 0; c < nc; ++c) {
        for (int j = 0; j < local_size_; ++j) {
            const int cj = gdof(c, j);
            if (cj < 0) continue;
            for (int i = 0; i < local_size_; ++i) {
                const int ri = gdof(c, i);
                if (ri >= 0) trip.emplace_back(ri, cj, 0.0);
            }
        }
    }
    pattern_.resize(dofs_.num_free(), dofs_.num_free());
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slots_.assign(static_cast<std::size_t>(nc) * local_size_ * local_size_, -1);
    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    for (int c = 0; c < nc; ++c) {
        for (int j = 0; j < local_size_; ++j) {
            const int cj = gdof(c, j);
            if (cj < 0) continue;
            for (int i = 0; i < local_size_; ++i) {
                const int ri = gdof(c, i);
                if (ri < 0) continue;
                const int* lo = inner + outer[cj];
                const int* hi = inner + outer[cj + 1];
                const int* it = std::lower_bound(lo, hi, ri);
                slots_[(static_cast<std::size_t>(c) * local_size_ + j) * local_size_ + i] =
                    static_cast<int>(it - inner);
            }
        }
    }
}

ElementMatrix ElasticityAssembler::element_matrix(int cell, const VoigtMatrix& integrated) const {
    const auto& b = strain_ops_[cell];
    return b.transpose() * integrated * b;
}

SparseMatrix ElasticityAssembler::assemble(std::span<const VoigtMatrix> integrated,
                                           KernelMode mode) const {
    SparseMatrix out = pattern_;
    if (mode == KernelMode::Serial) {
        assemble_serial(integrated, out);
    } else {
        assemble_parallel(integrated, out);
    }
    return out;
}

void ElasticityAssembler::assemble_serial(std::span<const VoigtMatrix> integrated,
                                          SparseMatrix& out) const {
    if (out.rows() != pattern_.rows() || out.nonZeros() != pattern_.nonZeros()) out = pattern_;
    double* values = out.valuePtr();
    std::fill(values, values + out.nonZeros(), 0.0);
    const int nc = mesh_->num_cells();
    const int ls = local_size_;
    for (int c = 0; c < nc; ++c) {
        const ElementMatrix ke = element_matrix(c, integrated[c]);
        const int* slot = slots_.data() + static_cast<std::size_t>(c) * ls * ls;
        for (int j = 0; j < ls; ++j) {
            for (int i = 0; i < ls; ++i) {
                const int s = slot[j * ls + i];
                if (s >= 0) values[s] += ke(i, j);
            }
        }
    }
}

void ElasticityAssembler::assemble_parallel(std::span<const VoigtMatrix> integrated,
                                            SparseMatrix& out) const {
    if (out.rows() != pattern_.rows() || out.nonZeros() != pattern_.nonZeros()) out = pattern_;
    const int nc = mesh_->num_cells();
    const int ls = local_size_;
    const int dim = mesh_->dim();
    std::vector<double> buffer(static_cast<std::size_t>(nc) * ls * ls);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < nc; ++c) {
        const ElementMatrix ke = element_matrix(c, integrated[c]);
        std::copy(ke.data(), ke.data() + ls * ls, buffer.data() + static_cast<std::size_t>(c) * ls * ls);
    }

    double* values = out.valuePtr();
    std::fill(values, values + out.nonZeros(), 0.0);
    const auto& ptr = mesh_->node_cell_offsets();
    const auto& cells = mesh_->node_cells();
    const int nn = mesh_->num_nodes();

    // Node a owns the matrix columns of its dofs, so threads never share a slot.
#pragma omp parallel for schedule(static)
    for (int a = 0; a < nn; ++a) {
        for (int k = ptr[a]; k < ptr[a + 1]; ++k) {
            const int c = cells[k];
            const auto& cn = mesh_->cell(c);
            int la = 0;
            while (cn[la] != a) ++la;
            const int* slot = slots_.data() + static_cast<std::size_t>(c) * ls * ls;
            const double* ke = buffer.data() + static_cast<std::size_t>(c) * ls * ls;
            for (int comp = 0; comp < dim; ++comp) {
                const int j = la * dim + comp;
                for (int i = 0; i < ls; ++i) {
                    const int s = slot[j * ls + i];
                    if (s >= 0) values[s] += ke[j * ls + i];
                }
            }
        }
    }
}

namespace {

bool positive_definite(const VoigtMatrix& d) {
    Eigen::LLT<VoigtMatrix> llt(d);
    return llt.info() == Eigen::Success;
}

}  // namespace

SparseSystem assemble_bilinear(const Mesh& mesh, const std::vector<std::vector<VoigtMatrix>>& coeff) {
    const auto& quad = SimplexQuadrature::for_dim(mesh.dim());
    std::vector<VoigtMatrix> integrated(mesh.num_cells());
    SparseSystem sys;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& cq = coeff.at(c);
        if (cq.size() != quad.weights.size()) throw std::invalid_argument("coefficient per quadrature point expected");
        VoigtMatrix d = VoigtMatrix::Zero(cq[0].rows(), cq[0].cols());
        for (std::size_t q = 0; q < cq.size(); ++q) {
            if (!positive_definite(cq[q])) {
                sys.warnings.push_back("coefficient not positive definite on cell " + std::to_string(c));
            }
            d += quad.weights[q] * mesh.cell_volume(c) * cq[q];
        }
        integrated[c] = d;
    }
    ElasticityAssembler assembler(mesh, false);
    sys.matrix = assembler.assemble(integrated);
    sys.rhs = Eigen::VectorXd::Zero(sys.matrix.rows());
    sys.constrained.assign(sys.matrix.rows(), 0);
    const auto& dn = mesh.dirichlet_nodes();
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        for (int k = 0; k < mesh.dim(); ++k) sys.constrained[n * mesh.dim() + k] = dn[n];
    }
    return sys;
}

namespace {

template <class CellMatrix>
SparseMatrix assemble_scalar(const Mesh& mesh, CellMatrix&& cell_matrix) {
    const int nv = mesh.nodes_per_cell();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_cells()) * nv * nv);
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& cn = mesh.cell(c);
        for (int a = 0; a < nv; ++a) {
            for (int b = 0; b < nv; ++b) trip.emplace_back(cn[a], cn[b], cell_matrix(c, a, b));
        }
    }
    SparseMatrix m(mesh.num_nodes(), mesh.num_nodes());
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

}  // namespace

SparseMatrix assemble_laplacian(const Mesh& mesh) {
    const int dim = mesh.dim();
    return assemble_scalar(mesh, [&](int c, int a, int b) {
        const auto& ga = mesh.grad_lambda(c, a);
        const auto& gb = mesh.grad_lambda(c, b);
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += ga[k] * gb[k];
        return s * mesh.cell_volume(c);
    });
}

SparseMatrix assemble_mass(const Mesh& mesh) {
    const double denom = mesh.dim() == 2 ? 12.0 : 20.0;
    return assemble_scalar(mesh, [&](int c, int a, int b) {
        return mesh.cell_volume(c) * (a == b ? 2.0 : 1.0) / denom;
    });
}

Eigen::VectorXd traction_load(const Mesh& mesh) {
    const int dim = mesh.dim();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_nodes() * dim);
    for (const auto& facet : mesh.boundary_facets()) {
        if (facet.tag != BoundaryTag::NeumannG) continue;
        const auto& g = mesh.patches()[facet.patch].traction;
        const double share = facet.measure / dim;
        for (int a = 0; a < dim; ++a) {
            for (int k = 0; k < dim; ++k) f[facet.nodes[a] * dim + k] += share * g[k];
        }
    }
    return f;
}

Eigen::VectorXd pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol,
                          int max_iter, SolveStats* stats) {
    const int n = static_cast<int>(b.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const double bnorm = b.norm();
    if (stats) *stats = SolveStats{};
    if (bnorm == 0.0) return x;

    const Eigen::VectorXd inv_diag = a.diagonal().cwiseInverse();
    // The matrix is symmetric: y = A^T x is computed column by column.
    auto apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& y) {
        const int* outer = a.outerIndexPtr();
        const int* inner = a.innerIndexPtr();
        const double* val = a.valuePtr();
#pragma omp parallel for schedule(static)
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int k = outer[c]; k < outer[c + 1]; ++k) s += val[k] * v[inner[k]];
            y[c] = s;
        }
    };

    Eigen::VectorXd r = b;
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    Eigen::VectorXd q(n);
    double rz = r.dot(z);
    double rel = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        apply(p, q);
        const double pq = p.dot(q);
        if (!(pq > 0.0)) throw SolverError("conjugate gradients broke down", rel);
        const double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        rel = r.norm() / bnorm;
        if (rel <= rel_tol) {
            ++it;
            break;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (stats) *stats = SolveStats{it, rel};
    if (rel > rel_tol) {
        throw SolverError("conjugate gradients did not converge in " + std::to_string(max_iter) +
                              " iterations",
                          rel);
    }
    return x;
}

struct SpdSolver::Impl {
    Eigen::SimplicialLLT<SparseMatrix> llt;
    Eigen::LLT<Eigen::MatrixXd> dense;
    SparseMatrix matrix;
    std::vector<int> outer, inner;
    bool analyzed = false;
};

SpdSolver::SpdSolver(SolverKind kind, double rel_tol)
    : kind_(kind), rel_tol_(rel_tol), impl_(std::make_unique<Impl>()) {}
SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

void SpdSolver::factorize(const SparseMatrix& a) {
    auto& im = *impl_;
    im.matrix = a;
    switch (kind_) {
        case SolverKind::Cholesky: {
            const bool same = im.analyzed &&
                              std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1,
                                         im.outer.begin(), im.outer.end()) &&
                              std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(),
                                         im.inner.begin(), im.inner.end());
            if (!same) {
                im.llt.analyzePattern(a);
                im.outer.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
                im.inner.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
                im.analyzed = true;
            }
            im.llt.factorize(a);
            if (im.llt.info() != Eigen::Success) {
                throw SolverError("sparse Cholesky failed: matrix not positive definite", 1.0);
            }
            break;
        }
        case SolverKind::Dense: {
            im.dense.compute(Eigen::MatrixXd(a));
            if (im.dense.info() != Eigen::Success) {
                throw SolverError("dense Cholesky failed: matrix not positive definite", 1.0);
            }
            break;
        }
        case SolverKind::Pcg:
            break;
    }
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
    const auto& im = *impl_;
    Eigen::VectorXd x;
    switch (kind_) {
        case SolverKind::Cholesky:
            x = im.llt.solve(b);
            break;
        case SolverKind::Dense:
            x = im.dense.solve(b);
            break;
        case SolverKind::Pcg: {
            const int cap = std::max(100, static_cast<int>(50.0 * std::sqrt(static_cast<double>(b.size()))));
            return pcg_solve(im.matrix, b, rel_tol_, cap, &stats_);
        }
    }
    const double bn = b.norm();
    stats_.iterations = 1;
    const double rn = (im.matrix * x - b).norm();
    stats_.relative_residual = bn > 0.0 ? rn / bn : 0.0;
    // A stable factorization has a tiny normwise backward error even when
    // the system is badly conditioned, so test that rather than |r|/|b|.
    const double backward = rn / (im.matrix.norm() * x.norm() + bn + 1e-300);
    if (!(backward <= 1e-10) || !std::isfinite(stats_.relative_residual)) {
        throw SolverError("direct solve failed", stats_.relative_residual);
    }
    return x;
}

Eigen::VectorXd solve_spd(const SparseSystem& system, double rel_tol) {
    const auto nfree = std::count(system.constrained.begin(), system.constrained.end(), 0);
    return solve_spd(system, rel_tol, nfree < 2000 ? SolverKind::Dense : SolverKind::Cholesky);
}

Eigen::VectorXd solve_spd(const SparseSystem& system, double rel_tol, SolverKind kind) {
    const int n = static_cast<int>(system.rhs.size());
    std::vector<int> map(n, -1);
    int nfree = 0;
    for (int i = 0; i < n; ++i) {
        if (!system.constrained[i]) map[i] = nfree++;
    }
    // Homogeneous constraints: eliminating rows and columns needs no rhs correction.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(system.matrix.nonZeros());
    for (int c = 0; c < system.matrix.outerSize(); ++c) {
        if (map[c] < 0) continue;
        for (SparseMatrix::InnerIterator it(system.matrix, c); it; ++it) {
            if (map[it.row()] >= 0) trip.emplace_back(map[it.row()], map[c], it.value());
        }
    }
    SparseMatrix a(nfree, nfree);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::VectorXd b(nfree);
    for (int i = 0; i < n; ++i) {
        if (map[i] >= 0) b[map[i]] = system.rhs[i];
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(nfree);
    if (b.norm() > 0.0) {
        SpdSolver solver(kind, rel_tol);
        solver.factorize(a);
        x = solver.solve(b);
    }
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (map[i] >= 0) full[i] = x[map[i]];
    }
    return full;
}

}  // namespace phasetopo
