#pragma once

#include <cstdio>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "phasetopo/mesh.hpp"

namespace phasetopo {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Symmetric strain in Voigt order with engineering shear:
/// 2D (exx, eyy, 2exy), 3D (exx, eyy, ezz, 2eyz, 2exz, 2exy).
using VoigtMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
using VoigtVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;
/// Element matrix of a P1 vector field (at most 12 x 12).
using ElementMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 12, 12>;
using StrainOperator = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 12>;

constexpr int voigt_size(int dim) { return dim == 2 ? 3 : 6; }

/// B such that B * (u_a)_a gives the Voigt strain on cell c; local dof
/// ordering is vertex-major (a * dim + component).
StrainOperator strain_operator(const Mesh& mesh, int cell);

/// Voigt strain of a nodal displacement field (size dim * nodes) on cell c.
VoigtVector cell_strain(const Mesh& mesh, int cell, const Eigen::VectorXd& u);

/// Quadrature that integrates quadratics exactly on a simplex: the three
/// edge midpoints on triangles and the 4-point symmetric rule on tets.
/// Points are barycentric coordinates; weights sum to one (scale by volume).
struct SimplexQuadrature {
    int dim = 2;
    std::vector<std::array<double, 4>> points;
    std::vector<double> weights;

    static const SimplexQuadrature& for_dim(int dim);
};

enum class KernelMode { Serial, Parallel };

/// Maps vector dofs (node * dim + component) to free dofs after removing
/// Dirichlet nodes; constrained entries map to -1.
class DofMap {
public:
    DofMap() = default;
    DofMap(const Mesh& mesh, bool eliminate_dirichlet);

    [[nodiscard]] int num_dofs() const { return static_cast<int>(free_.size()); }
    [[nodiscard]] int num_free() const { return num_free_; }
    [[nodiscard]] int free_index(int dof) const { return free_[dof]; }
    [[nodiscard]] const std::vector<char>& constrained() const { return constrained_; }

    [[nodiscard]] Eigen::VectorXd restrict(const Eigen::VectorXd& full) const;
    [[nodiscard]] Eigen::VectorXd extend(const Eigen::VectorXd& reduced) const;

private:
    std::vector<int> free_;
    std::vector<char> constrained_;
    int num_free_ = 0;
};

/// Assembles sum_T B^T D_T B over P1 vector fields, where D_T is the
/// already-integrated (volume-weighted) Voigt tensor of cell T. The sparsity
/// pattern and the cell-to-slot map are built once.
///
/// Both kernels accumulate every matrix entry in ascending cell order, so
/// their results are bitwise identical for any thread count.
class ElasticityAssembler {
public:
    ElasticityAssembler(const Mesh& mesh, bool eliminate_dirichlet);

    [[nodiscard]] const DofMap& dofs() const { return dofs_; }
    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }

    /// Element matrix B^T D B for one cell.
    [[nodiscard]] ElementMatrix element_matrix(int cell, const VoigtMatrix& integrated) const;

    [[nodiscard]] SparseMatrix assemble(std::span<const VoigtMatrix> integrated,
                                        KernelMode mode = KernelMode::Parallel) const;
    void assemble_serial(std::span<const VoigtMatrix> integrated, SparseMatrix& out) const;
    void assemble_parallel(std::span<const VoigtMatrix> integrated, SparseMatrix& out) const;

private:
    const Mesh* mesh_;
    DofMap dofs_;
    SparseMatrix pattern_;
    std::vector<StrainOperator> strain_ops_;
    std::vector<int> slots_;  // per cell, (dim*nv)^2 entries, col-major local
    int local_size_ = 0;
};

/// Linear system over all vector dofs with a constrained-dof mask.
struct SparseSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    std::vector<char> constrained;
    std::vector<std::string> warnings;
};

/// Assembles the elasticity bilinear form for a per-cell, per-quadrature
/// point tensor field: coeff[cell][q] is the pointwise tensor at the q-th
/// point of SimplexQuadrature::for_dim. A tensor that is not positive
/// definite records a warning instead of failing.
SparseSystem assemble_bilinear(const Mesh& mesh, const std::vector<std::vector<VoigtMatrix>>& coeff);

/// Scalar P1 stiffness (grad, grad) over all nodes.
SparseMatrix assemble_laplacian(const Mesh& mesh);
/// Scalar P1 consistent mass matrix over all nodes.
SparseMatrix assemble_mass(const Mesh& mesh);

/// Nodal load of the tractions of all NeumannG patches (size dim * nodes).
Eigen::VectorXd traction_load(const Mesh& mesh);

class SolverError : public std::runtime_error {
    static std::string format_residual(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r);
        return buf;
    }

public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what + " (relative residual " + format_residual(residual) + ")"),
          residual_(residual) {}
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

enum class SolverKind { Cholesky, Pcg, Dense };

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients on a symmetric matrix.
Eigen::VectorXd pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol,
                          int max_iter, SolveStats* stats = nullptr);

/// Reusable SPD solver. For Cholesky the symbolic analysis is kept while the
/// sparsity pattern does not change.
class SpdSolver {
public:
    explicit SpdSolver(SolverKind kind = SolverKind::Cholesky, double rel_tol = 1e-10);
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    void factorize(const SparseMatrix& a);
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    [[nodiscard]] SolverKind kind() const { return kind_; }
    [[nodiscard]] const SolveStats& last_stats() const { return stats_; }

private:
    struct Impl;
    SolverKind kind_;
    double rel_tol_;
    std::unique_ptr<Impl> impl_;
    mutable SolveStats stats_;
};

/// Solves a SparseSystem on its free dofs (constrained dofs fixed at zero,
/// eliminated symmetrically) and returns the full solution vector. Dense is
/// used below 2000 free dofs unless a kind is given.
Eigen::VectorXd solve_spd(const SparseSystem& system, double rel_tol);
Eigen::VectorXd solve_spd(const SparseSystem& system, double rel_tol, SolverKind kind);

}  // namespace phasetopo
