#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "phasetopo/random.hpp"
#include "phasetopo/verify.hpp"

namespace phasetopo::verify {

namespace {

// Depth-first walk over the inactive-phase pattern of each node. A partial
// pattern fixes the zeros of the decided nodes only; the minimum of that
// equality-constrained QP bounds every completion from below, so subtrees
// whose bound exceeds the incumbent are skipped without loss.
class PatternSearch {
public:
    explicit PatternSearch(const ProjectionProblem& pp)
        : pp_(pp), n_(pp.phi.num_nodes()), np_(pp.phi.num_phases()), q_(Eigen::MatrixXd(*pp.metric)),
          lin_(pp.lambda * pp.grad - q_ * pp.phi.values()), vol_(pp.lumped.sum()), masks_(n_), open_(n_, 0),
          chosen_(n_, 0) {
        const int full = (1 << np_) - 1;
        const int last_bit = 1 << (np_ - 1);
        for (int k = 0; k < n_; ++k) {
            const Pin p = pp.pins.empty() ? Pin::None : pp.pins[k];
            for (int m = 1; m <= full; ++m) {
                if (p == Pin::VoidOne && m != last_bit) continue;
                if (p == Pin::VoidZero && (m & last_bit)) continue;
                masks_[k].push_back(m);
                open_[k] |= m;
            }
        }
        best_.objective = std::numeric_limits<double>::infinity();
    }

    OracleResult run() {
        reference_signs();
        visit(0);
        return best_;
    }

private:
    // Approximate minimizer by ADMM splitting into the affine constraints
    // and the sign bounds. Only its sign pattern is used, to order the
    // search so that the optimal pattern tends to come first.
    void reference_signs() {
        const int nv = n_ * np_;
        const int nrow = n_ + np_ - 1;
        auto at = [&](int k, int i) { return i * n_ + k; };
        const double rho = std::max(q_.diagonal().cwiseAbs().mean(), 1e-12);
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + nrow, nv + nrow);
        for (int i = 0; i < np_; ++i) kkt.block(i * n_, i * n_, n_, n_) = q_;
        kkt.topLeftCorner(nv, nv).diagonal().array() += rho;
        Eigen::VectorXd e(nrow);
        for (int k = 0; k < n_; ++k) {
            for (int i = 0; i < np_; ++i) {
                kkt(nv + k, at(k, i)) = kkt(at(k, i), nv + k) = 1.0;
                if (i < np_ - 1) kkt(nv + n_ + i, at(k, i)) = kkt(at(k, i), nv + n_ + i) = pp_.lumped[k];
            }
            e[k] = 1.0;
        }
        for (int i = 0; i < np_ - 1; ++i) e[n_ + i] = pp_.masses[i] * vol_;
        const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> fac(kkt);
        const Eigen::VectorXd lin = Eigen::Map<const Eigen::VectorXd>(lin_.data(), nv);

        Eigen::VectorXd y = Eigen::VectorXd::Zero(nv), u = Eigen::VectorXd::Zero(nv), rhs(nv + nrow);
        for (int it = 0; it < 4000; ++it) {
            rhs.head(nv) = rho * (y - u) - lin;
            rhs.tail(nrow) = e;
            const Eigen::VectorXd x = fac.solve(rhs).head(nv);
            for (int k = 0; k < n_; ++k) {
                for (int i = 0; i < np_; ++i) {
                    const bool open = open_[k] & (1 << i);
                    y[at(k, i)] = open ? std::max(0.0, x[at(k, i)] + u[at(k, i)]) : 0.0;
                }
            }
            u += x - y;
        }
        sign_.assign(n_, 0);
        for (int k = 0; k < n_; ++k) {
            for (int i = 0; i < np_; ++i) {
                if (y[at(k, i)] > 1e-6) sign_[k] |= 1 << i;
            }
        }
    }

    enum class Relaxed { Solved, Unbounded, Infeasible };

    // Minimizer with the decided nodes fixed and the rest unconstrained in
    // sign. An inconsistent KKT system means either that the equality
    // constraints cannot hold (no completion is feasible) or that the
    // objective is unbounded along their null space (no usable bound).
    Relaxed relaxed(int depth, Eigen::MatrixXd& z, Eigen::VectorXd& sum_mult, Eigen::VectorXd& mass_mult) const {
        std::vector<int> fk, fi;
        for (int k = 0; k < n_; ++k) {
            const int m = k < depth ? chosen_[k] : open_[k];
            for (int i = 0; i < np_; ++i) {
                if (m & (1 << i)) {
                    fk.push_back(k);
                    fi.push_back(i);
                }
            }
        }
        const int nf = static_cast<int>(fk.size());
        const int nrow = n_ + np_ - 1;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + nrow, nf + nrow);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + nrow);
        for (int a = 0; a < nf; ++a) {
            for (int b = 0; b < nf; ++b) {
                if (fi[a] == fi[b]) kkt(a, b) = q_(fk[a], fk[b]);
            }
            rhs[a] = -lin_(fk[a], fi[a]);
            kkt(a, nf + fk[a]) = kkt(nf + fk[a], a) = 1.0;
            if (fi[a] < np_ - 1) kkt(a, nf + n_ + fi[a]) = kkt(nf + n_ + fi[a], a) = pp_.lumped[fk[a]];
        }
        for (int k = 0; k < n_; ++k) rhs[nf + k] = 1.0;
        for (int i = 0; i < np_ - 1; ++i) rhs[nf + n_ + i] = pp_.masses[i] * vol_;

        const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) {
            const Eigen::MatrixXd a = kkt.bottomLeftCorner(nrow, nf);
            const Eigen::VectorXd b = rhs.tail(nrow);
            const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
            return (a * x - b).norm() > 1e-9 * (1.0 + b.norm()) ? Relaxed::Infeasible : Relaxed::Unbounded;
        }
        z = Eigen::MatrixXd::Zero(n_, np_);
        for (int a = 0; a < nf; ++a) z(fk[a], fi[a]) = sol[a];
        sum_mult = sol.segment(nf, n_);
        mass_mult = Eigen::VectorXd::Zero(np_);
        mass_mult.head(np_ - 1) = sol.tail(np_ - 1);
        return Relaxed::Solved;
    }

    void visit(int depth) {
        if (done_) return;
        Eigen::MatrixXd z;
        Eigen::VectorXd sum_mult, mass_mult;
        const Relaxed rel = relaxed(depth, z, sum_mult, mass_mult);
        if (rel == Relaxed::Infeasible) return;
        const bool ok = rel == Relaxed::Solved;
        const double obj = ok ? projection_objective(pp_, z) : -std::numeric_limits<double>::infinity();
        // Patterns tying with the incumbent differ only in entries that sit
        // at zero and give the same point, so they are skipped as well.
        if (obj >= best_.objective - 1e-13 * (1.0 + std::abs(best_.objective))) return;

        if (depth == n_) {
            ++best_.candidates;
            if (!ok || z.minCoeff() < -1e-11) return;
            ++best_.feasible;
            if (obj < best_.objective) {
                best_.objective = obj;
                best_.zeta = z;
            }
            // Nonnegative bound multipliers complete the optimality system,
            // which suffices for this convex problem: the search ends here.
            const Eigen::MatrixXd grad = q_ * z + lin_;
            bool dual = true;
            for (int k = 0; dual && k < n_; ++k) {
                const double scale = 1e-9 * (1.0 + grad.row(k).cwiseAbs().maxCoeff());
                for (int i = 0; i < np_; ++i) {
                    if ((chosen_[k] & (1 << i)) || !(open_[k] & (1 << i))) continue;
                    if (grad(k, i) + sum_mult[k] + mass_mult[i] * pp_.lumped[k] < -scale) dual = false;
                }
            }
            if (dual) {
                best_.objective = obj;
                best_.zeta = z;
                done_ = true;
            }
            return;
        }
        // Patterns close to the reference signs first.
        std::vector<int> order = masks_[depth];
        const int sign = sign_[depth];
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return __builtin_popcount(a ^ sign) < __builtin_popcount(b ^ sign);
        });
        for (int m : order) {
            chosen_[depth] = m;
            visit(depth + 1);
        }
    }

    const ProjectionProblem& pp_;
    int n_, np_;
    Eigen::MatrixXd q_, lin_;
    double vol_;
    std::vector<std::vector<int>> masks_;
    std::vector<int> open_, chosen_, sign_;
    OracleResult best_;
    bool done_ = false;
};

}  // namespace

OracleResult enumerate_projection(const ProjectionProblem& pp) { return PatternSearch(pp).run(); }

ProjectionProblem random_projection(const Mesh& mesh, const SparseMatrix& metric, int num_phases,
                                    std::uint64_t seed, const std::vector<Pin>& pins) {
    std::mt19937_64 rng(seed);
    const int n = mesh.num_nodes();
    ProjectionProblem pp;
    pp.phi = PhaseField(n, num_phases);
    for (int k = 0; k < n; ++k) {
        const Pin p = pins.empty() ? Pin::None : pins[k];
        if (p == Pin::VoidOne) {
            pp.phi(k, num_phases - 1) = 1.0;
            continue;
        }
        const int np = p == Pin::VoidZero ? num_phases - 1 : num_phases;
        double s = 0.0;
        for (int i = 0; i < np; ++i) {
            // About one entry in four is exactly zero.
            const double v = unit_double(rng) < 0.25 ? 0.0 : unit_double(rng);
            pp.phi(k, i) = v;
            s += v;
        }
        if (s == 0.0) {
            pp.phi(k, static_cast<int>(rng() % np)) = 1.0;
        } else {
            for (int i = 0; i < np; ++i) pp.phi(k, i) /= s;
        }
    }
    pp.lumped = mesh.lumped_mass();
    pp.masses = pp.phi.values().transpose() * pp.lumped / pp.lumped.sum();
    pp.metric = &metric;
    pp.pins = pins;
    pp.lambda = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
    pp.grad.resize(n, num_phases);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < num_phases; ++i) pp.grad(k, i) = uniform(rng, -1.0, 1.0) * pp.lumped[k] * 10.0;
    }
    return pp;
}

}  // namespace phasetopo::verify
