#include "phasetopo/projection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace phasetopo {

namespace {

enum class Slot : char { Fixed, Dependent, Free };

Pin pin_of(const ProjectionProblem& pp, int n) {
    return pp.pins.empty() ? Pin::None : pp.pins[n];
}

// Entry may take part in the active set prediction.
bool movable(const ProjectionProblem& pp, int n, int i, int np) {
    const Pin p = pin_of(pp, n);
    if (p == Pin::VoidOne) return false;
    if (p == Pin::VoidZero && i == np - 1) return false;
    return pp.bounds;
}

void check_problem(const ProjectionProblem& pp) {
    const int n = pp.phi.num_nodes();
    const int np = pp.phi.num_phases();
    if (!pp.metric || pp.metric->rows() != n || pp.metric->cols() != n) {
        throw ProjectionError("projection: metric does not match the field");
    }
    if (pp.grad.rows() != n || pp.grad.cols() != np) throw ProjectionError("projection: gradient has wrong shape");
    if (pp.lumped.size() != n) throw ProjectionError("projection: mass weights have wrong size");
    if (pp.masses.size() != np) throw ProjectionError("projection: masses have wrong size");
    if (!pp.pins.empty() && static_cast<int>(pp.pins.size()) != n) throw ProjectionError("projection: pins have wrong size");
    if (!(pp.lambda >= 0.0)) throw ProjectionError("projection: lambda must be >= 0");
    if (!(pp.c_pdas > 0.0)) throw ProjectionError("projection: c_pdas must be > 0");

    // Reachable range of each mass given the pins.
    const double vol = pp.lumped.sum();
    double w_s0 = 0.0, w_s1 = 0.0;
    for (int k = 0; k < n; ++k) {
        const Pin p = pin_of(pp, k);
        if (p == Pin::VoidZero) w_s0 += pp.lumped[k];
        if (p == Pin::VoidOne) w_s1 += pp.lumped[k];
    }
    const double slack = 1e-12 * vol;
    for (int i = 0; i < np; ++i) {
        const double target = pp.masses[i] * vol;
        double lo = 0.0, hi = vol;
        if (i == np - 1) {
            lo = w_s1;
            hi = pp.bounds ? vol - w_s0 : hi;
        } else {
            hi = pp.bounds ? vol - w_s1 : hi;
        }
        if (pp.bounds && (target < lo - slack || target > hi + slack)) {
            std::ostringstream os;
            os << "projection: mass of phase " << i + 1 << " (" << pp.masses[i]
               << ") is not reachable with the pinned nodes; range [" << lo / vol << ", " << hi / vol << "]";
            throw InfeasibleMassError(os.str());
        }
    }
}

double metric_diag_max(const SparseMatrix& q) { return q.diagonal().cwiseAbs().maxCoeff(); }

// Preconditioned CG on A = H + rho C^T C with the Cholesky factor of P.
template <class Factor>
Eigen::VectorXd augmented_solve(const SparseMatrix& h, const Eigen::MatrixXd& c, double rho, const Factor& pre,
                                const Eigen::VectorXd& rhs) {
    const double bn = rhs.norm();
    Eigen::VectorXd x = pre.solve(rhs);
    if (bn == 0.0) return Eigen::VectorXd::Zero(rhs.size());
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd out = h * v;
        if (c.rows() > 0) out.noalias() += rho * (c.transpose() * (c * v));
        return out;
    };
    Eigen::VectorXd r = rhs - apply(x);
    Eigen::VectorXd z = pre.solve(r);
    Eigen::VectorXd d = z;
    double rz = r.dot(z);
    const int cap = 500;
    for (int it = 0; it < cap && r.norm() > 1e-14 * bn; ++it) {
        const Eigen::VectorXd ad = apply(d);
        const double dad = d.dot(ad);
        if (!(dad > 0.0)) break;
        const double a = rz / dad;
        x += a * d;
        r -= a * ad;
        z = pre.solve(r);
        const double rz_new = r.dot(z);
        d = z + (rz_new / rz) * d;
        rz = rz_new;
    }
    if (!(r.norm() <= 1e-9 * bn)) {
        throw ProjectionError("projection: reduced system solve did not converge (relative residual " +
                              std::to_string(r.norm() / bn) + ")");
    }
    return x;
}

}  // namespace

PdasState pdas_start(const ProjectionProblem& pp) {
    check_problem(pp);
    const int n = pp.phi.num_nodes();
    const int np = pp.phi.num_phases();
    PdasState st;
    st.active.assign(static_cast<std::size_t>(n) * np, 0);
    if (pp.bounds) {
        for (int k = 0; k < n; ++k) {
            int inactive = 0;
            for (int i = 0; i < np; ++i) {
                if (movable(pp, k, i, np) && pp.phi(k, i) <= 0.0) st.active[k * np + i] = 1;
                if (!st.active[k * np + i]) ++inactive;
            }
            if (inactive == 0) {
                int best = 0;
                for (int i = 1; i < np; ++i) {
                    if (pp.phi(k, i) > pp.phi(k, best)) best = i;
                }
                st.active[k * np + best] = 0;
            }
        }
    }
    st.result.zeta = pp.phi;
    return st;
}

void pdas_iterate(const ProjectionProblem& pp, PdasState& st) {
    const SparseMatrix& q = *pp.metric;
    const int n = pp.phi.num_nodes();
    const int np = pp.phi.num_phases();
    const Eigen::MatrixXd& prev = st.result.zeta.values();

    // Entry roles: fixed at zero, dependent (closes the sum), free.
    std::vector<Slot> slot(static_cast<std::size_t>(n) * np, Slot::Free);
    std::vector<int> dep(n, -1);
    std::vector<int> index(static_cast<std::size_t>(n) * np, -1);
    int ny = 0;
    for (int k = 0; k < n; ++k) {
        const Pin p = pin_of(pp, k);
        for (int i = 0; i < np; ++i) {
            bool fixed = st.active[k * np + i] != 0;
            if (p == Pin::VoidOne) fixed = i != np - 1;
            if (p == Pin::VoidZero && i == np - 1) fixed = true;
            slot[k * np + i] = fixed ? Slot::Fixed : Slot::Free;
        }
        int r = -1;
        for (int i = 0; i < np; ++i) {
            if (slot[k * np + i] == Slot::Fixed) continue;
            if (r < 0 || prev(k, i) > prev(k, r)) r = i;
        }
        if (r < 0) throw ProjectionError("projection: node " + std::to_string(k) + " has no inactive phase");
        dep[k] = r;
        slot[k * np + r] = Slot::Dependent;
        for (int i = 0; i < np; ++i) {
            if (slot[k * np + i] == Slot::Free) index[k * np + i] = ny++;
        }
    }

    // z0: y = 0, i.e. each node sits at its dependent vertex.
    Eigen::MatrixXd z0 = Eigen::MatrixXd::Zero(n, np);
    for (int k = 0; k < n; ++k) z0(k, dep[k]) = 1.0;
    const Eigen::MatrixXd x0 = q * (z0 - pp.phi.values()) + pp.lambda * pp.grad;

    Eigen::VectorXd b(ny);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < np; ++i) {
            const int a = index[k * np + i];
            if (a >= 0) b[a] = -(x0(k, i) - x0(k, dep[k]));
        }
    }

    // Mass rows for phases 0..N-2; the last follows from the sum.
    const int nc = np - 1;
    const double vol = pp.lumped.sum();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(nc, ny);
    Eigen::VectorXd rmass(nc);
    for (int j = 0; j < nc; ++j) rmass[j] = pp.masses[j] * vol - pp.lumped.dot(z0.col(j));
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < np; ++i) {
            const int a = index[k * np + i];
            if (a < 0) continue;
            if (i < nc) c(i, a) += pp.lumped[k];
            if (dep[k] < nc) c(dep[k], a) -= pp.lumped[k];
        }
    }

    // Reduced Hessian B^T diag(Q,..,Q) B.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(q.nonZeros()) * np);
    for (int col = 0; col < q.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(q, col); it; ++it) {
            const int ra = static_cast<int>(it.row());
            const int rb = col;
            const double v = it.value();
            for (int i = 0; i < np; ++i) {
                const int ya = index[ra * np + i];
                if (ya < 0) continue;
                for (int j = 0; j < np; ++j) {
                    const int yb = index[rb * np + j];
                    if (yb < 0) continue;
                    const double f = (i == j ? 1.0 : 0.0) - (i == dep[rb] ? 1.0 : 0.0) -
                                     (dep[ra] == j ? 1.0 : 0.0) + (dep[ra] == dep[rb] ? 1.0 : 0.0);
                    if (f != 0.0) trip.emplace_back(ya, yb, f * v);
                }
            }
        }
    }
    SparseMatrix h(ny, ny);
    h.setFromTriplets(trip.begin(), trip.end());

    Eigen::VectorXd y = Eigen::VectorXd::Zero(ny);
    Eigen::VectorXd kappa = Eigen::VectorXd::Zero(np);
    if (ny > 0) {
        const double avg_diag = h.diagonal().cwiseAbs().sum() / ny;
        const double rho = nc > 0 ? 0.01 * avg_diag * ny / (vol * vol) : 0.0;
        SparseMatrix p = h;
        for (int a = 0; a < ny; ++a) {
            double d = 0.0;
            for (int j = 0; j < nc; ++j) d += c(j, a) * c(j, a);
            p.coeffRef(a, a) += rho * d;
        }
        Eigen::SimplicialLLT<SparseMatrix> pre(p);
        if (pre.info() != Eigen::Success) {
            throw ProjectionError("projection: reduced system is singular on the current active set");
        }
        const Eigen::VectorXd y0 = augmented_solve(h, c, rho, pre, b + rho * (c.transpose() * rmass));
        if (nc > 0) {
            Eigen::MatrixXd yk(ny, nc);
            for (int j = 0; j < nc; ++j) yk.col(j) = augmented_solve(h, c, rho, pre, c.row(j).transpose());
            const Eigen::MatrixXd s = c * yk;
            const Eigen::VectorXd rhs = rmass - c * y0;
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(s);
            const Eigen::VectorXd kap = cod.solve(rhs);
            y = y0 + yk * kap;
            kappa.head(nc) = kap;
        } else {
            y = y0;
        }
    }
    // A transient active set may fix a phase everywhere; the least-squares
    // multipliers keep the iteration going and the defect is checked on exit.
    st.mass_defect = nc > 0 ? (c * y - rmass).cwiseAbs().maxCoeff() / vol : 0.0;

    Eigen::MatrixXd zeta = z0;
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < np; ++i) {
            const int a = index[k * np + i];
            if (a < 0) continue;
            zeta(k, i) += y[a];
            zeta(k, dep[k]) -= y[a];
        }
    }

    // Multipliers from stationarity.
    const Eigen::MatrixXd x = q * (zeta - pp.phi.values()) + pp.lambda * pp.grad;
    Eigen::VectorXd s(n);
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, np);
    for (int k = 0; k < n; ++k) {
        const int r = dep[k];
        s[k] = x(k, r) - kappa[r] * pp.lumped[k];
        for (int i = 0; i < np; ++i) {
            if (slot[k * np + i] == Slot::Fixed) mu(k, i) = x(k, i) - kappa[i] * pp.lumped[k] - s[k];
        }
    }

    // Active set prediction.
    std::vector<char> next(st.active.size(), 0);
    if (pp.bounds) {
        for (int k = 0; k < n; ++k) {
            const double sc = pp.c_pdas * std::abs(q.coeff(k, k));
            const double thr = 1e-12 * std::max(sc, 1e-300);
            int count = 0, movable_count = 0, best = -1;
            double best_val = 0.0;
            for (int i = 0; i < np; ++i) {
                if (!movable(pp, k, i, np)) continue;
                ++movable_count;
                const double pred = mu(k, i) - sc * zeta(k, i);
                if (pred > thr) {
                    next[k * np + i] = 1;
                    ++count;
                }
                if (best < 0 || pred < best_val) {
                    best = i;
                    best_val = pred;
                }
            }
            // Keep one phase free at every node.
            if (movable_count > 0 && count == movable_count) next[k * np + best] = 0;
        }
    }

    // Mass rows are dependent when a group of phases only exchanges mass
    // among itself: link phase i and the dependent phase wherever i is free.
    // Such a group cannot reach its masses, so its fixed entries are released.
    if (pp.bounds && st.mass_defect > 1e-10) {
        std::vector<int> root(np);
        for (int i = 0; i < np; ++i) root[i] = i;
        auto find = [&](int i) {
            while (root[i] != i) i = root[i] = root[root[i]];
            return i;
        };
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < np; ++i) {
                if (slot[k * np + i] == Slot::Free) root[find(i)] = find(dep[k]);
            }
        }
        const int ground = find(np - 1);
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < np; ++i) {
                if (find(i) != ground && movable(pp, k, i, np)) next[k * np + i] = 0;
            }
        }
    }

    st.changed = next != st.active;
    st.active = std::move(next);
    st.result.zeta = PhaseField(std::move(zeta));
    st.result.mass_multiplier = kappa;
    st.result.sum_multiplier = s;
    st.result.bound_multiplier = mu;
    ++st.result.iterations;
}

namespace {

bool settled(const ProjectionProblem& pp, const PdasState& st, const std::vector<char>& used) {
    if (!pp.bounds) return false;
    const SparseMatrix& q = *pp.metric;
    const int n = pp.phi.num_nodes();
    const int np = pp.phi.num_phases();
    const auto& z = st.result.zeta.values();
    const auto& mu = st.result.bound_multiplier;
    for (int k = 0; k < n; ++k) {
        const double sc = pp.c_pdas * std::abs(q.coeff(k, k));
        for (int i = 0; i < np; ++i) {
            if (!movable(pp, k, i, np)) continue;
            if (used[k * np + i]) {
                if (mu(k, i) < -1e-10 * sc) return false;
            } else if (z(k, i) < -1e-12) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

ProjectionResult project_from(const ProjectionProblem& pp, std::vector<char> active) {
    PdasState st = pdas_start(pp);
    if (!active.empty()) {
        if (active.size() != st.active.size()) throw ProjectionError("projection: active set has wrong size");
        st.active = std::move(active);
    }
    std::vector<std::size_t> sizes;
    while (true) {
        const std::vector<char> used = st.active;
        pdas_iterate(pp, st);
        sizes.push_back(static_cast<std::size_t>(std::count(used.begin(), used.end(), 1)));
        if (!st.changed) {
            st.result.active = used;
            if (st.mass_defect > 1e-10) {
                throw InfeasibleMassError("projection: the masses cannot be met on the final active set (defect " +
                                          std::to_string(st.mass_defect) + ")");
            }
            break;
        }
        // Entries with zero value and zero multiplier may flip forever; an
        // iterate that already satisfies the optimality system is accepted.
        if (st.mass_defect <= 1e-10 && settled(pp, st, used)) {
            st.result.active = used;
            break;
        }
        if (st.result.iterations >= pp.max_iter) {
            std::ostringstream os;
            os << "projection: active set did not settle after " << pp.max_iter << " iterations; active sizes";
            const std::size_t from = sizes.size() > 10 ? sizes.size() - 10 : 0;
            for (std::size_t i = from; i < sizes.size(); ++i) os << ' ' << sizes[i];
            throw ProjectionError(os.str());
        }
    }
    st.result.kkt_residual = kkt_residual(pp, st.result);
    return st.result;
}

ProjectionResult project(const ProjectionProblem& pp) { return project_from(pp, {}); }

PhaseField descent_direction(const ProjectionProblem& pp, ProjectionResult* result) {
    ProjectionResult r = project(pp);
    PhaseField v(r.zeta.values() - pp.phi.values());
    if (result) *result = std::move(r);
    return v;
}

double kkt_residual(const ProjectionProblem& pp, const ProjectionResult& r) {
    const SparseMatrix& q = *pp.metric;
    const int n = pp.phi.num_nodes();
    const int np = pp.phi.num_phases();
    const auto& z = r.zeta.values();
    const Eigen::MatrixXd x = q * (z - pp.phi.values()) + pp.lambda * pp.grad;
    const double scale = std::max({metric_diag_max(q), x.cwiseAbs().maxCoeff(), 1e-300});
    const double vol = pp.lumped.sum();

    double res = 0.0;
    for (int k = 0; k < n; ++k) {
        const Pin p = pin_of(pp, k);
        double sum = 0.0;
        for (int i = 0; i < np; ++i) {
            sum += z(k, i);
            const bool pinned_zero = (p == Pin::VoidOne && i != np - 1) || (p == Pin::VoidZero && i == np - 1);
            const bool pinned_one = p == Pin::VoidOne && i == np - 1;
            const double mu = r.bound_multiplier(k, i);
            const double stat = x(k, i) - r.mass_multiplier[i] * pp.lumped[k] - r.sum_multiplier[k] - mu;
            res = std::max(res, std::abs(stat) / scale);
            if (pinned_zero) {
                res = std::max(res, std::abs(z(k, i)));
            } else if (pinned_one) {
                res = std::max(res, std::abs(z(k, i) - 1.0));
            } else if (pp.bounds) {
                res = std::max(res, -z(k, i));
                res = std::max(res, -mu / scale);
                res = std::max(res, std::abs(mu * z(k, i)) / scale);
            } else {
                res = std::max(res, std::abs(mu) / scale);
            }
        }
        res = std::max(res, std::abs(sum - 1.0));
    }
    for (int i = 0; i < np; ++i) res = std::max(res, std::abs(pp.lumped.dot(z.col(i)) / vol - pp.masses[i]));
    return res;
}

double projection_objective(const ProjectionProblem& pp, const Eigen::MatrixXd& z) {
    const Eigen::MatrixXd d = z - pp.phi.values();
    double val = 0.0;
    for (int i = 0; i < d.cols(); ++i) val += 0.5 * d.col(i).dot(*pp.metric * d.col(i));
    return val + pp.lambda * pp.grad.cwiseProduct(d).sum();
}

}  // namespace phasetopo
