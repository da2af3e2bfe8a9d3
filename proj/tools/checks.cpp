#include "checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

namespace phasetopo::checks {

GradCheck gradient_check(const RunConfig& cfg, int level, std::uint64_t seed, double threshold) {
    Problem p = build_problem(cfg, level);
    const int np = cfg.num_phases();
    const PhaseField phi = verify::random_interior_field(*p.mesh, np, seed);
    const PhaseField eta = verify::random_tangent(*p.mesh, np, seed + 1, 0.1);
    GradCheck g;
    g.samples = verify::fd_check(*p.cost, phi, eta, {1e-3, 1e-4, 1e-5});
    g.max_rel_error = g.samples.back().rel_error;
    g.linear = true;
    for (std::size_t i = 1; i < g.samples.size(); ++i) {
        const double ratio = g.samples[i - 1].rel_error / g.samples[i].rel_error;
        if (!(ratio > 5.0 && ratio < 20.0)) g.linear = false;
    }
    g.pass = g.linear && g.max_rel_error < threshold;
    return g;
}

OracleSweep projection_oracle_sweep(int instances, std::uint64_t seed, int max_nodes, double tol, double kkt_tol) {
    struct Shape {
        Mesh mesh;
        SparseMatrix lap;
        SparseMatrix flow;  // lumped mass plus Laplacian
    };
    std::vector<Shape> shapes;
    const double h = 0.5;
    for (int nx = 2; nx <= max_nodes; ++nx) {
        for (int ny = 2; nx * ny <= max_nodes; ++ny) {
            shapes.push_back({build_mesh(Box::rectangle(0, h * (nx - 1), 0, h * (ny - 1)), 1, {}), {}, {}});
            for (int nz = 2; nx * ny * nz <= max_nodes; ++nz) {
                shapes.push_back(
                    {build_mesh(Box::cuboid(0, h * (nx - 1), 0, h * (ny - 1), 0, h * (nz - 1)), 1, {}), {}, {}});
            }
        }
    }
    for (auto& s : shapes) {
        s.lap = assemble_laplacian(s.mesh);
        s.flow = s.lap;
        for (int n = 0; n < s.mesh.num_nodes(); ++n) s.flow.coeffRef(n, n) += s.mesh.lumped_mass()[n];
    }

    OracleSweep out;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    for (int k = 0; k < instances; ++k) {
        const Shape& s = shapes[k % shapes.size()];
        const int np = 2 + (k / static_cast<int>(shapes.size())) % 2;
        const bool pinned = k % 3 == 2;
        const SparseMatrix& metric = k % 2 ? s.flow : s.lap;
        std::vector<Pin> pins;
        if (pinned) {
            pins.assign(s.mesh.num_nodes(), Pin::None);
            for (auto& p : pins) {
                const auto r = rng() % 6;
                p = r == 0 ? Pin::VoidOne : (r == 1 ? Pin::VoidZero : Pin::None);
            }
        }
        const ProjectionProblem pp = verify::random_projection(s.mesh, metric, np, rng(), pins);
        std::ostringstream what;
        what << "instance " << k << " (" << s.mesh.num_nodes() << " nodes, " << s.mesh.dim() << "D, N = " << np
             << (pinned ? ", pinned" : "") << ")";
        ++out.instances;
        try {
            const ProjectionResult r = project(pp);
            const verify::OracleResult o = verify::enumerate_projection(pp);
            const double err = o.zeta.size() ? (r.zeta.values() - o.zeta).cwiseAbs().maxCoeff() : INFINITY;
            out.max_error = std::max(out.max_error, err);
            out.max_kkt = std::max(out.max_kkt, r.kkt_residual);
            if (!(err < tol) || !(r.kkt_residual < kkt_tol)) {
                ++out.mismatches;
                what << ": deviation " << err << ", KKT residual " << r.kkt_residual;
                out.failures.push_back(what.str());
            }
        } catch (const std::exception& e) {
            ++out.mismatches;
            out.failures.push_back(what.str() + ": " + e.what());
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::vector<DriftRow> drift_table(const RunConfig& cfg, int level) {
    if (cfg.drift_eps.empty()) throw ConfigError("drift table: the configuration has no [drift] eps list");
    const int lv = level >= 0 ? level : cfg.level;
    auto factory = [&](double eps) {
        RunConfig c = cfg;
        c.cost.eps = eps;
        return build_problem(c, lv);
    };
    auto start = [&](const Problem& p) { return initial_field(cfg, *p.mesh); };
    return potential_drift_experiment(factory, cfg.drift_eps, cfg.optimizer, start);
}

void print_drift_table(std::ostream& os, const std::vector<DriftRow>& rows) {
    os << "     eps   plateau  material  max phi1  iterations           J  reason\n";
    for (const auto& r : rows) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%8.4g  %8.5f  %8.5f  %8.5f  %10d  %10.6g  %s\n", r.eps, r.plateau,
                      r.material_plateau, r.max_value, r.iterations, r.cost, r.reason.c_str());
        os << buf;
    }
}

}  // namespace phasetopo::checks
