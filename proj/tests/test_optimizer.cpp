#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "phasetopo/optimizer.hpp"
#include "phasetopo/verify.hpp"

using namespace phasetopo;
using namespace fixtures;

namespace {

Problem cantilever(int level, double eps) {
    Problem p;
    p.mesh = std::make_unique<Mesh>(cantilever_mesh(level));
    CostParams c;
    c.gamma = 0.5;
    c.eps = eps;
    p.cost = std::make_unique<ReducedCost>(*p.mesh, one_material(eps), LoadCase::zero(*p.mesh), c);
    p.masses.m = Eigen::Vector2d(0.5, 0.5);
    return p;
}

PhaseField half(const Problem& p) { return PhaseField::constant(p.mesh->num_nodes(), Eigen::Vector2d(0.5, 0.5)); }

}  // namespace

TEST_CASE("lambda schedule") {
    OptimizerConfig cfg;
    CHECK(initial_lambda(cfg, 0.04) == doctest::Approx(0.25));
    CHECK(update_lambda(0.3, 1.0, cfg) == doctest::Approx(0.6));
    CHECK(update_lambda(0.3, 0.25, cfg) == doctest::Approx(0.15));
    cfg.scaled = false;
    CHECK(initial_lambda(cfg, 0.04) == 1.0);
    CHECK(update_lambda(1.0, 0.25, cfg) == 1.0);
    cfg.scaled = true;
    cfg.cbar = 1.5;
    Problem p = cantilever(2, 0.3);
    CHECK_THROWS_AS(ProjectedGradient(p, cfg), DomainError);
}

TEST_CASE("stopping norm is the sqrt(eps)-scaled H1 seminorm") {
    const Mesh m = cantilever_mesh(3);
    const SparseMatrix k = assemble_laplacian(m);
    CHECK(stopping_norm(PhaseField(m.num_nodes(), 2), k, 0.04) == 0.0);
    const PhaseField v = verify::random_tangent(m, 2, 5, 0.1);
    const double a = stopping_norm(v, k, 1.0), b = stopping_norm(v, k, 0.04);
    CHECK(b == doctest::Approx(0.2 * a).epsilon(1e-12));
    // A constant shift has zero seminorm.
    PhaseField c = v;
    c.values().col(0).array() += 1.0;
    c.values().col(1).array() -= 1.0;
    CHECK(stopping_norm(c, k, 1.0) == doctest::Approx(a).epsilon(1e-9));
}

TEST_CASE("cantilever run descends, stays feasible and converges") {
    Problem p = cantilever(3, 0.16);
    OptimizerConfig cfg;
    cfg.tol = 1e-3;
    ProjectedGradient opt(p, cfg);
    const OptimizerResult r = opt.run(half(p));
    REQUIRE(r.converged);
    CHECK(r.reason == "tolerance");
    CHECK(r.history.back().v_norm < cfg.tol);
    for (std::size_t k = 0; k + 1 < r.history.size(); ++k) {
        const auto& a = r.history[k];
        const auto& b = r.history[k + 1];
        CHECK(b.parts.total < a.parts.total);
        // Armijo condition for the accepted step.
        CHECK(b.parts.total <= a.parts.total + cfg.c_armijo * a.beta * a.dj + 1e-12 * std::abs(a.parts.total));
        CHECK(a.beta > 0.0);
        CHECK(a.beta <= 1.0);
        CHECK(a.simplex_violation < 1e-9);
        CHECK(a.mass_violation < 1e-9);
    }
    CHECK(max_simplex_violation(r.phi) < 1e-9);
    CHECK(max_mass_violation(r.phi, p.cost->ops(), p.masses) < 1e-9);
}

TEST_CASE("a stationary point terminates at once") {
    Problem p = cantilever(3, 0.16);
    OptimizerConfig cfg;
    cfg.tol = 1e-4;
    ProjectedGradient opt(p, cfg);
    const OptimizerResult r = opt.run(half(p));
    REQUIRE(r.converged);
    OptimizerConfig again = cfg;
    again.lambda0 = r.history.back().lambda;
    ProjectedGradient opt2(p, again);
    const OptimizerResult r2 = opt2.run(r.phi);
    CHECK(r2.converged);
    CHECK(r2.iterations() == 0);
    CHECK((r2.phi.values() - r.phi.values()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("serial and parallel kernels give identical histories") {
    Problem p = cantilever(3, 0.16);
    OptimizerConfig cfg;
    cfg.max_iter = 15;
    cfg.kernel = KernelMode::Serial;
    const OptimizerResult a = ProjectedGradient(p, cfg).run(half(p));
    cfg.kernel = KernelMode::Parallel;
    const OptimizerResult b = ProjectedGradient(p, cfg).run(half(p));
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t k = 0; k < a.history.size(); ++k) {
        CHECK(a.history[k].parts.total == b.history[k].parts.total);
        CHECK(a.history[k].beta == b.history[k].beta);
    }
    CHECK(a.phi.values() == b.phi.values());
}

TEST_CASE("infeasible start is projected onto the constraints") {
    Problem p = cantilever(3, 0.16);
    OptimizerConfig cfg;
    ProjectedGradient opt(p, cfg);
    const OptimizerState st = opt.start(PhaseField::constant(p.mesh->num_nodes(), Eigen::Vector2d(0.9, 0.1)));
    CHECK(max_mass_violation(st.phi, p.cost->ops(), p.masses) < 1e-10);
    CHECK(max_simplex_violation(st.phi) < 1e-12);
    CHECK_THROWS_AS(opt.start(PhaseField::constant(5, Eigen::Vector2d(0.5, 0.5))), DomainError);
}

TEST_CASE("prolongation reproduces affine fields and keeps masses") {
    for (int dim : {2, 3}) {
        const Box box = dim == 2 ? Box::rectangle(-1, 1, 0, 1) : Box::cuboid(0, 1, 0, 0.5, 0, 0.5);
        const Mesh coarse = build_mesh(box, 2, {});
        const Mesh fine = build_mesh(box, 4, {});
        auto affine = [](const Mesh::Point& x) { return 0.3 + 0.2 * x[0] - 0.1 * x[1] + 0.05 * x[2]; };
        PhaseField c(coarse.num_nodes(), 2);
        for (int n = 0; n < coarse.num_nodes(); ++n) {
            c(n, 0) = affine(coarse.node(n));
            c(n, 1) = 1.0 - c(n, 0);
        }
        const PhaseField f = prolongate(coarse, c, fine);
        double err = 0.0;
        for (int n = 0; n < fine.num_nodes(); ++n) err = std::max(err, std::abs(f(n, 0) - affine(fine.node(n))));
        CHECK(err < 1e-14);

        // A rough field: coarse nodal values kept, integrals preserved.
        const PhaseField r = verify::random_interior_field(coarse, 3, 7);
        const PhaseField rf = prolongate(coarse, r, fine);
        const auto oc = PhaseOperators::from(coarse);
        const auto of = PhaseOperators::from(fine);
        CHECK((phase_means(r, oc) - phase_means(rf, of)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(max_simplex_violation(rf) < 1e-14);
        for (int n = 0; n < coarse.num_nodes(); ++n) {
            const auto g = coarse.grid_index(n);
            const int fn = fine.node_at(4 * g[0], 4 * g[1], 4 * g[2]);
            CHECK((rf.values().row(fn) - r.values().row(n)).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    const Mesh a = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const Mesh b = build_mesh(Box::rectangle(0, 2, 0, 1), 3, {});
    CHECK_THROWS_AS(prolongate(a, PhaseField(a.num_nodes(), 2), b), DomainError);
}

TEST_CASE("nested run reaches the finest tolerance") {
    OptimizerConfig cfg;
    const auto levels = nested_run([](int level) { return cantilever(level, 0.16); }, half, {2, 3}, {1e-2, 1e-3}, cfg);
    REQUIRE(levels.size() == 2);
    CHECK(levels[0].level == 2);
    CHECK(levels[1].result.converged);
    CHECK(levels[1].result.history.back().v_norm < 1e-3);
    CHECK(max_simplex_violation(levels[1].result.phi) < 1e-9);
    CHECK_THROWS_AS(nested_run([](int level) { return cantilever(level, 0.16); }, half, {3, 2}, {1e-2, 1e-3}, cfg),
                    DomainError);
}
