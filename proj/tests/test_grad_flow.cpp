#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "phasetopo/config.hpp"
#include "phasetopo/grad_flow.hpp"
#include "phasetopo/verify.hpp"

using namespace phasetopo;
using namespace fixtures;

namespace {

Problem small_push(int level = 3) {
    RunConfig cfg = load_config("push_3phase");
    return build_problem(cfg, level);
}

/// Pure phases in three vertical bands, no loads: only the interface
/// energy drives the flow.
Problem allen_cahn(double eps) {
    Problem p;
    p.mesh = std::make_unique<Mesh>(cantilever_mesh(4, 0.0));
    CostParams c;
    c.alpha = 1.0;
    c.gamma = 1.0;
    c.eps = eps;
    const auto t = ElasticTensor::isotropic(1, 1, 2);
    p.cost = std::make_unique<ReducedCost>(*p.mesh, MaterialSet({t, t}, t, eps, Interpolation::Quadratic),
                                           LoadCase::zero(*p.mesh), c);
    return p;
}

PhaseField bands(const Mesh& m) {
    PhaseField f(m.num_nodes(), 3);
    for (int n = 0; n < m.num_nodes(); ++n) {
        const double x = m.node(n)[0];
        f(n, x < -0.3 ? 0 : (x < 0.4 ? 1 : 2)) = 1.0;
    }
    return f;
}

}  // namespace

TEST_CASE("a stationary field is a fixed point of the flow step") {
    Problem p = allen_cahn(0.2);
    p.masses.m = Eigen::Vector3d(0.3, 0.3, 0.4);
    GradientFlow flow(p, {});
    const PhaseField phi = PhaseField::constant(p.mesh->num_nodes(), p.masses.m);
    const Eigen::VectorXd u = p.cost->solve_state(phi);
    for (double tau : {1e-3, 0.2, 10.0}) {
        const PhaseField next = flow.flow_step(phi, u, tau);
        CHECK((next.values() - phi.values()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("push flow keeps masses, pins and descent") {
    Problem p = small_push(4);
    FlowConfig fc;
    fc.max_steps = 60;
    fc.monotone_mechanism = true;
    GradientFlow flow(p, fc);
    const RunConfig cfg = load_config("push_3phase");
    std::vector<FlowRecord> seen;
    const FlowResult r = flow.run(initial_field(cfg, *p.mesh), [&](const FlowRecord& rec, const PhaseField&,
                                                                     const Eigen::VectorXd&) { seen.push_back(rec); });
    REQUIRE(r.history.size() >= 10);
    CHECK(seen.size() <= r.history.size());
    for (std::size_t k = 0; k < r.history.size(); ++k) {
        const auto& h = r.history[k];
        CHECK(h.mass_violation < 1e-9);
        CHECK(h.simplex_violation < 1e-9);
        CHECK(h.pin_violation == 0.0);
        if (k > 0) {
            CHECK(h.parts.total <= r.history[k - 1].parts.total);
            CHECK(h.parts.mechanism <= r.history[k - 1].parts.mechanism);
        }
    }
    CHECK(r.history.back().parts.mechanism < r.history.front().parts.mechanism);
    const int last = 2;
    for (int n = 0; n < p.mesh->num_nodes(); ++n) {
        if (p.cost->loads().s0[n]) CHECK(r.phi(n, last) == 0.0);
    }
    CHECK(max_mass_violation(r.phi, p.cost->ops(), p.masses) < 1e-9);
}

TEST_CASE("small steps follow the projected descent direction") {
    Problem p = small_push();
    const RunConfig cfg = load_config("push_3phase");
    GradientFlow flow(p, {});
    // A feasible interior point: one flow step from the constant start.
    const FlowResult warm = [&] {
        FlowConfig fc;
        fc.max_steps = 3;
        return GradientFlow(p, fc).run(initial_field(cfg, *p.mesh));
    }();
    const PhaseField& phi = warm.phi;
    const Eigen::VectorXd u = p.cost->solve_state(phi);
    const Eigen::VectorXd adj = p.cost->solve_adjoint(phi, u);
    const Eigen::MatrixXd g = p.cost->gradient(phi, u, adj);

    OptimizerConfig oc;
    ProjectedGradient opt(p, oc);
    const PhaseField v = descent_direction(opt.projection_problem(phi, 1e-3, g));
    const PhaseField d(flow.flow_step(phi, u, 1e-6).values() - phi.values());
    const Eigen::VectorXd& w = p.cost->ops().lumped;
    double dv = 0.0, dd = 0.0, vv = 0.0;
    for (int i = 0; i < 3; ++i) {
        dv += d.values().col(i).cwiseProduct(w).dot(v.values().col(i));
        dd += d.values().col(i).cwiseProduct(w).dot(d.values().col(i));
        vv += v.values().col(i).cwiseProduct(w).dot(v.values().col(i));
    }
    REQUIRE(dd > 0.0);
    CHECK(dv > 0.0);
    MESSAGE("cosine between flow step and projected gradient direction: " << dv / std::sqrt(dd * vv));
    // Both are descent directions for j.
    CHECK(g.cwiseProduct(d.values()).sum() < 0.0);
    CHECK(g.cwiseProduct(v.values()).sum() < 0.0);
}

TEST_CASE("without loads the flow decreases the interface energy") {
    Problem p = allen_cahn(0.15);
    const PhaseField phi0 = bands(*p.mesh);
    p.masses.m = phase_means(phi0, p.cost->ops());
    FlowConfig fc;
    fc.max_steps = 40;
    GradientFlow flow(p, fc);
    const FlowResult r = flow.run(phi0);
    REQUIRE(r.history.size() > 5);
    for (std::size_t k = 1; k < r.history.size(); ++k) {
        CHECK(r.history[k].parts.perimeter <= r.history[k - 1].parts.perimeter + 1e-12);
        CHECK(r.history[k].parts.compliance == 0.0);
    }
    CHECK(r.parts.perimeter < r.history.front().parts.perimeter);
    CHECK((phase_means(r.phi, p.cost->ops()) - p.masses.m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("oversized steps are rejected and tau reduced") {
    Problem p = small_push();
    const RunConfig cfg = load_config("push_3phase");
    FlowConfig fc;
    fc.tau0 = 50.0;
    fc.max_steps = 5;
    GradientFlow flow(p, fc);
    const FlowResult r = flow.run(initial_field(cfg, *p.mesh));
    REQUIRE(!r.history.empty());
    CHECK(r.history.front().rejected > 0);
    CHECK(r.history.front().tau < 50.0);
    CHECK(r.history.front().tau == doctest::Approx(50.0 * std::pow(0.5, r.history.front().rejected)));
}
