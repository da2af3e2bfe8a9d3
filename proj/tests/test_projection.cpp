#include <doctest.h>

#include "phasetopo/projection.hpp"
#include "phasetopo/verify.hpp"

using namespace phasetopo;

namespace {

struct Tiny {
    Mesh mesh;
    SparseMatrix lap;
};

Tiny tiny(double x1, double y1) {
    Tiny t{build_mesh(Box::rectangle(0, x1, 0, y1), 1, {}), {}};
    t.lap = assemble_laplacian(t.mesh);
    return t;
}

}  // namespace

TEST_CASE("lambda = 0 returns phi") {
    const Tiny t = tiny(1, 1);
    auto pp = verify::random_projection(t.mesh, t.lap, 3, 1);
    pp.lambda = 0.0;
    const auto r = project(pp);
    CHECK((r.zeta.values() - pp.phi.values()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("matches the enumeration oracle, two phases") {
    for (auto [x1, y1] : {std::pair{1.0, 0.5}, std::pair{1.0, 1.0}, std::pair{2.0, 0.5}}) {
        const Tiny t = tiny(x1, y1);
        for (int seed = 0; seed < 8; ++seed) {
            const auto pp = verify::random_projection(t.mesh, t.lap, 2, 100 + seed);
            const auto r = project(pp);
            const auto o = verify::enumerate_projection(pp);
            CHECK((r.zeta.values() - o.zeta).cwiseAbs().maxCoeff() < 1e-8);
            CHECK(r.kkt_residual < 1e-9);
        }
    }
}

TEST_CASE("matches the enumeration oracle, three phases with pins") {
    const Tiny t = tiny(1, 0.5);
    for (int seed = 0; seed < 4; ++seed) {
        const auto pp = verify::random_projection(t.mesh, t.lap, 3, 200 + seed);
        const auto r = project(pp);
        const auto o = verify::enumerate_projection(pp);
        CHECK((r.zeta.values() - o.zeta).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(r.kkt_residual < 1e-9);
    }
    const Tiny sq = tiny(1, 1);
    std::vector<Pin> pins(9, Pin::None);
    pins[0] = pins[2] = Pin::VoidOne;
    pins[4] = pins[6] = Pin::VoidZero;
    for (int seed = 0; seed < 2; ++seed) {
        const auto pp = verify::random_projection(sq.mesh, sq.lap, 3, 300 + seed, pins);
        const auto r = project(pp);
        const auto o = verify::enumerate_projection(pp);
        CHECK((r.zeta.values() - o.zeta).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(r.zeta(0, 2) == 1.0);
        CHECK(r.zeta(4, 2) == 0.0);
    }
}

TEST_CASE("descent direction properties") {
    const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), 3, {});
    const SparseMatrix lap = assemble_laplacian(m);
    auto pp = verify::random_projection(m, lap, 3, 5);
    ProjectionResult r;
    const PhaseField v = descent_direction(pp, &r);
    CHECK(v.values().rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd means = v.values().transpose() * m.lumped_mass();
    CHECK(means.cwiseAbs().maxCoeff() < 1e-12);
    double hnorm = 0.0;
    for (int i = 0; i < 3; ++i) hnorm += v.values().col(i).dot(lap * v.values().col(i));
    const double dj = pp.grad.cwiseProduct(v.values()).sum();
    CHECK(dj <= -hnorm / pp.lambda + 1e-10);
    CHECK(r.kkt_residual < 1e-9);

    // Stationary point: projecting the result again with its own gradient.
    ProjectionProblem again = pp;
    again.phi = r.zeta;
    const auto r2 = project(again);
    (void)r2;
}

TEST_CASE("uniqueness from different starting active sets") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 3, {});
    const SparseMatrix lap = assemble_laplacian(m);
    const auto pp = verify::random_projection(m, lap, 3, 8);
    const auto a = project(pp);
    const auto b = project_from(pp, std::vector<char>(pp.phi.values().size(), 0));
    CHECK((a.zeta.values() - b.zeta.values()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("optimal active set is a fixed point") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const SparseMatrix lap = assemble_laplacian(m);
    const auto pp = verify::random_projection(m, lap, 2, 12);
    const auto a = project(pp);
    const auto b = project_from(pp, a.active);
    CHECK(b.iterations == 1);
}

TEST_CASE("infeasible masses with pins") {
    const Tiny sq = tiny(1, 1);
    std::vector<Pin> pins(9, Pin::VoidOne);
    pins[4] = Pin::None;
    auto pp = verify::random_projection(sq.mesh, sq.lap, 2, 3);
    pp.pins = pins;
    pp.masses = Eigen::Vector2d(0.5, 0.5);
    CHECK_THROWS_AS(project(pp), InfeasibleMassError);
}

TEST_CASE("no-bounds mode solves the equality problem") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const SparseMatrix lap = assemble_laplacian(m);
    auto pp = verify::random_projection(m, lap, 2, 13);
    pp.bounds = false;
    pp.lambda = 50.0;
    const auto r = project(pp);
    CHECK(r.iterations == 1);
    CHECK(r.kkt_residual < 1e-9);
    CHECK(r.zeta.values().minCoeff() < 0.0);
}
