#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "phasetopo/phase_field.hpp"
#include "phasetopo/verify.hpp"

using namespace phasetopo;

TEST_CASE("Ginzburg-Landau energy of constant fields") {
    const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), 3, {});
    const auto ops = PhaseOperators::from(m);
    const double eps = 0.1;
    const PhaseField pure = PhaseField::constant(m.num_nodes(), Eigen::Vector2d(1, 0));
    CHECK(ginzburg_landau(pure, ops, eps, Potential::obstacle()) == 0.0);
    const PhaseField half = PhaseField::constant(m.num_nodes(), Eigen::Vector2d(0.5, 0.5));
    CHECK(ginzburg_landau(half, ops, eps, Potential::obstacle()) == doctest::Approx(0.25 * 2 / eps));
}

TEST_CASE("Ginzburg-Landau energy of a linear ramp") {
    // phi^1 = 1 - s, phi^2 = s with s = clamp((x - a) / w, 0, 1) on a strip;
    // closed form: eps/2 * 2/w^2 * w + (1/eps) * int_0^w s (1 - s) dx
    // = eps/w + w / (6 eps). Grid-aligned ramp, exact up to the lumped
    // quadrature of the potential (checked against a refined reference).
    const double eps = 0.1, a = 0.25, w = 0.5;
    auto energy = [&](int level) {
        const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 0.25), level, {});
        const auto ops = PhaseOperators::from(m);
        PhaseField f(m.num_nodes(), 2);
        for (int n = 0; n < m.num_nodes(); ++n) {
            const double s = std::clamp((m.node(n)[0] - a) / w, 0.0, 1.0);
            f(n, 0) = 1 - s;
            f(n, 1) = s;
        }
        return ginzburg_landau(f, ops, eps, Potential::obstacle());
    };
    const double exact = (eps / w + w / (6 * eps)) * 0.25;
    const double e6 = energy(6), e8 = energy(8);
    CHECK(std::abs(e8 - exact) < std::abs(e6 - exact));
    CHECK(e8 == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("energy is non-negative and renumbering invariant") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 3, {});
    const auto ops = PhaseOperators::from(m);
    const PhaseField f = verify::random_interior_field(m, 3, 7, 0.0);
    const double e = ginzburg_landau(f, ops, 0.05, Potential::obstacle());
    CHECK(e >= 0.0);

    std::vector<int> perm(m.num_nodes());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(1);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Mesh pm = m.renumbered(perm);
    PhaseField pf(m.num_nodes(), 3);
    for (int n = 0; n < m.num_nodes(); ++n) pf.values().row(perm[n]) = f.values().row(n);
    CHECK(ginzburg_landau(pf, PhaseOperators::from(pm), 0.05, Potential::obstacle()) == doctest::Approx(e));
}

TEST_CASE("gradient of the energy matches finite differences") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const auto ops = PhaseOperators::from(m);
    for (auto pot : {Potential::obstacle(), Potential::double_well()}) {
        const PhaseField f = verify::random_interior_field(m, 2, 3);
        const PhaseField eta = verify::random_tangent(m, 2, 4, 1.0);
        const Eigen::MatrixXd g = ginzburg_landau_gradient(f, ops, 0.1, pot);
        const double exact = g.cwiseProduct(eta.values()).sum();
        const double t = 1e-6;
        const PhaseField fp(f.values() + t * eta.values()), fm(f.values() - t * eta.values());
        const double fd = (ginzburg_landau(fp, ops, 0.1, pot) - ginzburg_landau(fm, ops, 0.1, pot)) / (2 * t);
        CHECK(fd == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("lumped means equal the exact integral") {
    const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), 3, {});
    const auto ops = PhaseOperators::from(m);
    const PhaseField f = verify::random_interior_field(m, 2, 9);
    const SparseMatrix mass = assemble_mass(m);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.num_nodes());
    const Eigen::VectorXd means = phase_means(f, ops);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(means[i] - ones.dot(mass * f.values().col(i)) / 2.0) < 1e-12);
}

TEST_CASE("scalar reduction") {
    PhaseField a(2, 2);
    a(0, 0) = 1;
    a(1, 1) = 1;
    const Eigen::VectorXd s = scalar_reduce(a);
    CHECK(s[0] == -1.0);
    CHECK(s[1] == 1.0);
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const PhaseField f = verify::random_interior_field(m, 2, 5, 0.0);
    CHECK((scalar_expand(scalar_reduce(f)).values() - f.values()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(scalar_reduce(PhaseField(3, 3)), DomainError);
}

TEST_CASE("masses validation") {
    CHECK_NOTHROW(Masses{Eigen::Vector3d(0.35, 0.15, 0.5)}.validate());
    CHECK_THROWS_AS(Masses{Eigen::Vector2d(0.6, 0.5)}.validate(), DomainError);
    CHECK_THROWS_AS(Masses{Eigen::Vector2d(0.0, 1.0)}.validate(), DomainError);
}

TEST_CASE("interface resolution warning threshold") {
    CHECK(interface_resolved(0.04, 1.0 / 64));
    CHECK(!interface_resolved(0.04, 1.0 / 32));
}
