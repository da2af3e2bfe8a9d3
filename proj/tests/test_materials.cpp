#include <doctest.h>

#include <vector>

#include "phasetopo/materials.hpp"

using namespace phasetopo;

namespace {

double max_abs(const VoigtMatrix& a) { return a.cwiseAbs().maxCoeff(); }

MaterialSet three_phase(Interpolation s) {
    const auto c1 = ElasticTensor::isotropic(10, 10, 2);
    return MaterialSet({c1, c1 * 0.5}, c1, 0.05, s);
}

}  // namespace

TEST_CASE("isotropic validation") {
    CHECK_THROWS_AS(ElasticTensor::isotropic(0.0, 1.0, 2), DomainError);
    CHECK_THROWS_AS(ElasticTensor::isotropic(1.0, -1.5, 2), DomainError);
    CHECK_NOTHROW(ElasticTensor::isotropic(1.0, -0.9, 2));
    const auto c = ElasticTensor::isotropic(5000, 5000, 2);
    CHECK(c.voigt(0, 0) == 15000.0);
    CHECK(c.voigt(0, 1) == 5000.0);
    CHECK(c.voigt(2, 2) == 5000.0);
}

TEST_CASE("pure phases reproduce the phase tensors") {
    for (auto s : {Interpolation::Linear, Interpolation::Quadratic}) {
        const MaterialSet ms = three_phase(s);
        for (int k = 0; k < 3; ++k) {
            std::vector<double> e(3, 0.0);
            e[k] = 1.0;
            CHECK(max_abs(interpolate(ms, e).voigt - ms.phase(k).voigt) == 0.0);
        }
    }
}

TEST_CASE("two-phase midpoint values") {
    const auto c1 = ElasticTensor::isotropic(1, 1, 2);
    const MaterialSet q({c1}, c1, 0.5, Interpolation::Quadratic);
    const MaterialSet l({c1}, c1, 0.5, Interpolation::Linear);
    const std::vector<double> half{0.5, 0.5};
    // Hand expansion: C1 phi1^2 + C2 (2 phi1 phi2 + phi2^2).
    const VoigtMatrix expect_q = 0.25 * q.phase(0).voigt + 0.75 * q.phase(1).voigt;
    const VoigtMatrix expect_l = 0.5 * l.phase(0).voigt + 0.5 * l.phase(1).voigt;
    CHECK(max_abs(interpolate(q, half).voigt - expect_q) < 1e-14);
    CHECK(max_abs(interpolate(l, half).voigt - expect_l) < 1e-14);
}

TEST_CASE("quadratic form matches the double sum") {
    const MaterialSet ms = three_phase(Interpolation::Quadratic);
    const std::vector<double> phi{0.2, 0.5, 0.3};
    VoigtMatrix direct = VoigtMatrix::Zero(3, 3);
    // Stiffness order here is the index order.
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) direct += ms.phase(std::max(i, j)).voigt * phi[i] * phi[j];
    }
    CHECK(max_abs(interpolate(ms, phi).voigt - direct) < 1e-12);
}

TEST_CASE("stiffness order follows the Frobenius norm") {
    const auto soft = ElasticTensor::isotropic(1, 1, 2);
    const auto hard = ElasticTensor::isotropic(4, 4, 2);
    const MaterialSet ms({soft, hard}, soft, 0.1, Interpolation::Quadratic);
    CHECK(ms.stiffness_order() == std::vector<int>{1, 0, 2});
    // Phase 2 (hard) now plays the role of the stiffest entry.
    const std::vector<double> phi{0.3, 0.6, 0.1};
    VoigtMatrix direct = VoigtMatrix::Zero(3, 3);
    const int rank[3] = {1, 0, 2};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const int k = rank[i] > rank[j] ? i : j;
            direct += ms.phase(k).voigt * phi[i] * phi[j];
        }
    }
    CHECK(max_abs(interpolate(ms, phi).voigt - direct) < 1e-12);
}

TEST_CASE("derivative vanishes at the softest pure phase") {
    const MaterialSet ms = three_phase(Interpolation::Quadratic);
    const std::vector<double> void_phase{0.0, 0.0, 1.0};
    const double scale = max_abs(ms.phase(0).voigt);
    for (int i = 0; i < 2; ++i) {
        std::vector<double> h(3, 0.0);
        h[i] = 1.0;
        h[2] = -1.0;
        CHECK(max_abs(interpolate_derivative(ms, void_phase, h).voigt) / scale < 1e-12);
    }
}

TEST_CASE("derivative: linear scheme and finite differences") {
    const MaterialSet lin = three_phase(Interpolation::Linear);
    const std::vector<double> h{0.3, -0.1, -0.2};
    const VoigtMatrix expect = 0.3 * lin.phase(0).voigt - 0.1 * lin.phase(1).voigt - 0.2 * lin.phase(2).voigt;
    CHECK(max_abs(interpolate_derivative(lin, std::vector<double>{0.2, 0.5, 0.3}, h).voigt - expect) < 1e-12);

    const MaterialSet q = three_phase(Interpolation::Quadratic);
    const std::vector<double> phi{0.2, 0.5, 0.3};
    const VoigtMatrix d = interpolate_derivative(q, phi, h).voigt;
    double prev = 0.0;
    for (double t : {1e-3, 1e-4}) {
        std::vector<double> moved(3);
        for (int i = 0; i < 3; ++i) moved[i] = phi[i] + t * h[i];
        const VoigtMatrix fd = (interpolate(q, moved).voigt - interpolate(q, phi).voigt) / t;
        const double err = max_abs(fd - d);
        if (prev > 0.0) CHECK(err < 0.2 * prev);
        prev = err;
    }
}

TEST_CASE("domain errors") {
    const MaterialSet ms = three_phase(Interpolation::Quadratic);
    CHECK_THROWS_AS(interpolate(ms, std::vector<double>{0.5, 0.6, 0.0}), DomainError);
    CHECK_THROWS_AS(interpolate(ms, std::vector<double>{-0.1, 0.6, 0.5}), DomainError);
    CHECK_THROWS_AS(interpolate_derivative(ms, std::vector<double>{0.2, 0.5, 0.3}, std::vector<double>{1, 0, 0}),
                    DomainError);
}

TEST_CASE("swapping identical phases leaves C unchanged") {
    const auto c = ElasticTensor::isotropic(2, 1, 2);
    const MaterialSet ms({c, c}, c, 0.1, Interpolation::Quadratic);
    const std::vector<double> a{0.2, 0.5, 0.3}, b{0.5, 0.2, 0.3};
    CHECK(max_abs(interpolate(ms, a).voigt - interpolate(ms, b).voigt) < 1e-12);
}
