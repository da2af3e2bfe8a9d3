#pragma once

#include "phasetopo/state_adjoint.hpp"

namespace fixtures {

using namespace phasetopo;

inline BoundaryPatch side_patch(BoundaryTag tag, const char* side, double a, double b) {
    BoundaryPatch p;
    p.tag = tag;
    p.side = Side::parse(side);
    p.range[0] = {a, b};
    return p;
}

/// Cantilever on (-1,1)x(0,1): clamped left edge, downward load on
/// (0.75,1) x {0}.
inline Mesh cantilever_mesh(int level, double load = -250.0) {
    auto g = side_patch(BoundaryTag::NeumannG, "bottom", 0.75, 1.0);
    g.traction = {0.0, load, 0.0};
    return build_mesh(Box::rectangle(-1, 1, 0, 1), level, {side_patch(BoundaryTag::Dirichlet, "left", 0, 1), g});
}

inline MaterialSet one_material(double eps, Interpolation s = Interpolation::Quadratic) {
    const auto c = ElasticTensor::isotropic(5000, 5000, 2);
    return MaterialSet({c}, c, eps, s);
}

}  // namespace fixtures
