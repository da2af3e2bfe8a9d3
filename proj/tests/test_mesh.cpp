#include <doctest.h>

#include <cmath>

#include "phasetopo/mesh.hpp"

using namespace phasetopo;

namespace {

BoundaryPatch patch(BoundaryTag tag, const char* side, double a, double b) {
    BoundaryPatch p;
    p.tag = tag;
    p.side = Side::parse(side);
    p.range[0] = {a, b};
    return p;
}

double signed_area(const Mesh& m, int c) {
    const auto& a = m.node(m.cell(c)[0]);
    const auto& b = m.node(m.cell(c)[1]);
    const auto& d = m.node(m.cell(c)[2]);
    return 0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]));
}

}  // namespace

TEST_CASE("node counts of the cantilever rectangle") {
    const Box box = Box::rectangle(-1, 1, 0, 1);
    const long long expected[] = {561, 2145, 8385, 33153, 131841};
    for (int level = 4; level <= 8; ++level) {
        CHECK(structured_node_count(box, level) == expected[level - 4]);
        CHECK(structured_node_count(box, level) == (std::pow(2, level + 1) + 1) * (std::pow(2, level) + 1));
    }
    CHECK(build_mesh(box, 4, {}).num_nodes() == 561);
    CHECK(build_mesh(box, 6, {}).num_nodes() == 8385);
}

TEST_CASE("unit square at level 1") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 1, {});
    CHECK(m.num_nodes() == 9);
    CHECK(m.num_cells() == 8);
    for (int c = 0; c < m.num_cells(); ++c) {
        CHECK(signed_area(m, c) > 0.0);
        CHECK(m.cell_volume(c) == doctest::Approx(0.125));
    }
    CHECK(m.lumped_mass().sum() == doctest::Approx(1.0));
    CHECK(m.boundary_facets().size() == 8);
}

TEST_CASE("row-major numbering") {
    const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), 2, {});
    CHECK(m.node(0)[0] == -1.0);
    CHECK(m.node(1)[0] == doctest::Approx(-0.75));
    CHECK(m.node(9)[1] == doctest::Approx(0.25));
    CHECK(m.node_at(3, 2) == 2 * 9 + 3);
}

TEST_CASE("boundary tags") {
    const auto dir = patch(BoundaryTag::Dirichlet, "left", 0, 1);
    auto load = patch(BoundaryTag::NeumannG, "bottom", 0.75, 1);
    load.traction = {0, -250, 0};
    const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), 4, {dir, load});
    int nd = 0, ng = 0;
    double g_len = 0.0;
    for (const auto& f : m.boundary_facets()) {
        if (f.tag == BoundaryTag::Dirichlet) ++nd;
        if (f.tag == BoundaryTag::NeumannG) {
            ++ng;
            g_len += f.measure;
        }
    }
    CHECK(nd == 16);
    CHECK(ng == 4);
    CHECK(g_len == doctest::Approx(0.25));
    int dn = 0;
    for (char d : m.dirichlet_nodes()) dn += d;
    CHECK(dn == 17);
    CHECK(m.has_dirichlet());
}

TEST_CASE("alignment and overlap errors") {
    const Box box = Box::rectangle(-1, 1, 0, 1);
    CHECK_THROWS_AS(build_mesh(box, 2, {patch(BoundaryTag::Dirichlet, "left", 0, 0.3)}), MeshError);
    CHECK_THROWS_AS(build_mesh(box, 0, {}), MeshError);
    CHECK_THROWS_AS(build_mesh(box, 2, {patch(BoundaryTag::Dirichlet, "left", 0, 0.5),
                                        patch(BoundaryTag::NeumannG, "left", 0.25, 1)}),
                    MeshError);
    auto loose = patch(BoundaryTag::Dirichlet, "left", 0, 0.3);
    loose.alignment = Alignment::Midpoint;
    const Mesh m = build_mesh(box, 2, {loose});
    int nd = 0;
    for (const auto& f : m.boundary_facets()) nd += f.tag == BoundaryTag::Dirichlet;
    CHECK(nd == 1);
}

TEST_CASE("tetrahedral cube") {
    const Mesh m = build_mesh(Box::cuboid(0, 1, 0, 1, 0, 1), 1, {});
    CHECK(m.num_nodes() == 27);
    CHECK(m.num_cells() == 48);
    double vol = 0.0;
    for (int c = 0; c < m.num_cells(); ++c) {
        CHECK(m.cell_volume(c) > 0.0);
        vol += m.cell_volume(c);
    }
    CHECK(vol == doctest::Approx(1.0));
    CHECK(m.lumped_mass().sum() == doctest::Approx(1.0));
    CHECK(m.boundary_facets().size() == 48);
}

TEST_CASE("node-to-cell incidence is ascending") {
    const Mesh m = build_mesh(Box::rectangle(0, 1, 0, 1), 2, {});
    const auto& ptr = m.node_cell_offsets();
    const auto& idx = m.node_cells();
    for (int n = 0; n < m.num_nodes(); ++n) {
        for (int k = ptr[n] + 1; k < ptr[n + 1]; ++k) CHECK(idx[k - 1] < idx[k]);
    }
    CHECK(ptr.back() == 3 * m.num_cells());
}
