#include "phasetopo/mesh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace phasetopo {

namespace {

constexpr double kGridTol = 1e-9;

int cells_along(double lo, double hi, double h, const char* axis) {
    const double n = (hi - lo) / h;
    const double r = std::round(n);
    if (r < 1.0 || std::abs(n - r) > kGridTol * std::max(1.0, r)) {
        throw MeshError(std::string("domain extent along ") + axis +
                        " is not a positive multiple of h");
    }
    return static_cast<int>(r);
}

bool on_grid(double v, double lo, double h) {
    const double t = (v - lo) / h;
    return std::abs(t - std::round(t)) <= kGridTol * std::max(1.0, std::abs(t));
}

// Signed volume of a simplex given its vertices (triangle area or tet volume).
double signed_volume(int dim, const std::array<Mesh::Point, 4>& p) {
    if (dim == 2) {
        return 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) -
                      (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    }
    const double a[3] = {p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]};
    const double b[3] = {p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]};
    const double c[3] = {p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]};
    return (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
            a[2] * (b[0] * c[1] - b[1] * c[0])) /
           6.0;
}

std::array<int, 2> tangential_axes(int dim, int axis) {
    if (dim == 2) return {1 - axis, -1};
    std::array<int, 2> t{};
    int k = 0;
    for (int a = 0; a < 3; ++a) {
        if (a != axis) t[k++] = a;
    }
    return t;
}

}  // namespace

double Box::measure() const {
    double m = 1.0;
    for (int a = 0; a < dim; ++a) m *= hi[a] - lo[a];
    return m;
}

bool Box::contains(const std::array<double, 3>& p, double tol) const {
    for (int a = 0; a < dim; ++a) {
        if (p[a] < lo[a] - tol || p[a] > hi[a] + tol) return false;
    }
    return true;
}

Box Box::rectangle(double x0, double x1, double y0, double y1) {
    return Box{2, {x0, y0, 0.0}, {x1, y1, 0.0}};
}

Box Box::cuboid(double x0, double x1, double y0, double y1, double z0, double z1) {
    return Box{3, {x0, y0, z0}, {x1, y1, z1}};
}

Side Side::parse(const std::string& name) {
    if (name == "left") return {0, false};
    if (name == "right") return {0, true};
    if (name == "bottom") return {1, false};
    if (name == "top") return {1, true};
    if (name == "front") return {2, false};
    if (name == "back") return {2, true};
    throw MeshError("unknown boundary side '" + name + "'");
}

std::string Side::name() const {
    static const char* names[3][2] = {{"left", "right"}, {"bottom", "top"}, {"front", "back"}};
    return names[axis][high ? 1 : 0];
}

bool Mesh::has_dirichlet() const {
    return std::any_of(dirichlet_.begin(), dirichlet_.end(), [](char c) { return c != 0; });
}

std::array<int, 3> Mesh::grid_index(int n) const { return node_grid_[n]; }

int Mesh::node_at(int i, int j, int k) const {
    const int nx = cells_[0] + 1;
    const int ny = cells_[1] + 1;
    return grid_node_[(static_cast<long long>(k) * ny + j) * nx + i];
}

void Mesh::finalize() {
    const int nn = num_nodes();
    const int nc = num_cells();
    const int nv = dim_ + 1;

    volumes_.assign(nc, 0.0);
    grads_.assign(4 * static_cast<std::size_t>(nc), Point{0.0, 0.0, 0.0});
    lumped_ = Eigen::VectorXd::Zero(nn);

    for (int c = 0; c < nc; ++c) {
        std::array<Point, 4> p{};
        for (int a = 0; a < nv; ++a) p[a] = nodes_[cells_nodes_[c][a]];
        const double vol = signed_volume(dim_, p);
        volumes_[c] = vol;

        // Barycentric gradients: rows of the inverse of the edge matrix.
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3> J(dim_, dim_);
        for (int a = 0; a < dim_; ++a) {
            for (int r = 0; r < dim_; ++r) J(r, a) = p[a + 1][r] - p[0][r];
        }
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3> Jinv = J.inverse();
        for (int a = 1; a < nv; ++a) {
            for (int r = 0; r < dim_; ++r) grads_[4 * c + a][r] = Jinv(a - 1, r);
        }
        for (int r = 0; r < dim_; ++r) {
            double s = 0.0;
            for (int a = 1; a < nv; ++a) s += grads_[4 * c + a][r];
            grads_[4 * c][r] = -s;
        }
        for (int a = 0; a < nv; ++a) lumped_[cells_nodes_[c][a]] += vol / nv;
    }

    node_cell_ptr_.assign(nn + 1, 0);
    for (int c = 0; c < nc; ++c) {
        for (int a = 0; a < nv; ++a) ++node_cell_ptr_[cells_nodes_[c][a] + 1];
    }
    std::partial_sum(node_cell_ptr_.begin(), node_cell_ptr_.end(), node_cell_ptr_.begin());
    node_cell_idx_.assign(node_cell_ptr_.back(), 0);
    std::vector<int> fill(node_cell_ptr_.begin(), node_cell_ptr_.end() - 1);
    for (int c = 0; c < nc; ++c) {
        for (int a = 0; a < nv; ++a) node_cell_idx_[fill[cells_nodes_[c][a]]++] = c;
    }

    dirichlet_.assign(nn, 0);
    for (const auto& f : facets_) {
        if (f.tag != BoundaryTag::Dirichlet) continue;
        for (int a = 0; a < dim_; ++a) dirichlet_[f.nodes[a]] = 1;
    }
}

Mesh Mesh::renumbered(const std::vector<int>& perm) const {
    const int nn = num_nodes();
    if (static_cast<int>(perm.size()) != nn) throw MeshError("permutation size mismatch");
    Mesh m = *this;
    for (int n = 0; n < nn; ++n) {
        m.nodes_[perm[n]] = nodes_[n];
        m.node_grid_[perm[n]] = node_grid_[n];
    }
    for (auto& g : m.grid_node_) g = perm[g];
    for (auto& c : m.cells_nodes_) {
        for (int a = 0; a < dim_ + 1; ++a) c[a] = perm[c[a]];
    }
    for (auto& f : m.facets_) {
        for (int a = 0; a < dim_; ++a) f.nodes[a] = perm[f.nodes[a]];
    }
    m.finalize();
    return m;
}

long long structured_node_count(const Box& domain, int level) {
    const double h = std::ldexp(1.0, -level);
    long long count = 1;
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < domain.dim; ++a) {
        count *= cells_along(domain.lo[a], domain.hi[a], h, names[a]) + 1;
    }
    return count;
}

Mesh build_mesh(const Box& domain, int level, const std::vector<BoundaryPatch>& patches) {
    if (level < 1) throw MeshError("mesh level must be >= 1");
    if (domain.dim != 2 && domain.dim != 3) throw MeshError("only 2D and 3D boxes are supported");

    Mesh m;
    m.dim_ = domain.dim;
    m.level_ = level;
    m.h_ = std::ldexp(1.0, -level);
    m.domain_ = domain;
    m.patches_ = patches;

    const int dim = domain.dim;
    const double h = m.h_;
    const char* names[3] = {"x", "y", "z"};
    m.cells_ = {0, 0, 0};
    for (int a = 0; a < dim; ++a) m.cells_[a] = cells_along(domain.lo[a], domain.hi[a], h, names[a]);
    const int nx = m.cells_[0] + 1;
    const int ny = m.cells_[1] + 1;
    const int nz = dim == 3 ? m.cells_[2] + 1 : 1;

    m.nodes_.reserve(static_cast<std::size_t>(nx) * ny * nz);
    m.node_grid_.reserve(m.nodes_.capacity());
    m.grid_node_.resize(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Mesh::Point p{domain.lo[0] + i * h, domain.lo[1] + j * h,
                              dim == 3 ? domain.lo[2] + k * h : 0.0};
                // Snap the far end exactly onto the box.
                if (i == nx - 1) p[0] = domain.hi[0];
                if (j == ny - 1) p[1] = domain.hi[1];
                if (dim == 3 && k == nz - 1) p[2] = domain.hi[2];
                m.grid_node_[(static_cast<std::size_t>(k) * ny + j) * nx + i] =
                    static_cast<int>(m.nodes_.size());
                m.nodes_.push_back(p);
                m.node_grid_.push_back({i, j, k});
            }
        }
    }
    auto id = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };

    auto push_cell = [&](std::array<int, 4> c) {
        std::array<Mesh::Point, 4> p{};
        for (int a = 0; a < dim + 1; ++a) p[a] = m.nodes_[c[a]];
        if (signed_volume(dim, p) < 0.0) std::swap(c[dim - 1], c[dim]);
        m.cells_nodes_.push_back(c);
    };

    if (dim == 2) {
        m.cells_nodes_.reserve(2 * static_cast<std::size_t>(m.cells_[0]) * m.cells_[1]);
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                const int n00 = id(i, j, 0), n10 = id(i + 1, j, 0);
                const int n01 = id(i, j + 1, 0), n11 = id(i + 1, j + 1, 0);
                push_cell({n00, n10, n11, -1});
                push_cell({n00, n11, n01, -1});
            }
        }
    } else {
        static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        m.cells_nodes_.reserve(6 * static_cast<std::size_t>(m.cells_[0]) * m.cells_[1] * m.cells_[2]);
        for (int k = 0; k + 1 < nz; ++k) {
            for (int j = 0; j + 1 < ny; ++j) {
                for (int i = 0; i + 1 < nx; ++i) {
                    for (const auto& pm : perms) {
                        std::array<int, 3> o{i, j, k};
                        std::array<int, 4> c{};
                        c[0] = id(o[0], o[1], o[2]);
                        for (int s = 0; s < 3; ++s) {
                            ++o[pm[s]];
                            c[s + 1] = id(o[0], o[1], o[2]);
                        }
                        push_cell(c);
                    }
                }
            }
        }
    }

    // Boundary facets, side by side.
    for (int axis = 0; axis < dim; ++axis) {
        for (int hi = 0; hi < 2; ++hi) {
            const int fixed = hi ? m.cells_[axis] : 0;
            const auto t = tangential_axes(dim, axis);
            if (dim == 2) {
                for (int s = 0; s < m.cells_[t[0]]; ++s) {
                    std::array<int, 3> g0{}, g1{};
                    g0[axis] = fixed;
                    g1[axis] = fixed;
                    g0[t[0]] = s;
                    g1[t[0]] = s + 1;
                    BoundaryFacet f;
                    f.nodes = {id(g0[0], g0[1], 0), id(g1[0], g1[1], 0), -1};
                    f.measure = h;
                    m.facets_.push_back(f);
                }
            } else {
                for (int s1 = 0; s1 < m.cells_[t[1]]; ++s1) {
                    for (int s0 = 0; s0 < m.cells_[t[0]]; ++s0) {
                        auto g = [&](int d0, int d1) {
                            std::array<int, 3> q{};
                            q[axis] = fixed;
                            q[t[0]] = s0 + d0;
                            q[t[1]] = s1 + d1;
                            return id(q[0], q[1], q[2]);
                        };
                        // Split along the min-max diagonal, matching the Kuhn tets.
                        BoundaryFacet a, b;
                        a.nodes = {g(0, 0), g(1, 0), g(1, 1)};
                        b.nodes = {g(0, 0), g(1, 1), g(0, 1)};
                        a.measure = b.measure = 0.5 * h * h;
                        m.facets_.push_back(a);
                        m.facets_.push_back(b);
                    }
                }
            }
        }
    }

    // Validate and apply patches.
    for (std::size_t p = 0; p < patches.size(); ++p) {
        const auto& patch = patches[p];
        if (patch.side.axis >= dim) throw MeshError("patch side not valid for this dimension");
        const auto t = tangential_axes(dim, patch.side.axis);
        for (int r = 0; r < dim - 1; ++r) {
            const auto& rg = patch.range[r];
            if (rg[1] < rg[0]) throw MeshError("patch range is reversed");
            if (patch.alignment == Alignment::Strict &&
                (!on_grid(rg[0], domain.lo[t[r]], h) || !on_grid(rg[1], domain.lo[t[r]], h))) {
                throw MeshError("boundary patch endpoint is not aligned with the grid at level " +
                                std::to_string(level));
            }
        }
    }
    for (auto& f : m.facets_) {
        Mesh::Point centroid{0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) {
            for (int r = 0; r < 3; ++r) centroid[r] += m.nodes_[f.nodes[a]][r] / dim;
        }
        for (std::size_t p = 0; p < patches.size(); ++p) {
            const auto& patch = patches[p];
            const int axis = patch.side.axis;
            const double plane = patch.side.high ? domain.hi[axis] : domain.lo[axis];
            if (std::abs(centroid[axis] - plane) > 1e-12) continue;
            const auto t = tangential_axes(dim, axis);
            bool inside = true;
            for (int r = 0; r < dim - 1; ++r) {
                const double v = centroid[t[r]];
                inside = inside && v >= patch.range[r][0] - 1e-12 && v <= patch.range[r][1] + 1e-12;
            }
            if (!inside) continue;
            if (f.patch >= 0) {
                throw MeshError("boundary patches " + std::to_string(f.patch) + " and " +
                                std::to_string(p) + " overlap");
            }
            f.patch = static_cast<int>(p);
            f.tag = patch.tag;
        }
    }

    m.finalize();
    return m;
}

}  // namespace phasetopo
