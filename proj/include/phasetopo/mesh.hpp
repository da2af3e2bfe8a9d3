#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace phasetopo {

/// Axis-aligned box [lo, hi]; the third axis is ignored for dim == 2.
struct Box {
    int dim = 2;
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};

    [[nodiscard]] double measure() const;
    [[nodiscard]] bool contains(const std::array<double, 3>& p, double tol = 1e-12) const;

    static Box rectangle(double x0, double x1, double y0, double y1);
    static Box cuboid(double x0, double x1, double y0, double y1, double z0, double z1);
};

enum class BoundaryTag : std::uint8_t { Neumann0 = 0, Dirichlet = 1, NeumannG = 2 };

/// Face of the bounding box: axis (0,1,2) and low/high end.
struct Side {
    int axis = 0;
    bool high = false;

    static Side parse(const std::string& name);
    [[nodiscard]] std::string name() const;
};

/// How facets are matched to a boundary patch.
enum class Alignment : std::uint8_t {
    /// patch endpoints must coincide with grid lines
    Strict,
    /// a facet belongs to the patch when its centroid lies inside
    Midpoint,
};

/// A tagged rectangle on one side of the box. In 2D only range[0] is used
/// (the tangential interval); in 3D range[0], range[1] are the two
/// tangential axes in increasing axis order.
struct BoundaryPatch {
    BoundaryTag tag = BoundaryTag::Dirichlet;
    Side side;
    std::array<std::array<double, 2>, 2> range{{{0.0, 0.0}, {0.0, 0.0}}};
    std::array<double, 3> traction{0.0, 0.0, 0.0};
    Alignment alignment = Alignment::Strict;
};

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BoundaryFacet {
    std::array<int, 3> nodes{-1, -1, -1};
    BoundaryTag tag = BoundaryTag::Neumann0;
    int patch = -1;
    double measure = 0.0;
};

/// Structured simplicial mesh of a box with grid spacing h = 2^-level.
///
/// Nodes are numbered row-major (x fastest). Each square is cut along the
/// diagonal from its lower-left to its upper-right corner; cubes are split
/// into the six Kuhn tetrahedra sharing the main diagonal. Both splits are
/// nested under uniform refinement, so a coarse P1 function is exactly
/// representable on the next level.
class Mesh {
public:
    using Point = std::array<double, 3>;

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int level() const { return level_; }
    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] const Box& domain() const { return domain_; }
    [[nodiscard]] std::array<int, 3> cells_per_axis() const { return cells_; }

    [[nodiscard]] int num_nodes() const { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] int num_cells() const { return static_cast<int>(cells_nodes_.size()); }
    [[nodiscard]] int nodes_per_cell() const { return dim_ + 1; }

    [[nodiscard]] const Point& node(int n) const { return nodes_[n]; }
    [[nodiscard]] const std::vector<Point>& nodes() const { return nodes_; }
    [[nodiscard]] const std::array<int, 4>& cell(int c) const { return cells_nodes_[c]; }
    [[nodiscard]] double cell_volume(int c) const { return volumes_[c]; }

    /// Gradient of the barycentric function of local vertex a on cell c.
    [[nodiscard]] const Point& grad_lambda(int c, int a) const { return grads_[4 * c + a]; }

    [[nodiscard]] const std::vector<BoundaryFacet>& boundary_facets() const { return facets_; }
    [[nodiscard]] const std::vector<BoundaryPatch>& patches() const { return patches_; }

    /// True for nodes on a Dirichlet facet.
    [[nodiscard]] const std::vector<char>& dirichlet_nodes() const { return dirichlet_; }
    [[nodiscard]] bool has_dirichlet() const;

    /// Diagonal of the lumped mass matrix (row sums of the consistent one).
    [[nodiscard]] const Eigen::VectorXd& lumped_mass() const { return lumped_; }

    /// Cells incident to each node in ascending cell order (CSR layout).
    [[nodiscard]] const std::vector<int>& node_cell_offsets() const { return node_cell_ptr_; }
    [[nodiscard]] const std::vector<int>& node_cells() const { return node_cell_idx_; }

    /// Grid index of a node along each axis.
    [[nodiscard]] std::array<int, 3> grid_index(int n) const;
    [[nodiscard]] int node_at(int i, int j, int k = 0) const;

    /// Returns a copy whose node numbering is permuted: new node perm[n]
    /// is old node n. Geometry and tags are carried along.
    [[nodiscard]] Mesh renumbered(const std::vector<int>& perm) const;

    friend Mesh build_mesh(const Box&, int, const std::vector<BoundaryPatch>&);

private:
    void finalize();

    int dim_ = 2;
    int level_ = 0;
    double h_ = 1.0;
    Box domain_;
    std::array<int, 3> cells_{0, 0, 0};
    std::vector<Point> nodes_;
    std::vector<std::array<int, 4>> cells_nodes_;
    std::vector<double> volumes_;
    std::vector<Point> grads_;
    std::vector<BoundaryFacet> facets_;
    std::vector<BoundaryPatch> patches_;
    std::vector<char> dirichlet_;
    Eigen::VectorXd lumped_;
    std::vector<int> node_cell_ptr_;
    std::vector<int> node_cell_idx_;
    std::vector<std::array<int, 3>> node_grid_;
    std::vector<int> grid_node_;
};

/// Builds the structured mesh of `domain` at the given level. Boundary not
/// covered by a patch is homogeneous Neumann.
///
/// Throws MeshError if level < 1, the box edges are not multiples of h, a
/// strict patch endpoint is off-grid, or two patches claim the same facet.
Mesh build_mesh(const Box& domain, int level, const std::vector<BoundaryPatch>& patches);

/// Node count of the rectangle mesh at a level, without building it.
long long structured_node_count(const Box& domain, int level);

}  // namespace phasetopo
