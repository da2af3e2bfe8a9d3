#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phasetopo/grad_flow.hpp"
#include "phasetopo/optimizer.hpp"

namespace phasetopo {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Union of closed intervals on one axis.
using IntervalList = std::vector<std::array<double, 2>>;

/// Axis-aligned region: a point lies inside when each coordinate lies in
/// the interval list of its axis. An empty list means the whole axis.
struct Region {
    std::string name;
    std::array<IntervalList, 3> axes;

    [[nodiscard]] bool contains(const std::array<double, 3>& p, int dim, double tol = 1e-12) const;
};

struct MaterialSpec {
    double mu = 1.0;
    double lambda = 1.0;
};

enum class Method { ProjectedGradient, GradientFlow };
enum class InitialKind { Constant, Separated, Random };

struct InitialSpec {
    InitialKind kind = InitialKind::Constant;
    Eigen::VectorXd value;     // constant mixture; empty selects the masses
    std::uint64_t seed = 1;
};

struct OutputSpec {
    std::string dir;           // relative to the output root unless absolute
    int stride = 0;            // field snapshot every `stride` iterations; 0 = final only
    bool vtk = true;
    bool timing = true;        // false writes 0 in the seconds column
};

/// Everything needed to reconstruct a run.
struct RunConfig {
    std::string name = "run";
    Box domain;
    int level = 4;
    std::vector<std::string> boundary_names;
    std::vector<BoundaryPatch> boundary;

    std::vector<MaterialSpec> materials;  // C^1..C^(N-1)
    MaterialSpec void_template;           // C^N = eps^2 * template
    Interpolation interpolation = Interpolation::Quadratic;

    Eigen::VectorXd masses;
    CostParams cost;
    std::array<double, 3> volume_force{0.0, 0.0, 0.0};
    std::array<double, 3> target{0.0, 0.0, 0.0};
    double weight = 0.0;                  // c, constant on the domain
    std::vector<Region> s0;
    std::vector<Region> s1;
    SolverKind linear_solver = SolverKind::Cholesky;

    Method method = Method::ProjectedGradient;
    OptimizerConfig optimizer;
    FlowConfig flow;
    std::vector<int> nested_levels;       // empty: single level
    std::vector<double> nested_tols;

    InitialSpec initial;
    OutputSpec output;
    std::vector<double> drift_eps;        // eps list for the drift table

    [[nodiscard]] int num_phases() const { return static_cast<int>(materials.size()) + 1; }
    [[nodiscard]] int dim() const { return domain.dim; }

    /// Throws ConfigError naming the violated constraint.
    void validate() const;
};

/// Parses INI text. `source` names the input in error messages.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");

/// A bundled preset name or a path to an INI file.
RunConfig load_config(const std::string& name_or_path);

/// INI text with every default resolved; parse_config(echo_config(c))
/// reproduces c.
std::string echo_config(const RunConfig& cfg);

[[nodiscard]] std::vector<std::string> preset_names();
/// INI text of a bundled preset. Throws ConfigError for unknown names.
std::string preset_text(const std::string& name);

/// Mesh, cost and masses on the configured level (or `level` if >= 0).
Problem build_problem(const RunConfig& cfg, int level = -1);

/// Initial field per cfg.initial; not necessarily feasible.
PhaseField initial_field(const RunConfig& cfg, const Mesh& mesh);

}  // namespace phasetopo
