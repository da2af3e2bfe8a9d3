#include "phasetopo/io.hpp"

#include <cstdio>
#include <cstdlib>

namespace phasetopo {

namespace {

std::ofstream open_file(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

// Fixed formatting so identical runs give identical bytes.
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

}  // namespace

std::filesystem::path output_root() {
    const char* env = std::getenv("PHASETOPO_OUTPUT_ROOT");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("output");
}

std::filesystem::path prepare_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (!p.is_absolute()) p = output_root() / p;
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec || !std::filesystem::is_directory(p)) throw IoError("cannot create output directory " + p.string());
    return p;
}

ConvergenceLog::ConvergenceLog(const std::filesystem::path& path, bool timing)
    : out_(open_file(path)), timing_(timing) {
    out_ << kHeader << '\n';
}

void ConvergenceLog::write(const IterationRecord& r) {
    out_ << r.iter << ',' << num(r.parts.total) << ',' << num(r.parts.compliance) << ',' << num(r.parts.mechanism)
         << ',' << num(r.parts.perimeter) << ',' << num(r.v_norm) << ',' << num(r.lambda) << ',' << num(r.beta) << ','
         << r.pdas_iters << ',' << r.ls_trials << ',' << num(timing_ ? r.seconds : 0.0) << '\n';
    if (!out_) throw IoError("convergence log write failed");
}

void ConvergenceLog::write(const FlowRecord& r) {
    out_ << r.step << ',' << num(r.parts.total) << ',' << num(r.parts.compliance) << ',' << num(r.parts.mechanism)
         << ',' << num(r.parts.perimeter) << ',' << num(r.change) << ',' << num(r.tau) << ',' << num(r.tau > 0.0 ? 1.0 : 0.0)
         << ',' << r.pdas_iters << ',' << r.rejected + 1 << ',' << num(timing_ ? r.seconds : 0.0) << '\n';
    if (!out_) throw IoError("convergence log write failed");
}

void write_field_csv(const std::filesystem::path& path, const Mesh& mesh, const PhaseField& phi,
                     const Eigen::VectorXd& u) {
    const int dim = mesh.dim();
    if (phi.num_nodes() != mesh.num_nodes() || u.size() != static_cast<Eigen::Index>(mesh.num_nodes()) * dim) {
        throw IoError("field output: sizes do not match the mesh");
    }
    auto out = open_file(path);
    const char* axes[3] = {"x", "y", "z"};
    for (int d = 0; d < dim; ++d) out << (d ? "," : "") << axes[d];
    for (int i = 0; i < phi.num_phases(); ++i) out << ",phi_" << i + 1;
    for (int d = 0; d < dim; ++d) out << ",u_" << axes[d];
    out << '\n';
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        const auto& x = mesh.node(n);
        for (int d = 0; d < dim; ++d) out << (d ? "," : "") << num(x[d]);
        for (int i = 0; i < phi.num_phases(); ++i) out << ',' << num(phi(n, i));
        for (int d = 0; d < dim; ++d) out << ',' << num(u[n * dim + d]);
        out << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh, const PhaseField& phi, const Eigen::VectorXd& u) {
    const int dim = mesh.dim();
    if (phi.num_nodes() != mesh.num_nodes() || u.size() != static_cast<Eigen::Index>(mesh.num_nodes()) * dim) {
        throw IoError("vtk output: sizes do not match the mesh");
    }
    auto out = open_file(path);
    const int nn = mesh.num_nodes(), nc = mesh.num_cells(), nv = mesh.nodes_per_cell();
    out << "# vtk DataFile Version 3.0\nphasetopo\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nn << " double\n";
    for (int n = 0; n < nn; ++n) {
        const auto& x = mesh.node(n);
        out << num(x[0]) << ' ' << num(x[1]) << ' ' << num(dim == 3 ? x[2] : 0.0) << '\n';
    }
    out << "CELLS " << nc << ' ' << nc * (nv + 1) << '\n';
    for (int c = 0; c < nc; ++c) {
        out << nv;
        for (int a = 0; a < nv; ++a) out << ' ' << mesh.cell(c)[a];
        out << '\n';
    }
    // 5 = VTK_TRIANGLE, 10 = VTK_TETRA
    out << "CELL_TYPES " << nc << '\n';
    for (int c = 0; c < nc; ++c) out << (dim == 2 ? 5 : 10) << '\n';
    out << "POINT_DATA " << nn << '\n';
    for (int i = 0; i < phi.num_phases(); ++i) {
        out << "SCALARS phi_" << i + 1 << " double 1\nLOOKUP_TABLE default\n";
        for (int n = 0; n < nn; ++n) out << num(phi(n, i)) << '\n';
    }
    out << "VECTORS u double\n";
    for (int n = 0; n < nn; ++n) {
        out << num(u[n * dim]) << ' ' << num(u[n * dim + 1]) << ' ' << num(dim == 3 ? u[n * dim + 2] : 0.0) << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_file(path);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace phasetopo
