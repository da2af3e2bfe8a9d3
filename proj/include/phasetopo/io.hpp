#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "phasetopo/grad_flow.hpp"
#include "phasetopo/optimizer.hpp"

namespace phasetopo {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// $PHASETOPO_OUTPUT_ROOT, or "output" when unset.
std::filesystem::path output_root();

/// `dir` itself when absolute, otherwise below output_root(). Creates it.
std::filesystem::path prepare_output_dir(const std::string& dir);

/// Writes convergence.csv rows as records arrive.
class ConvergenceLog {
public:
    static constexpr const char* kHeader =
        "iter,J,compliance,J0,GL_energy,v_norm_scaled,lambda,beta_step,pdas_iters,ls_trials,seconds";

    ConvergenceLog(const std::filesystem::path& path, bool timing = true);

    void write(const IterationRecord& r);
    /// Flow steps map onto the same columns: v_norm_scaled holds
    /// |phi_{n+1} - phi_n|_{L2} / tau, lambda holds tau, beta_step is 1 and
    /// ls_trials counts the rejected trials plus the accepted one.
    void write(const FlowRecord& r);

private:
    std::ofstream out_;
    bool timing_;
};

/// Nodal CSV with header x,y[,z],phi_1..phi_N,u_x,u_y[,u_z] in node order.
void write_field_csv(const std::filesystem::path& path, const Mesh& mesh, const PhaseField& phi,
                     const Eigen::VectorXd& u);

/// Legacy ASCII VTK unstructured grid with point data phi_1..phi_N and u.
void write_vtk(const std::filesystem::path& path, const Mesh& mesh, const PhaseField& phi, const Eigen::VectorXd& u);

/// Writes text to a file, throwing IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace phasetopo
