#include "phasetopo/driver.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "phasetopo/io.hpp"

namespace phasetopo {

namespace {

std::string snapshot_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "field_%06d.%s", index, ext);
    return buf;
}

double pin_violation(const PhaseField& phi, const LoadCase& lc) {
    const int last = phi.num_phases() - 1;
    double v = 0.0;
    for (int n = 0; n < phi.num_nodes(); ++n) {
        if (lc.s0[n]) v = std::max(v, std::abs(phi(n, last)));
        if (lc.s1[n]) v = std::max(v, std::abs(phi(n, last) - 1.0));
    }
    return v;
}

class Snapshots {
public:
    Snapshots(const std::filesystem::path& dir, const RunConfig& cfg, const Mesh& mesh)
        : dir_(dir), cfg_(cfg), mesh_(mesh) {}

    void maybe(int index, const PhaseField& phi, const Eigen::VectorXd& u) {
        if (cfg_.output.stride > 0 && index % cfg_.output.stride == 0) write(index, phi, u);
    }

    void write(int index, const PhaseField& phi, const Eigen::VectorXd& u) {
        if (index == last_) return;
        write_field_csv(dir_ / snapshot_name(index, "csv"), mesh_, phi, u);
        if (cfg_.output.vtk) write_vtk(dir_ / snapshot_name(index, "vtk"), mesh_, phi, u);
        last_ = index;
    }

private:
    std::filesystem::path dir_;
    const RunConfig& cfg_;
    const Mesh& mesh_;
    int last_ = -1;
};

}  // namespace

RunReport run_config(const RunConfig& cfg, std::ostream* progress) {
    cfg.validate();
    RunReport rep;
    rep.dir = prepare_output_dir(cfg.output.dir);
    write_text(rep.dir / "config.ini", echo_config(cfg));

    nlohmann::json summary;
    summary["name"] = cfg.name;
    summary["phases"] = cfg.num_phases();
    summary["eps"] = cfg.cost.eps;

    PhaseField final_phi;
    if (cfg.method == Method::ProjectedGradient) {
        summary["method"] = "projected_gradient";
        std::vector<int> levels = cfg.nested_levels;
        std::vector<double> tols = cfg.nested_tols;
        if (levels.empty()) {
            levels = {cfg.level};
            tols = {cfg.optimizer.tol};
        }
        std::unique_ptr<Mesh> prev_mesh;
        PhaseField prev_phi;
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const bool last = li + 1 == levels.size();
            Problem problem = build_problem(cfg, levels[li]);
            for (const auto& w : problem.cost->warnings()) {
                if (progress) *progress << "warning: " << w << '\n';
            }
            PhaseField phi0 = li == 0 ? initial_field(cfg, *problem.mesh)
                                      : prolongate(*prev_mesh, prev_phi, *problem.mesh);
            OptimizerConfig oc = cfg.optimizer;
            oc.tol = tols[li];
            ProjectedGradient opt(problem, oc);
            const std::string log_name =
                last ? "convergence.csv" : "convergence_level" + std::to_string(levels[li]) + ".csv";
            ConvergenceLog log(rep.dir / log_name, cfg.output.timing);
            Snapshots snaps(rep.dir, cfg, *problem.mesh);
            double prev_j = INFINITY;
            const OptimizerResult r = opt.run(std::move(phi0), [&](const IterationRecord& rec, const PhaseField& phi,
                                                                  const Eigen::VectorXd& u) {
                log.write(rec);
                if (rec.parts.total > prev_j) rep.monotone = false;
                prev_j = rec.parts.total;
                rep.simplex_violation = std::max(rep.simplex_violation, rec.simplex_violation);
                rep.mass_violation = std::max(rep.mass_violation, rec.mass_violation);
                rep.pin_violation = std::max(rep.pin_violation, pin_violation(phi, problem.cost->loads()));
                if (last) snaps.maybe(rec.beta > 0.0 ? rec.iter + 1 : rec.iter, phi, u);
                if (progress && (rec.iter % 25 == 0 || rec.beta == 0.0)) {
                    char buf[200];
                    std::snprintf(buf, sizeof buf, "L%d it %4d  J %.8g  |v| %.3e  lambda %.3g  beta %.3g  pdas %d\n",
                                  levels[li], rec.iter, rec.parts.total, rec.v_norm, rec.lambda, rec.beta,
                                  rec.pdas_iters);
                    *progress << buf;
                }
            });
            if (last) {
                snaps.write(r.iterations(), r.phi, r.u);
            } else {
                write_field_csv(rep.dir / ("field_level" + std::to_string(levels[li]) + ".csv"), *problem.mesh, r.phi, r.u);
            }
            rep.levels.push_back({levels[li], r.iterations(), r.seconds, r.parts.total, r.reason});
            rep.seconds += r.seconds;
            rep.parts = r.parts;
            rep.iterations = r.iterations();
            rep.converged = r.converged;
            rep.reason = r.reason;
            rep.mass_violation = std::max(rep.mass_violation, max_mass_violation(r.phi, problem.cost->ops(), problem.masses));
            rep.simplex_violation = std::max(rep.simplex_violation, problem.bounded() ? max_simplex_violation(r.phi) : 0.0);
            rep.pin_violation = std::max(rep.pin_violation, pin_violation(r.phi, problem.cost->loads()));
            summary["nodes"] = problem.mesh->num_nodes();
            summary["warnings"] = problem.cost->warnings();
            prev_phi = r.phi;
            final_phi = r.phi;
            prev_mesh = std::move(problem.mesh);
            problem.cost.reset();
        }
    } else {
        summary["method"] = "gradient_flow";
        Problem problem = build_problem(cfg);
        for (const auto& w : problem.cost->warnings()) {
            if (progress) *progress << "warning: " << w << '\n';
        }
        GradientFlow flow(problem, cfg.flow);
        ConvergenceLog log(rep.dir / "convergence.csv", cfg.output.timing);
        Snapshots snaps(rep.dir, cfg, *problem.mesh);
        double prev_j = INFINITY;
        const FlowResult r = flow.run(initial_field(cfg, *problem.mesh), [&](const FlowRecord& rec, const PhaseField& phi,
                                                                              const Eigen::VectorXd& u) {
            log.write(rec);
            if (rec.parts.total > prev_j) rep.monotone = false;
            prev_j = rec.parts.total;
            rep.simplex_violation = std::max(rep.simplex_violation, rec.simplex_violation);
            rep.mass_violation = std::max(rep.mass_violation, rec.mass_violation);
            rep.pin_violation = std::max(rep.pin_violation, rec.pin_violation);
            snaps.maybe(rec.step, phi, u);
            if (progress && rec.step % 25 == 0) {
                char buf[200];
                std::snprintf(buf, sizeof buf, "step %4d  J %.8g  J0 %.6g  tau %.3e  change %.3e  rejected %d\n",
                              rec.step, rec.parts.total, rec.parts.mechanism, rec.tau, rec.change, rec.rejected);
                *progress << buf;
            }
        });
        const int steps = static_cast<int>(r.history.size());
        snaps.write(steps, r.phi, r.u);
        rep.levels.push_back({cfg.level, steps, r.seconds, r.parts.total, r.reason});
        rep.seconds = r.seconds;
        rep.parts = r.parts;
        rep.iterations = steps;
        rep.converged = r.converged;
        rep.reason = r.reason;
        rep.mass_violation = std::max(rep.mass_violation, max_mass_violation(r.phi, problem.cost->ops(), problem.masses));
        rep.simplex_violation = std::max(rep.simplex_violation, max_simplex_violation(r.phi));
        rep.pin_violation = std::max(rep.pin_violation, pin_violation(r.phi, problem.cost->loads()));
        summary["nodes"] = problem.mesh->num_nodes();
        summary["warnings"] = problem.cost->warnings();
        final_phi = r.phi;
    }

    summary["J"] = rep.parts.total;
    summary["compliance"] = rep.parts.compliance;
    summary["J0"] = rep.parts.mechanism;
    summary["GL_energy"] = rep.parts.perimeter;
    summary["iterations"] = rep.iterations;
    summary["converged"] = rep.converged;
    summary["reason"] = rep.reason;
    summary["seconds"] = cfg.output.timing ? rep.seconds : 0.0;
    summary["max_simplex_violation"] = rep.simplex_violation;
    summary["max_mass_violation"] = rep.mass_violation;
    summary["max_pin_violation"] = rep.pin_violation;
    summary["monotone"] = rep.monotone;
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& l : rep.levels) {
        lv.push_back({{"level", l.level},
                      {"iterations", l.iterations},
                      {"J", l.cost},
                      {"reason", l.reason},
                      {"seconds", cfg.output.timing ? l.seconds : 0.0}});
    }
    summary["levels"] = lv;
    write_text(rep.dir / "summary.json", summary.dump(2) + "\n");
    if (progress) {
        *progress << "done: J = " << rep.parts.total << ", " << rep.iterations << " iterations, " << rep.reason
                  << ", output in " << rep.dir.string() << '\n';
    }
    return rep;
}

}  // namespace phasetopo
