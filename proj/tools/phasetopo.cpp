#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "checks.hpp"
#include "phasetopo/driver.hpp"

using namespace phasetopo;

namespace {

// Bad input (flags, configuration) exits 2; failed runs and checks exit 1.
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct RunOptions {
    std::string config;
    std::optional<double> eps;
    std::optional<int> level;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<std::string> init;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iter;
    std::optional<double> tol;
    std::optional<int> stride;
    std::vector<int> nested;
    bool serial = false;
    bool no_vtk = false;
    bool no_timing = false;
    bool quiet = false;
};

RunConfig apply(const RunOptions& o) {
    RunConfig c = load_config(o.config);
    if (o.eps) c.cost.eps = *o.eps;
    if (o.level) c.level = *o.level;
    if (o.out) c.output.dir = *o.out;
    if (o.method) c.method = *o.method == "flow" ? Method::GradientFlow : Method::ProjectedGradient;
    if (o.init) {
        c.initial.kind = *o.init == "separated" ? InitialKind::Separated
                       : *o.init == "random"    ? InitialKind::Random
                                                : InitialKind::Constant;
    }
    if (o.seed) c.initial.seed = *o.seed;
    if (o.max_iter) {
        c.optimizer.max_iter = *o.max_iter;
        c.flow.max_steps = *o.max_iter;
    }
    if (o.tol) {
        c.optimizer.tol = *o.tol;
        c.flow.tol = *o.tol;
    }
    if (o.stride) c.output.stride = *o.stride;
    if (!o.nested.empty()) {
        c.nested_levels = o.nested;
        c.nested_tols.assign(o.nested.size(), c.optimizer.tol);
        for (std::size_t i = 0; i + 1 < o.nested.size(); ++i) c.nested_tols[i] = 10.0 * c.optimizer.tol;
    }
    if (o.serial) {
        c.optimizer.kernel = KernelMode::Serial;
        c.flow.kernel = KernelMode::Serial;
    }
    if (o.no_vtk) c.output.vtk = false;
    if (o.no_timing) c.output.timing = false;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-material phase-field topology optimization"};
    app.require_subcommand(1);

    RunOptions ro;
    auto* run = app.add_subcommand("run", "run a preset or configuration file");
    run->add_option("--config,-c", ro.config, "preset name or INI file")->required();
    run->add_option("--eps", ro.eps, "interface width");
    run->add_option("--level", ro.level, "mesh level (h = 2^-level)")->check(CLI::Range(0, 12));
    run->add_option("--out", ro.out, "output directory (below $PHASETOPO_OUTPUT_ROOT unless absolute)");
    run->add_option("--method", ro.method, "pg or flow")->check(CLI::IsMember({"pg", "flow"}));
    run->add_option("--init", ro.init, "initial data")->check(CLI::IsMember({"constant", "separated", "random"}));
    run->add_option("--seed", ro.seed, "seed for random initial data");
    run->add_option("--max-iter", ro.max_iter, "iteration or step limit")->check(CLI::PositiveNumber);
    run->add_option("--tol", ro.tol, "stopping tolerance")->check(CLI::PositiveNumber);
    run->add_option("--stride", ro.stride, "field snapshot every n iterations (0: final only)")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--nested", ro.nested, "nested levels, e.g. --nested 4 5 6");
    run->add_flag("--serial", ro.serial, "serial reference kernels");
    run->add_flag("--no-vtk", ro.no_vtk, "skip VTK snapshots");
    run->add_flag("--no-timing", ro.no_timing, "write 0 for times (byte-identical reruns)");
    run->add_flag("--quiet,-q", ro.quiet, "no progress output");

    std::string show;
    auto* plist = app.add_subcommand("preset-list", "list bundled presets");
    plist->add_option("--show", show, "print the INI text of one preset");

    std::string gc_config = "cantilever_2d";
    int gc_level = 4;
    double gc_eps = 0.08;
    std::uint64_t gc_seed = 1;
    double gc_threshold = 1e-5;
    auto* grad = app.add_subcommand("grad-check", "finite-difference check of the reduced derivative");
    grad->add_option("--config,-c", gc_config, "preset name or INI file");
    grad->add_option("--level", gc_level, "mesh level")->check(CLI::Range(0, 10));
    grad->add_option("--eps", gc_eps, "interface width");
    grad->add_option("--seed", gc_seed, "seed for the field and direction");
    grad->add_option("--threshold", gc_threshold, "largest accepted relative error at t = 1e-5");

    int pt_instances = 100;
    std::uint64_t pt_seed = 1;
    auto* proj = app.add_subcommand("project-test", "compare the projection with the enumeration oracle");
    proj->add_option("--instances,-n", pt_instances, "number of random instances")->check(CLI::PositiveNumber);
    proj->add_option("--seed", pt_seed, "seed");

    std::string dt_config = "drift";
    std::optional<int> dt_level;
    std::vector<double> dt_eps;
    auto* drift = app.add_subcommand("drift-table", "bulk values of the double-well potential as eps decreases");
    drift->add_option("--config,-c", dt_config, "preset name or INI file with a [drift] section");
    drift->add_option("--level", dt_level, "mesh level")->check(CLI::Range(0, 12));
    drift->add_option("--eps", dt_eps, "decreasing eps list (overrides the configuration)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (*run) {
            const RunConfig cfg = apply(ro);
            const RunReport rep = run_config(cfg, ro.quiet ? nullptr : &std::cout);
            return rep.converged || rep.reason.rfind("mechanism stationary", 0) == 0 || rep.reason == "max_iter" ||
                           rep.reason == "max_steps"
                       ? 0
                       : kFailed;
        }
        if (*plist) {
            if (!show.empty()) {
                std::cout << preset_text(show);
                return 0;
            }
            for (const auto& n : preset_names()) std::cout << n << '\n';
            return 0;
        }
        if (*grad) {
            RunConfig cfg = load_config(gc_config);
            cfg.cost.eps = gc_eps;
            const auto g = checks::gradient_check(cfg, gc_level, gc_seed, gc_threshold);
            for (const auto& s : g.samples) {
                std::printf("t = %.0e  fd = %.12e  exact = %.12e  rel. error = %.3e\n", s.t, s.fd, s.exact, s.rel_error);
            }
            std::printf("max FD mismatch %.3e (threshold %.1e), linear decay: %s\n", g.max_rel_error, gc_threshold,
                        g.linear ? "yes" : "no");
            return g.pass ? 0 : kFailed;
        }
        if (*proj) {
            const auto s = checks::projection_oracle_sweep(pt_instances, pt_seed);
            for (const auto& f : s.failures) std::cout << "mismatch: " << f << '\n';
            std::printf("%d instances, %d mismatches, max deviation %.3e, max KKT residual %.3e, %.2f s\n", s.instances,
                        s.mismatches, s.max_error, s.max_kkt, s.seconds);
            return s.mismatches == 0 ? 0 : kFailed;
        }
        if (*drift) {
            RunConfig cfg = load_config(dt_config);
            if (!dt_eps.empty()) cfg.drift_eps = dt_eps;
            cfg.validate();
            const auto rows = checks::drift_table(cfg, dt_level.value_or(-1));
            checks::print_drift_table(std::cout, rows);
            const bool mono = drift_is_monotone(rows);
            std::cout << "plateau strictly decreasing and above 1: " << (mono ? "yes" : "no") << '\n';
            return mono ? 0 : kFailed;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kUsage;
}
