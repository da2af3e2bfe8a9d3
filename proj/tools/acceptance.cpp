// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 when
// the harness itself ran; `--strict` makes any FAIL a nonzero exit.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "checks.hpp"
#include "phasetopo/driver.hpp"

using namespace phasetopo;

namespace {

double now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Descent and feasibility over every optimizer run made here.
struct Invariants {
    int runs = 0;
    std::vector<std::string> violations;

    void record(const std::string& label, const OptimizerResult& r) {
        ++runs;
        const auto& h = r.history;
        for (std::size_t k = 0; k < h.size(); ++k) {
            std::ostringstream os;
            os << label << " iteration " << h[k].iter << ": ";
            if (h[k].simplex_violation > 1e-9) violations.push_back(os.str() + "simplex bounds");
            if (h[k].mass_violation > 1e-9) violations.push_back(os.str() + "masses");
            if (k + 1 < h.size() && !(h[k + 1].parts.total < h[k].parts.total)) {
                violations.push_back(os.str() + "J did not decrease");
            }
        }
        if (!h.empty() && h.back().beta > 0.0 && !(r.parts.total < h.back().parts.total)) {
            violations.push_back(label + ": last step did not decrease J");
        }
        if (max_simplex_violation(r.phi) > 1e-9) violations.push_back(label + ": final simplex bounds");
    }
};

struct Cantilever {
    RunConfig cfg = load_config("cantilever_2d");

    OptimizerResult run(int level, double eps, bool scaled, Invariants& inv, int max_iter = 5000) const {
        RunConfig c = cfg;
        c.cost.eps = eps;
        Problem p = build_problem(c, level);
        OptimizerConfig oc = c.optimizer;
        oc.scaled = scaled;
        oc.max_iter = max_iter;
        ProjectedGradient opt(p, oc);
        const OptimizerResult r = opt.run(initial_field(c, *p.mesh));
        std::ostringstream label;
        label << "cantilever L" << level << " eps " << eps << (scaled ? "" : " unscaled");
        inv.record(label.str(), r);
        std::printf("    %-34s %5d iterations  J %.6f  %.1f s  (%s)\n", label.str().c_str(), r.iterations(),
                    r.parts.total, r.seconds, r.reason.c_str());
        std::fflush(stdout);
        return r;
    }
};

Outcome dof_counts() {
    const double t0 = now();
    const long long expected[5] = {561, 2145, 8385, 33153, 131841};
    std::ostringstream os;
    bool ok = true;
    for (int l = 4; l <= 8; ++l) {
        const Mesh m = build_mesh(Box::rectangle(-1, 1, 0, 1), l, {});
        os << (l > 4 ? ", " : "") << "L" << l << ": " << m.num_nodes();
        ok = ok && m.num_nodes() == expected[l - 4];
    }
    const double dt = now() - t0;
    os << " (" << dt << " s)";
    return {ok && dt < 1.0, os.str()};
}

Outcome gradient() {
    const double t0 = now();
    RunConfig cfg = load_config("cantilever_2d");
    cfg.cost.eps = 0.08;
    const auto g = checks::gradient_check(cfg, 4, 1);
    const double dt = now() - t0;
    std::ostringstream os;
    for (const auto& s : g.samples) os << "t=" << s.t << ": " << s.rel_error << "  ";
    os << "(" << dt << " s)";
    return {g.pass && dt < 60.0, os.str()};
}

Outcome oracle() {
    const auto s = checks::projection_oracle_sweep(100, 2024);
    for (const auto& f : s.failures) std::printf("    mismatch: %s\n", f.c_str());
    std::ostringstream os;
    os << s.instances << " instances, " << s.mismatches << " mismatches, max deviation " << s.max_error
       << ", max KKT residual " << s.max_kkt << " (" << s.seconds << " s)";
    return {s.mismatches == 0 && s.max_error < 1e-8 && s.max_kkt < 1e-9 && s.seconds < 120.0, os.str()};
}

Outcome interpolation() {
    const double t0 = now();
    const RunConfig cfg = load_config("cantilever_3material");
    bool ok = true;
    double worst = 0.0;
    for (auto scheme : {Interpolation::Quadratic, Interpolation::Linear}) {
        RunConfig c = cfg;
        c.interpolation = scheme;
        const Problem p = build_problem(c, 3);
        const MaterialSet& ms = p.cost->materials();
        const int n = ms.num_phases();
        for (int k = 0; k < n; ++k) {
            std::vector<double> e(n, 0.0);
            e[k] = 1.0;
            ok = ok && interpolate(ms, e).voigt == ms.phase(k).voigt;
        }
        if (scheme != Interpolation::Quadratic) continue;
        const int soft = ms.stiffness_order().back();
        std::vector<double> e(n, 0.0);
        e[soft] = 1.0;
        const double scale = ms.phase(ms.stiffness_order().front()).voigt.cwiseAbs().maxCoeff();
        for (int i = 0; i < n; ++i) {
            if (i == soft) continue;
            std::vector<double> h(n, 0.0);
            h[i] = 1.0;
            h[soft] = -1.0;
            worst = std::max(worst, interpolate_derivative(ms, e, h).voigt.cwiseAbs().maxCoeff() / scale);
        }
    }
    const double dt = now() - t0;
    std::ostringstream os;
    os << "pure phases exact: " << (ok ? "yes" : "no") << ", scaled derivative at the softest phase " << worst << " ("
       << dt << " s)";
    return {ok && worst < 1e-12 && dt < 1.0, os.str()};
}

Outcome drift() {
    const RunConfig cfg = load_config("drift");
    const auto rows = checks::drift_table(cfg);
    std::ostringstream table;
    checks::print_drift_table(table, rows);
    std::istringstream is(table.str());
    for (std::string line; std::getline(is, line);) std::printf("    %s\n", line.c_str());
    bool ok = drift_is_monotone(rows) && rows.size() == 3;
    double first = NAN;
    for (const auto& r : rows) {
        if (std::abs(r.eps - 0.02) < 1e-12) first = r.plateau;
    }
    ok = ok && first > 1.15;
    std::ostringstream os;
    os << "plateaus";
    for (const auto& r : rows) os << " " << r.plateau;
    os << ", strictly decreasing above 1: " << (drift_is_monotone(rows) ? "yes" : "no");
    return {ok, os.str()};
}

// Fraction of the phase-1 mass within `dist` of the boundary.
double boundary_fraction(const Mesh& m, const PhaseField& phi, double dist) {
    const auto& box = m.domain();
    double near = 0.0, total = 0.0;
    for (int n = 0; n < m.num_nodes(); ++n) {
        const auto& x = m.node(n);
        double d = INFINITY;
        for (int a = 0; a < m.dim(); ++a) d = std::min({d, x[a] - box.lo[a], box.hi[a] - x[a]});
        const double w = m.lumped_mass()[n] * phi(n, 0);
        total += w;
        if (d <= dist + 1e-12) near += w;
    }
    return near / total;
}

Outcome mechanism() {
    const RunConfig cfg = load_config("push_3phase");
    Problem p = build_problem(cfg);
    GradientFlow flow(p, cfg.flow);
    const int last = cfg.num_phases() - 1;
    double pin = 0.0;
    auto observe = [&](const FlowRecord&, const PhaseField& phi, const Eigen::VectorXd&) {
        for (int n = 0; n < phi.num_nodes(); ++n) {
            if (p.cost->loads().s0[n]) pin = std::max(pin, std::abs(phi(n, last)));
        }
    };
    const FlowResult r = flow.run(initial_field(cfg, *p.mesh), observe);
    observe({}, r.phi, r.u);

    const bool completed = r.converged || r.reason.rfind("mechanism stationary", 0) == 0 || r.reason == "max_steps";
    bool monotone = true;
    double mass = 0.0;
    for (std::size_t k = 0; k < r.history.size(); ++k) {
        mass = std::max(mass, r.history[k].mass_violation);
        if (k > 0 && r.history[k].parts.mechanism > r.history[k - 1].parts.mechanism) monotone = false;
    }
    if (!r.history.empty() && r.parts.mechanism > r.history.back().parts.mechanism) monotone = false;
    mass = std::max(mass, max_mass_violation(r.phi, p.cost->ops(), p.masses));
    const Eigen::Vector3d expected(0.35, 0.15, 0.5);
    const bool masses_ok = (p.masses.m - expected).cwiseAbs().maxCoeff() == 0.0 && mass <= 1e-9;
    const double frac = boundary_fraction(*p.mesh, r.phi, 0.3);

    std::printf("    %zu steps, %s, J %.6f, J0 %.6g (start %.6g), %.1f s\n", r.history.size(), r.reason.c_str(),
                r.parts.total, r.parts.mechanism, r.history.empty() ? NAN : r.history.front().parts.mechanism,
                r.seconds);
    std::ostringstream os;
    os << "completed: " << (completed ? "yes" : "no") << ", J0 monotone: " << (monotone ? "yes" : "no")
       << ", mass violation " << mass << ", S0 pin violation " << pin << ", phase-1 mass within 0.3 of the boundary "
       << frac;
    return {completed && monotone && masses_ok && pin == 0.0 && frac >= 0.6, os.str()};
}

Outcome local_minima(Invariants& inv) {
    const RunConfig base = load_config("cantilever_3material");
    std::vector<double> js;
    bool ok = true;
    for (auto kind : {InitialKind::Constant, InitialKind::Separated, InitialKind::Random}) {
        RunConfig c = base;
        c.initial.kind = kind;
        Problem p = build_problem(c);
        ProjectedGradient opt(p, c.optimizer);
        const OptimizerResult r = opt.run(initial_field(c, *p.mesh));
        const char* name = kind == InitialKind::Constant ? "constant" : kind == InitialKind::Separated ? "separated"
                                                                                                      : "random";
        inv.record(std::string("three-phase cantilever, ") + name, r);
        std::printf("    %-10s %5d iterations  J %.6f  %.1f s  (%s)\n", name, r.iterations(), r.parts.total, r.seconds,
                    r.reason.c_str());
        std::fflush(stdout);
        ok = ok && r.converged && max_simplex_violation(r.phi) < 1e-9 &&
             max_mass_violation(r.phi, p.cost->ops(), p.masses) < 1e-9;
        js.push_back(r.parts.total);
    }
    double min_gap = INFINITY;
    for (std::size_t a = 0; a < js.size(); ++a) {
        for (std::size_t b = a + 1; b < js.size(); ++b) {
            min_gap = std::min(min_gap, std::abs(js[a] - js[b]) / std::min(js[a], js[b]));
        }
    }
    std::ostringstream os;
    os << "J = " << js[0] << " / " << js[1] << " / " << js[2] << ", smallest pairwise relative difference " << min_gap;
    return {ok && min_gap > 1e-3, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    bool strict = false;
    std::vector<int> only;
    app.add_flag("--strict", strict, "exit 1 if any criterion fails");
    app.add_option("--only", only, "run only these criteria (1-11)");
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int k) { return selected.empty() || selected.count(k); };

    std::map<int, Outcome> out;
    const char* names[12] = {"",
                             "DOF reproduction",
                             "gradient correctness",
                             "projection oracle",
                             "mesh-independent iterations",
                             "eps-independence of the scaled method",
                             "descent and feasibility invariants",
                             "interpolation properties",
                             "double-well drift",
                             "nested iteration speedup",
                             "compliant mechanism properties",
                             "local-minima sensitivity"};
    auto report = [&](int k, const Outcome& o) {
        out[k] = o;
        std::printf("[%2d] %s %s: %s\n", k, o.pass ? "PASS" : "FAIL", names[k], o.detail.c_str());
        std::fflush(stdout);
    };
    auto guarded = [&](int k, const std::function<Outcome()>& f) {
        if (!wanted(k)) return;
        std::printf("-- %d. %s\n", k, names[k]);
        std::fflush(stdout);
        try {
            report(k, f());
        } catch (const std::exception& e) {
            report(k, {false, std::string("error: ") + e.what()});
        }
    };

    Invariants inv;
    const Cantilever cant;
    guarded(1, dof_counts);
    guarded(2, gradient);
    guarded(3, oracle);
    guarded(7, interpolation);

    // Shared cantilever runs: eps 0.04 on L4..6 feeds criteria 4, 5 and 9.
    std::map<int, OptimizerResult> by_level;
    guarded(4, [&]() -> Outcome {
        std::vector<int> counts;
        bool ok = true;
        for (int l = 4; l <= 6; ++l) {
            by_level[l] = cant.run(l, 0.04, true, inv);
            ok = ok && by_level[l].converged;
            counts.push_back(by_level[l].iterations());
        }
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        std::ostringstream os;
        os << "iterations " << counts[0] << " / " << counts[1] << " / " << counts[2] << ", max/min "
           << double(*hi) / *lo;
        return {ok && *lo >= 50 && *hi <= 1500 && double(*hi) / *lo < 4.0, os.str()};
    });
    guarded(5, [&]() -> Outcome {
        std::map<double, int> counts;
        bool ok = true;
        for (double eps : {0.08, 0.04, 0.02}) {
            if (eps == 0.04 && by_level.count(6)) {
                counts[eps] = by_level[6].iterations();
                continue;
            }
            const OptimizerResult r = cant.run(6, eps, true, inv);
            ok = ok && r.converged;
            counts[eps] = r.iterations();
        }
        const OptimizerResult u = cant.run(6, 0.02, false, inv, 20000);
        ok = ok && u.converged;
        int lo = INT32_MAX, hi = 0;
        for (const auto& [e, n] : counts) {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        const double ratio = double(u.iterations()) / counts[0.02];
        std::ostringstream os;
        os << "scaled iterations (eps 0.08/0.04/0.02) " << counts[0.08] << " / " << counts[0.04] << " / "
           << counts[0.02] << ", spread " << double(hi) / lo << "; unscaled at eps 0.02: " << u.iterations() << " ("
           << ratio << "x)";
        return {ok && double(hi) / lo < 3.0 && ratio > 3.0, os.str()};
    });
    guarded(9, [&]() -> Outcome {
        if (!by_level.count(6)) by_level[6] = cant.run(6, 0.04, true, inv);
        const OptimizerResult& direct = by_level[6];
        RunConfig c = cant.cfg;
        c.cost.eps = 0.04;
        const std::vector<int> levels{4, 5, 6};
        const std::vector<double> tols{c.optimizer.tol, c.optimizer.tol, c.optimizer.tol};
        const double t0 = now();
        const auto nested = nested_run([&](int l) { return build_problem(c, l); },
                                       [&](const Problem& p) { return initial_field(c, *p.mesh); }, levels, tols,
                                       c.optimizer);
        const double t_nested = now() - t0;
        bool ok = direct.converged;
        std::ostringstream os;
        os << "levels";
        for (const auto& n : nested) {
            inv.record("nested L" + std::to_string(n.level), n.result);
            ok = ok && n.result.converged && n.result.iterations() <= c.optimizer.max_iter;
            os << " L" << n.level << ": " << n.result.iterations() << " it";
        }
        const int coarse = nested.front().result.iterations();
        const int finest = nested.back().result.iterations();
        const double share = t_nested / direct.seconds;
        os << "; nested " << t_nested << " s vs direct " << direct.seconds << " s (" << 100.0 * share << "%)";
        return {ok && nested.back().result.history.back().v_norm < c.optimizer.tol && finest <= coarse &&
                    share < 0.5,
                os.str()};
    });
    guarded(8, drift);
    guarded(10, mechanism);
    guarded(11, [&] { return local_minima(inv); });
    guarded(6, [&]() -> Outcome {
        for (const auto& v : inv.violations) std::printf("    %s\n", v.c_str());
        std::ostringstream os;
        os << inv.runs << " optimizer runs checked, " << inv.violations.size() << " violations";
        return {inv.runs > 0 && inv.violations.empty(), os.str()};
    });

    int passed = 0;
    for (const auto& [k, o] : out) passed += o.pass;
    std::printf("%d of %zu criteria passed\n", passed, out.size());
    return strict && passed != static_cast<int>(out.size()) ? 1 : 0;
}
