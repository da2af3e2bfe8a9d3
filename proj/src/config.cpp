#include "phasetopo/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "phasetopo/random.hpp"

namespace phasetopo {

namespace pt = boost::property_tree;

namespace {

// ---------------------------------------------------------------- presets

const char* const kCantilever2d = R"([problem]
name = cantilever_2d
domain = -1 1 0 1
level = 5
masses = 0.5 0.5
alpha = 1
beta = 0
gamma = 0.5
eps = 0.04
potential = obstacle
interpolation = quadratic

[material:1]
mu = 5000
lambda = 5000

[void]
mu = 5000
lambda = 5000

[boundary:clamp]
tag = dirichlet
side = left
range = 0 1

[boundary:load]
tag = traction
side = bottom
range = 0.75 1
traction = 0 -250

[solver]
method = projected_gradient
tol = 1e-3

[initial]
kind = constant

[output]
dir = cantilever_2d
)";

const char* const kCantilever3Material = R"([problem]
name = cantilever_3material
domain = -1 1 0 1
level = 5
masses = 0.3843 0.2133 0.4024
alpha = 1
beta = 0
gamma = 0.5
eps = 0.04

[material:1]
mu = 5000
lambda = 5000

[material:2]
mu = 2500
lambda = 2500

[void]
mu = 5000
lambda = 5000

[boundary:clamp]
tag = dirichlet
side = left
range = 0 1

[boundary:load]
tag = traction
side = bottom
range = 0.75 1
traction = 0 -250

[solver]
method = projected_gradient
tol = 1e-3

[initial]
kind = constant
# used when kind = random
seed = 2

[output]
dir = cantilever_3material
)";

// eps = 1 / (18 pi)
const char* const kPush3Phase = R"([problem]
name = push_3phase
domain = -1 1 -1 1
level = 5
masses = 0.35 0.15 0.5
alpha = 0
beta = 10
gamma = 0.2
eps = 0.017683882565766150
weight = 2000
target = 0 0

[material:1]
mu = 10
lambda = 10

[material:2]
mu = 5
lambda = 5

[void]
mu = 10
lambda = 10

[boundary:clamp_left]
tag = dirichlet
side = left
range = -1 -0.9, 0.9 1
alignment = midpoint

[boundary:clamp_right]
tag = dirichlet
side = right
range = -1 -0.9, 0.9 1
alignment = midpoint

[boundary:load_left]
tag = traction
side = left
range = -0.8 -0.7, -0.1 0.1, 0.7 0.8
traction = -7 0
alignment = midpoint

[boundary:load_right]
tag = traction
side = right
range = -0.8 -0.7, -0.1 0.1, 0.7 0.8
traction = 7 0
alignment = midpoint

[s0:supports]
x = -1 -0.9, 0.9 1
y = -1 -0.9, -0.8 -0.7, -0.1 0.1, 0.7 0.8, 0.9 1

[solver]
method = gradient_flow
flow_tol = 1e-3
flow_max_steps = 3000
monotone_mechanism = true

[initial]
kind = constant

[output]
dir = push_3phase
)";

const char* const kCantilever3dSmoke = R"([problem]
name = cantilever_3d_smoke
domain = -1 1 0 1 0 0.5
level = 3
masses = 0.5 0.5
alpha = 1
beta = 0
gamma = 0.5
eps = 0.25

[material:1]
mu = 5000
lambda = 5000

[void]
mu = 5000
lambda = 5000

[boundary:clamp]
tag = dirichlet
side = left
range = 0 1
range2 = 0 0.5

[boundary:load]
tag = traction
side = bottom
range = 0.75 1
range2 = 0 0.5
traction = 0 -250 0

[solver]
method = projected_gradient
tol = 1e-2
max_iter = 300

[initial]
kind = constant

[output]
dir = cantilever_3d_smoke
vtk = true
)";

const char* const kDrift = R"([problem]
name = drift
domain = -1 1 0 1
level = 5
masses = 0.5 0.5
alpha = 1
beta = 0
gamma = 0.05
eps = 0.02
potential = double_well

[material:1]
mu = 5000
lambda = 5000

[void]
mu = 5000
lambda = 5000

[boundary:clamp]
tag = dirichlet
side = left
range = 0 1

[boundary:load]
tag = traction
side = bottom
range = 0.75 1
traction = 0 -250

[solver]
method = projected_gradient
tol = 1e-3

[initial]
kind = constant

[drift]
eps = 0.02 0.01 0.005

[output]
dir = drift
)";

const std::vector<std::pair<std::string, const char*>>& presets() {
    static const std::vector<std::pair<std::string, const char*>> p{
        {"cantilever_2d", kCantilever2d},
        {"cantilever_3material", kCantilever3Material},
        {"push_3phase", kPush3Phase},
        {"cantilever_3d_smoke", kCantilever3dSmoke},
        {"drift", kDrift},
    };
    return p;
}

// ---------------------------------------------------------------- parsing

/// Reads keys of one section and remembers which were consumed, so that
/// misspelled keys are reported instead of silently ignored.
class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    [[nodiscard]] bool has(const std::string& key) const {
        return tree_ && tree_->find(key) != tree_->not_found();
    }

    std::string str(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        return trim(tree_->find(key)->second.data());
    }

    std::string required(const std::string& key) {
        if (!has(key)) fail("missing key '" + key + "'");
        return str(key, "");
    }

    double real(const std::string& key, double fallback) {
        if (!has(key)) return str(key, ""), fallback;
        return to_real(key, str(key, ""));
    }

    int integer(const std::string& key, int fallback) {
        if (!has(key)) return str(key, ""), fallback;
        const std::string s = str(key, "");
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) fail("'" + key + "' is not an integer: " + s);
        return v;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return str(key, ""), fallback;
        const std::string s = str(key, "");
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        fail("'" + key + "' is not a boolean: " + s);
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback = {}) {
        if (!has(key)) return str(key, ""), fallback;
        const std::string s = str(key, "");
        std::istringstream is(s);
        std::vector<double> out;
        std::string tok;
        while (is >> tok) out.push_back(to_real(key, tok));
        return out;
    }

    IntervalList intervals(const std::string& key) {
        IntervalList out;
        if (!has(key)) return str(key, ""), out;
        std::stringstream ss(str(key, ""));
        std::string part;
        while (std::getline(ss, part, ',')) {
            std::istringstream is(part);
            std::vector<double> v;
            std::string tok;
            while (is >> tok) v.push_back(to_real(key, tok));
            if (v.size() != 2 || !(v[0] <= v[1])) fail("'" + key + "' needs intervals 'a b' with a <= b, separated by commas");
            out.push_back({v[0], v[1]});
        }
        if (out.empty()) fail("'" + key + "' is empty");
        return out;
    }

    template <class E>
    E choice(const std::string& key, E fallback, const std::vector<std::pair<std::string, E>>& options) {
        if (!has(key)) return str(key, ""), fallback;
        const std::string s = str(key, "");
        for (const auto& [n, v] : options) {
            if (n == s) return v;
        }
        std::string allowed;
        for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
        fail("'" + key + "' must be one of {" + allowed + "}, got '" + s + "'");
    }

    void finish() const {
        if (!tree_) return;
        for (const auto& [k, v] : *tree_) {
            if (!used_.count(k)) fail("unknown key '" + k + "'");
        }
    }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError("[" + name_ + "] " + what); }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
    }

    double to_real(const std::string& key, const std::string& s) const {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || !std::isfinite(v)) fail("'" + key + "' is not a number: " + s);
        return v;
    }

    std::string name_;
    const pt::ptree* tree_;
    std::set<std::string> used_;
};

std::array<double, 3> vec3(const std::vector<double>& v, int dim, const std::string& what) {
    if (static_cast<int>(v.size()) != dim) {
        throw ConfigError(what + " needs " + std::to_string(dim) + " components");
    }
    std::array<double, 3> out{0.0, 0.0, 0.0};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

std::string prefix_of(const std::string& section) {
    const auto colon = section.find(':');
    return colon == std::string::npos ? section : section.substr(0, colon);
}

std::string suffix_of(const std::string& section) {
    const auto colon = section.find(':');
    return colon == std::string::npos ? "" : section.substr(colon + 1);
}

const std::vector<std::pair<std::string, BoundaryTag>> kTags{{"dirichlet", BoundaryTag::Dirichlet},
                                                              {"traction", BoundaryTag::NeumannG},
                                                              {"free", BoundaryTag::Neumann0}};
const std::vector<std::pair<std::string, Alignment>> kAlign{{"strict", Alignment::Strict},
                                                            {"midpoint", Alignment::Midpoint}};
const std::vector<std::pair<std::string, Potential::Kind>> kPotentials{{"obstacle", Potential::Kind::Obstacle},
                                                                       {"double_well", Potential::Kind::DoubleWell}};
const std::vector<std::pair<std::string, Interpolation>> kInterp{{"quadratic", Interpolation::Quadratic},
                                                                 {"linear", Interpolation::Linear}};
const std::vector<std::pair<std::string, Method>> kMethods{{"projected_gradient", Method::ProjectedGradient},
                                                           {"gradient_flow", Method::GradientFlow}};
const std::vector<std::pair<std::string, InitialKind>> kInitial{{"constant", InitialKind::Constant},
                                                                {"separated", InitialKind::Separated},
                                                                {"random", InitialKind::Random}};
const std::vector<std::pair<std::string, KernelMode>> kKernels{{"parallel", KernelMode::Parallel},
                                                               {"serial", KernelMode::Serial}};
const std::vector<std::pair<std::string, SolverKind>> kSolvers{{"cholesky", SolverKind::Cholesky},
                                                               {"pcg", SolverKind::Pcg},
                                                               {"dense", SolverKind::Dense}};

template <class E>
std::string name_of(E v, const std::vector<std::pair<std::string, E>>& options) {
    for (const auto& [n, e] : options) {
        if (e == v) return n;
    }
    return "?";
}

}  // namespace

bool Region::contains(const std::array<double, 3>& p, int dim, double tol) const {
    for (int d = 0; d < dim; ++d) {
        if (axes[d].empty()) continue;
        bool in = false;
        for (const auto& iv : axes[d]) in = in || (p[d] >= iv[0] - tol && p[d] <= iv[1] + tol);
        if (!in) return false;
    }
    return true;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid configuration: " + m); };
    if (domain.dim != 2 && domain.dim != 3) fail("domain must be 2D or 3D");
    for (int d = 0; d < domain.dim; ++d) {
        if (!(domain.lo[d] < domain.hi[d])) fail("domain bounds must satisfy lo < hi");
    }
    if (level < 0 || level > 12) fail("level must lie in [0, 12]");
    if (materials.empty()) fail("at least one material phase is required (N >= 2)");
    for (const auto& m : materials) {
        if (!(m.mu > 0.0) || !(m.lambda + 2.0 * m.mu / domain.dim > 0.0)) {
            fail("material Lame parameters must give a positive definite tensor (mu > 0, lambda + 2mu/d > 0)");
        }
    }
    if (!(void_template.mu > 0.0) || !(void_template.lambda + 2.0 * void_template.mu / domain.dim > 0.0)) {
        fail("void template Lame parameters must give a positive definite tensor");
    }
    if (masses.size() != num_phases()) fail("masses need one entry per phase (N = " + std::to_string(num_phases()) + ")");
    for (int i = 0; i < masses.size(); ++i) {
        if (!(masses[i] > 0.0 && masses[i] < 1.0)) fail("every mass must lie in (0,1)");
    }
    if (std::abs(masses.sum() - 1.0) > 1e-9) fail("masses must sum to 1");
    if (!(cost.alpha >= 0.0) || !(cost.beta >= 0.0)) fail("alpha and beta must be >= 0");
    if (!(cost.gamma > 0.0) || !(cost.eps > 0.0)) fail("gamma and eps must be > 0");
    if (cost.potential.kind == Potential::Kind::DoubleWell && num_phases() != 2) {
        fail("the double-well potential needs exactly two phases");
    }
    if (!(weight >= 0.0)) fail("the weight c must be >= 0");
    if (cost.beta > 0.0 && !(weight > 0.0)) fail("beta > 0 needs a positive weight c");
    if (std::none_of(boundary.begin(), boundary.end(), [](const BoundaryPatch& p) { return p.tag == BoundaryTag::Dirichlet; })) {
        fail("a nonempty Dirichlet boundary is required for well-posedness");
    }
    if (!nested_levels.empty()) {
        if (nested_levels.size() != nested_tols.size()) fail("nested_levels and nested_tols differ in length");
        for (std::size_t i = 1; i < nested_levels.size(); ++i) {
            if (nested_levels[i] <= nested_levels[i - 1]) fail("nested_levels must increase");
            if (nested_tols[i] > nested_tols[i - 1]) fail("nested_tols must not increase");
        }
    }
    if (initial.value.size() != 0) {
        if (initial.value.size() != num_phases()) fail("initial value needs one entry per phase");
        if (std::abs(initial.value.sum() - 1.0) > 1e-9) fail("initial value must sum to 1");
    }
    for (std::size_t i = 1; i < drift_eps.size(); ++i) {
        if (!(drift_eps[i] < drift_eps[i - 1])) fail("drift eps list must decrease");
    }
    if (output.stride < 0) fail("output stride must be >= 0");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }

    static const std::set<std::string> kKnown{"problem", "material", "void", "boundary", "s0", "s1",
                                              "solver", "initial", "output", "drift"};
    for (const auto& [name, sub] : tree) {
        if (!kKnown.count(prefix_of(name))) throw ConfigError(source + ": unknown section [" + name + "]");
        if (sub.data().size() && sub.empty()) throw ConfigError(source + ": key '" + name + "' outside any section");
    }
    auto section = [&](const std::string& name) {
        const auto it = tree.find(name);
        return Section(name, it == tree.not_found() ? nullptr : &it->second);
    };

    RunConfig c;
    try {
        Section p = section("problem");
        c.name = p.str("name", c.name);
        const std::vector<double> dom = p.reals("domain");
        if (dom.size() == 4) {
            c.domain = Box::rectangle(dom[0], dom[1], dom[2], dom[3]);
        } else if (dom.size() == 6) {
            c.domain = Box::cuboid(dom[0], dom[1], dom[2], dom[3], dom[4], dom[5]);
        } else {
            p.fail("'domain' needs 4 (2D) or 6 (3D) numbers");
        }
        const int dim = c.domain.dim;
        c.level = p.integer("level", c.level);
        const std::vector<double> m = p.reals("masses");
        c.masses = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
        c.cost.alpha = p.real("alpha", c.cost.alpha);
        c.cost.beta = p.real("beta", c.cost.beta);
        c.cost.gamma = p.real("gamma", c.cost.gamma);
        c.cost.eps = p.real("eps", c.cost.eps);
        c.cost.potential.kind = p.choice("potential", Potential::Kind::Obstacle, kPotentials);
        c.interpolation = p.choice("interpolation", c.interpolation, kInterp);
        c.volume_force = vec3(p.reals("volume_force", std::vector<double>(dim, 0.0)), dim, "volume_force");
        c.target = vec3(p.reals("target", std::vector<double>(dim, 0.0)), dim, "target");
        c.weight = p.real("weight", c.weight);
        c.linear_solver = p.choice("linear_solver", c.linear_solver, kSolvers);
        p.finish();

        std::map<int, MaterialSpec> mats;
        for (const auto& [name, sub] : tree) {
            if (prefix_of(name) == "material") {
                Section s = section(name);
                int idx = 0;
                try {
                    idx = std::stoi(suffix_of(name));
                } catch (const std::exception&) {
                    s.fail("material sections are named [material:<index>] starting at 1");
                }
                mats[idx] = {s.real("mu", 1.0), s.real("lambda", 1.0)};
                s.finish();
            } else if (prefix_of(name) == "boundary") {
                Section s = section(name);
                const BoundaryTag tag = s.choice("tag", BoundaryTag::Dirichlet, kTags);
                const std::string side = s.required("side");
                Side parsed;
                try {
                    parsed = Side::parse(side);
                } catch (const std::exception& e) {
                    s.fail(e.what());
                }
                if (parsed.axis >= dim) s.fail("side '" + side + "' does not exist in " + std::to_string(dim) + "D");
                const IntervalList r1 = s.intervals("range");
                IntervalList r2{{0.0, 0.0}};
                if (dim == 3) r2 = s.intervals("range2");
                const auto traction = vec3(s.reals("traction", std::vector<double>(dim, 0.0)), dim, "[" + name + "] traction");
                const Alignment align = s.choice("alignment", Alignment::Strict, kAlign);
                for (const auto& a : r1) {
                    for (const auto& b : r2) {
                        BoundaryPatch patch;
                        patch.tag = tag;
                        patch.side = parsed;
                        patch.range[0] = a;
                        patch.range[1] = b;
                        patch.traction = traction;
                        patch.alignment = align;
                        c.boundary.push_back(patch);
                        c.boundary_names.push_back(suffix_of(name));
                    }
                }
                s.finish();
            } else if (prefix_of(name) == "s0" || prefix_of(name) == "s1") {
                Section s = section(name);
                Region r;
                r.name = suffix_of(name);
                r.axes[0] = s.intervals("x");
                r.axes[1] = s.intervals("y");
                if (dim == 3) r.axes[2] = s.intervals("z");
                s.finish();
                (prefix_of(name) == "s0" ? c.s0 : c.s1).push_back(r);
            }
        }
        int expect = 1;
        for (const auto& [idx, spec] : mats) {
            if (idx != expect++) throw ConfigError("material sections must be numbered 1, 2, ... without gaps");
            c.materials.push_back(spec);
        }
        Section v = section("void");
        c.void_template = {v.real("mu", c.materials.empty() ? 1.0 : c.materials[0].mu),
                           v.real("lambda", c.materials.empty() ? 1.0 : c.materials[0].lambda)};
        v.finish();

        Section s = section("solver");
        auto& o = c.optimizer;
        c.method = s.choice("method", c.method, kMethods);
        o.tol = s.real("tol", o.tol);
        o.max_iter = s.integer("max_iter", o.max_iter);
        o.scaled = s.boolean("scaled", o.scaled);
        o.lambda_fixed = s.real("lambda_fixed", o.lambda_fixed);
        o.lambda0 = s.real("lambda0", o.lambda0);
        o.cbar = s.real("cbar", o.cbar);
        o.full_step = s.real("full_step", o.full_step);
        o.c_armijo = s.real("c_armijo", o.c_armijo);
        o.shrink = s.real("shrink", o.shrink);
        o.max_backtracks = s.integer("max_backtracks", o.max_backtracks);
        o.c_pdas = s.real("c_pdas", o.c_pdas);
        o.pdas_max_iter = s.integer("pdas_max_iter", o.pdas_max_iter);
        o.kernel = s.choice("kernel", o.kernel, kKernels);
        for (double l : s.reals("nested_levels")) {
            if (l != std::floor(l)) s.fail("nested_levels must be integers");
            c.nested_levels.push_back(static_cast<int>(l));
        }
        c.nested_tols = s.reals("nested_tols");
        auto& f = c.flow;
        f.tau0 = s.real("flow_tau0", f.tau0);
        f.tol = s.real("flow_tol", f.tol);
        f.max_steps = s.integer("flow_max_steps", f.max_steps);
        f.grow = s.real("flow_grow", f.grow);
        f.grow_after = s.integer("flow_grow_after", f.grow_after);
        f.max_rejects = s.integer("flow_max_rejects", f.max_rejects);
        f.monotone_mechanism = s.boolean("monotone_mechanism", f.monotone_mechanism);
        f.c_pdas = o.c_pdas;
        f.pdas_max_iter = o.pdas_max_iter;
        f.kernel = o.kernel;
        s.finish();

        Section ini = section("initial");
        c.initial.kind = ini.choice("kind", c.initial.kind, kInitial);
        const std::vector<double> val = ini.reals("value");
        c.initial.value = Eigen::Map<const Eigen::VectorXd>(val.data(), static_cast<Eigen::Index>(val.size()));
        const double seed = ini.real("seed", 1.0);
        if (!(seed >= 0.0) || seed != std::floor(seed)) ini.fail("'seed' must be a nonnegative integer");
        c.initial.seed = static_cast<std::uint64_t>(seed);
        ini.finish();

        Section out = section("output");
        c.output.dir = out.str("dir", c.name);
        c.output.stride = out.integer("stride", c.output.stride);
        c.output.vtk = out.boolean("vtk", c.output.vtk);
        c.output.timing = out.boolean("timing", c.output.timing);
        out.finish();

        Section d = section("drift");
        c.drift_eps = d.reals("eps");
        d.finish();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : presets()) out.push_back(p.first);
    return out;
}

std::string preset_text(const std::string& name) {
    for (const auto& p : presets()) {
        if (p.first == name) return p.second;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

RunConfig load_config(const std::string& name_or_path) {
    for (const auto& p : presets()) {
        if (p.first == name_or_path) return parse_config(p.second, "preset " + p.first);
    }
    std::ifstream in(name_or_path);
    if (!in) throw ConfigError("cannot open config '" + name_or_path + "' (not a preset either)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), name_or_path);
}

std::string echo_config(const RunConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    const int dim = c.dim();
    auto list = [&](auto begin, auto end) {
        std::ostringstream l;
        l << std::setprecision(17);
        for (auto it = begin; it != end; ++it) l << (it == begin ? "" : " ") << *it;
        return l.str();
    };
    auto intervals = [&](const IntervalList& iv) {
        std::ostringstream l;
        l << std::setprecision(17);
        for (std::size_t i = 0; i < iv.size(); ++i) l << (i ? ", " : "") << iv[i][0] << ' ' << iv[i][1];
        return l.str();
    };
    os << "[problem]\n";
    os << "name = " << c.name << "\n";
    os << "domain =";
    for (int d = 0; d < dim; ++d) os << ' ' << c.domain.lo[d] << ' ' << c.domain.hi[d];
    os << "\nlevel = " << c.level << "\n";
    os << "masses = " << list(c.masses.data(), c.masses.data() + c.masses.size()) << "\n";
    os << "alpha = " << c.cost.alpha << "\nbeta = " << c.cost.beta << "\ngamma = " << c.cost.gamma
       << "\neps = " << c.cost.eps << "\n";
    os << "potential = " << name_of(c.cost.potential.kind, kPotentials) << "\n";
    os << "interpolation = " << name_of(c.interpolation, kInterp) << "\n";
    os << "volume_force = " << list(c.volume_force.begin(), c.volume_force.begin() + dim) << "\n";
    os << "target = " << list(c.target.begin(), c.target.begin() + dim) << "\n";
    os << "weight = " << c.weight << "\n";
    os << "linear_solver = " << name_of(c.linear_solver, kSolvers) << "\n";
    for (std::size_t i = 0; i < c.materials.size(); ++i) {
        os << "\n[material:" << i + 1 << "]\nmu = " << c.materials[i].mu << "\nlambda = " << c.materials[i].lambda << "\n";
    }
    os << "\n[void]\nmu = " << c.void_template.mu << "\nlambda = " << c.void_template.lambda << "\n";
    // One section per patch keeps the echo a faithful one-to-one record.
    for (std::size_t i = 0; i < c.boundary.size(); ++i) {
        const auto& b = c.boundary[i];
        const bool unique = std::count(c.boundary_names.begin(), c.boundary_names.end(), c.boundary_names[i]) == 1;
        os << "\n[boundary:" << c.boundary_names[i];
        if (!unique) os << "_" << i;
        os << "]\n";
        os << "tag = " << name_of(b.tag, kTags) << "\nside = " << b.side.name() << "\n";
        os << "range = " << b.range[0][0] << ' ' << b.range[0][1] << "\n";
        if (dim == 3) os << "range2 = " << b.range[1][0] << ' ' << b.range[1][1] << "\n";
        os << "traction = " << list(b.traction.begin(), b.traction.begin() + dim) << "\n";
        os << "alignment = " << name_of(b.alignment, kAlign) << "\n";
    }
    auto regions = [&](const std::vector<Region>& rs, const char* kind) {
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const bool unique = std::count_if(rs.begin(), rs.end(), [&](const Region& r) { return r.name == rs[i].name; }) == 1;
            os << "\n[" << kind << ":" << rs[i].name;
            if (!unique) os << "_" << i;
            os << "]\n";
            const char* axes[3] = {"x", "y", "z"};
            for (int d = 0; d < dim; ++d) {
                if (!rs[i].axes[d].empty()) os << axes[d] << " = " << intervals(rs[i].axes[d]) << "\n";
            }
        }
    };
    regions(c.s0, "s0");
    regions(c.s1, "s1");
    const auto& o = c.optimizer;
    const auto& f = c.flow;
    os << "\n[solver]\nmethod = " << name_of(c.method, kMethods) << "\n";
    os << "tol = " << o.tol << "\nmax_iter = " << o.max_iter << "\nscaled = " << (o.scaled ? "true" : "false")
       << "\nlambda_fixed = " << o.lambda_fixed << "\nlambda0 = " << o.lambda0 << "\ncbar = " << o.cbar
       << "\nfull_step = " << o.full_step << "\nc_armijo = " << o.c_armijo << "\nshrink = " << o.shrink
       << "\nmax_backtracks = " << o.max_backtracks << "\nc_pdas = " << o.c_pdas
       << "\npdas_max_iter = " << o.pdas_max_iter << "\nkernel = " << name_of(o.kernel, kKernels) << "\n";
    if (!c.nested_levels.empty()) {
        os << "nested_levels = " << list(c.nested_levels.begin(), c.nested_levels.end()) << "\n";
        os << "nested_tols = " << list(c.nested_tols.begin(), c.nested_tols.end()) << "\n";
    }
    os << "flow_tau0 = " << f.tau0 << "\nflow_tol = " << f.tol << "\nflow_max_steps = " << f.max_steps
       << "\nflow_grow = " << f.grow << "\nflow_grow_after = " << f.grow_after
       << "\nflow_max_rejects = " << f.max_rejects
       << "\nmonotone_mechanism = " << (f.monotone_mechanism ? "true" : "false") << "\n";
    os << "\n[initial]\nkind = " << name_of(c.initial.kind, kInitial) << "\n";
    if (c.initial.value.size()) os << "value = " << list(c.initial.value.data(), c.initial.value.data() + c.initial.value.size()) << "\n";
    os << "seed = " << c.initial.seed << "\n";
    os << "\n[output]\ndir = " << c.output.dir << "\nstride = " << c.output.stride
       << "\nvtk = " << (c.output.vtk ? "true" : "false") << "\ntiming = " << (c.output.timing ? "true" : "false") << "\n";
    if (!c.drift_eps.empty()) os << "\n[drift]\neps = " << list(c.drift_eps.begin(), c.drift_eps.end()) << "\n";
    return os.str();
}

Problem build_problem(const RunConfig& cfg, int level) {
    cfg.validate();
    const int dim = cfg.dim();
    Problem pr;
    pr.mesh = std::make_unique<Mesh>(build_mesh(cfg.domain, level >= 0 ? level : cfg.level, cfg.boundary));
    const Mesh& mesh = *pr.mesh;

    std::vector<ElasticTensor> mats;
    for (const auto& m : cfg.materials) mats.push_back(ElasticTensor::isotropic(m.mu, m.lambda, dim));
    MaterialSet set(std::move(mats), ElasticTensor::isotropic(cfg.void_template.mu, cfg.void_template.lambda, dim),
                    cfg.cost.eps, cfg.interpolation);

    LoadCase lc = LoadCase::zero(mesh);
    for (int n = 0; n < mesh.num_nodes(); ++n) {
        for (int d = 0; d < dim; ++d) {
            lc.volume_force[n * dim + d] = cfg.volume_force[d];
            lc.target[n * dim + d] = cfg.target[d];
        }
        lc.weight[n] = cfg.weight;
        for (const auto& r : cfg.s0) lc.s0[n] = lc.s0[n] || r.contains(mesh.node(n), dim);
        for (const auto& r : cfg.s1) lc.s1[n] = lc.s1[n] || r.contains(mesh.node(n), dim);
    }
    pr.cost = std::make_unique<ReducedCost>(mesh, std::move(set), std::move(lc), cfg.cost, cfg.linear_solver);
    pr.masses.m = cfg.masses;
    return pr;
}

PhaseField initial_field(const RunConfig& cfg, const Mesh& mesh) {
    const int N = cfg.num_phases();
    switch (cfg.initial.kind) {
        case InitialKind::Constant:
            return PhaseField::constant(mesh.num_nodes(), cfg.initial.value.size() ? cfg.initial.value : cfg.masses);
        case InitialKind::Separated: {
            // Bands across the first axis, each phase taking its mass share.
            PhaseField f(mesh.num_nodes(), N);
            const double lo = cfg.domain.lo[0], len = cfg.domain.hi[0] - cfg.domain.lo[0];
            for (int n = 0; n < mesh.num_nodes(); ++n) {
                const double t = (mesh.node(n)[0] - lo) / len;
                double acc = 0.0;
                int phase = N - 1;
                for (int i = 0; i < N; ++i) {
                    acc += cfg.masses[i];
                    if (t < acc) {
                        phase = i;
                        break;
                    }
                }
                f(n, phase) = 1.0;
            }
            return f;
        }
        case InitialKind::Random: {
            std::mt19937_64 rng(cfg.initial.seed);
            PhaseField f(mesh.num_nodes(), N);
            for (int n = 0; n < mesh.num_nodes(); ++n) {
                double s = 0.0;
                for (int i = 0; i < N; ++i) s += (f(n, i) = unit_double(rng) + 1e-3);
                for (int i = 0; i < N; ++i) f(n, i) /= s;
            }
            return f;
        }
    }
    throw ConfigError("unknown initial kind");
}

}  // namespace phasetopo
