#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "phasetopo/config.hpp"

using namespace phasetopo;

namespace {

const char* kMinimal = R"([problem]
domain = 0 2 0 1
level = 3
masses = 0.4 0.6
eps = 0.1

[material:1]
mu = 2
lambda = 3

[boundary:clamp]
side = left
range = 0 1

[boundary:load]
tag = traction
side = right
range = 0.2 0.3, 0.7 0.8
traction = 0 -1
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

bool throws_with(const std::string& text, const std::string& fragment) {
    try {
        parse_config(text, "test.ini");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.find(fragment) == std::string::npos) {
            MESSAGE("message was: " << what);
            return false;
        }
        return what.find("test.ini") != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_CASE("every preset parses, validates and builds") {
    const auto names = preset_names();
    CHECK(names.size() >= 5);
    for (const auto& name : names) {
        CAPTURE(name);
        const RunConfig c = load_config(name);
        CHECK(c.masses.size() == c.num_phases());
        CHECK(c.masses.sum() == doctest::Approx(1.0));
        const Problem p = build_problem(c, c.dim() == 3 ? 2 : 3);
        CHECK(p.mesh->dim() == c.dim());
        const PhaseField phi = initial_field(c, *p.mesh);
        CHECK(phi.num_phases() == c.num_phases());
    }
    CHECK_THROWS_AS(preset_text("nope"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("defaults and interval lists") {
    const RunConfig c = parse_config(kMinimal);
    CHECK(c.name == "run");
    CHECK(c.level == 3);
    CHECK(c.cost.eps == 0.1);
    CHECK(c.void_template.mu == 2.0);
    CHECK(c.method == Method::ProjectedGradient);
    CHECK(c.output.dir == "run");
    REQUIRE(c.boundary.size() == 3);
    CHECK(c.boundary_names[1] == "load");
    CHECK(c.boundary[2].range[0][0] == 0.7);
}

TEST_CASE("echo reproduces the configuration") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const RunConfig a = load_config(name);
        const std::string text = echo_config(a);
        const RunConfig b = parse_config(text, "echo");
        CHECK(echo_config(b) == text);
        CHECK(b.boundary.size() == a.boundary.size());
        CHECK(b.s0.size() == a.s0.size());
        CHECK(b.masses == a.masses);
        CHECK(b.cost.eps == a.cost.eps);
        CHECK(b.flow.monotone_mechanism == a.flow.monotone_mechanism);
    }
}

TEST_CASE("invalid input is reported with its location") {
    const std::string base = kMinimal;
    CHECK(throws_with(replace(base, "masses = 0.4 0.6", "masses = 0.4 0.5"), "sum to 1"));
    CHECK(throws_with(replace(base, "eps = 0.1", "eps = 0.1\nepsilon = 2"), "[problem] unknown key 'epsilon'"));
    CHECK(throws_with(base + "\n[solvr]\ntol = 1\n", "unknown section [solvr]"));
    CHECK(throws_with(replace(base, "level = 3", "level = three"), "'level' is not an integer"));
    CHECK(throws_with(replace(base, "tag = traction", "tag = pull"), "must be one of"));
    CHECK(throws_with(replace(base, "range = 0 1", "range = 1 0"), "[boundary:clamp]"));
    CHECK(throws_with(replace(base, "side = left\nrange = 0 1", "side = left\ntag = free\nrange = 0 1"),
                      "Dirichlet boundary is required"));
    CHECK(throws_with(replace(base, "[material:1]", "[material:2]"), "numbered 1, 2"));
    CHECK(throws_with(replace(base, "level = 3", "level = 3\nlevel = 4"), "test.ini:"));
    CHECK(throws_with(base + "\n[solver]\nnested_levels = 3 2\nnested_tols = 1e-2 1e-3\n", "must increase"));
}

TEST_CASE("regions contain their closed intervals") {
    Region r;
    r.axes[0] = {{-1.0, -0.9}, {0.9, 1.0}};
    CHECK(r.contains({-0.9, 5.0, 0.0}, 2));
    CHECK(r.contains({1.0, 0.0, 0.0}, 2));
    CHECK_FALSE(r.contains({0.0, 0.0, 0.0}, 2));
}

TEST_CASE("initial fields") {
    RunConfig c = load_config("cantilever_3material");
    const Problem p = build_problem(c, 3);
    const auto& ops = p.cost->ops();

    c.initial.kind = InitialKind::Separated;
    const PhaseField sep = initial_field(c, *p.mesh);
    CHECK(max_simplex_violation(sep) == 0.0);
    CHECK((phase_means(sep, ops) - c.masses).cwiseAbs().maxCoeff() < 0.1);

    c.initial.kind = InitialKind::Random;
    c.initial.seed = 3;
    const PhaseField r1 = initial_field(c, *p.mesh);
    const PhaseField r2 = initial_field(c, *p.mesh);
    c.initial.seed = 4;
    const PhaseField r3 = initial_field(c, *p.mesh);
    CHECK(r1.values() == r2.values());
    CHECK(r1.values() != r3.values());
    CHECK(max_simplex_violation(r1) < 1e-14);

    c.initial.kind = InitialKind::Constant;
    const PhaseField k = initial_field(c, *p.mesh);
    CHECK((phase_means(k, ops) - c.masses).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("preset files match the bundled presets") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const std::string path = std::string(PRESET_DIR) + "/" + name + ".ini";
        std::ifstream in(path);
        REQUIRE(in.good());
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == preset_text(name));
        CHECK(echo_config(load_config(path)) == echo_config(load_config(name)));
    }
}
