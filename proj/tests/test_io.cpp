#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "phasetopo/driver.hpp"
#include "phasetopo/io.hpp"

using namespace phasetopo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("phasetopo_test_" + name);
    fs::remove_all(p);
    return p;
}

std::map<std::string, std::string> contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

RunConfig small_cantilever(const fs::path& dir) {
    RunConfig c = load_config("cantilever_2d");
    c.level = 3;
    c.cost.eps = 0.16;
    c.optimizer.max_iter = 12;
    c.output.dir = dir.string();
    c.output.stride = 5;
    c.output.timing = false;
    return c;
}

}  // namespace

TEST_CASE("field csv and vtk layout") {
    const Mesh m = fixtures::cantilever_mesh(2);
    PhaseField phi = PhaseField::constant(m.num_nodes(), Eigen::Vector3d(0.2, 0.3, 0.5));
    Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(2 * m.num_nodes(), 0.0, 1.0);
    const fs::path dir = scratch("fields");
    fs::create_directories(dir);

    write_field_csv(dir / "f.csv", m, phi, u);
    const auto csv = lines(slurp(dir / "f.csv"));
    REQUIRE(csv.size() == static_cast<std::size_t>(m.num_nodes()) + 1);
    CHECK(csv[0] == "x,y,phi_1,phi_2,phi_3,u_x,u_y");
    CHECK(csv[1].find(",0.2,0.3,0.5,0,") != std::string::npos);

    write_vtk(dir / "f.vtk", m, phi, u);
    const std::string vtk = slurp(dir / "f.vtk");
    CHECK(vtk.rfind("# vtk DataFile Version 3.0", 0) == 0);
    CHECK(vtk.find("POINTS " + std::to_string(m.num_nodes()) + " double") != std::string::npos);
    CHECK(vtk.find("CELLS " + std::to_string(m.num_cells()) + " " + std::to_string(4 * m.num_cells())) !=
          std::string::npos);
    CHECK(vtk.find("SCALARS phi_3 double 1") != std::string::npos);
    CHECK(vtk.find("VECTORS u double") != std::string::npos);

    CHECK_THROWS_AS(write_field_csv(dir / "g.csv", m, phi, Eigen::VectorXd(3)), IoError);
    CHECK_THROWS_AS(write_text(dir / "missing" / "x.txt", "x"), IoError);
}

TEST_CASE("output root follows the environment") {
    const fs::path root = scratch("root");
    setenv("PHASETOPO_OUTPUT_ROOT", root.c_str(), 1);
    CHECK(output_root() == root);
    CHECK(prepare_output_dir("a/b") == root / "a" / "b");
    CHECK(fs::is_directory(root / "a" / "b"));
    unsetenv("PHASETOPO_OUTPUT_ROOT");
    CHECK(output_root() == fs::path("output"));
}

TEST_CASE("a run writes its files and repeats byte for byte") {
    const fs::path dir = scratch("run");
    const RunReport rep = run_config(small_cantilever(dir));
    const auto first = contents(dir);
    for (const std::string f : {"config.ini", "convergence.csv", "summary.json", "field_000005.csv", "field_000010.csv",
                                "field_000012.csv", "field_000012.vtk"}) {
        CAPTURE(f);
        CHECK(first.count(f) == 1);
    }
    const auto log = lines(first.at("convergence.csv"));
    CHECK(log[0] == ConvergenceLog::kHeader);
    CHECK(log.size() == 1 + 12);
    CHECK(rep.iterations == 12);
    CHECK(log[1].substr(log[1].rfind(',')) == ",0");

    const auto js = nlohmann::json::parse(first.at("summary.json"));
    CHECK(js["iterations"] == rep.iterations);
    CHECK(js["method"] == "projected_gradient");
    CHECK(js["monotone"] == true);
    CHECK(js["max_mass_violation"].get<double>() < 1e-9);
    CHECK(parse_config(first.at("config.ini")).level == 3);

    run_config(small_cantilever(dir));
    CHECK(contents(dir) == first);
}

TEST_CASE("flow runs log tau and rejected trials") {
    const fs::path dir = scratch("flow");
    RunConfig c = load_config("push_3phase");
    c.level = 3;
    c.flow.max_steps = 4;
    c.output.dir = dir.string();
    c.output.timing = false;
    c.output.vtk = false;
    const RunReport rep = run_config(c);
    CHECK(rep.mass_violation < 1e-9);
    CHECK(rep.pin_violation == 0.0);
    const auto log = lines(slurp(dir / "convergence.csv"));
    REQUIRE(log.size() >= 2);
    CHECK(log[1].rfind("0,", 0) == 0);
    const auto js = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(js["method"] == "gradient_flow");
    CHECK(!fs::exists(dir / "field_000000.vtk"));
}

TEST_CASE("nested runs keep per-level logs") {
    const fs::path dir = scratch("nested");
    RunConfig c = small_cantilever(dir);
    c.nested_levels = {2, 3};
    c.nested_tols = {1e-2, 1e-3};
    c.optimizer.max_iter = 400;
    const RunReport rep = run_config(c);
    REQUIRE(rep.levels.size() == 2);
    CHECK(fs::exists(dir / "convergence_level2.csv"));
    CHECK(fs::exists(dir / "field_level2.csv"));
    CHECK(fs::exists(dir / "convergence.csv"));
    CHECK(rep.converged);
}
