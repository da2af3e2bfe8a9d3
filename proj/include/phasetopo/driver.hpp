#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phasetopo/config.hpp"

namespace phasetopo {

struct LevelReport {
    int level = 0;
    int iterations = 0;
    double seconds = 0.0;
    double cost = 0.0;
    std::string reason;
};

struct RunReport {
    std::filesystem::path dir;
    std::vector<LevelReport> levels;
    CostParts parts;
    int iterations = 0;        // on the final level
    bool converged = false;
    std::string reason;
    double seconds = 0.0;      // all levels
    double simplex_violation = 0.0;
    double mass_violation = 0.0;
    double pin_violation = 0.0;
    bool monotone = true;      // J never increased between recorded iterates
};

/// Runs the configured method and writes config.ini, convergence.csv,
/// field snapshots (CSV and optionally VTK) and summary.json into the
/// output directory. Progress lines go to `progress` when given.
RunReport run_config(const RunConfig& cfg, std::ostream* progress = nullptr);

}  // namespace phasetopo
