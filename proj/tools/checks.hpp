#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phasetopo/config.hpp"
#include "phasetopo/drift.hpp"
#include "phasetopo/verify.hpp"

namespace phasetopo::checks {

struct GradCheck {
    std::vector<verify::FdSample> samples;
    double max_rel_error = 0.0;   // at the smallest step
    bool linear = false;          // error falls about tenfold per decade of t
    bool pass = false;
};

/// Forward-difference check of j'(phi) eta on `cfg` at `level` with a random
/// interior field and tangent. Passes when the error decays linearly and
/// ends below `threshold`.
GradCheck gradient_check(const RunConfig& cfg, int level, std::uint64_t seed, double threshold = 1e-5);

struct OracleSweep {
    int instances = 0;
    int mismatches = 0;
    double max_error = 0.0;       // max nodal deviation from the oracle
    double max_kkt = 0.0;
    double seconds = 0.0;
    std::vector<std::string> failures;
};

/// Random projection instances on every structured mesh with at most
/// `max_nodes` nodes (level 1, 2D and 3D), cycling through the shapes,
/// N in {2, 3}, two metrics and pinned or free nodes.
OracleSweep projection_oracle_sweep(int instances, std::uint64_t seed, int max_nodes = 12,
                                    double tol = 1e-8, double kkt_tol = 1e-9);

/// Drift table for cfg.drift_eps on `level` (cfg.level when negative).
std::vector<DriftRow> drift_table(const RunConfig& cfg, int level = -1);

void print_drift_table(std::ostream& os, const std::vector<DriftRow>& rows);

}  // namespace phasetopo::checks
