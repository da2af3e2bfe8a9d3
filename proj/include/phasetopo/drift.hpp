#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phasetopo/optimizer.hpp"

namespace phasetopo {

/// Most frequent value of phi^phase among nodes where it exceeds
/// `threshold`: the centre of the fullest histogram bin of width `bin`,
/// refined to the mean of the values in that bin. NaN if no node qualifies.
double plateau_value(const PhaseField& phi, int phase, double threshold = 0.5, double bin = 0.005);

struct DriftRow {
    double eps = 0.0;
    double plateau = 0.0;          // void phase, where the elastic energy vanishes
    double material_plateau = 0.0; // phase 1
    double mean = 0.0;        // lumped mean of phi^1
    double max_value = 0.0;
    int iterations = 0;
    double cost = 0.0;
    std::string reason;
    double seconds = 0.0;
};

/// Builds the smooth-potential problem for one eps.
using DriftFactory = std::function<Problem(double eps)>;

/// Runs the projected gradient method without simplex bounds for every eps
/// and reports the bulk values attained by the void and the material. With
/// the double well a pure phase is not at 1 but drifts towards it as eps
/// decreases.
std::vector<DriftRow> potential_drift_experiment(const DriftFactory& factory, const std::vector<double>& eps_list,
                                                 const OptimizerConfig& cfg, const Initializer& initial);

/// True when the void plateau values decrease strictly along eps_list and
/// stay above 1.
bool drift_is_monotone(const std::vector<DriftRow>& rows);

}  // namespace phasetopo
