#include "phasetopo/drift.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace phasetopo {

double plateau_value(const PhaseField& phi, int phase, double threshold, double bin) {
    if (!(bin > 0.0)) throw DomainError("plateau_value: bin width must be positive");
    if (phase < 0 || phase >= phi.num_phases()) throw DomainError("plateau_value: no such phase");
    std::map<long, std::pair<int, double>> hist;  // bin -> (count, sum)
    for (int n = 0; n < phi.num_nodes(); ++n) {
        const double v = phi(n, phase);
        if (!(v > threshold)) continue;
        auto& h = hist[static_cast<long>(std::floor(v / bin))];
        ++h.first;
        h.second += v;
    }
    if (hist.empty()) return std::numeric_limits<double>::quiet_NaN();
    auto best = hist.begin();
    for (auto it = hist.begin(); it != hist.end(); ++it) {
        if (it->second.first > best->second.first) best = it;
    }
    return best->second.second / best->second.first;
}

std::vector<DriftRow> potential_drift_experiment(const DriftFactory& factory, const std::vector<double>& eps_list,
                                                 const OptimizerConfig& cfg, const Initializer& initial) {
    if (eps_list.empty()) throw DomainError("drift: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw DomainError("drift: eps must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw DomainError("drift: eps list must decrease");
    }
    std::vector<DriftRow> rows;
    for (double eps : eps_list) {
        Problem problem = factory(eps);
        if (problem.bounded()) throw DomainError("drift: the experiment needs the double-well potential");
        ProjectedGradient opt(problem, cfg);
        const OptimizerResult r = opt.run(initial(problem));
        DriftRow row;
        row.eps = eps;
        row.plateau = plateau_value(r.phi, r.phi.num_phases() - 1);
        row.material_plateau = plateau_value(r.phi, 0);
        row.mean = phase_means(r.phi, problem.cost->ops())[0];
        row.max_value = r.phi.values().col(0).maxCoeff();
        row.iterations = r.iterations();
        row.cost = r.parts.total;
        row.reason = r.reason;
        row.seconds = r.seconds;
        rows.push_back(row);
    }
    return rows;
}

bool drift_is_monotone(const std::vector<DriftRow>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!(rows[i].plateau > 1.0)) return false;
        if (i > 0 && !(rows[i].plateau < rows[i - 1].plateau)) return false;
    }
    return !rows.empty();
}

}  // namespace phasetopo
