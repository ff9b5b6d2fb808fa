#pragma once

#include "qcdnet/change_model.hpp"
#include "qcdnet/network.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qcdnet {

/// Small instance for exact value iteration over [queue state, pi].
struct TinyScenario {
    NetConfig net{1, 3, 0.6};
    ChangeSpec change{0.0, 0.05};
    ObservationModel obs;
    double cost_c = 0.05;
    Slot delta_cap = 12;     // largest batch age kept; older states are folded back by one period
    int pi_grid = 201;       // uniform grid on [0, 1]
    int obs_grid = 15;       // quadrature nodes per observation
    double obs_span = 5.0;   // grid covers means -/+ obs_span standard deviations
    double tol = 1e-10;
    int max_iterations = 200'000;

    void validate() const;
};

struct DpQueueState {
    QueueState queue; // canonical representative
    std::string label;
    bool pre_sampling = false; // slot 0, nothing sampled yet
    bool drained = false;      // delta = 0 and no fresh batch
};

struct DpResult {
    std::vector<double> pi;                 // grid
    std::vector<DpQueueState> states;
    std::vector<std::vector<double>> value; // [state][grid]
    std::vector<std::vector<double>> continue_cost;
    std::vector<double> threshold;          // gamma(q): smallest reachable grid pi where stopping is optimal
    std::vector<double> reachable_floor;    // 1 - (1 - p)^delta
    std::vector<bool> stop_region_upset;
    std::vector<bool> concave;
    std::vector<double> residuals;
    bool residual_monotone = false;
    int iterations = 0;
    std::size_t cap_redirects = 0;          // transitions folded at delta_cap
    bool kappa_bound_holds = false;         // continue cost at pi = 0 <= 1 - p wherever pi = 0 is reachable

    bool all_upsets() const;
    bool all_concave() const;
};

/// Value iteration of J(q, pi) = min{1 - pi, c pi + E[J(Q', Pi')]} from
/// J = 1 - pi, with linear interpolation in pi and observations replaced
/// by a normalized quadrature grid. Throws NonConvergence if the sup-norm
/// residual is still above tol after max_iterations.
DpResult bellman_value_iteration(const TinyScenario &tiny);

/// Threshold of the one-dimensional problem V(pi) = min{1 - pi, c pi + V(pi + (1 - pi) p)}:
/// stop iff pi >= p / (p + c).
double prior_only_threshold(double p, double c);

void write_threshold_csv(std::ostream &out, const DpResult &result);

} // namespace qcdnet
