#pragma once

#include "qcdnet/bellman.hpp"
#include "qcdnet/calibration.hpp"
#include "qcdnet/execution.hpp"
#include "qcdnet/nodm.hpp"
#include "qcdnet/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qcdnet {

/// Version tag written as the first comment line of every CSV.
inline constexpr const char *csv_schema = "qcdnet-csv v1";

/// Seeds of the stages of one experiment, all derived from Scenario::seed.
struct StageSeeds {
    std::uint64_t calibration;
    std::uint64_t estimation;
    std::uint64_t sojourn;

    static StageSeeds from(std::uint64_t master);
};

struct DetectorReport {
    ThresholdCalibration calibration;
    MetricEstimate metrics;
};

struct RunReport {
    Scenario scenario;
    DetectorReport nodm;
    DetectorReport nadm;
    SojournEstimate sojourn;
    double l_r = 0.0;
    Estimate decision_delay;     // NODM (T~ - T) 1{T~ >= T}
    double approximation = 0.0;  // (d + l)(1 - alpha) - rho l + period * asymptotic decision delay
    DelayDecomposition decomposition;
};

/// Calibrates both detectors, estimates their metrics on fresh episodes and
/// decomposes the NODM delay. Throws StabilityError for an unstable network.
RunReport run_scenario(const Scenario &s, Execution exec = Execution::parallel);

void print_run_report(std::ostream &out, const RunReport &r);

struct SweepRow {
    std::string sweep;
    double value = 0.0;
    int n_sensors = 0;
    int period = 0;
    std::string series; // NODM, NADM or NODM-decision
    std::optional<double> gamma;
    std::optional<Estimate> delay;
    std::optional<Estimate> pfa;
    std::optional<Estimate> d_r;
    std::optional<double> l_r;
    std::optional<Estimate> decision_delay;
    std::optional<double> approximation;
    std::string status = "ok";
};

struct SweepResult {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<SweepRow> rows;
};

SweepResult run_report_rows(const RunReport &r);

/// One row per (period, detector). Every period reuses the scenario seed,
/// so neighbouring points share random numbers. Failures at one period are
/// recorded in its status column and the sweep continues.
SweepResult sweep_rate(const Scenario &s, std::span<const int> periods, Execution exec = Execution::parallel,
                       std::ostream *progress = nullptr);

/// Fixed observation rate N r = nr: period = round(N / nr). Emits the
/// network-free NODM decision delay and both detection delays per N.
SweepResult sweep_nodes(const Scenario &s, std::span<const int> sensors, double nr,
                        Execution exec = Execution::parallel, std::ostream *progress = nullptr);

int period_for_rate(int n_sensors, double nr);

void write_sweep_csv(std::ostream &out, const SweepResult &result);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

ValidationCheck check_l_of_r(std::size_t pairs, std::uint64_t seed);
ValidationCheck check_psi_pi_round_trip(int points_per_axis);
ValidationCheck check_uninformative_collapse(Slot horizon, std::uint64_t seed);
ValidationCheck check_queue_conservation(std::size_t episodes, Slot slots, std::uint64_t seed,
                                         Execution exec = Execution::parallel);
ValidationCheck check_tiny_dp();
ValidationCheck check_nodm_network_independence(std::size_t episodes, std::uint64_t seed);

/// The exact checks above at their default sizes.
std::vector<ValidationCheck> validate_suite(std::uint64_t seed, Execution exec = Execution::parallel);

void print_checks(std::ostream &out, std::span<const ValidationCheck> checks);

} // namespace qcdnet
