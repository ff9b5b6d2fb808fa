#pragma once

#include "qcdnet/random.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace qcdnet {

using Slot = std::int64_t;

/// Prior of the change slot T: P(T = 0) = rho, and for k >= 1
/// P(T = k) = (1 - rho) p (1 - p)^(k - 1).
struct ChangeSpec {
    double rho = 0.0;
    double p = 0.0005;

    void validate() const;
};

enum class ObservationFamily { gaussian };

std::string_view to_string(ObservationFamily family);
ObservationFamily observation_family_from_string(std::string_view name);

/// Pre-change density f0 and post-change density f1 of one sensor output.
/// Detectors only touch the model through log_likelihood(), so further
/// families slot in without changing them.
struct ObservationModel {
    ObservationFamily family = ObservationFamily::gaussian;
    double pre_mean = 0.0;
    double pre_var = 1.0;
    double post_mean = 1.0;
    double post_var = 1.0;

    static ObservationModel gaussian(double pre_mean, double pre_var, double post_mean, double post_var);

    void validate() const;
    bool uninformative() const;
};

/// Hidden state of nature of one episode.
struct NatureTrajectory {
    Slot change_time = 0;

    int theta_at(Slot k) const { return k >= change_time ? 1 : 0; }
};

Slot sample_change_time(const ChangeSpec &spec, Rng &rng);

/// Probability that the change happens within `period` consecutive slots:
/// 1 - (1 - p)^period.
double batch_change_prob(double p, std::int64_t period);

/// log f0(x) for hypothesis 0, log f1(x) for hypothesis 1.
double log_likelihood(const ObservationModel &model, int hypothesis, double x);

/// log f1(x) - log f0(x).
double log_likelihood_ratio(const ObservationModel &model, double x);

double sample_observation(const ObservationModel &model, int theta, Rng &rng);

/// Kullback-Leibler divergence I(f1, f0) = E_{f1}[log f1/f0].
double kl_divergence(const ObservationModel &model);

} // namespace qcdnet
