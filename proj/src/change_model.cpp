#include "qcdnet/change_model.hpp"

#include "qcdnet/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace qcdnet {

namespace {

double gaussian_log_density(double mean, double var, double x) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

} // namespace

void ChangeSpec::validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw InvalidArgument("change.rho must lie in [0, 1), got " + std::to_string(rho));
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("change.p must lie in (0, 1), got " + std::to_string(p));
    }
}

std::string_view to_string(ObservationFamily family) {
    switch (family) {
    case ObservationFamily::gaussian:
        return "gaussian";
    }
    return "unknown";
}

ObservationFamily observation_family_from_string(std::string_view name) {
    if (name == "gaussian" || name == "normal") {
        return ObservationFamily::gaussian;
    }
    throw InvalidArgument("unknown observation family '" + std::string(name) + "'");
}

ObservationModel ObservationModel::gaussian(double pre_mean, double pre_var, double post_mean, double post_var) {
    ObservationModel m;
    m.family = ObservationFamily::gaussian;
    m.pre_mean = pre_mean;
    m.pre_var = pre_var;
    m.post_mean = post_mean;
    m.post_var = post_var;
    m.validate();
    return m;
}

void ObservationModel::validate() const {
    if (!(pre_var > 0.0) || !(post_var > 0.0)) {
        throw InvalidArgument("observation variances must be strictly positive");
    }
    if (!std::isfinite(pre_mean) || !std::isfinite(post_mean) || !std::isfinite(pre_var) ||
        !std::isfinite(post_var)) {
        throw InvalidArgument("observation parameters must be finite");
    }
}

bool ObservationModel::uninformative() const {
    return pre_mean == post_mean && pre_var == post_var;
}

Slot sample_change_time(const ChangeSpec &spec, Rng &rng) {
    if (uniform01(rng) < spec.rho) {
        return 0;
    }
    // Inverse CDF of the geometric law on {1, 2, ...}; u in (0, 1].
    const double u = 1.0 - uniform01(rng);
    const double k = std::floor(std::log(u) / std::log1p(-spec.p));
    return 1 + static_cast<Slot>(k);
}

double batch_change_prob(double p, std::int64_t period) {
    if (period < 1) {
        throw InvalidArgument("sampling period must be a positive integer");
    }
    return -std::expm1(static_cast<double>(period) * std::log1p(-p));
}

double log_likelihood(const ObservationModel &model, int hypothesis, double x) {
    switch (model.family) {
    case ObservationFamily::gaussian:
        return hypothesis == 0 ? gaussian_log_density(model.pre_mean, model.pre_var, x)
                               : gaussian_log_density(model.post_mean, model.post_var, x);
    }
    throw InvalidArgument("unsupported observation family");
}

double log_likelihood_ratio(const ObservationModel &model, double x) {
    return log_likelihood(model, 1, x) - log_likelihood(model, 0, x);
}

double sample_observation(const ObservationModel &model, int theta, Rng &rng) {
    switch (model.family) {
    case ObservationFamily::gaussian: {
        const double mean = theta == 0 ? model.pre_mean : model.post_mean;
        const double var = theta == 0 ? model.pre_var : model.post_var;
        std::normal_distribution<double> dist(mean, std::sqrt(var));
        return dist(rng);
    }
    }
    throw InvalidArgument("unsupported observation family");
}

double kl_divergence(const ObservationModel &model) {
    switch (model.family) {
    case ObservationFamily::gaussian: {
        const double dm = model.post_mean - model.pre_mean;
        const double ratio = model.post_var / model.pre_var;
        return 0.5 * (ratio + dm * dm / model.pre_var - 1.0 - std::log(ratio));
    }
    }
    throw InvalidArgument("unsupported observation family");
}

} // namespace qcdnet
