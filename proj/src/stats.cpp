#include "qcdnet/stats.hpp"

#include "qcdnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace qcdnet {

void RunningStats::add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats &other) {
    if (other.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double d = other.mean_ - mean_;
    const double n = na + nb;
    mean_ += d * nb / n;
    m2_ += other.m2_ + d * d * na * nb / n;
    n_ += other.n_;
}

double RunningStats::variance() const {
    if (n_ < 2) {
        return 0.0;
    }
    return m2_ / static_cast<double>(n_ - 1);
}

double RunningStats::std_error() const {
    if (n_ < 2) {
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(variance() / static_cast<double>(n_));
}

Estimate RunningStats::mean_ci() const {
    if (n_ < 2) {
        return {mean_, std::numeric_limits<double>::infinity()};
    }
    return {mean_, t_quantile_975(static_cast<double>(n_ - 1)) * std_error()};
}

double t_quantile_975(double dof) {
    if (!(dof > 0.0)) {
        throw InvalidArgument("t quantile needs positive degrees of freedom");
    }
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, 0.975);
}

Estimate mean_ci(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) {
        s.add(x);
    }
    return s.mean_ci();
}

Estimate wilson_interval(std::size_t successes, std::size_t trials) {
    if (trials == 0) {
        return {0.0, 1.0};
    }
    constexpr double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double denom = 1.0 + z * z / n;
    const double centre = (phat + z * z / (2.0 * n)) / denom;
    const double spread = z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom;
    const double lo = std::max(0.0, centre - spread);
    const double hi = std::min(1.0, centre + spread);
    return {phat, std::max(phat - lo, hi - phat)};
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw InvalidArgument("fit_line needs at least three paired points");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit fit;
    fit.points = x.size();
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
    fit.t_stat = fit.slope_se > 0.0 ? fit.slope / fit.slope_se
                                    : (fit.slope == 0.0 ? 0.0 : std::copysign(INFINITY, fit.slope));
    return fit;
}

} // namespace qcdnet
