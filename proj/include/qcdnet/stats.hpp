#pragma once

#include <cstddef>
#include <span>

namespace qcdnet {

/// Point estimate with a symmetric 95% confidence half-width.
struct Estimate {
    double value = 0.0;
    double half_width = 0.0;

    double lower() const { return value - half_width; }
    double upper() const { return value + half_width; }
    bool covers(double x) const { return lower() <= x && x <= upper(); }
};

/// Welford accumulator; merge() is associative so partial sums from parallel
/// workers can be combined in any grouping.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats &other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const; // unbiased
    double std_error() const;

    /// Student-t 95% interval for the mean.
    Estimate mean_ci() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Two-sided 97.5% quantile of Student's t with `dof` degrees of freedom.
double t_quantile_975(double dof);

Estimate mean_ci(std::span<const double> xs);

/// Wilson score interval for a binomial proportion, reported as
/// (centre, half-width). The centre is the plain proportion k/n; the
/// half-width is the larger distance to either Wilson bound.
Estimate wilson_interval(std::size_t successes, std::size_t trials);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    double t_stat = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares y = a + b x with the usual slope standard error.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace qcdnet
