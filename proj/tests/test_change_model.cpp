#include "qcdnet/change_model.hpp"
#include "qcdnet/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace qcdnet;

TEST(ChangeSpec, RejectsOutOfRange) {
    EXPECT_THROW((ChangeSpec{1.0, 0.5}.validate()), InvalidArgument);
    EXPECT_THROW((ChangeSpec{0.0, 0.0}.validate()), InvalidArgument);
    EXPECT_THROW((ChangeSpec{-0.1, 0.5}.validate()), InvalidArgument);
    EXPECT_NO_THROW((ChangeSpec{0.0, 0.0005}.validate()));
}

TEST(SampleChangeTime, FullPriorMassAtZero) {
    Rng rng(1);
    const ChangeSpec spec{1.0, 0.5};
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_change_time(spec, rng), 0);
    }
}

TEST(SampleChangeTime, MeanMatchesGeometric) {
    Rng rng(2);
    const ChangeSpec spec{0.0, 0.0005};
    const int n = 1'000'000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const Slot t = sample_change_time(spec, rng);
        ASSERT_GE(t, 1);
        sum += static_cast<double>(t);
    }
    const double mean = sum / n;
    const double sd = std::sqrt(1.0 - spec.p) / spec.p;
    EXPECT_NEAR(mean, 2000.0, 4.0 * sd / std::sqrt(n));
}

TEST(SampleChangeTime, ChiSquareAgainstPmf) {
    // Bins T = 0, 1, ..., 7 and T >= 8 against the pmf with an atom at 0.
    for (double rho : {0.0, 0.3}) {
        Rng rng(3 + static_cast<unsigned>(rho * 10));
        const ChangeSpec spec{rho, 0.5};
        const int n = 100'000;
        std::vector<double> counts(9, 0.0);
        for (int i = 0; i < n; ++i) {
            counts[static_cast<std::size_t>(std::min<Slot>(sample_change_time(spec, rng), 8))] += 1.0;
        }
        std::vector<double> pmf(9, 0.0);
        pmf[0] = rho;
        double tail = 1.0 - rho;
        for (int k = 1; k < 8; ++k) {
            pmf[static_cast<std::size_t>(k)] = (1.0 - rho) * 0.5 * std::pow(0.5, k - 1);
            tail -= pmf[static_cast<std::size_t>(k)];
        }
        pmf[8] = tail;
        double chi2 = 0.0;
        int bins = 0;
        for (std::size_t k = 0; k < 9; ++k) {
            if (pmf[k] == 0.0) {
                EXPECT_EQ(counts[k], 0.0);
                continue;
            }
            const double expected = n * pmf[k];
            chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
            ++bins;
        }
        const boost::math::chi_squared dist(bins - 1);
        EXPECT_LT(chi2, boost::math::quantile(dist, 0.99)) << "rho=" << rho;
    }
}

TEST(SampleChangeTime, FirstTwoProbabilities) {
    Rng rng(4);
    const ChangeSpec spec{0.0, 0.5};
    const int n = 200'000;
    int ones = 0, twos = 0;
    for (int i = 0; i < n; ++i) {
        const Slot t = sample_change_time(spec, rng);
        ones += t == 1;
        twos += t == 2;
    }
    EXPECT_NEAR(ones / static_cast<double>(n), 0.5, 4.0 * std::sqrt(0.25 / n));
    EXPECT_NEAR(twos / static_cast<double>(n), 0.25, 4.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(BatchChangeProb, Examples) {
    EXPECT_DOUBLE_EQ(batch_change_prob(0.37, 1), 0.37);
    EXPECT_NEAR(batch_change_prob(1e-300, 34), 0.0, 1e-290);
    const long double oracle = 1.0L - std::pow(0.9995L, 34);
    EXPECT_NEAR(batch_change_prob(0.0005, 34), static_cast<double>(oracle), 1e-15);
    EXPECT_NEAR(batch_change_prob(0.0005, 34), 0.016860, 5e-7);
    EXPECT_THROW(batch_change_prob(0.1, 0), InvalidArgument);
}

TEST(BatchChangeProb, CompositionIdentity) {
    for (double p : {1e-4, 0.003, 0.05, 0.4}) {
        for (int a = 1; a <= 7; ++a) {
            for (int b = 1; b <= 7; ++b) {
                const double lhs = batch_change_prob(p, a * b);
                const double rhs = 1.0 - std::pow(1.0 - batch_change_prob(p, a), b);
                EXPECT_NEAR(lhs, rhs, 1e-13) << p << " " << a << " " << b;
            }
        }
    }
}

TEST(LogLikelihood, UnitGaussianExamples) {
    const auto m = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(log_likelihood_ratio(m, 0.5), 0.0, 1e-15);
    EXPECT_NEAR(log_likelihood_ratio(m, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(log_likelihood(m, 0, 0.0), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
    for (double x : {-40.0, -3.0, 0.0, 7.5, 40.0}) {
        EXPECT_TRUE(std::isfinite(log_likelihood(m, 0, x)));
        EXPECT_TRUE(std::isfinite(log_likelihood(m, 1, x)));
    }
}

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    }
    return s * h / 3.0;
}

} // namespace

TEST(LogLikelihood, DensitiesIntegrateToOne) {
    for (const auto &m : {ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0), ObservationModel::gaussian(-2.0, 0.3, 4.0, 5.0)}) {
        for (int h : {0, 1}) {
            const double total = simpson([&](double x) { return std::exp(log_likelihood(m, h, x)); }, -40.0, 40.0, 200'000);
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
    }
}

TEST(KlDivergence, ClosedFormAndQuadrature) {
    EXPECT_NEAR(kl_divergence(ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0)), 0.5, 1e-15);
    EXPECT_NEAR(kl_divergence(ObservationModel::gaussian(0.0, 1.0, 2.0, 1.0)), 2.0, 1e-15);
    EXPECT_EQ(kl_divergence(ObservationModel::gaussian(0.3, 2.0, 0.3, 2.0)), 0.0);
    for (const auto &m : {ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0), ObservationModel::gaussian(0.0, 1.0, 0.5, 2.5),
                          ObservationModel::gaussian(1.0, 0.5, -1.0, 0.7)}) {
        const double quad = simpson(
            [&](double x) {
                const double l1 = log_likelihood(m, 1, x);
                return std::exp(l1) * (l1 - log_likelihood(m, 0, x));
            },
            -40.0, 40.0, 200'000);
        EXPECT_NEAR(kl_divergence(m), quad, 1e-6);
        EXPECT_GE(kl_divergence(m), 0.0);
    }
}

TEST(SampleObservation, MeansWithinClt) {
    const auto m = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    Rng rng(5);
    const int n = 1'000'000;
    for (int theta : {0, 1}) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            sum += sample_observation(m, theta, rng);
        }
        EXPECT_NEAR(sum / n, theta == 0 ? 0.0 : 1.0, 4.0 / std::sqrt(n));
    }
}

TEST(SampleObservation, IdenticalLawsPassKolmogorovSmirnov) {
    const auto m = ObservationModel::gaussian(0.5, 2.0, 0.5, 2.0);
    ASSERT_TRUE(m.uninformative());
    Rng rng(6);
    const int n = 20'000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = sample_observation(m, 0, rng);
        b[static_cast<std::size_t>(i)] = sample_observation(m, 1, rng);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
    }
    // Two-sample critical value at the 1% level.
    EXPECT_LT(d, 1.628 * std::sqrt(2.0 / n));
}

TEST(ObservationModel, Validation) {
    EXPECT_THROW(ObservationModel::gaussian(0.0, 0.0, 1.0, 1.0), InvalidArgument);
    EXPECT_THROW(ObservationModel::gaussian(0.0, 1.0, 1.0, -1.0), InvalidArgument);
    EXPECT_EQ(observation_family_from_string("normal"), ObservationFamily::gaussian);
    EXPECT_THROW(observation_family_from_string("cauchy"), InvalidArgument);
}

TEST(NatureTrajectory, ThetaIsMonotone) {
    const NatureTrajectory t{17};
    for (Slot k = 0; k < 40; ++k) {
        EXPECT_EQ(t.theta_at(k), k >= 17 ? 1 : 0);
        EXPECT_LE(t.theta_at(k), t.theta_at(k + 1));
    }
}
