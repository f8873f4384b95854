#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "raoi/quadrature.hpp"
#include "raoi/random.hpp"
#include "raoi/service_model.hpp"

using namespace raoi;

namespace {

const ServiceModel kExp = ServiceModel::exponential(1.0);
const ServiceModel kDet = ServiceModel::deterministic(1.0);

}  // namespace

TEST(ServiceModel, MgfClosedForms) {
    EXPECT_DOUBLE_EQ(mgf(kExp, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(mgf(ServiceModel::exponential(2.0), 1.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mgf(kDet, 1.0), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(mgf(ServiceModel::deterministic(2.0), 1.0), std::exp(-0.5));
    EXPECT_DOUBLE_EQ(mgf(kExp, 0.0), 1.0);
    EXPECT_THROW(mgf(kExp, -1.0), DomainError);
}

TEST(ServiceModel, MgfInUnitIntervalAndDecreasing) {
    for (const auto& m : {kExp, kDet, ServiceModel::exponential(3.0), ServiceModel::deterministic(0.25)}) {
        double prev = 1.0;
        for (double g = 0.01; g < 60.0; g *= 1.3) {
            const double v = mgf(m, g);
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 1.0);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
}

TEST(ServiceModel, Moments) {
    EXPECT_DOUBLE_EQ(moment(kExp, 1), 1.0);
    EXPECT_DOUBLE_EQ(moment(ServiceModel::exponential(2.0), 2), 0.5);
    EXPECT_DOUBLE_EQ(moment(ServiceModel::exponential(2.0), 3), 6.0 / 8.0);
    EXPECT_DOUBLE_EQ(moment(ServiceModel::deterministic(2.0), 3), 0.125);
    EXPECT_THROW(moment(kExp, 0), DomainError);
}

TEST(ServiceModel, InvalidRates) {
    EXPECT_THROW(ServiceModel::exponential(0.0), DomainError);
    EXPECT_THROW(ServiceModel::deterministic(-1.0), DomainError);
    EXPECT_THROW(ServiceModel::exponential(INFINITY), DomainError);
    EXPECT_THROW(parse_family("gamma"), DomainError);
    EXPECT_EQ(parse_family("det"), ServiceFamily::Deterministic);
}

TEST(ServiceModel, DensityAndSurvival) {
    EXPECT_DOUBLE_EQ(density(kExp, 2.0), std::exp(-2.0));
    EXPECT_DOUBLE_EQ(survival(kExp, 2.0), std::exp(-2.0));
    EXPECT_DOUBLE_EQ(survival(kDet, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(survival(kDet, 1.5), 0.0);
    EXPECT_THROW(density(kDet, 0.5), DomainError);
}

// Derivatives of E[e^{-gS}] at 0 from one-sided second-order differences:
// M'(0) = -E[S], M''(0) = E[S^2].
TEST(ServiceModel, MomentsMatchMgfDerivatives) {
    for (const auto& m : {kExp, kDet, ServiceModel::exponential(2.5), ServiceModel::deterministic(0.5)}) {
        const double h = 1e-3;
        const double f0 = mgf(m, 0), f1 = mgf(m, h), f2 = mgf(m, 2 * h), f3 = mgf(m, 3 * h);
        const double d1 = (-3 * f0 + 4 * f1 - f2) / (2 * h);
        const double d2 = (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h);
        EXPECT_NEAR(-d1, moment(m, 1), 1e-4 * moment(m, 1));
        EXPECT_NEAR(d2, moment(m, 2), 1e-4 * moment(m, 2));
    }
}

TEST(ServiceModel, EmpiricalMomentsWithinFiveStandardErrors) {
    for (const auto& m : {ServiceModel::exponential(1.7), ServiceModel::deterministic(1.7)}) {
        RandomStream rng(99, Stream::Service);
        const int n = 1'000'000;
        double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
        for (int i = 0; i < n; ++i) {
            const double x = sample(m, rng);
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
            s4 += x * x * x * x;
        }
        const double m1 = s1 / n, m2 = s2 / n, m4 = s4 / n;
        const double se1 = std::sqrt((m2 - m1 * m1) / n);
        const double se2 = std::sqrt((m4 - m2 * m2) / n);
        EXPECT_LE(std::abs(m1 - moment(m, 1)), 5 * se1 + 1e-15);
        EXPECT_LE(std::abs(m2 - moment(m, 2)), 5 * se2 + 1e-15);
    }
}

TEST(ResidualLaw, ExponentialIsMemoryless) {
    for (double g : {0.1, 1.0, 10.0, 0.0}) {
        EXPECT_EQ(residual_mgf(ResidualLaw{kExp}, g), mgf(kExp, g));
        EXPECT_EQ(residual_mgf(ResidualLaw{ServiceModel::exponential(3.0)}, g), mgf(ServiceModel::exponential(3.0), g));
    }
}

TEST(ResidualLaw, MgfEqualsQuadratureOfDensity) {
    for (const auto& m : {kExp, kDet, ServiceModel::exponential(0.4), ServiceModel::deterministic(3.0)}) {
        const ResidualLaw law{m};
        for (double g : {0.1, 1.0, 10.0}) {
            const double end = m.family == ServiceFamily::Deterministic ? residual_support_end(law)
                                                                         : quad::tail_cutoff(0.0, m.rate);
            const double q = quad::integrate([&](double r) { return std::exp(-g * r) * residual_density(law, r); },
                                             0.0, end, 1e-12)
                                 .value;
            EXPECT_NEAR(residual_mgf(law, g), q, 1e-8);
        }
    }
}

TEST(ResidualLaw, DeterministicClosedFormMatchesGenericFormula) {
    for (double mu : {0.5, 1.0, 4.0}) {
        const ResidualLaw law{ServiceModel::deterministic(mu)};
        for (double r = 0.0; r < 1.2 / mu; r += 0.013 / mu) {
            EXPECT_DOUBLE_EQ(residual_density(law, r), residual_density_generic(law, r)) << "r=" << r;
        }
        EXPECT_DOUBLE_EQ(residual_support_end(law), 1.0 / mu);
    }
    const ResidualLaw e{kExp};
    for (double r : {0.0, 0.3, 2.0}) EXPECT_DOUBLE_EQ(residual_density(e, r), residual_density_generic(e, r));
}

TEST(ResidualLaw, SampleMeanIsSecondMomentOverTwiceMean) {
    for (const auto& m : {ServiceModel::exponential(2.0), ServiceModel::deterministic(2.0)}) {
        const ResidualLaw law{m};
        RandomStream rng(5, Stream::Auxiliary);
        const int n = 1'000'000;
        double s = 0, ss = 0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_residual(law, rng);
            s += x;
            ss += x * x;
        }
        const double mean = s / n;
        const double se = std::sqrt((ss / n - mean * mean) / n);
        EXPECT_NEAR(mean, moment(m, 2) / (2 * moment(m, 1)), 5 * se);
    }
}

TEST(RandomStream, SeedsAndStreamsAreIndependentAndReproducible) {
    RandomStream a(1, Stream::Arrivals), b(1, Stream::Arrivals), c(1, Stream::Service), d(2, Stream::Arrivals);
    const double x = a.uniform_open0();
    EXPECT_EQ(x, b.uniform_open0());
    EXPECT_NE(x, c.uniform_open0());
    EXPECT_NE(x, d.uniform_open0());
    for (int i = 0; i < 100000; ++i) {
        const double u = a.uniform_open0();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}
