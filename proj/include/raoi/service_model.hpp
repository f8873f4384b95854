#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "raoi/error.hpp"
#include "raoi/random.hpp"

namespace raoi {

enum class ServiceFamily { Exponential, Deterministic };

/// Service-time law S. Both families have mean 1/rate; the deterministic
/// family is the point mass at 1/rate.
struct ServiceModel {
    ServiceFamily family = ServiceFamily::Exponential;
    double rate = 1.0;

    ServiceModel() = default;
    ServiceModel(ServiceFamily f, double mu) : family(f), rate(mu) {
        if (!(mu > 0.0) || !std::isfinite(mu)) {
            throw DomainError("service rate must be positive and finite");
        }
    }

    static ServiceModel exponential(double mu) { return {ServiceFamily::Exponential, mu}; }
    static ServiceModel deterministic(double mu) { return {ServiceFamily::Deterministic, mu}; }

    double mean() const { return 1.0 / rate; }

    friend bool operator==(const ServiceModel&, const ServiceModel&) = default;
};

inline std::string_view family_name(ServiceFamily f) {
    return f == ServiceFamily::Exponential ? "exp" : "det";
}

inline ServiceFamily parse_family(std::string_view s) {
    if (s == "exp") return ServiceFamily::Exponential;
    if (s == "det") return ServiceFamily::Deterministic;
    throw DomainError("unknown service family '" + std::string(s) + "' (expected exp|det)");
}

/// E[exp(-gamma S)].
inline double mgf(const ServiceModel& model, double gamma) {
    if (!(gamma >= 0.0)) throw DomainError("mgf requires gamma >= 0");
    switch (model.family) {
    case ServiceFamily::Exponential: return model.rate / (gamma + model.rate);
    case ServiceFamily::Deterministic: return std::exp(-gamma / model.rate);
    }
    return 0.0;
}

/// E[S^k]: k!/mu^k for exponential, mu^-k for deterministic.
inline double moment(const ServiceModel& model, int k) {
    if (k <= 0) throw DomainError("moment order must be positive");
    const double scale = std::pow(model.rate, -k);
    if (model.family == ServiceFamily::Deterministic) return scale;
    return std::tgamma(k + 1.0) * scale;
}

/// P[S > s].
inline double survival(const ServiceModel& model, double s) {
    if (s < 0.0) return 1.0;
    if (model.family == ServiceFamily::Exponential) return std::exp(-model.rate * s);
    return s < model.mean() ? 1.0 : 0.0;
}

/// Probability density of S; deterministic service has no density (point mass).
inline double density(const ServiceModel& model, double s) {
    if (model.family != ServiceFamily::Exponential) {
        throw DomainError("deterministic service has a point mass, not a density");
    }
    return s < 0.0 ? 0.0 : model.rate * std::exp(-model.rate * s);
}

inline double sample(const ServiceModel& model, RandomStream& rng) {
    if (model.family == ServiceFamily::Deterministic) return 1.0 / model.rate;
    return rng.exponential(model.rate);
}

/// Law of the residual service time seen by a Poisson arrival that finds the
/// server busy: density P[S > r] / E[S].
struct ResidualLaw {
    ServiceModel parent;
};

/// Residual density in closed form. Exponential: the parent law itself.
/// Deterministic: Uniform[0, 1/mu].
inline double residual_density(const ResidualLaw& law, double r) {
    if (r < 0.0) throw DomainError("residual density requires r >= 0");
    const double mu = law.parent.rate;
    if (law.parent.family == ServiceFamily::Exponential) return mu * std::exp(-mu * r);
    return r < 1.0 / mu ? mu : 0.0;
}

/// The generic P[S > r]/E[S] form, kept separate from the closed forms above
/// so that tests can compare the two.
inline double residual_density_generic(const ResidualLaw& law, double r) {
    if (r < 0.0) throw DomainError("residual density requires r >= 0");
    return survival(law.parent, r) / law.parent.mean();
}

/// Upper end of the residual support (infinity for exponential).
inline double residual_support_end(const ResidualLaw& law) {
    if (law.parent.family == ServiceFamily::Deterministic) return law.parent.mean();
    return INFINITY;
}

/// E[exp(-gamma eta)] = (1 - mgf(S, gamma)) / (gamma E[S]), evaluated without
/// cancellation near gamma = 0.
inline double residual_mgf(const ResidualLaw& law, double gamma) {
    if (!(gamma >= 0.0)) throw DomainError("residual mgf requires gamma >= 0");
    if (gamma == 0.0) return 1.0;
    const double mu = law.parent.rate;
    if (law.parent.family == ServiceFamily::Exponential) return mu / (gamma + mu);
    return -std::expm1(-gamma / mu) * mu / gamma;
}

inline double sample_residual(const ResidualLaw& law, RandomStream& rng) {
    if (law.parent.family == ServiceFamily::Exponential) return rng.exponential(law.parent.rate);
    return (1.0 - rng.uniform_open0()) * law.parent.mean();
}

}  // namespace raoi
