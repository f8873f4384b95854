#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "raoi/age_trace.hpp"
#include "raoi/error.hpp"
#include "raoi/quadrature.hpp"
#include "raoi/random.hpp"
#include "raoi/service_model.hpp"
#include "raoi/simulator.hpp"

namespace raoi {

struct AnalyticQuery {
    Discipline discipline = Discipline::PreemptiveDrop;
    ServiceModel service;
    double arrival_rate = 1.0;
    AgeProcess metric = AgeProcess::Gamma;
    int order = 1;
};

/// A closed-form or quadrature value tagged with the catalog entry that
/// produced it.
struct AnalyticResult {
    double value = 0.0;
    std::string formula_id;
    AnalyticQuery query;
    std::optional<double> external_delta_r2;  // caller-supplied E[Delta_R^2], if used
};

/// How the conditional-area terms A (single-slot blocking) and K (replace
/// buffer) are evaluated.
///  - Printed: the published closed forms, constants kept verbatim.
///  - Quadrature: adaptive quadrature of the published defining double
///    integral, which weights the elapsed and residual service by the product
///    of their marginal laws.
///  - JointLaw: the same area with the stationary joint law of (elapsed,
///    residual) service, f_S(a + r) / E[S]; for the replace buffer the
///    elapsed system time adds the independent buffer wait W = T - S.
///    Diagnostic only; the replace-buffer variant needs memoryless service.
enum class AreaMethod { Printed, Quadrature, JointLaw };

inline std::string_view area_method_name(AreaMethod m) {
    switch (m) {
    case AreaMethod::Printed: return "printed";
    case AreaMethod::Quadrature: return "quadrature";
    case AreaMethod::JointLaw: return "joint";
    }
    return "?";
}

struct CatalogEntry {
    std::string_view id;
    std::string_view description;
};

// clang-format off
inline constexpr std::array kFormulaCatalog = {
    CatalogEntry{"prmp-exp-G1", "E[Gamma] = 1/mu"},
    CatalogEntry{"prmp-det-G1", "E[Gamma] = (e^{lambda/mu} - 1)/lambda"},
    CatalogEntry{"blk-exp-G1", "E[Gamma] = (2 l^2 + l m)/(l m (l + m))"},
    CatalogEntry{"blk-det-G1", "E[Gamma] = (3 l^2 + 2 l m)/(2 l m (l + m))"},
    CatalogEntry{"rpl-exp-G1", "E[Gamma] = 2/m + l/(l+m)^2 + 1/(l+m) - 2(l+m)/(l^2+lm+m^2)"},
    CatalogEntry{"rpl-det-G1", "E[Gamma] = E[Delta_R] - 1/lambda"},
    CatalogEntry{"fcfs-exp-G1", "E[Gamma] = (1/m)(1 + 1/rho + rho^2/(1-rho)) - 1/lambda"},
    CatalogEntry{"prmp-exp-D1", "E[Delta_R] = (l+m)/(l m)"},
    CatalogEntry{"prmp-det-D1", "E[Delta_R] = e^{l/m}/l"},
    CatalogEntry{"blk-exp-D1", "E[Delta_R] = (2l^2 + 2lm + m^2)/(l m (l+m))"},
    CatalogEntry{"blk-det-D1", "E[Delta_R] = (3l^2 + 4lm + 2m^2)/(2 l m (l+m))"},
    CatalogEntry{"rpl-exp-D1", "E[Delta_R] = 1/l + 2/m + l/(l+m)^2 + 1/(l+m) - 2(l+m)/(l^2+lm+m^2)"},
    CatalogEntry{"rpl-det-D1", "E[Delta_R] = (1/m)(3/2 + (m e^x - l - m)/(l e^x) + (l+2m)m/(2l(m + l e^x)))"},
    CatalogEntry{"fcfs-exp-D1", "E[Delta_R] = (1/m)(1 + 1/rho + rho^2/(1-rho))"},
    CatalogEntry{"prmp-exp-D2", "E[Delta_R^2] = 2(l^2+lm+m^2)/(l^2 m^2)"},
    CatalogEntry{"prmp-det-D2", "E[Delta_R^2] = 2(m e^x - l) e^x/(l^2 m)"},
    CatalogEntry{"blk-exp-D2", "E[Delta_R^2] from the renewal third-moment expansion"},
    CatalogEntry{"blk-det-D2", "E[Delta_R^2] from the renewal third-moment expansion"},
    CatalogEntry{"prmp-exp-G2", "E[Gamma^2] = 2(l^2+lm+m^2)/(l m^2 (l+m))"},
    CatalogEntry{"prmp-det-G2", "E[Gamma^2] = 2(m e^x - l)(e^x - 1)/(l^2 m)"},
    CatalogEntry{"prmp-generic-G2", "E[Gamma^2] = E[Delta_R^2](1 - MGF_lambda)"},
    CatalogEntry{"blk-pI", "p_I = 1/(1 + lambda E[S])"},
    CatalogEntry{"rpl-pI", "p_I = MGF_lambda/(MGF_lambda + lambda E[S])"},
    CatalogEntry{"blk-exp-A-printed", "A = 2m/(l^3 (l + 2m))"},
    CatalogEntry{"blk-exp-A-quadrature", "A = (1/l) int int_{s>=r} e^{-lr}(s-r)^2 f_S(s) f_eta(r)"},
    CatalogEntry{"blk-exp-A-joint", "A = (1/l) int int_{s>=r} e^{-lr}(s-r)^2 f_S(s)/E[S]"},
    CatalogEntry{"blk-det-A-printed", "A = (m/l^4)(x^2 - 2x + 2 - 2e^{-x})"},
    CatalogEntry{"blk-det-A-quadrature", "A = (m/l) int_0^{1/m} e^{-lr}(1/m - r)^2 dr"},
    CatalogEntry{"blk-det-A-joint", "A = (m/l) int_0^{1/m} e^{-lr}(1/m - r)^2 dr"},
    CatalogEntry{"blk-exp-G2-printed", "E[Gamma^2] = (E[Delta_R^2] + l A) l/(l+m), printed A"},
    CatalogEntry{"blk-exp-G2-quadrature", "E[Gamma^2] = (E[Delta_R^2] + l A) l/(l+m), quadrature A"},
    CatalogEntry{"blk-exp-G2-joint", "E[Gamma^2] = (E[Delta_R^2] + l A) l/(l+m), joint-law A"},
    CatalogEntry{"blk-det-G2-printed", "E[Gamma^2] deterministic assembly, printed A"},
    CatalogEntry{"blk-det-G2-quadrature", "E[Gamma^2] deterministic assembly, quadrature A"},
    CatalogEntry{"blk-det-G2-joint", "E[Gamma^2] deterministic assembly, joint-law A"},
    CatalogEntry{"rpl-exp-fT", "f_T(t) = c1 e^{-mt} - c2 e^{-(l+m)t}"},
    CatalogEntry{"rpl-det-fT", "f_T(t) = e^{-x} delta(t - 1/m) + l e^{-l(t - 1/m)} on [1/m, 2/m]"},
    CatalogEntry{"rpl-exp-K-printed", "K = K1 - K2 with the published c1, c2"},
    CatalogEntry{"rpl-exp-K-quadrature", "K = ((1-MGF)/l) int int_{t>=r} e^{-lr}(t-r)^2 f_T(t) f_zeta(r)"},
    CatalogEntry{"rpl-exp-K-joint", "K = ((1-MGF)/l) E[e^{-l r}(W + a)^2], (a, r) ~ f_S(a+r)/E[S]"},
    CatalogEntry{"rpl-det-K-printed", "K = K1 + K2 published closed forms"},
    CatalogEntry{"rpl-det-K-quadrature", "K = ((1-MGF)/l) int int_{t>=r} e^{-lr}(t-r)^2 f_T(t) f_zeta(r)"},
    CatalogEntry{"rpl-exp-G2-printed", "E[Gamma^2] = (E[Delta_R^2] + l K) l/(l+m), printed K"},
    CatalogEntry{"rpl-exp-G2-quadrature", "E[Gamma^2] = (E[Delta_R^2] + l K) l/(l+m), quadrature K"},
    CatalogEntry{"rpl-exp-G2-joint", "E[Gamma^2] = E[Delta_R^2](1 - MGF) + l p_B K, joint-law K"},
    CatalogEntry{"rpl-det-G2-printed", "E[Gamma^2] deterministic assembly, printed K"},
    CatalogEntry{"rpl-det-G2-quadrature", "E[Gamma^2] deterministic assembly, quadrature K"},
};
// clang-format on

inline bool in_catalog(std::string_view id) {
    return std::any_of(kFormulaCatalog.begin(), kFormulaCatalog.end(),
                       [&](const CatalogEntry& e) { return e.id == id; });
}

namespace detail {

inline std::string_view discipline_tag(Discipline d) {
    switch (d) {
    case Discipline::FcfsUnbounded: return "fcfs";
    case Discipline::PreemptiveDrop: return "prmp";
    case Discipline::BlockingSingle: return "blk";
    case Discipline::ReplaceBuffer: return "rpl";
    }
    return "?";
}

inline std::string formula_id(Discipline d, ServiceFamily f, std::string_view suffix) {
    std::string id(discipline_tag(d));
    id += '-';
    id += family_name(f);
    id += '-';
    id += suffix;
    return id;
}

inline AnalyticResult make_result(std::string id, double value, const AnalyticQuery& q,
                                  std::optional<double> delta_r2 = std::nullopt) {
    if (!in_catalog(id)) throw std::logic_error("formula id '" + id + "' is not registered");
    return AnalyticResult{value, std::move(id), q, delta_r2};
}

inline void require_rate(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("arrival rate must be positive and finite");
}

inline void require_stable(const AnalyticQuery& q) {
    if (q.discipline == Discipline::FcfsUnbounded && !(q.arrival_rate < q.service.rate)) {
        throw StabilityError("fcfs queue is unstable for lambda >= mu");
    }
}

inline std::string describe(const AnalyticQuery& q) {
    return std::string(discipline_name(q.discipline)) + "/" + std::string(family_name(q.service.family)) +
           " " + std::string(process_name(q.metric)) + " k=" + std::to_string(q.order);
}

// Exponential inter-arrival moments E[X^k] = k!/lambda^k.
inline double interarrival_moment(double lambda, int k) { return std::tgamma(k + 1.0) / std::pow(lambda, k); }

}  // namespace detail

/// Classical age moments E[Delta_R^k] for the combinations with a known
/// closed form. Anything else throws NotInCatalogError.
inline AnalyticResult classical_aoi_moments(Discipline d, const ServiceModel& service, double lambda, int k) {
    detail::require_rate(lambda);
    const AnalyticQuery q{d, service, lambda, AgeProcess::DeltaR, k};
    detail::require_stable(q);
    const double l = lambda;
    const double m = service.rate;
    const double x = l / m;
    const bool exp_family = service.family == ServiceFamily::Exponential;
    const auto id = [&](std::string_view s) { return detail::formula_id(d, service.family, s); };

    if (k == 1) {
        switch (d) {
        case Discipline::PreemptiveDrop:
            return detail::make_result(id("D1"), exp_family ? (l + m) / (l * m) : std::exp(x) / l, q);
        case Discipline::BlockingSingle:
            return detail::make_result(id("D1"),
                                       exp_family ? (2 * l * l + 2 * l * m + m * m) / (l * m * (l + m))
                                                  : (3 * l * l + 4 * l * m + 2 * m * m) / (2 * l * m * (l + m)),
                                       q);
        case Discipline::ReplaceBuffer:
            if (exp_family) {
                const double v = 1 / l + 2 / m + l / ((l + m) * (l + m)) + 1 / (l + m) -
                                 2 * (l + m) / (l * l + l * m + m * m);
                return detail::make_result(id("D1"), v, q);
            } else {
                // Written in e^{-x} so that large lambda does not overflow.
                const double e = std::exp(-x);
                const double v = (1 / m) * (1.5 + (m - (l + m) * e) / l + (l + 2 * m) * m * e / (2 * l * (m * e + l)));
                return detail::make_result(id("D1"), v, q);
            }
        case Discipline::FcfsUnbounded:
            if (exp_family) {
                const double rho = x;
                return detail::make_result(id("D1"), (1 / m) * (1 + 1 / rho + rho * rho / (1 - rho)), q);
            }
            break;
        }
    } else if (k == 2) {
        switch (d) {
        case Discipline::PreemptiveDrop:
            return detail::make_result(id("D2"),
                                       exp_family ? 2 * (l * l + l * m + m * m) / (l * l * m * m)
                                                  : 2 * (m * std::exp(x) - l) * std::exp(x) / (l * l * m),
                                       q);
        case Discipline::BlockingSingle: {
            // Renewal expansion with X ~ Exp(lambda) and the family's moments of S.
            const double x1 = detail::interarrival_moment(l, 1);
            const double x2 = detail::interarrival_moment(l, 2);
            const double x3 = detail::interarrival_moment(l, 3);
            const double s1 = moment(service, 1);
            const double s2 = moment(service, 2);
            const double s3 = moment(service, 3);
            const double v = (x3 + s3 + 6 * x2 * s1 + 6 * x1 * s2 + 6 * x1 * s1 * s1 + 6 * s1 * s2) / (3 * (x1 + s1));
            return detail::make_result(id("D2"), v, q);
        }
        default: break;
        }
    } else if (k <= 0) {
        throw DomainError("moment order must be positive");
    }
    throw NotInCatalogError(detail::describe(q) + " has no closed form; estimate it by simulation");
}

/// E[Gamma] in closed form for every cataloged (discipline, family).
inline AnalyticResult raoi_first_moment(const AnalyticQuery& query) {
    AnalyticQuery q = query;
    q.metric = AgeProcess::Gamma;
    q.order = 1;
    detail::require_rate(q.arrival_rate);
    detail::require_stable(q);
    const double l = q.arrival_rate;
    const double m = q.service.rate;
    const double x = l / m;
    const bool exp_family = q.service.family == ServiceFamily::Exponential;
    const auto id = detail::formula_id(q.discipline, q.service.family, "G1");

    switch (q.discipline) {
    case Discipline::PreemptiveDrop:
        return detail::make_result(id, exp_family ? 1 / m : std::expm1(x) / l, q);
    case Discipline::BlockingSingle:
        return detail::make_result(id,
                                   exp_family ? (2 * l * l + l * m) / (l * m * (l + m))
                                              : (3 * l * l + 2 * l * m) / (2 * l * m * (l + m)),
                                   q);
    case Discipline::ReplaceBuffer:
        if (exp_family) {
            return detail::make_result(
                id, 2 / m + l / ((l + m) * (l + m)) + 1 / (l + m) - 2 * (l + m) / (l * l + l * m + m * m), q);
        }
        return detail::make_result(
            id, classical_aoi_moments(q.discipline, q.service, l, 1).value - 1 / l, q);
    case Discipline::FcfsUnbounded:
        if (exp_family) {
            const double rho = x;
            return detail::make_result(id, (1 / m) * (1 + 1 / rho + rho * rho / (1 - rho)) - 1 / l, q);
        }
        break;
    }
    throw NotInCatalogError(detail::describe(q));
}

/// E[Gamma^2] under preemption, from the specialised closed forms.
inline AnalyticResult raoi_second_moment_preemptive(const ServiceModel& service, double lambda) {
    detail::require_rate(lambda);
    const AnalyticQuery q{Discipline::PreemptiveDrop, service, lambda, AgeProcess::Gamma, 2};
    const double l = lambda;
    const double m = service.rate;
    const double x = l / m;
    const double v = service.family == ServiceFamily::Exponential
                         ? 2 * (l * l + l * m + m * m) / (l * m * m * (l + m))
                         : 2 * (m * std::exp(x) - l) * std::expm1(x) / (l * l * m);
    return detail::make_result(detail::formula_id(q.discipline, service.family, "G2"), v, q);
}

/// E[Gamma^2] = E[Delta_R^2] (1 - MGF_lambda) for any service law, given
/// E[Delta_R^2] from elsewhere.
inline AnalyticResult raoi_second_moment_preemptive(const ServiceModel& service, double lambda, double delta_r2) {
    detail::require_rate(lambda);
    if (!(delta_r2 >= 0.0)) throw DomainError("E[Delta_R^2] must be nonnegative");
    const AnalyticQuery q{Discipline::PreemptiveDrop, service, lambda, AgeProcess::Gamma, 2};
    return detail::make_result("prmp-generic-G2", delta_r2 * (1 - mgf(service, lambda)), q, delta_r2);
}

struct StationaryProbs {
    double idle = 1.0;
    double busy = 0.0;
};

/// Single-slot blocking: p_I = 1/(1 + lambda E[S]).
inline StationaryProbs blocking_stationary_probs(const ServiceModel& service, double lambda) {
    detail::require_rate(lambda);
    const double load = lambda * service.mean();
    return {1 / (1 + load), load / (1 + load)};
}

/// Replace buffer: p_I = MGF_lambda / (MGF_lambda + lambda E[S]).
inline StationaryProbs replace_stationary_probs(const ServiceModel& service, double lambda) {
    detail::require_rate(lambda);
    const double g = mgf(service, lambda);
    const double load = lambda * service.mean();
    return {g / (g + load), load / (g + load)};
}

/// Area A of the blocking discipline for k = 2. The deterministic point mass
/// is integrated out analytically in every method.
inline AnalyticResult blocking_area_A(const ServiceModel& service, double lambda, AreaMethod method,
                                      int k = 2) {
    detail::require_rate(lambda);
    if (k != 2) throw DomainError("area A is defined for second moments only");
    const AnalyticQuery q{Discipline::BlockingSingle, service, lambda, AgeProcess::Gamma, 2};
    const double l = lambda;
    const double m = service.rate;
    const auto id = detail::formula_id(q.discipline, service.family,
                                       std::string("A-") + std::string(area_method_name(method)));

    if (service.family == ServiceFamily::Deterministic) {
        if (method == AreaMethod::Printed) {
            const double x = l / m;
            return detail::make_result(id, (m / std::pow(l, 4)) * (x * x - 2 * x + 2 - 2 * std::exp(-x)), q);
        }
        const double s = 1 / m;
        const auto f = [&](double r) { return std::exp(-l * r) * (s - r) * (s - r) * m / l; };
        return detail::make_result(id, quad::integrate(f, 0.0, s).value, q);
    }

    switch (method) {
    case AreaMethod::Printed:
        return detail::make_result(id, 2 * m / (l * l * l * (l + 2 * m)), q);
    case AreaMethod::Quadrature: {
        const ResidualLaw residual{service};
        const auto f = [&](double r, double s) {
            return std::exp(-l * r) * (s - r) * (s - r) * density(service, s) * residual_density(residual, r) / l;
        };
        const double r_max = quad::tail_cutoff(0.0, l + m);
        const auto r = quad::integrate2d(
            f, 0.0, r_max, [](double r0) { return r0; }, [&](double r0) { return quad::tail_cutoff(r0, m); });
        return detail::make_result(id, r.value, q);
    }
    case AreaMethod::JointLaw: {
        const auto f = [&](double r, double s) {
            return std::exp(-l * r) * (s - r) * (s - r) * density(service, s) / service.mean() / l;
        };
        const double r_max = quad::tail_cutoff(0.0, l + m);
        const auto r = quad::integrate2d(
            f, 0.0, r_max, [](double r0) { return r0; }, [&](double r0) { return quad::tail_cutoff(r0, m); });
        return detail::make_result(id, r.value, q);
    }
    }
    throw DomainError("unsupported area method");
}

/// E[Gamma^2] for single-slot blocking: E[Delta_R^2] from the renewal
/// expansion, A from the chosen method, combined with the published
/// exponential or deterministic weights.
inline AnalyticResult blocking_second_moment(const ServiceModel& service, double lambda,
                                             AreaMethod method = AreaMethod::Quadrature) {
    const double l = lambda;
    const double m = service.rate;
    const double d2 = classical_aoi_moments(Discipline::BlockingSingle, service, l, 2).value;
    const double a = blocking_area_A(service, l, method).value;
    const AnalyticQuery q{Discipline::BlockingSingle, service, lambda, AgeProcess::Gamma, 2};
    const auto id = detail::formula_id(q.discipline, service.family,
                                       std::string("G2-") + std::string(area_method_name(method)));
    if (service.family == ServiceFamily::Exponential) {
        return detail::make_result(id, (d2 + l * a) * l / (l + m), q);
    }
    const double x = l / m;
    const double p_idle = m / (l + m);
    const double p_busy = l / (l + m);
    const double one_minus_e = -std::expm1(-x);
    const double v = d2 * (one_minus_e * p_idle + (1 - m * one_minus_e / l) * p_busy) + l * a * p_busy;
    return detail::make_result(id, v, q);
}

/// Density of the system time T of a delivered packet under the replace
/// buffer. Exponential service: c1 e^{-mu t} - c2 e^{-(lambda+mu) t}.
/// Deterministic service: a point mass e^{-lambda/mu} at 1/mu plus
/// lambda e^{-lambda (t - 1/mu)} on [1/mu, 2/mu].
class SystemTimeLaw {
public:
    SystemTimeLaw(const ServiceModel& service, double lambda) : service_(service), lambda_(lambda) {
        detail::require_rate(lambda);
        const double l = lambda;
        const double m = service.rate;
        if (service.family == ServiceFamily::Exponential) {
            const double p_idle = replace_stationary_probs(service, l).idle;
            const double served = p_idle + (m / (l + m)) * (1 - p_idle);
            // A delivered packet either found the server idle (T = S) or waited
            // in the buffer for the residual service, W ~ Exp(lambda + mu).
            direct_fraction_ = p_idle / served;
            c1_ = (m / served) * (p_idle + (1 - p_idle) * m / l);
            c2_ = m * m * (1 - p_idle) / (l * served);
            printed_c1_ = m * p_idle / served * (1 + m / l);
            printed_c2_ = (m * m * m / l) * (1 - p_idle) / served;
        } else {
            direct_fraction_ = std::exp(-l / m);
        }
    }

    const ServiceModel& service() const { return service_; }
    double arrival_rate() const { return lambda_; }
    bool has_atom() const { return service_.family == ServiceFamily::Deterministic; }
    double atom_location() const { return has_atom() ? service_.mean() : 0.0; }
    double atom_mass() const { return has_atom() ? direct_fraction_ : 0.0; }
    double direct_fraction() const { return direct_fraction_; }

    // Normalised mixture coefficients (exponential service).
    double c1() const { return c1_; }
    double c2() const { return c2_; }
    // The coefficients as published; they do not integrate to one in general.
    double printed_c1() const { return printed_c1_; }
    double printed_c2() const { return printed_c2_; }

    double support_begin() const { return has_atom() ? service_.mean() : 0.0; }
    double support_end() const { return has_atom() ? 2 * service_.mean() : INFINITY; }

    /// Absolutely continuous part of the density.
    double density(double t) const {
        const double l = lambda_;
        const double m = service_.rate;
        if (!has_atom()) return t < 0.0 ? 0.0 : c1_ * std::exp(-m * t) - c2_ * std::exp(-(l + m) * t);
        const double s = 1 / m;
        return (t >= s && t <= 2 * s) ? l * std::exp(-l * (t - s)) : 0.0;
    }

    /// Atom mass plus the quadrature of the continuous part.
    double total_mass() const { return moment(0); }

    /// E[T^k]: atom contribution plus quadrature of the continuous part.
    double moment(int k) const {
        const double b = has_atom() ? support_end() : quad::tail_cutoff(0.0, service_.rate);
        const auto f = [&](double t) { return std::pow(t, k) * density(t); };
        return atom_mass() * std::pow(atom_location(), k) + quad::integrate(f, support_begin(), b, 1e-12).value;
    }

    double sample(RandomStream& rng) const {
        const double l = lambda_;
        const double m = service_.rate;
        const bool direct = rng.uniform_open0() <= direct_fraction_;
        if (!has_atom()) {
            const double s = rng.exponential(m);
            return direct ? s : s + rng.exponential(l + m);
        }
        if (direct) return 1 / m;
        // W ~ lambda e^{-lambda w} truncated to [0, 1/mu], by inverse CDF.
        const double u = rng.uniform_open0();
        return 1 / m - std::log1p(-u * -std::expm1(-l / m)) / l;
    }

private:
    ServiceModel service_;
    double lambda_;
    double direct_fraction_ = 0.0;
    double c1_ = 0.0, c2_ = 0.0, printed_c1_ = 0.0, printed_c2_ = 0.0;
};

inline SystemTimeLaw system_time_density(const ServiceModel& service, double lambda) {
    return SystemTimeLaw(service, lambda);
}

struct KTerms {
    double k1 = 0.0;
    double k2 = 0.0;
};

/// The published K1 and K2 closed forms (K = K1 - K2 for exponential
/// service, K1 + K2 for deterministic).
inline KTerms printed_K_terms(const ServiceModel& service, double lambda) {
    const double l = lambda;
    const double m = service.rate;
    const double x = l / m;
    if (service.family == ServiceFamily::Exponential) {
        const SystemTimeLaw law(service, l);
        return {2 * law.printed_c1() / ((l + m) * m * m * (l + 2 * m)),
                law.printed_c2() * m / ((l + m) * std::pow(l + m, 3) * (l + m))};
    }
    const double e = std::exp(-x);
    return {(1 - e) * e * m / std::pow(l, 4) * (x * x - 2 * x + 2 - 2 * e),
            (1 - e) * m / std::pow(l, 5) * (2 + x * x - e * (2 + 4 * x * x) + e * e * (x * x + 2))};
}

/// Area K of the replace buffer for k = 2.
inline AnalyticResult replace_area_K(const ServiceModel& service, double lambda, AreaMethod method, int k = 2) {
    detail::require_rate(lambda);
    if (k != 2) throw DomainError("area K is defined for second moments only");
    if (method == AreaMethod::JointLaw && service.family != ServiceFamily::Exponential) {
        throw DomainError("joint-law K is only assembled for exponential service");
    }
    const AnalyticQuery q{Discipline::ReplaceBuffer, service, lambda, AgeProcess::Gamma, 2};
    const double l = lambda;
    const double m = service.rate;
    const auto id = detail::formula_id(q.discipline, service.family,
                                       std::string("K-") + std::string(area_method_name(method)));
    const SystemTimeLaw law(service, l);

    if (method == AreaMethod::Printed) {
        const auto t = printed_K_terms(service, l);
        return detail::make_result(id, service.family == ServiceFamily::Exponential ? t.k1 - t.k2 : t.k1 + t.k2, q);
    }

    const double prefactor = (1 - mgf(service, l)) / l;
    const ResidualLaw residual{service};
    if (method == AreaMethod::JointLaw) {
        // E[e^{-lambda r} (W + a)^2] with (a, r) ~ f_S(a + r)/E[S] and W independent.
        const double s1 = service.mean();
        const double w1 = law.moment(1) - s1;
        const double w2 = law.moment(2) - 2 * w1 * s1 - raoi::moment(service, 2);
        const auto f = [&](double r, double a) {
            return std::exp(-l * r) * density(service, a + r) / s1 * (w2 + 2 * a * w1 + a * a);
        };
        const auto r = quad::integrate2d(
            f, 0.0, quad::tail_cutoff(0.0, l + m), [](double) { return 0.0; },
            [&](double) { return quad::tail_cutoff(0.0, m); });
        return detail::make_result(id, prefactor * r.value, q);
    }
    if (service.family == ServiceFamily::Exponential) {
        const auto f = [&](double r, double t) {
            return std::exp(-l * r) * (t - r) * (t - r) * law.density(t) * residual_density(residual, r);
        };
        const double r_max = quad::tail_cutoff(0.0, l + m);
        const auto r = quad::integrate2d(
            f, 0.0, r_max, [](double r0) { return r0; }, [&](double r0) { return quad::tail_cutoff(r0, m); });
        return detail::make_result(id, prefactor * r.value, q);
    }
    // Deterministic: residual ~ Uniform[0, 1/mu] and T >= 1/mu >= r, so the
    // atom contributes a one-dimensional integral.
    const double s = 1 / m;
    const auto atom = quad::integrate(
        [&](double r) { return std::exp(-l * r) * (s - r) * (s - r) * m * law.atom_mass(); }, 0.0, s);
    const auto cont = quad::integrate2d(
        [&](double r, double t) { return std::exp(-l * r) * (t - r) * (t - r) * law.density(t) * m; }, 0.0, s,
        [&](double) { return s; }, [&](double) { return 2 * s; });
    return detail::make_result(id, prefactor * (atom.value + cont.value), q);
}

/// Combination step alone, for a given area K.
inline AnalyticResult replace_second_moment_with_area(const ServiceModel& service, double lambda, double delta_r2,
                                                      double k_area, AreaMethod method = AreaMethod::Quadrature) {
    const double l = lambda;
    const double m = service.rate;
    const AnalyticQuery q{Discipline::ReplaceBuffer, service, lambda, AgeProcess::Gamma, 2};
    const auto id = detail::formula_id(q.discipline, service.family,
                                       std::string("G2-") + std::string(area_method_name(method)));
    if (method == AreaMethod::JointLaw) {
        if (service.family != ServiceFamily::Exponential) {
            throw DomainError("joint-law K is only assembled for exponential service");
        }
        const double p_busy = replace_stationary_probs(service, l).busy;
        return detail::make_result(id, delta_r2 * (1 - mgf(service, l)) + l * p_busy * k_area, q, delta_r2);
    }
    if (service.family == ServiceFamily::Exponential) {
        return detail::make_result(id, (delta_r2 + l * k_area) * l / (l + m), q, delta_r2);
    }
    const double x = l / m;
    const double p_busy = l / (l + m * std::exp(-x));
    const double p_idle = 1 - p_busy;
    const double one_minus_e = -std::expm1(-x);
    const double v = delta_r2 * (one_minus_e * p_idle + (1 - m * one_minus_e / l) * p_busy) + l * k_area * p_busy;
    return detail::make_result(id, v, q, delta_r2);
}

/// E[Gamma^2] for the replace buffer. E[Delta_R^2] has no closed form here
/// and must be supplied, typically from a simulation estimate.
inline AnalyticResult replace_second_moment(const ServiceModel& service, double lambda,
                                            std::optional<double> delta_r2,
                                            AreaMethod method = AreaMethod::Quadrature) {
    detail::require_rate(lambda);
    if (!delta_r2) {
        throw DomainError("replace-buffer E[Gamma^2] needs E[Delta_R^2]; run the simulation estimator "
                          "(simulate --metric deltaR --k 2) and pass its value");
    }
    if (!(*delta_r2 > 0.0)) throw DomainError("E[Delta_R^2] must be positive");
    const double k_area = replace_area_K(service, lambda, method).value;
    return replace_second_moment_with_area(service, lambda, *delta_r2, k_area, method);
}

struct AnalyticOptions {
    AreaMethod area = AreaMethod::Quadrature;
    std::optional<double> delta_r2;
};

/// Dispatch a query to the matching formula.
inline AnalyticResult evaluate(const AnalyticQuery& q, const AnalyticOptions& opt = {}) {
    detail::require_rate(q.arrival_rate);
    detail::require_stable(q);
    if (q.order != 1 && q.order != 2) throw DomainError("moment order must be 1 or 2");
    if (q.metric == AgeProcess::DeltaR) {
        return classical_aoi_moments(q.discipline, q.service, q.arrival_rate, q.order);
    }
    if (q.metric != AgeProcess::Gamma) throw DomainError("metric must be gamma or deltaR");
    if (q.order == 1) return raoi_first_moment(q);
    switch (q.discipline) {
    case Discipline::PreemptiveDrop:
        if (opt.delta_r2) return raoi_second_moment_preemptive(q.service, q.arrival_rate, *opt.delta_r2);
        return raoi_second_moment_preemptive(q.service, q.arrival_rate);
    case Discipline::BlockingSingle: return blocking_second_moment(q.service, q.arrival_rate, opt.area);
    case Discipline::ReplaceBuffer: return replace_second_moment(q.service, q.arrival_rate, opt.delta_r2, opt.area);
    case Discipline::FcfsUnbounded: break;
    }
    throw NotInCatalogError(detail::describe(q));
}

}  // namespace raoi
