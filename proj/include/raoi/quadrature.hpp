#pragma once

#include <cmath>
#include <queue>
#include <vector>

#include "raoi/error.hpp"

namespace raoi::quad {

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair (QUADPACK qk15 abscissae and weights).
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel kronrod15(const F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double pair = f(center - dx) + f(center + dx);
        kronrod += kWgk[j] * pair;
        if (j % 2 == 1) gauss += kWg[j / 2] * pair;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over a finite [a, b]:
/// the panel with the largest error estimate is bisected until the summed
/// error falls below abs_tol.
template <typename F>
Result integrate(const F& f, double a, double b, double abs_tol = 1e-10, int max_panels = 20000) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("integrate needs finite limits");
    if (a == b) return {};
    if (b < a) {
        Result r = integrate(f, b, a, abs_tol, max_panels);
        r.value = -r.value;
        return r;
    }
    std::priority_queue<detail::Panel> panels;
    panels.push(detail::kronrod15(f, a, b));
    double error = panels.top().error;
    int evaluations = 15;
    while (error > abs_tol && static_cast<int>(panels.size()) < max_panels) {
        const detail::Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {  // no room left to bisect
            panels.push(worst);
            break;
        }
        const auto left = detail::kronrod15(f, worst.a, mid);
        const auto right = detail::kronrod15(f, mid, worst.b);
        evaluations += 30;
        error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
    }
    double sum = 0.0, err = 0.0;
    while (!panels.empty()) {
        sum += panels.top().value;
        err += panels.top().error;
        panels.pop();
    }
    return {sum, err, evaluations, err <= abs_tol};
}

/// Upper truncation point for a tail dominated by exp(-rate * x): the point
/// beyond which the exponential carries less than tail_mass of its mass.
inline double tail_cutoff(double from, double rate, double tail_mass = 1e-20) {
    if (!(rate > 0.0)) throw DomainError("tail decay rate must be positive");
    return from - std::log(tail_mass) / rate;
}

/// Nested two-dimensional integration: outer over x in [x0, x1], inner over
/// y in [y0(x), y1(x)], each axis adaptive with tolerance abs_tol.
template <typename F, typename Lo, typename Hi>
Result integrate2d(const F& f, double x0, double x1, const Lo& y0, const Hi& y1, double abs_tol = 1e-10) {
    int inner_evaluations = 0;
    bool inner_ok = true;
    const auto inner = [&](double x) {
        const auto g = [&](double y) { return f(x, y); };
        const Result r = integrate(g, y0(x), y1(x), abs_tol * 1e-2);
        inner_evaluations += r.evaluations;
        inner_ok = inner_ok && r.converged;
        return r.value;
    };
    Result outer = integrate(inner, x0, x1, abs_tol);
    outer.evaluations += inner_evaluations;
    outer.converged = outer.converged && inner_ok;
    return outer;
}

}  // namespace raoi::quad
