#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "raoi/error.hpp"
#include "raoi/packet_log.hpp"

namespace raoi {

/// The three age processes: receiver age Delta_R, transmitter age Delta_T and
/// the relative age Gamma = Delta_R - Delta_T.
enum class AgeProcess { Gamma, DeltaR, DeltaT };

inline std::string_view process_name(AgeProcess p) {
    switch (p) {
    case AgeProcess::Gamma: return "gamma";
    case AgeProcess::DeltaR: return "deltaR";
    case AgeProcess::DeltaT: return "deltaT";
    }
    return "?";
}

inline AgeProcess parse_process(std::string_view s) {
    if (s == "gamma") return AgeProcess::Gamma;
    if (s == "deltaR") return AgeProcess::DeltaR;
    if (s == "deltaT") return AgeProcess::DeltaT;
    throw DomainError("unknown metric '" + std::string(s) + "' (expected gamma|deltaR)");
}

/// One maximal interval on which no arrival or delivery happens. The ages are
/// stored as the two timestamps they are measured from, so every value is an
/// exact difference of event times: Delta_T(t) = t - tx_stamp,
/// Delta_R(t) = t - rx_stamp and Gamma = tx_stamp - rx_stamp (constant).
struct AgeSegment {
    double start = 0.0;
    double end = 0.0;
    double tx_stamp = 0.0;
    double rx_stamp = 0.0;

    double length() const { return end - start; }
    double gamma() const { return tx_stamp - rx_stamp; }

    double value_at(AgeProcess p, double t) const {
        switch (p) {
        case AgeProcess::Gamma: return gamma();
        case AgeProcess::DeltaR: return t - rx_stamp;
        case AgeProcess::DeltaT: return t - tx_stamp;
        }
        return 0.0;
    }
};

/// Exact integral of p^k over [a, b] for a segment with the given stamps.
/// Slope-1 processes use (x1^{k+1} - x0^{k+1}) / (k+1) factored as
/// (b - a) * sum_j x1^j x0^{k-j} / (k+1), which keeps the length exact.
inline double segment_integral(AgeProcess p, int k, double a, double b, double tx_stamp,
                               double rx_stamp) {
    const double len = b - a;
    if (p == AgeProcess::Gamma) {
        const double g = tx_stamp - rx_stamp;
        return k == 1 ? len * g : len * std::pow(g, k);
    }
    const double origin = p == AgeProcess::DeltaR ? rx_stamp : tx_stamp;
    const double x0 = a - origin;
    const double x1 = b - origin;
    switch (k) {
    case 1: return len * (x0 + x1) * 0.5;
    case 2: return len * (x1 * x1 + x1 * x0 + x0 * x0) / 3.0;
    default: {
        double sum = 0.0;
        for (int j = 0; j <= k; ++j) sum += std::pow(x1, j) * std::pow(x0, k - j);
        return len * sum / (k + 1);
    }
    }
}

/// Turns a time-ordered stream of arrivals and deliveries into closed age
/// segments. Shared by the stored trace and by streaming estimators so both
/// see bit-identical segments. Both ages start at zero at t = 0.
template <typename OnSegment, typename OnArrival>
class SegmentBuilder {
public:
    SegmentBuilder(OnSegment on_segment, OnArrival on_arrival)
        : on_segment_(std::move(on_segment)), on_arrival_(std::move(on_arrival)) {}

    void arrival(double t) {
        advance(t);
        tx_stamp_ = t;
        on_arrival_(t, tx_stamp_ - rx_stamp_);
    }

    // generated_at is the arrival time of the delivered packet.
    void delivery(double t, double generated_at) {
        advance(t);
        rx_stamp_ = std::max(rx_stamp_, generated_at);
    }

    void finish(double horizon) { advance(horizon); }

    double now() const { return clock_; }

private:
    void advance(double t) {
        if (t > clock_) {
            on_segment_(AgeSegment{clock_, t, tx_stamp_, rx_stamp_});
            clock_ = t;
        }
    }

    OnSegment on_segment_;
    OnArrival on_arrival_;
    double clock_ = 0.0;
    double tx_stamp_ = 0.0;
    double rx_stamp_ = 0.0;
};

struct ArrivalSample {
    double time = 0.0;
    double gamma = 0.0;  // Gamma on the segment that begins at this arrival
};

/// Piecewise sample path of Delta_T, Delta_R and Gamma over [0, horizon].
class AgeTrace {
public:
    AgeTrace() = default;
    AgeTrace(double horizon, std::vector<AgeSegment> segments, std::vector<ArrivalSample> samples)
        : horizon_(horizon), segments_(std::move(segments)), samples_(std::move(samples)) {}

    double horizon() const { return horizon_; }
    std::span<const AgeSegment> segments() const { return segments_; }

    /// Gamma right after each arrival; equals Delta_R at the arrival instant.
    std::span<const ArrivalSample> samples_at_arrivals() const { return samples_; }

    /// Right-continuous evaluation at t in [0, horizon].
    double value_at(AgeProcess p, double t) const {
        if (t < 0.0 || t > horizon_) throw DomainError("time outside trace horizon");
        if (segments_.empty()) return p == AgeProcess::Gamma ? 0.0 : t;
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double x, const AgeSegment& s) { return x < s.start; });
        if (it != segments_.begin()) --it;
        return it->value_at(p, t);
    }

    /// Exact integral of p^k over [from, to] (defaults to the whole horizon).
    double integrate_power(AgeProcess p, int k, double from, double to) const {
        if (k <= 0) throw DomainError("power must be positive");
        double total = 0.0;
        for (const auto& s : segments_) {
            const double a = std::max(s.start, from);
            const double b = std::min(s.end, to);
            if (b > a) total += segment_integral(p, k, a, b, s.tx_stamp, s.rx_stamp);
        }
        return total;
    }
    double integrate_power(AgeProcess p, int k) const { return integrate_power(p, k, 0.0, horizon_); }

    double time_average(AgeProcess p, int k) const {
        if (!(horizon_ > 0.0)) throw DomainError("time average needs a positive horizon");
        return integrate_power(p, k) / horizon_;
    }

private:
    double horizon_ = 0.0;
    std::vector<AgeSegment> segments_;
    std::vector<ArrivalSample> samples_;
};

/// Reconstructs the age sample paths from a packet log. Deliveries that share
/// a timestamp with an arrival are applied first.
inline AgeTrace build_age_trace(const PacketLog& log, double horizon) {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be finite and >= 0");
    validate_log(log);

    std::vector<std::pair<double, double>> deliveries;  // (delivery time, generation time)
    for (const auto& p : log) {
        if (p.arrival > horizon) throw StructuralError("arrival after horizon");
        if (p.departure) {
            if (*p.departure > horizon) throw StructuralError("delivery after horizon");
            deliveries.emplace_back(*p.departure, p.arrival);
        }
    }
    std::stable_sort(deliveries.begin(), deliveries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<AgeSegment> segments;
    std::vector<ArrivalSample> samples;
    segments.reserve(log.size() + deliveries.size() + 1);
    samples.reserve(log.size());
    SegmentBuilder builder([&](const AgeSegment& s) { segments.push_back(s); },
                           [&](double t, double g) { samples.push_back({t, g}); });

    auto d = deliveries.begin();
    for (const auto& p : log) {
        for (; d != deliveries.end() && d->first <= p.arrival; ++d) builder.delivery(d->first, d->second);
        builder.arrival(p.arrival);
    }
    for (; d != deliveries.end(); ++d) builder.delivery(d->first, d->second);
    builder.finish(horizon);
    return AgeTrace(horizon, std::move(segments), std::move(samples));
}

}  // namespace raoi
