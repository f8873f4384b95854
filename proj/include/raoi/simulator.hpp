#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "raoi/age_trace.hpp"
#include "raoi/batch_means.hpp"
#include "raoi/error.hpp"
#include "raoi/packet_log.hpp"
#include "raoi/random.hpp"
#include "raoi/service_model.hpp"

namespace raoi {

/// Packet management at the single server.
///  - FcfsUnbounded: infinite FIFO queue.
///  - PreemptiveDrop: an arrival always enters service; the packet in service is discarded.
///  - BlockingSingle: no buffer; an arrival that finds the server busy is discarded.
///  - ReplaceBuffer: one waiting slot that always holds the newest arrival.
enum class Discipline { FcfsUnbounded, PreemptiveDrop, BlockingSingle, ReplaceBuffer };

inline std::string_view discipline_name(Discipline d) {
    switch (d) {
    case Discipline::FcfsUnbounded: return "fcfs";
    case Discipline::PreemptiveDrop: return "prmp";
    case Discipline::BlockingSingle: return "blocking";
    case Discipline::ReplaceBuffer: return "replace";
    }
    return "?";
}

inline Discipline parse_discipline(std::string_view s) {
    if (s == "fcfs") return Discipline::FcfsUnbounded;
    if (s == "prmp") return Discipline::PreemptiveDrop;
    if (s == "blocking") return Discipline::BlockingSingle;
    if (s == "replace") return Discipline::ReplaceBuffer;
    throw DomainError("unknown discipline '" + std::string(s) + "' (expected fcfs|prmp|blocking|replace)");
}

struct SimConfig {
    double arrival_rate = 1.0;
    ServiceModel service;
    Discipline discipline = Discipline::PreemptiveDrop;
    std::uint64_t n_packets = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t warmup = 1'000;
    int n_batches = BatchMeans::kDefaultBatches;

    void validate() const {
        if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate)) {
            throw DomainError("arrival rate must be positive and finite");
        }
        if (n_packets <= warmup) throw DomainError("no packets left after warm-up");
        if (n_batches < 2) throw DomainError("need at least 2 batches");
        if (discipline == Discipline::FcfsUnbounded && !(arrival_rate < service.rate)) {
            throw StabilityError("fcfs queue is unstable for lambda >= mu");
        }
    }
};

/// Event-driven engine with two clocks: the next arrival and the completion of
/// the single service in progress. The sink receives, in time order:
///   on_arrival(id, t, server_busy)   before the discipline acts
///   on_service_start(id, t)
///   on_delivery(id, t, arrival_time)
///   on_discard(id, t, outcome)
///   on_end(horizon) and on_inflight(id) for packets unresolved at the horizon
/// Completions at the same instant as an arrival are processed first.
/// Returns the horizon: the instant the (n_packets+1)-th arrival would occur.
template <typename Sink>
double simulate(const SimConfig& cfg, Sink& sink) {
    cfg.validate();
    RandomStream arrivals(cfg.seed, Stream::Arrivals);
    RandomStream services(cfg.seed, Stream::Service);

    struct Job {
        std::uint64_t id;
        double arrival;
    };
    struct Busy {
        Job job;
        double done;
    };
    std::optional<Busy> server;
    std::optional<Job> buffer;
    std::deque<Job> fifo;

    const auto start_service = [&](Job job, double t) {
        server = Busy{job, t + sample(cfg.service, services)};
        sink.on_service_start(job.id, t);
    };

    const auto complete_until = [&](double t) {
        while (server && server->done <= t) {
            const Busy finished = *server;
            server.reset();
            sink.on_delivery(finished.job.id, finished.done, finished.job.arrival);
            if (cfg.discipline == Discipline::FcfsUnbounded && !fifo.empty()) {
                const Job next = fifo.front();
                fifo.pop_front();
                start_service(next, finished.done);
            } else if (cfg.discipline == Discipline::ReplaceBuffer && buffer) {
                const Job next = *buffer;
                buffer.reset();
                start_service(next, finished.done);
            }
        }
    };

    double t = arrivals.exponential(cfg.arrival_rate);
    for (std::uint64_t id = 0; id < cfg.n_packets; ++id) {
        complete_until(t);
        const Job job{id, t};
        sink.on_arrival(id, t, server.has_value());
        switch (cfg.discipline) {
        case Discipline::FcfsUnbounded:
            if (server) fifo.push_back(job);
            else start_service(job, t);
            break;
        case Discipline::PreemptiveDrop:
            if (server) sink.on_discard(server->job.id, t, Outcome::Preempted);
            start_service(job, t);
            break;
        case Discipline::BlockingSingle:
            if (server) sink.on_discard(id, t, Outcome::DroppedOnArrival);
            else start_service(job, t);
            break;
        case Discipline::ReplaceBuffer:
            if (!server) {
                start_service(job, t);
            } else {
                if (buffer) sink.on_discard(buffer->id, t, Outcome::ReplacedInBuffer);
                buffer = job;
            }
            break;
        }
        t += arrivals.exponential(cfg.arrival_rate);
    }
    const double horizon = t;
    if (!std::isfinite(horizon)) throw DomainError("simulation horizon overflowed");
    complete_until(horizon);
    sink.on_end(horizon);
    if (server) sink.on_inflight(server->job.id);
    if (buffer) sink.on_inflight(buffer->id);
    for (const auto& j : fifo) sink.on_inflight(j.id);
    return horizon;
}

/// Post-warm-up estimation window [arrival of packet #warmup, horizon).
/// Replays only the arrival stream, which is independent of the service
/// stream and of the discipline.
inline std::pair<double, double> estimation_window(const SimConfig& cfg) {
    cfg.validate();
    RandomStream arrivals(cfg.seed, Stream::Arrivals);
    double t = arrivals.exponential(cfg.arrival_rate);
    double window_start = 0.0;
    for (std::uint64_t id = 0; id < cfg.n_packets; ++id) {
        if (id == cfg.warmup) window_start = t;
        t += arrivals.exponential(cfg.arrival_rate);
    }
    return {window_start, t};
}

/// A simulated steady-state moment.
struct MomentEstimate {
    AgeProcess metric = AgeProcess::Gamma;
    int order = 1;
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n_packets = 0;
    int n_batches = 0;
    std::uint64_t seed = 0;
    std::uint64_t warmup_dropped = 0;
};

/// E[Gamma], E[Gamma^2], E[Delta_R], E[Delta_R^2] plus the auxiliary
/// averages used by the identity checks.
struct MomentSet {
    MomentEstimate gamma1;
    MomentEstimate gamma2;
    MomentEstimate delta_r1;
    MomentEstimate delta_r2;
    Estimate delta_t1;
    Estimate arrival_gamma;  // mean of Gamma sampled right after arrivals

    const MomentEstimate& get(AgeProcess p, int k) const {
        if (p == AgeProcess::Gamma && k == 1) return gamma1;
        if (p == AgeProcess::Gamma && k == 2) return gamma2;
        if (p == AgeProcess::DeltaR && k == 1) return delta_r1;
        if (p == AgeProcess::DeltaR && k == 2) return delta_r2;
        throw DomainError("simulated moments cover gamma/deltaR with k in {1,2}");
    }
};

inline MomentSet collect_moments(const BatchMeans& bm, const SimConfig& cfg) {
    const auto make = [&](AgeProcess p, int k) {
        const Estimate e = bm.time_average(p, k);
        return MomentEstimate{p, k, e.value, e.std_error, cfg.n_packets, bm.n_batches(), cfg.seed, cfg.warmup};
    };
    MomentSet m;
    m.gamma1 = make(AgeProcess::Gamma, 1);
    m.gamma2 = make(AgeProcess::Gamma, 2);
    m.delta_r1 = make(AgeProcess::DeltaR, 1);
    m.delta_r2 = make(AgeProcess::DeltaR, 2);
    m.delta_t1 = bm.time_average(AgeProcess::DeltaT, 1);
    m.arrival_gamma = bm.arrival_sample_mean();
    return m;
}

/// Time- and arrival-sampled server state over a window, with batch-means
/// errors on the same batch grid as the age moments.
struct ServerStateFractions {
    double idle_time = 0.0;
    double busy_time = 0.0;
    double arrivals_idle = 0.0;
    double busy_time_se = 0.0;
    double arrivals_idle_se = 0.0;
    std::uint64_t arrivals = 0;
};

class ServerStateBatches {
public:
    ServerStateBatches(double window_start, double window_end, int n_batches)
        : start_(window_start), end_(window_end), n_(n_batches),
          busy_(static_cast<std::size_t>(n_batches)), idle_hits_(static_cast<std::size_t>(n_batches)),
          hits_(static_cast<std::size_t>(n_batches)) {
        if (n_batches < 2 || !(window_end > window_start)) throw DomainError("invalid state window");
        width_ = (end_ - start_) / n_;
    }

    void add_busy(double a, double b) {
        a = std::max(a, start_);
        b = std::min(b, end_);
        if (!(b > a)) return;
        int idx = batch_of(a);
        while (a < b && idx < n_) {
            const double piece = std::min(b, boundary(idx + 1));
            busy_[static_cast<std::size_t>(idx)] += piece - a;
            a = piece;
            ++idx;
        }
    }

    void add_arrival(double t, bool found_idle) {
        if (t < start_ || t >= end_) return;
        const auto idx = static_cast<std::size_t>(batch_of(t));
        ++hits_[idx];
        if (found_idle) ++idle_hits_[idx];
    }

    ServerStateFractions result() const {
        ServerStateFractions out;
        double busy_total = 0.0;
        std::uint64_t hits = 0, idle_hits = 0;
        std::vector<double> busy_means, idle_means;
        for (int i = 0; i < n_; ++i) {
            const auto u = static_cast<std::size_t>(i);
            busy_total += busy_[u];
            busy_means.push_back(busy_[u] / (boundary(i + 1) - boundary(i)));
            hits += hits_[u];
            idle_hits += idle_hits_[u];
            if (hits_[u] > 0) idle_means.push_back(static_cast<double>(idle_hits_[u]) / static_cast<double>(hits_[u]));
        }
        out.busy_time = busy_total / (end_ - start_);
        out.idle_time = 1.0 - out.busy_time;
        out.busy_time_se = BatchMeans::standard_error(busy_means);
        out.arrivals = hits;
        out.arrivals_idle = hits ? static_cast<double>(idle_hits) / static_cast<double>(hits) : 0.0;
        out.arrivals_idle_se = BatchMeans::standard_error(idle_means);
        return out;
    }

private:
    double boundary(int i) const { return i >= n_ ? end_ : start_ + width_ * i; }
    int batch_of(double t) const {
        int idx = std::clamp(static_cast<int>((t - start_) / width_), 0, n_ - 1);
        while (idx + 1 < n_ && boundary(idx + 1) <= t) ++idx;
        while (idx > 0 && boundary(idx) > t) --idx;
        return idx;
    }

    double start_, end_;
    int n_;
    double width_ = 0.0;
    std::vector<double> busy_;
    std::vector<std::uint64_t> idle_hits_, hits_;
};

struct OutcomeCounts {
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t preempted = 0;
    std::uint64_t replaced = 0;
    std::uint64_t inflight = 0;

    std::uint64_t total() const { return delivered + dropped + preempted + replaced + inflight; }
    void add(Outcome o) {
        switch (o) {
        case Outcome::Delivered: ++delivered; break;
        case Outcome::DroppedOnArrival: ++dropped; break;
        case Outcome::Preempted: ++preempted; break;
        case Outcome::ReplacedInBuffer: ++replaced; break;
        case Outcome::InFlight: ++inflight; break;
        }
    }
};

/// Everything a simulation reports without storing the packet log.
struct SimSummary {
    SimConfig config;
    double window_start = 0.0;
    double horizon = 0.0;
    MomentSet moments;
    ServerStateFractions state;
    OutcomeCounts outcomes;
};

namespace detail {

class StreamingSink {
public:
    StreamingSink(double window_start, double window_end, int n_batches)
        : moments_(window_start, window_end, n_batches),
          state_(window_start, window_end, n_batches),
          builder_(ToSegment{&moments_}, ToSample{&moments_}) {}

    StreamingSink(const StreamingSink&) = delete;
    StreamingSink& operator=(const StreamingSink&) = delete;

    void on_arrival(std::uint64_t, double t, bool busy) {
        state_.add_arrival(t, !busy);
        builder_.arrival(t);
    }
    void on_service_start(std::uint64_t, double t) {
        if (!busy_) {
            busy_ = true;
            busy_since_ = t;
        }
    }
    void on_delivery(std::uint64_t, double t, double generated_at) {
        end_busy(t);
        outcomes_.add(Outcome::Delivered);
        builder_.delivery(t, generated_at);
    }
    void on_discard(std::uint64_t, double t, Outcome o) {
        if (o == Outcome::Preempted) end_busy(t);
        outcomes_.add(o);
    }
    void on_end(double horizon) {
        end_busy(horizon);
        builder_.finish(horizon);
    }
    void on_inflight(std::uint64_t) { outcomes_.add(Outcome::InFlight); }

    const BatchMeans& moments() const { return moments_; }
    const ServerStateBatches& state() const { return state_; }
    const OutcomeCounts& outcomes() const { return outcomes_; }

private:
    void end_busy(double t) {
        if (busy_) state_.add_busy(busy_since_, t);
        busy_ = false;
    }

    struct ToSegment {
        BatchMeans* bm;
        void operator()(const AgeSegment& s) const { bm->add_segment(s); }
    };
    struct ToSample {
        BatchMeans* bm;
        void operator()(double t, double g) const { bm->add_arrival_sample(t, g); }
    };
    using Builder = SegmentBuilder<ToSegment, ToSample>;

    BatchMeans moments_;
    ServerStateBatches state_;
    Builder builder_;
    OutcomeCounts outcomes_;
    bool busy_ = false;
    double busy_since_ = 0.0;
};

class LogSink {
public:
    explicit LogSink(std::uint64_t n) { log.reserve(n); }

    void on_arrival(std::uint64_t id, double t, bool) { log.push_back(PacketRecord{id, t, {}, {}, Outcome::InFlight}); }
    void on_service_start(std::uint64_t id, double t) { log[id].service_start = t; }
    void on_delivery(std::uint64_t id, double t, double) {
        log[id].departure = t;
        log[id].outcome = Outcome::Delivered;
    }
    void on_discard(std::uint64_t id, double, Outcome o) { log[id].outcome = o; }
    void on_end(double) {}
    void on_inflight(std::uint64_t id) { log[id].outcome = Outcome::InFlight; }

    PacketLog log;
};

}  // namespace detail

/// Streaming run: moments, server-state fractions and outcome counts without
/// materialising the log. Memory is O(#batches) apart from the FCFS queue.
inline SimSummary estimate(const SimConfig& cfg) {
    const auto [window_start, window_end] = estimation_window(cfg);
    detail::StreamingSink sink(window_start, window_end, cfg.n_batches);
    const double horizon = simulate(cfg, sink);
    SimSummary out;
    out.config = cfg;
    out.window_start = window_start;
    out.horizon = horizon;
    out.moments = collect_moments(sink.moments(), cfg);
    out.state = sink.state().result();
    out.outcomes = sink.outcomes();
    return out;
}

/// Full run: the packet log, the reconstructed age trace and the moments
/// estimated from that trace over the post-warm-up window.
struct SimResult {
    SimConfig config;
    PacketLog log;
    AgeTrace trace;
    double window_start = 0.0;
    MomentSet moments;
};

/// Feeds a stored trace through the same batch-means accumulator the
/// streaming path uses.
inline BatchMeans batch_trace(const AgeTrace& trace, double window_start, int n_batches) {
    BatchMeans bm(window_start, trace.horizon(), n_batches);
    for (const auto& s : trace.segments()) bm.add_segment(s);
    for (const auto& a : trace.samples_at_arrivals()) bm.add_arrival_sample(a.time, a.gamma);
    return bm;
}

inline SimResult run(const SimConfig& cfg) {
    detail::LogSink sink(cfg.n_packets);
    const double horizon = simulate(cfg, sink);
    SimResult out;
    out.config = cfg;
    out.log = std::move(sink.log);
    out.trace = build_age_trace(out.log, horizon);
    out.window_start = out.log[cfg.warmup].arrival;
    out.moments = collect_moments(batch_trace(out.trace, out.window_start, cfg.n_batches), cfg);
    return out;
}

/// Server state from a packet log. A service interval runs from service
/// start to delivery, to the next service start when preempted, or to the
/// horizon when still in flight. An arrival finds the server idle when no
/// other packet's service interval covers its arrival instant.
inline ServerStateFractions server_state_fraction(const PacketLog& log, double horizon,
                                                  double window_start = 0.0,
                                                  int n_batches = BatchMeans::kDefaultBatches) {
    ServerStateBatches batches(window_start, horizon, n_batches);
    std::vector<std::pair<double, double>> intervals;
    std::vector<std::uint64_t> owner;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& p = log[i];
        if (!p.service_start) continue;
        double end = horizon;
        if (p.departure) {
            end = *p.departure;
        } else if (p.outcome == Outcome::Preempted) {
            for (std::size_t j = i + 1; j < log.size(); ++j) {
                if (log[j].service_start) {
                    end = *log[j].service_start;
                    break;
                }
            }
        }
        intervals.emplace_back(*p.service_start, end);
        owner.push_back(p.id);
    }
    for (const auto& [a, b] : intervals) batches.add_busy(a, b);

    std::size_t k = 0;  // first interval that may still cover the current arrival
    for (const auto& p : log) {
        while (k < intervals.size() && intervals[k].second <= p.arrival) ++k;
        bool busy = false;
        for (std::size_t j = k; j < intervals.size() && intervals[j].first <= p.arrival; ++j) {
            if (owner[j] != p.id && intervals[j].second > p.arrival) {
                busy = true;
                break;
            }
        }
        batches.add_arrival(p.arrival, !busy);
    }
    return batches.result();
}

/// Mean of Gamma sampled right after arrivals against the time average of
/// Delta_R, both over [window_start, horizon).
struct SamplingCheck {
    Estimate arrival_gamma;
    Estimate time_avg_delta_r;
    double discrepancy = 0.0;
    double combined_se = 0.0;
};

inline SamplingCheck remark2_check(const AgeTrace& trace, double window_start,
                                   int n_batches = BatchMeans::kDefaultBatches) {
    const BatchMeans bm = batch_trace(trace, window_start, n_batches);
    SamplingCheck out;
    out.arrival_gamma = bm.arrival_sample_mean();
    out.time_avg_delta_r = bm.time_average(AgeProcess::DeltaR, 1);
    out.discrepancy = out.arrival_gamma.value - out.time_avg_delta_r.value;
    out.combined_se = std::hypot(out.arrival_gamma.std_error, out.time_avg_delta_r.std_error);
    return out;
}

inline SamplingCheck remark2_check(const SimResult& r) {
    return remark2_check(r.trace, r.window_start, r.config.n_batches);
}

}  // namespace raoi
