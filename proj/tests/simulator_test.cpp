#include <cmath>

#include <gtest/gtest.h>

#include "raoi/simulator.hpp"

using namespace raoi;

namespace {

SimConfig config(Discipline d, ServiceFamily f, double lambda, std::uint64_t n = 1'000'000, std::uint64_t seed = 1) {
    SimConfig c;
    c.discipline = d;
    c.service = ServiceModel(f, 1.0);
    c.arrival_rate = lambda;
    c.n_packets = n;
    c.seed = seed;
    return c;
}

constexpr Discipline kAll[] = {Discipline::FcfsUnbounded, Discipline::PreemptiveDrop, Discipline::BlockingSingle,
                               Discipline::ReplaceBuffer};

}  // namespace

TEST(Simulator, SameSeedSameLog) {
    for (auto d : kAll) {
        const auto c = config(d, ServiceFamily::Exponential, 0.8, 20'000, 5);
        const SimResult a = run(c), b = run(c);
        EXPECT_EQ(a.log, b.log);
        EXPECT_EQ(a.moments.gamma2.value, b.moments.gamma2.value);
        const SimResult other = run(config(d, ServiceFamily::Exponential, 0.8, 20'000, 6));
        EXPECT_NE(a.log, other.log);
    }
}

TEST(Simulator, StreamingEstimatorMatchesFullRunExactly) {
    for (auto d : kAll) {
        for (auto f : {ServiceFamily::Exponential, ServiceFamily::Deterministic}) {
            const auto c = config(d, f, 0.6, 50'000, 9);
            const SimResult full = run(c);
            const SimSummary s = estimate(c);
            EXPECT_EQ(s.horizon, full.trace.horizon());
            EXPECT_EQ(s.window_start, full.window_start);
            EXPECT_EQ(s.moments.gamma1.value, full.moments.gamma1.value);
            EXPECT_EQ(s.moments.gamma2.value, full.moments.gamma2.value);
            EXPECT_EQ(s.moments.delta_r1.value, full.moments.delta_r1.value);
            EXPECT_EQ(s.moments.delta_r2.value, full.moments.delta_r2.value);
            EXPECT_EQ(s.moments.delta_r2.std_error, full.moments.delta_r2.std_error);
            EXPECT_EQ(s.moments.arrival_gamma.value, full.moments.arrival_gamma.value);
        }
    }
}

TEST(Simulator, ArrivalStreamSharedAcrossDisciplines) {
    const SimResult a = run(config(Discipline::PreemptiveDrop, ServiceFamily::Exponential, 1.0, 2000, 4));
    const SimResult b = run(config(Discipline::ReplaceBuffer, ServiceFamily::Deterministic, 1.0, 2000, 4));
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].arrival, b.log[i].arrival);
}

TEST(Simulator, OutcomeBookkeeping) {
    for (auto d : kAll) {
        const auto c = config(d, ServiceFamily::Exponential, 0.9, 30'000, 2);
        const SimResult r = run(c);
        ASSERT_EQ(r.log.size(), c.n_packets);
        std::size_t inflight = 0;
        for (const auto& p : r.log) {
            switch (d) {
            case Discipline::BlockingSingle:
                EXPECT_TRUE(p.outcome == Outcome::Delivered || p.outcome == Outcome::DroppedOnArrival ||
                            p.outcome == Outcome::InFlight);
                if (p.service_start) {
                    EXPECT_EQ(*p.service_start, p.arrival);
                }
                break;
            case Discipline::PreemptiveDrop:
                EXPECT_TRUE(p.outcome == Outcome::Delivered || p.outcome == Outcome::Preempted ||
                            p.outcome == Outcome::InFlight);
                ASSERT_TRUE(p.service_start.has_value());
                EXPECT_EQ(*p.service_start, p.arrival);
                break;
            case Discipline::ReplaceBuffer:
                EXPECT_TRUE(p.outcome == Outcome::Delivered || p.outcome == Outcome::ReplacedInBuffer ||
                            p.outcome == Outcome::InFlight);
                break;
            case Discipline::FcfsUnbounded:
                EXPECT_TRUE(p.outcome == Outcome::Delivered || p.outcome == Outcome::InFlight);
                break;
            }
            if (p.outcome == Outcome::InFlight) ++inflight;
        }
        // At most the packet in service plus the buffered one remain open
        // (FCFS may leave a queue behind).
        if (d != Discipline::FcfsUnbounded) {
            EXPECT_LE(inflight, 2u);
        }
        const SimSummary s = estimate(c);
        EXPECT_EQ(s.outcomes.delivered + s.outcomes.dropped + s.outcomes.preempted + s.outcomes.replaced +
                      s.outcomes.inflight,
                  c.n_packets);
        EXPECT_EQ(s.outcomes.inflight, inflight);
    }
}

TEST(Simulator, ReplaceBufferHandoffAtDeparture) {
    const SimResult r = run(config(Discipline::ReplaceBuffer, ServiceFamily::Deterministic, 2.0, 5000, 8));
    std::vector<double> departures;
    for (const auto& p : r.log) {
        if (p.departure) departures.push_back(*p.departure);
    }
    for (const auto& p : r.log) {
        if (!p.service_start || *p.service_start == p.arrival) continue;
        EXPECT_TRUE(std::binary_search(departures.begin(), departures.end(), *p.service_start));
    }
}

TEST(Simulator, ConfigErrors) {
    auto c = config(Discipline::PreemptiveDrop, ServiceFamily::Exponential, 1.0, 1000);
    c.warmup = 1000;
    EXPECT_THROW(estimate(c), DomainError);
    c.n_packets = 0;
    c.warmup = 0;
    EXPECT_THROW(estimate(c), DomainError);
    EXPECT_THROW(estimate(config(Discipline::FcfsUnbounded, ServiceFamily::Exponential, 1.0)), StabilityError);
    EXPECT_THROW(estimate(config(Discipline::FcfsUnbounded, ServiceFamily::Exponential, 2.0)), StabilityError);
    EXPECT_THROW(estimate(config(Discipline::BlockingSingle, ServiceFamily::Exponential, 0.0)), DomainError);
    EXPECT_THROW(parse_discipline("lcfs"), DomainError);
}

TEST(Simulator, PreemptiveFirstMomentAnchors) {
    const SimSummary e = estimate(config(Discipline::PreemptiveDrop, ServiceFamily::Exponential, 1.0));
    EXPECT_NEAR(e.moments.gamma1.value, 1.0, 0.02);
    const SimSummary d = estimate(config(Discipline::PreemptiveDrop, ServiceFamily::Deterministic, 1.0));
    EXPECT_NEAR(d.moments.gamma1.value, std::exp(1.0) - 1.0, 0.03);
}

TEST(Simulator, FcfsMM1ClassicalAge) {
    const SimSummary s = estimate(config(Discipline::FcfsUnbounded, ServiceFamily::Exponential, 0.5));
    EXPECT_NEAR(s.moments.delta_r1.value, 3.5, 5 * s.moments.delta_r1.std_error);
}

TEST(Simulator, RemarkOneStatistical) {
    for (auto d : kAll) {
        for (auto f : {ServiceFamily::Exponential, ServiceFamily::Deterministic}) {
            for (double l : {0.3, 0.9, 4.0}) {
                if (d == Discipline::FcfsUnbounded && l >= 1.0) continue;
                if (d == Discipline::PreemptiveDrop && f == ServiceFamily::Deterministic && l > 1.0) continue;
                const SimSummary s = estimate(config(d, f, l, 200'000, 17));
                const auto& m = s.moments;
                const double diff = m.gamma1.value - (m.delta_r1.value - 1.0 / l);
                EXPECT_LE(std::abs(diff), 5 * std::hypot(m.gamma1.std_error, m.delta_r1.std_error))
                    << discipline_name(d) << " " << family_name(f) << " " << l;
            }
        }
    }
}

TEST(Simulator, PastaBusyFractions) {
    for (auto d : kAll) {
        for (auto f : {ServiceFamily::Exponential, ServiceFamily::Deterministic}) {
            const SimSummary s = estimate(config(d, f, 0.8, 400'000, 23));
            const double arrivals_busy = 1.0 - s.state.arrivals_idle;
            EXPECT_LE(std::abs(s.state.busy_time - arrivals_busy),
                      5 * std::hypot(s.state.busy_time_se, s.state.arrivals_idle_se))
                << discipline_name(d) << " " << family_name(f);
            EXPECT_NEAR(s.state.idle_time + s.state.busy_time, 1.0, 1e-12);
        }
    }
}

TEST(Simulator, ServerStateFromLogMatchesStreaming) {
    const auto c = config(Discipline::ReplaceBuffer, ServiceFamily::Exponential, 1.0, 100'000, 12);
    const SimResult r = run(c);
    const SimSummary s = estimate(c);
    const auto fromlog = server_state_fraction(r.log, r.trace.horizon(), r.window_start);
    EXPECT_NEAR(fromlog.arrivals_idle, s.state.arrivals_idle, 1e-12);
    EXPECT_NEAR(fromlog.busy_time, s.state.busy_time, 1e-9);
}

TEST(Simulator, StationaryProbabilityAnchors) {
    const auto idle = [](Discipline d, ServiceFamily f) {
        return estimate(config(d, f, 1.0)).state.arrivals_idle;
    };
    EXPECT_NEAR(idle(Discipline::BlockingSingle, ServiceFamily::Exponential), 0.5, 0.01);
    EXPECT_NEAR(idle(Discipline::ReplaceBuffer, ServiceFamily::Exponential), 1.0 / 3.0, 0.01);
    EXPECT_NEAR(idle(Discipline::ReplaceBuffer, ServiceFamily::Deterministic), std::exp(-1.0) / (std::exp(-1.0) + 1), 0.01);
}

TEST(Simulator, RemarkTwoAnchors) {
    const SimResult p = run(config(Discipline::PreemptiveDrop, ServiceFamily::Exponential, 1.0));
    const auto cp = remark2_check(p);
    EXPECT_NEAR(cp.arrival_gamma.value, 2.0, 0.03);
    EXPECT_NEAR(cp.time_avg_delta_r.value, 2.0, 0.03);
    EXPECT_LE(std::abs(cp.discrepancy), 5 * cp.combined_se);
    const SimResult b = run(config(Discipline::BlockingSingle, ServiceFamily::Exponential, 1.0));
    const auto cb = remark2_check(b);
    EXPECT_NEAR(cb.arrival_gamma.value, 2.5, 0.04);
    EXPECT_NEAR(cb.time_avg_delta_r.value, 2.5, 0.04);
    EXPECT_LE(std::abs(cb.discrepancy), 5 * cb.combined_se);
}

TEST(BatchMeans, SplitsSegmentsAcrossBatchesExactly) {
    BatchMeans bm(0.0, 10.0, 4);
    bm.add_segment({0.0, 10.0, 0.0, 0.0});  // Delta_R = t over the whole window
    EXPECT_NEAR(bm.time_average(AgeProcess::DeltaR, 1).value, 5.0, 1e-12);
    EXPECT_NEAR(bm.time_average(AgeProcess::DeltaR, 2).value, 100.0 / 3.0, 1e-12);
    const double se = bm.time_average(AgeProcess::DeltaR, 1).std_error;
    // Batch means 1.25, 3.75, 6.25, 8.75.
    EXPECT_NEAR(se, std::sqrt((2 * 3.75 * 3.75 + 2 * 1.25 * 1.25) / 3.0) / 2.0, 1e-12);
    EXPECT_THROW(bm.arrival_sample_mean(), DomainError);
    EXPECT_THROW(BatchMeans(1.0, 1.0), DomainError);
}
