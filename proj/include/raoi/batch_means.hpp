#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "raoi/age_trace.hpp"
#include "raoi/error.hpp"

namespace raoi {

/// Mean and batch-means standard error of a steady-state quantity.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Batch-means accumulator over a fixed time window [start, end) split into
/// equal-duration batches. Collects exact age integrals (Gamma^1, Gamma^2,
/// Delta_R^1, Delta_R^2, Delta_T^1) and the Gamma samples taken right after
/// arrivals.
class BatchMeans {
public:
    static constexpr int kDefaultBatches = 100;

    BatchMeans(double window_start, double window_end, int n_batches = kDefaultBatches)
        : start_(window_start), end_(window_end), n_(n_batches), batches_(static_cast<std::size_t>(n_batches)) {
        if (n_batches < 2) throw DomainError("batch means needs at least 2 batches");
        if (!(window_end > window_start)) throw DomainError("empty estimation window");
        width_ = (end_ - start_) / n_;
    }

    double window_start() const { return start_; }
    double window_end() const { return end_; }
    int n_batches() const { return n_; }

    void add_segment(const AgeSegment& s) {
        double a = std::max(s.start, start_);
        const double b = std::min(s.end, end_);
        if (!(b > a)) return;
        int idx = batch_of(a);
        while (a < b) {
            const double piece_end = std::min(b, boundary(idx + 1));
            auto& acc = batches_[static_cast<std::size_t>(idx)];
            acc.integral[0] += segment_integral(AgeProcess::Gamma, 1, a, piece_end, s.tx_stamp, s.rx_stamp);
            acc.integral[1] += segment_integral(AgeProcess::Gamma, 2, a, piece_end, s.tx_stamp, s.rx_stamp);
            acc.integral[2] += segment_integral(AgeProcess::DeltaR, 1, a, piece_end, s.tx_stamp, s.rx_stamp);
            acc.integral[3] += segment_integral(AgeProcess::DeltaR, 2, a, piece_end, s.tx_stamp, s.rx_stamp);
            acc.integral[4] += segment_integral(AgeProcess::DeltaT, 1, a, piece_end, s.tx_stamp, s.rx_stamp);
            a = piece_end;
            if (++idx >= n_) break;
        }
    }

    void add_arrival_sample(double t, double gamma) {
        if (t < start_ || t >= end_) return;
        auto& acc = batches_[static_cast<std::size_t>(batch_of(t))];
        acc.sample_sum += gamma;
        ++acc.sample_count;
    }

    /// Time average of p^k over the window. Supported: Gamma k=1,2;
    /// Delta_R k=1,2; Delta_T k=1.
    Estimate time_average(AgeProcess p, int k) const {
        const int slot = slot_of(p, k);
        double total = 0.0;
        std::vector<double> means;
        means.reserve(batches_.size());
        for (int i = 0; i < n_; ++i) {
            const double v = batches_[static_cast<std::size_t>(i)].integral[static_cast<std::size_t>(slot)];
            total += v;
            means.push_back(v / (boundary(i + 1) - boundary(i)));
        }
        return {total / (end_ - start_), standard_error(means)};
    }

    /// Mean of the post-arrival Gamma samples, batch-means error over the
    /// batches that contain at least one sample.
    Estimate arrival_sample_mean() const {
        double sum = 0.0;
        std::uint64_t count = 0;
        std::vector<double> means;
        for (const auto& b : batches_) {
            sum += b.sample_sum;
            count += b.sample_count;
            if (b.sample_count > 0) means.push_back(b.sample_sum / static_cast<double>(b.sample_count));
        }
        if (count == 0) throw DomainError("no arrivals inside the estimation window");
        return {sum / static_cast<double>(count), standard_error(means)};
    }

    std::uint64_t arrival_samples() const {
        std::uint64_t n = 0;
        for (const auto& b : batches_) n += b.sample_count;
        return n;
    }

    /// Sample standard deviation of the batch means over sqrt(#batches).
    static double standard_error(const std::vector<double>& means) {
        const auto n = means.size();
        if (n < 2) return INFINITY;
        double mean = 0.0;
        for (double m : means) mean += m;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double m : means) ss += (m - mean) * (m - mean);
        return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    }

private:
    struct Batch {
        std::array<double, 5> integral{};
        double sample_sum = 0.0;
        std::uint64_t sample_count = 0;
    };

    static int slot_of(AgeProcess p, int k) {
        if (p == AgeProcess::Gamma && (k == 1 || k == 2)) return k - 1;
        if (p == AgeProcess::DeltaR && (k == 1 || k == 2)) return k + 1;
        if (p == AgeProcess::DeltaT && k == 1) return 4;
        throw DomainError("batch means tracks Gamma and Delta_R for k in {1,2} and Delta_T for k=1");
    }

    double boundary(int i) const { return i >= n_ ? end_ : start_ + width_ * i; }

    int batch_of(double t) const {
        int idx = static_cast<int>((t - start_) / width_);
        idx = std::clamp(idx, 0, n_ - 1);
        while (idx + 1 < n_ && boundary(idx + 1) <= t) ++idx;
        while (idx > 0 && boundary(idx) > t) --idx;
        return idx;
    }

    double start_;
    double end_;
    int n_;
    double width_ = 0.0;
    std::vector<Batch> batches_;
};

}  // namespace raoi
