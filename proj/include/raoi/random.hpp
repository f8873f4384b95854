#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace raoi {

// Independent substreams derived from one master seed. Arrivals and service
// draws never share a stream, so swapping the discipline leaves the arrival
// sequence untouched.
enum class Stream : std::uint64_t { Arrivals = 1, Service = 2, Auxiliary = 3 };

class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, Stream stream) {
        const auto id = static_cast<std::uint64_t>(stream);
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                          static_cast<std::uint32_t>(master_seed >> 32),
                          static_cast<std::uint32_t>(id), 0x5eedu};
        engine_.seed(seq);
    }

    // Uniform on (0, 1]; built from the raw 64-bit output so it is
    // bit-identical across standard library implementations.
    double uniform_open0() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    // Inverse-CDF exponential draw.
    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

private:
    std::mt19937_64 engine_;
};

}  // namespace raoi
