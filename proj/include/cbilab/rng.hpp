#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace cbilab {

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: output n is a bijective mix of (key + n * golden).
/// Streams with different keys never share state, so replication-level
/// parallelism needs no coordination.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream() = default;
    Stream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
        : key_(mix64(mix64(master_seed) ^ mix64(stream_id ^ 0xD1B54A32D192ED03ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t counter() const noexcept { return counter_; }

    /// Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t key_ = mix64(0);
    std::uint64_t counter_ = 0;
};

/// Stream ids for one replication: (rep_index, role) packed into one id.
enum class StreamRole : std::uint64_t { X = 0, Y = 1, Aux = 2 };

inline std::uint64_t stream_id(std::uint64_t rep_index, StreamRole role) noexcept {
    return rep_index * 4 + static_cast<std::uint64_t>(role);
}

}  // namespace cbilab
