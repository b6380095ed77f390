#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>

namespace urllc::des
{
    /// 64-bit FNV-1a. Used to fold stream labels into seeds and to digest traces.
    std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

    /// One step of SplitMix64; advances `state` and returns the mixed output.
    std::uint64_t splitmix64(std::uint64_t &state) noexcept;

    // xoshiro256** seeded from SplitMix64(root_seed) folded with FNV-1a(stream_id).
    //
    // All distributions below are implemented here rather than via <random>
    // distributions, whose algorithms are implementation-defined. A given
    // (seed, stream_id) therefore yields the same draws on every platform.
    class RngStream
    {
    public:
        using result_type = std::uint64_t;

        RngStream(std::uint64_t root_seed, std::string_view stream_id);

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

        result_type operator()() noexcept { return next_u64(); }
        std::uint64_t next_u64() noexcept;

        /// Uniform on [0, 1) with 53 random bits.
        double uniform01() noexcept;
        /// Uniform on [lo, hi).
        double uniform(double lo, double hi) noexcept;
        /// Uniform integer on the closed range [lo, hi]; unbiased (Lemire).
        std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept;
        bool bernoulli(double p) noexcept;
        /// Standard normal via the Marsaglia polar method.
        double normal() noexcept;
        double exponential(double mean) noexcept;
        /// Poisson count by accumulating unit-rate exponential gaps; O(mean).
        std::uint64_t poisson(double mean) noexcept;

        template <typename T>
        void shuffle(std::span<T> items) noexcept
        {
            for (std::size_t i = items.size(); i > 1; --i)
            {
                const auto j = static_cast<std::size_t>(uniform_int(0, i - 1));
                std::swap(items[i - 1], items[j]);
            }
        }

        std::uint64_t seed() const noexcept { return m_seed; }
        const std::string &stream_id() const noexcept { return m_stream_id; }

    private:
        std::array<std::uint64_t, 4> m_state{};
        std::uint64_t m_seed;
        std::string m_stream_id;
        double m_spare_normal = 0.0;
        bool m_has_spare = false;
    };

    /// Independent, reproducible stream per label. Throws std::invalid_argument on an empty label.
    RngStream derive_stream(std::uint64_t root_seed, std::string_view stream_id);
}
