#include "urllc/des/rng.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace urllc::des
{
    std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept
    {
        std::uint64_t h = basis;
        for (unsigned char c : bytes)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::uint64_t splitmix64(std::uint64_t &state) noexcept
    {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    RngStream::RngStream(std::uint64_t root_seed, std::string_view stream_id)
        : m_seed(root_seed), m_stream_id(stream_id)
    {
        std::uint64_t sm = root_seed;
        std::uint64_t mixed = splitmix64(sm) ^ fnv1a64(stream_id);
        for (auto &word : m_state)
        {
            word = splitmix64(mixed);
        }
    }

    std::uint64_t RngStream::next_u64() noexcept
    {
        const std::uint64_t result = std::rotl(m_state[1] * 5, 7) * 9;
        const std::uint64_t t = m_state[1] << 17;
        m_state[2] ^= m_state[0];
        m_state[3] ^= m_state[1];
        m_state[1] ^= m_state[2];
        m_state[0] ^= m_state[3];
        m_state[2] ^= t;
        m_state[3] = std::rotl(m_state[3], 45);
        return result;
    }

    double RngStream::uniform01() noexcept
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double RngStream::uniform(double lo, double hi) noexcept
    {
        return lo + (hi - lo) * uniform01();
    }

    std::uint64_t RngStream::uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept
    {
        if (hi <= lo)
        {
            return lo;
        }
        const std::uint64_t span = hi - lo;
        if (span == std::numeric_limits<std::uint64_t>::max())
        {
            return next_u64();
        }
        const std::uint64_t range = span + 1;
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * range;
        auto low = static_cast<std::uint64_t>(m);
        if (low < range)
        {
            const std::uint64_t threshold = (0 - range) % range;
            while (low < threshold)
            {
                m = static_cast<unsigned __int128>(next_u64()) * range;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return lo + static_cast<std::uint64_t>(m >> 64);
    }

    bool RngStream::bernoulli(double p) noexcept
    {
        return uniform01() < p;
    }

    double RngStream::normal() noexcept
    {
        if (m_has_spare)
        {
            m_has_spare = false;
            return m_spare_normal;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do
        {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        m_spare_normal = v * scale;
        m_has_spare = true;
        return u * scale;
    }

    double RngStream::exponential(double mean) noexcept
    {
        // 1 - U lies in (0, 1], so the log is finite.
        return -mean * std::log(1.0 - uniform01());
    }

    std::uint64_t RngStream::poisson(double mean) noexcept
    {
        if (!(mean > 0.0))
        {
            return 0;
        }
        std::uint64_t count = 0;
        double t = exponential(1.0);
        while (t < mean)
        {
            ++count;
            t += exponential(1.0);
        }
        return count;
    }

    RngStream derive_stream(std::uint64_t root_seed, std::string_view stream_id)
    {
        if (stream_id.empty())
        {
            throw std::invalid_argument("derive_stream: stream_id must be non-empty");
        }
        return RngStream(root_seed, stream_id);
    }
}
