#include "doctest.h"

#include "urllc/fbl/normal_approx.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

using namespace urllc::fbl;
using big = boost::multiprecision::cpp_bin_float_50;

namespace
{
    // 50-digit reference: Q by erfc, inverse by bisection. Independent of boost::math::erfc_inv.
    big q_big(const big &x)
    {
        return boost::multiprecision::erfc(x / boost::multiprecision::sqrt(big(2))) / 2;
    }

    big q_inv_big(const big &p)
    {
        big lo = -40;
        big hi = 40;
        for (int i = 0; i < 300; ++i)
        {
            const big mid = (lo + hi) / 2;
            if (q_big(mid) > p)
            {
                lo = mid;
            }
            else
            {
                hi = mid;
            }
        }
        return (lo + hi) / 2;
    }

    big rate_big(long n, const big &eps, const big &g)
    {
        using boost::multiprecision::log;
        using boost::multiprecision::sqrt;
        const big ln2 = log(big(2));
        const big c = log(1 + g) / ln2;
        const big v = g * (g + 2) / (2 * (1 + g) * (1 + g)) / (ln2 * ln2);
        const big nb = n;
        return c - sqrt(v / nb) * q_inv_big(eps) + log(nb) / ln2 / (2 * nb);
    }

    std::vector<double> snr_grid()
    {
        std::vector<double> g;
        for (int i = 0; i < 20; ++i)
        {
            g.push_back(std::pow(10.0, -1.0 + 3.0 * i / 19.0));
        }
        return g;
    }
}

TEST_CASE("capacity")
{
    CHECK(capacity(AwgnChannel(1.0)) == 1.0);
    CHECK(capacity(AwgnChannel(3.0)) == 2.0);
    CHECK(capacity(AwgnChannel(0.5)) == doctest::Approx(0.58496250072115618).epsilon(1e-14));
    CHECK_THROWS_AS(AwgnChannel(0.0), DomainError);
    CHECK_THROWS_AS(AwgnChannel(-1.0), DomainError);
}

TEST_CASE("dB conversion round-trips")
{
    for (double g : {1e-3, 0.5, 1.0, 2.0, 100.0, 1e6})
    {
        const auto ch = AwgnChannel::from_db(AwgnChannel(g).snr_db());
        CHECK(std::abs(ch.snr() - g) / g < 1e-12);
    }
}

TEST_CASE("dispersion")
{
    CHECK(dispersion(AwgnChannel(1e-6)) < 1e-5);
    CHECK(dispersion(AwgnChannel(1e-6)) > 0.0);
    const double log2e_sq = std::pow(1.0 / std::log(2.0), 2);
    CHECK(std::abs(dispersion(AwgnChannel(1e6)) - log2e_sq / 2.0) < 1e-3);
    // (3/8)(log2 e)^2
    CHECK(dispersion(AwgnChannel(1.0)) == doctest::Approx(0.78051336787710292).epsilon(1e-14));
}

TEST_CASE("q_inv")
{
    CHECK(q_inv(0.5) == doctest::Approx(0.0));
    CHECK(std::abs(q_inv(0.15865525393145705) - 1.0) < 1e-9);
    CHECK(std::abs(q_inv(1e-4) - 3.7190164854556806) < 1e-9);
    CHECK_THROWS_AS(q_inv(0.0), DomainError);
    CHECK_THROWS_AS(q_inv(1.0), DomainError);
    CHECK_THROWS_AS(q_inv(-0.1), DomainError);

    // round trip over [1e-12, 0.5]
    for (int i = 0; i <= 200; ++i)
    {
        const double p = std::pow(10.0, -12.0 + (12.0 + std::log10(0.5)) * i / 200.0);
        CHECK(std::abs(q_function(q_inv(p)) - p) < 1e-12);
    }
}

TEST_CASE("normal approximation")
{
    const AwgnChannel unit(1.0);
    CHECK(std::abs(ppv_max_rate(1'000'000, 1e-4, unit) - 1.0) < 0.01);

    // 50-digit in-test oracle and the frozen mpmath value agree with the double path.
    const double oracle = static_cast<double>(rate_big(192, big("1e-4"), big(2)));
    CHECK(std::abs(oracle - 1.3465717598806135) < 1e-15);
    CHECK(std::abs(ppv_max_rate(192, 1e-4, AwgnChannel(2.0)) - 1.3465717598806135) < 1e-12);
    CHECK(std::abs(ppv_max_rate(192, 1e-4, AwgnChannel(2.0), LogTerm::Off) - 1.3268192533683189) < 1e-12);

    // Near eps = 0.5 the dispersion penalty vanishes; only the log term can push R* past C.
    CHECK(ppv_max_rate(4096, 0.4999, unit, LogTerm::Off) < capacity(unit) + 1e-6);
    CHECK(ppv_max_rate(4096, 0.4999, unit) - capacity(unit) <= std::log2(4096.0) / (2.0 * 4096.0));
    CHECK_THROWS_AS(ppv_max_rate(100, 0.5, unit), DomainError);
    CHECK_THROWS_AS(ppv_max_rate(0, 1e-3, unit), DomainError);

    const auto pt = ppv_point(192, 1e-4, AwgnChannel(2.0));
    CHECK(pt.capacity == capacity(AwgnChannel(2.0)));
    CHECK(pt.max_rate < pt.capacity);
}

TEST_CASE("minimum blocklength")
{
    CHECK(min_blocklength(8, 1e-4, AwgnChannel(1e6)) <= 8);
    // exhaustive scan oracle in 50-digit arithmetic gave n* = 147 (146 carries 191.78 bits)
    const auto n_star = min_blocklength(192, 1e-4, AwgnChannel(2.0));
    CHECK(n_star == 147);
    CHECK(147.0 * ppv_max_rate(147, 1e-4, AwgnChannel(2.0)) >= 192.0);
    CHECK(146.0 * ppv_max_rate(146, 1e-4, AwgnChannel(2.0)) < 192.0);
    CHECK(min_blocklength(192, 1e-4, AwgnChannel(2.0), LogTerm::Off) == 149);

    for (std::int64_t k : {1, 8, 32, 100, 256})
    {
        CHECK(min_blocklength(2 * k, 1e-3, AwgnChannel(0.7)) >= min_blocklength(k, 1e-3, AwgnChannel(0.7)));
    }
    CHECK_THROWS_AS(min_blocklength(10'000, 1e-9, AwgnChannel(1e-6), LogTerm::On, 1000), SearchExhausted);
}

TEST_CASE("rate is monotone in snr and blocklength and converges to capacity")
{
    const auto grid = snr_grid();
    for (double eps : {1e-9, 1e-7, 1e-4, 1e-2})
    {
        for (std::size_t gi = 0; gi < grid.size(); ++gi)
        {
            const AwgnChannel ch(grid[gi]);
            double previous = -1e300;
            for (std::int64_t n = 64; n <= 65536; n *= 2)
            {
                const double r = ppv_max_rate(n, eps, ch);
                CHECK(r >= previous);
                CHECK(r <= capacity(ch));
                previous = r;
                if (gi > 0)
                {
                    CHECK(r >= ppv_max_rate(n, eps, AwgnChannel(grid[gi - 1])));
                }
            }
            CHECK(std::abs(ppv_max_rate(std::int64_t{1} << 26, eps, ch) - capacity(ch)) < 1e-3);
        }
    }
}

TEST_CASE("capacity and dispersion strictly increase with snr")
{
    const auto grid = snr_grid();
    for (std::size_t i = 1; i < grid.size(); ++i)
    {
        CHECK(capacity(AwgnChannel(grid[i])) > capacity(AwgnChannel(grid[i - 1])));
        CHECK(dispersion(AwgnChannel(grid[i])) > dispersion(AwgnChannel(grid[i - 1])));
        const double h = grid[i] * 1e-6;
        CHECK(dispersion(AwgnChannel(grid[i] + h)) - dispersion(AwgnChannel(grid[i] - h)) > 0.0);
    }
}
