#include "doctest.h"

#include "urllc/access/multiaccess.hpp"

#include <cmath>
#include <numeric>

using namespace urllc::access;

namespace
{
    // Golden means come from a separate slot-by-slot reference model sharing only the RNG.
    void check_conservation(const AccessResult &r, int devices)
    {
        CHECK(r.delivered + r.undelivered == devices);
        CHECK(r.delay_ms.size() == static_cast<std::size_t>(devices));
        for (double d : r.delay_ms)
        {
            CHECK(d >= 0.0);
        }
    }
}

TEST_CASE("SIC rates telescope to the sum capacity")
{
    for (double snr : {0.1, 1.0, 10.0, 100.0})
    {
        for (int k = 1; k <= 16; ++k)
        {
            const auto r = sic_rates(k, snr, 1e7);
            const double sum = std::accumulate(r.begin(), r.end(), 0.0);
            CHECK(sum == doctest::Approx(1e7 * std::log2(1.0 + k * snr)).epsilon(1e-12));
            for (std::size_t i = 1; i < r.size(); ++i)
            {
                CHECK(r[i] > r[i - 1]);
            }
        }
    }
    const auto two = sic_rates(2, 1.0, 1.0);
    CHECK(two[0] == doctest::Approx(std::log2(1.5)));
    CHECK(two[1] == doctest::Approx(1.0));
}

TEST_CASE("single device: OMA and NOMA agree exactly")
{
    for (double snr : {0.5, 1.0, 100.0})
    {
        for (double payload : {1000.0, 1.4e6, 3e6})
        {
            for (int ns : {1, 4, 10})
            {
                MaScenario s;
                s.devices = 1;
                s.snr = snr;
                s.payload_bits = payload;
                s.subbands = ns;
                const auto o = simulate_oma(s, 5);
                const auto n = simulate_noma(s, 5);
                CHECK(o.delay_ms == n.delay_ms);
                CHECK(o.delay_ms[0] == static_cast<double>(oma_hold_slots(s)) * s.slot_ms);
            }
        }
    }
    MaScenario light;
    light.devices = 1;
    light.payload_bits = 1000;
    light.snr = 1.0;
    CHECK(single_user_rate(light) == 1e7);
    CHECK(simulate_oma(light, 0).delay_ms[0] == 1.0);
}

TEST_CASE("forced collision on one subband")
{
    MaScenario s;
    s.devices = 2;
    s.subbands = 1;
    s.payload_bits = 1000;
    const auto r = simulate_oma(s, 11);
    check_conservation(r, 2);
    CHECK(r.delivered == 2);
    CHECK(r.mean_delay_ms() > 1.0);
    CHECK(*std::min_element(r.delay_ms.begin(), r.delay_ms.end()) >= 2.0);
}

TEST_CASE("conservation and determinism")
{
    for (Scheme scheme : {Scheme::Oma, Scheme::Noma})
    {
        for (int d : {1, 7, 60})
        {
            MaScenario s;
            s.devices = d;
            s.max_slots = 200;
            const auto a = simulate(scheme, s, 42);
            const auto b = simulate(scheme, s, 42);
            check_conservation(a, d);
            CHECK(a.delay_ms == b.delay_ms);
            CHECK(a.delivered_flag == b.delivered_flag);
        }
    }
}

TEST_CASE("undelivered devices are censored at the cap")
{
    MaScenario s;
    s.devices = 200;
    s.max_slots = 50;
    const auto r = simulate_oma(s, 1);
    check_conservation(r, 200);
    CHECK(r.undelivered > 0);
    for (std::size_t i = 0; i < r.delay_ms.size(); ++i)
    {
        if (!r.delivered_flag[i])
        {
            CHECK(r.delay_ms[i] == 50.0);
        }
        else
        {
            CHECK(r.delay_ms[i] <= 50.0);
        }
    }
}

TEST_CASE("Poisson arrivals")
{
    MaScenario s;
    s.devices = 40;
    s.arrival = ArrivalModel::Poisson;
    s.arrival_rate_per_ms = 0.2;
    for (Scheme scheme : {Scheme::Oma, Scheme::Noma})
    {
        const auto r = simulate(scheme, s, 9);
        check_conservation(r, 40);
        CHECK(r.undelivered == 0);
        CHECK(r.delay_ms == simulate(scheme, s, 9).delay_ms);
        for (double d : r.delay_ms)
        {
            CHECK(d >= static_cast<double>(oma_hold_slots(s)) - 1.0);
        }
    }
}

TEST_CASE("grant overhead adds to every OMA delay")
{
    MaScenario s;
    s.devices = 25;
    const auto base = simulate_oma(s, 3);
    s.oma_grant_overhead_ms = 17.0;
    const auto slow = simulate_oma(s, 3);
    for (std::size_t i = 0; i < base.delay_ms.size(); ++i)
    {
        CHECK(slow.delay_ms[i] == base.delay_ms[i] + 17.0);
    }
}

TEST_CASE("golden means against the reference model")
{
    MaScenario s;
    const auto at = [&](int d) {
        MaScenario x = s;
        x.devices = d;
        return x;
    };
    CHECK(simulate_oma(at(10), 0).mean_delay_ms() == doctest::Approx(26.1).epsilon(1e-12));
    CHECK(simulate_noma(at(10), 0).mean_delay_ms() == doctest::Approx(29.0).epsilon(1e-12));
    CHECK(simulate_oma(at(10), 7).mean_delay_ms() == doctest::Approx(26.1).epsilon(1e-12));
    CHECK(simulate_noma(at(10), 7).mean_delay_ms() == doctest::Approx(29.8).epsilon(1e-12));
    CHECK(simulate_oma(at(50), 3).mean_delay_ms() == doctest::Approx(80.9).epsilon(1e-12));
    CHECK(simulate_noma(at(50), 3).mean_delay_ms() == doctest::Approx(62.3).epsilon(1e-12));
    CHECK(simulate_noma(at(500), 0).mean_delay_ms() == doctest::Approx(358.736).epsilon(1e-12));
    const auto oma500 = simulate_oma(at(500), 0);
    CHECK(oma500.mean_delay_ms() == 10'000.0);
    CHECK(oma500.undelivered == 500);
}

TEST_CASE("delay_vs_devices")
{
    MaScenario s;
    const auto one = delay_vs_devices(s, {10}, 1, Scheme::Noma);
    REQUIRE(one.size() == 1);
    s.devices = 10;
    CHECK(one[0].mean_ms == simulate_noma(s, 0).mean_delay_ms());
    CHECK(one[0].ci95_ms == 0.0);

    const auto serial = delay_vs_devices(s, {10, 20, 40}, 4, Scheme::Oma, 0, 1);
    const auto threaded = delay_vs_devices(s, {10, 20, 40}, 4, Scheme::Oma, 0, 3);
    for (std::size_t i = 0; i < serial.size(); ++i)
    {
        CHECK(serial[i].seed_means == threaded[i].seed_means);
        CHECK(serial[i].ci95_ms > 0.0);
    }
    // OMA beyond the contention knee grows with D
    for (std::size_t i = 1; i < serial.size(); ++i)
    {
        CHECK(serial[i].mean_ms + serial[i].ci95_ms >= serial[i - 1].mean_ms - serial[i - 1].ci95_ms);
    }
    CHECK_THROWS_AS(delay_vs_devices(s, {20, 10}, 2, Scheme::Oma), ScenarioError);
    CHECK_THROWS_AS(delay_vs_devices(s, {10}, 0, Scheme::Oma), ScenarioError);
}

TEST_CASE("validation")
{
    MaScenario s;
    s.devices = 0;
    CHECK_THROWS_AS(simulate_oma(s, 0), ScenarioError);
    s.devices = 1;
    s.subbands = 0;
    CHECK_THROWS_AS(simulate_noma(s, 0), ScenarioError);
    CHECK(parse_scheme("noma") == Scheme::Noma);
    CHECK_THROWS_AS(parse_scheme("cdma"), ScenarioError);
}
