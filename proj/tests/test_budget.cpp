#include "doctest.h"

#include "urllc/budget/latency_budget.hpp"

#include <cmath>

using namespace urllc::budget;

TEST_CASE("grant-based uplink")
{
    const auto b = uplink_budget();
    CHECK(b.total() == Millis(17));
    REQUIRE(b.components.size() == 7);
    const Millis expected[7] = {5, 1, 3, 1, 3, 1, 3};
    for (std::size_t i = 0; i < 7; ++i)
    {
        CHECK(b.components[i].duration == expected[i]);
    }
    CHECK(uplink_budget({Millis(0), Millis(0), Millis(0)}).total() == Millis(0));
    // 5 + 0.5 + 3 + 0.5 + 3 + 0.5 + 3
    CHECK(uplink_budget({.tti = Millis(1, 2)}).total() == Millis(31, 2));
    CHECK_THROWS_AS(uplink_budget({.proc = Millis(-1)}), std::invalid_argument);
}

TEST_CASE("downlink")
{
    const auto b = downlink_budget();
    CHECK(b.total() == Millis(15, 2));
    REQUIRE(b.components.size() == 4);
    CHECK(b.components[0].name == "incoming data processing");
    CHECK(b.components[1].name == "TTI alignment");
    CHECK(b.components[3].name == "data decoding in UE");
    CHECK(downlink_budget({Millis(0), Millis(0), Millis(0), Millis(0)}).total() == Millis(0));
    // 3 + 0.5 + 0.125 + 3
    CHECK(downlink_budget({.tti = Millis(1, 8)}).total() == Millis(53, 8));
}

TEST_CASE("HARQ retransmissions")
{
    CHECK(with_harq(uplink_budget(), 1).total() == Millis(25));
    CHECK(with_harq(uplink_budget(), 0).total() == uplink_budget().total());
    CHECK(with_harq(downlink_budget(), 2).total() == Millis(47, 2));
    CHECK_THROWS_AS(with_harq(uplink_budget(), -1), std::invalid_argument);
}

TEST_CASE("random access and core network")
{
    CHECK(random_access_budget().total() == Millis(19, 2));
    CHECK(random_access_budget().components.size() == 1);
    CHECK(unaligned_uplink_budget().total() == Millis(53, 2));
    CHECK(with_core_network(unaligned_uplink_budget(), Millis(39)).total() == Millis(131, 2));
}

TEST_CASE("budget total is the sum of its parts")
{
    auto rng = urllc::des::derive_stream(11, "budget.property");
    for (int trial = 0; trial < 200; ++trial)
    {
        DelayBudget b;
        Millis expected{0};
        const auto n = rng.uniform_int(0, 12);
        for (std::uint64_t i = 0; i < n; ++i)
        {
            const Millis d(static_cast<std::int64_t>(rng.uniform_int(0, 400)),
                           static_cast<std::int64_t>(rng.uniform_int(1, 16)));
            b.components.push_back({"c", d});
            expected += d;
        }
        const auto a = static_cast<std::int64_t>(rng.uniform_int(0, 5));
        const auto extra = static_cast<std::int64_t>(rng.uniform_int(0, 5));
        CHECK(b.total() == expected);
        // linear in retx
        CHECK(with_harq(b, a + extra).total() == with_harq(b, a).total() + Millis(extra) * b.harq_rtt);
    }
}

TEST_CASE("delay source constants")
{
    const auto &rows = lte_rel8::delay_sources();
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].value == Millis(5));
    CHECK(rows[1].value == Millis(19, 2));
    CHECK(rows[2].value == Millis(1));
    CHECK(rows[3].value == Millis(3));
    CHECK(rows[4].value == Millis(8));
    CHECK_FALSE(rows[5].value.has_value());
}

TEST_CASE("receiver processing constants")
{
    const double expected[9][3] = {
        {0.0010, 0.0023, 0.0037},
        {2.9004e-04, 6.2917e-04, 8.3004e-04},
        {1.2523e-04, 2.2708e-04, 3.1685e-04},
        {0.0015, 0.0141, 0.0878},
        {0.0013, 0.0045, 0.0087},
        {0.0028, 0.0242, 0.0760},
        {2.4947e-04, 6.6754e-04, 0.0012},
        {4.3253e-05, 1.0988e-04, 3.8987e-04},
        {0.0129, 0.0498, 0.1048},
    };
    const Bandwidth cols[3] = {Bandwidth::MHz1_4, Bandwidth::MHz5, Bandwidth::MHz10};
    for (int c = 0; c < 3; ++c)
    {
        const auto profile = lte_receiver_profile(cols[c]);
        REQUIRE(profile.module_times.size() == 9);
        for (int r = 0; r < 9; ++r)
        {
            CHECK(profile.module_times.at(std::string(receive_modules()[r])) == expected[r][c]);
        }
    }
}

TEST_CASE("processing totals and shares")
{
    // Column sums computed by hand from the nine values.
    CHECK(std::abs(processing_total(lte_receiver_profile(Bandwidth::MHz1_4)).total_s - 0.020207993) < 1e-12);
    CHECK(std::abs(processing_total(lte_receiver_profile(Bandwidth::MHz5)).total_s - 0.09653367) < 1e-12);

    const auto ten = processing_total(lte_receiver_profile(Bandwidth::MHz10));
    CHECK(std::abs(ten.total_s - 0.28373676) < 1e-12);
    double share_sum = 0.0;
    for (const auto &[name, share] : ten.shares)
    {
        share_sum += share;
        if (name == "Channel Estimation (MMSE)")
        {
            CHECK(share == doctest::Approx(0.0878 / ten.total_s).epsilon(1e-14));
        }
    }
    CHECK(std::abs(share_sum - 1.0) < 1e-12);

    auto broken = lte_receiver_profile(Bandwidth::MHz5);
    broken.module_times.erase("FFT");
    try
    {
        processing_total(broken);
        FAIL("expected MissingModuleError");
    }
    catch (const MissingModuleError &e)
    {
        CHECK(e.module() == "FFT");
    }
}

TEST_CASE("millisecond parsing and formatting")
{
    CHECK(parse_millis("17") == Millis(17));
    CHECK(parse_millis("0.125") == Millis(1, 8));
    CHECK(parse_millis(" 9.5 ") == Millis(19, 2));
    CHECK_THROWS_AS(parse_millis("-1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_millis("abc"), std::invalid_argument);
    CHECK(format_millis(Millis(53, 8)) == "6.625");
    CHECK(format_millis(Millis(17)) == "17");
    CHECK(format_millis(Millis(1, 3)) == "0.333333");
    CHECK(to_sim_time(Millis(31, 2)).us == 15'500);
}

TEST_CASE("SR wait sampling is uniform over two periods")
{
    auto rng = urllc::des::derive_stream(5, "sr");
    double sum = 0.0;
    std::int64_t hi = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i)
    {
        const auto w = sample_sr_wait(rng);
        CHECK(w.us >= 0);
        hi = std::max(hi, w.us);
        sum += w.ms();
    }
    CHECK(hi < 10'000);
    CHECK(std::abs(sum / n - 5.0) < 0.05);
}
