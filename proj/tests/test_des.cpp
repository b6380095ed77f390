#include "doctest.h"

#include "urllc/des/engine.hpp"
#include "urllc/des/rng.hpp"

#include <algorithm>
#include <vector>

using namespace urllc::des;

namespace
{
    std::vector<std::uint32_t> drain_tags(Engine &engine, SimTime deadline)
    {
        std::vector<std::uint32_t> tags;
        engine.run_until(deadline, [&](Engine &, const Event &ev) { tags.push_back(ev.tag); });
        return tags;
    }
}

TEST_CASE("events run in time order")
{
    Engine engine;
    engine.schedule(SimTime::from_us(5000), 5);
    engine.schedule(SimTime::from_us(3000), 3);
    CHECK(drain_tags(engine, SimTime::from_us(10'000)) == std::vector<std::uint32_t>{3, 5});
    CHECK(engine.now() == SimTime::from_us(5000));
}

TEST_CASE("equal timestamps run in insertion order")
{
    Engine engine;
    engine.schedule(SimTime::from_us(3000), 'A');
    engine.schedule(SimTime::from_us(3000), 'B');
    CHECK(drain_tags(engine, SimTime::from_us(3000)) == std::vector<std::uint32_t>{'A', 'B'});
}

TEST_CASE("event scheduled at now precedes later events")
{
    Engine engine;
    engine.schedule(SimTime::from_us(100), 1);
    std::vector<std::uint32_t> order;
    engine.run_until(SimTime::from_us(1000), [&](Engine &e, const Event &ev) {
        order.push_back(ev.tag);
        if (ev.tag == 1)
        {
            e.schedule(SimTime::from_us(200), 3);
            e.schedule(e.now(), 2);
        }
    });
    CHECK(order == std::vector<std::uint32_t>{1, 2, 3});
}

TEST_CASE("scheduling into the past is rejected")
{
    Engine engine;
    engine.schedule(SimTime::from_us(500), 0);
    engine.run_until(SimTime::from_us(500), [](Engine &, const Event &) {});
    CHECK_THROWS_AS(engine.schedule(SimTime::from_us(499), 0), SchedulingError);

    Engine other;
    other.schedule(SimTime::from_us(10), 0);
    CHECK_THROWS_AS(other.run_until(SimTime::from_us(100),
                                    [](Engine &e, const Event &) { e.schedule(SimTime::from_us(5), 1); }),
                    SchedulingError);
}

TEST_CASE("run_until counts and respects the deadline")
{
    Engine empty;
    CHECK(empty.run_until(SimTime::from_us(1'000'000), [](Engine &, const Event &) {}) == 0);
    CHECK(empty.now() == SimTime{});

    Engine engine;
    for (std::int64_t t : {10, 20, 30, 2000, 3000})
    {
        engine.schedule(SimTime::from_us(t), 0);
    }
    CHECK(engine.run_until(SimTime::from_us(1000), [](Engine &, const Event &) {}) == 3);
    CHECK(engine.pending() == 2);
    CHECK(engine.now() == SimTime::from_us(30));
}

TEST_CASE("self-rescheduling tick fires ten times by 10 ms")
{
    Engine engine;
    engine.schedule(SimTime::from_us(1000), 0);
    const auto n = engine.run_until(SimTime::from_us(10'000),
                                    [](Engine &e, const Event &) { e.schedule_in(SimTime::from_us(1000), 0); });
    CHECK(n == 10);
}

TEST_CASE("processing order is a total order on (fire_at, seq) for random insertions")
{
    for (std::uint64_t seed = 0; seed < 25; ++seed)
    {
        auto rng = derive_stream(seed, "des.property");
        Engine engine;
        engine.enable_trace();
        const int n = 200;
        for (int i = 0; i < n; ++i)
        {
            engine.schedule(SimTime::from_us(static_cast<std::int64_t>(rng.uniform_int(0, 50))), 0,
                            static_cast<std::uint64_t>(i));
        }
        CHECK(engine.run_until(SimTime::from_us(50), [](Engine &, const Event &) {}) == static_cast<std::size_t>(n));
        const auto &trace = engine.trace();
        CHECK(std::is_sorted(trace.begin(), trace.end(), [](const Event &a, const Event &b) {
            return a.fire_at != b.fire_at ? a.fire_at < b.fire_at : a.seq < b.seq;
        }));
        // seq is the insertion counter, which equals the payload here
        CHECK(std::all_of(trace.begin(), trace.end(), [](const Event &ev) { return ev.seq == ev.payload; }));
    }
}

TEST_CASE("replays produce identical traces")
{
    auto run = [](std::uint64_t seed) {
        Engine engine;
        engine.enable_trace();
        auto rng = derive_stream(seed, "replay");
        engine.schedule(SimTime{}, 0);
        engine.run_until(SimTime::from_ms(std::int64_t{50}), [&](Engine &e, const Event &ev) {
            if (ev.payload < 400)
            {
                e.schedule_in(SimTime::from_us(static_cast<std::int64_t>(rng.uniform_int(0, 300))), 0,
                              ev.payload + 1);
            }
        });
        return engine.trace_digest();
    };
    CHECK(run(7) == run(7));
    CHECK(run(7) != run(8));
}

TEST_CASE("streams are reproducible and independent")
{
    auto a = derive_stream(42, "oma");
    auto b = derive_stream(42, "oma");
    auto c = derive_stream(42, "noma");
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 100; ++i)
    {
        const auto x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
    CHECK_THROWS_AS(derive_stream(1, ""), std::invalid_argument);
}

TEST_CASE("golden draws for (12345, \"test\")")
{
    // Frozen from an independent Python implementation of the same seeding and generator.
    auto rng = derive_stream(12345, "test");
    CHECK(rng.next_u64() == 0x9b7dc57e64a771bfULL);
    CHECK(rng.next_u64() == 0x9a3d47d4c49f9089ULL);
    CHECK(rng.next_u64() == 0xb0f81368244de7beULL);
    CHECK(rng.next_u64() == 0x13ee3f9eedeadbdfULL);
}

TEST_CASE("distribution sanity")
{
    auto rng = derive_stream(3, "dist");
    const int n = 200'000;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t lo = 100;
    std::uint64_t hi = 0;
    for (int i = 0; i < n; ++i)
    {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
        const auto k = rng.uniform_int(1, 16);
        lo = std::min(lo, k);
        hi = std::max(hi, k);
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
    CHECK(lo == 1);
    CHECK(hi == 16);

    double pois = 0.0;
    for (int i = 0; i < 2000; ++i)
    {
        pois += static_cast<double>(rng.poisson(40.0));
    }
    CHECK(std::abs(pois / 2000 - 40.0) < 0.6);
}
