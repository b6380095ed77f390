#include "doctest.h"

#include "urllc/afc/afc.hpp"
#include "urllc/fbl/normal_approx.hpp"

#include <cmath>
#include <numeric>
#include <set>

using namespace urllc::afc;
using urllc::des::derive_stream;

namespace
{
    AfcParams small_params(int k, int degree)
    {
        AfcParams p;
        p.k = k;
        p.degree = degree;
        p.weights = default_weights(degree);
        return p;
    }

    std::vector<std::uint8_t> random_message(std::size_t k, std::uint64_t seed)
    {
        auto rng = derive_stream(seed, "test.message");
        std::vector<std::uint8_t> m(k);
        for (auto &b : m)
        {
            b = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
        }
        return m;
    }

    // Exact posterior LLRs by enumerating all 2^k messages.
    std::vector<double> brute_force_llr(std::span<const double> y, std::span<const GeneratorRow> rows, double noise_var,
                                        int k)
    {
        std::vector<double> p0(static_cast<std::size_t>(k), 0.0);
        std::vector<double> p1(static_cast<std::size_t>(k), 0.0);
        for (unsigned msg = 0; msg < (1U << k); ++msg)
        {
            double log_p = 0.0;
            for (std::size_t j = 0; j < rows.size(); ++j)
            {
                double s = 0.0;
                for (std::size_t l = 0; l < rows[j].bit_indices.size(); ++l)
                {
                    s += rows[j].weights[l] * (((msg >> rows[j].bit_indices[l]) & 1U) ? 0.5 : -0.5);
                }
                log_p -= (y[j] - s) * (y[j] - s) / (2.0 * noise_var);
            }
            const double p = std::exp(log_p);
            for (int i = 0; i < k; ++i)
            {
                ((msg >> i) & 1U ? p1 : p0)[static_cast<std::size_t>(i)] += p;
            }
        }
        std::vector<double> llr(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < llr.size(); ++i)
        {
            llr[i] = std::log(p0[i]) - std::log(p1[i]);
        }
        return llr;
    }
}

TEST_CASE("default weights have unit symbol power and descend")
{
    const auto w = default_weights(8);
    REQUIRE(w.size() == 8);
    CHECK(symbol_power(w) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 1; i < w.size(); ++i)
    {
        CHECK(w[i] < w[i - 1]);
        CHECK(w[i] / w[i - 1] == doctest::Approx(1.0 / std::sqrt(2.0)));
    }
}

TEST_CASE("configuration errors")
{
    auto p = small_params(4, 4);
    p.degree = 5;
    p.weights = default_weights(5);
    auto rng = derive_stream(1, "rows");
    CHECK_THROWS_AS(sample_rows(p, 1, rng), ConfigError);
    auto zero = small_params(8, 2);
    zero.weights = {0.0, 0.0};
    CHECK_THROWS_AS(validate(zero), ConfigError);
}

TEST_CASE("sample_rows")
{
    SUBCASE("degree equal to k covers every bit")
    {
        auto rng = derive_stream(9, "rows");
        for (const auto &row : sample_rows(small_params(4, 4), 20, rng))
        {
            CHECK(std::set<std::uint32_t>(row.bit_indices.begin(), row.bit_indices.end()).size() == 4);
        }
    }
    SUBCASE("deterministic per stream")
    {
        auto a = derive_stream(5, "rows");
        auto b = derive_stream(5, "rows");
        const auto ra = sample_rows(small_params(64, 8), 30, a);
        const auto rb = sample_rows(small_params(64, 8), 30, b);
        for (std::size_t i = 0; i < ra.size(); ++i)
        {
            CHECK(ra[i].bit_indices == rb[i].bit_indices);
            CHECK(ra[i].weights == rb[i].weights);
        }
    }
    SUBCASE("per-bit inclusion frequency is d/k")
    {
        auto rng = derive_stream(2024, "rows");
        const auto params = small_params(192, 8);
        const auto rows = sample_rows(params, 10'000, rng);
        std::vector<int> hits(192, 0);
        for (const auto &row : rows)
        {
            CHECK(std::set<std::uint32_t>(row.bit_indices.begin(), row.bit_indices.end()).size() == 8);
            auto sorted = row.weights;
            std::sort(sorted.begin(), sorted.end(), std::greater<>());
            CHECK(sorted == params.weights);
            for (auto idx : row.bit_indices)
            {
                ++hits[idx];
            }
        }
        const double p = 8.0 / 192.0;
        const double mean = 10'000 * p;
        const double sigma = std::sqrt(10'000 * p * (1 - p));
        for (int h : hits)
        {
            CHECK(std::abs(h - mean) <= 3.0 * sigma);
        }
    }
}

TEST_CASE("encode")
{
    SUBCASE("all-zero message gives minus half the row weight sum")
    {
        auto rng = derive_stream(3, "rows");
        const auto rows = sample_rows(small_params(32, 8), 10, rng);
        const std::vector<std::uint8_t> zeros(32, 0);
        const auto symbols = encode(zeros, rows);
        for (std::size_t j = 0; j < rows.size(); ++j)
        {
            const double sum = std::accumulate(rows[j].weights.begin(), rows[j].weights.end(), 0.0);
            CHECK(symbols[j] == doctest::Approx(-0.5 * sum));
        }
    }
    SUBCASE("a bit flip changes exactly the rows that contain it")
    {
        auto rng = derive_stream(4, "rows");
        const auto rows = sample_rows(small_params(32, 8), 60, rng);
        auto msg = random_message(32, 4);
        const auto before = encode(msg, rows);
        msg[7] ^= 1U;
        const auto after = encode(msg, rows);
        for (std::size_t j = 0; j < rows.size(); ++j)
        {
            const bool has = std::find(rows[j].bit_indices.begin(), rows[j].bit_indices.end(), 7U) !=
                             rows[j].bit_indices.end();
            CHECK((before[j] != after[j]) == has);
        }
    }
    SUBCASE("golden symbols, k = 8")
    {
        // Hand-built rows; expected values worked out by hand with w = {2, 1}.
        const std::vector<GeneratorRow> rows = {
            {{0, 1}, {2.0, 1.0}},
            {{2, 7}, {1.0, 2.0}},
            {{3, 4}, {2.0, 1.0}},
            {{5, 6}, {1.0, 2.0}},
            {{1, 6}, {2.0, 1.0}},
        };
        const std::vector<std::uint8_t> msg = {1, 0, 1, 1, 0, 0, 1, 0};
        const auto s = encode(msg, rows);
        // (+1 - 0.5), (+0.5 - 1), (+1 - 0.5), (-0.5 + 1), (-1 + 0.5)
        CHECK(s == std::vector<double>{0.5, -0.5, 0.5, 0.5, -0.5});
    }
}

TEST_CASE("bp_decode edge cases")
{
    const auto params = small_params(16, 4);
    const auto none = bp_decode({}, {}, 0.1, params);
    CHECK_FALSE(none.converged);
    CHECK(none.iterations == 0);
    CHECK(std::all_of(none.llr.begin(), none.llr.end(), [](double v) { return v == 0.0; }));

    auto scalar = small_params(1, 1);
    const std::vector<GeneratorRow> one = {{{0}, scalar.weights}};
    for (std::uint8_t bit : {0, 1})
    {
        const std::vector<std::uint8_t> msg = {bit};
        const auto y = encode(msg, one);
        const auto r = bp_decode(y, one, 1e-9, scalar);
        CHECK(r.bits[0] == bit);
        CHECK((r.llr[0] < 0) == (y[0] > 0));
    }

    CHECK_THROWS_AS(bp_decode(std::vector<double>{1.0}, {}, 0.1, params), ConfigError);
    CHECK_THROWS_AS(bp_decode({}, {}, 0.0, params), ConfigError);
}

TEST_CASE("noiseless decoding with 4k symbols recovers the message")
{
    const auto params = small_params(32, 8);
    int recovered = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        auto rng = derive_stream(seed, "rows");
        const auto rows = sample_rows(params, 4 * 32, rng);
        const auto msg = random_message(32, seed);
        const auto r = bp_decode(encode(msg, rows), rows, 1e-9, params);
        recovered += r.bits == msg ? 1 : 0;
    }
    CHECK(recovered == 100);
}

TEST_CASE("single observation is a tree: BP equals brute-force marginals")
{
    auto params = small_params(2, 2);
    auto rng = derive_stream(17, "rows");
    auto noise = derive_stream(17, "noise");
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto rows = sample_rows(params, 1, rng);
        const auto msg = random_message(2, static_cast<std::uint64_t>(trial));
        auto y = encode(msg, rows);
        y[0] += 0.4 * noise.normal();
        const auto bp = bp_decode(y, rows, 0.16, params);
        const auto exact = brute_force_llr(y, rows, 0.16, 2);
        for (int i = 0; i < 2; ++i)
        {
            CHECK(bp.llr[static_cast<std::size_t>(i)] == doctest::Approx(exact[static_cast<std::size_t>(i)]).epsilon(1e-9));
        }
    }
}

TEST_CASE("k = 2, d = 2, three noiseless symbols: BP matches brute-force MAP")
{
    auto params = small_params(2, 2);
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        auto rng = derive_stream(seed, "rows");
        const auto rows = sample_rows(params, 3, rng);
        for (unsigned m = 0; m < 4; ++m)
        {
            const std::vector<std::uint8_t> msg = {static_cast<std::uint8_t>(m & 1U),
                                                   static_cast<std::uint8_t>((m >> 1) & 1U)};
            const auto y = encode(msg, rows);
            const auto bp = bp_decode(y, rows, 1e-9, params);
            const auto exact = brute_force_llr(y, rows, 1e-9, 2);
            for (std::size_t i = 0; i < 2; ++i)
            {
                CHECK(bp.bits[i] == (exact[i] < 0 ? 1 : 0));
                CHECK(bp.bits[i] == msg[i]);
            }
        }
    }
}

TEST_CASE("decoder is equivariant under joint permutation of symbols and rows")
{
    const auto params = small_params(24, 6);
    auto rng = derive_stream(8, "rows");
    auto noise = derive_stream(8, "noise");
    const auto rows = sample_rows(params, 40, rng);
    const auto msg = random_message(24, 8);
    auto y = encode(msg, rows);
    for (double &v : y)
    {
        v += 0.5 * noise.normal();
    }
    std::vector<std::size_t> perm(rows.size());
    std::iota(perm.begin(), perm.end(), 0U);
    auto shuffle_rng = derive_stream(8, "perm");
    shuffle_rng.shuffle(std::span<std::size_t>(perm));
    std::vector<GeneratorRow> rows_p;
    std::vector<double> y_p;
    for (auto i : perm)
    {
        rows_p.push_back(rows[i]);
        y_p.push_back(y[i]);
    }
    const auto a = bp_decode(y, rows, 0.25, params);
    const auto b = bp_decode(y_p, rows_p, 0.25, params);
    CHECK(a.bits == b.bits);
    CHECK(a.iterations == b.iterations);
    for (std::size_t i = 0; i < a.llr.size(); ++i)
    {
        CHECK(a.llr[i] == doctest::Approx(b.llr[i]).epsilon(1e-9));
    }
}

TEST_CASE("rateless sessions")
{
    auto params = small_params(64, 8);
    params.max_symbols = 512;

    SUBCASE("deterministic")
    {
        const auto a = run_session(params, 100.0, 3);
        const auto b = run_session(params, 100.0, 3);
        CHECK(a.decoded_at == b.decoded_at);
        CHECK(a.symbols_sent == b.symbols_sent);
    }
    SUBCASE("20 dB decodes quickly")
    {
        const auto s = run_session(params, 100.0, 1);
        REQUIRE(s.success());
        CHECK(s.acked);
        CHECK(*s.decoded_at <= 4 * 64);
        CHECK(s.symbols_sent == *s.decoded_at);
        CHECK(s.realized_rate() == doctest::Approx(64.0 / static_cast<double>(*s.decoded_at)));
        CHECK(s.realized_rate() <= urllc::fbl::capacity(urllc::fbl::AwgnChannel(100.0)) + 0.05);
    }
    SUBCASE("lost acknowledgements keep the transmitter going")
    {
        const auto s = run_session(params, 100.0, 1, 1.0);
        CHECK(s.success());
        CHECK_FALSE(s.acked);
        CHECK(s.symbols_sent == params.max_symbols);
    }
    SUBCASE("hopeless channel hits the cap")
    {
        params.max_symbols = 64;
        const auto s = run_session(params, 0.01, 2);
        CHECK_FALSE(s.success());
        CHECK(s.symbols_sent == 64);
        CHECK(s.realized_rate() == 0.0);
    }
}
