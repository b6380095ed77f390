#include "doctest.h"

#include "urllc/chanest/chanest.hpp"

#include <cmath>

using namespace urllc::chanest;
using urllc::budget::Bandwidth;

namespace
{
    const std::vector<Method> all_methods{Method::Nearest, Method::Bilinear, Method::Biharmonic, Method::Mmse};

    ChannelModel noiseless()
    {
        ChannelModel m;
        m.noise_var = 0.0;
        return m;
    }
}

TEST_CASE("grid and lattice shape")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz5);
    CHECK(g.n_subcarriers == 300);
    CHECK(g.n_symbols == 14);
    CHECK(g.coordinate_scale() == doctest::Approx(299.0));

    const auto l = PilotLattice::lte(g, 0);
    // 4 symbols x 50 subcarriers
    CHECK(l.pilots.size() == 200);
    for (const auto &p : l.pilots)
    {
        const int offset = (p.symbol == 4 || p.symbol == 11) ? 3 : 0;
        CHECK((p.subcarrier - offset) % 6 == 0);
        CHECK(std::abs(std::abs(p.value) - 1.0) < 1e-12);
    }
    CHECK_NOTHROW(validate(l, g));

    PilotLattice few{{l.pilots.begin(), l.pilots.begin() + 3}};
    CHECK_THROWS_AS(validate(few, g), ConfigError);
    auto bad = l;
    bad.pilots[0].value = {2.0, 0.0};
    CHECK_THROWS_AS(validate(bad, g), ConfigError);
    bad = l;
    bad.pilots[0].subcarrier = 300;
    CHECK_THROWS_AS(validate(bad, g), ConfigError);
}

TEST_CASE("tap profile normalized and decaying")
{
    const ChannelModel m;
    const auto p = m.powers();
    REQUIRE(p.size() == 6);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        sum += p[i];
        if (i > 0)
        {
            CHECK(p[i] < p[i - 1]);
        }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ChannelModel::noise_var_for_snr_db(20.0) == doctest::Approx(0.01));
}

TEST_CASE("synthesis golden values")
{
    // Frozen from an independent reimplementation of the generator.
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz5);
    const auto l = PilotLattice::lte(g, 0);
    const auto syn = synth_channel(g, l, ChannelModel{}, 0);

    const cplx sum = syn.truth.h.sum();
    CHECK(sum.real() == doctest::Approx(632.4226053016765).epsilon(1e-9));
    CHECK(sum.imag() == doctest::Approx(-496.19330979850866).epsilon(1e-9));
    CHECK(syn.truth.h.squaredNorm() == doctest::Approx(2130.6352830120177).epsilon(1e-9));

    const double a = 1.0 / std::sqrt(2.0);
    // draws 3, 1, 2
    CHECK(std::abs(l.pilots[0].value - cplx{-a, -a}) < 1e-12);
    CHECK(std::abs(l.pilots[1].value - cplx{-a, a}) < 1e-12);
    CHECK(std::abs(l.pilots[2].value - cplx{a, -a}) < 1e-12);

    CHECK(syn.observations[0].real() == doctest::Approx(0.008706256207796949).epsilon(1e-9));
    CHECK(syn.observations[0].imag() == doctest::Approx(0.12560156802282338).epsilon(1e-9));
}

TEST_CASE("ls inverts pilots")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 4);
    const auto syn = synth_channel(g, l, noiseless(), 9);
    const auto ls = ls_at_pilots(syn.observations, l);
    for (std::size_t i = 0; i < l.pilots.size(); ++i)
    {
        const auto &p = l.pilots[i];
        CHECK(std::abs(ls[i] - syn.truth.h(p.symbol, p.subcarrier)) < 1e-12);
    }

    auto ones = l;
    for (auto &p : ones.pilots)
    {
        p.value = 1.0;
    }
    const std::vector<cplx> y(ones.pilots.size(), cplx{0.3, -0.2});
    for (const auto &v : ls_at_pilots(y, ones))
    {
        CHECK(v == cplx{0.3, -0.2});
    }
}

TEST_CASE("ls error variance matches noise")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz10);
    ChannelModel m;
    m.noise_var = 0.05;
    double err = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const auto l = PilotLattice::lte(g, seed);
        const auto syn = synth_channel(g, l, m, seed);
        const auto ls = ls_at_pilots(syn.observations, l);
        for (std::size_t i = 0; i < ls.size(); ++i)
        {
            err += std::norm(ls[i] - syn.truth.h(l.pilots[i].symbol, l.pilots[i].subcarrier));
            ++n;
        }
    }
    CHECK(err / static_cast<double>(n) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("interpolators reproduce pilots")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 1);
    const auto syn = synth_channel(g, l, ChannelModel{}, 2);
    const auto ls = ls_at_pilots(syn.observations, l);
    for (auto method : {Method::Nearest, Method::Bilinear, Method::Biharmonic})
    {
        CAPTURE(to_string(method));
        const auto est = interpolate(ls, l, g, method);
        CHECK(est.h.rows() == g.n_symbols);
        CHECK(est.h.cols() == g.n_subcarriers);
        for (std::size_t i = 0; i < ls.size(); ++i)
        {
            CHECK(std::abs(est.h(l.pilots[i].symbol, l.pilots[i].subcarrier) - ls[i]) < 1e-9);
        }
    }
}

TEST_CASE("biharmonic and bilinear reproduce affine fields")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 0);
    const cplx c0{0.4, -0.1}, ct{0.02, 0.05}, cf{-0.003, 0.001};
    auto field = [&](int t, int f) { return c0 + ct * static_cast<double>(t) + cf * static_cast<double>(f); };
    std::vector<cplx> values;
    for (const auto &p : l.pilots)
    {
        values.push_back(field(p.symbol, p.subcarrier));
    }
    for (auto method : {Method::Biharmonic, Method::Bilinear})
    {
        CAPTURE(to_string(method));
        const auto est = interpolate(values, l, g, method);
        double worst = 0.0;
        for (int t = 0; t < g.n_symbols; ++t)
        {
            for (int f = 0; f < g.n_subcarriers; ++f)
            {
                worst = std::max(worst, std::abs(est.h(t, f) - field(t, f)));
            }
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("interpolation is linear")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 3);
    const auto syn = synth_channel(g, l, ChannelModel{}, 3);
    const auto ls = ls_at_pilots(syn.observations, l);
    const cplx s{-0.7, 1.3};
    std::vector<cplx> scaled = ls;
    for (auto &v : scaled)
    {
        v *= s;
    }
    for (auto method : all_methods)
    {
        CAPTURE(to_string(method));
        const auto a = method == Method::Mmse ? mmse_estimate(ls, l, g, ChannelModel{}) : interpolate(ls, l, g, method);
        const auto b =
            method == Method::Mmse ? mmse_estimate(scaled, l, g, ChannelModel{}) : interpolate(scaled, l, g, method);
        CHECK((b.h - s * a.h).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("flat static channel is recovered exactly without noise")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 5);
    ChannelModel m = noiseless();
    m.taps = 1;
    m.doppler_hz = 0.0;
    const auto syn = synth_channel(g, l, m, 7);
    const cplx h0 = syn.truth.h(0, 0);
    CHECK((syn.truth.h.array() - h0).abs().maxCoeff() < 1e-12);
    for (auto method : {Method::Nearest, Method::Bilinear, Method::Biharmonic})
    {
        CAPTURE(to_string(method));
        CHECK(nmse(estimate(syn, l, m, method), syn.truth) < 1e-18);
    }
}

TEST_CASE("degenerate pilot sets")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    PilotLattice collinear;
    for (int f = 0; f < 24; f += 6)
    {
        collinear.pilots.push_back({0, f, 1.0});
    }
    const std::vector<cplx> v(4, 1.0);
    CHECK_THROWS_AS(interpolate(v, collinear, g, Method::Biharmonic), DegeneracyError);

    PilotLattice coincident;
    coincident.pilots = {{0, 0, 1.0}, {0, 0, 1.0}, {4, 3, 1.0}, {7, 12, 1.0}};
    CHECK_THROWS_AS(interpolate(v, coincident, g, Method::Biharmonic), DegeneracyError);

    const auto l = PilotLattice::lte(g, 0);
    CHECK_THROWS_AS(interpolate(std::vector<cplx>(3), l, g, Method::Nearest), ConfigError);
}

TEST_CASE("nmse basics")
{
    const auto g = GridSpec::for_bandwidth(Bandwidth::MHz1_4);
    const auto l = PilotLattice::lte(g, 0);
    const auto syn = synth_channel(g, l, ChannelModel{}, 0);
    CHECK(nmse(syn.truth, syn.truth) == 0.0);
    TfGrid zero{g, Eigen::MatrixXcd::Zero(g.n_symbols, g.n_subcarriers)};
    CHECK(nmse(zero, syn.truth) == doctest::Approx(1.0));
}

TEST_CASE("method ordering over 50 seeds")
{
    BenchConfig cfg;
    cfg.bandwidth = Bandwidth::MHz5;
    cfg.repetitions = 1;
    const auto rows = bench(all_methods, cfg);
    REQUIRE(rows.size() == 4);
    for (const auto &r : rows)
    {
        CHECK(r.per_seed_nmse.size() == 50);
        CHECK(r.time_ms_median > 0.0);
    }
    CHECK(rows[2].nmse <= rows[1].nmse);
    CHECK(rows[1].nmse <= rows[0].nmse);
    CHECK(rows[3].nmse <= rows[2].nmse + 1e-6);
}

TEST_CASE("bench is thread invariant")
{
    BenchConfig cfg;
    cfg.bandwidth = Bandwidth::MHz1_4;
    cfg.seeds = 6;
    cfg.repetitions = 1;
    cfg.max_threads = 1;
    const auto a = bench({Method::Bilinear, Method::Mmse}, cfg);
    cfg.max_threads = 4;
    const auto b = bench({Method::Bilinear, Method::Mmse}, cfg);
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        CHECK(a[i].per_seed_nmse == b[i].per_seed_nmse);
    }
}

TEST_CASE("method names")
{
    for (auto m : all_methods)
    {
        CHECK(parse_method(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("spline"), ConfigError);
}
