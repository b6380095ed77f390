#include "urllc/chanest/chanest.hpp"

#include "urllc/des/rng.hpp"
#include "urllc/util/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace urllc::chanest
{
    namespace
    {
        constexpr double two_pi = 2.0 * std::numbers::pi;

        double tps_kernel(double r2)
        {
            // r^2 log r written on r^2 to skip the square root
            return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
        }
    }

    GridSpec GridSpec::for_bandwidth(budget::Bandwidth b)
    {
        GridSpec g;
        g.n_subcarriers = 12 * budget::resource_blocks(b);
        return g;
    }

    double GridSpec::coordinate_scale() const noexcept
    {
        return static_cast<double>(std::max(n_symbols - 1, n_subcarriers - 1));
    }

    void validate(const GridSpec &g)
    {
        if (g.n_symbols < 1 || g.n_subcarriers < 1 || !(g.symbol_s > 0.0) || !(g.subcarrier_hz > 0.0))
        {
            throw ConfigError("grid needs positive dimensions and spacings");
        }
    }

    PilotLattice PilotLattice::lte(const GridSpec &g, std::uint64_t seed)
    {
        validate(g);
        PilotLattice l;
        auto rng = des::derive_stream(seed, "chanest.pilots");
        const double a = 1.0 / std::numbers::sqrt2;
        for (const auto &[symbol, offset] : {std::pair{0, 0}, {4, 3}, {7, 0}, {11, 3}})
        {
            if (symbol >= g.n_symbols)
            {
                continue;
            }
            for (int f = offset; f < g.n_subcarriers; f += 6)
            {
                const auto q = rng.uniform_int(0, 3);
                l.pilots.push_back({symbol, f, cplx((q & 1U) ? -a : a, (q & 2U) ? -a : a)});
            }
        }
        return l;
    }

    void validate(const PilotLattice &l, const GridSpec &g)
    {
        if (l.pilots.size() < 4)
        {
            throw ConfigError(fmt::format("need at least 4 pilots (got {})", l.pilots.size()));
        }
        for (const auto &p : l.pilots)
        {
            if (p.symbol < 0 || p.symbol >= g.n_symbols || p.subcarrier < 0 || p.subcarrier >= g.n_subcarriers)
            {
                throw ConfigError(fmt::format("pilot ({}, {}) outside the grid", p.symbol, p.subcarrier));
            }
            if (std::abs(std::abs(p.value) - 1.0) > 1e-12)
            {
                throw ConfigError(fmt::format("pilot ({}, {}) is not unit-modulus", p.symbol, p.subcarrier));
            }
        }
    }

    std::vector<double> ChannelModel::delays() const
    {
        std::vector<double> d(static_cast<std::size_t>(taps));
        for (int l = 0; l < taps; ++l)
        {
            d[static_cast<std::size_t>(l)] = l * tap_spacing_s;
        }
        return d;
    }

    std::vector<double> ChannelModel::powers() const
    {
        const auto d = delays();
        std::vector<double> p(d.size());
        double sum = 0.0;
        for (std::size_t l = 0; l < d.size(); ++l)
        {
            p[l] = decay_s > 0.0 ? std::exp(-d[l] / decay_s) : (l == 0 ? 1.0 : 0.0);
            sum += p[l];
        }
        for (double &x : p)
        {
            x /= sum;
        }
        return p;
    }

    void validate(const ChannelModel &m)
    {
        if (m.taps < 1 || m.sinusoids < 1 || !(m.tap_spacing_s >= 0.0) || !(m.decay_s >= 0.0) ||
            !(m.doppler_hz >= 0.0) || !(m.noise_var >= 0.0))
        {
            throw ConfigError("channel model: taps, sinusoids >= 1; spacings, decay, doppler, noise >= 0");
        }
    }

    Synthesis synth_channel(const GridSpec &g, const PilotLattice &l, const ChannelModel &m, std::uint64_t seed)
    {
        validate(g);
        validate(l, g);
        validate(m);
        const auto tau = m.delays();
        const auto p = m.powers();
        auto fading = des::derive_stream(seed, "chanest.fading");
        auto noise = des::derive_stream(seed, "chanest.noise");

        Synthesis out;
        out.truth.spec = g;
        out.truth.h = Eigen::MatrixXcd::Zero(g.n_symbols, g.n_subcarriers);
        const auto M = static_cast<std::size_t>(m.sinusoids);
        std::vector<double> theta(M);
        std::vector<double> phi(M);
        std::vector<double> psi(M);
        for (std::size_t tap = 0; tap < tau.size(); ++tap)
        {
            for (auto *v : {&theta, &phi, &psi})
            {
                for (double &x : *v)
                {
                    x = fading.uniform(0.0, two_pi);
                }
            }
            const double amp = std::sqrt(p[tap]);
            for (int t = 0; t < g.n_symbols; ++t)
            {
                const double time = t * g.symbol_s;
                cplx h{0.0, 0.0};
                for (std::size_t k = 0; k < M; ++k)
                {
                    const double w = two_pi * m.doppler_hz * std::cos(theta[k]) * time;
                    h += cplx(std::cos(w + phi[k]), std::sin(w + psi[k]));
                }
                h *= amp / std::sqrt(static_cast<double>(M));
                for (int f = 0; f < g.n_subcarriers; ++f)
                {
                    out.truth.h(t, f) += h * std::polar(1.0, -two_pi * f * g.subcarrier_hz * tau[tap]);
                }
            }
        }

        const double sd = std::sqrt(m.noise_var / 2.0);
        out.observations.reserve(l.pilots.size());
        for (const auto &pilot : l.pilots)
        {
            const double re = noise.normal();
            const double im = noise.normal();
            out.observations.push_back(out.truth.h(pilot.symbol, pilot.subcarrier) * pilot.value + sd * cplx(re, im));
        }
        return out;
    }

    std::vector<cplx> ls_at_pilots(const std::vector<cplx> &observations, const PilotLattice &l)
    {
        if (observations.size() != l.pilots.size())
        {
            throw ConfigError(
                fmt::format("{} observations for {} pilots", observations.size(), l.pilots.size()));
        }
        std::vector<cplx> est(observations.size());
        for (std::size_t i = 0; i < est.size(); ++i)
        {
            if (l.pilots[i].value == cplx(0.0, 0.0))
            {
                throw ConfigError(fmt::format("pilot {} has value zero", i));
            }
            est[i] = observations[i] / l.pilots[i].value;
        }
        return est;
    }

    std::string_view to_string(Method m) noexcept
    {
        switch (m)
        {
        case Method::Nearest:
            return "nearest";
        case Method::Bilinear:
            return "bilinear";
        case Method::Biharmonic:
            return "biharmonic";
        case Method::Mmse:
            return "mmse";
        }
        return "?";
    }

    Method parse_method(std::string_view text)
    {
        for (Method m : {Method::Nearest, Method::Bilinear, Method::Biharmonic, Method::Mmse})
        {
            if (to_string(m) == text)
            {
                return m;
            }
        }
        throw ConfigError(fmt::format("unknown method '{}' (nearest, bilinear, biharmonic, mmse)", text));
    }

    namespace
    {
        TfGrid empty_grid(const GridSpec &g)
        {
            return TfGrid{g, Eigen::MatrixXcd::Zero(g.n_symbols, g.n_subcarriers)};
        }

        TfGrid nearest(const std::vector<cplx> &v, const PilotLattice &l, const GridSpec &g)
        {
            auto out = empty_grid(g);
            for (int t = 0; t < g.n_symbols; ++t)
            {
                for (int f = 0; f < g.n_subcarriers; ++f)
                {
                    std::size_t best = 0;
                    long best_d = std::numeric_limits<long>::max();
                    for (std::size_t j = 0; j < l.pilots.size(); ++j)
                    {
                        const long dt = t - l.pilots[j].symbol;
                        const long df = f - l.pilots[j].subcarrier;
                        const long d = dt * dt + df * df;
                        if (d < best_d)
                        {
                            best_d = d;
                            best = j;
                        }
                    }
                    out.h(t, f) = v[best];
                }
            }
            return out;
        }

        // Linear through (x0, y0), (x1, y1), evaluated at x; extrapolates outside.
        cplx line(double x0, cplx y0, double x1, cplx y1, double x)
        {
            return y0 + (y1 - y0) * ((x - x0) / (x1 - x0));
        }

        // Index of the bracketing segment start for x among sorted knots (size >= 2).
        std::size_t segment(const std::vector<int> &knots, int x)
        {
            const auto it = std::upper_bound(knots.begin(), knots.end(), x);
            const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - knots.begin() - 1, 0));
            return std::min(i, knots.size() - 2);
        }

        TfGrid bilinear(const std::vector<cplx> &v, const PilotLattice &l, const GridSpec &g)
        {
            std::map<int, std::vector<std::pair<int, cplx>>> rows;
            for (std::size_t j = 0; j < l.pilots.size(); ++j)
            {
                rows[l.pilots[j].symbol].emplace_back(l.pilots[j].subcarrier, v[j]);
            }
            std::vector<int> symbols;
            std::vector<Eigen::VectorXcd> filled;
            for (auto &[s, pts] : rows)
            {
                std::sort(pts.begin(), pts.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
                for (std::size_t i = 1; i < pts.size(); ++i)
                {
                    if (pts[i].first == pts[i - 1].first)
                    {
                        throw DegeneracyError(fmt::format("coincident pilots at ({}, {})", s, pts[i].first));
                    }
                }
                std::vector<int> knots;
                for (const auto &pt : pts)
                {
                    knots.push_back(pt.first);
                }
                Eigen::VectorXcd row(g.n_subcarriers);
                for (int f = 0; f < g.n_subcarriers; ++f)
                {
                    if (pts.size() == 1)
                    {
                        row(f) = pts[0].second;
                        continue;
                    }
                    const auto i = segment(knots, f);
                    row(f) = line(pts[i].first, pts[i].second, pts[i + 1].first, pts[i + 1].second, f);
                }
                symbols.push_back(s);
                filled.push_back(std::move(row));
            }
            auto out = empty_grid(g);
            for (int t = 0; t < g.n_symbols; ++t)
            {
                if (symbols.size() == 1)
                {
                    out.h.row(t) = filled[0].transpose();
                    continue;
                }
                const auto i = segment(symbols, t);
                const double w = static_cast<double>(t - symbols[i]) / (symbols[i + 1] - symbols[i]);
                out.h.row(t) = ((1.0 - w) * filled[i] + w * filled[i + 1]).transpose();
            }
            return out;
        }

        TfGrid biharmonic(const std::vector<cplx> &v, const PilotLattice &l, const GridSpec &g)
        {
            const auto n = static_cast<Eigen::Index>(l.pilots.size());
            const double scale = g.coordinate_scale();
            Eigen::VectorXd xt(n);
            Eigen::VectorXd xf(n);
            std::set<std::pair<int, int>> seen;
            for (Eigen::Index j = 0; j < n; ++j)
            {
                const auto &p = l.pilots[static_cast<std::size_t>(j)];
                if (!seen.emplace(p.symbol, p.subcarrier).second)
                {
                    throw DegeneracyError(fmt::format("coincident pilots at ({}, {})", p.symbol, p.subcarrier));
                }
                xt(j) = p.symbol / scale;
                xf(j) = p.subcarrier / scale;
            }
            Eigen::MatrixXd trend(n, 3);
            trend.col(0).setOnes();
            trend.col(1) = xt;
            trend.col(2) = xf;
            if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(trend).rank() < 3)
            {
                throw DegeneracyError("biharmonic interpolation needs 3 non-collinear pilots");
            }

            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 3, n + 3);
            for (Eigen::Index i = 0; i < n; ++i)
            {
                for (Eigen::Index j = 0; j < i; ++j)
                {
                    const double dt = xt(i) - xt(j);
                    const double df = xf(i) - xf(j);
                    a(i, j) = a(j, i) = tps_kernel(dt * dt + df * df);
                }
            }
            a.block(0, n, n, 3) = trend;
            a.block(n, 0, 3, n) = trend.transpose();
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
            for (Eigen::Index j = 0; j < n; ++j)
            {
                rhs(j, 0) = v[static_cast<std::size_t>(j)].real();
                rhs(j, 1) = v[static_cast<std::size_t>(j)].imag();
            }
            const Eigen::MatrixXd c = a.partialPivLu().solve(rhs);
            if (!c.allFinite())
            {
                throw DegeneracyError("biharmonic system is numerically singular");
            }

            auto out = empty_grid(g);
            for (int t = 0; t < g.n_symbols; ++t)
            {
                const double gt = t / scale;
                for (int f = 0; f < g.n_subcarriers; ++f)
                {
                    const double gf = f / scale;
                    double re = c(n, 0) + c(n + 1, 0) * gt + c(n + 2, 0) * gf;
                    double im = c(n, 1) + c(n + 1, 1) * gt + c(n + 2, 1) * gf;
                    for (Eigen::Index j = 0; j < n; ++j)
                    {
                        const double dt = gt - xt(j);
                        const double df = gf - xf(j);
                        const double k = tps_kernel(dt * dt + df * df);
                        re += c(j, 0) * k;
                        im += c(j, 1) * k;
                    }
                    out.h(t, f) = cplx(re, im);
                }
            }
            return out;
        }
    }

    TfGrid interpolate(const std::vector<cplx> &estimates, const PilotLattice &l, const GridSpec &g, Method method)
    {
        validate(g);
        validate(l, g);
        if (estimates.size() != l.pilots.size())
        {
            throw ConfigError(fmt::format("{} estimates for {} pilots", estimates.size(), l.pilots.size()));
        }
        switch (method)
        {
        case Method::Nearest:
            return nearest(estimates, l, g);
        case Method::Bilinear:
            return bilinear(estimates, l, g);
        case Method::Biharmonic:
            return biharmonic(estimates, l, g);
        case Method::Mmse:
            break;
        }
        throw ConfigError("interpolate: use mmse_estimate for the MMSE baseline");
    }

    TfGrid mmse_estimate(const std::vector<cplx> &estimates, const PilotLattice &l, const GridSpec &g,
                         const ChannelModel &stats)
    {
        validate(g);
        validate(l, g);
        validate(stats);
        if (estimates.size() != l.pilots.size())
        {
            throw ConfigError(fmt::format("{} estimates for {} pilots", estimates.size(), l.pilots.size()));
        }
        const auto tau = stats.delays();
        const auto pw = stats.powers();
        // Correlations depend only on index differences; tabulate them once.
        const int nt = g.n_symbols;
        const int nf = g.n_subcarriers;
        std::vector<double> r_time(static_cast<std::size_t>(2 * nt - 1));
        for (int d = -(nt - 1); d < nt; ++d)
        {
            r_time[static_cast<std::size_t>(d + nt - 1)] = std::cyl_bessel_j(0.0, std::abs(two_pi * stats.doppler_hz * d * g.symbol_s));
        }
        std::vector<cplx> r_freq(static_cast<std::size_t>(2 * nf - 1));
        for (int d = -(nf - 1); d < nf; ++d)
        {
            cplx acc{0.0, 0.0};
            for (std::size_t k = 0; k < tau.size(); ++k)
            {
                acc += pw[k] * std::polar(1.0, -two_pi * d * g.subcarrier_hz * tau[k]);
            }
            r_freq[static_cast<std::size_t>(d + nf - 1)] = acc;
        }
        const auto corr = [&](int t1, int f1, int t2, int f2) {
            return r_time[static_cast<std::size_t>(t1 - t2 + nt - 1)] * r_freq[static_cast<std::size_t>(f1 - f2 + nf - 1)];
        };

        const auto n = static_cast<Eigen::Index>(l.pilots.size());
        Eigen::MatrixXcd rpp(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const auto &a = l.pilots[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < n; ++j)
            {
                const auto &b = l.pilots[static_cast<std::size_t>(j)];
                rpp(i, j) = corr(a.symbol, a.subcarrier, b.symbol, b.subcarrier);
            }
            rpp(i, i) += stats.noise_var;
        }
        const Eigen::LLT<Eigen::MatrixXcd> llt(rpp);
        if (llt.info() != Eigen::Success)
        {
            throw ConditioningError(fmt::format("R_pp + sigma^2 I ({}x{}, noise_var {}, min diagonal {}) is not positive definite",
                                                n, n, stats.noise_var, rpp.diagonal().real().minCoeff()));
        }
        Eigen::VectorXcd h(n);
        for (Eigen::Index j = 0; j < n; ++j)
        {
            h(j) = estimates[static_cast<std::size_t>(j)];
        }
        const Eigen::VectorXcd x = llt.solve(h);

        auto out = empty_grid(g);
        for (int t = 0; t < nt; ++t)
        {
            for (int f = 0; f < nf; ++f)
            {
                cplx acc{0.0, 0.0};
                for (Eigen::Index j = 0; j < n; ++j)
                {
                    const auto &p = l.pilots[static_cast<std::size_t>(j)];
                    acc += corr(t, f, p.symbol, p.subcarrier) * x(j);
                }
                out.h(t, f) = acc;
            }
        }
        return out;
    }

    TfGrid estimate(const Synthesis &syn, const PilotLattice &l, const ChannelModel &stats, Method method)
    {
        const auto ls = ls_at_pilots(syn.observations, l);
        if (method == Method::Mmse)
        {
            return mmse_estimate(ls, l, syn.truth.spec, stats);
        }
        return interpolate(ls, l, syn.truth.spec, method);
    }

    double nmse(const TfGrid &est, const TfGrid &truth)
    {
        if (est.h.rows() != truth.h.rows() || est.h.cols() != truth.h.cols())
        {
            throw ConfigError("nmse: grid shapes differ");
        }
        const double energy = truth.h.squaredNorm();
        if (!(energy > 0.0))
        {
            throw ConfigError("nmse: truth has zero energy");
        }
        return (est.h - truth.h).squaredNorm() / energy;
    }

    std::vector<BenchRow> bench(const std::vector<Method> &methods, const BenchConfig &cfg)
    {
        if (cfg.seeds < 1 || cfg.repetitions < 1)
        {
            throw ConfigError("bench needs seeds >= 1 and repetitions >= 1");
        }
        const auto g = GridSpec::for_bandwidth(cfg.bandwidth);
        const auto lattice = PilotLattice::lte(g);
        const ChannelModel stats = cfg.mmse_stats.value_or(cfg.model);
        const auto n_seeds = static_cast<std::size_t>(cfg.seeds);

        std::vector<Synthesis> syn(n_seeds);
        // err[m][s], energy[s]
        std::vector<std::vector<double>> err(methods.size(), std::vector<double>(n_seeds));
        std::vector<double> energy(n_seeds);
        util::parallel_for(n_seeds, cfg.max_threads, [&](std::size_t s) {
            syn[s] = synth_channel(g, lattice, cfg.model, cfg.base_seed + s);
            energy[s] = syn[s].truth.h.squaredNorm();
            for (std::size_t m = 0; m < methods.size(); ++m)
            {
                err[m][s] = (estimate(syn[s], lattice, stats, methods[m]).h - syn[s].truth.h).squaredNorm();
            }
        });

        std::vector<BenchRow> rows;
        for (std::size_t m = 0; m < methods.size(); ++m)
        {
            BenchRow row;
            row.method = methods[m];
            double e = 0.0;
            double tot = 0.0;
            for (std::size_t s = 0; s < n_seeds; ++s)
            {
                row.per_seed_nmse.push_back(err[m][s] / energy[s]);
                e += err[m][s];
                tot += energy[s];
            }
            row.nmse = e / tot;

            std::vector<double> times;
            for (int r = 0; r < cfg.repetitions; ++r)
            {
                const auto &input = syn[static_cast<std::size_t>(r) % n_seeds];
                const auto t0 = std::chrono::steady_clock::now();
                const auto est = estimate(input, lattice, stats, methods[m]);
                const auto t1 = std::chrono::steady_clock::now();
                if (!est.h.allFinite())
                {
                    throw DegeneracyError("estimate produced non-finite values");
                }
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
            std::sort(times.begin(), times.end());
            row.time_ms_median = times[(times.size() - 1) / 2];
            rows.push_back(std::move(row));
        }
        return rows;
    }
}
