#include "urllc/afc/afc.hpp"

#include "urllc/fbl/normal_approx.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace urllc::afc
{
    std::vector<double> default_weights(int degree)
    {
        if (degree < 1)
        {
            throw ConfigError("default_weights: degree must be >= 1");
        }
        std::vector<double> w(static_cast<std::size_t>(degree));
        for (int l = 0; l < degree; ++l)
        {
            w[static_cast<std::size_t>(l)] = std::pow(2.0, -0.5 * l);
        }
        const double scale = 1.0 / std::sqrt(symbol_power(w));
        for (double &x : w)
        {
            x *= scale;
        }
        return w;
    }

    double symbol_power(std::span<const double> weights)
    {
        double sum_sq = 0.0;
        for (double w : weights)
        {
            sum_sq += w * w;
        }
        return 0.25 * sum_sq;
    }

    void validate(const AfcParams &p)
    {
        if (p.k < 1)
        {
            throw ConfigError("afc: k must be >= 1");
        }
        if (p.degree < 1 || p.degree > max_degree)
        {
            throw ConfigError(fmt::format("afc: degree must lie in [1, {}] (got {})", max_degree, p.degree));
        }
        if (p.degree > p.k)
        {
            throw ConfigError(fmt::format("afc: degree {} exceeds message length {}", p.degree, p.k));
        }
        if (p.weights.size() != static_cast<std::size_t>(p.degree))
        {
            throw ConfigError(
                fmt::format("afc: expected {} weights, got {}", p.degree, p.weights.size()));
        }
        if (!std::all_of(p.weights.begin(), p.weights.end(), [](double w) { return std::isfinite(w); }) ||
            std::all_of(p.weights.begin(), p.weights.end(), [](double w) { return w == 0.0; }))
        {
            throw ConfigError("afc: weights must be finite and not all zero");
        }
        if (p.max_symbols < 1 || p.bp_iters < 1 || p.batch_size < 0 || !(p.llr_clamp > 0.0) ||
            !(p.convergence_tol > 0.0))
        {
            throw ConfigError("afc: max_symbols, bp_iters, llr_clamp and convergence_tol must be positive");
        }
    }

    std::vector<GeneratorRow> sample_rows(const AfcParams &params, std::size_t count, des::RngStream &rng)
    {
        validate(params);
        const auto k = static_cast<std::uint32_t>(params.k);
        const auto d = static_cast<std::size_t>(params.degree);
        std::vector<std::uint32_t> pool(k);
        std::vector<GeneratorRow> rows;
        rows.reserve(count);
        for (std::size_t r = 0; r < count; ++r)
        {
            std::iota(pool.begin(), pool.end(), 0U);
            GeneratorRow row;
            row.bit_indices.resize(d);
            for (std::size_t l = 0; l < d; ++l)
            {
                const auto j = static_cast<std::size_t>(rng.uniform_int(l, k - 1));
                std::swap(pool[l], pool[j]);
                row.bit_indices[l] = pool[l];
            }
            row.weights = params.weights;
            rng.shuffle(std::span<double>(row.weights));
            rows.push_back(std::move(row));
        }
        return rows;
    }

    std::vector<double> encode(std::span<const std::uint8_t> message, std::span<const GeneratorRow> rows)
    {
        std::vector<double> symbols;
        symbols.reserve(rows.size());
        for (const auto &row : rows)
        {
            double s = 0.0;
            for (std::size_t l = 0; l < row.bit_indices.size(); ++l)
            {
                const std::uint32_t idx = row.bit_indices[l];
                if (idx >= message.size())
                {
                    throw ConfigError(fmt::format("encode: bit index {} outside message of {} bits", idx, message.size()));
                }
                s += row.weights[l] * (message[idx] ? 0.5 : -0.5);
            }
            symbols.push_back(s);
        }
        return symbols;
    }

    namespace
    {
        double clamp_llr(double v, double limit)
        {
            if (std::isnan(v))
            {
                return 0.0;
            }
            return std::clamp(v, -limit, limit);
        }
    }

    namespace
    {
        // Scratch kept between decode attempts of one session; rows only ever
        // get appended.
        struct WarmState
        {
            std::vector<double> likelihood;
            std::vector<double> to_bit;
        };

        DecodeResult bp_run(std::span<const double> received, std::span<const GeneratorRow> rows, double noise_var,
                            const AfcParams &params, WarmState *warm);
    }

    DecodeResult bp_decode(std::span<const double> received, std::span<const GeneratorRow> rows, double noise_var,
                           const AfcParams &params)
    {
        return bp_run(received, rows, noise_var, params, nullptr);
    }

    namespace
    {
    DecodeResult bp_run(std::span<const double> received, std::span<const GeneratorRow> rows, double noise_var,
                        const AfcParams &params, WarmState *warm)
    {
        validate(params);
        if (!(noise_var > 0.0))
        {
            throw ConfigError("bp_decode: noise_var must be positive");
        }
        if (received.size() != rows.size())
        {
            throw ConfigError(
                fmt::format("bp_decode: {} symbols but {} generator rows", received.size(), rows.size()));
        }

        const auto k = static_cast<std::size_t>(params.k);
        const double clamp = params.llr_clamp;
        DecodeResult out;
        out.llr.assign(k, 0.0);
        out.bits.assign(k, 0);
        const std::size_t m = rows.size();
        if (m == 0)
        {
            return out;
        }

        // Edge e = j * d + l joins observation j to bit rows[j].bit_indices[l].
        const auto d = rows.front().bit_indices.size();
        const std::size_t n_cfg = std::size_t{1} << d;
        WarmState local;
        WarmState &st = warm ? *warm : local;
        const std::size_t m_known = st.likelihood.size() / n_cfg;
        if (m_known > m)
        {
            throw ConfigError("bp_decode: warm state does not match the rows");
        }
        st.likelihood.resize(m * n_cfg);
        // Only the likelihood tables carry over: reusing old messages leaves BP
        // parked at saturated wrong fixed points, so each attempt starts cold.
        st.to_bit.assign(m * d, 0.0);
        std::vector<double> &likelihood = st.likelihood;
        std::vector<double> &to_bit = st.to_bit;
        for (std::size_t j = m_known; j < m; ++j)
        {
            const auto &row = rows[j];
            if (row.bit_indices.size() != d)
            {
                throw ConfigError("bp_decode: rows must share one degree");
            }
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n_cfg; ++c)
            {
                double s = 0.0;
                for (std::size_t l = 0; l < d; ++l)
                {
                    s += row.weights[l] * (((c >> l) & 1U) ? 0.5 : -0.5);
                }
                const double diff = received[j] - s;
                const double ll = -diff * diff / (2.0 * noise_var);
                likelihood[j * n_cfg + c] = ll;
                peak = std::max(peak, ll);
            }
            // Normalize so the best configuration has likelihood 1.
            for (std::size_t c = 0; c < n_cfg; ++c)
            {
                likelihood[j * n_cfg + c] = std::exp(likelihood[j * n_cfg + c] - peak);
            }
        }

        std::vector<double> to_check(m * d, 0.0);
        std::vector<double> total(k, 0.0);
        for (std::size_t e = 0; e < m * d; ++e)
        {
            total[rows[e / d].bit_indices[e % d]] += to_bit[e];
        }
        for (std::size_t e = 0; e < m * d; ++e)
        {
            to_check[e] = clamp_llr(total[rows[e / d].bit_indices[e % d]] - to_bit[e], clamp);
        }
        for (auto &t : total)
        {
            t = clamp_llr(t, clamp);
        }
        std::vector<double> previous = total;
        std::vector<double> p0(d);
        std::vector<double> p1(d);
        // A configuration c splits into its low d_lo bits and the rest, so the
        // product of incoming bit probabilities factors as a[lo] * b[hi]. The
        // per-bit sums then cost two passes over the table instead of d.
        const std::size_t d_lo = d / 2;
        const std::size_t n_lo = std::size_t{1} << d_lo;
        const std::size_t n_hi = n_cfg / n_lo;
        std::vector<double> a(n_lo), b(n_hi), s_lo(n_lo), t_hi(n_hi);
        std::vector<double> sum0(d), sum1(d);
        auto half_products = [&](std::vector<double> &dst, std::size_t first, std::size_t count) {
            dst[0] = 1.0;
            for (std::size_t i = 0; i < count; ++i)
            {
                const std::size_t size = std::size_t{1} << i;
                for (std::size_t x = 0; x < size; ++x)
                {
                    dst[x | size] = dst[x] * p1[first + i];
                    dst[x] *= p0[first + i];
                }
            }
        };

        for (int iter = 1; iter <= params.bp_iters; ++iter)
        {
            for (std::size_t j = 0; j < m; ++j)
            {
                for (std::size_t l = 0; l < d; ++l)
                {
                    const double L = to_check[j * d + l];
                    // logistic split, written to avoid overflow for large |L|
                    p0[l] = 1.0 / (1.0 + std::exp(-L));
                    p1[l] = 1.0 / (1.0 + std::exp(L));
                }
                half_products(a, 0, d_lo);
                half_products(b, d_lo, d - d_lo);
                std::fill(s_lo.begin(), s_lo.end(), 0.0);
                const double *lik = &likelihood[j * n_cfg];
                for (std::size_t hi = 0; hi < n_hi; ++hi)
                {
                    const double *rowp = lik + hi * n_lo;
                    double t = 0.0;
                    for (std::size_t lo = 0; lo < n_lo; ++lo)
                    {
                        t += rowp[lo] * a[lo];
                        s_lo[lo] += rowp[lo] * b[hi];
                    }
                    t_hi[hi] = t * b[hi];
                }
                std::fill(sum0.begin(), sum0.end(), 0.0);
                std::fill(sum1.begin(), sum1.end(), 0.0);
                for (std::size_t lo = 0; lo < n_lo; ++lo)
                {
                    const double w = s_lo[lo] * a[lo];
                    for (std::size_t l = 0; l < d_lo; ++l)
                    {
                        ((lo >> l) & 1U ? sum1 : sum0)[l] += w;
                    }
                }
                for (std::size_t hi = 0; hi < n_hi; ++hi)
                {
                    for (std::size_t l = d_lo; l < d; ++l)
                    {
                        ((hi >> (l - d_lo)) & 1U ? sum1 : sum0)[l] += t_hi[hi];
                    }
                }
                for (std::size_t l = 0; l < d; ++l)
                {
                    double s0 = sum0[l];
                    double s1 = sum1[l];
                    // divide out the bit's own incoming message to leave the extrinsic part
                    s0 /= p0[l];
                    s1 /= p1[l];
                    double msg = 0.0;
                    if (s0 > 0.0 && s1 > 0.0)
                    {
                        msg = std::log(s0) - std::log(s1);
                    }
                    else if (s0 > 0.0)
                    {
                        msg = clamp;
                    }
                    else if (s1 > 0.0)
                    {
                        msg = -clamp;
                    }
                    to_bit[j * d + l] = clamp_llr(msg, clamp);
                }
            }

            std::fill(total.begin(), total.end(), 0.0);
            for (std::size_t j = 0; j < m; ++j)
            {
                for (std::size_t l = 0; l < d; ++l)
                {
                    total[rows[j].bit_indices[l]] += to_bit[j * d + l];
                }
            }
            for (std::size_t j = 0; j < m; ++j)
            {
                for (std::size_t l = 0; l < d; ++l)
                {
                    const std::size_t e = j * d + l;
                    to_check[e] = clamp_llr(total[rows[j].bit_indices[l]] - to_bit[e], clamp);
                }
            }

            double max_delta = 0.0;
            for (std::size_t i = 0; i < k; ++i)
            {
                total[i] = clamp_llr(total[i], clamp);
                max_delta = std::max(max_delta, std::abs(total[i] - previous[i]));
            }
            previous = total;
            out.iterations = iter;
            if (iter > 1 && max_delta < params.convergence_tol)
            {
                out.converged = true;
                break;
            }
        }

        out.llr = total;
        for (std::size_t i = 0; i < k; ++i)
        {
            out.bits[i] = total[i] < 0.0 ? 1 : 0;
        }
        return out;
    }
    }

    double AfcSession::realized_rate() const noexcept
    {
        if (!decoded_at || symbols_sent <= 0)
        {
            return 0.0;
        }
        return static_cast<double>(k) / static_cast<double>(symbols_sent);
    }

    AfcSession run_session(const AfcParams &params, double snr, std::uint64_t seed, double feedback_loss_prob)
    {
        validate(params);
        if (!(snr > 0.0) || !std::isfinite(snr))
        {
            throw ConfigError(fmt::format("run_session: snr must be positive (got {})", snr));
        }
        if (!(feedback_loss_prob >= 0.0 && feedback_loss_prob <= 1.0))
        {
            throw ConfigError("run_session: feedback_loss_prob must lie in [0, 1]");
        }

        auto message_rng = des::derive_stream(seed, "afc.message");
        auto row_rng = des::derive_stream(seed, "afc.rows");
        auto noise_rng = des::derive_stream(seed, "afc.noise");
        auto feedback_rng = des::derive_stream(seed, "afc.feedback");

        const auto k = static_cast<std::size_t>(params.k);
        std::vector<std::uint8_t> truth(k);
        for (auto &b : truth)
        {
            b = static_cast<std::uint8_t>(message_rng.uniform_int(0, 1));
        }

        const double noise_var = symbol_power(params.weights) / snr;
        const double noise_sd = std::sqrt(noise_var);
        const double cap = fbl::capacity(fbl::AwgnChannel(snr));

        AfcSession session;
        session.k = params.k;
        session.snr = snr;
        session.seed = seed;
        session.batch_size = params.effective_batch();

        std::vector<GeneratorRow> rows;
        std::vector<double> received;
        WarmState warm;
        while (session.symbols_sent < params.max_symbols)
        {
            const auto batch = static_cast<std::size_t>(
                std::min<std::int64_t>(session.batch_size, params.max_symbols - session.symbols_sent));
            auto fresh = sample_rows(params, batch, row_rng);
            const auto clean = encode(truth, fresh);
            for (std::size_t i = 0; i < batch; ++i)
            {
                received.push_back(clean[i] + noise_sd * noise_rng.normal());
                rows.push_back(std::move(fresh[i]));
            }
            session.symbols_sent += static_cast<std::int64_t>(batch);

            if (!session.decoded_at)
            {
                const bool worth_trying = !params.skip_below_capacity ||
                                          static_cast<double>(session.symbols_sent) * cap >= static_cast<double>(k);
                if (worth_trying)
                {
                    ++session.decode_attempts;
                    const auto result = bp_run(received, rows, noise_var, params, &warm);
                    if (result.bits == truth)
                    {
                        session.decoded_at = session.symbols_sent;
                    }
                }
            }
            if (session.decoded_at)
            {
                if (feedback_loss_prob > 0.0 && feedback_rng.bernoulli(feedback_loss_prob))
                {
                    continue;
                }
                session.acked = true;
                break;
            }
        }
        return session;
    }
}
