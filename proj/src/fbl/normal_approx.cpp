#include "urllc/fbl/normal_approx.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace urllc::fbl
{
    AwgnChannel::AwgnChannel(double snr_linear)
        : m_snr(snr_linear)
    {
        if (!(snr_linear > 0.0) || !std::isfinite(snr_linear))
        {
            throw DomainError(fmt::format("snr must be positive and finite (got {})", snr_linear));
        }
    }

    AwgnChannel AwgnChannel::from_db(double snr_db)
    {
        return AwgnChannel(std::pow(10.0, snr_db / 10.0));
    }

    double AwgnChannel::snr_db() const noexcept
    {
        return 10.0 * std::log10(m_snr);
    }

    void validate(const CodeSpec &spec)
    {
        if (spec.n < 1 || spec.k < 1)
        {
            throw DomainError(fmt::format("n and k must be >= 1 (got n={}, k={})", spec.n, spec.k));
        }
        if (!(spec.eps > 0.0 && spec.eps < 0.5))
        {
            throw DomainError(fmt::format("eps must lie in (0, 0.5) (got {})", spec.eps));
        }
    }

    double capacity(const AwgnChannel &ch) noexcept
    {
        return std::log2(1.0 + ch.snr());
    }

    double dispersion(const AwgnChannel &ch) noexcept
    {
        const double g = ch.snr();
        const double log2e = std::numbers::log2e;
        // g(g+2)/(2(1+g)^2) = (1 - 1/(1+g)^2) / 2, which stays accurate for tiny g
        const double inv = 1.0 / (1.0 + g);
        const double frac = g < 1e-3 ? g * (g + 2.0) * inv * inv / 2.0 : (1.0 - inv * inv) / 2.0;
        return frac * log2e * log2e;
    }

    double q_function(double x) noexcept
    {
        return 0.5 * std::erfc(x / std::numbers::sqrt2);
    }

    double q_inv(double p)
    {
        if (!(p > 0.0 && p < 1.0))
        {
            throw DomainError(fmt::format("q_inv: p must lie in (0, 1) (got {})", p));
        }
        return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    }

    namespace
    {
        double rate_at(std::int64_t n, double c, double v, double q, LogTerm log_term) noexcept
        {
            const auto nd = static_cast<double>(n);
            double rate = c - std::sqrt(v / nd) * q;
            if (log_term == LogTerm::On)
            {
                rate += std::log2(nd) / (2.0 * nd);
            }
            return rate;
        }
    }

    double ppv_max_rate(std::int64_t n, double eps, const AwgnChannel &ch, LogTerm log_term)
    {
        validate(CodeSpec{n, 1, eps});
        return rate_at(n, capacity(ch), dispersion(ch), q_inv(eps), log_term);
    }

    FblPoint ppv_point(std::int64_t n, double eps, const AwgnChannel &ch, LogTerm log_term)
    {
        return FblPoint{ch.snr(), n, eps, capacity(ch), dispersion(ch), ppv_max_rate(n, eps, ch, log_term)};
    }

    std::int64_t min_blocklength(std::int64_t k, double eps, const AwgnChannel &ch, LogTerm log_term,
                                 std::int64_t max_n)
    {
        validate(CodeSpec{1, k, eps});
        const double c = capacity(ch);
        const double v = dispersion(ch);
        const double q = q_inv(eps);
        const auto target = static_cast<double>(k);
        for (std::int64_t n = 1; n <= max_n; ++n)
        {
            if (static_cast<double>(n) * rate_at(n, c, v, q, log_term) >= target)
            {
                return n;
            }
        }
        throw SearchExhausted(
            fmt::format("min_blocklength: no n <= {} carries k={} bits at eps={}, snr={}", max_n, k, eps, ch.snr()));
    }
}
