#pragma once

#include <cstdint>
#include <stdexcept>

namespace urllc::fbl
{
    class DomainError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    class SearchExhausted : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Real AWGN channel at a fixed linear SNR.
    class AwgnChannel
    {
    public:
        /// Throws DomainError unless snr > 0 and finite.
        explicit AwgnChannel(double snr_linear);
        static AwgnChannel from_db(double snr_db);

        double snr() const noexcept { return m_snr; }
        double snr_db() const noexcept;

    private:
        double m_snr;
    };

    struct CodeSpec
    {
        std::int64_t n = 1;
        std::int64_t k = 1;
        double eps = 1e-4;
    };
    /// Throws DomainError unless n >= 1, k >= 1 and eps in (0, 0.5).
    void validate(const CodeSpec &spec);

    /// log2(1 + snr), bits per channel use.
    double capacity(const AwgnChannel &ch) noexcept;
    /// snr(snr+2) / (2(1+snr)^2) * (log2 e)^2, bits^2 per channel use.
    double dispersion(const AwgnChannel &ch) noexcept;

    /// Standard normal upper tail Q(x).
    double q_function(double x) noexcept;
    /// Inverse of Q on (0, 1); throws DomainError outside.
    double q_inv(double p);

    enum class LogTerm : bool
    {
        Off = false,
        On = true,
    };

    struct FblPoint
    {
        double snr = 0.0;
        std::int64_t n = 0;
        double eps = 0.0;
        double capacity = 0.0;
        double dispersion = 0.0;
        double max_rate = 0.0;
    };

    // Normal approximation to the maximal coding rate at blocklength n and block
    // error probability eps:
    //   R* = C - sqrt(V/n) Q^{-1}(eps) [+ log2(n) / (2n)]
    double ppv_max_rate(std::int64_t n, double eps, const AwgnChannel &ch, LogTerm log_term = LogTerm::On);
    FblPoint ppv_point(std::int64_t n, double eps, const AwgnChannel &ch, LogTerm log_term = LogTerm::On);

    // Smallest n with n * R*(n) >= k, by linear scan from n = 1. The scan is
    // exhaustive so the result is minimal even where n * R*(n) is not monotone.
    std::int64_t min_blocklength(std::int64_t k, double eps, const AwgnChannel &ch, LogTerm log_term = LogTerm::On,
                                 std::int64_t max_n = std::int64_t{1} << 24);
}
