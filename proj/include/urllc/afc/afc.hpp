#pragma once

#include "urllc/des/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace urllc::afc
{
    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Largest supported degree; the check update enumerates 2^degree configurations.
    inline constexpr int max_degree = 12;

    // Bits map to -1/2 (bit 0) and +1/2 (bit 1) before weighting, so a coded
    // symbol of IID equiprobable bits has power (1/4) * sum(w^2).

    /// Descending weights 2^{-l/2}, l = 0..d-1, scaled to unit symbol power.
    std::vector<double> default_weights(int degree);

    struct AfcParams
    {
        int k = 192;
        int degree = 8;
        std::vector<double> weights = default_weights(8);
        std::int64_t max_symbols = 2048;
        int bp_iters = 50;
        /// Symbols sent between decode attempts; 0 means ceil(k / 8).
        int batch_size = 0;
        double llr_clamp = 40.0;
        double convergence_tol = 1e-3;
        // Receiver skips decode attempts while m * capacity(snr) < k; such
        // attempts cannot succeed at any reasonable error rate.
        bool skip_below_capacity = true;

        int effective_batch() const noexcept { return batch_size > 0 ? batch_size : (k + 7) / 8; }
    };

    /// Throws ConfigError on inconsistent parameters (including degree > k).
    void validate(const AfcParams &params);
    /// Mean power of a coded symbol under equiprobable bits.
    double symbol_power(std::span<const double> weights);

    struct GeneratorRow
    {
        /// Distinct bit positions in [0, k); weights[l] multiplies bit_indices[l].
        std::vector<std::uint32_t> bit_indices;
        std::vector<double> weights;
    };

    // Each row draws `degree` distinct indices uniformly (partial Fisher-Yates) and
    // pairs them, in draw order, with a uniformly shuffled copy of the weight set.
    std::vector<GeneratorRow> sample_rows(const AfcParams &params, std::size_t count, des::RngStream &rng);

    /// symbol_j = sum_l w_l * (b_l - 1/2)
    std::vector<double> encode(std::span<const std::uint8_t> message, std::span<const GeneratorRow> rows);

    struct DecodeResult
    {
        std::vector<std::uint8_t> bits;
        /// Posterior LLRs, log P(b=0)/P(b=1), saturated at +/- llr_clamp.
        std::vector<double> llr;
        bool converged = false;
        int iterations = 0;
    };

    // Flooding belief propagation. The observation-node update marginalizes
    // exactly over all configurations of the row's bits; bit nodes sum LLRs.
    DecodeResult bp_decode(std::span<const double> received, std::span<const GeneratorRow> rows, double noise_var,
                           const AfcParams &params);

    struct AfcSession
    {
        int k = 0;
        double snr = 0.0;
        std::uint64_t seed = 0;
        /// Symbol count at which the receiver first decoded the message correctly.
        std::optional<std::int64_t> decoded_at;
        /// Symbols put on the air before an acknowledgement arrived (or the cap).
        std::int64_t symbols_sent = 0;
        bool acked = false;
        int decode_attempts = 0;
        int batch_size = 0;

        bool success() const noexcept { return decoded_at.has_value(); }
        /// k / symbols_sent on success, else 0.
        double realized_rate() const noexcept;
    };

    // Rateless transmit-until-ack over AWGN with unit symbol power. Success is
    // judged against the true message (a genie acknowledgement in place of a CRC).
    // A positive acknowledgement is lost with probability feedback_loss_prob, in
    // which case the transmitter sends another full batch.
    AfcSession run_session(const AfcParams &params, double snr, std::uint64_t seed, double feedback_loss_prob = 0.0);
}
