#pragma once

#include "urllc/budget/latency_budget.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace urllc::chanest
{
    using cplx = std::complex<double>;

    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// The interpolation system is singular (coincident or collinear pilots).
    class DegeneracyError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// R_pp + sigma^2 I failed a Cholesky factorization.
    class ConditioningError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct GridSpec
    {
        int n_symbols = 14;
        int n_subcarriers = 300;
        double symbol_s = 1e-3 / 14.0;
        double subcarrier_hz = 15e3;

        static GridSpec for_bandwidth(budget::Bandwidth b);
        /// Common scale for both axes: max(n_symbols - 1, n_subcarriers - 1).
        double coordinate_scale() const noexcept;
    };

    void validate(const GridSpec &g);

    struct TfGrid
    {
        GridSpec spec;
        /// Rows are OFDM symbols, columns subcarriers.
        Eigen::MatrixXcd h;
    };

    struct Pilot
    {
        int symbol = 0;
        int subcarrier = 0;
        cplx value{1.0, 0.0};
    };

    struct PilotLattice
    {
        std::vector<Pilot> pilots;

        // Symbols {0, 4, 7, 11}; every 6th subcarrier, offset 0 on symbols 0 and 7
        // and 3 on symbols 4 and 11. Values are QPSK points drawn from `seed`.
        static PilotLattice lte(const GridSpec &g, std::uint64_t seed = 0);
    };

    /// Throws ConfigError on fewer than 4 pilots, positions outside the grid, or non-unit pilots.
    void validate(const PilotLattice &l, const GridSpec &g);

    struct ChannelModel
    {
        int taps = 6;
        double tap_spacing_s = 1e-6;
        /// Tap powers fall as exp(-delay / decay_s), normalized to sum 1.
        double decay_s = 1e-6;
        double doppler_hz = 50.0;
        int sinusoids = 16;
        double noise_var = 0.01;

        std::vector<double> delays() const;
        std::vector<double> powers() const;
        static double noise_var_for_snr_db(double snr_db) noexcept { return std::pow(10.0, -snr_db / 10.0); }
    };

    void validate(const ChannelModel &m);

    struct Synthesis
    {
        TfGrid truth;
        /// y_p = H[p] x_p + n_p, in lattice order.
        std::vector<cplx> observations;
    };

    Synthesis synth_channel(const GridSpec &g, const PilotLattice &l, const ChannelModel &m, std::uint64_t seed);

    std::vector<cplx> ls_at_pilots(const std::vector<cplx> &observations, const PilotLattice &l);

    enum class Method
    {
        Nearest,
        Bilinear,
        Biharmonic,
        Mmse
    };
    std::string_view to_string(Method m) noexcept;
    Method parse_method(std::string_view text);

    // Nearest and biharmonic measure distance in index units on both axes
    // (symbols and subcarriers share one scale). Bilinear interpolates along
    // frequency within each pilot symbol, then along time, extrapolating
    // linearly past the outermost pilots.
    TfGrid interpolate(const std::vector<cplx> &estimates, const PilotLattice &l, const GridSpec &g, Method method);

    // Wiener filter over the whole subframe with separable correlation:
    // J0(2 pi f_d dt) in time times the PDP transform in frequency.
    TfGrid mmse_estimate(const std::vector<cplx> &estimates, const PilotLattice &l, const GridSpec &g,
                         const ChannelModel &stats);

    /// LS at pilots followed by the given method.
    TfGrid estimate(const Synthesis &syn, const PilotLattice &l, const ChannelModel &stats, Method method);

    /// Sum |est - truth|^2 over sum |truth|^2.
    double nmse(const TfGrid &estimate, const TfGrid &truth);

    struct BenchRow
    {
        Method method = Method::Nearest;
        /// Pooled NMSE over seeds (ratio of summed errors to summed energy).
        double nmse = 0.0;
        std::vector<double> per_seed_nmse;
        /// Median wall time of one LS + estimate call.
        double time_ms_median = 0.0;
    };

    struct BenchConfig
    {
        budget::Bandwidth bandwidth = budget::Bandwidth::MHz5;
        ChannelModel model;
        /// Model handed to the MMSE filter; defaults to the true one.
        std::optional<ChannelModel> mmse_stats;
        int seeds = 50;
        std::uint64_t base_seed = 0;
        /// Timed calls per method (sequential, one thread).
        int repetitions = 5;
        unsigned max_threads = 0;
    };

    std::vector<BenchRow> bench(const std::vector<Method> &methods, const BenchConfig &cfg);
}
