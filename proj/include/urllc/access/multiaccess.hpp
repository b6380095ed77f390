#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace urllc::access
{
    class ScenarioError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    enum class Scheme
    {
        Oma,
        Noma
    };

    std::string_view to_string(Scheme s) noexcept;
    Scheme parse_scheme(std::string_view text);

    enum class ArrivalModel
    {
        BatchAtZero,
        Poisson
    };

    struct MaScenario
    {
        int devices = 10;
        int subbands = 10;
        double bandwidth_hz = 1e8;
        double payload_bits = 1.4e6;
        /// Linear received SNR, equal for every device.
        double snr = 100.0;
        double slot_ms = 1.0;
        /// Collided OMA devices wait uniform [1, backoff_window] slots.
        int backoff_window = 2;
        std::int64_t max_slots = 10'000;
        ArrivalModel arrival = ArrivalModel::BatchAtZero;
        /// Devices per ms when arrival is Poisson.
        double arrival_rate_per_ms = 1.0;
        /// Added once to every delivered OMA delay (grant pipeline what-if).
        double oma_grant_overhead_ms = 0.0;

        double subband_hz() const noexcept { return bandwidth_hz / subbands; }
    };

    void validate(const MaScenario &s);

    /// Rate of a lone device on one subband, bits per second.
    double single_user_rate(const MaScenario &s);
    /// Slots an uncontended OMA transmission occupies its subband.
    std::int64_t oma_hold_slots(const MaScenario &s);

    // SIC rates, bits per second, for k equal-power devices sharing a subband.
    // Entry i (0-based) is the (i+1)-th decoded device, which still sees
    // interference from the k-i-1 devices decoded after it.
    std::vector<double> sic_rates(int k, double snr, double subband_hz);

    struct AccessResult
    {
        Scheme scheme = Scheme::Oma;
        // Delay per device in ms, indexed by device id. An undelivered device is
        // censored at the cap: its entry is (max_slots * slot) - arrival.
        std::vector<double> delay_ms;
        std::vector<std::uint8_t> delivered_flag;
        int delivered = 0;
        int undelivered = 0;
        std::int64_t slots_run = 0;

        /// Mean over all devices, censored entries included (a lower bound when undelivered > 0).
        double mean_delay_ms() const noexcept;
    };

    AccessResult simulate_oma(const MaScenario &s, std::uint64_t seed);
    AccessResult simulate_noma(const MaScenario &s, std::uint64_t seed);
    AccessResult simulate(Scheme scheme, const MaScenario &s, std::uint64_t seed);

    struct CurvePoint
    {
        int devices = 0;
        double mean_ms = 0.0;
        /// Half-width of the normal-approximation 95% interval over seed means.
        double ci95_ms = 0.0;
        std::vector<double> seed_means;
        std::int64_t undelivered = 0;
    };

    // One point per device count, averaged over seeds 0..seeds-1 offset by
    // base_seed. Points run in parallel (bounded by max_threads, 0 = hardware);
    // results do not depend on the thread count.
    std::vector<CurvePoint> delay_vs_devices(const MaScenario &templ, const std::vector<int> &device_counts,
                                             int seeds, Scheme scheme, std::uint64_t base_seed = 0,
                                             unsigned max_threads = 0);
}
