#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace urllc::slicing
{
    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Raised when the scheduler breaks one of its own allocation invariants.
    class InvariantViolation : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    enum class ClassId : std::uint8_t
    {
        Its = 0,
        Sg = 1
    };
    inline constexpr std::size_t class_count = 2;
    std::string to_string(ClassId c);

    enum class SizeLaw
    {
        Fixed,
        Exponential
    };

    struct ServiceClass
    {
        std::string name;
        /// PPP intensity times area.
        double device_count_mean = 0.0;
        double packet_bytes = 0.0;
        /// Mean inter-arrival per device; arrivals are exponential.
        double interval_ms = 0.0;
        SizeLaw size_law = SizeLaw::Fixed;

        double offered_load_bps() const noexcept
        {
            return device_count_mean * packet_bytes * 8.0 / (interval_ms * 1e-3);
        }
    };

    ServiceClass its_class();
    ServiceClass sg_class();

    struct LinkModel
    {
        double tx_power_dbm = 23.0;
        double pathloss_a_db = 128.1;
        double pathloss_b_db = 37.6;
        double noise_dbm_per_hz = -174.0;
        double noise_figure_db = 9.0;
        /// Penetration and shadowing margin on top of the distance law.
        double extra_loss_db = 18.0;
        /// Transmit power is spread over this many RBs when computing SNR.
        int reference_rbs = 100;
        double se_max = 6.0;
        /// LTE CQI 1 efficiency; cell-edge devices still get the most robust MCS.
        double se_min = 0.1523;

        double snr_db(double distance_km, double rb_hz) const;
        /// min(log2(1 + SNR), se_max), at least se_min; se_max at zero distance.
        double spectral_efficiency(double distance_km, double rb_hz) const;
    };

    struct CellConfig
    {
        int rbs = 100;
        double rb_hz = 180e3;
    };

    struct SliceScenario
    {
        std::array<ServiceClass, class_count> classes{its_class(), sg_class()};
        LinkModel link;
        CellConfig cell;
        double area_side_km = 1.0;
        double duration_ms = 2000.0;
        double warmup_fraction = 0.1;
        /// SR opportunity wait, uniform on [0, sr_wait_max_ms).
        double sr_wait_max_ms = 10.0;
        /// Queued packets per class per base station beyond which arrivals drop.
        int queue_cap = 1000;
        /// Smallest legacy per-device grant; devices beyond total / this wait a turn.
        int legacy_min_rbs = 3;
        /// Constant added to every latency sample (core network, default none).
        double core_network_ms = 0.0;
    };

    void validate(const SliceScenario &s);

    struct Device
    {
        double x_km = 0.0;
        double y_km = 0.0;
        int bs = 0;
        ClassId cls = ClassId::Its;
        double se = 0.0;
    };

    struct Deployment
    {
        /// Four base stations on a 2x2 grid at the cell centers.
        std::vector<std::array<double, 2>> base_stations;
        std::vector<Device> devices;

        std::size_t count(ClassId c) const noexcept;
    };

    Deployment deploy(const SliceScenario &s, std::uint64_t seed);

    enum class Mode
    {
        Legacy,
        Sliced
    };

    struct SlicePolicy
    {
        Mode mode = Mode::Legacy;
        double quota_its = 0.5;
        bool lending = true;

        static SlicePolicy legacy() { return {}; }
        static SlicePolicy sliced(double quota_its, bool lending = true) { return {Mode::Sliced, quota_its, lending}; }

        /// RBs reserved for ITS; SG gets the rest.
        int its_rbs(int total) const;
        /// "legacy" or the ITS quota, e.g. "0.15" (with "/nolend" when lending is off).
        std::string label() const;
    };

    SlicePolicy parse_policy(const std::string &text);

    struct Packet
    {
        std::uint32_t device = 0;
        double generated_ms = 0.0;
        /// Time the packet becomes schedulable after the grant pipeline.
        double eligible_ms = 0.0;
        std::int64_t rb_units = 0;
    };

    // All packets for one deployment and seed, sorted by generation time. The
    // same traffic feeds every policy, which makes policy comparisons paired.
    std::vector<Packet> generate_traffic(const SliceScenario &s, const Deployment &d, std::uint64_t seed);

    struct ClassStats
    {
        /// Post-warm-up end-to-end latencies in ms, in delivery order.
        std::vector<double> latency_ms;
        std::int64_t generated = 0;
        std::int64_t delivered = 0;
        std::int64_t dropped = 0;
        /// Still in the grant pipeline or queued when the run ended.
        std::int64_t in_flight = 0;
    };

    struct SliceRun
    {
        SlicePolicy policy;
        std::array<ClassStats, class_count> classes;
        int peak_rbs_used = 0;
        std::int64_t subframes = 0;

        const ClassStats &of(ClassId c) const { return classes[static_cast<std::size_t>(c)]; }
    };

    // Per subframe and base station. Legacy: every backlogged device gets an equal
    // share of max(legacy_min_rbs, rbs / n) RBs, round-robin when not all fit;
    // unused parts of a share are padding, so Legacy is not work-conserving.
    // Sliced: each class serves its FIFO from its quota first, then takes the
    // other class's leftovers when lending is on.
    SliceRun run_slicing(const SliceScenario &s, const Deployment &d, const std::vector<Packet> &traffic,
                         const SlicePolicy &policy);
    SliceRun run_slicing(const SliceScenario &s, const SlicePolicy &policy, std::uint64_t seed);

    struct CdfPoint
    {
        double x_ms = 0.0;
        double fraction = 0.0;
    };

    struct LatencyCdf
    {
        /// Distinct sorted latencies with F(x) = fraction of samples <= x.
        std::vector<CdfPoint> points;
        /// Lower median: sorted[(n - 1) / 2]. Empty for an empty class.
        std::optional<double> median;
        std::optional<double> p95;
        std::size_t samples = 0;

        bool empty() const noexcept { return samples == 0; }
        /// Right-continuous step function value at x.
        double at(double x) const noexcept;
    };

    LatencyCdf latency_cdf(std::vector<double> samples);

    struct PolicySummary
    {
        SlicePolicy policy;
        ClassId cls = ClassId::Its;
        LatencyCdf cdf;
        /// Pooled samples, seed by seed in delivery order.
        std::vector<double> samples_ms;
        std::int64_t dropped = 0;
        std::int64_t generated = 0;
    };

    // Seeds 0..seeds-1 offset by base_seed. Each seed draws one deployment and
    // one traffic trace shared by every policy; samples pool across seeds.
    std::vector<PolicySummary> compare_policies(const SliceScenario &s, const std::vector<SlicePolicy> &policies,
                                                int seeds, std::uint64_t base_seed = 0, unsigned max_threads = 0);
}
