#pragma once

#include "urllc/des/engine.hpp"
#include "urllc/des/rng.hpp"

#include <boost/rational.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace urllc::budget
{
    /// Exact millisecond quantity.
    using Millis = boost::rational<std::int64_t>;

    /// Parses a non-negative decimal such as "0.125" or "17" exactly.
    Millis parse_millis(std::string_view text);
    /// Exact decimal rendering when the denominator is 2^a*5^b, else 6 fractional digits.
    std::string format_millis(Millis value);
    double to_double(Millis value);
    des::SimTime to_sim_time(Millis value);

    // LTE Release 8 delay sources. The last row has no fixed value.
    namespace lte_rel8
    {
        inline const Millis grant_acquisition{5};
        inline const Millis random_access{19, 2};
        inline const Millis tti{1};
        inline const Millis signal_processing{3};
        inline const Millis harq_retransmission{8};

        struct DelaySourceRow
        {
            std::string_view name;
            std::optional<Millis> value;
        };
        const std::array<DelaySourceRow, 6> &delay_sources();
    }

    enum class Procedure
    {
        UplinkGrantBased,
        Downlink,
        RandomAccess,
    };
    std::string_view to_string(Procedure p);

    struct DelayComponent
    {
        std::string name;
        Millis duration;
    };

    struct DelayBudget
    {
        Procedure procedure = Procedure::UplinkGrantBased;
        std::vector<DelayComponent> components;
        std::int64_t harq_retx = 0;
        Millis harq_rtt{8};
        Millis core_network_extra{0};

        Millis component_sum() const;
        /// components + harq_retx * harq_rtt + core_network_extra
        Millis total() const;
    };

    struct UplinkParams
    {
        Millis sr_wait{5};
        Millis tti{1};
        Millis proc{3};
    };

    struct DownlinkParams
    {
        Millis proc_in{3};
        Millis tti_align{1, 2};
        Millis tti{1};
        Millis ue_proc{3};
    };

    /// Seven-step grant-based uplink: SR wait, SR, BS decode, grant, UE decode, data, BS decode.
    DelayBudget uplink_budget(const UplinkParams &params = {});
    DelayBudget downlink_budget(const DownlinkParams &params = {});
    DelayBudget random_access_budget();
    /// Random access followed by the grant-based uplink, for a user that has lost alignment.
    DelayBudget unaligned_uplink_budget(const UplinkParams &params = {});

    DelayBudget with_harq(DelayBudget budget, std::int64_t retx);
    DelayBudget with_core_network(DelayBudget budget, Millis extra);

    // Waiting time for the next SR-valid PUCCH occasion, uniform on [0, 2*sr_period).
    // The mean equals sr_period (5 ms by default, the tabulated average).
    des::SimTime sample_sr_wait(des::RngStream &rng, Millis sr_period = Millis{5});

    // -- Receiver processing-time profiles -------------------------------------------------

    enum class Bandwidth
    {
        MHz1_4,
        MHz5,
        MHz10,
    };
    std::string_view to_string(Bandwidth b);
    /// Accepts "1.4", "5", "10" (optionally suffixed with "MHz").
    Bandwidth parse_bandwidth(std::string_view text);
    int resource_blocks(Bandwidth b);

    /// The nine receive modules, in table order.
    const std::array<std::string_view, 9> &receive_modules();

    struct ProcessingProfile
    {
        Bandwidth bandwidth = Bandwidth::MHz5;
        /// Module name -> seconds per subframe.
        std::map<std::string, double, std::less<>> module_times;
    };

    /// Measured LTE Rel-8 receiver times (Intel Core i5, 4x2 MIMO, 16-QAM).
    ProcessingProfile lte_receiver_profile(Bandwidth b);

    class MissingModuleError : public std::runtime_error
    {
    public:
        explicit MissingModuleError(std::string module);
        const std::string &module() const noexcept { return m_module; }

    private:
        std::string m_module;
    };

    struct ProcessingBreakdown
    {
        double total_s = 0.0;
        std::vector<std::pair<std::string, double>> shares;
    };

    /// Throws MissingModuleError naming the first absent module, std::invalid_argument on non-positive times.
    ProcessingBreakdown processing_total(const ProcessingProfile &profile);
}
