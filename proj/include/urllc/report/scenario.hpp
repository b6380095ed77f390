#pragma once

#include "urllc/access/multiaccess.hpp"
#include "urllc/afc/afc.hpp"
#include "urllc/budget/latency_budget.hpp"
#include "urllc/chanest/chanest.hpp"
#include "urllc/slicing/slicing.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace urllc::report
{
    inline constexpr int schema_version = 1;

    enum class Subcommand
    {
        Budget,
        Ppv,
        Afc,
        Ma,
        Slice,
        Chanest
    };
    std::string_view to_string(Subcommand c) noexcept;
    std::optional<Subcommand> parse_subcommand(std::string_view text) noexcept;

    class ScenarioError : public std::invalid_argument
    {
    public:
        enum class Kind
        {
            Parse,
            UnknownKey,
            Type,
            Range
        };

        ScenarioError(Kind kind, std::string key, const std::string &message);

        Kind kind() const noexcept { return m_kind; }
        /// Dotted path of the offending key ("slice.policies[1]"); empty for parse errors.
        const std::string &key() const noexcept { return m_key; }

    private:
        Kind m_kind;
        std::string m_key;
    };
    std::string_view to_string(ScenarioError::Kind k) noexcept;

    struct BudgetConfig
    {
        budget::UplinkParams uplink;
        budget::DownlinkParams downlink;
        std::int64_t harq_retx = 1;
        budget::Millis core_network_ms{0};
    };

    struct PpvConfig
    {
        double snr_db = 0.0;
        double eps = 1e-4;
        std::int64_t n_lo = 100;
        std::int64_t n_hi = 2000;
        std::int64_t n_step = 100;
        bool log_term = true;
    };

    struct AfcConfig
    {
        afc::AfcParams params;
        /// Empty means default_weights(degree).
        std::vector<double> weights;
        std::vector<double> snr_db_list{0.0, 5.0, 10.0, 15.0, 20.0};
        int seeds = 20;
        double feedback_loss = 0.0;
        /// Error target for the ppv_max_rate overlay at n = decoded_at.
        double overlay_eps = 1e-4;

        /// params with the configured (or default) weights filled in.
        afc::AfcParams effective_params() const;
    };

    struct MaConfig
    {
        /// Template; `devices` is replaced by each sweep entry.
        access::MaScenario scenario;
        std::vector<int> devices{10, 50, 100, 200, 500, 1000};
        /// "oma", "noma" or "both".
        std::string scheme = "both";
        int seeds = 20;
    };

    struct SliceConfig
    {
        slicing::SliceScenario scenario;
        /// Policy strings as accepted by parse_policy; they label the output rows.
        std::vector<std::string> policies{"legacy", "0.15", "0.80"};
        int seeds = 10;
    };

    struct ChanestConfig
    {
        budget::Bandwidth bandwidth = budget::Bandwidth::MHz5;
        chanest::ChannelModel model;
        double snr_db = 20.0;
        /// Doppler assumed by the MMSE filter; unset means matched.
        std::optional<double> mmse_doppler_hz;
        std::vector<chanest::Method> methods{chanest::Method::Nearest, chanest::Method::Bilinear,
                                             chanest::Method::Biharmonic, chanest::Method::Mmse};
        int seeds = 50;
        int repetitions = 5;
    };

    struct Scenario
    {
        int schema = schema_version;
        Subcommand subcommand = Subcommand::Budget;
        std::uint64_t seed = 0;
        std::string out = "out";
        BudgetConfig budget;
        PpvConfig ppv;
        AfcConfig afc;
        MaConfig ma;
        SliceConfig slice;
        ChanestConfig chanest;
    };

    /// Throws ScenarioError (kind Range) naming the key and the violated invariant.
    void validate(const Scenario &s);

    // Strict JSON: unknown keys and wrong types are errors, missing keys take
    // their defaults, and blank input is the all-defaults scenario. The result
    // is validated.
    Scenario parse_scenario(std::string_view text);
    Scenario load_scenario(const std::filesystem::path &path);

    /// Fully-defaulted JSON with a fixed key order; parse_scenario inverts it.
    std::string serialize(const Scenario &s, int indent = 2);
    /// SHA-256 of the compact serialization with the output path blanked.
    std::string scenario_hash(const Scenario &s);
}
