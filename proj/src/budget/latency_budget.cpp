#include "urllc/budget/latency_budget.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <numeric>

namespace urllc::budget
{
    namespace
    {
        void require_non_negative(Millis v, std::string_view what)
        {
            if (v < 0)
            {
                throw std::invalid_argument(fmt::format("{} must be >= 0 (got {})", what, format_millis(v)));
            }
        }

        std::string trim(std::string_view s)
        {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            {
                s.remove_prefix(1);
            }
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            {
                s.remove_suffix(1);
            }
            return std::string(s);
        }
    }

    Millis parse_millis(std::string_view text)
    {
        const std::string s = trim(text);
        if (s.empty())
        {
            throw std::invalid_argument("parse_millis: empty value");
        }
        std::int64_t whole = 0;
        std::int64_t frac = 0;
        std::int64_t scale = 1;
        bool seen_dot = false;
        bool seen_digit = false;
        for (char c : s)
        {
            if (c == '.' && !seen_dot)
            {
                seen_dot = true;
                continue;
            }
            if (!std::isdigit(static_cast<unsigned char>(c)))
            {
                throw std::invalid_argument(fmt::format("parse_millis: '{}' is not a non-negative decimal", s));
            }
            seen_digit = true;
            if (seen_dot)
            {
                if (scale > 100'000'000'000LL)
                {
                    throw std::invalid_argument(fmt::format("parse_millis: '{}' has too many decimals", s));
                }
                frac = frac * 10 + (c - '0');
                scale *= 10;
            }
            else
            {
                whole = whole * 10 + (c - '0');
            }
        }
        if (!seen_digit)
        {
            throw std::invalid_argument(fmt::format("parse_millis: '{}' has no digits", s));
        }
        return Millis(whole) + Millis(frac, scale);
    }

    std::string format_millis(Millis value)
    {
        std::int64_t den = value.denominator();
        int twos = 0;
        int fives = 0;
        while (den % 2 == 0)
        {
            den /= 2;
            ++twos;
        }
        while (den % 5 == 0)
        {
            den /= 5;
            ++fives;
        }
        if (den != 1)
        {
            return fmt::format("{:.6f}", to_double(value));
        }
        const int digits = std::max(twos, fives);
        if (digits == 0)
        {
            return std::to_string(value.numerator());
        }
        std::int64_t pow10 = 1;
        for (int i = 0; i < digits; ++i)
        {
            pow10 *= 10;
        }
        const std::int64_t scaled = value.numerator() * (pow10 / value.denominator());
        const bool negative = scaled < 0;
        const std::int64_t mag = negative ? -scaled : scaled;
        std::string frac = std::to_string(mag % pow10);
        frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
        while (!frac.empty() && frac.back() == '0')
        {
            frac.pop_back();
        }
        return fmt::format("{}{}.{}", negative ? "-" : "", mag / pow10, frac);
    }

    double to_double(Millis value)
    {
        return static_cast<double>(value.numerator()) / static_cast<double>(value.denominator());
    }

    des::SimTime to_sim_time(Millis value)
    {
        return des::SimTime::from_ms(to_double(value));
    }

    namespace lte_rel8
    {
        const std::array<DelaySourceRow, 6> &delay_sources()
        {
            // The grant row is on PUCCH (sometimes misprinted as "PRCCH").
            static const std::array<DelaySourceRow, 6> rows = {{
                {"Grant acquisition", grant_acquisition},
                {"Random Access", random_access},
                {"Transmit time interval", tti},
                {"Signal processing", signal_processing},
                {"Packet retransmission in access network", harq_retransmission},
                {"Core network/Internet", std::nullopt},
            }};
            return rows;
        }
    }

    std::string_view to_string(Procedure p)
    {
        switch (p)
        {
        case Procedure::UplinkGrantBased:
            return "uplink";
        case Procedure::Downlink:
            return "downlink";
        case Procedure::RandomAccess:
            return "random_access";
        }
        return "unknown";
    }

    Millis DelayBudget::component_sum() const
    {
        Millis sum{0};
        for (const auto &c : components)
        {
            sum += c.duration;
        }
        return sum;
    }

    Millis DelayBudget::total() const
    {
        return component_sum() + Millis(harq_retx) * harq_rtt + core_network_extra;
    }

    DelayBudget uplink_budget(const UplinkParams &p)
    {
        require_non_negative(p.sr_wait, "sr_wait");
        require_non_negative(p.tti, "tti");
        require_non_negative(p.proc, "proc");
        DelayBudget b;
        b.procedure = Procedure::UplinkGrantBased;
        b.components = {
            {"UE waits for SR-valid PUCCH", p.sr_wait},
            {"UE sends scheduling request", p.tti},
            {"BS decodes SR and generates grant", p.proc},
            {"BS sends scheduling grant", p.tti},
            {"UE decodes scheduling grant", p.proc},
            {"UE sends uplink data", p.tti},
            {"BS decodes data", p.proc},
        };
        return b;
    }

    DelayBudget downlink_budget(const DownlinkParams &p)
    {
        require_non_negative(p.proc_in, "proc_in");
        require_non_negative(p.tti_align, "tti_align");
        require_non_negative(p.tti, "tti");
        require_non_negative(p.ue_proc, "ue_proc");
        DelayBudget b;
        b.procedure = Procedure::Downlink;
        b.components = {
            {"incoming data processing", p.proc_in},
            {"TTI alignment", p.tti_align},
            {"transmission of downlink data", p.tti},
            {"data decoding in UE", p.ue_proc},
        };
        return b;
    }

    DelayBudget random_access_budget()
    {
        DelayBudget b;
        b.procedure = Procedure::RandomAccess;
        b.components = {{"random access procedure", lte_rel8::random_access}};
        return b;
    }

    DelayBudget unaligned_uplink_budget(const UplinkParams &params)
    {
        DelayBudget b = uplink_budget(params);
        b.components.insert(b.components.begin(), random_access_budget().components.front());
        return b;
    }

    DelayBudget with_harq(DelayBudget budget, std::int64_t retx)
    {
        if (retx < 0)
        {
            throw std::invalid_argument("with_harq: retx must be >= 0");
        }
        budget.harq_retx += retx;
        return budget;
    }

    DelayBudget with_core_network(DelayBudget budget, Millis extra)
    {
        require_non_negative(extra, "core_network_extra");
        budget.core_network_extra = extra;
        return budget;
    }

    des::SimTime sample_sr_wait(des::RngStream &rng, Millis sr_period)
    {
        const double upper_us = 2.0 * to_double(sr_period) * 1000.0;
        return des::SimTime::from_us(static_cast<std::int64_t>(std::floor(rng.uniform01() * upper_us)));
    }

    std::string_view to_string(Bandwidth b)
    {
        switch (b)
        {
        case Bandwidth::MHz1_4:
            return "1.4MHz";
        case Bandwidth::MHz5:
            return "5MHz";
        case Bandwidth::MHz10:
            return "10MHz";
        }
        return "unknown";
    }

    Bandwidth parse_bandwidth(std::string_view text)
    {
        std::string s = trim(text);
        if (s.size() > 3 && (s.ends_with("MHz") || s.ends_with("mhz")))
        {
            s.resize(s.size() - 3);
        }
        if (s == "1.4")
        {
            return Bandwidth::MHz1_4;
        }
        if (s == "5")
        {
            return Bandwidth::MHz5;
        }
        if (s == "10")
        {
            return Bandwidth::MHz10;
        }
        throw std::invalid_argument(fmt::format("unsupported bandwidth '{}' (expected 1.4, 5 or 10)", text));
    }

    int resource_blocks(Bandwidth b)
    {
        switch (b)
        {
        case Bandwidth::MHz1_4:
            return 6;
        case Bandwidth::MHz5:
            return 25;
        case Bandwidth::MHz10:
            return 50;
        }
        return 0;
    }

    const std::array<std::string_view, 9> &receive_modules()
    {
        static const std::array<std::string_view, 9> names = {
            "CFO Compensation",
            "FFT",
            "Disassemble Reference Signal",
            "Channel Estimation (MMSE)",
            "Disassemble Symbols",
            "MIMO Detection (MMSE-SIC)",
            "SINR Calculation",
            "Layer Demapping",
            "Turbo Decoding",
        };
        return names;
    }

    ProcessingProfile lte_receiver_profile(Bandwidth b)
    {
        // Columns: 1.4 MHz, 5 MHz, 10 MHz. Seconds per subframe.
        static const double table[9][3] = {
            {0.0010, 0.0023, 0.0037},
            {2.9004e-04, 6.2917e-04, 8.3004e-04},
            {1.2523e-04, 2.2708e-04, 3.1685e-04},
            {0.0015, 0.0141, 0.0878},
            {0.0013, 0.0045, 0.0087},
            {0.0028, 0.0242, 0.0760},
            {2.4947e-04, 6.6754e-04, 0.0012},
            {4.3253e-05, 1.0988e-04, 3.8987e-04},
            {0.0129, 0.0498, 0.1048},
        };
        const auto col = static_cast<std::size_t>(b);
        ProcessingProfile profile;
        profile.bandwidth = b;
        for (std::size_t row = 0; row < receive_modules().size(); ++row)
        {
            profile.module_times.emplace(std::string(receive_modules()[row]), table[row][col]);
        }
        return profile;
    }

    MissingModuleError::MissingModuleError(std::string module)
        : std::runtime_error("processing profile is missing module '" + module + "'"), m_module(std::move(module))
    {
    }

    ProcessingBreakdown processing_total(const ProcessingProfile &profile)
    {
        ProcessingBreakdown out;
        for (std::string_view name : receive_modules())
        {
            const auto it = profile.module_times.find(name);
            if (it == profile.module_times.end())
            {
                throw MissingModuleError(std::string(name));
            }
            if (!(it->second > 0.0))
            {
                throw std::invalid_argument(fmt::format("module '{}' time must be > 0", name));
            }
            out.total_s += it->second;
        }
        for (std::string_view name : receive_modules())
        {
            out.shares.emplace_back(std::string(name), profile.module_times.find(name)->second / out.total_s);
        }
        return out;
    }
}
