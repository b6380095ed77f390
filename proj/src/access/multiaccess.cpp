#include "urllc/access/multiaccess.hpp"

#include "urllc/des/engine.hpp"
#include "urllc/des/rng.hpp"
#include "urllc/util/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace urllc::access
{
    namespace
    {
        enum Tag : std::uint32_t
        {
            Arrival = 1,
            Slot = 2
        };

        // Guards ceil() and >= comparisons against accumulated rounding.
        constexpr double rel_tol = 1e-9;

        struct Common
        {
            const MaScenario &s;
            des::RngStream subband_rng;
            std::vector<double> arrival_ms;
            std::vector<std::int64_t> ready_slot;
            AccessResult result;

            Common(const MaScenario &sc, std::uint64_t seed, Scheme scheme)
                : s(sc)
                , subband_rng(des::derive_stream(seed, "ma.subband"))
            {
                const auto d = static_cast<std::size_t>(s.devices);
                arrival_ms.assign(d, 0.0);
                if (s.arrival == ArrivalModel::Poisson)
                {
                    auto rng = des::derive_stream(seed, "ma.arrival");
                    double t = 0.0;
                    for (auto &a : arrival_ms)
                    {
                        t += rng.exponential(1.0 / s.arrival_rate_per_ms);
                        a = t;
                    }
                }
                ready_slot.resize(d);
                for (std::size_t i = 0; i < d; ++i)
                {
                    ready_slot[i] = static_cast<std::int64_t>(std::ceil(arrival_ms[i] / s.slot_ms - rel_tol));
                }
                result.scheme = scheme;
                result.delay_ms.assign(d, 0.0);
                result.delivered_flag.assign(d, 0);
            }

            int pick_subband() { return static_cast<int>(subband_rng.uniform_int(0, static_cast<std::uint64_t>(s.subbands - 1))); }

            void deliver(std::size_t dev, std::int64_t end_slot, double extra_ms = 0.0)
            {
                result.delay_ms[dev] = static_cast<double>(end_slot) * s.slot_ms - arrival_ms[dev] + extra_ms;
                result.delivered_flag[dev] = 1;
                ++result.delivered;
            }

            void finish(std::int64_t slots_run)
            {
                const double cap_ms = static_cast<double>(s.max_slots) * s.slot_ms;
                for (std::size_t i = 0; i < result.delay_ms.size(); ++i)
                {
                    if (!result.delivered_flag[i])
                    {
                        result.delay_ms[i] = std::max(0.0, cap_ms - arrival_ms[i]);
                        ++result.undelivered;
                    }
                }
                result.slots_run = slots_run;
            }

            // Arrival events precede the slot tick at the same instant because they are scheduled first.
            void schedule_arrivals(des::Engine &engine) const
            {
                for (std::size_t i = 0; i < arrival_ms.size(); ++i)
                {
                    engine.schedule(slot_time(ready_slot[i]), Arrival, i);
                }
            }

            des::SimTime slot_time(std::int64_t slot) const
            {
                return des::SimTime::from_ms(static_cast<double>(slot) * s.slot_ms);
            }
        };
    }

    std::string_view to_string(Scheme s) noexcept
    {
        return s == Scheme::Oma ? "oma" : "noma";
    }

    Scheme parse_scheme(std::string_view text)
    {
        if (text == "oma")
        {
            return Scheme::Oma;
        }
        if (text == "noma")
        {
            return Scheme::Noma;
        }
        throw ScenarioError(fmt::format("unknown scheme '{}' (expected oma or noma)", text));
    }

    void validate(const MaScenario &s)
    {
        if (s.devices < 1 || s.subbands < 1)
        {
            throw ScenarioError(fmt::format("devices and subbands must be >= 1 (got {}, {})", s.devices, s.subbands));
        }
        if (!(s.bandwidth_hz > 0.0) || !(s.payload_bits > 0.0) || !(s.snr > 0.0) || !(s.slot_ms > 0.0))
        {
            throw ScenarioError("bandwidth, payload, snr and slot must be positive");
        }
        if (s.backoff_window < 1 || s.max_slots < 1)
        {
            throw ScenarioError("backoff_window and max_slots must be >= 1");
        }
        if (s.arrival == ArrivalModel::Poisson && !(s.arrival_rate_per_ms > 0.0))
        {
            throw ScenarioError("Poisson arrivals need a positive rate");
        }
        if (!(s.oma_grant_overhead_ms >= 0.0))
        {
            throw ScenarioError("oma_grant_overhead_ms must be >= 0");
        }
    }

    double single_user_rate(const MaScenario &s)
    {
        return s.subband_hz() * std::log2(1.0 + s.snr);
    }

    std::int64_t oma_hold_slots(const MaScenario &s)
    {
        const double bits_per_slot = single_user_rate(s) * s.slot_ms * 1e-3;
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(s.payload_bits / bits_per_slot - rel_tol)));
    }

    std::vector<double> sic_rates(int k, double snr, double subband_hz)
    {
        std::vector<double> r(static_cast<std::size_t>(std::max(k, 0)));
        for (int i = 1; i <= k; ++i)
        {
            const double sinr = snr / (1.0 + (k - i) * snr);
            r[static_cast<std::size_t>(i - 1)] = subband_hz * std::log1p(sinr) / std::log(2.0);
        }
        return r;
    }

    double AccessResult::mean_delay_ms() const noexcept
    {
        if (delay_ms.empty())
        {
            return 0.0;
        }
        return std::accumulate(delay_ms.begin(), delay_ms.end(), 0.0) / static_cast<double>(delay_ms.size());
    }

    AccessResult simulate_oma(const MaScenario &s, std::uint64_t seed)
    {
        validate(s);
        Common c(s, seed, Scheme::Oma);
        auto backoff_rng = des::derive_stream(seed, "ma.backoff");
        const std::int64_t hold = oma_hold_slots(s);
        const auto d = static_cast<std::size_t>(s.devices);

        // slot -> devices attempting in that slot; sorted by id before use
        std::map<std::int64_t, std::vector<std::size_t>> attempts;
        std::vector<std::int64_t> busy_until(static_cast<std::size_t>(s.subbands), 0);
        std::vector<int> contenders(static_cast<std::size_t>(s.subbands));
        std::vector<int> choice(d);
        std::int64_t last_slot = 0;
        // Earliest scheduled tick, or -1. A tick superseded by an earlier one is ignored when it fires.
        std::int64_t next_tick = -1;

        des::Engine engine;
        auto ensure_tick = [&](des::Engine &e, std::int64_t slot) {
            if ((next_tick < 0 || slot < next_tick) && slot < s.max_slots)
            {
                e.schedule(c.slot_time(slot), Slot, static_cast<std::uint64_t>(slot));
                next_tick = slot;
            }
        };
        c.schedule_arrivals(engine);

        engine.run_until(c.slot_time(s.max_slots), [&](des::Engine &e, const des::Event &ev) {
            if (ev.tag == Arrival)
            {
                const auto slot = c.ready_slot[ev.payload];
                attempts[slot].push_back(ev.payload);
                ensure_tick(e, slot);
                return;
            }
            const auto slot = static_cast<std::int64_t>(ev.payload);
            if (slot != next_tick)
            {
                return;
            }
            next_tick = -1;
            last_slot = slot + 1;
            auto node = attempts.extract(slot);
            if (!node.empty())
            {
                auto &devs = node.mapped();
                std::sort(devs.begin(), devs.end());
                std::fill(contenders.begin(), contenders.end(), 0);
                for (auto dev : devs)
                {
                    choice[dev] = c.pick_subband();
                    ++contenders[static_cast<std::size_t>(choice[dev])];
                }
                for (auto dev : devs)
                {
                    const auto b = static_cast<std::size_t>(choice[dev]);
                    if (contenders[b] == 1 && busy_until[b] <= slot)
                    {
                        busy_until[b] = slot + hold;
                        if (slot + hold <= s.max_slots)
                        {
                            c.deliver(dev, slot + hold, s.oma_grant_overhead_ms);
                        }
                        continue;
                    }
                    const auto wait = static_cast<std::int64_t>(
                        backoff_rng.uniform_int(1, static_cast<std::uint64_t>(s.backoff_window)));
                    attempts[slot + wait].push_back(dev);
                }
            }
            if (!attempts.empty())
            {
                ensure_tick(e, attempts.begin()->first);
            }
        });
        c.finish(last_slot);
        return c.result;
    }

    AccessResult simulate_noma(const MaScenario &s, std::uint64_t seed)
    {
        validate(s);
        Common c(s, seed, Scheme::Noma);
        const auto d = static_cast<std::size_t>(s.devices);
        const double slot_s = s.slot_ms * 1e-3;
        const double target = s.payload_bits * (1.0 - rel_tol);

        // rate_table[k][i]: bits per slot for the (i+1)-th decoded of k devices
        std::vector<std::vector<double>> rate_table(1);
        auto rates_for = [&](std::size_t k) -> const std::vector<double> & {
            while (rate_table.size() <= k)
            {
                auto r = sic_rates(static_cast<int>(rate_table.size()), s.snr, s.subband_hz());
                for (double &x : r)
                {
                    x *= slot_s;
                }
                rate_table.push_back(std::move(r));
            }
            return rate_table[k];
        };

        std::vector<std::size_t> backlog;
        std::vector<double> bits(d, 0.0);
        std::vector<std::vector<std::size_t>> on_subband(static_cast<std::size_t>(s.subbands));
        std::int64_t last_slot = 0;
        bool tick_pending = false;

        des::Engine engine;
        c.schedule_arrivals(engine);
        engine.run_until(c.slot_time(s.max_slots), [&](des::Engine &e, const des::Event &ev) {
            if (ev.tag == Arrival)
            {
                backlog.insert(std::upper_bound(backlog.begin(), backlog.end(), ev.payload), ev.payload);
                const auto slot = c.ready_slot[ev.payload];
                if (!tick_pending && slot < s.max_slots)
                {
                    e.schedule(c.slot_time(slot), Slot, static_cast<std::uint64_t>(slot));
                    tick_pending = true;
                }
                return;
            }
            tick_pending = false;
            const auto slot = static_cast<std::int64_t>(ev.payload);
            last_slot = slot + 1;
            for (auto &v : on_subband)
            {
                v.clear();
            }
            for (auto dev : backlog)
            {
                on_subband[static_cast<std::size_t>(c.pick_subband())].push_back(dev);
            }
            // SIC order within a subband is by device id; backlog is sorted, so each list is too.
            for (const auto &devs : on_subband)
            {
                const auto &r = rates_for(devs.size());
                for (std::size_t i = 0; i < devs.size(); ++i)
                {
                    bits[devs[i]] += r[i];
                    if (bits[devs[i]] >= target)
                    {
                        c.deliver(devs[i], slot + 1);
                    }
                }
            }
            std::erase_if(backlog, [&](std::size_t dev) { return c.result.delivered_flag[dev] != 0; });
            if (!backlog.empty() && slot + 1 < s.max_slots)
            {
                e.schedule(c.slot_time(slot + 1), Slot, static_cast<std::uint64_t>(slot + 1));
                tick_pending = true;
            }
        });
        c.finish(last_slot);
        return c.result;
    }

    AccessResult simulate(Scheme scheme, const MaScenario &s, std::uint64_t seed)
    {
        return scheme == Scheme::Oma ? simulate_oma(s, seed) : simulate_noma(s, seed);
    }

    std::vector<CurvePoint> delay_vs_devices(const MaScenario &templ, const std::vector<int> &device_counts,
                                             int seeds, Scheme scheme, std::uint64_t base_seed, unsigned max_threads)
    {
        if (seeds < 1)
        {
            throw ScenarioError("delay_vs_devices: need at least one seed");
        }
        if (!std::is_sorted(device_counts.begin(), device_counts.end()))
        {
            throw ScenarioError("delay_vs_devices: device counts must be ascending");
        }
        const auto n_seeds = static_cast<std::size_t>(seeds);
        const std::size_t jobs = device_counts.size() * n_seeds;
        std::vector<AccessResult> runs(jobs);
        util::parallel_for(jobs, max_threads, [&](std::size_t j) {
            MaScenario s = templ;
            s.devices = device_counts[j / n_seeds];
            runs[j] = simulate(scheme, s, base_seed + j % n_seeds);
        });

        std::vector<CurvePoint> curve;
        for (std::size_t p = 0; p < device_counts.size(); ++p)
        {
            CurvePoint pt;
            pt.devices = device_counts[p];
            for (std::size_t k = 0; k < n_seeds; ++k)
            {
                const auto &r = runs[p * n_seeds + k];
                pt.seed_means.push_back(r.mean_delay_ms());
                pt.undelivered += r.undelivered;
            }
            const double n = static_cast<double>(n_seeds);
            pt.mean_ms = std::accumulate(pt.seed_means.begin(), pt.seed_means.end(), 0.0) / n;
            if (n_seeds > 1)
            {
                double ss = 0.0;
                for (double m : pt.seed_means)
                {
                    ss += (m - pt.mean_ms) * (m - pt.mean_ms);
                }
                pt.ci95_ms = 1.959963984540054 * std::sqrt(ss / (n - 1.0) / n);
            }
            curve.push_back(std::move(pt));
        }
        return curve;
    }
}
