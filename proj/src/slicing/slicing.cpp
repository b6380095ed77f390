#include "urllc/slicing/slicing.hpp"

#include "urllc/budget/latency_budget.hpp"
#include "urllc/des/engine.hpp"
#include "urllc/des/rng.hpp"
#include "urllc/util/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace urllc::slicing
{
    namespace
    {
        enum Tag : std::uint32_t
        {
            Eligible = 1,
            Subframe = 2
        };

        double ms_of(const budget::Millis &m)
        {
            return budget::to_double(m);
        }

        // SR transmission, grant generation, grant transmission and grant decoding.
        double pre_grant_ms()
        {
            using namespace budget::lte_rel8;
            return ms_of(tti + signal_processing + tti + signal_processing);
        }

        double bs_decode_ms()
        {
            return ms_of(budget::lte_rel8::signal_processing);
        }

        std::size_t idx(ClassId c)
        {
            return static_cast<std::size_t>(c);
        }
    }

    std::string to_string(ClassId c)
    {
        return c == ClassId::Its ? "ITS" : "SG";
    }

    ServiceClass its_class()
    {
        return {"ITS", 400.0, 100.0, 100.0, SizeLaw::Fixed};
    }

    ServiceClass sg_class()
    {
        return {"SG", 600.0, 300.0, 80.0, SizeLaw::Fixed};
    }

    double LinkModel::snr_db(double distance_km, double rb_hz) const
    {
        const double noise_dbm = noise_dbm_per_hz + 10.0 * std::log10(reference_rbs * rb_hz) + noise_figure_db;
        const double pathloss = pathloss_a_db + pathloss_b_db * std::log10(distance_km);
        return tx_power_dbm - pathloss - extra_loss_db - noise_dbm;
    }

    double LinkModel::spectral_efficiency(double distance_km, double rb_hz) const
    {
        if (!(distance_km > 0.0))
        {
            return se_max;
        }
        const double snr = std::pow(10.0, snr_db(distance_km, rb_hz) / 10.0);
        return std::clamp(std::log2(1.0 + snr), se_min, se_max);
    }

    void validate(const SliceScenario &s)
    {
        for (const auto &c : s.classes)
        {
            if (!(c.device_count_mean >= 0.0) || !(c.packet_bytes > 0.0) || !(c.interval_ms > 0.0))
            {
                throw ConfigError(fmt::format("class {}: intensity must be >= 0, packet size and interval > 0", c.name));
            }
        }
        if (s.cell.rbs < 1 || !(s.cell.rb_hz > 0.0))
        {
            throw ConfigError("cell needs at least one RB of positive bandwidth");
        }
        if (!(s.link.se_min > 0.0) || !(s.link.se_max >= s.link.se_min) || s.link.reference_rbs < 1)
        {
            throw ConfigError("link model needs 0 < se_min <= se_max and reference_rbs >= 1");
        }
        if (!(s.area_side_km > 0.0) || !(s.duration_ms >= 1.0) || !(s.warmup_fraction >= 0.0 && s.warmup_fraction < 1.0))
        {
            throw ConfigError("area, duration and warm-up fraction out of range");
        }
        if (!(s.sr_wait_max_ms >= 0.0) || s.queue_cap < 1 || !(s.core_network_ms >= 0.0) || s.legacy_min_rbs < 1 ||
            s.legacy_min_rbs > s.cell.rbs)
        {
            throw ConfigError("sr_wait_max_ms, queue_cap, legacy_min_rbs or core_network_ms out of range");
        }
    }

    std::size_t Deployment::count(ClassId c) const noexcept
    {
        return static_cast<std::size_t>(
            std::count_if(devices.begin(), devices.end(), [c](const Device &d) { return d.cls == c; }));
    }

    Deployment deploy(const SliceScenario &s, std::uint64_t seed)
    {
        validate(s);
        Deployment d;
        const double side = s.area_side_km;
        d.base_stations = {{side / 4, side / 4}, {3 * side / 4, side / 4}, {side / 4, 3 * side / 4}, {3 * side / 4, 3 * side / 4}};
        auto rng = des::derive_stream(seed, "slice.deploy");
        for (std::size_t c = 0; c < class_count; ++c)
        {
            const auto n = rng.poisson(s.classes[c].device_count_mean);
            for (std::uint64_t i = 0; i < n; ++i)
            {
                Device dev;
                dev.cls = static_cast<ClassId>(c);
                dev.x_km = rng.uniform(0.0, side);
                dev.y_km = rng.uniform(0.0, side);
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t b = 0; b < d.base_stations.size(); ++b)
                {
                    const double dist = std::hypot(dev.x_km - d.base_stations[b][0], dev.y_km - d.base_stations[b][1]);
                    if (dist < best)
                    {
                        best = dist;
                        dev.bs = static_cast<int>(b);
                    }
                }
                dev.se = s.link.spectral_efficiency(best, s.cell.rb_hz);
                d.devices.push_back(dev);
            }
        }
        return d;
    }

    int SlicePolicy::its_rbs(int total) const
    {
        if (!(quota_its >= 0.0 && quota_its <= 1.0))
        {
            throw ConfigError(fmt::format("quota_its must lie in [0, 1] (got {})", quota_its));
        }
        return std::min(total, static_cast<int>(std::floor(quota_its * total + 1e-9)));
    }

    std::string SlicePolicy::label() const
    {
        if (mode == Mode::Legacy)
        {
            return "legacy";
        }
        return fmt::format("{:.2f}{}", quota_its, lending ? "" : "/nolend");
    }

    SlicePolicy parse_policy(const std::string &text)
    {
        if (text == "legacy")
        {
            return SlicePolicy::legacy();
        }
        std::string body = text;
        bool lending = true;
        if (body.ends_with("/nolend"))
        {
            lending = false;
            body.resize(body.size() - 7);
        }
        if (body.starts_with("custom:"))
        {
            body = body.substr(7);
        }
        double q = 0.0;
        std::size_t used = 0;
        try
        {
            q = std::stod(body, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (used == 0 || used != body.size())
        {
            throw ConfigError(fmt::format("bad policy '{}' (expected legacy, 0.15, 0.80 or custom:<f>)", text));
        }
        if (!(q >= 0.0 && q <= 1.0))
        {
            throw ConfigError(
                fmt::format("quota_its {} outside [0, 1]: class quotas must partition the cell's RBs", q));
        }
        return SlicePolicy::sliced(q, lending);
    }

    std::vector<Packet> generate_traffic(const SliceScenario &s, const Deployment &d, std::uint64_t seed)
    {
        validate(s);
        std::vector<Packet> out;
        for (std::size_t i = 0; i < d.devices.size(); ++i)
        {
            const auto &dev = d.devices[i];
            const auto &cls = s.classes[idx(dev.cls)];
            auto rng = des::derive_stream(seed, fmt::format("slice.traffic.{}", i));
            const double bits_per_rb = dev.se * s.cell.rb_hz * 1e-3;
            double t = rng.exponential(cls.interval_ms);
            while (t < s.duration_ms)
            {
                double bits = cls.packet_bytes * 8.0;
                if (cls.size_law == SizeLaw::Exponential)
                {
                    bits = std::max(8.0, std::ceil(rng.exponential(cls.packet_bytes)) * 8.0);
                }
                Packet p;
                p.device = static_cast<std::uint32_t>(i);
                p.generated_ms = t;
                p.eligible_ms = t + rng.uniform(0.0, s.sr_wait_max_ms) + pre_grant_ms();
                p.rb_units = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(bits / bits_per_rb - 1e-9)));
                out.push_back(p);
                t += rng.exponential(cls.interval_ms);
            }
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const Packet &a, const Packet &b) { return a.generated_ms < b.generated_ms; });
        return out;
    }

    namespace
    {
        struct Active
        {
            std::uint32_t packet = 0;
            std::int64_t remaining = 0;
        };

        struct Cell
        {
            std::array<std::deque<Active>, class_count> fifo;
            // Legacy keeps one FIFO per device; `backlogged` lists devices with work, in id order.
            std::vector<std::deque<Active>> per_device;
            std::vector<std::uint32_t> backlogged;
            std::array<int, class_count> queued{};
            std::size_t rotate = 0;
        };

        class Scheduler
        {
        public:
            Scheduler(const SliceScenario &s, const Deployment &d, const std::vector<Packet> &traffic,
                      const SlicePolicy &policy)
                : m_s(s)
                , m_d(d)
                , m_traffic(traffic)
                , m_policy(policy)
                , m_cells(d.base_stations.size())
                , m_local(d.devices.size())
                , m_warmup_ms(s.warmup_fraction * s.duration_ms)
            {
                std::vector<std::uint32_t> per_bs(d.base_stations.size(), 0);
                for (std::size_t i = 0; i < d.devices.size(); ++i)
                {
                    m_local[i] = per_bs[static_cast<std::size_t>(d.devices[i].bs)]++;
                }
                for (std::size_t b = 0; b < m_cells.size(); ++b)
                {
                    m_cells[b].per_device.resize(per_bs[b]);
                }
                m_run.policy = policy;
                if (policy.mode == Mode::Sliced)
                {
                    m_its_quota = policy.its_rbs(s.cell.rbs);
                }
            }

            SliceRun run()
            {
                des::Engine engine;
                for (std::size_t p = 0; p < m_traffic.size(); ++p)
                {
                    ++cls_stats(m_traffic[p]).generated;
                    if (m_traffic[p].eligible_ms < m_s.duration_ms)
                    {
                        engine.schedule(des::SimTime::from_ms(m_traffic[p].eligible_ms), Eligible, p);
                    }
                }
                engine.schedule(des::SimTime::from_ms(std::int64_t{0}), Subframe, 0);
                const auto last = static_cast<std::int64_t>(std::ceil(m_s.duration_ms)) - 1;
                engine.run_until(des::SimTime::from_ms(last), [&](des::Engine &e, const des::Event &ev) {
                    if (ev.tag == Eligible)
                    {
                        enqueue(static_cast<std::uint32_t>(ev.payload));
                        return;
                    }
                    const auto k = static_cast<std::int64_t>(ev.payload);
                    for (auto &cell : m_cells)
                    {
                        schedule_cell(cell, k);
                    }
                    m_run.subframes = k + 1;
                    if (k < last)
                    {
                        e.schedule(des::SimTime::from_ms(k + 1), Subframe, static_cast<std::uint64_t>(k + 1));
                    }
                });
                for (auto &c : m_run.classes)
                {
                    c.in_flight = c.generated - c.delivered - c.dropped;
                }
                return std::move(m_run);
            }

        private:
            ClassStats &cls_stats(const Packet &p) { return m_run.classes[idx(m_d.devices[p.device].cls)]; }

            void enqueue(std::uint32_t p)
            {
                const auto &pkt = m_traffic[p];
                const auto &dev = m_d.devices[pkt.device];
                auto &cell = m_cells[static_cast<std::size_t>(dev.bs)];
                const auto c = idx(dev.cls);
                if (cell.queued[c] >= m_s.queue_cap)
                {
                    ++m_run.classes[c].dropped;
                    return;
                }
                ++cell.queued[c];
                const Active a{p, pkt.rb_units};
                if (m_policy.mode == Mode::Legacy)
                {
                    const auto local = m_local[pkt.device];
                    auto &q = cell.per_device[local];
                    if (q.empty())
                    {
                        cell.backlogged.insert(std::upper_bound(cell.backlogged.begin(), cell.backlogged.end(), local),
                                               local);
                    }
                    q.push_back(a);
                }
                else
                {
                    cell.fifo[c].push_back(a);
                }
            }

            void deliver(Cell &cell, std::uint32_t p, std::int64_t subframe)
            {
                const auto &pkt = m_traffic[p];
                auto &st = cls_stats(pkt);
                --cell.queued[idx(m_d.devices[pkt.device].cls)];
                ++st.delivered;
                if (pkt.generated_ms >= m_warmup_ms)
                {
                    const double done = static_cast<double>(subframe + 1) + bs_decode_ms() + m_s.core_network_ms;
                    st.latency_ms.push_back(done - pkt.generated_ms);
                }
            }

            // Serves a FIFO with up to `budget` RBs; returns RBs used.
            int serve_fifo(Cell &cell, std::deque<Active> &q, int budget, std::int64_t k)
            {
                int used = 0;
                while (used < budget && !q.empty())
                {
                    auto &head = q.front();
                    const auto take = static_cast<int>(std::min<std::int64_t>(head.remaining, budget - used));
                    head.remaining -= take;
                    used += take;
                    if (head.remaining == 0)
                    {
                        const auto p = head.packet;
                        q.pop_front();
                        deliver(cell, p, k);
                    }
                }
                return used;
            }

            // Equal fixed shares of at least legacy_min_rbs per backlogged device, served
            // round-robin from a rotating start. A share the device cannot fill is padding.
            int schedule_legacy(Cell &cell, std::int64_t k)
            {
                const int total = m_s.cell.rbs;
                const std::size_t n = cell.backlogged.size();
                if (n == 0)
                {
                    return 0;
                }
                const int share = std::max(m_s.legacy_min_rbs, total / static_cast<int>(n));
                const std::size_t served = std::min(n, static_cast<std::size_t>(total / share));
                const std::size_t start = cell.rotate % n;
                int granted = 0;
                for (std::size_t j = 0; j < served; ++j)
                {
                    auto &q = cell.per_device[cell.backlogged[(start + j) % n]];
                    serve_fifo(cell, q, share, k);
                    granted += share;
                }
                cell.rotate = start + served;
                std::vector<std::uint32_t> keep;
                for (auto dev : cell.backlogged)
                {
                    if (!cell.per_device[dev].empty())
                    {
                        keep.push_back(dev);
                    }
                }
                // keep the rotation pointing at the first device not served this subframe
                if (!keep.empty())
                {
                    const auto next = cell.backlogged[(start + served) % n];
                    cell.rotate = static_cast<std::size_t>(
                        std::lower_bound(keep.begin(), keep.end(), next) - keep.begin());
                }
                cell.backlogged = std::move(keep);
                return granted;
            }

            int schedule_sliced(Cell &cell, std::int64_t k)
            {
                const int total = m_s.cell.rbs;
                const std::array<int, class_count> quota{m_its_quota, total - m_its_quota};
                std::array<int, class_count> used{};
                for (std::size_t c = 0; c < class_count; ++c)
                {
                    used[c] = serve_fifo(cell, cell.fifo[c], quota[c], k);
                }
                if (m_policy.lending)
                {
                    for (std::size_t c = 0; c < class_count; ++c)
                    {
                        used[c] += serve_fifo(cell, cell.fifo[c], total - used[0] - used[1], k);
                    }
                    if (used[0] + used[1] < total && (!cell.fifo[0].empty() || !cell.fifo[1].empty()))
                    {
                        throw InvariantViolation("sliced scheduler with lending left RBs idle with work queued");
                    }
                }
                else
                {
                    for (std::size_t c = 0; c < class_count; ++c)
                    {
                        if (used[c] > quota[c] || (used[c] < quota[c] && !cell.fifo[c].empty()))
                        {
                            throw InvariantViolation("sliced scheduler broke a quota without lending");
                        }
                    }
                }
                return used[0] + used[1];
            }

            void schedule_cell(Cell &cell, std::int64_t k)
            {
                const int used = m_policy.mode == Mode::Legacy ? schedule_legacy(cell, k) : schedule_sliced(cell, k);
                if (used > m_s.cell.rbs)
                {
                    throw InvariantViolation(fmt::format("subframe {} allocated {} RBs", k, used));
                }
                m_run.peak_rbs_used = std::max(m_run.peak_rbs_used, used);
            }

            const SliceScenario &m_s;
            const Deployment &m_d;
            const std::vector<Packet> &m_traffic;
            SlicePolicy m_policy;
            std::vector<Cell> m_cells;
            std::vector<std::uint32_t> m_local;
            double m_warmup_ms;
            int m_its_quota = 0;
            SliceRun m_run;
        };
    }

    SliceRun run_slicing(const SliceScenario &s, const Deployment &d, const std::vector<Packet> &traffic,
                         const SlicePolicy &policy)
    {
        validate(s);
        if (policy.mode == Mode::Sliced)
        {
            (void)policy.its_rbs(s.cell.rbs);
        }
        return Scheduler(s, d, traffic, policy).run();
    }

    SliceRun run_slicing(const SliceScenario &s, const SlicePolicy &policy, std::uint64_t seed)
    {
        const auto d = deploy(s, seed);
        return run_slicing(s, d, generate_traffic(s, d, seed), policy);
    }

    double LatencyCdf::at(double x) const noexcept
    {
        const auto it = std::upper_bound(points.begin(), points.end(), x,
                                         [](double v, const CdfPoint &p) { return v < p.x_ms; });
        return it == points.begin() ? 0.0 : std::prev(it)->fraction;
    }

    LatencyCdf latency_cdf(std::vector<double> samples)
    {
        LatencyCdf cdf;
        cdf.samples = samples.size();
        if (samples.empty())
        {
            return cdf;
        }
        std::sort(samples.begin(), samples.end());
        const double n = static_cast<double>(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            if (i + 1 == samples.size() || samples[i + 1] != samples[i])
            {
                cdf.points.push_back({samples[i], static_cast<double>(i + 1) / n});
            }
        }
        cdf.median = samples[(samples.size() - 1) / 2];
        cdf.p95 = samples[static_cast<std::size_t>(std::floor(0.95 * (n - 1.0)))];
        return cdf;
    }

    std::vector<PolicySummary> compare_policies(const SliceScenario &s, const std::vector<SlicePolicy> &policies,
                                                int seeds, std::uint64_t base_seed, unsigned max_threads)
    {
        validate(s);
        if (policies.empty() || seeds < 1)
        {
            throw ConfigError("compare_policies needs at least one policy and one seed");
        }
        const auto n_seeds = static_cast<std::size_t>(seeds);
        std::vector<Deployment> deployments(n_seeds);
        std::vector<std::vector<Packet>> traffic(n_seeds);
        util::parallel_for(n_seeds, max_threads, [&](std::size_t i) {
            deployments[i] = deploy(s, base_seed + i);
            traffic[i] = generate_traffic(s, deployments[i], base_seed + i);
        });

        const std::size_t jobs = n_seeds * policies.size();
        std::vector<SliceRun> runs(jobs);
        util::parallel_for(jobs, max_threads, [&](std::size_t j) {
            const auto seed = j / policies.size();
            runs[j] = run_slicing(s, deployments[seed], traffic[seed], policies[j % policies.size()]);
        });

        std::vector<PolicySummary> table;
        for (std::size_t p = 0; p < policies.size(); ++p)
        {
            for (std::size_t c = 0; c < class_count; ++c)
            {
                PolicySummary row;
                row.policy = policies[p];
                row.cls = static_cast<ClassId>(c);
                std::vector<double> pooled;
                for (std::size_t i = 0; i < n_seeds; ++i)
                {
                    const auto &st = runs[i * policies.size() + p].classes[c];
                    pooled.insert(pooled.end(), st.latency_ms.begin(), st.latency_ms.end());
                    row.dropped += st.dropped;
                    row.generated += st.generated;
                }
                row.cdf = latency_cdf(pooled);
                row.samples_ms = std::move(pooled);
                table.push_back(std::move(row));
            }
        }
        return table;
    }
}
