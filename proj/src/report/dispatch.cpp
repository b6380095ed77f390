#include "urllc/report/dispatch.hpp"

#include "urllc/fbl/normal_approx.hpp"
#include "urllc/util/parallel.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace urllc::report
{
    DispatchError::DispatchError(std::string module, const std::string &message)
        : std::runtime_error(fmt::format("[{}] {}", module, message)), m_module(std::move(module))
    {
    }

    std::string_view module_of(Subcommand c) noexcept
    {
        switch (c)
        {
        case Subcommand::Budget:
            return "budget";
        case Subcommand::Ppv:
            return "fbl";
        case Subcommand::Afc:
            return "afc";
        case Subcommand::Ma:
            return "access";
        case Subcommand::Slice:
            return "slicing";
        case Subcommand::Chanest:
            return "chanest";
        }
        return "report";
    }

    unsigned threads_from_env()
    {
        const char *v = std::getenv("URLLC_BENCH_THREADS");
        if (v == nullptr || *v == '\0')
        {
            return 0;
        }
        char *end = nullptr;
        const unsigned long n = std::strtoul(v, &end, 10);
        if (*end != '\0' || n > 4096)
        {
            return 0;
        }
        return static_cast<unsigned>(n);
    }

    std::string RunManifest::tag() const
    {
        return fmt::format("run={} seed={} version={} subcommand={}", run_hash.substr(0, 16), seed, version,
                           to_string(subcommand));
    }

    std::string RunManifest::to_json() const
    {
        nlohmann::ordered_json j;
        j["run_hash"] = run_hash;
        j["seed"] = seed;
        j["version"] = version;
        j["subcommand"] = std::string(to_string(subcommand));
        j["wall_clock"] = {{"started_utc", started_utc}, {"elapsed_s", elapsed_s}};
        auto files_json = nlohmann::ordered_json::array();
        for (const auto &f : files)
        {
            files_json.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
        }
        j["files"] = std::move(files_json);
        j["scenario"] = nlohmann::ordered_json::parse(scenario_json);
        return j.dump(2) + "\n";
    }

    namespace
    {
        using report::format_number;

        std::string num(double v) { return format_number(v); }
        std::string num(std::int64_t v) { return format_number(v); }

        // -- budget --------------------------------------------------------------------------

        std::vector<CsvTable> budget_tables(const BudgetConfig &c)
        {
            using budget::Millis;
            struct Named
            {
                std::string name;
                budget::DelayBudget b;
            };
            const std::vector<Named> budgets{
                {"uplink", budget::with_core_network(budget::uplink_budget(c.uplink), c.core_network_ms)},
                {"downlink", budget::with_core_network(budget::downlink_budget(c.downlink), c.core_network_ms)},
                {"uplink_harq", budget::with_core_network(budget::with_harq(budget::uplink_budget(c.uplink), c.harq_retx),
                                                          c.core_network_ms)},
                {"unaligned_uplink",
                 budget::with_core_network(budget::unaligned_uplink_budget(c.uplink), c.core_network_ms)},
            };

            CsvTable parts{"budget_breakdown", {"procedure", "component", "ms", "cumulative_ms"}, {}};
            CsvTable totals{"budget_totals", {"procedure", "harq_retx", "core_network_ms", "total_ms"}, {}};
            for (const auto &[name, b] : budgets)
            {
                Millis acc{0};
                auto row = [&](const std::string &component, Millis ms) {
                    acc += ms;
                    parts.add({name, component, budget::format_millis(ms), budget::format_millis(acc)});
                };
                for (const auto &comp : b.components)
                {
                    row(comp.name, comp.duration);
                }
                if (b.harq_retx > 0)
                {
                    row(fmt::format("HARQ retransmission x{}", b.harq_retx), b.harq_rtt * b.harq_retx);
                }
                if (b.core_network_extra != Millis{0})
                {
                    row("core network", b.core_network_extra);
                }
                totals.add({name, num(b.harq_retx), budget::format_millis(b.core_network_extra),
                            budget::format_millis(b.total())});
            }
            return {std::move(parts), std::move(totals)};
        }

        // -- ppv -----------------------------------------------------------------------------

        std::vector<CsvTable> ppv_tables(const PpvConfig &c)
        {
            const auto ch = fbl::AwgnChannel::from_db(c.snr_db);
            const auto lt = c.log_term ? fbl::LogTerm::On : fbl::LogTerm::Off;
            CsvTable t{"ppv", {"n", "eps", "snr_db", "capacity", "dispersion", "rate"}, {}};
            for (std::int64_t n = c.n_lo; n <= c.n_hi; n += c.n_step)
            {
                const auto p = fbl::ppv_point(n, c.eps, ch, lt);
                t.add({num(n), num(c.eps), num(c.snr_db), num(p.capacity), num(p.dispersion), num(p.max_rate)});
            }
            return {std::move(t)};
        }

        // -- afc -----------------------------------------------------------------------------

        double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

        std::vector<CsvTable> afc_tables(const AfcConfig &c, std::uint64_t seed, unsigned threads)
        {
            const auto params = c.effective_params();
            const auto n_snr = c.snr_db_list.size();
            const auto n_seeds = static_cast<std::size_t>(c.seeds);
            std::vector<afc::AfcSession> sessions(n_snr * n_seeds);
            util::parallel_for(sessions.size(), threads, [&](std::size_t j) {
                sessions[j] = afc::run_session(params, db_to_linear(c.snr_db_list[j / n_seeds]), seed + j % n_seeds,
                                               c.feedback_loss);
            });

            CsvTable runs{"afc_sessions", {"snr_db", "seed", "decoded_at", "realized_rate", "success", "ppv_rate"}, {}};
            CsvTable summary{"afc_summary",
                             {"snr_db", "sessions", "successes", "mean_rate", "se_rate", "capacity"},
                             {}};
            for (std::size_t i = 0; i < n_snr; ++i)
            {
                const double snr_db = c.snr_db_list[i];
                const fbl::AwgnChannel ch(db_to_linear(snr_db));
                std::vector<double> rates;
                int successes = 0;
                for (std::size_t k = 0; k < n_seeds; ++k)
                {
                    const auto &s = sessions[i * n_seeds + k];
                    std::string decoded, overlay;
                    if (s.decoded_at)
                    {
                        ++successes;
                        decoded = num(*s.decoded_at);
                        overlay = num(fbl::ppv_max_rate(*s.decoded_at, c.overlay_eps, ch));
                    }
                    rates.push_back(s.realized_rate());
                    runs.add({num(snr_db), format_number(std::uint64_t{seed + k}), decoded, num(s.realized_rate()),
                              s.success() ? "1" : "0", overlay});
                }
                const double n = static_cast<double>(rates.size());
                const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / n;
                double ss = 0.0;
                for (double r : rates)
                {
                    ss += (r - mean) * (r - mean);
                }
                const double se = rates.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
                summary.add({num(snr_db), num(static_cast<std::int64_t>(n_seeds)), num(std::int64_t{successes}),
                             num(mean), num(se), num(fbl::capacity(ch))});
            }
            return {std::move(runs), std::move(summary)};
        }

        // -- ma ------------------------------------------------------------------------------

        std::vector<CsvTable> ma_tables(const MaConfig &c, std::uint64_t seed, unsigned threads)
        {
            std::vector<access::Scheme> schemes;
            if (c.scheme != "noma")
            {
                schemes.push_back(access::Scheme::Oma);
            }
            if (c.scheme != "oma")
            {
                schemes.push_back(access::Scheme::Noma);
            }
            const auto n_d = c.devices.size();
            const auto n_seeds = static_cast<std::size_t>(c.seeds);
            const std::size_t per_scheme = n_d * n_seeds;
            std::vector<access::AccessResult> results(schemes.size() * per_scheme);
            util::parallel_for(results.size(), threads, [&](std::size_t j) {
                auto s = c.scenario;
                s.devices = c.devices[(j % per_scheme) / n_seeds];
                results[j] = access::simulate(schemes[j / per_scheme], s, seed + j % n_seeds);
            });

            CsvTable runs{"ma_runs", {"scheme", "D", "seed", "mean_delay_ms", "undelivered"}, {}};
            CsvTable summary{"ma_summary", {"scheme", "D", "mean", "ci95"}, {}};
            for (std::size_t si = 0; si < schemes.size(); ++si)
            {
                const std::string name(access::to_string(schemes[si]));
                for (std::size_t di = 0; di < n_d; ++di)
                {
                    std::vector<double> means;
                    for (std::size_t k = 0; k < n_seeds; ++k)
                    {
                        const auto &r = results[si * per_scheme + di * n_seeds + k];
                        means.push_back(r.mean_delay_ms());
                        runs.add({name, num(std::int64_t{c.devices[di]}), format_number(std::uint64_t{seed + k}),
                                  num(r.mean_delay_ms()), num(std::int64_t{r.undelivered})});
                    }
                    const double n = static_cast<double>(means.size());
                    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / n;
                    double ss = 0.0;
                    for (double m : means)
                    {
                        ss += (m - mean) * (m - mean);
                    }
                    const double ci = means.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
                    summary.add({name, num(std::int64_t{c.devices[di]}), num(mean), num(ci)});
                }
            }
            return {std::move(runs), std::move(summary)};
        }

        // -- slice ---------------------------------------------------------------------------

        std::vector<CsvTable> slice_tables(const SliceConfig &c, std::uint64_t seed, unsigned threads)
        {
            std::vector<slicing::SlicePolicy> policies;
            for (const auto &p : c.policies)
            {
                policies.push_back(slicing::parse_policy(p));
            }
            const auto rows = slicing::compare_policies(c.scenario, policies, c.seeds, seed, threads);

            CsvTable samples{"slice_samples", {"policy", "class", "latency_ms"}, {}};
            CsvTable summary{"slice_summary", {"policy", "class", "median_ms", "p95_ms", "drops"}, {}};
            CsvTable cdf{"slice_cdf", {"policy", "class", "x_ms", "F"}, {}};
            for (std::size_t i = 0; i < rows.size(); ++i)
            {
                const auto &r = rows[i];
                const std::string &policy = c.policies[i / slicing::class_count];
                const std::string cls = slicing::to_string(r.cls);
                for (double x : r.samples_ms)
                {
                    samples.add({policy, cls, num(x)});
                }
                summary.add({policy, cls, r.cdf.median ? num(*r.cdf.median) : "", r.cdf.p95 ? num(*r.cdf.p95) : "",
                             num(r.dropped)});
                for (const auto &pt : r.cdf.points)
                {
                    cdf.add({policy, cls, num(pt.x_ms), num(pt.fraction)});
                }
            }
            return {std::move(samples), std::move(summary), std::move(cdf)};
        }

        // -- chanest -------------------------------------------------------------------------

        std::vector<CsvTable> chanest_tables(const ChanestConfig &c, std::uint64_t seed, unsigned threads)
        {
            chanest::BenchConfig cfg;
            cfg.bandwidth = c.bandwidth;
            cfg.model = c.model;
            cfg.model.noise_var = chanest::ChannelModel::noise_var_for_snr_db(c.snr_db);
            if (c.mmse_doppler_hz)
            {
                auto stats = cfg.model;
                stats.doppler_hz = *c.mmse_doppler_hz;
                cfg.mmse_stats = stats;
            }
            cfg.seeds = c.seeds;
            cfg.base_seed = seed;
            cfg.repetitions = c.repetitions;
            cfg.max_threads = threads;
            const auto rows = chanest::bench(c.methods, cfg);

            std::string bw(budget::to_string(c.bandwidth));
            bw.resize(bw.size() - 3);
            CsvTable per_seed{"chanest_nmse", {"method", "bandwidth", "seed", "nmse"}, {}};
            CsvTable summary{"chanest_summary", {"method", "bandwidth", "nmse_db_mean"}, {}};
            CsvTable timing{"chanest_timing", {"method", "bandwidth", "time_ms_median", "ratio_to_mmse"}, {}};
            std::optional<double> mmse_ms;
            for (const auto &r : rows)
            {
                if (r.method == chanest::Method::Mmse)
                {
                    mmse_ms = r.time_ms_median;
                }
            }
            for (const auto &r : rows)
            {
                const std::string name(chanest::to_string(r.method));
                for (std::size_t k = 0; k < r.per_seed_nmse.size(); ++k)
                {
                    per_seed.add({name, bw, format_number(std::uint64_t{seed + k}), num(r.per_seed_nmse[k])});
                }
                summary.add({name, bw, num(10.0 * std::log10(r.nmse))});
                timing.add({name, bw, num(r.time_ms_median), mmse_ms ? num(r.time_ms_median / *mmse_ms) : ""});
            }
            return {std::move(per_seed), std::move(summary), std::move(timing)};
        }

        std::string utc_now()
        {
            return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                               std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
        }
    }

    std::vector<CsvTable> compute_tables(const Scenario &s, unsigned max_threads, std::ostream *log)
    {
        std::vector<CsvTable> tables;
        switch (s.subcommand)
        {
        case Subcommand::Budget:
            tables = budget_tables(s.budget);
            break;
        case Subcommand::Ppv:
            tables = ppv_tables(s.ppv);
            break;
        case Subcommand::Afc:
            tables = afc_tables(s.afc, s.seed, max_threads);
            break;
        case Subcommand::Ma:
            tables = ma_tables(s.ma, s.seed, max_threads);
            break;
        case Subcommand::Slice:
            tables = slice_tables(s.slice, s.seed, max_threads);
            break;
        case Subcommand::Chanest:
            tables = chanest_tables(s.chanest, s.seed, max_threads);
            break;
        }
        if (log != nullptr)
        {
            for (const auto &t : tables)
            {
                *log << fmt::format("{}: {} rows\n", t.name, t.rows.size());
            }
        }
        return tables;
    }

    RunManifest dispatch(const Scenario &s, unsigned max_threads, std::ostream *log, std::vector<CsvTable> *tables_out)
    {
        const auto t0 = std::chrono::steady_clock::now();
        RunManifest m;
        m.subcommand = s.subcommand;
        m.seed = s.seed;
        m.started_utc = utc_now();
        try
        {
            validate(s);
        }
        catch (const std::exception &e)
        {
            throw DispatchError("scenario", e.what());
        }
        m.scenario_json = serialize(s, -1);
        m.run_hash = scenario_hash(s);

        std::vector<CsvTable> tables;
        try
        {
            tables = compute_tables(s, max_threads, log);
        }
        catch (const std::exception &e)
        {
            throw DispatchError(std::string(module_of(s.subcommand)), e.what());
        }

        const std::filesystem::path dir(s.out);
        try
        {
            std::filesystem::create_directories(dir);
            const auto tag = m.tag();
            for (const auto &t : tables)
            {
                const std::string body = render(t, tag);
                const std::string name = t.name + ".csv";
                std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
                out << body;
                out.close();
                if (!out)
                {
                    throw std::runtime_error(fmt::format("cannot write '{}'", (dir / name).string()));
                }
                m.files.push_back({name, body.size(), sha256_hex(body)});
            }
            m.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto manifest_path = dir / fmt::format("{}_manifest.json", to_string(s.subcommand));
            std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
            out << m.to_json();
            out.close();
            if (!out)
            {
                throw std::runtime_error(fmt::format("cannot write '{}'", manifest_path.string()));
            }
        }
        catch (const std::filesystem::filesystem_error &e)
        {
            throw DispatchError("io", e.what());
        }
        catch (const std::runtime_error &e)
        {
            throw DispatchError("io", e.what());
        }
        if (tables_out != nullptr)
        {
            *tables_out = std::move(tables);
        }
        return m;
    }

    std::vector<std::string> verify_manifest(const std::filesystem::path &dir, const RunManifest &m)
    {
        std::vector<std::string> bad;
        for (const auto &f : m.files)
        {
            std::ifstream in(dir / f.name, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            const std::string body = buf.str();
            if (!in || body.size() != f.bytes || sha256_hex(body) != f.sha256)
            {
                bad.push_back(f.name);
            }
        }
        return bad;
    }
}
