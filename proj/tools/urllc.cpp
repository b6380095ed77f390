// Command-line front end: loads a scenario, applies flag overrides, runs one
// subcommand and writes its CSVs plus a manifest.

#include "urllc/report/dispatch.hpp"
#include "urllc/report/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace
{
    using namespace urllc;
    using report::Scenario;
    using report::ScenarioError;

    // "lo:hi:step" (inclusive) or a comma list.
    template <class T>
    std::vector<T> parse_range(const std::string &text, const std::string &flag)
    {
        std::vector<T> out;
        auto to_num = [&](const std::string &s) -> T {
            std::size_t used = 0;
            double v = 0.0;
            try
            {
                v = std::stod(s, &used);
            }
            catch (const std::exception &)
            {
                used = 0;
            }
            if (used == 0 || used != s.size())
            {
                throw ScenarioError(ScenarioError::Kind::Type, flag, fmt::format("bad number '{}'", s));
            }
            return static_cast<T>(v);
        };
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string item;
        const char sep = text.find(':') != std::string::npos ? ':' : ',';
        while (std::getline(ss, item, sep))
        {
            parts.push_back(item);
        }
        if (sep == ':')
        {
            if (parts.size() != 3)
            {
                throw ScenarioError(ScenarioError::Kind::Type, flag, "expected lo:hi:step");
            }
            const T lo = to_num(parts[0]), hi = to_num(parts[1]), step = to_num(parts[2]);
            if (!(step > 0) || hi < lo)
            {
                throw ScenarioError(ScenarioError::Kind::Range, flag, "need step > 0 and hi >= lo");
            }
            for (T v = lo; v <= hi + step * 1e-9; v += step)
            {
                out.push_back(v);
            }
            return out;
        }
        for (const auto &p : parts)
        {
            out.push_back(to_num(p));
        }
        return out;
    }

    std::vector<std::string> split_list(const std::string &text)
    {
        std::vector<std::string> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            out.push_back(item);
        }
        return out;
    }

    void print_error(std::string_view module, std::string_view kind, std::string_view key, std::string_view message)
    {
        nlohmann::ordered_json j;
        j["error"] = {{"module", module}, {"kind", kind}, {"key", key}, {"message", message}};
        std::cerr << j.dump() << "\n";
    }

    void print_table(const report::CsvTable &t)
    {
        std::cout << t.name << "\n";
        std::string line;
        for (std::size_t i = 0; i < t.header.size(); ++i)
        {
            line += fmt::format("{}{:>16}", i ? " " : "", t.header[i]);
        }
        std::cout << line << "\n";
        for (const auto &row : t.rows)
        {
            line.clear();
            for (std::size_t i = 0; i < row.size(); ++i)
            {
                std::string cell = row[i];
                char *end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (!cell.empty() && *end == '\0')
                {
                    cell = fmt::format("{:.6g}", v);
                }
                line += fmt::format("{}{:>16}", i ? " " : "", cell);
            }
            std::cout << line << "\n";
        }
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"URLLC latency toolkit: budgets, coding bounds, access, slicing and channel estimation"};
    app.fallthrough();
    app.require_subcommand(0, 1);

    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool quiet = false;
    bool print_scenario = false;
    app.add_option("--scenario", scenario_path, "JSON scenario file (missing keys take defaults)");
    app.add_option("--seed", seed, "Root seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_flag("--quiet", quiet, "Only errors on stderr");
    app.add_flag("--print-scenario", print_scenario, "Print the fully-defaulted scenario and exit");

    auto *budget_cmd = app.add_subcommand("budget", "Access-procedure delay breakdown");
    std::optional<std::int64_t> harq_retx;
    std::optional<std::string> core_ms;
    budget_cmd->add_option("--harq-retx", harq_retx, "HARQ retransmissions in the uplink_harq row");
    budget_cmd->add_option("--core-network-ms", core_ms, "Constant core-network delay added to every total");

    auto *ppv_cmd = app.add_subcommand("ppv", "Finite-blocklength rate frontier");
    std::optional<double> ppv_snr, ppv_eps;
    std::optional<std::int64_t> ppv_n;
    std::optional<std::string> ppv_sweep;
    bool no_log_term = false;
    ppv_cmd->add_option("--snr-db", ppv_snr, "SNR in dB");
    ppv_cmd->add_option("--eps", ppv_eps, "Block error target");
    ppv_cmd->add_option("--n", ppv_n, "Single blocklength");
    ppv_cmd->add_option("--sweep-n", ppv_sweep, "Blocklength sweep lo:hi:step");
    ppv_cmd->add_flag("--no-log-term", no_log_term, "Drop the log2(n)/(2n) term");

    auto *afc_cmd = app.add_subcommand("afc", "Rateless analog fountain code sessions");
    std::optional<int> afc_k, afc_seeds;
    std::optional<std::string> afc_snrs;
    std::optional<double> afc_loss;
    afc_cmd->add_option("--k", afc_k, "Message bits");
    afc_cmd->add_option("--snr-db-list", afc_snrs, "Comma list or lo:hi:step of SNRs in dB");
    afc_cmd->add_option("--seeds", afc_seeds, "Sessions per SNR");
    afc_cmd->add_option("--feedback-loss", afc_loss, "Probability an acknowledgement is lost");

    auto *ma_cmd = app.add_subcommand("ma", "OMA vs NOMA access delay sweep");
    std::optional<std::string> ma_devices, ma_scheme;
    std::optional<int> ma_seeds;
    ma_cmd->add_option("--devices", ma_devices, "Device counts lo:hi:step or comma list");
    ma_cmd->add_option("--scheme", ma_scheme, "oma, noma or both");
    ma_cmd->add_option("--seeds", ma_seeds, "Seeds per point");

    auto *slice_cmd = app.add_subcommand("slice", "RB slicing policy comparison");
    std::vector<std::string> slice_policies;
    std::optional<double> slice_duration;
    std::optional<int> slice_seeds;
    slice_cmd->add_option("--policy", slice_policies, "legacy, 0.15, 0.80 or custom:<f> (repeatable)");
    slice_cmd->add_option("--duration-ms", slice_duration, "Simulated time per run");
    slice_cmd->add_option("--seeds", slice_seeds, "Paired deployments");

    auto *ce_cmd = app.add_subcommand("chanest", "Pilot-based channel estimation bench");
    std::optional<std::string> ce_bw, ce_methods;
    std::optional<double> ce_doppler, ce_snr, ce_mmse_doppler;
    std::optional<int> ce_seeds, ce_reps;
    ce_cmd->add_option("--bandwidth", ce_bw, "1.4, 5 or 10 (MHz)");
    ce_cmd->add_option("--doppler", ce_doppler, "Maximum Doppler in Hz");
    ce_cmd->add_option("--snr-db", ce_snr, "Pilot SNR in dB");
    ce_cmd->add_option("--seeds", ce_seeds, "Channel realizations");
    ce_cmd->add_option("--methods", ce_methods, "Comma list of nearest, bilinear, biharmonic, mmse");
    ce_cmd->add_option("--mmse-doppler", ce_mmse_doppler, "Doppler assumed by the MMSE filter");
    ce_cmd->add_option("--repetitions", ce_reps, "Timed calls per method");

    CLI11_PARSE(app, argc, argv);

    Scenario s;
    try
    {
        if (!scenario_path.empty())
        {
            s = report::load_scenario(scenario_path);
        }
        if (!app.get_subcommands().empty())
        {
            s.subcommand = *report::parse_subcommand(app.get_subcommands().front()->get_name());
        }
        if (seed)
        {
            s.seed = *seed;
        }
        if (out_dir)
        {
            s.out = *out_dir;
        }

        if (harq_retx)
        {
            s.budget.harq_retx = *harq_retx;
        }
        if (core_ms)
        {
            s.budget.core_network_ms = budget::parse_millis(*core_ms);
        }

        if (ppv_snr)
        {
            s.ppv.snr_db = *ppv_snr;
        }
        if (ppv_eps)
        {
            s.ppv.eps = *ppv_eps;
        }
        if (ppv_n)
        {
            s.ppv.n_lo = s.ppv.n_hi = *ppv_n;
            s.ppv.n_step = 1;
        }
        if (ppv_sweep)
        {
            const auto n = parse_range<double>(*ppv_sweep, "--sweep-n");
            if (ppv_sweep->find(':') == std::string::npos || n.size() < 2)
            {
                throw ScenarioError(ScenarioError::Kind::Type, "--sweep-n", "expected lo:hi:step");
            }
            s.ppv.n_lo = static_cast<std::int64_t>(n.front());
            s.ppv.n_step = static_cast<std::int64_t>(n[1] - n[0]);
            s.ppv.n_hi = static_cast<std::int64_t>(n.back());
        }
        if (no_log_term)
        {
            s.ppv.log_term = false;
        }

        if (afc_k)
        {
            s.afc.params.k = *afc_k;
        }
        if (afc_snrs)
        {
            s.afc.snr_db_list = parse_range<double>(*afc_snrs, "--snr-db-list");
        }
        if (afc_seeds)
        {
            s.afc.seeds = *afc_seeds;
        }
        if (afc_loss)
        {
            s.afc.feedback_loss = *afc_loss;
        }

        if (ma_devices)
        {
            s.ma.devices = parse_range<int>(*ma_devices, "--devices");
        }
        if (ma_scheme)
        {
            s.ma.scheme = *ma_scheme;
        }
        if (ma_seeds)
        {
            s.ma.seeds = *ma_seeds;
        }

        if (!slice_policies.empty())
        {
            s.slice.policies = slice_policies;
        }
        if (slice_duration)
        {
            s.slice.scenario.duration_ms = *slice_duration;
        }
        if (slice_seeds)
        {
            s.slice.seeds = *slice_seeds;
        }

        if (ce_bw)
        {
            s.chanest.bandwidth = budget::parse_bandwidth(*ce_bw);
        }
        if (ce_doppler)
        {
            s.chanest.model.doppler_hz = *ce_doppler;
        }
        if (ce_snr)
        {
            s.chanest.snr_db = *ce_snr;
        }
        if (ce_seeds)
        {
            s.chanest.seeds = *ce_seeds;
        }
        if (ce_methods)
        {
            s.chanest.methods.clear();
            for (const auto &m : split_list(*ce_methods))
            {
                s.chanest.methods.push_back(chanest::parse_method(m));
            }
        }
        if (ce_mmse_doppler)
        {
            s.chanest.mmse_doppler_hz = *ce_mmse_doppler;
        }
        if (ce_reps)
        {
            s.chanest.repetitions = *ce_reps;
        }
        report::validate(s);
    }
    catch (const ScenarioError &e)
    {
        print_error("scenario", report::to_string(e.kind()), e.key(), e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        print_error("scenario", "range", "", e.what());
        return 2;
    }

    if (print_scenario)
    {
        std::cout << report::serialize(s) << "\n";
        return 0;
    }

    try
    {
        const auto threads = report::threads_from_env();
        std::vector<report::CsvTable> tables;
        const auto manifest = report::dispatch(s, threads, quiet ? nullptr : &std::clog, &tables);
        if (!quiet)
        {
            for (const auto &t : tables)
            {
                if (t.name.ends_with("_summary") || t.name.ends_with("_totals") || t.name.ends_with("_timing"))
                {
                    print_table(t);
                }
            }
            std::cout << fmt::format("wrote {} files to {} ({})\n", manifest.files.size(), s.out, manifest.tag());
        }
    }
    catch (const report::DispatchError &e)
    {
        print_error(e.module(), "runtime", "", e.what());
        return 1;
    }
    return 0;
}
