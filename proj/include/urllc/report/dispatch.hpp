#pragma once

#include "urllc/report/csv.hpp"
#include "urllc/report/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace urllc::report
{
    inline constexpr std::string_view artifact_version = "0.1.0";

    /// A failure inside a subcommand, tagged with the module it came from.
    class DispatchError : public std::runtime_error
    {
    public:
        DispatchError(std::string module, const std::string &message);
        const std::string &module() const noexcept { return m_module; }

    private:
        std::string m_module;
    };

    /// Library module behind a subcommand, e.g. "slicing" for slice.
    std::string_view module_of(Subcommand c) noexcept;

    /// URLLC_BENCH_THREADS as a thread cap; 0 (no cap) when unset or invalid.
    unsigned threads_from_env();

    struct FileDigest
    {
        std::string name;
        std::uint64_t bytes = 0;
        std::string sha256;
    };

    struct RunManifest
    {
        /// Hash of the canonical scenario (which includes the seed).
        std::string run_hash;
        std::uint64_t seed = 0;
        std::string version{artifact_version};
        Subcommand subcommand = Subcommand::Budget;
        std::string started_utc;
        double elapsed_s = 0.0;
        std::vector<FileDigest> files;
        std::string scenario_json;

        /// Short form written into every CSV's manifest comment.
        std::string tag() const;
        std::string to_json() const;
    };

    // Tables for one subcommand, computed in parallel but assembled in a fixed
    // order. Everything except files named *_timing.csv is a pure function of
    // the scenario.
    std::vector<CsvTable> compute_tables(const Scenario &s, unsigned max_threads = 0, std::ostream *log = nullptr);

    // Writes every table plus <subcommand>_manifest.json under s.out. Throws
    // DispatchError on any failure.
    RunManifest dispatch(const Scenario &s, unsigned max_threads = 0, std::ostream *log = nullptr,
                         std::vector<CsvTable> *tables_out = nullptr);

    /// Names of listed files whose size or digest no longer match; empty when all match.
    std::vector<std::string> verify_manifest(const std::filesystem::path &dir, const RunManifest &m);
}
