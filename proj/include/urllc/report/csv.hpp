#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace urllc::report
{
    /// Shortest text that parses back to the same double; "nan", "inf" and "-inf" otherwise.
    std::string format_number(double v);
    std::string format_number(std::int64_t v);
    inline std::string format_number(int v) { return format_number(static_cast<std::int64_t>(v)); }
    inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

    /// RFC 4180 quoting, applied only when the field needs it.
    std::string escape_field(std::string_view field);

    struct CsvTable
    {
        std::string name;
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        /// Throws std::invalid_argument if the width differs from the header.
        void add(std::vector<std::string> row);
    };

    // Header row, then "# manifest: <tag>", then data rows; "\n" line endings.
    std::string render(const CsvTable &table, std::string_view manifest_tag);

    std::string sha256_hex(std::string_view bytes);
}
