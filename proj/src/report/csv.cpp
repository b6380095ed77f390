#include "urllc/report/csv.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace urllc::report
{
    std::string format_number(double v)
    {
        if (std::isnan(v))
        {
            return "nan";
        }
        if (std::isinf(v))
        {
            return v > 0 ? "inf" : "-inf";
        }
        // fmt's default is the shortest round-trip form, identical on every platform.
        return fmt::format("{}", v);
    }

    std::string format_number(std::int64_t v) { return fmt::format("{}", v); }

    std::string escape_field(std::string_view field)
    {
        if (field.find_first_of(",\"\r\n") == std::string_view::npos)
        {
            return std::string(field);
        }
        std::string out = "\"";
        for (char c : field)
        {
            if (c == '"')
            {
                out += '"';
            }
            out += c;
        }
        out += '"';
        return out;
    }

    void CsvTable::add(std::vector<std::string> row)
    {
        if (row.size() != header.size())
        {
            throw std::invalid_argument(
                fmt::format("{}: row has {} fields, header has {}", name, row.size(), header.size()));
        }
        rows.push_back(std::move(row));
    }

    namespace
    {
        void append_line(std::string &out, const std::vector<std::string> &fields)
        {
            for (std::size_t i = 0; i < fields.size(); ++i)
            {
                if (i > 0)
                {
                    out += ',';
                }
                out += escape_field(fields[i]);
            }
            out += '\n';
        }
    }

    std::string render(const CsvTable &table, std::string_view manifest_tag)
    {
        std::string out;
        append_line(out, table.header);
        out += "# manifest: ";
        out += manifest_tag;
        out += '\n';
        for (const auto &row : table.rows)
        {
            append_line(out, row);
        }
        return out;
    }

    std::string sha256_hex(std::string_view bytes)
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
            EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
            EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
        {
            throw std::runtime_error("sha256 failed");
        }
        std::string hex;
        hex.reserve(2 * len);
        for (unsigned int i = 0; i < len; ++i)
        {
            hex += fmt::format("{:02x}", md[i]);
        }
        return hex;
    }
}
