#include "urllc/report/scenario.hpp"

#include "urllc/fbl/normal_approx.hpp"
#include "urllc/report/csv.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace urllc::report
{
    using json = nlohmann::json;
    using ojson = nlohmann::ordered_json;

    namespace
    {
        constexpr std::array<std::pair<Subcommand, std::string_view>, 6> subcommand_names{{
            {Subcommand::Budget, "budget"},
            {Subcommand::Ppv, "ppv"},
            {Subcommand::Afc, "afc"},
            {Subcommand::Ma, "ma"},
            {Subcommand::Slice, "slice"},
            {Subcommand::Chanest, "chanest"},
        }};

        std::string describe(ScenarioError::Kind kind, const std::string &key, const std::string &message)
        {
            if (key.empty())
            {
                return fmt::format("{} error: {}", to_string(kind), message);
            }
            return fmt::format("{} error at '{}': {}", to_string(kind), key, message);
        }
    }

    std::string_view to_string(Subcommand c) noexcept
    {
        for (const auto &[value, name] : subcommand_names)
        {
            if (value == c)
            {
                return name;
            }
        }
        return "unknown";
    }

    std::optional<Subcommand> parse_subcommand(std::string_view text) noexcept
    {
        for (const auto &[value, name] : subcommand_names)
        {
            if (name == text)
            {
                return value;
            }
        }
        return std::nullopt;
    }

    ScenarioError::ScenarioError(Kind kind, std::string key, const std::string &message)
        : std::invalid_argument(describe(kind, key, message)), m_kind(kind), m_key(std::move(key))
    {
    }

    std::string_view to_string(ScenarioError::Kind k) noexcept
    {
        switch (k)
        {
        case ScenarioError::Kind::Parse:
            return "parse";
        case ScenarioError::Kind::UnknownKey:
            return "unknown-key";
        case ScenarioError::Kind::Type:
            return "type";
        case ScenarioError::Kind::Range:
            return "range";
        }
        return "unknown";
    }

    afc::AfcParams AfcConfig::effective_params() const
    {
        afc::AfcParams p = params;
        p.weights = weights.empty() ? afc::default_weights(std::clamp(p.degree, 1, afc::max_degree)) : weights;
        return p;
    }

    // -- Codecs ----------------------------------------------------------------------------

    namespace
    {
        using Kind = ScenarioError::Kind;

        [[noreturn]] void type_error(const std::string &key, std::string_view expected, const json &j)
        {
            throw ScenarioError(Kind::Type, key, fmt::format("expected {}, got {}", expected, j.dump()));
        }

        void decode(const json &j, const std::string &key, double &out)
        {
            if (!j.is_number())
            {
                type_error(key, "a number", j);
            }
            out = j.get<double>();
        }

        void decode(const json &j, const std::string &key, std::int64_t &out)
        {
            if (j.is_number_unsigned())
            {
                if (j.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
                {
                    throw ScenarioError(Kind::Range, key, "integer too large");
                }
                out = static_cast<std::int64_t>(j.get<std::uint64_t>());
                return;
            }
            if (!j.is_number_integer())
            {
                type_error(key, "an integer", j);
            }
            out = j.get<std::int64_t>();
        }

        void decode(const json &j, const std::string &key, int &out)
        {
            std::int64_t wide = 0;
            decode(j, key, wide);
            if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max())
            {
                throw ScenarioError(Kind::Range, key, fmt::format("{} does not fit a 32-bit integer", wide));
            }
            out = static_cast<int>(wide);
        }

        void decode(const json &j, const std::string &key, std::uint64_t &out)
        {
            if (j.is_number_unsigned())
            {
                out = j.get<std::uint64_t>();
                return;
            }
            if (j.is_number_integer())
            {
                throw ScenarioError(Kind::Range, key, "must be non-negative");
            }
            type_error(key, "a non-negative integer", j);
        }

        void decode(const json &j, const std::string &key, bool &out)
        {
            if (!j.is_boolean())
            {
                type_error(key, "true or false", j);
            }
            out = j.get<bool>();
        }

        void decode(const json &j, const std::string &key, std::string &out)
        {
            if (!j.is_string())
            {
                type_error(key, "a string", j);
            }
            out = j.get<std::string>();
        }

        void decode(const json &j, const std::string &key, budget::Millis &out)
        {
            std::string text;
            if (j.is_string())
            {
                text = j.get<std::string>();
            }
            else if (j.is_number())
            {
                text = j.is_number_float() ? format_number(j.get<double>()) : j.dump();
            }
            else
            {
                type_error(key, "milliseconds as a number or decimal string", j);
            }
            try
            {
                out = budget::parse_millis(text);
            }
            catch (const std::exception &e)
            {
                throw ScenarioError(Kind::Range, key, e.what());
            }
        }

        void decode(const json &j, const std::string &key, std::optional<double> &out)
        {
            if (j.is_null())
            {
                out.reset();
                return;
            }
            double v = 0.0;
            decode(j, key, v);
            out = v;
        }

        void decode(const json &j, const std::string &key, Subcommand &out)
        {
            std::string text;
            decode(j, key, text);
            const auto c = parse_subcommand(text);
            if (!c)
            {
                throw ScenarioError(Kind::Range, key,
                                    fmt::format("unknown subcommand '{}' (budget, ppv, afc, ma, slice, chanest)", text));
            }
            out = *c;
        }

        void decode(const json &j, const std::string &key, budget::Bandwidth &out)
        {
            std::string text;
            if (j.is_number())
            {
                text = j.is_number_float() ? format_number(j.get<double>()) : j.dump();
            }
            else
            {
                decode(j, key, text);
            }
            try
            {
                out = budget::parse_bandwidth(text);
            }
            catch (const std::exception &e)
            {
                throw ScenarioError(Kind::Range, key, e.what());
            }
        }

        void decode(const json &j, const std::string &key, slicing::SizeLaw &out)
        {
            std::string text;
            decode(j, key, text);
            if (text == "fixed")
            {
                out = slicing::SizeLaw::Fixed;
            }
            else if (text == "exponential")
            {
                out = slicing::SizeLaw::Exponential;
            }
            else
            {
                throw ScenarioError(Kind::Range, key, fmt::format("unknown size law '{}' (fixed, exponential)", text));
            }
        }

        void decode(const json &j, const std::string &key, access::ArrivalModel &out)
        {
            std::string text;
            decode(j, key, text);
            if (text == "batch")
            {
                out = access::ArrivalModel::BatchAtZero;
            }
            else if (text == "poisson")
            {
                out = access::ArrivalModel::Poisson;
            }
            else
            {
                throw ScenarioError(Kind::Range, key, fmt::format("unknown arrival model '{}' (batch, poisson)", text));
            }
        }

        void decode(const json &j, const std::string &key, chanest::Method &out)
        {
            std::string text;
            decode(j, key, text);
            try
            {
                out = chanest::parse_method(text);
            }
            catch (const std::exception &e)
            {
                throw ScenarioError(Kind::Range, key, e.what());
            }
        }

        template <class T>
        void decode(const json &j, const std::string &key, std::vector<T> &out)
        {
            if (!j.is_array())
            {
                type_error(key, "an array", j);
            }
            std::vector<T> values(j.size());
            for (std::size_t i = 0; i < j.size(); ++i)
            {
                decode(j[i], fmt::format("{}[{}]", key, i), values[i]);
            }
            out = std::move(values);
        }

        // Policies are strings or {"quota_its": q, "lending": b}; the object form
        // is normalized to "custom:<q>" so it serializes back as a string.
        struct PolicyList
        {
            std::vector<std::string> &items;
        };

        void decode(const json &j, const std::string &key, PolicyList out)
        {
            if (!j.is_array())
            {
                type_error(key, "an array", j);
            }
            std::vector<std::string> values;
            for (std::size_t i = 0; i < j.size(); ++i)
            {
                const std::string item_key = fmt::format("{}[{}]", key, i);
                const json &e = j[i];
                if (e.is_string())
                {
                    values.push_back(e.get<std::string>());
                    continue;
                }
                if (!e.is_object())
                {
                    type_error(item_key, "a policy string or object", e);
                }
                double q = 0.0;
                bool lending = true;
                for (const auto &[k, v] : e.items())
                {
                    if (k == "quota_its")
                    {
                        decode(v, item_key + ".quota_its", q);
                    }
                    else if (k == "lending")
                    {
                        decode(v, item_key + ".lending", lending);
                    }
                    else
                    {
                        throw ScenarioError(Kind::UnknownKey, item_key + "." + k, "unknown key");
                    }
                }
                if (!e.contains("quota_its"))
                {
                    throw ScenarioError(Kind::Type, item_key, "policy object needs quota_its");
                }
                values.push_back(fmt::format("custom:{}{}", format_number(q), lending ? "" : "/nolend"));
            }
            out.items = std::move(values);
        }

        ojson encode(double v) { return v; }
        ojson encode(int v) { return v; }
        ojson encode(std::int64_t v) { return v; }
        ojson encode(std::uint64_t v) { return v; }
        ojson encode(bool v) { return v; }
        ojson encode(const std::string &v) { return v; }
        ojson encode(const budget::Millis &v) { return budget::format_millis(v); }
        ojson encode(const std::optional<double> &v) { return v ? ojson(*v) : ojson(nullptr); }
        ojson encode(Subcommand v) { return std::string(to_string(v)); }
        ojson encode(budget::Bandwidth v)
        {
            std::string s(budget::to_string(v));
            return s.substr(0, s.size() - 3);
        }
        ojson encode(slicing::SizeLaw v) { return v == slicing::SizeLaw::Fixed ? "fixed" : "exponential"; }
        ojson encode(access::ArrivalModel v) { return v == access::ArrivalModel::Poisson ? "poisson" : "batch"; }
        ojson encode(chanest::Method v) { return std::string(chanest::to_string(v)); }
        ojson encode(PolicyList v) { return v.items; }

        template <class T>
        ojson encode(const std::vector<T> &v)
        {
            ojson a = ojson::array();
            for (const auto &x : v)
            {
                a.push_back(encode(x));
            }
            return a;
        }

        // -- Visitors ----------------------------------------------------------------------

        class Reader
        {
        public:
            Reader(const json &j, std::string path) : m_j(j), m_path(std::move(path))
            {
                if (!m_j.is_object())
                {
                    type_error(m_path.empty() ? "<root>" : m_path, "an object", m_j);
                }
            }

            template <class T>
            void operator()(const char *key, T &&out)
            {
                if (const auto it = m_j.find(key); it != m_j.end())
                {
                    m_seen.insert(key);
                    decode(*it, join(key), std::forward<T>(out));
                }
            }

            template <class F>
            void object(const char *key, F &&fields)
            {
                if (const auto it = m_j.find(key); it != m_j.end())
                {
                    m_seen.insert(key);
                    Reader child(*it, join(key));
                    fields(child);
                    child.finish();
                }
            }

            void finish() const
            {
                for (const auto &[k, v] : m_j.items())
                {
                    if (!m_seen.contains(k))
                    {
                        throw ScenarioError(Kind::UnknownKey, join(k.c_str()), "unknown key");
                    }
                }
            }

        private:
            std::string join(const char *key) const { return m_path.empty() ? key : m_path + "." + key; }

            const json &m_j;
            std::string m_path;
            std::set<std::string, std::less<>> m_seen;
        };

        class Writer
        {
        public:
            explicit Writer(ojson &j) : m_j(j) {}

            template <class T>
            void operator()(const char *key, const T &value)
            {
                m_j[key] = encode(value);
            }

            template <class F>
            void object(const char *key, F &&fields)
            {
                ojson child = ojson::object();
                Writer w(child);
                fields(w);
                m_j[key] = std::move(child);
            }

        private:
            ojson &m_j;
        };

        template <class V>
        void visit_class(V &v, slicing::ServiceClass &c)
        {
            v("device_count_mean", c.device_count_mean);
            v("packet_bytes", c.packet_bytes);
            v("interval_ms", c.interval_ms);
            v("size_law", c.size_law);
        }

        template <class V>
        void visit(V &v, Scenario &s)
        {
            v("schema_version", s.schema);
            v("subcommand", s.subcommand);
            v("seed", s.seed);
            v("out", s.out);
            v.object("budget", [&](auto &b) {
                auto &c = s.budget;
                b("sr_wait_ms", c.uplink.sr_wait);
                b("tti_ms", c.uplink.tti);
                b("proc_ms", c.uplink.proc);
                b("dl_proc_in_ms", c.downlink.proc_in);
                b("dl_tti_align_ms", c.downlink.tti_align);
                b("dl_tti_ms", c.downlink.tti);
                b("dl_ue_proc_ms", c.downlink.ue_proc);
                b("harq_retx", c.harq_retx);
                b("core_network_ms", c.core_network_ms);
            });
            v.object("ppv", [&](auto &b) {
                auto &c = s.ppv;
                b("snr_db", c.snr_db);
                b("eps", c.eps);
                b("n_lo", c.n_lo);
                b("n_hi", c.n_hi);
                b("n_step", c.n_step);
                b("log_term", c.log_term);
            });
            v.object("afc", [&](auto &b) {
                auto &c = s.afc;
                b("k", c.params.k);
                b("degree", c.params.degree);
                b("weights", c.weights);
                b("max_symbols", c.params.max_symbols);
                b("bp_iters", c.params.bp_iters);
                b("batch_size", c.params.batch_size);
                b("llr_clamp", c.params.llr_clamp);
                b("convergence_tol", c.params.convergence_tol);
                b("skip_below_capacity", c.params.skip_below_capacity);
                b("snr_db_list", c.snr_db_list);
                b("seeds", c.seeds);
                b("feedback_loss", c.feedback_loss);
                b("overlay_eps", c.overlay_eps);
            });
            v.object("ma", [&](auto &b) {
                auto &c = s.ma;
                auto &m = c.scenario;
                b("devices", c.devices);
                b("scheme", c.scheme);
                b("seeds", c.seeds);
                b("subbands", m.subbands);
                b("bandwidth_hz", m.bandwidth_hz);
                b("payload_bits", m.payload_bits);
                b("snr", m.snr);
                b("slot_ms", m.slot_ms);
                b("backoff_window", m.backoff_window);
                b("max_slots", m.max_slots);
                b("arrival", m.arrival);
                b("arrival_rate_per_ms", m.arrival_rate_per_ms);
                b("oma_grant_overhead_ms", m.oma_grant_overhead_ms);
            });
            v.object("slice", [&](auto &b) {
                auto &c = s.slice;
                auto &m = c.scenario;
                b("policies", PolicyList{c.policies});
                b("seeds", c.seeds);
                b("duration_ms", m.duration_ms);
                b("warmup_fraction", m.warmup_fraction);
                b("area_side_km", m.area_side_km);
                b("sr_wait_max_ms", m.sr_wait_max_ms);
                b("queue_cap", m.queue_cap);
                b("legacy_min_rbs", m.legacy_min_rbs);
                b("core_network_ms", m.core_network_ms);
                b.object("its", [&](auto &x) { visit_class(x, m.classes[0]); });
                b.object("sg", [&](auto &x) { visit_class(x, m.classes[1]); });
                b.object("cell", [&](auto &x) {
                    x("rbs", m.cell.rbs);
                    x("rb_hz", m.cell.rb_hz);
                });
                b.object("link", [&](auto &x) {
                    auto &l = m.link;
                    x("tx_power_dbm", l.tx_power_dbm);
                    x("pathloss_a_db", l.pathloss_a_db);
                    x("pathloss_b_db", l.pathloss_b_db);
                    x("noise_dbm_per_hz", l.noise_dbm_per_hz);
                    x("noise_figure_db", l.noise_figure_db);
                    x("extra_loss_db", l.extra_loss_db);
                    x("reference_rbs", l.reference_rbs);
                    x("se_max", l.se_max);
                    x("se_min", l.se_min);
                });
            });
            v.object("chanest", [&](auto &b) {
                auto &c = s.chanest;
                b("bandwidth", c.bandwidth);
                b("snr_db", c.snr_db);
                b("seeds", c.seeds);
                b("repetitions", c.repetitions);
                b("methods", c.methods);
                b("mmse_doppler_hz", c.mmse_doppler_hz);
                b.object("channel", [&](auto &x) {
                    x("taps", c.model.taps);
                    x("tap_spacing_s", c.model.tap_spacing_s);
                    x("decay_s", c.model.decay_s);
                    x("doppler_hz", c.model.doppler_hz);
                    x("sinusoids", c.model.sinusoids);
                });
            });
        }

        // -- Validation --------------------------------------------------------------------

        void require(bool ok, const std::string &key, const std::string &message)
        {
            if (!ok)
            {
                throw ScenarioError(Kind::Range, key, message);
            }
        }

        template <class F>
        void check_module(const std::string &key, F &&fn)
        {
            try
            {
                fn();
            }
            catch (const ScenarioError &)
            {
                throw;
            }
            catch (const std::exception &e)
            {
                throw ScenarioError(Kind::Range, key, e.what());
            }
        }

        bool finite(double v) { return std::isfinite(v); }
    }

    void validate(const Scenario &s)
    {
        require(s.schema == schema_version, "schema_version",
                fmt::format("unsupported schema version {} (expected {})", s.schema, schema_version));
        require(!s.out.empty(), "out", "output directory must be non-empty");

        require(s.budget.harq_retx >= 0, "budget.harq_retx", "must be >= 0");

        const auto &p = s.ppv;
        require(finite(p.snr_db), "ppv.snr_db", "must be finite");
        require(p.eps > 0.0 && p.eps < 0.5, "ppv.eps", "must lie in (0, 0.5)");
        require(p.n_lo >= 1, "ppv.n_lo", "must be >= 1");
        require(p.n_hi >= p.n_lo, "ppv.n_hi", "must be >= n_lo");
        require(p.n_step >= 1, "ppv.n_step", "must be >= 1");
        require((p.n_hi - p.n_lo) / p.n_step < 1'000'000, "ppv.n_step", "sweep exceeds 10^6 points");

        const auto &a = s.afc;
        check_module("afc", [&] { afc::validate(a.effective_params()); });
        require(!a.snr_db_list.empty(), "afc.snr_db_list", "must be non-empty");
        for (std::size_t i = 0; i < a.snr_db_list.size(); ++i)
        {
            require(finite(a.snr_db_list[i]), fmt::format("afc.snr_db_list[{}]", i), "must be finite");
        }
        require(a.seeds >= 1, "afc.seeds", "must be >= 1");
        require(a.feedback_loss >= 0.0 && a.feedback_loss <= 1.0, "afc.feedback_loss", "must lie in [0, 1]");
        require(a.overlay_eps > 0.0 && a.overlay_eps < 0.5, "afc.overlay_eps", "must lie in (0, 0.5)");

        const auto &m = s.ma;
        require(!m.devices.empty(), "ma.devices", "must be non-empty");
        for (std::size_t i = 0; i < m.devices.size(); ++i)
        {
            const auto key = fmt::format("ma.devices[{}]", i);
            require(m.devices[i] >= 1, key, "must be >= 1");
            require(i == 0 || m.devices[i] > m.devices[i - 1], key, "device counts must be strictly ascending");
        }
        check_module("ma", [&] {
            auto t = m.scenario;
            t.devices = m.devices.front();
            access::validate(t);
        });
        require(m.scheme == "oma" || m.scheme == "noma" || m.scheme == "both", "ma.scheme",
                fmt::format("unknown scheme '{}' (oma, noma, both)", m.scheme));
        require(m.seeds >= 1, "ma.seeds", "must be >= 1");

        const auto &sl = s.slice;
        check_module("slice", [&] { slicing::validate(sl.scenario); });
        require(!sl.policies.empty(), "slice.policies", "must be non-empty");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < sl.policies.size(); ++i)
        {
            const auto key = fmt::format("slice.policies[{}]", i);
            try
            {
                slicing::parse_policy(sl.policies[i]);
            }
            catch (const std::exception &e)
            {
                throw ScenarioError(Kind::Range, key, fmt::format("{} (SlicePolicy invariant)", e.what()));
            }
            require(seen.insert(sl.policies[i]).second, key, fmt::format("duplicate policy '{}'", sl.policies[i]));
        }
        require(sl.seeds >= 1, "slice.seeds", "must be >= 1");

        const auto &c = s.chanest;
        check_module("chanest.channel", [&] { chanest::validate(c.model); });
        require(finite(c.snr_db), "chanest.snr_db", "must be finite");
        require(!c.mmse_doppler_hz || (finite(*c.mmse_doppler_hz) && *c.mmse_doppler_hz >= 0.0),
                "chanest.mmse_doppler_hz", "must be finite and >= 0");
        require(!c.methods.empty(), "chanest.methods", "must be non-empty");
        for (std::size_t i = 0; i < c.methods.size(); ++i)
        {
            for (std::size_t j = 0; j < i; ++j)
            {
                require(c.methods[i] != c.methods[j], fmt::format("chanest.methods[{}]", i), "duplicate method");
            }
        }
        require(c.seeds >= 1, "chanest.seeds", "must be >= 1");
        require(c.repetitions >= 5, "chanest.repetitions", "timing needs at least 5 repetitions");
    }

    Scenario parse_scenario(std::string_view text)
    {
        Scenario s;
        if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        {
            return s;
        }
        json j;
        try
        {
            j = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            // Line and column of the failing byte (1-based).
            const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
            std::size_t line = 1, col = 1;
            for (std::size_t i = 0; i < at; ++i)
            {
                if (text[i] == '\n')
                {
                    ++line;
                    col = 1;
                }
                else
                {
                    ++col;
                }
            }
            throw ScenarioError(Kind::Parse, "", fmt::format("line {}, column {}: {}", line, col, e.what()));
        }
        Reader r(j, "");
        visit(r, s);
        r.finish();
        validate(s);
        return s;
    }

    Scenario load_scenario(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw ScenarioError(Kind::Parse, "", fmt::format("cannot read '{}'", path.string()));
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_scenario(buf.str());
    }

    std::string serialize(const Scenario &s, int indent)
    {
        Scenario copy = s;
        ojson j = ojson::object();
        Writer w(j);
        visit(w, copy);
        return j.dump(indent);
    }

    std::string scenario_hash(const Scenario &s)
    {
        // Where the files go does not change what is in them.
        Scenario copy = s;
        copy.out.clear();
        return sha256_hex(serialize(copy, -1));
    }
}
