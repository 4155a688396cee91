#pragma once

// Deterministic report rendering. All numbers go through one fixed-format
// writer so that rerunning a deterministic computation reproduces its report
// byte for byte. JSON here is hand-assembled on purpose: key order and float
// formatting are part of the output contract.

#include <cstdio>
#include <string>
#include <vector>

#include "relq/audit.hpp"
#include "relq/ledger.hpp"
#include "relq/runner.hpp"

namespace relq {

namespace detail {

inline std::string fmt_double(double v) {
    if (v == 0.0) v = 0.0;  // never print "-0"
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

inline std::string fmt_u64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
    return out;
}

inline std::string json_string_array(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += json_quote(items[i]);
    }
    out += "]";
    return out;
}

}  // namespace detail

// "measurement=outcome", the one-token spelling used across reports and the
// command line.
inline std::string outcome_token(const std::pair<std::string, std::string>& po) {
    return po.first + "=" + po.second;
}

inline std::vector<std::string> outcome_tokens(const OutcomePath& path) {
    std::vector<std::string> out;
    out.reserve(path.size());
    for (const auto& po : path) out.push_back(outcome_token(po));
    return out;
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

inline std::string report_exact_json(const ExactRunResult& r) {
    std::string out = "{\n  \"mode\": " + detail::json_quote(to_string(r.mode)) + ",\n";
    if (r.mode == RunMode::exact_external) {
        out += "  \"external_agents\": " + detail::json_string_array(r.external_agents) + ",\n";
    }
    out += "  \"tree\": [\n";
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        const auto& n = r.nodes[i];
        out += "    {\"path\": " + detail::json_string_array(outcome_tokens(n.path)) +
               ", \"p_cond\": " + detail::fmt_double(n.p_cond) +
               ", \"p_cum\": " + detail::fmt_double(n.p_cum) + "}";
        out += (i + 1 < r.nodes.size()) ? ",\n" : "\n";
    }
    out += "  ]\n}\n";
    return out;
}

inline std::string report_sample_json(const SampleRunResult& r) {
    std::string out = "{\n  \"mode\": \"sample\",\n  \"seed\": " + detail::fmt_u64(r.seed) +
                      ",\n  \"trials\": " + detail::fmt_u64(r.trials) + ",\n  \"frequencies\": [\n";
    for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
        const auto& [path, count] = r.frequencies[i];
        const double f = r.trials ? static_cast<double>(count) / static_cast<double>(r.trials) : 0.0;
        out += "    {\"record\": " + detail::json_string_array(outcome_tokens(path)) +
               ", \"count\": " + detail::fmt_u64(count) + ", \"frequency\": " + detail::fmt_double(f) + "}";
        out += (i + 1 < r.frequencies.size()) ? ",\n" : "\n";
    }
    out += "  ]\n}\n";
    return out;
}

inline std::string report_audit_json(const AuditResult& r) {
    std::string out = "[\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        out += "  {\"statement_id\": " + detail::json_quote(row.statement_id) +
               ", \"agent\": " + detail::json_quote(row.agent) +
               ", \"verdict\": " + detail::json_quote(to_string(row.verdict)) +
               ", \"used_time\": " + detail::json_quote(row.used_time.str()) +
               ", \"latest_time\": " + detail::json_quote(row.latest_time.str()) +
               ", \"p_used\": " + detail::fmt_double(row.p_used) +
               ", \"p_latest\": " + detail::fmt_double(row.p_latest) + "}";
        out += (i + 1 < r.rows.size()) ? ",\n" : "\n";
    }
    out += "]\n";
    return out;
}

inline std::string report_record_json(const RecordRunResult& r, const OutcomePath& record) {
    std::string out = "{\n  \"mode\": \"record\",\n";
    out += "  \"record\": " + detail::json_string_array(outcome_tokens(record)) + ",\n";
    out += "  \"realized\": [\n";
    for (std::size_t i = 0; i < r.realized.size(); ++i) {
        const auto& o = r.realized[i];
        out += "    {\"measurement\": " + detail::json_quote(o.measurement) +
               ", \"outcome\": " + detail::json_quote(o.outcome) +
               ", \"probability\": " + detail::fmt_double(o.probability) + "}";
        out += (i + 1 < r.realized.size()) ? ",\n" : "\n";
    }
    out += "  ],\n  \"joint_probability\": " + detail::fmt_double(r.joint_probability) + ",\n";
    out += "  \"events\": [\n";
    std::string body;
    for (const auto& ledger : r.ledgers) {
        for (const auto& e : ledger.events()) {
            std::string what = std::string(to_string(e.kind)) + " " + e.name;
            if (!e.outcome.empty()) what += "=" + e.outcome;
            double norm2 = 0.0;
            std::string amps = "[";
            for (std::size_t k = 0; k < e.state.amps.size(); ++k) {
                const auto a = e.state.amps[k];
                norm2 += std::norm(a);
                if (k) amps += ", ";
                amps += "[" + detail::fmt_double(a.real()) + ", " + detail::fmt_double(a.imag()) + "]";
            }
            amps += "]";
            if (!body.empty()) body += ",\n";
            body += "    {\"agent\": " + detail::json_quote(ledger.agent()) +
                    ", \"time\": " + detail::json_quote(e.time.str()) +
                    ", \"event\": " + detail::json_quote(what) +
                    ", \"state_norm_check\": " + detail::fmt_double(norm2) +
                    ", \"amplitudes\": " + amps + "}";
        }
    }
    out += body + "\n  ]\n}\n";
    return out;
}

inline std::string report_compare_json(const CompareResult& r) {
    std::string out = "{\n  \"external_agents\": " + detail::json_string_array(r.external_agents) + ",\n";
    out += "  \"record\": " + detail::json_string_array(outcome_tokens(r.record)) + ",\n";
    out += "  \"rows\": [\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        out += "    {\"combo\": " + detail::json_string_array(outcome_tokens(row.combo)) +
               ", \"p_external\": " + detail::fmt_double(row.p_external) +
               ", \"p_collapse_path\": " + detail::fmt_double(row.p_collapse_path) +
               ", \"p_collapse_total\": " + detail::fmt_double(row.p_collapse_total) +
               ", \"gap\": " + detail::fmt_double(row.gap) + "}";
        out += (i + 1 < r.rows.size()) ? ",\n" : "\n";
    }
    out += "  ]\n}\n";
    return out;
}

// ---------------------------------------------------------------------------
// Plain-text tables
// ---------------------------------------------------------------------------

namespace detail {

inline std::string join_tokens(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out.empty() ? "(root)" : out;
}

}  // namespace detail

inline std::string report_exact_table(const ExactRunResult& r) {
    std::string out = std::string("mode: ") + to_string(r.mode) + "\n";
    if (r.mode == RunMode::exact_external) {
        out += "external agents: " + detail::join_tokens(r.external_agents) + "\n";
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-52s %18s %18s\n", "path", "p_cond", "p_cum");
    out += buf;
    for (const auto& n : r.nodes) {
        std::snprintf(buf, sizeof buf, "%-52s %18.12f %18.12f\n",
                      detail::join_tokens(outcome_tokens(n.path)).c_str(), n.p_cond, n.p_cum);
        out += buf;
    }
    return out;
}

inline std::string report_sample_table(const SampleRunResult& r) {
    std::string out = "mode: sample\nseed: " + detail::fmt_u64(r.seed) +
                      "\ntrials: " + detail::fmt_u64(r.trials) + "\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-52s %10s %12s\n", "record", "count", "frequency");
    out += buf;
    for (const auto& [path, count] : r.frequencies) {
        const double f = r.trials ? static_cast<double>(count) / static_cast<double>(r.trials) : 0.0;
        std::snprintf(buf, sizeof buf, "%-52s %10llu %12.6f\n",
                      detail::join_tokens(outcome_tokens(path)).c_str(),
                      static_cast<unsigned long long>(count), f);
        out += buf;
    }
    return out;
}

inline std::string report_audit_table(const AuditResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-6s %-8s %-9s %-11s %14s %14s\n", "statement", "agent",
                  "verdict", "used", "latest", "p_used", "p_latest");
    std::string out = buf;
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%-12s %-6s %-8s %-9s %-11s %14.9f %14.9f\n",
                      row.statement_id.c_str(), row.agent.c_str(), to_string(row.verdict),
                      row.used_time.str().c_str(), row.latest_time.str().c_str(), row.p_used,
                      row.p_latest);
        out += buf;
        if (row.verdict != Verdict::ok) out += "    " + row.detail + "\n";
    }
    std::snprintf(buf, sizeof buf, "violations: %d of %zu\n", r.violations(), r.rows.size());
    out += buf;
    return out;
}

inline std::string report_compare_table(const CompareResult& r) {
    std::string out = "external agents: " + detail::join_tokens(r.external_agents) + "\n";
    out += "reference record: " + detail::join_tokens(outcome_tokens(r.record)) + "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s %14s %16s %17s %12s\n", "combo", "p_external",
                  "p_collapse_path", "p_collapse_total", "gap");
    out += buf;
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%-28s %14.9f %16.9f %17.9f %12.9f\n",
                      detail::join_tokens(outcome_tokens(row.combo)).c_str(), row.p_external,
                      row.p_collapse_path, row.p_collapse_total, row.gap);
        out += buf;
    }
    return out;
}

inline std::string report_record_table(const RecordRunResult& r) {
    std::string out = "mode: record\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-10s %14s\n", "measurement", "outcome", "probability");
    out += buf;
    for (const auto& o : r.realized) {
        std::snprintf(buf, sizeof buf, "%-16s %-10s %14.9f\n", o.measurement.c_str(),
                      o.outcome.c_str(), o.probability);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "joint probability: %.12f\n", r.joint_probability);
    out += buf;
    out += "\nknowledge events:\n";
    std::snprintf(buf, sizeof buf, "%-8s %-7s %-40s %12s\n", "agent", "time", "event", "norm^2");
    out += buf;
    for (const auto& ledger : r.ledgers) {
        for (const auto& e : ledger.events()) {
            std::string what = std::string(to_string(e.kind)) + " " + e.name;
            if (!e.outcome.empty()) what += "=" + e.outcome;
            double norm2 = 0.0;
            for (const auto a : e.state.amps) norm2 += std::norm(a);
            std::snprintf(buf, sizeof buf, "%-8s %-7s %-40s %12.9f\n", ledger.agent().c_str(),
                          e.time.str().c_str(), what.c_str(), norm2);
            out += buf;
        }
    }
    return out;
}

}  // namespace relq
