// Command-line front end for the relational-knowledge simulator.
//
//   relq run      — execute a protocol in one of the four modes
//   relq audit    — check an inference chain against a recorded run
//   relq compare  — full-branching vs outside-observer weights, side by side
//   relq export   — write a bundled protocol or inference chain as JSON
//
// Exit codes: 0 success, 1 audit violations found, 2 usage or input errors.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <relq/audit.hpp>
#include <relq/builtins.hpp>
#include <relq/ledger.hpp>
#include <relq/report.hpp>
#include <relq/runner.hpp>

namespace {

using relq::AgentId;
using relq::InferenceChain;
using relq::OutcomePath;
using relq::Protocol;
using relq::ProtocolSpec;
using relq::RunMode;

constexpr const char* kBuiltinPrefix = "builtin:";

bool has_builtin_prefix(const std::string& arg) { return arg.rfind(kBuiltinPrefix, 0) == 0; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw relq::Error("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ProtocolSpec load_protocol(const std::string& arg) {
    if (has_builtin_prefix(arg)) return relq::builtin_protocol(arg.substr(std::string(kBuiltinPrefix).size()));
    return relq::parse_protocol_text(slurp(arg));
}

InferenceChain load_chain(const std::string& arg) {
    if (has_builtin_prefix(arg)) return relq::builtin_chain(arg.substr(std::string(kBuiltinPrefix).size()));
    return relq::parse_chain_text(slurp(arg));
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(csv);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

OutcomePath parse_record(const std::string& csv) {
    OutcomePath out;
    for (const auto& token : split_csv(csv)) {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == token.size())
            throw relq::Error("bad outcome token '" + token + "' (expected measurement=outcome)");
        out.emplace_back(token.substr(0, eq), token.substr(eq + 1));
    }
    return out;
}

// The bundled experiments carry a conventional reference record; files must
// state theirs explicitly.
OutcomePath record_or_default(const std::string& record_csv, const std::string& protocol_arg) {
    if (!record_csv.empty()) return parse_record(record_csv);
    if (has_builtin_prefix(protocol_arg))
        return relq::canonical_record(protocol_arg.substr(std::string(kBuiltinPrefix).size()));
    throw relq::Error("--record is required for protocols loaded from a file");
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw relq::Error("cannot write file '" + out_path + "'");
    out << text;
}

struct RunArgs {
    std::string protocol;
    std::string mode = "exact-collapse";
    std::string record_csv;
    std::string external_csv;
    std::string format = "json";
    std::string out_path;
    std::uint64_t trials = 10000;
    std::uint64_t seed = 1;
};

int cmd_run(const RunArgs& a) {
    const Protocol p = relq::resolve_protocol(load_protocol(a.protocol));
    const bool table = a.format == "table";
    if (a.mode == "exact-collapse" || a.mode == "exact-external") {
        const RunMode mode =
            a.mode == "exact-collapse" ? RunMode::exact_collapse : RunMode::exact_external;
        const auto run = relq::run_exact(p, mode, split_csv(a.external_csv));
        emit(table ? relq::report_exact_table(run) : relq::report_exact_json(run), a.out_path);
        return 0;
    }
    if (a.mode == "sample") {
        const auto run = relq::run_sampled(p, a.trials, a.seed);
        emit(table ? relq::report_sample_table(run) : relq::report_sample_json(run), a.out_path);
        return 0;
    }
    if (a.mode == "record") {
        const auto record = record_or_default(a.record_csv, a.protocol);
        const auto run = relq::record_run(p, record);
        emit(table ? relq::report_record_table(run) : relq::report_record_json(run, record),
             a.out_path);
        return 0;
    }
    throw relq::Error("unknown mode '" + a.mode +
                      "' (expected exact-collapse, exact-external, sample, or record)");
}

struct AuditArgs {
    std::string protocol;
    std::string chain;
    std::string record_csv;
    std::string format = "json";
    std::string out_path;
    bool rebase = false;
};

int cmd_audit(const AuditArgs& a) {
    const Protocol p = relq::resolve_protocol(load_protocol(a.protocol));
    InferenceChain chain = load_chain(a.chain);
    const auto record = record_or_default(a.record_csv, a.protocol);
    const auto run = relq::record_run(p, record);
    if (a.rebase) chain = relq::rebase_to_latest(p, run.ledgers, chain);
    const auto audit = relq::audit_chain(p, run.ledgers, chain);
    emit(a.format == "table" ? relq::report_audit_table(audit) : relq::report_audit_json(audit),
         a.out_path);
    return audit.violations() > 0 ? 1 : 0;
}

struct CompareArgs {
    std::string protocol;
    std::string record_csv;
    std::string external_csv;
    std::string format = "json";
    std::string out_path;
};

int cmd_compare(const CompareArgs& a) {
    const Protocol p = relq::resolve_protocol(load_protocol(a.protocol));
    const auto cmp =
        relq::compare_modes(p, split_csv(a.external_csv), record_or_default(a.record_csv, a.protocol));
    emit(a.format == "table" ? relq::report_compare_table(cmp) : relq::report_compare_json(cmp),
         a.out_path);
    return 0;
}

struct ExportArgs {
    std::string protocol;
    std::string chain;
    std::string out_path;
};

int cmd_export(const ExportArgs& a) {
    if (a.protocol.empty() == a.chain.empty())
        throw relq::Error("export needs exactly one of --protocol or --chain");
    if (!a.protocol.empty())
        emit(relq::serialize_protocol(load_protocol(a.protocol)), a.out_path);
    else
        emit(relq::serialize_chain(load_chain(a.chain)), a.out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relq — agent-relative quantum knowledge simulator"};
    app.require_subcommand(1);

    const std::string protocol_help =
        "protocol JSON file, or builtin:wfr, builtin:wfr-synced, builtin:wigner, builtin:epr";

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "execute a protocol");
    run->add_option("--protocol", run_args.protocol, protocol_help)->required();
    run->add_option("--mode", run_args.mode, "exact-collapse | exact-external | sample | record");
    run->add_option("--trials", run_args.trials, "number of sampling trials (sample mode)");
    run->add_option("--seed", run_args.seed, "base seed for replayable sampling (sample mode)");
    run->add_option("--external-agents", run_args.external_csv,
                    "comma-separated outside observers (exact-external mode)");
    run->add_option("--record", run_args.record_csv,
                    "comma-separated measurement=outcome list (record mode)");
    run->add_option("--format", run_args.format, "json | table");
    run->add_option("--out", run_args.out_path, "write the report here instead of stdout");

    AuditArgs audit_args;
    auto* audit = app.add_subcommand("audit", "check an inference chain against a recorded run");
    audit->add_option("--protocol", audit_args.protocol, protocol_help)->required();
    audit->add_option("--chain", audit_args.chain, "inference-chain JSON file, or builtin:table1")
        ->required();
    audit->add_option("--record", audit_args.record_csv,
                      "realized outcomes (defaults to the builtin reference record)");
    audit->add_flag("--rebase-latest", audit_args.rebase,
                    "restate every claim on the speaker's newest knowledge before checking");
    audit->add_option("--format", audit_args.format, "json | table");
    audit->add_option("--out", audit_args.out_path, "write the report here instead of stdout");

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "full branching vs outside observers, per outcome");
    compare->add_option("--protocol", compare_args.protocol, protocol_help)->required();
    compare->add_option("--record", compare_args.record_csv,
                        "reference outcomes for measurements outsiders cannot see");
    compare->add_option("--external-agents", compare_args.external_csv,
                        "comma-separated outside observers");
    compare->add_option("--format", compare_args.format, "json | table");
    compare->add_option("--out", compare_args.out_path, "write the report here instead of stdout");

    ExportArgs export_args;
    auto* exp = app.add_subcommand("export", "write a bundled definition as editable JSON");
    exp->add_option("--protocol", export_args.protocol, protocol_help);
    exp->add_option("--chain", export_args.chain, "inference-chain name (builtin:table1) or file");
    exp->add_option("--out", export_args.out_path, "write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (audit->parsed()) return cmd_audit(audit_args);
        if (compare->parsed()) return cmd_compare(compare_args);
        if (exp->parsed()) return cmd_export(export_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
