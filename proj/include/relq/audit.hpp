#pragma once

// Consistency audit for chains of agent statements. Each statement asserts a
// probability for a future measurement outcome, starting from a ledger entry
// (its basis), pushing the state through declared future operations, and
// ending at the claimed outcome's projector.
//
// Two ways a statement can be unsound:
//   rule 1 — it borrows another agent's ledger entry that encodes outcome
//            knowledge never announced to the speaker and not implied with
//            certainty by the speaker's own current description;
//   rule 2 — the speaker's own ledger has a newer entry than the basis, and
//            re-evaluating from it (dropping operations the newer entry has
//            already absorbed) changes the probability.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relq/ledger.hpp"

namespace relq {

enum class Verdict { ok, rule1, rule2 };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::ok: return "ok";
        case Verdict::rule1: return "rule1";
        case Verdict::rule2: return "rule2";
    }
    return "?";
}

enum class AssertionKind { own, reports_other };

inline const char* to_string(AssertionKind k) {
    return k == AssertionKind::own ? "own" : "reports_other";
}

struct TimedUnitary {
    std::string step;  // protocol step name
    TimeStamp time;
    bool operator==(const TimedUnitary&) const = default;
};

struct TimedProjector {
    std::string measurement;
    std::string outcome;
    TimeStamp time;
    bool operator==(const TimedProjector&) const = default;
};

struct FutureOp {
    std::optional<TimedUnitary> unitary;
    std::optional<TimedProjector> projector;  // applied after the unitary
    bool operator==(const FutureOp&) const = default;
};

struct ClaimSpec {
    std::string measurement;
    std::string outcome;
    double probability = 0.0;
    bool operator==(const ClaimSpec&) const = default;
};

struct InferenceStatement {
    std::string id;
    AgentId agent;        // who makes the statement
    TimeStamp stated_at;  // when it is made
    AgentId basis_agent;  // whose ledger entry it starts from
    TimeStamp basis_time;
    AssertionKind kind = AssertionKind::own;
    std::string adopted_from;  // statement id this one relays (reports_other)
    std::vector<FutureOp> ops;
    ClaimSpec claim;
    bool operator==(const InferenceStatement&) const = default;
};

using InferenceChain = std::vector<InferenceStatement>;

struct AuditRow {
    std::string statement_id;
    AgentId agent;
    Verdict verdict = Verdict::ok;
    TimeStamp used_time;    // time of the basis entry actually used
    TimeStamp latest_time;  // newest own entry considered (or check time for rule 1)
    double p_used = 0.0;    // claim probability from the stated basis
    double p_latest = 0.0;  // claim probability from the newest knowledge
    std::string detail;
};

struct AuditResult {
    std::vector<AuditRow> rows;
    int violations() const {
        int n = 0;
        for (const auto& r : rows)
            if (r.verdict != Verdict::ok) ++n;
        return n;
    }
};

struct AuditOptions {
    double tol = 1e-10;        // probability difference that counts as a change
    double certainty = 1e-10;  // slack allowed on retrodicted certainty
};

// ---------------------------------------------------------------------------
// Lookups and evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline const LinearOp& find_unitary(const Protocol& p, const std::string& step_name) {
    for (const auto& st : p.steps)
        if (st.kind == StepKind::unitary && st.name == step_name) return *st.op;
    throw Error("audit: protocol has no unitary step named '" + step_name + "'");
}

inline const ProjectiveMeasurement& find_measurement(const Protocol& p, const std::string& name) {
    for (const auto& st : p.steps)
        if (st.kind == StepKind::measure && st.name == name) return *st.measurement;
    throw Error("audit: protocol has no measurement named '" + name + "'");
}

inline const ObserverLedger& find_ledger(const std::vector<ObserverLedger>& ledgers, const AgentId& a) {
    for (const auto& l : ledgers)
        if (l.agent() == a) return l;
    throw Error("audit: no ledger for agent '" + a + "'");
}

}  // namespace detail

// Joint probability of the claimed outcome, starting from a basis state and
// passing through the declared future operations in order.
inline double evaluate_claim(const Protocol& p, const StateVector& basis, const std::vector<FutureOp>& ops,
                             const ClaimSpec& claim) {
    std::vector<SequentialStep> steps;
    for (const auto& op : ops) {
        SequentialStep s;
        if (op.unitary) s.unitary = detail::find_unitary(p, op.unitary->step);
        if (op.projector)
            s.projector = detail::find_measurement(p, op.projector->measurement).projector(op.projector->outcome);
        if (!s.unitary && !s.projector) throw Error("audit: empty future operation");
        steps.push_back(std::move(s));
    }
    steps.push_back({std::nullopt, detail::find_measurement(p, claim.measurement).projector(claim.outcome)});
    return sequential_joint(basis, steps).probability;
}

// Remove future operations that a ledger entry at (or before) `upto` has
// already absorbed: evolutions by step name, outcomes by measurement+label.
inline std::vector<FutureOp> drop_incorporated(const ObserverLedger& l, TimeStamp upto,
                                               const std::vector<FutureOp>& ops) {
    std::vector<FutureOp> out;
    for (const auto& op : ops) {
        FutureOp kept;
        if (op.unitary) {
            bool absorbed = false;
            for (const auto& e : l.events())
                if (e.time <= upto && e.kind == EventKind::modeled_unitary && e.name == op.unitary->step)
                    absorbed = true;
            if (!absorbed) kept.unitary = op.unitary;
        }
        if (op.projector) {
            bool absorbed = false;
            for (const auto& e : l.events())
                if (e.time <= upto && e.kind != EventKind::modeled_unitary &&
                    e.name == op.projector->measurement && e.outcome == op.projector->outcome)
                    absorbed = true;
            if (!absorbed) kept.projector = op.projector;
        }
        if (kept.unitary || kept.projector) out.push_back(std::move(kept));
    }
    return out;
}

inline AuditResult audit_chain(const Protocol& p, const std::vector<ObserverLedger>& ledgers,
                               const InferenceChain& chain, AuditOptions opt = {}) {
    AuditResult res;
    for (const auto& st : chain) {
        const ObserverLedger& basis_ledger = detail::find_ledger(ledgers, st.basis_agent);
        const ObserverLedger& own_ledger = detail::find_ledger(ledgers, st.agent);
        const KnowledgeEvent& basis = basis_ledger.latest_at(st.basis_time);

        AuditRow row;
        row.statement_id = st.id;
        row.agent = st.agent;
        row.used_time = basis.time;
        row.latest_time = basis.time;
        row.p_used = evaluate_claim(p, basis.state, st.ops, st.claim);
        row.p_latest = row.p_used;

        // Rule 1: a borrowed entry must not smuggle in unannounced outcomes.
        if (st.basis_agent != st.agent) {
            for (const auto& e : basis_ledger.events()) {
                if (st.basis_time < e.time) break;
                if (e.kind == EventKind::modeled_unitary) continue;
                bool announced = false;
                for (const auto& own : own_ledger.events())
                    if (own.time <= st.stated_at && own.kind != EventKind::modeled_unitary &&
                        own.name == e.name && own.outcome == e.outcome)
                        announced = true;
                if (announced) continue;
                const double retro = born_probability(
                    own_ledger.state_at(st.stated_at),
                    detail::find_measurement(p, e.name).projector(e.outcome));
                if (retro < 1.0 - opt.certainty) {
                    row.verdict = Verdict::rule1;
                    row.latest_time = st.stated_at;
                    row.p_latest = retro;
                    row.detail = "basis borrows '" + e.name + "=" + e.outcome + "' (" + e.time.str() +
                                 ") from " + st.basis_agent + ", never announced to " + st.agent +
                                 " and not certain from its own description";
                    break;
                }
            }
        }

        // Rule 2: the speaker's own newer knowledge must not change the claim.
        if (row.verdict == Verdict::ok && st.kind == AssertionKind::own) {
            const KnowledgeEvent& latest = own_ledger.latest_at(st.stated_at);
            if (st.basis_time < latest.time) {
                const auto kept = drop_incorporated(own_ledger, latest.time, st.ops);
                row.latest_time = latest.time;
                row.p_latest = evaluate_claim(p, latest.state, kept, st.claim);
                if (std::abs(row.p_latest - row.p_used) > opt.tol) {
                    row.verdict = Verdict::rule2;
                    row.detail = "stated from the " + basis.time.str() + " entry while own ledger has a " +
                                 latest.time.str() + " entry that shifts the claim from " +
                                 std::to_string(row.p_used) + " to " + std::to_string(row.p_latest);
                }
            }
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

// Restate every statement from its speaker's newest ledger entry, dropping
// already-absorbed operations and refreshing the claimed probability.
inline InferenceChain rebase_to_latest(const Protocol& p, const std::vector<ObserverLedger>& ledgers,
                                       InferenceChain chain) {
    for (auto& st : chain) {
        const ObserverLedger& own = detail::find_ledger(ledgers, st.agent);
        const KnowledgeEvent& latest = own.latest_at(st.stated_at);
        st.basis_agent = st.agent;
        st.basis_time = latest.time;
        st.ops = drop_incorporated(own, latest.time, st.ops);
        st.claim.probability = evaluate_claim(p, latest.state, st.ops, st.claim);
    }
    return chain;
}

// ---------------------------------------------------------------------------
// Chain files
// ---------------------------------------------------------------------------

inline InferenceChain parse_chain_text(const std::string& text) {
    using detail::ordered_json;
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("chain syntax: ") + e.what());
    }
    detail::require_keys(j, "top level", {"statements"});
    if (!j["statements"].is_array()) detail::parse_fail("statements", "expected an array");

    InferenceChain chain;
    int i = 0;
    for (const auto& s : j["statements"]) {
        const std::string ctx = "statements[" + std::to_string(i++) + "]";
        detail::require_keys(s, ctx, {"id", "agent", "stated_at", "basis", "asserts", "ops", "claim"},
                             {"adopted_from"});
        InferenceStatement st;
        st.id = s["id"].get<std::string>();
        st.agent = s["agent"].get<std::string>();
        st.stated_at = detail::time_from_json(s["stated_at"], ctx + ".stated_at");
        detail::require_keys(s["basis"], ctx + ".basis", {"agent", "time"});
        st.basis_agent = s["basis"]["agent"].get<std::string>();
        st.basis_time = detail::time_from_json(s["basis"]["time"], ctx + ".basis.time");
        const std::string kind = s["asserts"].get<std::string>();
        if (kind == "own")
            st.kind = AssertionKind::own;
        else if (kind == "reports_other")
            st.kind = AssertionKind::reports_other;
        else
            detail::parse_fail(ctx + ".asserts", "expected \"own\" or \"reports_other\"");
        if (s.contains("adopted_from")) st.adopted_from = s["adopted_from"].get<std::string>();
        if (!s["ops"].is_array()) detail::parse_fail(ctx + ".ops", "expected an array");
        int oi = 0;
        for (const auto& o : s["ops"]) {
            const std::string octx = ctx + ".ops[" + std::to_string(oi++) + "]";
            detail::require_keys(o, octx, {}, {"unitary", "projector"});
            FutureOp op;
            if (o.contains("unitary")) {
                detail::require_keys(o["unitary"], octx + ".unitary", {"step", "time"});
                op.unitary = TimedUnitary{o["unitary"]["step"].get<std::string>(),
                                          detail::time_from_json(o["unitary"]["time"], octx + ".unitary.time")};
            }
            if (o.contains("projector")) {
                detail::require_keys(o["projector"], octx + ".projector", {"measurement", "outcome", "time"});
                op.projector =
                    TimedProjector{o["projector"]["measurement"].get<std::string>(),
                                   o["projector"]["outcome"].get<std::string>(),
                                   detail::time_from_json(o["projector"]["time"], octx + ".projector.time")};
            }
            if (!op.unitary && !op.projector) detail::parse_fail(octx, "needs a unitary or a projector");
            st.ops.push_back(std::move(op));
        }
        detail::require_keys(s["claim"], ctx + ".claim", {"measurement", "outcome", "probability"});
        st.claim = {s["claim"]["measurement"].get<std::string>(), s["claim"]["outcome"].get<std::string>(),
                    detail::number_from_json(s["claim"]["probability"], ctx + ".claim.probability")};
        chain.push_back(std::move(st));
    }
    return chain;
}

inline std::string serialize_chain(const InferenceChain& chain) {
    using detail::ordered_json;
    ordered_json j;
    j["statements"] = ordered_json::array();
    for (const auto& st : chain) {
        ordered_json e;
        e["id"] = st.id;
        e["agent"] = st.agent;
        e["stated_at"] = st.stated_at.str();
        e["basis"]["agent"] = st.basis_agent;
        e["basis"]["time"] = st.basis_time.str();
        e["asserts"] = to_string(st.kind);
        if (!st.adopted_from.empty()) e["adopted_from"] = st.adopted_from;
        e["ops"] = ordered_json::array();
        for (const auto& op : st.ops) {
            ordered_json oj;
            if (op.unitary) {
                oj["unitary"]["step"] = op.unitary->step;
                oj["unitary"]["time"] = op.unitary->time.str();
            }
            if (op.projector) {
                oj["projector"]["measurement"] = op.projector->measurement;
                oj["projector"]["outcome"] = op.projector->outcome;
                oj["projector"]["time"] = op.projector->time.str();
            }
            e["ops"].push_back(std::move(oj));
        }
        e["claim"]["measurement"] = st.claim.measurement;
        e["claim"]["outcome"] = st.claim.outcome;
        e["claim"]["probability"] = st.claim.probability;
        j["statements"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Bundled chain: the cross-referenced reasoning of the nested-labs agents
// ---------------------------------------------------------------------------

inline InferenceChain builtin_table1_chain() {
    const TimedUnitary u2{"record_spin", TimeStamp{1, 1, 0}};
    const TimedProjector tail{"r", "tail", TimeStamp{1, 0, 1}};
    const TimedProjector okbar{"wbar", "okbar", TimeStamp{1, 2, 1}};

    InferenceChain chain;
    chain.push_back({"Fbar_n02", "Fbar", TimeStamp{1, 0, 2}, "Fbar", TimeStamp{1, 0, 1},
                     AssertionKind::own, "",
                     {{u2, std::nullopt}},
                     {"w", "ok", 0.0}});
    chain.push_back({"F_n12", "F", TimeStamp{1, 1, 2}, "F", TimeStamp{1, 1, 1},
                     AssertionKind::own, "",
                     {},
                     {"r", "tail", 1.0}});
    chain.push_back({"F_n13", "F", TimeStamp{1, 1, 3}, "Fbar", TimeStamp{1, 0, 1},
                     AssertionKind::reports_other, "Fbar_n02",
                     {{u2, std::nullopt}},
                     {"w", "ok", 0.0}});
    chain.push_back({"F_n14", "F", TimeStamp{1, 1, 4}, "F", TimeStamp{1, 1, 0},
                     AssertionKind::own, "",
                     {{std::nullopt, tail}},
                     {"w", "ok", 0.0}});
    chain.push_back({"Wbar_n22", "Wbar", TimeStamp{1, 2, 2}, "Wbar", TimeStamp{1, 0, 0},
                     AssertionKind::own, "",
                     {{u2, std::nullopt}, {std::nullopt, okbar}},
                     {"z", "down", 0.0}});
    chain.push_back({"W_n30", "W", TimeStamp{1, 3, 0}, "W", TimeStamp{1, 0, 0},
                     AssertionKind::own, "",
                     {{u2, std::nullopt}, {std::nullopt, okbar}},
                     {"z", "down", 0.0}});
    return chain;
}

inline InferenceChain builtin_chain(const std::string& name) {
    if (name == "table1") return builtin_table1_chain();
    throw Error("unknown builtin chain '" + name + "' (available: table1)");
}

}  // namespace relq
