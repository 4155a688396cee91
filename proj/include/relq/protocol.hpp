#pragma once

// Protocol descriptions: a composite space, a set of named agents, an initial
// state, and a timed sequence of unitary / measurement / inference steps.
// Protocols exist in two layers: a plain-data spec (parseable, serializable,
// editable) and a resolved form whose operators act on the full space.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relq/hilbert.hpp"
#include "relq/measurement.hpp"
#include "relq/timestamp.hpp"

namespace relq {

using AgentId = std::string;

enum class StepKind { prepare, unitary, measure, infer };

inline const char* to_string(StepKind k) {
    switch (k) {
        case StepKind::prepare: return "prepare";
        case StepKind::unitary: return "unitary";
        case StepKind::measure: return "measure";
        case StepKind::infer: return "infer";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Plain-data spec layer
// ---------------------------------------------------------------------------

struct TermSpec {
    Amplitude amp;
    std::vector<std::string> labels;  // one label per target subsystem
    bool operator==(const TermSpec&) const = default;
};

struct MapEntrySpec {
    std::vector<TermSpec> from;
    std::vector<TermSpec> to;
    bool operator==(const MapEntrySpec&) const = default;
};

struct PremeasureSpec {
    std::vector<std::string> targets;
    std::vector<MapEntrySpec> map;
    bool operator==(const PremeasureSpec&) const = default;
};

struct OutcomeSpec {
    std::string label;
    std::vector<std::vector<TermSpec>> vectors;  // ignored when complement
    bool complement = false;
    bool operator==(const OutcomeSpec&) const = default;
};

struct StepSpec {
    StepKind kind = StepKind::unitary;
    TimeStamp time;
    std::string name;

    std::vector<std::string> targets;  // unitary / measure
    std::vector<MapEntrySpec> map;     // unitary

    AgentId agent;  // measure / infer
    std::vector<OutcomeSpec> outcomes;
    std::vector<AgentId> broadcast_to;
    int broadcast_delay = 1;  // substeps after the measurement time
    std::optional<PremeasureSpec> premeasure;

    bool operator==(const StepSpec&) const = default;
};

struct ProtocolSpec {
    std::vector<SubsystemSpec> subsystems;
    std::vector<AgentId> agents;
    std::vector<TermSpec> initial;  // labels span all subsystems
    std::vector<StepSpec> steps;    // unitary / measure / infer only
    bool operator==(const ProtocolSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] inline void parse_fail(const std::string& ctx, const std::string& what) {
    throw Error("protocol: " + ctx + ": " + what);
}

inline void require_keys(const ordered_json& j, const std::string& ctx,
                         const std::set<std::string>& required,
                         const std::set<std::string>& optional = {}) {
    if (!j.is_object()) parse_fail(ctx, "expected an object");
    for (const auto& item : j.items()) {
        if (!required.count(item.key()) && !optional.count(item.key()))
            parse_fail(ctx, "unknown key '" + item.key() + "'");
    }
    for (const auto& k : required)
        if (!j.contains(k)) parse_fail(ctx, "missing key '" + k + "'");
}

inline double number_from_json(const ordered_json& j, const std::string& ctx) {
    if (!j.is_number()) parse_fail(ctx, "expected a number");
    return j.get<double>();
}

inline Amplitude amp_from_json(const ordered_json& j, const std::string& ctx) {
    if (j.is_number()) return Amplitude(j.get<double>(), 0.0);
    if (j.is_string()) {
        // square-root shorthand: "sqrt(a/b)" or "-sqrt(a/b)"
        std::string s = j.get<std::string>();
        double sign = 1.0;
        std::string body = s;
        if (!body.empty() && body.front() == '-') {
            sign = -1.0;
            body.erase(body.begin());
        }
        if (body.size() > 6 && body.substr(0, 5) == "sqrt(" && body.back() == ')') {
            const std::string inner = body.substr(5, body.size() - 6);
            const auto slash = inner.find('/');
            if (slash != std::string::npos) {
                try {
                    std::size_t an = 0, bn = 0;
                    const double a = std::stod(inner.substr(0, slash), &an);
                    const double b = std::stod(inner.substr(slash + 1), &bn);
                    if (an == slash && bn == inner.size() - slash - 1 && b > 0)
                        return Amplitude(sign * std::sqrt(a / b), 0.0);
                } catch (const std::exception&) {
                }
            }
        }
        parse_fail(ctx, "bad amplitude string '" + s + "' (expected \"sqrt(a/b)\" or \"-sqrt(a/b)\")");
    }
    if (j.is_object()) {
        require_keys(j, ctx, {"re", "im"});
        return Amplitude(number_from_json(j["re"], ctx + ".re"), number_from_json(j["im"], ctx + ".im"));
    }
    parse_fail(ctx, "expected a number, sqrt string, or {re, im} object");
}

inline std::vector<std::string> strings_from_json(const ordered_json& j, const std::string& ctx) {
    if (!j.is_array()) parse_fail(ctx, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) parse_fail(ctx, "expected strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline std::vector<TermSpec> terms_from_json(const ordered_json& j, const std::string& ctx) {
    if (!j.is_array() || j.empty()) parse_fail(ctx, "expected a nonempty array of terms");
    std::vector<TermSpec> out;
    int i = 0;
    for (const auto& e : j) {
        const std::string tctx = ctx + "[" + std::to_string(i++) + "]";
        require_keys(e, tctx, {"amp", "labels"});
        out.push_back({amp_from_json(e["amp"], tctx + ".amp"), strings_from_json(e["labels"], tctx + ".labels")});
    }
    return out;
}

inline std::vector<MapEntrySpec> map_from_json(const ordered_json& j, const std::string& ctx) {
    if (!j.is_array() || j.empty()) parse_fail(ctx, "expected a nonempty array of map entries");
    std::vector<MapEntrySpec> out;
    int i = 0;
    for (const auto& e : j) {
        const std::string ectx = ctx + "[" + std::to_string(i++) + "]";
        require_keys(e, ectx, {"from", "to"});
        out.push_back({terms_from_json(e["from"], ectx + ".from"), terms_from_json(e["to"], ectx + ".to")});
    }
    return out;
}

inline TimeStamp time_from_json(const ordered_json& j, const std::string& ctx) {
    if (!j.is_string()) parse_fail(ctx, "expected a time string like \"1:01\"");
    try {
        return TimeStamp::parse(j.get<std::string>());
    } catch (const Error& e) {
        parse_fail(ctx, e.what());
    }
}

}  // namespace detail

inline ProtocolSpec parse_protocol_text(const std::string& text) {
    using detail::ordered_json;
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("protocol syntax: ") + e.what());
    }
    detail::require_keys(j, "top level", {"subsystems", "agents", "initial", "steps"});

    ProtocolSpec spec;
    if (!j["subsystems"].is_array()) detail::parse_fail("subsystems", "expected an array");
    int i = 0;
    for (const auto& s : j["subsystems"]) {
        const std::string ctx = "subsystems[" + std::to_string(i++) + "]";
        detail::require_keys(s, ctx, {"name", "dim", "basis"});
        if (!s["name"].is_string()) detail::parse_fail(ctx, "name must be a string");
        if (!s["dim"].is_number_integer()) detail::parse_fail(ctx, "dim must be an integer");
        SubsystemSpec sub{s["name"].get<std::string>(), s["dim"].get<int>(),
                          detail::strings_from_json(s["basis"], ctx + ".basis")};
        if (static_cast<int>(sub.basis.size()) != sub.dim)
            detail::parse_fail(ctx, "dim does not match basis size");
        spec.subsystems.push_back(std::move(sub));
    }

    spec.agents = detail::strings_from_json(j["agents"], "agents");

    detail::require_keys(j["initial"], "initial", {"terms"});
    spec.initial = detail::terms_from_json(j["initial"]["terms"], "initial.terms");

    if (!j["steps"].is_array()) detail::parse_fail("steps", "expected an array");
    i = 0;
    for (const auto& s : j["steps"]) {
        const std::string ctx = "steps[" + std::to_string(i++) + "]";
        if (!s.is_object() || !s.contains("op") || !s["op"].is_string())
            detail::parse_fail(ctx, "missing op");
        const std::string op = s["op"].get<std::string>();
        StepSpec step;
        if (op == "unitary") {
            detail::require_keys(s, ctx, {"time", "op", "name", "targets", "map"});
            step.kind = StepKind::unitary;
            step.name = s["name"].get<std::string>();
            step.targets = detail::strings_from_json(s["targets"], ctx + ".targets");
            step.map = detail::map_from_json(s["map"], ctx + ".map");
        } else if (op == "measure") {
            detail::require_keys(s, ctx, {"time", "op", "name", "agent", "targets", "outcomes"},
                                 {"broadcast_to", "broadcast_delay", "premeasure"});
            step.kind = StepKind::measure;
            step.name = s["name"].get<std::string>();
            if (!s["agent"].is_string()) detail::parse_fail(ctx, "agent must be a string");
            step.agent = s["agent"].get<std::string>();
            step.targets = detail::strings_from_json(s["targets"], ctx + ".targets");
            if (!s["outcomes"].is_array() || s["outcomes"].empty())
                detail::parse_fail(ctx + ".outcomes", "expected a nonempty array");
            int oi = 0;
            for (const auto& o : s["outcomes"]) {
                const std::string octx = ctx + ".outcomes[" + std::to_string(oi++) + "]";
                if (!o.is_object() || !o.contains("label") || !o["label"].is_string())
                    detail::parse_fail(octx, "missing label");
                OutcomeSpec out;
                out.label = o["label"].get<std::string>();
                if (o.contains("complement")) {
                    detail::require_keys(o, octx, {"label", "complement"});
                    if (!o["complement"].is_boolean() || !o["complement"].get<bool>())
                        detail::parse_fail(octx, "complement must be true when present");
                    out.complement = true;
                } else {
                    detail::require_keys(o, octx, {"label", "vectors"});
                    if (!o["vectors"].is_array() || o["vectors"].empty())
                        detail::parse_fail(octx + ".vectors", "expected a nonempty array");
                    int vi = 0;
                    for (const auto& v : o["vectors"])
                        out.vectors.push_back(
                            detail::terms_from_json(v, octx + ".vectors[" + std::to_string(vi++) + "]"));
                }
                step.outcomes.push_back(std::move(out));
            }
            if (s.contains("broadcast_to"))
                step.broadcast_to = detail::strings_from_json(s["broadcast_to"], ctx + ".broadcast_to");
            if (s.contains("broadcast_delay")) {
                if (!s["broadcast_delay"].is_number_integer())
                    detail::parse_fail(ctx + ".broadcast_delay", "expected an integer");
                step.broadcast_delay = s["broadcast_delay"].get<int>();
            }
            if (s.contains("premeasure")) {
                const std::string pctx = ctx + ".premeasure";
                detail::require_keys(s["premeasure"], pctx, {"targets", "map"});
                step.premeasure = PremeasureSpec{
                    detail::strings_from_json(s["premeasure"]["targets"], pctx + ".targets"),
                    detail::map_from_json(s["premeasure"]["map"], pctx + ".map")};
            }
        } else if (op == "infer") {
            detail::require_keys(s, ctx, {"time", "op", "agent"}, {"name"});
            step.kind = StepKind::infer;
            step.agent = s["agent"].get<std::string>();
            if (s.contains("name")) step.name = s["name"].get<std::string>();
        } else {
            detail::parse_fail(ctx, "unknown op '" + op + "'");
        }
        step.time = detail::time_from_json(s["time"], ctx + ".time");
        spec.steps.push_back(std::move(step));
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Serialization (canonical form; square-root shorthand is parse-time sugar)
// ---------------------------------------------------------------------------

namespace detail {

inline ordered_json amp_to_json(const Amplitude& a) {
    if (a.imag() == 0.0) return ordered_json(a.real());
    ordered_json j;
    j["re"] = a.real();
    j["im"] = a.imag();
    return j;
}

inline ordered_json terms_to_json(const std::vector<TermSpec>& terms) {
    ordered_json arr = ordered_json::array();
    for (const auto& t : terms) {
        ordered_json e;
        e["amp"] = amp_to_json(t.amp);
        e["labels"] = t.labels;
        arr.push_back(std::move(e));
    }
    return arr;
}

inline ordered_json map_to_json(const std::vector<MapEntrySpec>& map) {
    ordered_json arr = ordered_json::array();
    for (const auto& m : map) {
        ordered_json e;
        e["from"] = terms_to_json(m.from);
        e["to"] = terms_to_json(m.to);
        arr.push_back(std::move(e));
    }
    return arr;
}

}  // namespace detail

inline std::string serialize_protocol(const ProtocolSpec& spec) {
    using detail::ordered_json;
    ordered_json j;
    j["subsystems"] = ordered_json::array();
    for (const auto& s : spec.subsystems) {
        ordered_json e;
        e["name"] = s.name;
        e["dim"] = s.dim;
        e["basis"] = s.basis;
        j["subsystems"].push_back(std::move(e));
    }
    j["agents"] = spec.agents;
    j["initial"]["terms"] = detail::terms_to_json(spec.initial);
    j["steps"] = ordered_json::array();
    for (const auto& st : spec.steps) {
        ordered_json e;
        e["time"] = st.time.str();
        e["op"] = to_string(st.kind);
        switch (st.kind) {
            case StepKind::unitary:
                e["name"] = st.name;
                e["targets"] = st.targets;
                e["map"] = detail::map_to_json(st.map);
                break;
            case StepKind::measure:
                e["name"] = st.name;
                e["agent"] = st.agent;
                e["targets"] = st.targets;
                e["outcomes"] = ordered_json::array();
                for (const auto& o : st.outcomes) {
                    ordered_json oj;
                    oj["label"] = o.label;
                    if (o.complement) {
                        oj["complement"] = true;
                    } else {
                        oj["vectors"] = ordered_json::array();
                        for (const auto& v : o.vectors) oj["vectors"].push_back(detail::terms_to_json(v));
                    }
                    e["outcomes"].push_back(std::move(oj));
                }
                if (!st.broadcast_to.empty()) {
                    e["broadcast_to"] = st.broadcast_to;
                    e["broadcast_delay"] = st.broadcast_delay;
                }
                if (st.premeasure) {
                    e["premeasure"]["targets"] = st.premeasure->targets;
                    e["premeasure"]["map"] = detail::map_to_json(st.premeasure->map);
                }
                break;
            case StepKind::infer:
                e["agent"] = st.agent;
                if (!st.name.empty()) e["name"] = st.name;
                break;
            case StepKind::prepare:
                throw Error("protocol: prepare steps are implicit and never serialized");
        }
        j["steps"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Resolution: spec -> operators on the full space
// ---------------------------------------------------------------------------

struct ResolvedStep {
    StepKind kind;
    TimeStamp time;
    std::string name;
    AgentId agent;                                     // measure / infer
    int spec_index = -1;                               // -1 for the implicit prepare
    std::optional<LinearOp> op;                        // unitary
    std::optional<ProjectiveMeasurement> measurement;  // measure
};

struct Protocol {
    ProtocolSpec spec;
    SpacePtr space;
    StateVector initial;
    std::vector<ResolvedStep> steps;  // prepare first, then one per spec step

    const StepSpec* raw(const ResolvedStep& s) const {
        return s.spec_index >= 0 ? &spec.steps[static_cast<std::size_t>(s.spec_index)] : nullptr;
    }
    std::vector<AgentId> measuring_agents() const {
        std::vector<AgentId> out;
        for (const auto& a : spec.agents)
            for (const auto& st : spec.steps)
                if (st.kind == StepKind::measure && st.agent == a) {
                    out.push_back(a);
                    break;
                }
        return out;
    }
};

namespace detail {

[[noreturn]] inline void resolve_fail(int step_index, const std::string& what) {
    if (step_index < 0) throw Error("protocol: " + what);
    throw Error("protocol: steps[" + std::to_string(step_index) + "]: " + what);
}

inline SpacePtr target_subspace(const SpacePtr& space, const std::vector<std::string>& targets, int step_index) {
    if (targets.empty()) resolve_fail(step_index, "targets must be nonempty");
    std::vector<SubsystemSpec> subs;
    std::set<std::string> seen;
    for (const auto& t : targets) {
        if (!seen.insert(t).second) resolve_fail(step_index, "duplicate target '" + t + "'");
        bool found = false;
        for (const auto& s : space->subsystems())
            if (s.name == t) {
                subs.push_back(s);
                found = true;
                break;
            }
        if (!found) resolve_fail(step_index, "unknown target subsystem '" + t + "'");
    }
    return CompositeSpace::make(subs);
}

inline StateVector terms_to_state(const SpacePtr& space, const std::vector<TermSpec>& terms, int step_index,
                                  bool require_normalized) {
    std::vector<Amplitude> amps(static_cast<std::size_t>(space->total_dim()), Amplitude(0, 0));
    for (const auto& t : terms) {
        int idx = 0;
        try {
            idx = space->index_of_labels(t.labels);
        } catch (const Error& e) {
            resolve_fail(step_index, e.what());
        }
        amps[static_cast<std::size_t>(idx)] += t.amp;
    }
    double n2 = 0;
    for (const auto& a : amps) n2 += std::norm(a);
    if (require_normalized && std::abs(n2 - 1.0) > 1e-9)
        resolve_fail(step_index, "terms are not normalized (|norm^2 - 1| = " + std::to_string(std::abs(n2 - 1.0)) + ")");
    return StateVector::make(space, std::move(amps), require_normalized);
}

inline LinearOp resolve_map(const SpacePtr& space, const std::vector<std::string>& targets,
                            const std::vector<MapEntrySpec>& map, const std::string& name, int step_index) {
    const SpacePtr sub = target_subspace(space, targets, step_index);
    std::vector<std::pair<StateVector, StateVector>> pairs;
    for (const auto& entry : map)
        pairs.emplace_back(terms_to_state(sub, entry.from, step_index, true),
                           terms_to_state(sub, entry.to, step_index, true));
    LinearOp on_sub = [&] {
        try {
            return complete_isometry(sub, pairs, name);
        } catch (const Error& e) {
            resolve_fail(step_index, std::string("map: ") + e.what());
        }
    }();
    return embed_op(on_sub, space);
}

}  // namespace detail

inline Protocol resolve_protocol(const ProtocolSpec& spec) {
    Protocol p;
    p.spec = spec;
    p.space = CompositeSpace::make(spec.subsystems);

    if (spec.agents.empty()) throw Error("protocol: at least one agent is required");
    std::set<AgentId> agent_set;
    for (const auto& a : spec.agents)
        if (!agent_set.insert(a).second) throw Error("protocol: duplicate agent '" + a + "'");

    p.initial = detail::terms_to_state(p.space, spec.initial, -1, true);
    p.steps.push_back({StepKind::prepare, TimeStamp{0, 0, 0}, "prepare", "", -1, std::nullopt, std::nullopt});

    TimeStamp last{0, 0, 0};
    std::set<std::string> names{"prepare"};
    for (std::size_t i = 0; i < spec.steps.size(); ++i) {
        const StepSpec& st = spec.steps[i];
        const int idx = static_cast<int>(i);
        if (!(last < st.time)) detail::resolve_fail(idx, "step times must be strictly increasing");
        last = st.time;
        if (!st.name.empty() && !names.insert(st.name).second)
            detail::resolve_fail(idx, "duplicate step name '" + st.name + "'");

        ResolvedStep rs;
        rs.kind = st.kind;
        rs.time = st.time;
        rs.name = st.name;
        rs.agent = st.agent;
        rs.spec_index = idx;

        switch (st.kind) {
            case StepKind::unitary:
                if (st.name.empty()) detail::resolve_fail(idx, "unitary steps need a name");
                rs.op = detail::resolve_map(p.space, st.targets, st.map, st.name, idx);
                break;
            case StepKind::measure: {
                if (st.name.empty()) detail::resolve_fail(idx, "measure steps need a name");
                if (!agent_set.count(st.agent)) detail::resolve_fail(idx, "unknown agent '" + st.agent + "'");
                const SpacePtr sub = detail::target_subspace(p.space, st.targets, idx);

                std::vector<std::pair<std::string, LinearOp>> on_sub;
                int complement_at = -1;
                for (std::size_t oi = 0; oi < st.outcomes.size(); ++oi) {
                    const auto& o = st.outcomes[oi];
                    if (o.complement) {
                        if (complement_at >= 0)
                            detail::resolve_fail(idx, "at most one complement outcome is allowed");
                        complement_at = static_cast<int>(oi);
                        on_sub.emplace_back(o.label, LinearOp::identity(sub));  // placeholder
                        continue;
                    }
                    std::vector<StateVector> vecs;
                    for (const auto& v : o.vectors) vecs.push_back(detail::terms_to_state(sub, v, idx, true));
                    try {
                        on_sub.emplace_back(o.label, projector_onto(sub, vecs, o.label));
                    } catch (const Error& e) {
                        detail::resolve_fail(idx, "outcome '" + o.label + "': " + e.what());
                    }
                }
                if (complement_at >= 0) {
                    const int n = sub->total_dim();
                    auto rest = detail::mat_identity(n);
                    for (std::size_t oi = 0; oi < on_sub.size(); ++oi) {
                        if (static_cast<int>(oi) == complement_at) continue;
                        for (std::size_t k = 0; k < rest.size(); ++k) rest[k] -= on_sub[oi].second.matrix[k];
                    }
                    try {
                        on_sub[static_cast<std::size_t>(complement_at)].second =
                            LinearOp::projector(sub, std::move(rest), st.outcomes[static_cast<std::size_t>(complement_at)].label);
                    } catch (const Error& e) {
                        detail::resolve_fail(idx, std::string("complement outcome: ") + e.what());
                    }
                }

                std::vector<std::pair<std::string, LinearOp>> embedded;
                for (auto& [label, proj] : on_sub) embedded.emplace_back(label, embed_op(proj, p.space));

                std::optional<LinearOp> pre;
                if (st.premeasure)
                    pre = detail::resolve_map(p.space, st.premeasure->targets, st.premeasure->map,
                                              st.name + ":premeasure", idx);
                try {
                    rs.measurement = ProjectiveMeasurement::make(st.name, p.space, std::move(embedded), std::move(pre));
                } catch (const Error& e) {
                    detail::resolve_fail(idx, e.what());
                }

                std::set<AgentId> bset;
                for (const auto& b : st.broadcast_to) {
                    if (!agent_set.count(b)) detail::resolve_fail(idx, "broadcast to unknown agent '" + b + "'");
                    if (b == st.agent) detail::resolve_fail(idx, "agents do not broadcast to themselves");
                    if (!bset.insert(b).second) detail::resolve_fail(idx, "duplicate broadcast target '" + b + "'");
                }
                if (st.broadcast_to.empty()) {
                    if (st.broadcast_delay != 1)
                        detail::resolve_fail(idx, "broadcast_delay without broadcast_to");
                } else {
                    if (st.broadcast_delay < 1) detail::resolve_fail(idx, "broadcast_delay must be >= 1");
                    try {
                        (void)st.time.plus_substeps(st.broadcast_delay).str();
                    } catch (const Error&) {
                        detail::resolve_fail(idx, "broadcast delivery time leaves the substep range");
                    }
                }
                break;
            }
            case StepKind::infer:
                if (!agent_set.count(st.agent)) detail::resolve_fail(idx, "unknown agent '" + st.agent + "'");
                break;
            case StepKind::prepare:
                detail::resolve_fail(idx, "prepare steps are implicit; describe the state under \"initial\"");
        }
        p.steps.push_back(std::move(rs));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Derived protocol transforms and defaults
// ---------------------------------------------------------------------------

// Every measurement is announced to every other agent, one substep later.
inline ProtocolSpec with_full_broadcast(ProtocolSpec spec) {
    for (auto& st : spec.steps) {
        if (st.kind != StepKind::measure) continue;
        st.broadcast_to.clear();
        for (const auto& a : spec.agents)
            if (a != st.agent) st.broadcast_to.push_back(a);
        st.broadcast_delay = 1;
    }
    return spec;
}

// Agents whose measurement targets overlap an earlier measurement by someone
// else are treated as outside observers by default; if no such overlap exists
// every measuring agent is.
inline std::vector<AgentId> default_external_agents(const ProtocolSpec& spec) {
    std::set<AgentId> flagged;
    for (std::size_t i = 0; i < spec.steps.size(); ++i) {
        const auto& m = spec.steps[i];
        if (m.kind != StepKind::measure) continue;
        for (std::size_t e = 0; e < i; ++e) {
            const auto& prior = spec.steps[e];
            if (prior.kind != StepKind::measure || prior.agent == m.agent) continue;
            for (const auto& t : m.targets)
                if (std::find(prior.targets.begin(), prior.targets.end(), t) != prior.targets.end()) {
                    flagged.insert(m.agent);
                    break;
                }
        }
    }
    std::vector<AgentId> out;
    if (flagged.empty()) {
        for (const auto& a : spec.agents) {
            bool measures = false;
            for (const auto& st : spec.steps)
                if (st.kind == StepKind::measure && st.agent == a) measures = true;
            if (measures) out.push_back(a);
        }
        return out;
    }
    for (const auto& a : spec.agents)
        if (flagged.count(a)) out.push_back(a);
    return out;
}

// ---------------------------------------------------------------------------
// Builder (used by the bundled experiment definitions and by tests)
// ---------------------------------------------------------------------------

class ProtocolBuilder {
public:
    ProtocolBuilder& subsystem(std::string name, std::vector<std::string> basis) {
        spec_.subsystems.push_back({std::move(name), static_cast<int>(basis.size()), std::move(basis)});
        return *this;
    }
    ProtocolBuilder& agent(AgentId a) {
        spec_.agents.push_back(std::move(a));
        return *this;
    }
    ProtocolBuilder& initial(std::vector<TermSpec> terms) {
        spec_.initial = std::move(terms);
        return *this;
    }
    ProtocolBuilder& unitary(const std::string& time, std::string name, std::vector<std::string> targets,
                             std::vector<MapEntrySpec> map) {
        StepSpec st;
        st.kind = StepKind::unitary;
        st.time = TimeStamp::parse(time);
        st.name = std::move(name);
        st.targets = std::move(targets);
        st.map = std::move(map);
        spec_.steps.push_back(std::move(st));
        return *this;
    }
    ProtocolBuilder& measure(const std::string& time, std::string name, AgentId agent,
                             std::vector<std::string> targets, std::vector<OutcomeSpec> outcomes,
                             std::vector<AgentId> broadcast_to = {}, int broadcast_delay = 1,
                             std::optional<PremeasureSpec> premeasure = std::nullopt) {
        StepSpec st;
        st.kind = StepKind::measure;
        st.time = TimeStamp::parse(time);
        st.name = std::move(name);
        st.agent = std::move(agent);
        st.targets = std::move(targets);
        st.outcomes = std::move(outcomes);
        st.broadcast_to = std::move(broadcast_to);
        st.broadcast_delay = broadcast_delay;
        st.premeasure = std::move(premeasure);
        spec_.steps.push_back(std::move(st));
        return *this;
    }
    ProtocolBuilder& infer(const std::string& time, AgentId agent, std::string name = "") {
        StepSpec st;
        st.kind = StepKind::infer;
        st.time = TimeStamp::parse(time);
        st.agent = std::move(agent);
        st.name = std::move(name);
        spec_.steps.push_back(std::move(st));
        return *this;
    }
    const ProtocolSpec& spec() const { return spec_; }
    Protocol build() const { return resolve_protocol(spec_); }

private:
    ProtocolSpec spec_;
};

}  // namespace relq
