#pragma once

// Per-agent knowledge tracking. Each observer keeps a time-ordered ledger of
// state descriptions: one entry per modeled evolution, own measurement
// outcome, or received announcement. A record run drives one realized global
// collapse history through a protocol while every ledger tracks only what its
// agent actually knows.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relq/measurement.hpp"
#include "relq/protocol.hpp"

namespace relq {

enum class EventKind { modeled_unitary, own_outcome, received_outcome };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::modeled_unitary: return "modeled_unitary";
        case EventKind::own_outcome: return "own_outcome";
        case EventKind::received_outcome: return "received_outcome";
    }
    return "?";
}

struct KnowledgeEvent {
    TimeStamp time;
    EventKind kind;
    std::string name;     // operator name, or measurement name for outcomes
    std::string outcome;  // empty for modeled evolutions
    double probability;   // the probability this agent assigned to the update
    std::optional<LinearOp> op;  // stored for later reference-frame shifts
    StateVector state;           // the agent's description after the event
};

class ObserverLedger {
public:
    explicit ObserverLedger(AgentId agent) : agent_(std::move(agent)) {}

    const AgentId& agent() const { return agent_; }
    const std::vector<KnowledgeEvent>& events() const { return events_; }

    const StateVector& current() const {
        if (events_.empty()) throw Error("ledger for '" + agent_ + "' is empty");
        return events_.back().state;
    }

    // Last entry at or before the given time.
    const KnowledgeEvent& latest_at(TimeStamp t) const {
        for (auto it = events_.rbegin(); it != events_.rend(); ++it)
            if (it->time <= t) return *it;
        throw Error("ledger for '" + agent_ + "' has no entry at or before " + t.str());
    }

    const StateVector& state_at(TimeStamp t) const { return latest_at(t).state; }

    void record_prepare(TimeStamp time, const StateVector& state) {
        if (!state.normalized) throw Error("prepared states must be normalized");
        append({time, EventKind::modeled_unitary, "prepare", "", 1.0, std::nullopt, state});
    }

    void record_unitary(TimeStamp time, const LinearOp& op) {
        append({time, EventKind::modeled_unitary, op.name, "", 1.0, op, apply(op, current())});
    }

    // The agent's own measurement: its pre-measurement interaction followed by
    // the outcome projection, at the probability the agent itself assigns.
    void record_own(TimeStamp time, const ProjectiveMeasurement& m, const std::string& outcome) {
        StateVector s = m.premeasurement ? apply(*m.premeasurement, current()) : current();
        auto res = collapse(s, m.projector(outcome));
        append({time, EventKind::own_outcome, m.name, outcome, res.probability, m.premeasurement,
                std::move(res.state)});
    }

    // A measurement the agent knows took place but whose outcome it never
    // learns: only the pre-measurement interaction is modeled.
    void record_unobserved(TimeStamp time, const ProjectiveMeasurement& m) {
        if (m.premeasurement) {
            append({time, EventKind::modeled_unitary, m.premeasurement->name, "", 1.0, *m.premeasurement,
                    apply(*m.premeasurement, current())});
        } else {
            append({time, EventKind::modeled_unitary, m.name, "", 1.0, std::nullopt, current()});
        }
    }

    // An announced outcome arriving after the fact. The outcome constrains the
    // state as it was at measurement time, so the projector is carried through
    // every evolution the agent has modeled since then before being applied.
    void record_received(TimeStamp delivery, TimeStamp measured_at, const ProjectiveMeasurement& m,
                         const std::string& outcome) {
        const LinearOp& p = m.projector(outcome);
        const int n = p.space->total_dim();
        std::vector<Amplitude> u;
        bool any = false;
        for (const auto& e : events_) {
            if (!(measured_at < e.time) || !e.op) continue;
            if (!same_space(e.op->space, p.space))
                throw Error("ledger for '" + agent_ + "': modeled evolution acts on a different space");
            u = any ? detail::mat_mul(e.op->matrix, u, n) : e.op->matrix;
            any = true;
        }
        LinearOp effective = p;
        if (any) {
            auto ut = detail::mat_adjoint(u, n);
            effective = LinearOp::projector(p.space, detail::mat_mul(detail::mat_mul(u, p.matrix, n), ut, n),
                                            p.name);
        }
        auto res = collapse(current(), effective);
        append({delivery, EventKind::received_outcome, m.name, outcome, res.probability, std::nullopt,
                std::move(res.state)});
    }

private:
    void append(KnowledgeEvent e) {
        if (!events_.empty() && e.time < events_.back().time)
            throw Error("ledger for '" + agent_ + "': events must be time-ordered (" + e.time.str() +
                        " after " + events_.back().time.str() + ")");
        events_.push_back(std::move(e));
    }

    AgentId agent_;
    std::vector<KnowledgeEvent> events_;
};

// How far apart two state descriptions are as rays: 0 when they agree up to
// phase, 1 when orthogonal.
inline double ray_divergence(const StateVector& a, const StateVector& b) {
    if (!same_space(a.space, b.space)) throw Error("divergence needs states on the same space");
    detail::require_normalized(a, "divergence");
    detail::require_normalized(b, "divergence");
    const double overlap = std::norm(inner(a, b));
    return std::max(0.0, 1.0 - overlap);
}

inline double max_pairwise_divergence(const std::vector<ObserverLedger>& ledgers) {
    double worst = 0;
    for (std::size_t i = 0; i < ledgers.size(); ++i)
        for (std::size_t j = i + 1; j < ledgers.size(); ++j)
            worst = std::max(worst, ray_divergence(ledgers[i].current(), ledgers[j].current()));
    return worst;
}

inline double max_pairwise_divergence_at(const std::vector<ObserverLedger>& ledgers, TimeStamp t) {
    double worst = 0;
    for (std::size_t i = 0; i < ledgers.size(); ++i)
        for (std::size_t j = i + 1; j < ledgers.size(); ++j)
            worst = std::max(worst, ray_divergence(ledgers[i].state_at(t), ledgers[j].state_at(t)));
    return worst;
}

// ---------------------------------------------------------------------------
// Record run: one realized collapse history, one ledger per agent
// ---------------------------------------------------------------------------

struct RecordRunResult {
    std::vector<ObserverLedger> ledgers;  // in agent declaration order
    StateVector global;                   // realized collapsed state after all steps
    std::vector<OutcomeRecord> realized;  // probabilities from the global state
    double joint_probability = 1.0;
};

inline RecordRunResult record_run(const Protocol& p,
                                  const std::vector<std::pair<std::string, std::string>>& record) {
    std::map<std::string, std::string> want;
    for (const auto& [m, o] : record)
        if (!want.emplace(m, o).second) throw Error("record lists measurement '" + m + "' twice");
    std::size_t n_measures = 0;
    for (const auto& st : p.steps)
        if (st.kind == StepKind::measure) {
            ++n_measures;
            if (!want.count(st.name)) throw Error("record is missing an outcome for measurement '" + st.name + "'");
        }
    if (want.size() != n_measures) throw Error("record mentions measurements the protocol does not contain");

    RecordRunResult out{{}, p.initial, {}, 1.0};
    out.ledgers.reserve(p.spec.agents.size());
    for (const auto& a : p.spec.agents) out.ledgers.emplace_back(a);
    auto ledger_of = [&out](const AgentId& a) -> ObserverLedger& {
        for (auto& l : out.ledgers)
            if (l.agent() == a) return l;
        throw Error("unknown agent '" + a + "'");
    };

    struct Delivery {
        AgentId to;
        const ProjectiveMeasurement* m;
        TimeStamp measured_at;
        std::string outcome;
    };
    std::multimap<TimeStamp, Delivery> pending;
    auto flush = [&](const TimeStamp* upto) {
        while (!pending.empty() && (upto == nullptr || !(*upto < pending.begin()->first))) {
            const auto& [t, d] = *pending.begin();
            ledger_of(d.to).record_received(t, d.measured_at, *d.m, d.outcome);
            pending.erase(pending.begin());
        }
    };

    StateVector psi = p.initial;

    for (const auto& step : p.steps) {
        flush(&step.time);
        switch (step.kind) {
            case StepKind::prepare:
                for (auto& l : out.ledgers) l.record_prepare(step.time, psi);
                break;
            case StepKind::unitary:
                psi = apply(*step.op, psi);
                for (auto& l : out.ledgers) l.record_unitary(step.time, *step.op);
                break;
            case StepKind::measure: {
                const ProjectiveMeasurement& m = *step.measurement;
                const std::string& outcome = want.at(m.name);
                if (m.premeasurement) psi = apply(*m.premeasurement, psi);
                auto res = collapse(psi, m.projector(outcome));
                psi = std::move(res.state);
                out.realized.push_back({m.name, outcome, res.probability, step.time});
                out.joint_probability *= res.probability;
                for (auto& l : out.ledgers) {
                    if (l.agent() == step.agent)
                        l.record_own(step.time, m, outcome);
                    else
                        l.record_unobserved(step.time, m);
                }
                const StepSpec* raw = p.raw(step);
                for (const auto& b : raw->broadcast_to)
                    pending.emplace(step.time.plus_substeps(raw->broadcast_delay),
                                    Delivery{b, &m, step.time, outcome});
                break;
            }
            case StepKind::infer:
                break;  // reasoning checkpoints leave every state description unchanged
        }
    }
    flush(nullptr);
    out.global = std::move(psi);
    return out;
}

}  // namespace relq
