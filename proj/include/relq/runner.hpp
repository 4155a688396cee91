#pragma once

// Execution modes over a protocol:
//  - exact-collapse: branch on every measurement, collapsing globally; the
//    full tree of outcome histories with conditional and cumulative weights.
//  - exact-external: only measurements involving designated outside observers
//    branch (by the observer itself, or announced to one); all other
//    measurements contribute their pre-measurement interaction and nothing
//    else.
//  - sampling: draw outcome histories trial by trial with a replayable
//    per-trial random stream, using collapse semantics.
// Plus a side-by-side comparison of the two exact modes.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relq/measurement.hpp"
#include "relq/protocol.hpp"

namespace relq {

enum class RunMode { exact_collapse, exact_external, sample };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::exact_collapse: return "exact-collapse";
        case RunMode::exact_external: return "exact-external";
        case RunMode::sample: return "sample";
    }
    return "?";
}

using OutcomePath = std::vector<std::pair<std::string, std::string>>;  // (measurement, outcome)

struct TreeNode {
    OutcomePath path;
    double p_cond = 1.0;  // probability of the last outcome given the path so far
    double p_cum = 1.0;   // product along the path
    std::optional<StateVector> state;  // collapsed state; absent on zero-weight branches
};

struct ExactRunResult {
    RunMode mode = RunMode::exact_collapse;
    std::vector<AgentId> external_agents;  // used by exact-external only
    std::vector<TreeNode> nodes;           // depth-first, root (empty path) first
};

struct SampleRunResult {
    std::uint64_t seed = 0;
    std::uint64_t trials = 0;
    std::vector<std::pair<OutcomePath, std::uint64_t>> frequencies;  // sorted by path
};

namespace detail {

inline bool is_listed(const std::vector<AgentId>& agents, const AgentId& a) {
    return std::find(agents.begin(), agents.end(), a) != agents.end();
}

// In external mode a measurement branches when an outside observer performs
// it or is told its outcome; otherwise it stays unresolved.
inline bool measure_branches(const Protocol& p, const ResolvedStep& st, const std::vector<AgentId>& external,
                             RunMode mode) {
    if (mode == RunMode::exact_collapse) return true;
    if (is_listed(external, st.agent)) return true;
    for (const auto& b : p.raw(st)->broadcast_to)
        if (is_listed(external, b)) return true;
    return false;
}

}  // namespace detail

inline ExactRunResult run_exact(const Protocol& p, RunMode mode, std::vector<AgentId> external = {}) {
    if (mode == RunMode::sample) throw Error("run_exact does not sample; use run_sampled");
    if (mode == RunMode::exact_external) {
        if (external.empty()) external = default_external_agents(p.spec);
        for (const auto& a : external)
            if (!detail::is_listed(p.spec.agents, a)) throw Error("unknown external agent '" + a + "'");
    } else {
        external.clear();
    }

    ExactRunResult out{mode, external, {}};
    out.nodes.push_back({{}, 1.0, 1.0, p.initial});

    auto rec = [&](auto&& self, StateVector state, std::size_t from, const OutcomePath& path,
                   double p_cum) -> void {
        for (std::size_t i = from; i < p.steps.size(); ++i) {
            const auto& st = p.steps[i];
            if (st.kind == StepKind::unitary) {
                state = apply(*st.op, state);
                continue;
            }
            if (st.kind != StepKind::measure) continue;
            const auto& m = *st.measurement;
            if (m.premeasurement) state = apply(*m.premeasurement, state);
            if (!detail::measure_branches(p, st, external, mode)) continue;
            for (const auto& [label, proj] : m.outcomes) {
                OutcomePath child = path;
                child.emplace_back(m.name, label);
                const double pc = born_probability(state, proj);
                if (pc <= kScalarTol) {
                    out.nodes.push_back({std::move(child), 0.0, 0.0, std::nullopt});
                    continue;
                }
                auto branch = collapse(state, proj);
                out.nodes.push_back({child, branch.probability, p_cum * branch.probability, branch.state});
                self(self, std::move(branch.state), i + 1, child, p_cum * branch.probability);
            }
            return;  // all deeper work happened in the per-outcome recursion
        }
    };
    rec(rec, p.initial, 0, {}, 1.0);
    return out;
}

// Nodes with no children: complete outcome histories plus truncated
// zero-weight branches.
inline std::vector<const TreeNode*> tree_leaves(const ExactRunResult& r) {
    std::vector<const TreeNode*> out;
    for (const auto& n : r.nodes) {
        bool has_child = false;
        for (const auto& m : r.nodes) {
            if (m.path.size() == n.path.size() + 1 &&
                std::equal(n.path.begin(), n.path.end(), m.path.begin())) {
                has_child = true;
                break;
            }
        }
        if (!has_child) out.push_back(&n);
    }
    return out;
}

inline SampleRunResult run_sampled(const Protocol& p, std::uint64_t trials, std::uint64_t seed) {
    std::map<OutcomePath, std::uint64_t> freq;
    for (std::uint64_t t = 0; t < trials; ++t) {
        RngStream rng(seed, t);
        StateVector state = p.initial;
        OutcomePath rec;
        for (const auto& st : p.steps) {
            if (st.kind == StepKind::unitary) {
                state = apply(*st.op, state);
            } else if (st.kind == StepKind::measure) {
                auto res = sample(state, *st.measurement, rng);
                rec.emplace_back(st.name, res.record.outcome);
                state = std::move(res.state);
            }
        }
        ++freq[rec];
    }
    SampleRunResult out{seed, trials, {}};
    out.frequencies.assign(freq.begin(), freq.end());
    return out;
}

// ---------------------------------------------------------------------------
// Side-by-side comparison of the two exact modes
// ---------------------------------------------------------------------------

struct CompareRow {
    OutcomePath combo;       // outcomes of the externally-resolved measurements
    double p_external;       // weight of this combination in external mode
    double p_collapse_path;  // weight of the single collapse history matching
                             // the reference record on all other measurements
    double p_collapse_total; // collapse weight summed over all histories
                             // matching this combination
    double gap;              // p_collapse_total - p_external
};

struct CompareResult {
    std::vector<AgentId> external_agents;
    OutcomePath record;  // reference outcomes for non-branching measurements
    std::vector<CompareRow> rows;
};

inline CompareResult compare_modes(const Protocol& p, std::vector<AgentId> external, OutcomePath record) {
    if (external.empty()) external = default_external_agents(p.spec);
    auto ext = run_exact(p, RunMode::exact_external, external);
    auto col = run_exact(p, RunMode::exact_collapse);
    const auto ext_leaves = tree_leaves(ext);
    const auto col_leaves = tree_leaves(col);

    std::map<std::string, std::string> ref(record.begin(), record.end());
    std::vector<std::string> branching;  // measurement names that branch externally, in order
    for (const auto& st : p.steps) {
        if (st.kind != StepKind::measure) continue;
        if (detail::measure_branches(p, st, external, RunMode::exact_external))
            branching.push_back(st.name);
        else if (!ref.count(st.name))
            throw Error("comparison record is missing an outcome for measurement '" + st.name + "'");
    }

    CompareResult out{external, std::move(record), {}};
    for (const TreeNode* leaf : ext_leaves) {
        std::map<std::string, std::string> combo(leaf->path.begin(), leaf->path.end());

        // The single collapse history: reference outcomes everywhere, this
        // combination on the externally-resolved measurements.
        OutcomePath target;
        for (const auto& st : p.steps) {
            if (st.kind != StepKind::measure) continue;
            const auto hit = combo.find(st.name);
            if (hit != combo.end())
                target.emplace_back(st.name, hit->second);
            else if (detail::is_listed(branching, st.name))
                break;  // this external leaf was truncated before st
            else
                target.emplace_back(st.name, ref.at(st.name));
        }
        double p_path = 0.0;
        for (const TreeNode* l : col_leaves) {
            if (l->path.size() > target.size() ||
                !std::equal(l->path.begin(), l->path.end(), target.begin()))
                continue;
            if (l->path.size() == target.size() || l->p_cum == 0.0) {
                p_path = l->p_cum;
                break;
            }
        }

        double total = 0.0;
        for (const TreeNode* l : col_leaves) {
            if (l->p_cum == 0.0) continue;
            std::map<std::string, std::string> got(l->path.begin(), l->path.end());
            bool match = true;
            for (const auto& name : branching) {
                const auto want = combo.find(name);
                const auto have = got.find(name);
                if (want == combo.end() || have == got.end() || want->second != have->second) {
                    match = false;
                    break;
                }
            }
            if (match) total += l->p_cum;
        }

        out.rows.push_back({leaf->path, leaf->p_cum, p_path, total, total - leaf->p_cum});
    }
    return out;
}

}  // namespace relq
