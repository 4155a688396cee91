#pragma once

// Projective measurements: Born weights, collapse, seeded sampling, and
// time-ordered operator chains with their step-by-step equivalents.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hilbert.hpp"
#include "timestamp.hpp"

namespace relq {

struct OutcomeRecord {
    std::string measurement;
    std::string outcome;
    double probability = 0;
    TimeStamp time{};
};

// Ordered outcomes; binary measurements store their complement explicitly.
struct ProjectiveMeasurement {
    std::string name;
    SpacePtr space;
    std::optional<LinearOp> premeasurement;  // kind unitary when present
    std::vector<std::pair<std::string, LinearOp>> outcomes;

    static ProjectiveMeasurement make(std::string name, SpacePtr space,
                                      std::vector<std::pair<std::string, LinearOp>> outcomes,
                                      std::optional<LinearOp> premeasurement = std::nullopt) {
        if (!space) throw Error("measurement needs a space");
        if (outcomes.empty()) throw Error("measurement '" + name + "' has no outcomes");
        const int n = space->total_dim();
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (outcomes[i].second.kind != OpKind::projector)
                throw Error("measurement '" + name + "' outcome '" + outcomes[i].first +
                            "' is not a projector");
            if (!same_space(outcomes[i].second.space, space))
                throw Error("measurement '" + name + "' outcome '" + outcomes[i].first +
                            "' is on the wrong space");
            for (std::size_t j = i + 1; j < outcomes.size(); ++j)
                if (outcomes[i].first == outcomes[j].first)
                    throw Error("measurement '" + name + "' repeats outcome label '" +
                                outcomes[i].first + "'");
        }
        for (std::size_t i = 0; i < outcomes.size(); ++i)
            for (std::size_t j = i + 1; j < outcomes.size(); ++j) {
                auto prod = detail::mat_mul(outcomes[i].second.matrix, outcomes[j].second.matrix, n);
                double dev = 0;
                for (const auto& x : prod) dev = std::max(dev, std::abs(x));
                if (dev > kStructuralTol)
                    throw Error("measurement '" + name + "': outcomes '" + outcomes[i].first +
                                "' and '" + outcomes[j].first + "' are not orthogonal");
            }
        std::vector<Amplitude> sum(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                                   Amplitude(0, 0));
        for (const auto& [label, p] : outcomes)
            for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += p.matrix[k];
        if (detail::max_abs_diff(sum, detail::mat_identity(n)) > kStructuralTol)
            throw Error("measurement '" + name + "' is incomplete: outcome projectors do not sum to identity");
        if (premeasurement) {
            if (premeasurement->kind != OpKind::unitary)
                throw Error("measurement '" + name + "' premeasurement is not unitary");
            if (!same_space(premeasurement->space, space))
                throw Error("measurement '" + name + "' premeasurement is on the wrong space");
        }
        return ProjectiveMeasurement{std::move(name), std::move(space), std::move(premeasurement),
                                     std::move(outcomes)};
    }

    const LinearOp& projector(const std::string& label) const {
        for (const auto& [l, p] : outcomes)
            if (l == label) return p;
        throw Error("measurement '" + name + "' has no outcome '" + label + "'");
    }
};

inline double born_probability(const StateVector& state, const LinearOp& projector) {
    detail::require_normalized(state, "born_probability");
    if (projector.kind != OpKind::projector)
        throw Error("born_probability: operator '" + projector.name + "' is not a projector");
    return norm2(apply(projector, state));
}

struct CollapseResult {
    double probability = 0;
    StateVector state;
};

// Projective update Pψ/||Pψ||; a branch with probability <= 1e-12 cannot be
// realized and signals an impossible branch.
inline CollapseResult collapse(const StateVector& state, const LinearOp& projector) {
    detail::require_normalized(state, "collapse");
    if (projector.kind != OpKind::projector)
        throw Error("collapse: operator '" + projector.name + "' is not a projector");
    auto branch = apply(projector, state);
    const double p = norm2(branch);
    if (p <= kScalarTol)
        throw ImpossibleBranch("collapse: outcome '" + projector.name +
                               "' has probability " + std::to_string(p) + " (impossible branch)");
    const double inv = 1.0 / std::sqrt(p);
    for (auto& a : branch.amps) a *= inv;
    return CollapseResult{p, StateVector::make(branch.space, std::move(branch.amps), true)};
}

// Deterministic substream addressed by (seed, trial index). Uniform doubles
// are built from the top 53 bits of the raw engine output, so replay is
// engine-exact for a fixed build.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t trial) {
        std::uint64_t z = seed ^ ((trial + 1) * 0x9E3779B97F4A7C15ULL);
        for (int i = 0; i < 2; ++i) {
            z += 0x9E3779B97F4A7C15ULL;
            std::uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
            x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
            z = x ^ (x >> 31);
        }
        eng_.seed(z);
    }

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  private:
    std::mt19937_64 eng_;
};

struct SampleResult {
    OutcomeRecord record;
    StateVector state;
};

// Inverse-CDF draw over the declared outcome order (premeasurement applied
// first), collapsing into the drawn branch.
inline SampleResult sample(const StateVector& state, const ProjectiveMeasurement& m,
                           RngStream& rng) {
    detail::require_normalized(state, "sample");
    StateVector cur = m.premeasurement ? apply(*m.premeasurement, state) : state;
    const double u = rng.uniform();

    double cum = 0;
    std::optional<StateVector> last_branch;
    double last_p = 0;
    std::string last_label;
    for (const auto& [label, proj] : m.outcomes) {
        auto branch = apply(proj, cur);
        const double p = norm2(branch);
        cum += p;
        if (p > 0) {
            last_branch = branch;
            last_p = p;
            last_label = label;
        }
        if (u < cum) {
            const double inv = 1.0 / std::sqrt(p);
            for (auto& a : branch.amps) a *= inv;
            return SampleResult{OutcomeRecord{m.name, label, p, TimeStamp{}},
                                StateVector::make(branch.space, std::move(branch.amps), true)};
        }
    }
    if (cum < 1.0 - 1e-8)
        throw Error("sample: measurement '" + m.name + "' outcome probabilities sum to " +
                    std::to_string(cum) + " (incomplete measurement)");
    if (!last_branch) throw Error("sample: measurement '" + m.name + "' has no realizable outcome");
    const double inv = 1.0 / std::sqrt(last_p);
    for (auto& a : last_branch->amps) a *= inv;
    return SampleResult{OutcomeRecord{m.name, last_label, last_p, TimeStamp{}},
                        StateVector::make(last_branch->space, std::move(last_branch->amps), true)};
}

// Time-ordered product: steps listed first-to-last, composed right-to-left,
// so chain_operator({A, B, C}) is the matrix C*B*A. The result is a chain op
// and carries no projector or unitary invariant.
inline LinearOp chain_operator(const std::vector<LinearOp>& steps, const std::string& name = "") {
    if (steps.empty()) throw Error("chain_operator: no steps");
    const auto& space = steps.front().space;
    auto m = detail::mat_identity(space->total_dim());
    for (const auto& s : steps) {
        if (!same_space(s.space, space)) throw Error("chain_operator: steps on different spaces");
        m = detail::mat_mul(s.matrix, m, space->total_dim());
    }
    return LinearOp::chain(space, std::move(m), name);
}

// ||E ψ||^2 for a chain operator E.
inline double chain_probability(const StateVector& state, const LinearOp& chain) {
    detail::require_normalized(state, "chain_probability");
    return norm2(apply(chain, state));
}

struct SequentialStep {
    std::optional<LinearOp> unitary;
    std::optional<LinearOp> projector;
};

struct SequentialResult {
    double probability = 1;
    std::optional<StateVector> state;   // absent on a vanishing branch
    std::vector<double> factors;        // conditional Born factor per projector
};

// Step-by-step conditional decomposition: evolve, project, renormalize.
// A vanishing branch yields probability 0 with no post-state; zero
// probability is a value here, not an error.
inline SequentialResult sequential_joint(const StateVector& state,
                                         const std::vector<SequentialStep>& steps) {
    detail::require_normalized(state, "sequential_joint");
    SequentialResult out;
    StateVector cur = state;
    for (const auto& step : steps) {
        if (step.unitary) {
            if (step.unitary->kind != OpKind::unitary)
                throw Error("sequential_joint: evolution op '" + step.unitary->name + "' is not unitary");
            cur = apply(*step.unitary, cur);
        }
        if (!step.projector) continue;
        const double p = born_probability(cur, *step.projector);
        out.factors.push_back(p);
        out.probability *= p;
        if (p <= kScalarTol) {
            out.probability = out.probability < 0 ? 0 : out.probability;
            out.state.reset();
            return out;
        }
        cur = collapse(cur, *step.projector).state;
    }
    out.state = std::move(cur);
    return out;
}

// |chain probability - sequential product| for the same decomposition.
inline double verify_equivalence(const StateVector& state, const std::vector<SequentialStep>& steps) {
    std::vector<LinearOp> ops;
    for (const auto& s : steps) {
        if (s.unitary) ops.push_back(*s.unitary);
        if (s.projector) ops.push_back(*s.projector);
    }
    const double via_chain = chain_probability(state, chain_operator(ops, "equivalence_probe"));
    const double via_steps = sequential_joint(state, steps).probability;
    return std::abs(via_chain - via_steps);
}

}  // namespace relq
