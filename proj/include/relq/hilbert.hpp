#pragma once

// Finite-dimensional tensor-product spaces with label-addressed subsystems,
// dense state vectors and operators. Basis ordering is row-major: the last
// listed subsystem varies fastest.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relq {

using Amplitude = std::complex<double>;

inline constexpr double kStructuralTol = 1e-10;  // operator invariants
inline constexpr double kScalarTol = 1e-12;      // scalar equalities

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a zero-probability branch is asked to produce a post-state.
struct ImpossibleBranch : Error {
    explicit ImpossibleBranch(const std::string& what) : Error(what) {}
};

struct SubsystemSpec {
    std::string name;
    int dim = 0;
    std::vector<std::string> basis;

    bool operator==(const SubsystemSpec& o) const {
        return name == o.name && dim == o.dim && basis == o.basis;
    }
};

class CompositeSpace;
using SpacePtr = std::shared_ptr<const CompositeSpace>;

class CompositeSpace {
  public:
    static SpacePtr make(std::vector<SubsystemSpec> subs) {
        if (subs.empty()) throw Error("space needs at least one subsystem");
        for (const auto& s : subs) {
            if (s.dim <= 0) throw Error("subsystem '" + s.name + "' has non-positive dim");
            if (static_cast<int>(s.basis.size()) != s.dim)
                throw Error("subsystem '" + s.name + "' basis size != dim");
            for (std::size_t i = 0; i < s.basis.size(); ++i)
                for (std::size_t j = i + 1; j < s.basis.size(); ++j)
                    if (s.basis[i] == s.basis[j])
                        throw Error("subsystem '" + s.name + "' has duplicate basis label '" +
                                    s.basis[i] + "'");
        }
        for (std::size_t i = 0; i < subs.size(); ++i)
            for (std::size_t j = i + 1; j < subs.size(); ++j)
                if (subs[i].name == subs[j].name)
                    throw Error("duplicate subsystem name '" + subs[i].name + "'");
        return SpacePtr(new CompositeSpace(std::move(subs)));
    }

    const std::vector<SubsystemSpec>& subsystems() const { return subs_; }
    std::size_t count() const { return subs_.size(); }
    int total_dim() const { return total_; }

    int subsystem_index(const std::string& name) const {
        for (std::size_t k = 0; k < subs_.size(); ++k)
            if (subs_[k].name == name) return static_cast<int>(k);
        throw Error("unknown subsystem '" + name + "'");
    }

    const SubsystemSpec& subsystem(const std::string& name) const {
        return subs_[static_cast<std::size_t>(subsystem_index(name))];
    }

    int basis_index(int sub, const std::string& label) const {
        const auto& s = subs_[static_cast<std::size_t>(sub)];
        for (int i = 0; i < s.dim; ++i)
            if (s.basis[static_cast<std::size_t>(i)] == label) return i;
        throw Error("unknown basis label '" + label + "' on subsystem '" + s.name + "'");
    }

    int index_of(const std::vector<int>& coords) const {
        int idx = 0;
        for (std::size_t k = 0; k < subs_.size(); ++k) idx += coords[k] * strides_[k];
        return idx;
    }

    std::vector<int> coords_of(int index) const {
        std::vector<int> c(subs_.size());
        for (std::size_t k = 0; k < subs_.size(); ++k) {
            c[k] = index / strides_[k];
            index %= strides_[k];
        }
        return c;
    }

    int index_of_labels(const std::vector<std::string>& labels) const {
        if (labels.size() != subs_.size())
            throw Error("label tuple arity mismatch: got " + std::to_string(labels.size()) +
                        ", space has " + std::to_string(subs_.size()) + " subsystems");
        std::vector<int> c(subs_.size());
        for (std::size_t k = 0; k < subs_.size(); ++k)
            c[k] = basis_index(static_cast<int>(k), labels[k]);
        return index_of(c);
    }

    std::vector<std::string> labels_of(int index) const {
        auto c = coords_of(index);
        std::vector<std::string> out(subs_.size());
        for (std::size_t k = 0; k < subs_.size(); ++k)
            out[k] = subs_[k].basis[static_cast<std::size_t>(c[k])];
        return out;
    }

    bool operator==(const CompositeSpace& o) const { return subs_ == o.subs_; }
    bool operator!=(const CompositeSpace& o) const { return !(*this == o); }

  private:
    explicit CompositeSpace(std::vector<SubsystemSpec> subs) : subs_(std::move(subs)) {
        total_ = 1;
        for (const auto& s : subs_) total_ *= s.dim;
        strides_.assign(subs_.size(), 1);
        for (int k = static_cast<int>(subs_.size()) - 2; k >= 0; --k)
            strides_[static_cast<std::size_t>(k)] =
                strides_[static_cast<std::size_t>(k) + 1] * subs_[static_cast<std::size_t>(k) + 1].dim;
    }

    std::vector<SubsystemSpec> subs_;
    std::vector<int> strides_;
    int total_ = 1;
};

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
    return a == b || (a && b && *a == *b);
}

struct StateVector {
    SpacePtr space;
    std::vector<Amplitude> amps;
    bool normalized = false;

    static StateVector make(SpacePtr space, std::vector<Amplitude> amps, bool normalized = false) {
        if (!space) throw Error("state needs a space");
        if (static_cast<int>(amps.size()) != space->total_dim())
            throw Error("amplitude count " + std::to_string(amps.size()) + " != space dim " +
                        std::to_string(space->total_dim()));
        StateVector s{std::move(space), std::move(amps), normalized};
        if (normalized) {
            double n2 = 0;
            for (const auto& a : s.amps) n2 += std::norm(a);
            if (std::abs(n2 - 1.0) > kScalarTol)
                throw Error("state flagged normalized but |norm^2 - 1| = " + std::to_string(n2 - 1.0));
        }
        return s;
    }
};

inline double norm2(const StateVector& s) {
    double n2 = 0;
    for (const auto& a : s.amps) n2 += std::norm(a);
    return n2;
}

// Basis state |labels...> on `space`, one label per subsystem.
inline StateVector basis_state(const SpacePtr& space, const std::vector<std::string>& labels) {
    std::vector<Amplitude> amps(static_cast<std::size_t>(space->total_dim()), Amplitude(0, 0));
    amps[static_cast<std::size_t>(space->index_of_labels(labels))] = Amplitude(1, 0);
    return StateVector::make(space, std::move(amps), true);
}

enum class OpKind { unitary, projector, chain };

inline const char* to_string(OpKind k) {
    switch (k) {
        case OpKind::unitary: return "unitary";
        case OpKind::projector: return "projector";
        case OpKind::chain: return "chain";
    }
    return "?";
}

namespace detail {

inline std::vector<Amplitude> mat_mul(const std::vector<Amplitude>& a,
                                      const std::vector<Amplitude>& b, int n) {
    std::vector<Amplitude> c(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                             Amplitude(0, 0));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const Amplitude aik = a[static_cast<std::size_t>(i * n + k)];
            if (aik == Amplitude(0, 0)) continue;
            for (int j = 0; j < n; ++j)
                c[static_cast<std::size_t>(i * n + j)] +=
                    aik * b[static_cast<std::size_t>(k * n + j)];
        }
    return c;
}

inline std::vector<Amplitude> mat_adjoint(const std::vector<Amplitude>& a, int n) {
    std::vector<Amplitude> c(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            c[static_cast<std::size_t>(j * n + i)] = std::conj(a[static_cast<std::size_t>(i * n + j)]);
    return c;
}

inline std::vector<Amplitude> mat_identity(int n) {
    std::vector<Amplitude> c(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                             Amplitude(0, 0));
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i * n + i)] = Amplitude(1, 0);
    return c;
}

inline double max_abs_diff(const std::vector<Amplitude>& a, const std::vector<Amplitude>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
inline std::vector<double> hermitian_eigenvalues(std::vector<Amplitude> a, int n) {
    auto off = [&]() {
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) s += std::norm(a[static_cast<std::size_t>(i * n + j)]);
        return std::sqrt(s);
    };
    double scale = 0;
    for (const auto& x : a) scale = std::max(scale, std::abs(x));
    if (scale == 0) return std::vector<double>(static_cast<std::size_t>(n), 0.0);

    for (int sweep = 0; sweep < 60 && off() > 1e-14 * scale * n; ++sweep) {
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const Amplitude apq = a[static_cast<std::size_t>(p * n + q)];
                const double b = std::abs(apq);
                if (b <= 1e-300) continue;
                const Amplitude phase = apq / b;  // e^{i phi}
                const double app = a[static_cast<std::size_t>(p * n + p)].real();
                const double aqq = a[static_cast<std::size_t>(q * n + q)].real();
                const double tau = (aqq - app) / (2 * b);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1 + tau * tau));
                const double c = 1 / std::sqrt(1 + t * t);
                const double s = t * c;
                // V = [[c, s],[-s e^{-i phi}, c e^{-i phi}]] acting on coords (p, q); A <- V^† A V.
                for (int i = 0; i < n; ++i) {
                    const Amplitude aip = a[static_cast<std::size_t>(i * n + p)];
                    const Amplitude aiq = a[static_cast<std::size_t>(i * n + q)];
                    a[static_cast<std::size_t>(i * n + p)] = c * aip - s * std::conj(phase) * aiq;
                    a[static_cast<std::size_t>(i * n + q)] = s * aip + c * std::conj(phase) * aiq;
                }
                for (int j = 0; j < n; ++j) {
                    const Amplitude apj = a[static_cast<std::size_t>(p * n + j)];
                    const Amplitude aqj = a[static_cast<std::size_t>(q * n + j)];
                    a[static_cast<std::size_t>(p * n + j)] = c * apj - s * phase * aqj;
                    a[static_cast<std::size_t>(q * n + j)] = s * apj + c * phase * aqj;
                }
            }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i * n + i)].real();
    std::sort(ev.begin(), ev.end(), std::greater<double>());
    return ev;
}

}  // namespace detail

struct LinearOp {
    SpacePtr space;
    std::vector<Amplitude> matrix;  // row-major, dim x dim
    OpKind kind = OpKind::chain;
    std::string name;

    int dim() const { return space->total_dim(); }

    static LinearOp unitary(SpacePtr space, std::vector<Amplitude> m, std::string name = "") {
        LinearOp op = raw(std::move(space), std::move(m), OpKind::unitary, std::move(name));
        const int n = op.dim();
        auto gram = detail::mat_mul(detail::mat_adjoint(op.matrix, n), op.matrix, n);
        const double dev = detail::max_abs_diff(gram, detail::mat_identity(n));
        if (dev > kStructuralTol)
            throw Error("op '" + op.name + "' is not unitary: ||U^H U - I||_max = " + std::to_string(dev));
        return op;
    }

    static LinearOp projector(SpacePtr space, std::vector<Amplitude> m, std::string name = "") {
        LinearOp op = raw(std::move(space), std::move(m), OpKind::projector, std::move(name));
        const int n = op.dim();
        const double herm = detail::max_abs_diff(op.matrix, detail::mat_adjoint(op.matrix, n));
        if (herm > kStructuralTol)
            throw Error("op '" + op.name + "' is not Hermitian: deviation " + std::to_string(herm));
        const double idem = detail::max_abs_diff(detail::mat_mul(op.matrix, op.matrix, n), op.matrix);
        if (idem > kStructuralTol)
            throw Error("op '" + op.name + "' is not idempotent: ||P^2 - P||_max = " + std::to_string(idem));
        return op;
    }

    static LinearOp chain(SpacePtr space, std::vector<Amplitude> m, std::string name = "") {
        return raw(std::move(space), std::move(m), OpKind::chain, std::move(name));
    }

    static LinearOp raw(SpacePtr space, std::vector<Amplitude> m, OpKind kind, std::string name = "") {
        if (!space) throw Error("op needs a space");
        const auto n = static_cast<std::size_t>(space->total_dim());
        if (m.size() != n * n)
            throw Error("matrix size " + std::to_string(m.size()) + " != dim^2 = " + std::to_string(n * n));
        return LinearOp{std::move(space), std::move(m), kind, std::move(name)};
    }

    static LinearOp identity(SpacePtr space, std::string name = "") {
        auto m = detail::mat_identity(space->total_dim());
        return LinearOp{std::move(space), std::move(m), OpKind::unitary, std::move(name)};
    }
};

// Projector onto the span of `vectors` (must be orthonormal within tolerance).
inline LinearOp projector_onto(const SpacePtr& space, const std::vector<StateVector>& vectors,
                               const std::string& name = "") {
    const int n = space->total_dim();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (!same_space(vectors[i].space, space)) throw Error("projector vector on wrong space");
        for (std::size_t j = 0; j <= i; ++j) {
            Amplitude g(0, 0);
            for (int k = 0; k < n; ++k)
                g += std::conj(vectors[j].amps[static_cast<std::size_t>(k)]) *
                     vectors[i].amps[static_cast<std::size_t>(k)];
            const Amplitude want = (i == j) ? Amplitude(1, 0) : Amplitude(0, 0);
            if (std::abs(g - want) > kStructuralTol)
                throw Error("projector '" + name + "': spanning vectors not orthonormal");
        }
    }
    std::vector<Amplitude> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Amplitude(0, 0));
    for (const auto& v : vectors)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                m[static_cast<std::size_t>(i * n + j)] +=
                    v.amps[static_cast<std::size_t>(i)] * std::conj(v.amps[static_cast<std::size_t>(j)]);
    return LinearOp::projector(space, std::move(m), name);
}

inline LinearOp complement_projector(const LinearOp& p, const std::string& name = "") {
    if (p.kind != OpKind::projector) throw Error("complement of a non-projector");
    const int n = p.dim();
    auto m = detail::mat_identity(n);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] -= p.matrix[i];
    return LinearOp::projector(p.space, std::move(m), name);
}

struct Bipartition {
    std::vector<std::string> left;
    std::vector<std::string> right;
};

// --- Core operations ---------------------------------------------------

// Tensor product of states on disjoint subsystem sets; the result's space
// concatenates the factors' subsystems in argument order.
inline StateVector tensor_state(const std::vector<StateVector>& factors) {
    if (factors.empty()) throw Error("tensor_state needs at least one factor");
    std::vector<SubsystemSpec> subs;
    for (const auto& f : factors)
        for (const auto& s : f.space->subsystems()) subs.push_back(s);
    auto space = CompositeSpace::make(std::move(subs));  // rejects duplicate names

    std::vector<Amplitude> amps{Amplitude(1, 0)};
    bool normalized = true;
    for (const auto& f : factors) {
        std::vector<Amplitude> next;
        next.reserve(amps.size() * f.amps.size());
        for (const auto& a : amps)
            for (const auto& b : f.amps) next.push_back(a * b);
        amps = std::move(next);
        normalized = normalized && f.normalized;
    }
    return StateVector::make(std::move(space), std::move(amps), normalized);
}

namespace detail {

// Positions of op's subsystems inside the full space, validated by name/dim/basis.
inline std::vector<int> embed_positions(const LinearOp& op, const SpacePtr& full) {
    std::vector<int> pos;
    pos.reserve(op.space->count());
    for (const auto& s : op.space->subsystems()) {
        const int k = full->subsystem_index(s.name);
        if (!(full->subsystems()[static_cast<std::size_t>(k)] == s))
            throw Error("subsystem '" + s.name + "' differs between op space and full space");
        pos.push_back(k);
    }
    return pos;
}

}  // namespace detail

// Embed an operator acting on a subset of subsystems (addressed by label)
// into the full space, tensoring identity elsewhere.
inline LinearOp embed_op(const LinearOp& op, const SpacePtr& full) {
    const auto pos = detail::embed_positions(op, full);
    const int n = full->total_dim();
    const int m = op.dim();
    std::vector<Amplitude> out(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                               Amplitude(0, 0));
    // sub-index and rest-key for every full index
    std::vector<int> subidx(static_cast<std::size_t>(n)), restkey(static_cast<std::size_t>(n));
    for (int I = 0; I < n; ++I) {
        auto c = full->coords_of(I);
        int si = 0, rk = 0;
        for (std::size_t k = 0; k < op.space->count(); ++k)
            si = si * op.space->subsystems()[k].dim + c[static_cast<std::size_t>(pos[k])];
        for (std::size_t k = 0; k < full->count(); ++k) {
            if (std::find(pos.begin(), pos.end(), static_cast<int>(k)) != pos.end()) continue;
            rk = rk * full->subsystems()[k].dim + c[k];
        }
        subidx[static_cast<std::size_t>(I)] = si;
        restkey[static_cast<std::size_t>(I)] = rk;
    }
    for (int I = 0; I < n; ++I)
        for (int J = 0; J < n; ++J) {
            if (restkey[static_cast<std::size_t>(I)] != restkey[static_cast<std::size_t>(J)]) continue;
            out[static_cast<std::size_t>(I) * static_cast<std::size_t>(n) + static_cast<std::size_t>(J)] =
                op.matrix[static_cast<std::size_t>(subidx[static_cast<std::size_t>(I)] * m +
                                                    subidx[static_cast<std::size_t>(J)])];
        }
    return LinearOp{full, std::move(out), op.kind, op.name};
}

inline StateVector apply(const LinearOp& op, const StateVector& s) {
    if (!same_space(op.space, s.space))
        throw Error("apply: op space and state space differ (no implicit embedding)");
    const int n = op.dim();
    std::vector<Amplitude> out(static_cast<std::size_t>(n), Amplitude(0, 0));
    for (int i = 0; i < n; ++i) {
        Amplitude acc(0, 0);
        const std::size_t row = static_cast<std::size_t>(i) * static_cast<std::size_t>(n);
        for (int j = 0; j < n; ++j) acc += op.matrix[row + static_cast<std::size_t>(j)] * s.amps[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    const bool keep_norm = s.normalized && op.kind == OpKind::unitary;
    return StateVector::make(s.space, std::move(out), keep_norm);
}

// Factored application of an operator on a subsystem subset, equivalent to
// apply(embed_op(op, s.space), s) without forming the embedded matrix.
inline StateVector apply_factored(const LinearOp& op, const StateVector& s) {
    if (same_space(op.space, s.space)) return apply(op, s);
    const auto& full = s.space;
    const auto pos = detail::embed_positions(op, full);
    const int n = full->total_dim();
    const int m = op.dim();

    std::vector<int> substride(op.space->count());
    {
        int acc = 1;
        for (int k = static_cast<int>(op.space->count()) - 1; k >= 0; --k) {
            substride[static_cast<std::size_t>(k)] = acc;
            acc *= op.space->subsystems()[static_cast<std::size_t>(k)].dim;
        }
    }
    std::vector<int> subidx(static_cast<std::size_t>(n));
    std::vector<int> base(static_cast<std::size_t>(n), 0);  // full index with op coords zeroed
    for (int I = 0; I < n; ++I) {
        auto c = full->coords_of(I);
        int si = 0;
        for (std::size_t k = 0; k < op.space->count(); ++k) {
            si += c[static_cast<std::size_t>(pos[k])] * substride[k];
            c[static_cast<std::size_t>(pos[k])] = 0;
        }
        subidx[static_cast<std::size_t>(I)] = si;
        base[static_cast<std::size_t>(I)] = full->index_of(c);
    }
    // full-index offset contributed by each sub-basis index (rest-independent)
    std::vector<int> offset(static_cast<std::size_t>(m), 0);
    for (int I = 0; I < n; ++I)
        offset[static_cast<std::size_t>(subidx[static_cast<std::size_t>(I)])] =
            I - base[static_cast<std::size_t>(I)];

    std::vector<Amplitude> out(static_cast<std::size_t>(n), Amplitude(0, 0));
    for (int I = 0; I < n; ++I) {
        if (base[static_cast<std::size_t>(I)] != I) continue;  // visit each rest-block once
        for (int i = 0; i < m; ++i) {
            Amplitude acc(0, 0);
            for (int j = 0; j < m; ++j)
                acc += op.matrix[static_cast<std::size_t>(i * m + j)] *
                       s.amps[static_cast<std::size_t>(I + offset[static_cast<std::size_t>(j)])];
            out[static_cast<std::size_t>(I + offset[static_cast<std::size_t>(i)])] = acc;
        }
    }
    const bool keep_norm = s.normalized && op.kind == OpKind::unitary;
    return StateVector::make(s.space, std::move(out), keep_norm);
}

// <a|b>, conjugate-linear in the first argument.
inline Amplitude inner(const StateVector& a, const StateVector& b) {
    if (!same_space(a.space, b.space)) throw Error("inner: states on different spaces");
    Amplitude acc(0, 0);
    for (std::size_t i = 0; i < a.amps.size(); ++i) acc += std::conj(a.amps[i]) * b.amps[i];
    return acc;
}

// Rescale to unit norm, preserving global phase. A zero vector has no
// direction: that is the impossible-branch signal.
inline StateVector normalize(const StateVector& s) {
    const double n2 = norm2(s);
    if (n2 <= 1e-24)
        throw ImpossibleBranch("normalize: zero vector (impossible branch)");
    const double inv = 1.0 / std::sqrt(n2);
    std::vector<Amplitude> out(s.amps.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.amps[i] * inv;
    return StateVector::make(s.space, std::move(out), true);
}

namespace detail {

inline void require_normalized(const StateVector& s, const char* who) {
    if (std::abs(norm2(s) - 1.0) > 1e-9)
        throw Error(std::string(who) + ": state not normalized");
}

// Amplitude grid reshaped across a bipartition: rows = left coords, cols = right.
inline std::vector<Amplitude> reshape(const StateVector& s, const Bipartition& cut, int* dl_out,
                                      int* dr_out) {
    const auto& space = s.space;
    std::vector<int> lpos, rpos;
    for (const auto& nm : cut.left) lpos.push_back(space->subsystem_index(nm));
    for (const auto& nm : cut.right) rpos.push_back(space->subsystem_index(nm));
    std::vector<bool> used(space->count(), false);
    for (int k : lpos) {
        if (used[static_cast<std::size_t>(k)]) throw Error("bipartition repeats a subsystem");
        used[static_cast<std::size_t>(k)] = true;
    }
    for (int k : rpos) {
        if (used[static_cast<std::size_t>(k)]) throw Error("bipartition repeats a subsystem");
        used[static_cast<std::size_t>(k)] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end())
        throw Error("bipartition does not cover all subsystems");

    int dl = 1, dr = 1;
    for (int k : lpos) dl *= space->subsystems()[static_cast<std::size_t>(k)].dim;
    for (int k : rpos) dr *= space->subsystems()[static_cast<std::size_t>(k)].dim;
    std::vector<Amplitude> m(static_cast<std::size_t>(dl) * static_cast<std::size_t>(dr));
    for (int I = 0; I < space->total_dim(); ++I) {
        auto c = space->coords_of(I);
        int li = 0, ri = 0;
        for (int k : lpos) li = li * space->subsystems()[static_cast<std::size_t>(k)].dim + c[static_cast<std::size_t>(k)];
        for (int k : rpos) ri = ri * space->subsystems()[static_cast<std::size_t>(k)].dim + c[static_cast<std::size_t>(k)];
        m[static_cast<std::size_t>(li) * static_cast<std::size_t>(dr) + static_cast<std::size_t>(ri)] =
            s.amps[static_cast<std::size_t>(I)];
    }
    *dl_out = dl;
    *dr_out = dr;
    return m;
}

}  // namespace detail

struct SchmidtResult {
    int rank = 0;
    std::vector<double> coefficients;  // singular values, descending
};

inline SchmidtResult schmidt(const StateVector& s, const Bipartition& cut, double tol = kStructuralTol) {
    detail::require_normalized(s, "schmidt");
    int dl = 0, dr = 0;
    auto m = detail::reshape(s, cut, &dl, &dr);
    // Gram matrix of the smaller side; singular values are sqrt of its eigenvalues.
    const int g = std::min(dl, dr);
    std::vector<Amplitude> gram(static_cast<std::size_t>(g) * static_cast<std::size_t>(g), Amplitude(0, 0));
    if (dl <= dr) {
        for (int i = 0; i < dl; ++i)
            for (int j = 0; j < dl; ++j) {
                Amplitude acc(0, 0);
                for (int k = 0; k < dr; ++k)
                    acc += m[static_cast<std::size_t>(i * dr + k)] * std::conj(m[static_cast<std::size_t>(j * dr + k)]);
                gram[static_cast<std::size_t>(i * g + j)] = acc;
            }
    } else {
        for (int i = 0; i < dr; ++i)
            for (int j = 0; j < dr; ++j) {
                Amplitude acc(0, 0);
                for (int k = 0; k < dl; ++k)
                    acc += std::conj(m[static_cast<std::size_t>(k * dr + i)]) * m[static_cast<std::size_t>(k * dr + j)];
                gram[static_cast<std::size_t>(i * g + j)] = acc;
            }
    }
    auto ev = detail::hermitian_eigenvalues(std::move(gram), g);
    SchmidtResult out;
    out.coefficients.reserve(ev.size());
    for (double v : ev) out.coefficients.push_back(std::sqrt(std::max(0.0, v)));
    for (double c : out.coefficients)
        if (c > tol) ++out.rank;
    return out;
}

inline int schmidt_rank(const StateVector& s, const Bipartition& cut, double tol = kStructuralTol) {
    return schmidt(s, cut, tol).rank;
}

// Tr(rho_keep^2) for the reduced density operator on `keep`.
inline double reduced_purity(const StateVector& s, const std::vector<std::string>& keep) {
    detail::require_normalized(s, "reduced_purity");
    std::vector<std::string> rest;
    for (const auto& sub : s.space->subsystems())
        if (std::find(keep.begin(), keep.end(), sub.name) == keep.end()) rest.push_back(sub.name);
    int dk = 0, de = 0;
    auto m = detail::reshape(s, Bipartition{keep, rest}, &dk, &de);
    std::vector<Amplitude> rho(static_cast<std::size_t>(dk) * static_cast<std::size_t>(dk), Amplitude(0, 0));
    for (int a = 0; a < dk; ++a)
        for (int b = 0; b < dk; ++b) {
            Amplitude acc(0, 0);
            for (int e = 0; e < de; ++e)
                acc += m[static_cast<std::size_t>(a * de + e)] * std::conj(m[static_cast<std::size_t>(b * de + e)]);
            rho[static_cast<std::size_t>(a * dk + b)] = acc;
        }
    double purity = 0;
    for (const auto& x : rho) purity += std::norm(x);
    return purity;
}

// Extend a partial orthonormal input->output map to a full unitary on `space`.
// The completion pads both sides with canonical basis vectors in index order
// (Gram-Schmidt), so it is deterministic.
inline LinearOp complete_isometry(const SpacePtr& space,
                                  const std::vector<std::pair<StateVector, StateVector>>& map,
                                  const std::string& name = "") {
    const int n = space->total_dim();
    auto check_frame = [&](const std::vector<StateVector>& vs, const char* side) {
        for (std::size_t i = 0; i < vs.size(); ++i) {
            if (!same_space(vs[i].space, space)) throw Error("complete_isometry: vector on wrong space");
            for (std::size_t j = 0; j <= i; ++j) {
                Amplitude g(0, 0);
                for (int k = 0; k < n; ++k)
                    g += std::conj(vs[j].amps[static_cast<std::size_t>(k)]) * vs[i].amps[static_cast<std::size_t>(k)];
                const Amplitude want = (i == j) ? Amplitude(1, 0) : Amplitude(0, 0);
                if (std::abs(g - want) > kStructuralTol)
                    throw Error(std::string("complete_isometry: ") + side + " vectors not orthonormal");
            }
        }
    };
    std::vector<StateVector> ins, outs;
    for (const auto& [u, v] : map) {
        ins.push_back(u);
        outs.push_back(v);
    }
    check_frame(ins, "input");
    check_frame(outs, "output");

    auto extend = [&](std::vector<StateVector> frame) {
        for (int e = 0; e < n && static_cast<int>(frame.size()) < n; ++e) {
            std::vector<Amplitude> w(static_cast<std::size_t>(n), Amplitude(0, 0));
            w[static_cast<std::size_t>(e)] = Amplitude(1, 0);
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& f : frame) {
                    Amplitude g(0, 0);
                    for (int k = 0; k < n; ++k) g += std::conj(f.amps[static_cast<std::size_t>(k)]) * w[static_cast<std::size_t>(k)];
                    for (int k = 0; k < n; ++k) w[static_cast<std::size_t>(k)] -= g * f.amps[static_cast<std::size_t>(k)];
                }
            double r2 = 0;
            for (const auto& x : w) r2 += std::norm(x);
            if (r2 < 1e-12) continue;  // candidate already in span
            const double inv = 1.0 / std::sqrt(r2);
            for (auto& x : w) x *= inv;
            frame.push_back(StateVector::make(space, std::move(w), true));
        }
        if (static_cast<int>(frame.size()) != n) throw Error("complete_isometry: completion failed");
        return frame;
    };
    const auto in_frame = extend(std::move(ins));
    const auto out_frame = extend(std::move(outs));

    std::vector<Amplitude> u(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), Amplitude(0, 0));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                u[static_cast<std::size_t>(i * n + j)] += out_frame[static_cast<std::size_t>(k)].amps[static_cast<std::size_t>(i)] *
                                                          std::conj(in_frame[static_cast<std::size_t>(k)].amps[static_cast<std::size_t>(j)]);
    return LinearOp::unitary(space, std::move(u), name);
}

}  // namespace relq
