#pragma once

// Bundled protocol definitions: the nested-labs experiment (with and without
// outcome announcements), a single friend-in-a-box scenario, and a two-party
// entangled-pair exchange. Each also carries a canonical outcome record used
// when a single collapse history has to be singled out for comparison.

#include <string>
#include <utility>
#include <vector>

#include "relq/protocol.hpp"

namespace relq {

namespace detail {

inline OutcomeSpec out(std::string label, std::vector<std::vector<TermSpec>> vectors) {
    return {std::move(label), std::move(vectors), false};
}

inline OutcomeSpec rest(std::string label) { return {std::move(label), {}, true}; }

}  // namespace detail

// Nested-labs experiment: a coin lab (R with memory Abar) and a spin lab
// (S with memory A), each later measured as a whole by an outside observer.
inline ProtocolSpec builtin_wfr() {
    const double r2 = std::sqrt(0.5);
    ProtocolBuilder b;
    b.subsystem("R", {"head", "tail"})
        .subsystem("Abar", {"init", "hbar", "tbar"})
        .subsystem("S", {"down", "up"})
        .subsystem("A", {"init", "up", "down"})
        .agent("Fbar")
        .agent("F")
        .agent("Wbar")
        .agent("W")
        .initial({{std::sqrt(1.0 / 3.0), {"head", "init", "down", "init"}},
                  {std::sqrt(2.0 / 3.0), {"tail", "init", "down", "init"}}});
    b.unitary("1:00", "record_coin", {"R", "Abar", "S"},
              {{{{1.0, {"head", "init", "down"}}}, {{1.0, {"head", "hbar", "down"}}}},
               {{{1.0, {"tail", "init", "down"}}},
                {{r2, {"tail", "tbar", "down"}}, {r2, {"tail", "tbar", "up"}}}}});
    b.measure("1:01", "r", "Fbar", {"R"},
              {detail::out("head", {{{1.0, {"head"}}}}), detail::out("tail", {{{1.0, {"tail"}}}})});
    b.infer("1:02", "Fbar", "coin_inference");
    b.unitary("1:10", "record_spin", {"S", "A"},
              {{{{1.0, {"down", "init"}}}, {{1.0, {"down", "down"}}}},
               {{{1.0, {"up", "init"}}}, {{1.0, {"up", "up"}}}}});
    b.measure("1:11", "z", "F", {"S"},
              {detail::out("up", {{{1.0, {"up"}}}}), detail::out("down", {{{1.0, {"down"}}}})});
    b.infer("1:12", "F", "spin_inference");
    b.measure("1:21", "wbar", "Wbar", {"R", "Abar"},
              {detail::out("okbar", {{{r2, {"head", "hbar"}}, {-r2, {"tail", "tbar"}}}}),
               detail::rest("failbar")});
    b.infer("1:22", "Wbar", "coin_lab_inference");
    b.measure("1:31", "w", "W", {"S", "A"},
              {detail::out("ok", {{{r2, {"down", "down"}}, {-r2, {"up", "up"}}}}),
               detail::rest("fail")});
    return b.spec();
}

// Same experiment, but every outcome is announced to everyone one substep
// after it is obtained.
inline ProtocolSpec builtin_wfr_synced() { return with_full_broadcast(builtin_wfr()); }

// One friend measures a spin inside a sealed lab; an outside observer then
// measures the lab as a whole in a basis that detects the superposition.
inline ProtocolSpec builtin_wigner() {
    const double r2 = std::sqrt(0.5);
    ProtocolBuilder b;
    b.subsystem("S", {"down", "up"})
        .subsystem("A", {"init", "up", "down"})
        .agent("friend")
        .agent("wigner")
        .initial({{r2, {"down", "init"}}, {r2, {"up", "init"}}});
    b.measure("1:01", "z", "friend", {"S"},
              {detail::out("up", {{{1.0, {"up"}}}}), detail::out("down", {{{1.0, {"down"}}}})},
              {}, 1,
              PremeasureSpec{{"S", "A"},
                             {{{{1.0, {"down", "init"}}}, {{1.0, {"down", "down"}}}},
                              {{{1.0, {"up", "init"}}}, {{1.0, {"up", "up"}}}}}});
    b.measure("1:11", "wig", "wigner", {"S", "A"},
              {detail::out("agree", {{{r2, {"down", "down"}}, {r2, {"up", "up"}}}}),
               detail::rest("other")});
    return b.spec();
}

// Two parties share an entangled pair and measure their own halves, each
// announcing the result to the other.
inline ProtocolSpec builtin_epr() {
    const double r2 = std::sqrt(0.5);
    ProtocolBuilder b;
    b.subsystem("Q1", {"up", "down"})
        .subsystem("Q2", {"up", "down"})
        .agent("Alice")
        .agent("Bob")
        .initial({{r2, {"up", "down"}}, {-r2, {"down", "up"}}});
    b.measure("1:01", "a", "Alice", {"Q1"},
              {detail::out("up", {{{1.0, {"up"}}}}), detail::out("down", {{{1.0, {"down"}}}})},
              {"Bob"}, 1);
    b.measure("1:11", "b", "Bob", {"Q2"},
              {detail::out("up", {{{1.0, {"up"}}}}), detail::out("down", {{{1.0, {"down"}}}})},
              {"Alice"}, 1);
    return b.spec();
}

// Representative collapse history used by mode comparisons: one outcome per
// measurement, in protocol order.
inline std::vector<std::pair<std::string, std::string>> canonical_record(const std::string& name) {
    if (name == "wfr" || name == "wfr-synced")
        return {{"r", "tail"}, {"z", "up"}, {"wbar", "okbar"}, {"w", "ok"}};
    if (name == "wigner") return {{"z", "up"}, {"wig", "agree"}};
    if (name == "epr") return {{"a", "up"}, {"b", "down"}};
    throw Error("no canonical record for protocol '" + name + "'");
}

inline ProtocolSpec builtin_protocol(const std::string& name) {
    if (name == "wfr") return builtin_wfr();
    if (name == "wfr-synced") return builtin_wfr_synced();
    if (name == "wigner") return builtin_wigner();
    if (name == "epr") return builtin_epr();
    throw Error("unknown builtin protocol '" + name + "' (available: wfr, wfr-synced, wigner, epr)");
}

}  // namespace relq
