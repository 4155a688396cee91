#include <catch2/catch_amalgamated.hpp>

#include <relq/builtins.hpp>
#include <relq/protocol.hpp>

#include "testutil.hpp"

#include <random>
#include <string>

using namespace relq;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::string kBaseText = R"json({
  "subsystems": [
    {"name": "Q", "dim": 2, "basis": ["g", "e"]}
  ],
  "agents": ["ann"],
  "initial": {"terms": [{"amp": "sqrt(1/3)", "labels": ["g"]}, {"amp": "-sqrt(2/3)", "labels": ["e"]}]},
  "steps": [
    {"time": "1:00", "op": "unitary", "name": "flip", "targets": ["Q"],
     "map": [{"from": [{"amp": 1.0, "labels": ["g"]}], "to": [{"amp": 1.0, "labels": ["e"]}]},
             {"from": [{"amp": 1.0, "labels": ["e"]}], "to": [{"amp": 1.0, "labels": ["g"]}]}]},
    {"time": "1:01", "op": "measure", "name": "m", "agent": "ann", "targets": ["Q"],
     "outcomes": [{"label": "g", "vectors": [[{"amp": 1.0, "labels": ["g"]}]]},
                  {"label": "e", "complement": true}]},
    {"time": "1:02", "op": "infer", "agent": "ann"}
  ]
})json";

std::string replaced(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("protocol text parses into an exact spec") {
    auto spec = parse_protocol_text(kBaseText);
    REQUIRE(spec.subsystems.size() == 1);
    REQUIRE(spec.subsystems[0].basis == std::vector<std::string>{"g", "e"});
    REQUIRE(spec.agents == std::vector<AgentId>{"ann"});
    REQUIRE(spec.initial.size() == 2);
    REQUIRE(std::abs(spec.initial[0].amp.real() - 0.5773502691896258) < 1e-15);
    REQUIRE(std::abs(spec.initial[1].amp.real() + 0.8164965809277260) < 1e-15);
    REQUIRE(spec.initial[1].amp.imag() == 0.0);
    REQUIRE(spec.steps.size() == 3);
    REQUIRE(spec.steps[0].kind == StepKind::unitary);
    REQUIRE(spec.steps[1].kind == StepKind::measure);
    REQUIRE(spec.steps[1].outcomes[1].complement);
    REQUIRE(spec.steps[2].kind == StepKind::infer);
    REQUIRE(spec.steps[2].time == TimeStamp{1, 0, 2});

    SECTION("complex amplitude objects") {
        auto text = replaced(kBaseText, R"x("sqrt(1/3)")x", R"({"re": 0.5773502691896258, "im": 0.0})");
        auto spec2 = parse_protocol_text(text);
        REQUIRE(std::abs(spec2.initial[0].amp - spec.initial[0].amp) < 1e-15);
    }

    SECTION("resolves to working operators") {
        auto p = resolve_protocol(spec);
        REQUIRE(p.steps.size() == 4);
        REQUIRE(p.steps[0].kind == StepKind::prepare);
        REQUIRE(p.steps[0].time == TimeStamp{0, 0, 0});
        auto flipped = apply(*p.steps[1].op, p.initial);
        REQUIRE(std::abs(std::abs(flipped.amps[0]) - std::sqrt(2.0 / 3.0)) < 1e-12);
        REQUIRE(born_probability(p.initial, p.steps[2].measurement->projector("e")) ==
                Catch::Approx(2.0 / 3.0).margin(1e-12));
        REQUIRE(p.measuring_agents() == std::vector<AgentId>{"ann"});
    }
}

TEST_CASE("malformed protocol text is rejected with located errors") {
    SECTION("syntax errors carry the parser position") {
        REQUIRE_THROWS_WITH(parse_protocol_text(kBaseText.substr(0, 50)), ContainsSubstring("syntax"));
    }
    SECTION("bad amplitude strings") {
        REQUIRE_THROWS_WITH(parse_protocol_text(replaced(kBaseText, "sqrt(1/3)", "sqrt(1x3)")),
                            ContainsSubstring("amplitude"));
    }
    SECTION("unknown op") {
        REQUIRE_THROWS_WITH(parse_protocol_text(replaced(kBaseText, R"("op": "infer")", R"("op": "thing")")),
                            ContainsSubstring("unknown op"));
    }
    SECTION("unknown keys anywhere") {
        REQUIRE_THROWS_WITH(
            parse_protocol_text(replaced(kBaseText, R"("time": "1:02")", R"("extra": 1, "time": "1:02")")),
            ContainsSubstring("unknown key 'extra'"));
    }
    SECTION("bad time strings") {
        REQUIRE_THROWS_WITH(parse_protocol_text(replaced(kBaseText, "1:02", "1:2")),
                            ContainsSubstring("time"));
    }
    SECTION("missing keys") {
        REQUIRE_THROWS_WITH(parse_protocol_text(replaced(kBaseText, R"("agent": "ann", )", "")),
                            ContainsSubstring("missing key 'agent'"));
    }
}

TEST_CASE("resolution validates structure with step context") {
    auto good = parse_protocol_text(kBaseText);

    SECTION("non-increasing times") {
        auto s = good;
        s.steps[1].time = TimeStamp{1, 0, 0};
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("steps[1]") &&
                                                     ContainsSubstring("strictly increasing"));
    }
    SECTION("duplicate names") {
        auto s = good;
        s.steps[1].name = "flip";
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("duplicate step name"));
    }
    SECTION("unknown agent") {
        auto s = good;
        s.steps[1].agent = "bob";
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("unknown agent 'bob'"));
    }
    SECTION("unknown target") {
        auto s = good;
        s.steps[0].targets = {"Z"};
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("unknown target"));
    }
    SECTION("broadcast rules") {
        auto s = good;
        s.steps[1].broadcast_to = {"ann"};
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("broadcast to themselves"));
        s.steps[1].broadcast_to = {"zed"};
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("broadcast to unknown agent"));
        s.steps[1].broadcast_to = {};
        s.steps[1].broadcast_delay = 2;
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("broadcast_delay without broadcast_to"));
    }
    SECTION("broadcast delivery must stay within the substep range") {
        auto s = good;
        s.steps[1].time = TimeStamp{1, 0, 9};
        s.steps[2].time = TimeStamp{1, 1, 0};
        s.steps[1].broadcast_to = {};  // fine without broadcast
        REQUIRE_NOTHROW(resolve_protocol(s));
        auto s2 = good;
        s2.agents.push_back("bob");
        s2.steps[1].time = TimeStamp{1, 0, 9};
        s2.steps[2].time = TimeStamp{1, 1, 0};
        s2.steps[1].broadcast_to = {"bob"};
        REQUIRE_THROWS_WITH(resolve_protocol(s2), ContainsSubstring("substep range"));
    }
    SECTION("incomplete outcomes") {
        auto s = good;
        s.steps[1].outcomes.pop_back();
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("steps[1]"));
    }
    SECTION("at most one complement") {
        auto s = good;
        s.steps[1].outcomes.push_back({"x", {}, true});
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("at most one complement"));
    }
    SECTION("initial state must be normalized") {
        auto s = good;
        s.initial[0].amp = 0.9;
        REQUIRE_THROWS_WITH(resolve_protocol(s), ContainsSubstring("not normalized"));
    }
}

TEST_CASE("bundled nested-labs protocol has the expected shape") {
    auto spec = builtin_wfr();
    REQUIRE(spec.subsystems.size() == 4);
    REQUIRE(spec.agents == std::vector<AgentId>{"Fbar", "F", "Wbar", "W"});
    REQUIRE(spec.steps.size() == 9);

    auto p = resolve_protocol(spec);
    REQUIRE(p.steps.size() == 10);
    REQUIRE(p.steps[0].kind == StepKind::prepare);
    REQUIRE(p.space->total_dim() == 36);
    REQUIRE(p.measuring_agents() == std::vector<AgentId>{"Fbar", "F", "Wbar", "W"});

    SECTION("resolved evolution reproduces the three-branch state") {
        auto after = apply(*p.steps[4].op, apply(*p.steps[1].op, p.initial));
        const double a = std::sqrt(1.0 / 3.0);
        REQUIRE(testutil::state_deviation(after, {{{"head", "hbar", "down", "down"}, a},
                                                  {{"tail", "tbar", "up", "up"}, a},
                                                  {{"tail", "tbar", "down", "down"}, a}}) < 1e-12);
        REQUIRE(born_probability(after, p.steps[7].measurement->projector("okbar")) ==
                Catch::Approx(1.0 / 6.0).margin(1e-12));
        REQUIRE(born_probability(after, p.steps[9].measurement->projector("ok")) ==
                Catch::Approx(1.0 / 6.0).margin(1e-12));
        REQUIRE(chain_probability(after, chain_operator({p.steps[7].measurement->projector("okbar"),
                                                         p.steps[9].measurement->projector("ok")})) ==
                Catch::Approx(1.0 / 12.0).margin(1e-12));
    }
    SECTION("complement outcomes make honest projectors") {
        const auto& failbar = p.steps[7].measurement->projector("failbar");
        double trace = 0;
        for (int i = 0; i < 36; ++i) trace += failbar.matrix[static_cast<std::size_t>(i * 36 + i)].real();
        REQUIRE(trace == Catch::Approx(30.0).margin(1e-9));  // 36 minus the rank-1 line times dim(S)*dim(A)
    }
    SECTION("default outside observers are the late whole-lab measurers") {
        REQUIRE(default_external_agents(spec) == std::vector<AgentId>{"Wbar", "W"});
    }
}

TEST_CASE("announced variant differs from the silent one only in broadcasts") {
    auto plain = builtin_wfr();
    auto synced = builtin_wfr_synced();
    REQUIRE(plain.steps.size() == synced.steps.size());
    REQUIRE(plain.subsystems == synced.subsystems);
    REQUIRE(plain.agents == synced.agents);
    REQUIRE(plain.initial == synced.initial);
    for (std::size_t i = 0; i < plain.steps.size(); ++i) {
        auto stripped = synced.steps[i];
        stripped.broadcast_to.clear();
        stripped.broadcast_delay = 1;
        REQUIRE(stripped == plain.steps[i]);
        if (synced.steps[i].kind == StepKind::measure) {
            REQUIRE(synced.steps[i].broadcast_to.size() == 3);
            REQUIRE(synced.steps[i].broadcast_delay == 1);
            for (const auto& b : synced.steps[i].broadcast_to) REQUIRE(b != synced.steps[i].agent);
        }
    }
}

TEST_CASE("other bundled protocols resolve") {
    SECTION("friend in a box") {
        auto p = resolve_protocol(builtin_wigner());
        REQUIRE(p.steps.size() == 3);
        REQUIRE(p.steps[1].measurement->premeasurement.has_value());
        REQUIRE(default_external_agents(p.spec) == std::vector<AgentId>{"wigner"});
        auto joint = sequential_joint(p.initial, {{p.steps[1].measurement->premeasurement,
                                                   p.steps[1].measurement->projector("up")},
                                                  {std::nullopt, p.steps[2].measurement->projector("agree")}});
        REQUIRE(joint.probability == Catch::Approx(0.25).margin(1e-12));
    }
    SECTION("entangled pair exchange") {
        auto p = resolve_protocol(builtin_epr());
        REQUIRE(p.steps.size() == 3);
        REQUIRE(default_external_agents(p.spec) == std::vector<AgentId>{"Alice", "Bob"});
        REQUIRE(born_probability(p.initial, p.steps[1].measurement->projector("up")) ==
                Catch::Approx(0.5).margin(1e-12));
        auto branch = collapse(p.initial, p.steps[1].measurement->projector("up")).state;
        REQUIRE(born_probability(branch, p.steps[2].measurement->projector("down")) ==
                Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("canonical records reference real measurements and outcomes") {
        for (const std::string name : {"wfr", "wfr-synced", "wigner", "epr"}) {
            auto p = resolve_protocol(builtin_protocol(name));
            for (const auto& [meas, outcome] : canonical_record(name)) {
                bool found = false;
                for (const auto& st : p.steps)
                    if (st.kind == StepKind::measure && st.name == meas) {
                        REQUIRE_NOTHROW(st.measurement->projector(outcome));
                        found = true;
                    }
                REQUIRE(found);
            }
        }
        REQUIRE_THROWS_AS(canonical_record("nope"), Error);
        REQUIRE_THROWS_AS(builtin_protocol("nope"), Error);
    }
}

TEST_CASE("serialization round-trips the bundled protocols byte for byte") {
    for (const std::string name : {"wfr", "wfr-synced", "wigner", "epr"}) {
        auto spec = builtin_protocol(name);
        const std::string text = serialize_protocol(spec);
        auto reparsed = parse_protocol_text(text);
        REQUIRE(reparsed == spec);
        REQUIRE(serialize_protocol(reparsed) == text);
    }
}

TEST_CASE("serialization round-trips generated protocols", "[property]") {
    std::mt19937_64 eng(2212);
    const double r2 = std::sqrt(0.5);
    for (int trial = 0; trial < 100; ++trial) {
        ProtocolBuilder b;
        const int nsub = 1 + static_cast<int>(eng() % 2);
        std::vector<std::vector<std::string>> bases;
        for (int s = 0; s < nsub; ++s) {
            const int dim = 2 + static_cast<int>(eng() % 2);
            std::vector<std::string> basis;
            for (int k = 0; k < dim; ++k) basis.push_back("k" + std::to_string(k));
            b.subsystem("s" + std::to_string(s), basis);
            bases.push_back(basis);
        }
        const int nagents = 1 + static_cast<int>(eng() % 2);
        std::vector<AgentId> agents;
        for (int a = 0; a < nagents; ++a) {
            agents.push_back("a" + std::to_string(a));
            b.agent(agents.back());
        }

        const double theta = 0.1 + 1.3 * (static_cast<double>(eng() % 1000) / 1000.0);
        const double phi = 6.28 * (static_cast<double>(eng() % 1000) / 1000.0);
        std::vector<std::string> lo, hi;
        for (int s = 0; s < nsub; ++s) {
            lo.push_back(bases[static_cast<std::size_t>(s)].front());
            hi.push_back(bases[static_cast<std::size_t>(s)].back());
        }
        b.initial({{std::cos(theta), lo},
                   {Amplitude(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi)), hi}});

        const int nsteps = 1 + static_cast<int>(eng() % 4);
        for (int k = 0; k < nsteps; ++k) {
            const std::string t = "1:" + std::to_string(k) + std::to_string(eng() % 7);
            const int sub = static_cast<int>(eng() % static_cast<std::uint64_t>(nsub));
            const auto& basis = bases[static_cast<std::size_t>(sub)];
            const std::string target = "s" + std::to_string(sub);
            const AgentId agent = agents[eng() % agents.size()];
            switch (eng() % 3) {
                case 0:  // basis rotation on one subsystem
                    b.unitary(t, "u" + std::to_string(k), {target},
                              {{{{r2, {basis[0]}}, {r2, {basis[1]}}}, {{1.0, {basis[0]}}}},
                               {{{r2, {basis[0]}}, {-r2, {basis[1]}}}, {{1.0, {basis[1]}}}}});
                    break;
                case 1: {  // full-basis readout, sometimes announced
                    std::vector<OutcomeSpec> outs;
                    if (eng() % 2 == 0) {
                        for (const auto& lbl : basis) outs.push_back({lbl, {{{1.0, {lbl}}}}, false});
                    } else {
                        outs.push_back({basis[0], {{{1.0, {basis[0]}}}}, false});
                        outs.push_back({"rest", {}, true});
                    }
                    std::vector<AgentId> to;
                    if (nagents == 2 && eng() % 2 == 0)
                        for (const auto& a : agents)
                            if (a != agent) to.push_back(a);
                    const int delay = to.empty() ? 1 : 1 + static_cast<int>(eng() % 2);
                    b.measure(t, "m" + std::to_string(k), agent, {target}, outs, to, delay);
                    break;
                }
                default:
                    b.infer(t, agent, eng() % 2 == 0 ? "" : "note" + std::to_string(k));
            }
        }

        const ProtocolSpec spec = b.spec();
        REQUIRE_NOTHROW(resolve_protocol(spec));
        const std::string text = serialize_protocol(spec);
        auto reparsed = parse_protocol_text(text);
        REQUIRE(reparsed == spec);
        REQUIRE(serialize_protocol(reparsed) == text);
    }
}
