#include <catch2/catch_amalgamated.hpp>

#include <relq/audit.hpp>
#include <relq/builtins.hpp>

#include "testutil.hpp"

#include <cmath>
#include <random>

using namespace relq;

namespace {

const std::vector<std::pair<std::string, std::string>> kWfrRecord = {
    {"r", "tail"}, {"z", "up"}, {"wbar", "okbar"}, {"w", "ok"}};

const AuditRow& row_of(const AuditResult& res, const std::string& id) {
    for (const auto& r : res.rows)
        if (r.statement_id == id) return r;
    FAIL("no audit row for " + id);
    throw Error("unreachable");
}

}  // namespace

TEST_CASE("bundled statement chain: exactly one unsound statement in the silent run") {
    auto p = resolve_protocol(builtin_wfr());
    auto run = record_run(p, kWfrRecord);
    auto res = audit_chain(p, run.ledgers, builtin_table1_chain());

    REQUIRE(res.rows.size() == 6);
    REQUIRE(res.violations() == 1);

    SECTION("the flagged statement ignored its speaker's own newer outcome") {
        const auto& bad = row_of(res, "F_n14");
        REQUIRE(bad.verdict == Verdict::rule2);
        REQUIRE(bad.used_time == TimeStamp{1, 1, 0});
        REQUIRE(bad.latest_time == TimeStamp{1, 1, 1});
        REQUIRE(bad.p_used == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(bad.p_latest == Catch::Approx(0.5).margin(1e-12));
    }

    SECTION("sound statements evaluate to their claimed probabilities") {
        REQUIRE(row_of(res, "Fbar_n02").verdict == Verdict::ok);
        REQUIRE(row_of(res, "Fbar_n02").p_used == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(row_of(res, "F_n12").verdict == Verdict::ok);
        REQUIRE(row_of(res, "F_n12").p_used == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(row_of(res, "F_n13").verdict == Verdict::ok);  // borrowed but retrodicted with certainty
        REQUIRE(row_of(res, "F_n13").p_used == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(row_of(res, "Wbar_n22").verdict == Verdict::ok);
        REQUIRE(row_of(res, "W_n30").verdict == Verdict::ok);
    }

    SECTION("clean statements re-evaluate to the same number after absorption") {
        const auto& wbar = row_of(res, "Wbar_n22");
        REQUIRE(wbar.latest_time == TimeStamp{1, 2, 1});
        REQUIRE(wbar.p_latest == Catch::Approx(0.0).margin(1e-12));
        const auto& w = row_of(res, "W_n30");
        REQUIRE(w.latest_time == TimeStamp{1, 2, 1});
        REQUIRE(w.p_latest == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("borrowed bases without announcement or certainty are flagged") {
    auto p = resolve_protocol(builtin_wfr());
    auto run = record_run(p, kWfrRecord);

    InferenceStatement st{"X1", "Wbar", TimeStamp{1, 1, 2}, "F", TimeStamp{1, 1, 1},
                          AssertionKind::own, "", {}, {"z", "up", 1.0}};

    SECTION("silent run: the borrowed outcome is neither announced nor certain") {
        auto res = audit_chain(p, run.ledgers, {st});
        REQUIRE(res.violations() == 1);
        REQUIRE(res.rows[0].verdict == Verdict::rule1);
        REQUIRE(res.rows[0].p_latest == Catch::Approx(1.0 / 3.0).margin(1e-12));
        REQUIRE_THAT(res.rows[0].detail, Catch::Matchers::ContainsSubstring("z=up"));
    }

    SECTION("announced run: the same borrowing is fine") {
        auto synced = record_run(resolve_protocol(builtin_wfr_synced()), kWfrRecord);
        auto res = audit_chain(p, synced.ledgers, {st});
        REQUIRE(res.violations() == 0);
        REQUIRE(res.rows[0].p_used == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("rebasing to the newest knowledge clears the announced run") {
    auto synced_protocol = resolve_protocol(builtin_wfr_synced());
    auto run = record_run(synced_protocol, kWfrRecord);
    auto chain = builtin_table1_chain();

    SECTION("the stale statement is unsound even with announcements") {
        auto res = audit_chain(synced_protocol, run.ledgers, chain);
        REQUIRE(res.violations() == 1);
        REQUIRE(row_of(res, "F_n14").verdict == Verdict::rule2);
    }

    auto rebased = rebase_to_latest(synced_protocol, run.ledgers, chain);

    SECTION("every rebased statement is sound") {
        auto res = audit_chain(synced_protocol, run.ledgers, rebased);
        REQUIRE(res.violations() == 0);
        for (const auto& r : res.rows) REQUIRE(r.verdict == Verdict::ok);
    }

    SECTION("rebasing rewrites bases, drops absorbed operations, refreshes claims") {
        for (const auto& st : rebased) REQUIRE(st.basis_agent == st.agent);

        const auto& f13 = rebased[2];
        REQUIRE(f13.id == "F_n13");
        REQUIRE(f13.basis_time == TimeStamp{1, 1, 1});
        REQUIRE(f13.ops.empty());  // the spin evolution is already in the basis
        REQUIRE(f13.claim.probability == Catch::Approx(0.5).margin(1e-12));

        const auto& f14 = rebased[3];
        REQUIRE(f14.basis_time == TimeStamp{1, 1, 1});
        REQUIRE(f14.ops.empty());  // the announced coin outcome is absorbed too
        REQUIRE(f14.claim.probability == Catch::Approx(0.5).margin(1e-12));

        const auto& w30 = rebased[5];
        REQUIRE(w30.basis_time == TimeStamp{1, 2, 2});
        REQUIRE(w30.ops.empty());
        REQUIRE(w30.claim.probability == Catch::Approx(0.0).margin(1e-12));

        const auto& fbar = rebased[0];
        REQUIRE(fbar.basis_time == TimeStamp{1, 0, 1});
        REQUIRE(fbar.ops.size() == 1);  // the spin evolution still lies ahead
        REQUIRE(fbar.claim.probability == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("chain files round-trip byte for byte") {
    auto chain = builtin_table1_chain();
    const std::string text = serialize_chain(chain);
    auto reparsed = parse_chain_text(text);
    REQUIRE(reparsed == chain);
    REQUIRE(serialize_chain(reparsed) == text);

    SECTION("strict key checking") {
        REQUIRE_THROWS_AS(parse_chain_text(R"({"statements": [], "extra": 1})"), Error);
        REQUIRE_THROWS_AS(parse_chain_text(R"({"statements": [{"id": "a"}]})"), Error);
        REQUIRE_THROWS_AS(parse_chain_text("{"), Error);
    }
}

TEST_CASE("claim evaluation is blind to global phase", "[property]") {
    auto p = resolve_protocol(builtin_wfr());
    std::mt19937_64 eng(808);
    const std::vector<FutureOp> ops = {{TimedUnitary{"record_spin", TimeStamp{1, 1, 0}}, std::nullopt},
                                       {std::nullopt, TimedProjector{"r", "tail", TimeStamp{1, 0, 1}}}};
    const ClaimSpec claim{"w", "ok", 0.0};
    for (int trial = 0; trial < 100; ++trial) {
        auto psi = testutil::random_state(p.space, eng);
        const double theta = 6.283185307179586 * (static_cast<double>(eng() % 10000) / 10000.0);
        const Amplitude phase(std::cos(theta), std::sin(theta));
        auto amps = psi.amps;
        for (auto& a : amps) a *= phase;
        auto shifted = StateVector::make(p.space, std::move(amps), true);
        REQUIRE(std::abs(evaluate_claim(p, psi, ops, claim) - evaluate_claim(p, shifted, ops, claim)) < 1e-12);
    }
}

TEST_CASE("audit lookups reject unknown names") {
    auto p = resolve_protocol(builtin_wfr());
    auto run = record_run(p, kWfrRecord);
    InferenceStatement st{"bad", "F", TimeStamp{1, 1, 2}, "F", TimeStamp{1, 1, 1},
                          AssertionKind::own, "", {}, {"nope", "x", 0.0}};
    REQUIRE_THROWS_AS(audit_chain(p, run.ledgers, {st}), Error);
    st.claim = {"z", "sideways", 0.0};
    REQUIRE_THROWS_AS(audit_chain(p, run.ledgers, {st}), Error);
    st.claim = {"z", "up", 1.0};
    st.agent = "nobody";
    REQUIRE_THROWS_AS(audit_chain(p, run.ledgers, {st}), Error);
}
