#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "netfdi/scenario.hpp"

using namespace netfdi;

namespace {

ScenarioConfig demo_config() { return ScenarioConfig::load("data/demo_scenario.json"); }

bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

int count_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    int lines = 0;
    std::string s;
    while (std::getline(in, s)) ++lines;
    return lines;
}

}  // namespace

TEST_CASE("config serialization round-trips") {
    const ScenarioConfig cfg = demo_config();
    CHECK(ScenarioConfig::parse(cfg.serialize()) == cfg);

    // spot-check the parsed values against the document
    CHECK(cfg.pattern_file == "data/benchmark12.pattern");
    CHECK(cfg.target_rho == doctest::Approx(0.488));
    CHECK(cfg.a_rule == WeightRule::LogUniformSigned);
    CHECK(cfg.w_rule == ConsensusWeightRule::SeededRandom);
    REQUIRE(cfg.sensors.size() == 4);
    CHECK(cfg.sensors[2].measured_state == 11);  // "state": 12 is 1-based
    REQUIRE(cfg.faults.intervals.size() == 2);
    CHECK(cfg.faults.intervals[0].sensor == 2);
    CHECK(cfg.faults.intervals[0].onset == 25);
    CHECK(!cfg.faults.intervals[0].offset);
    CHECK(contains({cfg.network_edges[0].first, cfg.network_edges[0].second}, 0));

    // a config with an inline pattern and a fault window also round-trips
    ScenarioConfig inline_cfg = cfg;
    inline_cfg.pattern_file.clear();
    inline_cfg.pattern_text = "**\n**\n";
    inline_cfg.faults.intervals[1].offset = 60;
    CHECK(ScenarioConfig::parse(inline_cfg.serialize()) == inline_cfg);
}

TEST_CASE("config validation rejects malformed scenarios") {
    CHECK_THROWS(ScenarioConfig::parse("{\"a_rule\": \"fancy\"}"));

    ScenarioConfig cfg = demo_config();
    cfg.validate();  // the shipped instance is valid

    ScenarioConfig bad = cfg;
    bad.sensors[0].noise_variance = -0.1;
    CHECK_THROWS(bad.validate());

    bad = cfg;
    bad.horizon = 5;  // not beyond the burn-in
    CHECK_THROWS(bad.validate());

    bad = cfg;
    bad.sensors[0].measured_state = 40;  // outside the 12-state pattern
    CHECK_THROWS(bad.validate());

    bad = cfg;
    bad.faults.intervals[0].sensor = 9;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("shipped scenario: biased sensors are isolated and replaced") {
    const ScenarioReport rep = run_scenario(demo_config());

    CHECK(rep.classical_obs.observable);
    CHECK(rep.networked_obs.observable);
    CHECK(rep.networked_obs.network_strongly_connected);
    REQUIRE(rep.gain.success);
    CHECK(rep.gain.spectral_norm < 1.0);
    REQUIRE(rep.thresholds.has_value());

    // both faulted sensors reach the 95% decision level
    CHECK(contains(rep.fdi.isolated, 2));
    CHECK(contains(rep.fdi.isolated, 3));

    REQUIRE(rep.recovery.has_value());
    // sensor on state 12 moves to state 11, sensor on state 8 to state 6 (1-based)
    std::optional<int> repl2, repl3;
    for (const auto& a : rep.recovery->actions) {
        if (a.sensor == 2) repl2 = a.replacement_state;
        if (a.sensor == 3) repl3 = a.replacement_state;
    }
    REQUIRE(repl2.has_value());
    REQUIRE(repl3.has_value());
    CHECK(*repl2 == 10);
    CHECK(*repl3 == 5);

    // the repaired configuration is observable and its continuation is healthy
    REQUIRE(rep.post_recovery_obs.has_value());
    CHECK(rep.post_recovery_obs->observable);
    REQUIRE(rep.continuation.has_value());
    const auto& msee = rep.continuation->errors.msee;
    REQUIRE(static_cast<int>(msee.size()) == demo_config().recovery_horizon + 1);
    double tail = 0.0;
    for (size_t k = 50; k < msee.size(); ++k) tail = std::max(tail, msee[k]);
    CHECK(tail < 10.0 * rep.thresholds->phi);

    // determinism end to end
    const ScenarioReport again = run_scenario(demo_config());
    CHECK(again.fdi.isolated == rep.fdi.isolated);
    CHECK(again.run.errors.msee.back() == doctest::Approx(rep.run.errors.msee.back()));
}

TEST_CASE("fault-free run raises no isolation at a strict decision policy") {
    ScenarioConfig cfg = demo_config();
    cfg.faults.intervals.clear();
    cfg.recovery = false;
    cfg.decision_level = 99;
    cfg.persistence = 2;
    const ScenarioReport rep = run_scenario(cfg);
    CHECK(rep.fdi.isolated.empty());
    CHECK(!rep.recovery.has_value());
    CHECK(!rep.continuation.has_value());
}

TEST_CASE("check verb stops after design without filtering") {
    const ScenarioReport rep = check_scenario(demo_config());
    CHECK(rep.networked_obs.observable);
    CHECK(rep.gain.success);
    CHECK(rep.run.states.empty());
    CHECK(rep.fdi.residuals.empty());
}

TEST_CASE("recover handles replaceable, removal-safe and irreplaceable sensors") {
    const ScenarioConfig cfg = demo_config();
    const StructuredMatrix pattern = cfg.pattern();
    const SccDecomposition dec = scc_decompose(build_digraph(pattern));

    MeasurementModel mm;
    mm.n = 12;
    mm.sensors = {{0, 1.0, 0.04}, {2, 1.0, 0.04}, {11, 1.0, 0.04}, {7, 1.0, 0.04}};
    const SensorNetwork net =
        build_row_stochastic(4, cycle_edges(4), ConsensusWeightRule::SeededRandom, 4);

    SUBCASE("replaceable sensor moves to the lowest equivalent state") {
        const RecoveryOutcome out =
            recover({2}, dec, mm, net, ConsensusWeightRule::SeededRandom, 4);
        REQUIRE(out.actions.size() == 1);
        CHECK(out.actions[0].kind == ReplacementKind::ReplaceWith);
        CHECK(out.actions[0].replacement_state == 10);
        CHECK(out.mm.sensors[2].measured_state == 10);
        CHECK(out.unrecoverable.empty());
        CHECK(out.mm.count() == 4);
        // network topology carries over
        CHECK(out.net.size == 4);
    }

    SUBCASE("sensor on a singleton parent SCC is kept but marked unrecoverable") {
        const RecoveryOutcome out =
            recover({0}, dec, mm, net, ConsensusWeightRule::SeededRandom, 4);
        REQUIRE(out.actions.size() == 1);
        CHECK(out.actions[0].kind == ReplacementKind::Irreplaceable);
        CHECK(out.unrecoverable == std::vector<int>{0});
        CHECK(out.mm.sensors[0].measured_state == 0);
        CHECK(out.mm.count() == 4);
    }

    SUBCASE("sensor outside any parent SCC is pruned and the network repaired") {
        MeasurementModel mm5 = mm;
        mm5.sensors.push_back({4, 1.0, 0.04});  // state 5 (1-based): no parent SCC
        SensorNetwork net5 = build_row_stochastic(
            5, cycle_edges(5), ConsensusWeightRule::SeededRandom, 4);
        const RecoveryOutcome out =
            recover({4}, dec, mm5, net5, ConsensusWeightRule::SeededRandom, 4);
        REQUIRE(out.actions.size() == 1);
        CHECK(out.actions[0].kind == ReplacementKind::RemovalSafe);
        CHECK(out.mm.count() == 4);
        CHECK(out.net.size == 4);
        CHECK(is_strongly_connected(out.net.size, out.net.edges));
        // surviving sensors map back to their original indices
        CHECK(out.origin == std::vector<int>{0, 1, 2, 3});
    }
}

TEST_CASE("emit_reports writes consistent CSV and JSON artifacts") {
    const std::string dir = "/tmp/netfdi_test_reports";
    std::filesystem::remove_all(dir);
    const ScenarioReport rep = run_scenario(demo_config());
    const auto paths = emit_reports(rep, dir);

    REQUIRE(!paths.empty());
    for (const auto& p : paths) CHECK(std::filesystem::exists(p));

    // residuals.csv: header plus horizon rows per sensor
    CHECK(count_lines(dir + "/residuals.csv") == 1 + 100 * 4);
    // msee.csv: header plus one row per step including k = 0
    CHECK(count_lines(dir + "/msee.csv") == 1 + 101);
    CHECK(std::filesystem::exists(dir + "/verdicts.json"));
    CHECK(std::filesystem::exists(dir + "/manifest.json"));
    // the recovery continuation produces its own trace
    CHECK(count_lines(dir + "/continuation_msee.csv") == 1 + 501);
    std::filesystem::remove_all(dir);
}
