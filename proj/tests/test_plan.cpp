#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "labsim/plan.hpp"

using namespace labsim;

namespace {

const std::string kFixtures = FIXTURES_DIR;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

TransferStep one_transfer(const std::string& line) {
    auto steps = parse_step_line(line);
    REQUIRE(steps.size() == 1);
    return std::get<TransferStep>(steps[0]);
}

}  // namespace

TEST_CASE("well_id_valid") {
    CHECK(well_id_valid("A1"));
    CHECK(well_id_valid("H12"));
    CHECK_FALSE(well_id_valid("I1"));
    CHECK_FALSE(well_id_valid("A0"));
    CHECK_FALSE(well_id_valid("A13"));
    CHECK_FALSE(well_id_valid("AA"));
    CHECK_FALSE(well_id_valid("7"));
}

TEST_CASE("canonical transfer line parses") {
    TransferStep t = one_transfer(
        "5.) Transfer 20 uL of Master Mix from A1 on reagent plate to A3 on reaction plate "
        "with 3 mix cycles. [Tip action - eject tip]");
    CHECK(t.volume_ul == 20.0);
    CHECK(t.reagent == "Master Mix");
    CHECK(t.source_well == "A1");
    CHECK(t.source_label == "reagent plate");
    CHECK(t.dest_well == "A3");
    CHECK(t.dest_label == "reaction plate");
    CHECK(t.mix_cycles == 3);
    CHECK(t.eject_tip);
}

TEST_CASE("unicode variants normalize before matching") {
    TransferStep t = one_transfer(
        "1.) Transfer 20 \xC2\xB5L of Master Mix from reagent plate to reaction plate: "
        "A1\xE2\x86\x92"
        "B2 with 3 mix cycles. [Tip action \xE2\x80\x93 eject tip]");
    CHECK(t.volume_ul == 20.0);
    CHECK(t.source_well == "A1");
    CHECK(t.dest_well == "B2");
    CHECK(t.eject_tip);

    // Greek mu, degree sign and non-breaking space are folded too.
    TransferStep u = one_transfer(
        "2.) Transfer 5\xCE\xBCL of Template DNA from H1 on reagent\xC2\xA0plate to A1 on "
        "reaction plate with 2 mix cycles. [Tip action - none]");
    CHECK(u.volume_ul == 5.0);
    CHECK(u.source_label == "reagent plate");
    CHECK_FALSE(u.eject_tip);

    auto thermo = parse_step_line("9.) Thermocycling: 95\xC2\xB0"
                                  "C for 60 s");
    REQUIRE(thermo.size() == 1);
    CHECK(std::get<ThermoStep>(thermo[0]) == ThermoStep{95, 60});
}

TEST_CASE("fan-out and zip expansion") {
    SUBCASE("arrow pair shorthand expands one step per pair") {
        auto steps = parse_step_line(
            "1.) Transfer 20 uL of Master Mix from reagent plate to reaction plate: "
            "A1->B2, A2->B11, A1->G2 with 3 mix cycles. [Tip action - eject tip]");
        REQUIRE(steps.size() == 3);
        auto t0 = std::get<TransferStep>(steps[0]);
        auto t2 = std::get<TransferStep>(steps[2]);
        CHECK(t0.source_well == "A1");
        CHECK(t0.dest_well == "B2");
        CHECK(t2.source_well == "A1");
        CHECK(t2.dest_well == "G2");
        CHECK(t2.dest_label == "reaction plate");
    }
    SUBCASE("single source fans out to listed destinations") {
        auto steps = parse_step_line(
            "6.) Transfer 5 uL of Forward Primer from D1 on reagent plate to B2, B11, G2 on "
            "reaction plate with 3 mix cycles. [Tip action - eject tip]");
        REQUIRE(steps.size() == 3);
        for (const auto& s : steps)
            CHECK(std::get<TransferStep>(s).source_well == "D1");
        CHECK(std::get<TransferStep>(steps[1]).dest_well == "B11");
    }
    SUBCASE("paired lists zip positionally") {
        auto steps = parse_step_line(
            "1.) Transfer 20 uL of Master Mix from A1, A2 on reagent plate to B2, B11 on "
            "reaction plate with 3 mix cycles. [Tip action - eject tip]");
        REQUIRE(steps.size() == 2);
        CHECK(std::get<TransferStep>(steps[0]).source_well == "A1");
        CHECK(std::get<TransferStep>(steps[0]).dest_well == "B2");
        CHECK(std::get<TransferStep>(steps[1]).source_well == "A2");
        CHECK(std::get<TransferStep>(steps[1]).dest_well == "B11");
    }
    SUBCASE("mismatched list lengths are rejected") {
        CHECK_THROWS_AS(parse_step_line(
                            "1.) Transfer 20 uL of Master Mix from A1, A2, A3 on reagent plate "
                            "to B2, B11 on reaction plate with 3 mix cycles."),
                        PlanFormatError);
    }
}

TEST_CASE("other step kinds parse") {
    CHECK(std::get<ThermoStep>(parse_step_line("10.) Thermocycling: 95 for 15")[0]) ==
          ThermoStep{95, 15});
    auto mix = std::get<MixStep>(
        parse_step_line("3.) Mix 4X with pipette set to 15 uL in wells A1, A2.")[0]);
    CHECK(mix.cycles == 4);
    CHECK(mix.volume_ul == 15.0);
    CHECK(mix.wells == std::vector<std::string>{"A1", "A2"});
    auto read = std::get<ReadStep>(
        parse_step_line("12.) Fluorescence read: Hidex plate reader, SYBR channel.")[0]);
    CHECK(read.instrument == "Hidex plate reader");
    CHECK(read.assay == "SYBR channel");
    CHECK(std::holds_alternative<SealStep>(parse_step_line("4.) Seal the plate.")[0]));
    CHECK(std::holds_alternative<PeelStep>(parse_step_line("5.) Peel the plate.")[0]));
}

TEST_CASE("format errors name the first failing template slot") {
    auto slot_of = [](const std::string& line) {
        try {
            parse_step_line(line);
        } catch (const PlanFormatError& e) {
            return e.slot();
        }
        return std::string("<no error>");
    };
    CHECK(slot_of("3.) Add some buffer to the plate") == "volume");
    CHECK(slot_of("3.) Transfer Master Mix to A1") == "volume");
    CHECK(slot_of("3.) Transfer 20 uL Master Mix into A1") == "reagent");
    CHECK(slot_of("3.) Transfer 20 uL of Master Mix from A1 on reagent plate") == "destination");
    CHECK(slot_of("3.) Transfer 20 uL of Master Mix from A1 on reagent plate to A2 on "
                  "reaction plate") == "mix_cycles");
    CHECK(slot_of("3.) Transfer 20 uL of Master Mix from Z9 on reagent plate to A2 on "
                  "reaction plate with 3 mix cycles.") == "source_well");
    CHECK(slot_of("3.) Thermocycling: 95") == "duration");
    CHECK(slot_of("3.) Thermocycling: warm") == "temperature");
}

TEST_CASE("round-trip: parse(format(step)) is the identity on both fixtures") {
    for (const char* name : {"/pcr_plan_groundtruth.txt", "/pcr_plan_open_ended.txt"}) {
        CAPTURE(name);
        PlanParse parsed = parse_plan(slurp(kFixtures + name));
        REQUIRE(parsed.errors.empty());
        int index = 0;
        for (const auto& step : parsed.plan.steps) {
            ++index;
            std::string text = format_step(step, index);
            CAPTURE(text);
            auto again = parse_step_line(text);
            REQUIRE(again.size() == 1);
            CHECK(again[0] == step);
        }
    }
}

TEST_CASE("whole-document parse of the constrained ground truth") {
    PlanParse parsed = parse_plan(slurp(kFixtures + "/pcr_plan_groundtruth.txt"));
    CHECK(parsed.errors.empty());
    CHECK(parsed.plan.steps.size() == 22);
    CHECK(parsed.plan.test_wells == std::set<std::string>{"A1", "A3"});
    CHECK(parsed.plan.control_wells == std::set<std::string>{"A2", "A4"});

    const auto& sources = parsed.plan.reagent_sources;
    REQUIRE(sources.count("Master Mix"));
    CHECK(sources.at("Master Mix") ==
          std::vector<std::pair<std::string, std::string>>{{"reagent plate", "A1"},
                                                           {"reagent plate", "A2"}});
    REQUIRE(sources.count("Nuclease-free Biowater"));
    CHECK(sources.at("Nuclease-free Biowater").size() == 4);  // C1-C4 range expansion
    CHECK(sources.at("Template DNA") ==
          std::vector<std::pair<std::string, std::string>>{{"reagent plate", "H1"}});
}

TEST_CASE("per-line failures are aggregated with line numbers") {
    std::string doc = "1.) Transfer 20 uL of Master Mix from A1 on reagent plate to A1 on "
                      "reaction plate with 3 mix cycles.\n"
                      "2.) Thermocycling: 95 for 60\n"
                      "3.) Add some buffer to the plate\n"
                      "4.) Thermocycling: 60 for 30\n"
                      "5.) Transfer nonsense\n";
    PlanParse parsed = parse_plan(doc);
    CHECK(parsed.plan.steps.size() == 3);
    REQUIRE(parsed.errors.size() == 2);
    CHECK(parsed.errors[0].line == 3);
    CHECK(parsed.errors[0].slot == "volume");
    CHECK(parsed.errors[1].line == 5);
    CHECK(parsed.errors[1].slot == "volume");
}

TEST_CASE("constrained criteria pass on the reference plan") {
    PlanParse parsed = parse_plan(slurp(kFixtures + "/pcr_plan_groundtruth.txt"));
    CriteriaReport report = check_constrained(parsed, default_pcr_plan_spec());
    CHECK(report.mode == "constrained");
    CHECK(report.verdicts.size() == 6);
    CHECK(report.all_pass());
    CHECK(report.findings.empty());
}

TEST_CASE("constrained criteria localize single faults") {
    const std::string base = slurp(kFixtures + "/pcr_plan_groundtruth.txt");
    const PlanSpec spec = default_pcr_plan_spec();
    auto run = [&](const std::string& text) { return check_constrained(parse_plan(text), spec); };

    SUBCASE("wrong volume trips volumes only") {
        auto report = run(replace_once(base, "1.) Transfer 20 uL of Master Mix",
                                       "1.) Transfer 15 uL of Master Mix"));
        CHECK_FALSE(report.passed("volumes"));
        CHECK(report.passed("well_assignments"));
        CHECK(report.passed("pipette_selection"));
        CHECK(report.passed("reagent_logic"));
    }
    SUBCASE("over-range volume trips volumes and pipette selection") {
        auto report = run(replace_once(base, "1.) Transfer 20 uL of Master Mix",
                                       "1.) Transfer 25 uL of Master Mix"));
        CHECK_FALSE(report.passed("volumes"));
        CHECK_FALSE(report.passed("pipette_selection"));
    }
    SUBCASE("template into a control well trips reagent logic and names the well") {
        auto report = run(base + "23.) Transfer 5 uL of Template DNA from H1 on reagent plate "
                                 "to A2 on reaction plate with 3 mix cycles. "
                                 "[Tip action - eject tip]\n");
        CHECK_FALSE(report.passed("reagent_logic"));
        bool named = false;
        for (const auto& f : report.findings)
            if (f.criterion == "reagent_logic" && f.detail.find("A2") != std::string::npos)
                named = true;
        CHECK(named);
        // Volume rule for the extra transfer is satisfied, so only the
        // volumes criterion stays green.
        CHECK(report.passed("volumes"));
    }
    SUBCASE("missing template delivery trips reagent logic") {
        auto report = run(replace_once(
            base, "18.) Transfer 5 uL of Template DNA from H1 on reagent plate to A3",
            "18.) Transfer 5 uL of Template DNA from H1 on reagent plate to A1"));
        CHECK_FALSE(report.passed("reagent_logic"));
        CHECK(report.passed("well_assignments"));
    }
    SUBCASE("dropped thermocycling step trips the count") {
        auto report = run(replace_once(base, "20.) Thermocycling: 95 for 15\n", ""));
        CHECK_FALSE(report.passed("thermo_count"));
        CHECK(report.passed("step_format"));
    }
    SUBCASE("transfer to an unrequested well trips well assignments") {
        auto report = run(replace_once(base, "to A4 on reaction plate with 3 mix cycles. [Tip "
                                             "action - eject tip]\n5.)",
                                       "to A5 on reaction plate with 3 mix cycles. [Tip "
                                       "action - eject tip]\n5.)"));
        CHECK_FALSE(report.passed("well_assignments"));
    }
    SUBCASE("drawing from an unlisted source well trips well assignments") {
        auto report = run(replace_once(base, "Transfer 20 uL of Master Mix from A1",
                                       "Transfer 20 uL of Master Mix from B1"));
        CHECK_FALSE(report.passed("well_assignments"));
        CHECK(report.passed("volumes"));
    }
    SUBCASE("a malformed line trips step format and reports its location") {
        auto report = run(replace_once(base, "21.) Thermocycling: 60 for 30",
                                       "21.) Thermocycle until done"));
        CHECK_FALSE(report.passed("step_format"));
        CHECK_FALSE(report.passed("thermo_count"));
        bool located = false;
        for (const auto& f : report.findings)
            if (f.criterion == "step_format" && f.detail.find("line 32") != std::string::npos)
                located = true;
        CHECK(located);
    }
}

TEST_CASE("open-ended criteria pass on the free-layout plan") {
    PlanParse parsed = parse_plan(slurp(kFixtures + "/pcr_plan_open_ended.txt"));
    REQUIRE(parsed.errors.empty());
    CriteriaReport report = check_open_ended(parsed, default_pcr_plan_spec());
    CHECK(report.verdicts.size() == 8);
    CHECK(report.all_pass());
}

TEST_CASE("open-ended criteria localize single faults") {
    const std::string base = slurp(kFixtures + "/pcr_plan_open_ended.txt");
    const PlanSpec spec = default_pcr_plan_spec();
    auto run = [&](const std::string& text) { return check_open_ended(parse_plan(text), spec); };

    SUBCASE("sub-5 uL transfer trips the volume limits floor") {
        auto report = run(replace_once(base, "2.) Transfer 5 uL of Nuclease-free Biowater",
                                       "2.) Transfer 3 uL of Nuclease-free Biowater"));
        CHECK_FALSE(report.passed("volume_limits"));
        CHECK_FALSE(report.passed("volume_totals"));  // B2 now totals 38 uL
        CHECK(report.passed("pipette_use"));
        CHECK(report.passed("well_mapping"));
    }
    SUBCASE("adjacent test and control wells trip spacing") {
        auto report = run(replace_once(replace_once(base, "Control wells: B11, G11",
                                                    "Control wells: B3, G11"),
                                       "B11", "B3"));
        // Remaining B11 references now target an undeclared well too.
        CHECK_FALSE(report.passed("spacing"));
    }
    SUBCASE("overdrawn source well trips the capacity limit") {
        std::string doc = "Test wells: B2, G2\nControl wells: B11, G11\n";
        for (int i = 1; i <= 6; ++i)
            doc += std::to_string(i) +
                   ".) Transfer 20 uL of Master Mix from A1 on reagent plate to B2 on "
                   "reaction plate with 3 mix cycles. [Tip action - eject tip]\n";
        auto report = run(doc);
        CHECK_FALSE(report.passed("volume_limits"));  // A1 supplies 120 uL
        CHECK(report.passed("pipette_use"));
        bool named = false;
        for (const auto& f : report.findings)
            if (f.criterion == "volume_limits" && f.detail.find("A1") != std::string::npos &&
                f.detail.find("120") != std::string::npos)
                named = true;
        CHECK(named);
    }
    SUBCASE("destination doubling as a source trips well mapping") {
        std::string doc =
            "Test wells: C1, G2\nControl wells: B11, G11\n"
            "1.) Transfer 20 uL of Master Mix from A1 on reagent plate to C1 on reagent plate "
            "with 3 mix cycles. [Tip action - eject tip]\n"
            "2.) Transfer 5 uL of Nuclease-free Biowater from C1 on reagent plate to G2 on "
            "reaction plate with 3 mix cycles. [Tip action - eject tip]\n";
        auto report = run(doc);
        CHECK_FALSE(report.passed("well_mapping"));
        bool named = false;
        for (const auto& f : report.findings)
            if (f.criterion == "well_mapping" &&
                f.detail.find("C1 on reagent plate is also used as a source") !=
                    std::string::npos)
                named = true;
        CHECK(named);
    }
    SUBCASE("wrong well count trips well mapping") {
        auto report = run(replace_once(base, "Test wells: B2, G2", "Test wells: B2"));
        CHECK_FALSE(report.passed("well_mapping"));
    }
    SUBCASE("per-well totals are enforced") {
        auto report = run(replace_once(base, "3.) Transfer 10 uL of Nuclease-free Biowater",
                                       "3.) Transfer 12 uL of Nuclease-free Biowater"));
        CHECK_FALSE(report.passed("volume_totals"));
        CHECK(report.passed("volume_limits"));
    }
}

TEST_CASE("plan spec loading and serialization helpers") {
    PlanSpec spec = default_pcr_plan_spec();
    CHECK(spec.reagent_volumes.at("Master Mix") == 20.0);
    CHECK(spec.control_filler_volume == 10.0);
    CHECK(spec.pipette_max == 20.0);

    PlanParse parsed = parse_plan(slurp(kFixtures + "/pcr_plan_groundtruth.txt"));
    CriteriaReport report = check_constrained(parsed, spec);
    std::string json = criteria_to_json(report);
    CHECK(json.find("\"all_pass\": true") != std::string::npos);
    CHECK(json.find("\"well_assignments\"") != std::string::npos);
    std::string text = criteria_to_text(report);
    CHECK(text.find("[pass] pipette_selection") != std::string::npos);
    CHECK(text.find("all criteria pass") != std::string::npos);
}
