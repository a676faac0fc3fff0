// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "labsim/eval.hpp"
#include "labsim/plan.hpp"
#include "labsim/refine.hpp"
#include "labsim/sim.hpp"

using namespace labsim;

namespace {

const std::string kFixtures = FIXTURES_DIR;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

LabConfig lab() { return load_lab_config_file(kFixtures + "/bsl1_lab.yaml"); }

Workflow load_wf(const std::string& name) {
    return parse_workflow(slurp(kFixtures + name));
}

struct Check {
    bool ok = true;
    std::string why;

    void require(bool condition, const std::string& detail) {
        if (!condition && ok) {
            ok = false;
            why = detail;
        }
    }
};

int g_failures = 0;

void criterion(int number, const std::string& title, const std::function<void(Check&)>& body) {
    Check check;
    try {
        body(check);
    } catch (const std::exception& e) {
        check.require(false, std::string("exception: ") + e.what());
    }
    if (check.ok) {
        std::printf("PASS criterion %d: %s\n", number, title.c_str());
    } else {
        std::printf("FAIL criterion %d: %s -- %s\n", number, title.c_str(), check.why.c_str());
        ++g_failures;
    }
}

const std::string kGoldenLine =
    "Error while executing step 6 (`action=transfer, module=biopf400, "
    "args={'source': 'exchange_deck_high_wide', 'source_approach': 'safe_path_exchange', "
    "'source_plate_rotation': 'wide', 'target': 'bio_biometra3_nest', "
    "'target_approach': 'safe_path_biometra3', 'target_plate_rotation': 'wide'}`): "
    "Collision between microplate and bio_biometra3_96";

ActionStep make_transfer(const std::string& source, const std::string& src_app,
                         const std::string& src_rot, const std::string& target,
                         const std::string& dst_app, const std::string& dst_rot) {
    ActionStep step;
    step.action = "transfer";
    step.name = "move " + source + " -> " + target;
    step.module = "biopf400";
    step.args = std::vector<std::pair<std::string, ArgValue>>{
        {"source", source},
        {"source_approach", src_app},
        {"source_plate_rotation", src_rot},
        {"target", target},
        {"target_approach", dst_app},
        {"target_plate_rotation", dst_rot}};
    return step;
}

ActionStep device(const std::string& action, const std::string& module) {
    ActionStep step;
    step.action = action;
    step.name = action + " " + module;
    step.module = module;
    return step;
}

Workflow wrap_steps(std::vector<ActionStep> steps) {
    Workflow wf;
    wf.name = "synthetic";
    wf.author = "acceptance";
    wf.info = "generated";
    wf.version = "1";
    wf.flowdef = std::move(steps);
    return wf;
}

int lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b,
               std::size_t i, std::size_t j) {
    if (i == a.size() || j == b.size()) return 0;
    if (a[i] == b[j]) return 1 + lcs_oracle(a, b, i + 1, j + 1);
    return std::max(lcs_oracle(a, b, i + 1, j), lcs_oracle(a, b, i, j + 1));
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
    auto pos = text.find(from);
    if (pos == std::string::npos) throw std::runtime_error("mutation anchor not found: " + from);
    return text.replace(pos, from.size(), to);
}

}  // namespace

int main() {
    LabConfig config = lab();
    const auto initial_placements = load_placements(kFixtures + "/initial_world.yaml");
    const auto truth_placements = load_placements(kFixtures + "/truth_world.yaml");
    const Workflow flawed = load_wf("/pcr_workflow_flawed.yaml");
    const Workflow corrected = load_wf("/pcr_workflow_corrected.yaml");
    const Workflow truth = load_wf("/pcr_workflow_truth.yaml");
    const auto rules = load_category_rules(kFixtures + "/categories_pcr.yaml");

    criterion(1, "golden failure reproduction at step 6, byte-exact, under 100 ms",
              [&](Check& c) {
                  WorldState world = init_world(config, initial_placements);
                  auto start = std::chrono::steady_clock::now();
                  SimReport report = simulate(flawed, world, config);
                  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();
                  c.require(!report.passed, "flawed workflow unexpectedly passed");
                  c.require(report.first_error.has_value(), "no first_error recorded");
                  if (report.first_error) {
                      c.require(report.first_error->kind == SimErrorKind::CollisionClosedDevice,
                                "wrong error kind");
                      c.require(report.first_error->step_index == 6, "wrong step index");
                      c.require(render_error(*report.first_error) == kGoldenLine,
                                "rendered feedback line differs from the golden text");
                  }
                  c.require(elapsed < 100, "simulation took " + std::to_string(elapsed) + " ms");
              });

    criterion(2, "corrected workflow simulates to pass with a full-length trace", [&](Check& c) {
        SimReport report = simulate(corrected, init_world(config, initial_placements), config);
        c.require(report.passed, "corrected workflow failed");
        c.require(report.trace.size() == corrected.flowdef.size(),
                  "trace is not full length: " + std::to_string(report.trace.size()));
        c.require(corrected.flowdef.size() == 21, "corrected fixture is not 21 steps");
    });

    criterion(3, "refinement iteration counts: replay=3, scripted global=2, localized=3",
              [&](Check& c) {
                  Conversation seed;
                  seed.add(Role::User, slurp(kFixtures + "/pcr_prompt.txt"));
                  RefineSettings settings;
                  settings.max_iters = 3;
                  settings.initial_placements = initial_placements;

                  ReplayBackend replay = ReplayBackend::from_file(kFixtures + "/replay_pcr.yaml");
                  RefinementResult r1 = refine(seed, replay, config, settings);
                  c.require(r1.converged && r1.iterations == 3,
                            "replay: converged=" + std::to_string(r1.converged) +
                                " iterations=" + std::to_string(r1.iterations));

                  std::string initial = slurp(kFixtures + "/initial_response.txt");
                  ScriptedBackend global(initial, ScriptedBackend::FixScope::Global, config);
                  RefinementResult r2 = refine(seed, global, config, settings);
                  c.require(r2.converged && r2.iterations == 2,
                            "scripted global: iterations=" + std::to_string(r2.iterations));

                  ScriptedBackend localized(initial, ScriptedBackend::FixScope::Localized,
                                            config);
                  RefinementResult r3 = refine(seed, localized, config, settings);
                  c.require(r3.converged && r3.iterations == 3,
                            "scripted localized: iterations=" + std::to_string(r3.iterations));
              });

    criterion(4, "F1 exactness on 1,000 random triples and perfect self-scores", [&](Check& c) {
        std::mt19937 rng(424242);
        std::uniform_int_distribution<long> count(0, 500);
        int checked = 0;
        while (checked < 1000) {
            long tp = count(rng), fp = count(rng), fn = count(rng);
            if (2 * tp + fp + fn == 0) continue;
            ++checked;
            long double expected =
                2.0L * static_cast<long double>(tp) /
                (2.0L * static_cast<long double>(tp) + static_cast<long double>(fp) +
                 static_cast<long double>(fn));
            double got = f1({tp, fp, fn});
            if (std::abs(got - static_cast<double>(expected)) > 1e-12) {
                c.require(false, "f1 mismatch at tp=" + std::to_string(tp) +
                                     " fp=" + std::to_string(fp) + " fn=" + std::to_string(fn));
                return;
            }
        }
        for (long tp : {1L, 7L, 500L})
            c.require(f1({tp, 0, 0}) == 1.0, "f1(tp,0,0) != 1.0");
        for (const Workflow* wf : {&flawed, &corrected, &truth}) {
            CategoryScores scores = score_protocol(*wf, *wf, rules, truth_placements, config);
            c.require(scores.overall == 1.0, "self-score below 1.0 on a fixture");
            for (const auto& [cat, score] : scores.f1_by_category)
                c.require(score == 1.0, "category " + cat + " self-score below 1.0");
        }
    });

    criterion(5, "diff alignment equals the brute-force oracle on 500+ random pairs",
              [&](Check& c) {
                  std::mt19937 rng(20240521);
                  std::uniform_int_distribution<int> len(0, 8);
                  std::uniform_int_distribution<int> letter(0, 3);
                  auto random_steps = [&]() {
                      std::vector<ActionStep> steps;
                      int n = len(rng);
                      for (int i = 0; i < n; ++i)
                          steps.push_back(
                              device(std::string(1, static_cast<char>('a' + letter(rng))), "m"));
                      return steps;
                  };
                  for (int trial = 0; trial < 600; ++trial) {
                      Workflow cand = wrap_steps(random_steps());
                      Workflow gold = wrap_steps(random_steps());
                      ActionDiff diff = diff_actions(cand, gold, {}, config);
                      std::vector<std::string> ck, tk;
                      for (const auto& s : cand.flowdef) ck.push_back(step_key(s));
                      for (const auto& s : gold.flowdef) tk.push_back(step_key(s));
                      int oracle = lcs_oracle(ck, tk, 0, 0);
                      if (static_cast<int>(diff.matched.size()) != oracle) {
                          c.require(false, "trial " + std::to_string(trial) + ": matched " +
                                               std::to_string(diff.matched.size()) + " vs oracle " +
                                               std::to_string(oracle));
                          return;
                      }
                  }
              });

    criterion(6, "deleting the two opens yields missing {7,16} and pooled F1 = 52/54",
              [&](Check& c) {
                  Workflow candidate = truth;
                  candidate.flowdef.erase(candidate.flowdef.begin() + 15);  // open hidex (16)
                  candidate.flowdef.erase(candidate.flowdef.begin() + 6);   // open biometra (7)
                  ActionDiff diff = diff_actions(candidate, truth, truth_placements, config);
                  c.require(diff.missing == std::vector<int>{7, 16},
                            "missing indices are not exactly {7, 16}");
                  c.require(diff.inserted.empty(), "unexpected inserted steps");
                  CategoryScores scores =
                      score_protocol(candidate, truth, rules, truth_placements, config);
                  c.require(scores.pooled.tp == 26 && scores.pooled.fp == 0 &&
                                scores.pooled.fn == 2,
                            "pooled counts are not tp=26 fp=0 fn=2");
                  c.require(std::abs(scores.overall - 52.0 / 54.0) < 1e-12,
                            "pooled F1 differs from 52/54");
              });

    criterion(7, "direct narrow/wide transfer rejected; exchange-deck route passes",
              [&](Check& c) {
                  Workflow direct = wrap_steps({make_transfer(
                      "sealer_nest", "safe_path_sealer", "narrow", "bio_biometra3_nest",
                      "safe_path_biometra3", "wide")});
                  c.require(!validate_workflow(direct, config).ok(),
                            "direct narrow->wide transfer was not rejected statically");

                  Workflow routed = wrap_steps(
                      {make_transfer("sealer_nest", "safe_path_sealer", "narrow",
                                     "exchange_deck_high_narrow", "safe_path_exchange",
                                     "narrow"),
                       device("open", "bio_biometra3_96"),
                       make_transfer("exchange_deck_high_wide", "safe_path_exchange", "wide",
                                     "bio_biometra3_nest", "safe_path_biometra3", "wide")});
                  c.require(validate_workflow(routed, config).ok(),
                            "two-transfer exchange route failed static validation");
                  WorldState world =
                      init_world(config, {{"plate", "sealer_nest", Rotation::Narrow, false}});
                  SimReport report = simulate(routed, world, config);
                  c.require(report.passed, "two-transfer exchange route failed simulation");
              });

    criterion(8, "plan suite: 22 lines round-trip, 6/6 constrained, faults localized",
              [&](Check& c) {
                  const std::string base = slurp(kFixtures + "/pcr_plan_groundtruth.txt");
                  PlanParse parsed = parse_plan(base);
                  c.require(parsed.errors.empty(), "reference plan has parse errors");
                  c.require(parsed.plan.steps.size() == 22, "reference plan is not 22 steps");
                  int index = 0;
                  for (const auto& step : parsed.plan.steps) {
                      auto again = parse_step_line(format_step(step, ++index));
                      if (again.size() != 1 || !(again[0] == step)) {
                          c.require(false, "round-trip failed at step " + std::to_string(index));
                          return;
                      }
                  }
                  const PlanSpec spec = default_pcr_plan_spec();
                  CriteriaReport clean = check_constrained(parsed, spec);
                  c.require(clean.verdicts.size() == 6 && clean.all_pass(),
                            "reference plan does not pass 6/6");

                  auto mutated = [&](const std::string& from, const std::string& to) {
                      return check_constrained(parse_plan(replace_once(base, from, to)), spec);
                  };
                  CriteriaReport wrong_volume = mutated("Transfer 20 uL of Master Mix",
                                                        "Transfer 15 uL of Master Mix");
                  c.require(!wrong_volume.passed("volumes") &&
                                wrong_volume.passed("pipette_selection"),
                            "wrong-volume mutation not localized to volumes");

                  CriteriaReport extra_template = check_constrained(
                      parse_plan(base +
                                 "23.) Transfer 5 uL of Template DNA from H1 on reagent plate "
                                 "to A2 on reaction plate with 3 mix cycles. "
                                 "[Tip action - eject tip]\n"),
                      spec);
                  c.require(!extra_template.passed("reagent_logic") &&
                                extra_template.passed("volumes"),
                            "template-in-control mutation not localized to reagent_logic");

                  CriteriaReport two_thermo =
                      mutated("20.) Thermocycling: 95 for 15\n", "");
                  c.require(!two_thermo.passed("thermo_count") &&
                                two_thermo.passed("step_format"),
                            "2-thermo mutation not localized to thermo_count");

                  CriteriaReport four_thermo = check_constrained(
                      parse_plan(base + "23.) Thermocycling: 72 for 30\n"), spec);
                  c.require(!four_thermo.passed("thermo_count"),
                            "4-thermo mutation did not trip thermo_count");

                  CriteriaReport over_pipette = mutated("Transfer 20 uL of Master Mix",
                                                        "Transfer 25 uL of Master Mix");
                  c.require(!over_pipette.passed("pipette_selection"),
                            "25 uL mutation did not trip pipette_selection");
              });

    criterion(9, "conservation + determinism over 10,000 accepted steps; prefix monotonicity",
              [&](Check& c) {
                  // Candidate pool: every legal-looking step the fixture lab offers.
                  std::vector<ActionStep> pool;
                  std::vector<std::string> locations;
                  for (const auto& loc : config.locations) locations.push_back(loc.name);
                  for (const auto& src : config.locations)
                      for (const auto& dst : config.locations) {
                          if (src.name == dst.name) continue;
                          if (config.slot_of(src.name) == config.slot_of(dst.name)) continue;
                          if (src.rotation != dst.rotation) continue;
                          pool.push_back(make_transfer(src.name, src.approach,
                                                       to_string(src.rotation), dst.name,
                                                       dst.approach, to_string(dst.rotation)));
                      }
                  for (const char* mod : {"bio_biometra3_96", "hidex_geraldine"}) {
                      pool.push_back(device("open", mod));
                      pool.push_back(device("close", mod));
                  }
                  pool.push_back(device("seal", "bio_sealer"));
                  pool.push_back(device("peel", "bio_peeler"));
                  ActionStep run_program = device("run_program", "bio_biometra3_96");
                  run_program.args = std::vector<std::pair<std::string, ArgValue>>{
                      {"program_number", std::int64_t{5}}};
                  pool.push_back(run_program);
                  ActionStep run_assay = device("run_assay", "hidex_geraldine");
                  run_assay.args = std::vector<std::pair<std::string, ArgValue>>{
                      {"assay_name", std::string("A")}};
                  pool.push_back(run_assay);
                  ActionStep run_protocol = device("run_protocol", "ot2bioalpha");
                  run_protocol.files = std::vector<std::pair<std::string, std::string>>{
                      {"protocol", "payload.p"}};
                  pool.push_back(run_protocol);

                  std::vector<Placement> placements{
                      {"p1", "exchange_deck_high_wide", Rotation::Wide, false},
                      {"p2", "sealer_nest", Rotation::Narrow, false}};
                  WorldState world = init_world(config, placements);
                  const auto ids = world.plate_ids();

                  std::mt19937 rng(987654321);
                  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                  std::vector<const ActionStep*> accepted;
                  long proposals = 0;
                  while (accepted.size() < 10000 && proposals < 2000000) {
                      ++proposals;
                      const ActionStep& step = pool[pick(rng)];
                      if (apply_step(world, step, 1, config)) continue;  // rejected, untouched
                      accepted.push_back(&step);
                      if (world.plate_ids() != ids) {
                          c.require(false, "plate conservation broken after accepted step " +
                                               std::to_string(accepted.size()));
                          return;
                      }
                  }
                  c.require(accepted.size() == 10000,
                            "only " + std::to_string(accepted.size()) + " steps accepted");

                  // Determinism: replaying the accepted sequence reproduces the
                  // exact final digest.
                  WorldState replay = init_world(config, placements);
                  for (const ActionStep* step : accepted)
                      if (apply_step(replay, *step, 1, config)) {
                          c.require(false, "replay rejected a previously accepted step");
                          return;
                      }
                  c.require(replay.digest() == world.digest(),
                            "replay reached a different terminal state");

                  // Prefix monotonicity on the passing fixtures: every prefix of
                  // a passing workflow also passes.
                  struct Case {
                      const Workflow* wf;
                      const std::vector<Placement>* placements;
                  };
                  for (const Case& item : {Case{&corrected, &initial_placements},
                                           Case{&truth, &truth_placements}}) {
                      for (std::size_t n = 0; n <= item.wf->flowdef.size(); ++n) {
                          Workflow prefix = *item.wf;
                          prefix.flowdef.resize(n);
                          SimReport report =
                              simulate(prefix, init_world(config, *item.placements), config);
                          if (!report.passed) {
                              c.require(false, "prefix of length " + std::to_string(n) +
                                                   " failed on a passing fixture");
                              return;
                          }
                      }
                  }
              });

    criterion(10, "1,000-step synthetic workflow simulates in under 1 s", [&](Check& c) {
        std::vector<ActionStep> steps;
        for (int i = 0; i < 500; ++i) {
            steps.push_back(device("open", "bio_biometra3_96"));
            steps.push_back(device("close", "bio_biometra3_96"));
        }
        Workflow wf = wrap_steps(std::move(steps));
        c.require(validate_workflow(wf, config).ok(), "synthetic workflow failed validation");
        auto start = std::chrono::steady_clock::now();
        SimReport report = simulate(wf, init_world(config, {}), config);
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        c.require(report.passed, "synthetic workflow failed simulation");
        c.require(report.trace.size() == 1000, "trace is not 1000 entries");
        c.require(elapsed < 1000, "took " + std::to_string(elapsed) + " ms");
    });

    if (g_failures == 0) std::printf("ALL CRITERIA PASS\n");
    return g_failures;
}
