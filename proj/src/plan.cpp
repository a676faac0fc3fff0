#include "labsim/plan.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace labsim {

namespace {

// Tolerated unicode variants are folded to ASCII before template matching.
std::string normalize_line(const std::string& raw) {
    std::string s;
    s.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        unsigned char c = raw[i];
        auto starts = [&](const char* seq, std::size_t n) {
            return raw.compare(i, n, seq) == 0;
        };
        if (starts("\xC2\xB5", 2) || starts("\xCE\xBC", 2)) {  // micro sign / mu
            s += 'u';
            i += 2;
        } else if (starts("\xE2\x86\x92", 3)) {  // rightwards arrow
            s += "->";
            i += 3;
        } else if (starts("\xE2\x80\x93", 3) || starts("\xE2\x80\x94", 3)) {  // dashes
            s += '-';
            i += 3;
        } else if (starts("\xC2\xB0", 2)) {  // degree sign
            i += 2;
        } else if (starts("\xC2\xA0", 2)) {  // non-breaking space
            s += ' ';
            i += 2;
        } else {
            s += static_cast<char>(c);
            ++i;
        }
    }
    // collapse whitespace runs, trim ends
    std::string out;
    bool in_space = true;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r') {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += c;
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string strip_index(const std::string& line) {
    static const std::regex index_re(R"(^\s*\d+\s*[.)\]]+\s*)");
    std::smatch m;
    if (std::regex_search(line, m, index_re)) return line.substr(m[0].length());
    return line;
}

std::string num_str(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        std::size_t b = item.find_first_not_of(' ');
        std::size_t e = item.find_last_not_of(" .");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

bool iequal_prefix(const std::string& s, const char* prefix) {
    std::size_t n = std::strlen(prefix);
    if (s.size() < n) return false;
    for (std::size_t i = 0; i < n; ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(prefix[i]))
            return false;
    return true;
}

std::vector<PlanStep> parse_transfer(const std::string& body) {
    static const std::regex volume_re(R"(^[Tt]ransfer\s+(\d+(?:\.\d+)?)\s*(?:u[lL]\s+)?)");
    std::smatch m;
    if (!std::regex_search(body, m, volume_re))
        throw PlanFormatError("transfer step is missing a parseable volume", "volume");
    double volume = std::stod(m[1]);
    std::string rest = body.substr(m[0].length());

    static const std::regex reagent_re(R"(^of\s+(.+?)\s+from\s+)");
    if (!std::regex_search(rest, m, reagent_re))
        throw PlanFormatError("transfer step is missing 'of <reagent> from'", "reagent");
    std::string reagent = m[1];
    rest = rest.substr(m[0].length());

    static const std::regex tail_re(
        R"(^(.*?)\s+to\s+(.*?)\s+with\s+(\d+)\s+mix\s+cycles?\.?\s*(?:\[\s*Tip action\s*-\s*([A-Za-z ]+?)\s*(?:tip)?\s*\])?\s*$)");
    if (!std::regex_match(rest, m, tail_re)) {
        if (rest.find(" to ") == std::string::npos)
            throw PlanFormatError("transfer step is missing a destination", "destination");
        throw PlanFormatError("transfer step is missing 'with N mix cycles'", "mix_cycles");
    }
    std::string source_part = m[1];
    std::string dest_part = m[2];
    int mix_cycles = std::stoi(m[3]);
    bool eject = true;
    if (m[4].matched) {
        std::string tip = m[4];
        std::transform(tip.begin(), tip.end(), tip.begin(), ::tolower);
        while (!tip.empty() && tip.back() == ' ') tip.pop_back();
        if (tip == "eject") eject = true;
        else if (tip == "none" || tip == "keep") eject = false;
        else throw PlanFormatError("unknown tip action '" + tip + "'", "tip_action");
    }

    TransferStep base;
    base.volume_ul = volume;
    base.reagent = reagent;
    base.mix_cycles = mix_cycles;
    base.eject_tip = eject;

    auto check_well = [](const std::string& well, const char* slot) {
        if (!well_id_valid(well))
            throw PlanFormatError("'" + well + "' is not a valid well id", slot);
    };

    // Fan-out form: "from <src label> to <dst label>: A1->B2, A2->B11".
    std::size_t colon = dest_part.find(':');
    if (colon != std::string::npos) {
        base.source_label = source_part;
        base.dest_label = dest_part.substr(0, colon);
        std::vector<PlanStep> steps;
        for (const auto& pair : split_list(dest_part.substr(colon + 1))) {
            std::size_t arrow = pair.find("->");
            if (arrow == std::string::npos)
                throw PlanFormatError("expected 'source->dest' well pair, got '" + pair + "'",
                                      "well_pair");
            TransferStep t = base;
            t.source_well = pair.substr(0, arrow);
            t.dest_well = pair.substr(arrow + 2);
            check_well(t.source_well, "source_well");
            check_well(t.dest_well, "dest_well");
            steps.push_back(t);
        }
        if (steps.empty()) throw PlanFormatError("fan-out list is empty", "well_pair");
        return steps;
    }

    // Long form: "from <wells> on <label> to <wells> on <label>".
    auto endpoint = [](const std::string& part, const char* well_slot)
        -> std::pair<std::vector<std::string>, std::string> {
        std::size_t on = part.find(" on ");
        if (on == std::string::npos)
            throw PlanFormatError("expected '<well> on <labware>', got '" + part + "'", well_slot);
        return {split_list(part.substr(0, on)), part.substr(on + 4)};
    };
    auto [src_wells, src_label] = endpoint(source_part, "source_well");
    auto [dst_wells, dst_label] = endpoint(dest_part, "dest_well");
    for (const auto& w : src_wells) check_well(w, "source_well");
    for (const auto& w : dst_wells) check_well(w, "dest_well");
    if (src_wells.empty()) throw PlanFormatError("no source well given", "source_well");
    if (dst_wells.empty()) throw PlanFormatError("no destination well given", "dest_well");
    if (src_wells.size() != 1 && src_wells.size() != dst_wells.size())
        throw PlanFormatError("source/destination well counts do not pair up", "dest_well");

    base.source_label = src_label;
    base.dest_label = dst_label;
    std::vector<PlanStep> steps;
    for (std::size_t i = 0; i < dst_wells.size(); ++i) {
        TransferStep t = base;
        t.source_well = src_wells.size() == 1 ? src_wells[0] : src_wells[i];
        t.dest_well = dst_wells[i];
        steps.push_back(t);
    }
    return steps;
}

PlanStep parse_thermo(const std::string& body) {
    static const std::regex re(
        R"(^[Tt]hermocycl(?:ing|e)\s*:?\s+(-?\d+(?:\.\d+)?)\s*C?\s+for\s+(\d+(?:\.\d+)?)\s*(?:s|sec|seconds)?\.?$)");
    std::smatch m;
    if (!std::regex_match(body, m, re)) {
        static const std::regex temp_re(R"(^[Tt]hermocycl(?:ing|e)\s*:?\s+-?\d)");
        if (!std::regex_search(body, temp_re))
            throw PlanFormatError("thermocycling step is missing a temperature", "temperature");
        throw PlanFormatError("thermocycling step is missing 'for <duration>'", "duration");
    }
    return ThermoStep{std::stod(m[1]), std::stod(m[2])};
}

PlanStep parse_mix(const std::string& body) {
    static const std::regex re(
        R"(^[Mm]ix\s+(\d+)\s*[Xx]\s+with\s+pipette\s+set\s+to\s+(\d+(?:\.\d+)?)\s*u[lL]\s+in\s+wells?\s+(.+?)\.?$)");
    std::smatch m;
    if (!std::regex_match(body, m, re))
        throw PlanFormatError("mix step does not match 'Mix NX with pipette set to V uL in wells ...'",
                              "cycles");
    MixStep step;
    step.cycles = std::stoi(m[1]);
    step.volume_ul = std::stod(m[2]);
    step.wells = split_list(m[3]);
    for (const auto& w : step.wells)
        if (!well_id_valid(w))
            throw PlanFormatError("'" + w + "' is not a valid well id", "wells");
    if (step.wells.empty()) throw PlanFormatError("mix step lists no wells", "wells");
    return step;
}

PlanStep parse_read(const std::string& body) {
    static const std::regex re(R"(^(?:Fluorescence\s+)?[Rr]ead\s*:?\s+(.+?),\s*(.+?)\.?$)");
    std::smatch m;
    if (!std::regex_match(body, m, re))
        throw PlanFormatError("read step does not match 'Fluorescence read: <instrument>, <assay>'",
                              "instrument");
    return ReadStep{m[1], m[2]};
}

}  // namespace

bool well_id_valid(const std::string& well) {
    if (well.size() < 2 || well.size() > 3) return false;
    char row = well[0];
    if (row < 'A' || row > 'H') return false;
    for (std::size_t i = 1; i < well.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(well[i]))) return false;
    int col = std::stoi(well.substr(1));
    return col >= 1 && col <= 12;
}

std::vector<PlanStep> parse_step_line(const std::string& line) {
    std::string body = strip_index(normalize_line(line));
    if (body.empty()) throw PlanFormatError("empty step line", "action");

    if (iequal_prefix(body, "transfer")) return parse_transfer(body);
    if (iequal_prefix(body, "thermocycl")) return {parse_thermo(body)};
    if (iequal_prefix(body, "mix")) return {parse_mix(body)};
    if (iequal_prefix(body, "fluorescence") || iequal_prefix(body, "read"))
        return {parse_read(body)};
    if (iequal_prefix(body, "seal")) return {SealStep{}};
    if (iequal_prefix(body, "peel")) return {PeelStep{}};

    // Unclassifiable lines are treated as failed transfers; the volume slot
    // is the first template slot checked.
    throw PlanFormatError("line does not start with a known step and has no volume", "volume");
}

std::string format_step(const PlanStep& step, int index) {
    std::ostringstream out;
    out << index << ".) ";
    if (const auto* t = std::get_if<TransferStep>(&step)) {
        out << "Transfer " << num_str(t->volume_ul) << " uL of " << t->reagent << " from "
            << t->source_well << " on " << t->source_label << " to " << t->dest_well << " on "
            << t->dest_label << " with " << t->mix_cycles << " mix cycles. [Tip action - "
            << (t->eject_tip ? "eject tip" : "none") << "]";
    } else if (const auto* th = std::get_if<ThermoStep>(&step)) {
        out << "Thermocycling: " << num_str(th->temperature_c) << " for "
            << num_str(th->duration_s);
    } else if (const auto* mx = std::get_if<MixStep>(&step)) {
        out << "Mix " << mx->cycles << "X with pipette set to " << num_str(mx->volume_ul)
            << " uL in wells ";
        for (std::size_t i = 0; i < mx->wells.size(); ++i) {
            if (i) out << ", ";
            out << mx->wells[i];
        }
        out << ".";
    } else if (const auto* rd = std::get_if<ReadStep>(&step)) {
        out << "Fluorescence read: " << rd->instrument << ", " << rd->assay << ".";
    } else if (std::holds_alternative<SealStep>(step)) {
        out << "Seal the plate.";
    } else {
        out << "Peel the plate.";
    }
    return out.str();
}

namespace {

// Expand "A1-A4" (column span) or "A1-D1" (row span) into individual wells.
std::vector<std::string> expand_well_range(const std::string& first, const std::string& last) {
    std::vector<std::string> wells;
    char row1 = first[0], row2 = last[0];
    int col1 = std::stoi(first.substr(1)), col2 = std::stoi(last.substr(1));
    if (row1 == row2) {
        for (int c = std::min(col1, col2); c <= std::max(col1, col2); ++c)
            wells.push_back(std::string(1, row1) + std::to_string(c));
    } else if (col1 == col2) {
        for (char r = std::min(row1, row2); r <= std::max(row1, row2); ++r)
            wells.push_back(std::string(1, r) + std::to_string(col1));
    } else {
        wells = {first, last};
    }
    return wells;
}

}  // namespace

PlanParse parse_plan(const std::string& text) {
    PlanParse result;
    std::string current_label = "reagent plate";

    static const std::regex step_re(R"(^\s*\d+\s*[.)\]])");
    static const std::regex layout_header_re(R"(^(.+?)\s+layout\s*:?\s*$)",
                                             std::regex::icase);
    static const std::regex map_re(
        R"(^-?\s*([A-H]\d{1,2})(?:\s*-\s*([A-H]\d{1,2}))?\s*:\s*(.+?)\s*$)");
    static const std::regex wells_re(R"(^(Test|Control)\s+wells?\s*:\s*(.+)$)",
                                     std::regex::icase);

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = normalize_line(raw);
        if (line.empty()) continue;

        if (std::regex_search(line, step_re)) {
            try {
                auto steps = parse_step_line(line);
                for (auto& s : steps) result.plan.steps.push_back(std::move(s));
            } catch (const PlanFormatError& e) {
                result.errors.push_back({lineno, e.slot(), e.what()});
            }
            continue;
        }

        std::smatch m;
        if (std::regex_match(line, m, wells_re)) {
            std::string kind = m[1];
            std::transform(kind.begin(), kind.end(), kind.begin(), ::tolower);
            auto& target = kind == "test" ? result.plan.test_wells : result.plan.control_wells;
            for (const auto& w : split_list(m[2])) target.insert(w);
            continue;
        }
        if (std::regex_match(line, m, layout_header_re)) {
            current_label = m[1];
            std::transform(current_label.begin(), current_label.end(), current_label.begin(),
                           ::tolower);
            continue;
        }
        if (std::regex_match(line, m, map_re)) {
            std::vector<std::string> wells =
                m[2].matched ? expand_well_range(m[1], m[2]) : std::vector<std::string>{m[1]};
            for (const auto& w : wells)
                result.plan.reagent_sources[m[3]].emplace_back(current_label, w);
            continue;
        }
        // Headers like "Materials:" or "Liquid Handling Steps:" and free
        // prose fall through without effect.
    }
    return result;
}

PlanSpec default_pcr_plan_spec() {
    PlanSpec spec;
    spec.reagent_volumes = {{"Master Mix", 20.0},
                            {"Nuclease-free Biowater", 5.0},
                            {"Forward Primer", 5.0},
                            {"Reverse Primer", 5.0},
                            {"Template DNA", 5.0}};
    spec.filler_reagent = "Nuclease-free Biowater";
    spec.control_filler_volume = 10.0;
    spec.template_reagent = "Template DNA";
    spec.expected_thermo_steps = 3;
    spec.min_transfer_volume = 5.0;
    spec.well_working_volume = 100.0;
    spec.pipette_max = 20.0;
    spec.test_wells = {"A1", "A3"};
    spec.control_wells = {"A2", "A4"};
    spec.total_reaction_volume = 40.0;
    return spec;
}

PlanSpec load_plan_spec(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ParseError("plan spec: " + e.msg);
    }
    PlanSpec spec = default_pcr_plan_spec();
    if (root["reagent_volumes"]) {
        spec.reagent_volumes.clear();
        for (const auto& kv : root["reagent_volumes"])
            spec.reagent_volumes[kv.first.as<std::string>()] = kv.second.as<double>();
    }
    if (root["filler_reagent"]) spec.filler_reagent = root["filler_reagent"].as<std::string>();
    if (root["control_filler_volume"])
        spec.control_filler_volume = root["control_filler_volume"].as<double>();
    if (root["template_reagent"])
        spec.template_reagent = root["template_reagent"].as<std::string>();
    if (root["expected_thermo_steps"])
        spec.expected_thermo_steps = root["expected_thermo_steps"].as<int>();
    if (root["min_transfer_volume"])
        spec.min_transfer_volume = root["min_transfer_volume"].as<double>();
    if (root["well_working_volume"])
        spec.well_working_volume = root["well_working_volume"].as<double>();
    if (root["pipette_max"]) spec.pipette_max = root["pipette_max"].as<double>();
    if (root["test_wells"]) {
        spec.test_wells.clear();
        for (const auto& w : root["test_wells"]) spec.test_wells.insert(w.as<std::string>());
    }
    if (root["control_wells"]) {
        spec.control_wells.clear();
        for (const auto& w : root["control_wells"]) spec.control_wells.insert(w.as<std::string>());
    }
    if (root["total_reaction_volume"])
        spec.total_reaction_volume = root["total_reaction_volume"].as<double>();
    if (spec.min_transfer_volume > spec.pipette_max ||
        spec.pipette_max > spec.well_working_volume)
        throw ConfigError("plan spec requires min_transfer_volume <= pipette_max <= well_working_volume");
    return spec;
}

const char* to_string(FindingKind k) {
    switch (k) {
        case FindingKind::Missing: return "missing";
        case FindingKind::Extra: return "extra";
        case FindingKind::WrongValue: return "wrong-value";
        case FindingKind::Format: return "format";
    }
    return "?";
}

bool CriteriaReport::all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const CriterionVerdict& v) { return v.pass; });
}

bool CriteriaReport::passed(const std::string& criterion) const {
    for (const auto& v : verdicts)
        if (v.id == criterion) return v.pass;
    return false;
}

namespace {

struct Checker {
    CriteriaReport report;

    void add(const std::string& criterion, FindingKind kind, std::string detail) {
        report.findings.push_back({criterion, kind, std::move(detail)});
        for (auto& v : report.verdicts)
            if (v.id == criterion) v.pass = false;
    }

    void declare(const std::string& id) { report.verdicts.push_back({id, true}); }
};

std::vector<const TransferStep*> transfers_of(const Plan& plan) {
    std::vector<const TransferStep*> out;
    for (const auto& s : plan.steps)
        if (const auto* t = std::get_if<TransferStep>(&s)) out.push_back(t);
    return out;
}

long thermo_count(const Plan& plan) {
    long n = 0;
    for (const auto& s : plan.steps)
        if (std::holds_alternative<ThermoStep>(s)) ++n;
    return n;
}

bool close(double a, double b) { return std::fabs(a - b) < 1e-6; }

// Reagent names in the wild carry qualifiers ("Luna Universal qPCR Master
// Mix"); match a spec key when it appears inside the plan's name or equals
// it, case-insensitively.
const std::pair<const std::string, double>* lookup_reagent(
    const std::map<std::string, double>& table, const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    for (const auto& kv : table) {
        std::string key = kv.first;
        std::transform(key.begin(), key.end(), key.begin(), ::tolower);
        if (key == lower || lower.find(key) != std::string::npos ||
            key.find(lower) != std::string::npos)
            return &kv;
    }
    return nullptr;
}

void check_step_format(Checker& c, const PlanParse& parse, const char* id) {
    for (const auto& err : parse.errors)
        c.add(id, FindingKind::Format,
              "line " + std::to_string(err.line) + " (" + err.slot + " slot): " + err.message);
}

void check_thermo(Checker& c, const Plan& plan, const PlanSpec& spec, const char* id) {
    long n = thermo_count(plan);
    if (n < spec.expected_thermo_steps)
        c.add(id, FindingKind::Missing,
              "expected " + std::to_string(spec.expected_thermo_steps) +
                  " thermocycling steps, found " + std::to_string(n));
    else if (n > spec.expected_thermo_steps)
        c.add(id, FindingKind::Extra,
              "expected " + std::to_string(spec.expected_thermo_steps) +
                  " thermocycling steps, found " + std::to_string(n));
}

void check_reagent_logic(Checker& c, const Plan& plan, const PlanSpec& spec,
                         const std::set<std::string>& test_wells,
                         const std::set<std::string>& control_wells, const char* id) {
    std::set<std::string> template_dests;
    for (const auto* t : transfers_of(plan)) {
        const auto* hit = lookup_reagent({{spec.template_reagent, 0.0}}, t->reagent);
        if (hit) template_dests.insert(t->dest_well);
    }
    for (const auto& w : test_wells)
        if (!template_dests.count(w))
            c.add(id, FindingKind::Missing,
                  spec.template_reagent + " not delivered to test well " + w);
    for (const auto& w : control_wells)
        if (template_dests.count(w))
            c.add(id, FindingKind::Extra,
                  spec.template_reagent + " delivered to control well " + w);
}

}  // namespace

CriteriaReport check_constrained(const PlanParse& parse, const PlanSpec& spec) {
    const Plan& plan = parse.plan;
    Checker c;
    c.report.mode = "constrained";
    c.declare("well_assignments");
    c.declare("volumes");
    c.declare("thermo_count");
    c.declare("step_format");
    c.declare("reagent_logic");
    c.declare("pipette_selection");

    auto transfers = transfers_of(plan);

    // 1: destinations cover exactly the required wells; sources match the
    // declared reagent map when one is present.
    std::set<std::string> required;
    required.insert(spec.test_wells.begin(), spec.test_wells.end());
    required.insert(spec.control_wells.begin(), spec.control_wells.end());
    std::set<std::string> targeted;
    for (const auto* t : transfers) targeted.insert(t->dest_well);
    for (const auto& w : required)
        if (!targeted.count(w))
            c.add("well_assignments", FindingKind::Missing, "no transfer targets well " + w);
    for (const auto& w : targeted)
        if (!required.count(w))
            c.add("well_assignments", FindingKind::Extra,
                  "transfer targets unexpected well " + w);
    if (!plan.reagent_sources.empty()) {
        for (const auto* t : transfers) {
            const std::pair<const std::string,
                            std::vector<std::pair<std::string, std::string>>>* entry = nullptr;
            std::string lower = t->reagent;
            std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
            for (const auto& kv : plan.reagent_sources) {
                std::string key = kv.first;
                std::transform(key.begin(), key.end(), key.begin(), ::tolower);
                if (key == lower || lower.find(key) != std::string::npos ||
                    key.find(lower) != std::string::npos) {
                    entry = &kv;
                    break;
                }
            }
            if (!entry) continue;
            bool listed = false;
            for (const auto& [label, well] : entry->second)
                if (well == t->source_well) listed = true;
            if (!listed)
                c.add("well_assignments", FindingKind::WrongValue,
                      t->reagent + " drawn from " + t->source_well +
                          " which is not a listed source well");
        }
    }

    // 2: per-transfer volumes match the reagent table (filler differs for
    // control wells when configured).
    for (const auto* t : transfers) {
        const auto* entry = lookup_reagent(spec.reagent_volumes, t->reagent);
        if (!entry) {
            c.add("volumes", FindingKind::Extra, "unrecognized reagent '" + t->reagent + "'");
            continue;
        }
        double expected = entry->second;
        if (spec.control_filler_volume && entry->first == spec.filler_reagent &&
            spec.control_wells.count(t->dest_well))
            expected = *spec.control_filler_volume;
        if (!close(t->volume_ul, expected))
            c.add("volumes", FindingKind::WrongValue,
                  t->reagent + " to " + t->dest_well + ": expected " + num_str(expected) +
                      " uL, found " + num_str(t->volume_ul) + " uL");
    }

    check_thermo(c, plan, spec, "thermo_count");
    check_step_format(c, parse, "step_format");
    check_reagent_logic(c, plan, spec, spec.test_wells, spec.control_wells, "reagent_logic");

    // 6: all transfer volumes inside the configured pipette's range.
    for (const auto* t : transfers) {
        if (t->volume_ul > spec.pipette_max)
            c.add("pipette_selection", FindingKind::WrongValue,
                  num_str(t->volume_ul) + " uL transfer exceeds pipette max " +
                      num_str(spec.pipette_max) + " uL");
        else if (t->volume_ul < spec.min_transfer_volume)
            c.add("pipette_selection", FindingKind::WrongValue,
                  num_str(t->volume_ul) + " uL transfer is below the " +
                      num_str(spec.min_transfer_volume) + " uL accuracy floor");
    }
    return c.report;
}

namespace {

int chebyshev(const std::string& a, const std::string& b) {
    int dr = std::abs(a[0] - b[0]);
    int dc = std::abs(std::stoi(a.substr(1)) - std::stoi(b.substr(1)));
    return std::max(dr, dc);
}

}  // namespace

CriteriaReport check_open_ended(const PlanParse& parse, const PlanSpec& spec) {
    const Plan& plan = parse.plan;
    Checker c;
    c.report.mode = "open-ended";
    c.declare("well_mapping");
    c.declare("spacing");
    c.declare("volume_totals");
    c.declare("thermo_count");
    c.declare("step_format");
    c.declare("reagent_logic");
    c.declare("pipette_use");
    c.declare("volume_limits");

    auto transfers = transfers_of(plan);

    // The plan picks its own wells in this mode; fall back to the spec's if
    // the document declares none.
    const std::set<std::string>& tests =
        plan.test_wells.empty() ? spec.test_wells : plan.test_wells;
    const std::set<std::string>& controls =
        plan.control_wells.empty() ? spec.control_wells : plan.control_wells;

    // 1: practical well mapping, interpreted as: well counts match the
    // request, wells are valid and disjoint, every reaction destination is a
    // declared well, and no destination doubles as a source on the same
    // labware.
    if (tests.size() != spec.test_wells.size())
        c.add("well_mapping", FindingKind::WrongValue,
              "expected " + std::to_string(spec.test_wells.size()) + " test wells, found " +
                  std::to_string(tests.size()));
    if (controls.size() != spec.control_wells.size())
        c.add("well_mapping", FindingKind::WrongValue,
              "expected " + std::to_string(spec.control_wells.size()) +
                  " control wells, found " + std::to_string(controls.size()));
    for (const auto& w : tests)
        if (controls.count(w))
            c.add("well_mapping", FindingKind::Extra, "well " + w + " is both test and control");
    for (const auto& w : tests)
        if (!well_id_valid(w)) c.add("well_mapping", FindingKind::Format, "invalid well " + w);
    for (const auto& w : controls)
        if (!well_id_valid(w)) c.add("well_mapping", FindingKind::Format, "invalid well " + w);
    std::map<std::string, std::set<std::string>> sources_by_label;
    for (const auto* t : transfers) sources_by_label[t->dest_label];  // ensure key
    for (const auto* t : transfers) sources_by_label[t->source_label].insert(t->source_well);
    for (const auto* t : transfers) {
        if (!tests.count(t->dest_well) && !controls.count(t->dest_well))
            c.add("well_mapping", FindingKind::Extra,
                  "transfer targets undeclared well " + t->dest_well);
        if (sources_by_label[t->dest_label].count(t->dest_well))
            c.add("well_mapping", FindingKind::Extra,
                  "destination well " + t->dest_well + " on " + t->dest_label +
                      " is also used as a source");
    }

    // 2: Chebyshev distance >= 2 between every test/control pair.
    for (const auto& t : tests)
        for (const auto& k : controls)
            if (well_id_valid(t) && well_id_valid(k) && chebyshev(t, k) < 2)
                c.add("spacing", FindingKind::WrongValue,
                      "test well " + t + " and control well " + k + " are adjacent");

    // 3: per-well delivered volume equals the reaction volume.
    std::map<std::string, double> totals;
    for (const auto* t : transfers) totals[t->dest_well] += t->volume_ul;
    std::set<std::string> reaction_wells;
    reaction_wells.insert(tests.begin(), tests.end());
    reaction_wells.insert(controls.begin(), controls.end());
    for (const auto& w : reaction_wells) {
        double got = totals.count(w) ? totals[w] : 0.0;
        if (!close(got, spec.total_reaction_volume))
            c.add("volume_totals", FindingKind::WrongValue,
                  "well " + w + " receives " + num_str(got) + " uL, expected " +
                      num_str(spec.total_reaction_volume) + " uL");
    }

    check_thermo(c, plan, spec, "thermo_count");
    check_step_format(c, parse, "step_format");
    check_reagent_logic(c, plan, spec, tests, controls, "reagent_logic");

    // 7: one pipette serves the whole plan.
    for (const auto* t : transfers)
        if (t->volume_ul > spec.pipette_max)
            c.add("pipette_use", FindingKind::WrongValue,
                  num_str(t->volume_ul) + " uL transfer exceeds pipette max " +
                      num_str(spec.pipette_max) + " uL");

    // 8: accuracy floor per transfer, capacity per source well and per
    // destination well.
    for (const auto* t : transfers)
        if (t->volume_ul < spec.min_transfer_volume)
            c.add("volume_limits", FindingKind::WrongValue,
                  num_str(t->volume_ul) + " uL transfer is below the " +
                      num_str(spec.min_transfer_volume) + " uL accuracy floor");
    std::map<std::pair<std::string, std::string>, double> drawn;
    for (const auto* t : transfers)
        drawn[{t->source_label, t->source_well}] += t->volume_ul;
    for (const auto& [src, total] : drawn)
        if (total > spec.well_working_volume + 1e-6)
            c.add("volume_limits", FindingKind::WrongValue,
                  "source well " + src.second + " on " + src.first + " supplies " +
                      num_str(total) + " uL, over the " + num_str(spec.well_working_volume) +
                      " uL working volume");
    for (const auto& [well, total] : totals)
        if (total > spec.well_working_volume + 1e-6)
            c.add("volume_limits", FindingKind::WrongValue,
                  "well " + well + " receives " + num_str(total) + " uL, over the " +
                      num_str(spec.well_working_volume) + " uL working volume");
    return c.report;
}

std::string criteria_to_json(const CriteriaReport& report) {
    nlohmann::ordered_json j;
    j["mode"] = report.mode;
    j["all_pass"] = report.all_pass();
    j["criteria"] = nlohmann::ordered_json::array();
    for (const auto& v : report.verdicts)
        j["criteria"].push_back({{"id", v.id}, {"pass", v.pass}});
    j["findings"] = nlohmann::ordered_json::array();
    for (const auto& f : report.findings)
        j["findings"].push_back(
            {{"criterion", f.criterion}, {"kind", to_string(f.kind)}, {"detail", f.detail}});
    return j.dump(2) + "\n";
}

std::string criteria_to_text(const CriteriaReport& report) {
    std::ostringstream out;
    out << report.mode << " criteria:\n";
    for (const auto& v : report.verdicts) {
        out << "  [" << (v.pass ? "pass" : "FAIL") << "] " << v.id << "\n";
        for (const auto& f : report.findings)
            if (f.criterion == v.id)
                out << "      " << to_string(f.kind) << ": " << f.detail << "\n";
    }
    out << (report.all_pass() ? "all criteria pass" : "criteria failed") << "\n";
    return out.str();
}

}  // namespace labsim
