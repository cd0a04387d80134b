#pragma once
// Aggregation of per-instance results into summary quantities, plus report
// serialization. Reports embed the full run configuration and template
// version so every number in the file can be traced to its inputs, and
// serialization is byte-stable: identical inputs give identical files.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qshift/adversarial.hpp"
#include "qshift/core.hpp"
#include "qshift/scoring.hpp"

namespace qshift {

inline constexpr const char* kReportSchemaVersion = "1";

struct AttributionTable {
    double by_question_correct = 0.0; // percentages over the result set
    double by_question_incorrect = 0.0;
    double by_choice_correct = 0.0;
    double by_choice_incorrect = 0.0;
};

struct MetricSummary {
    double accuracy = 0.0;
    double choice_sensitivity = 0.0;
    // Same mean, restricted to instances with no degenerate-baseline choice.
    double choice_sensitivity_excl_degenerate = 0.0;
    int degenerate_instances = 0;
    int degenerate_choices = 0;
    AttributionTable attribution;
};

struct AdversarialMetricSummary {
    double baseline_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    double accuracy_delta_points = 0.0;
    double flip_to_adversarial_rate = 0.0;   // strict: baseline was elsewhere
    double raw_prediction_change_rate = 0.0; // any prediction difference
};

struct AdversarialBlock {
    AdversarialKind kind = AdversarialKind::Simple;
    std::map<MetricKind, AdversarialMetricSummary> metrics;
    std::vector<SubstitutionRecord> substitutions; // sorted by instance id
};

// One choice-driven component measurement: the raw log P(x|C) of a choice,
// flagged when the choice is a substituted adversarial text.
struct ComponentRecord {
    std::string instance_id;
    int choice_index = 0;
    double component = 0.0;
    bool is_adversarial = false;
};

struct EvalReport {
    std::string schema_version = kReportSchemaVersion;
    EvalConfig config;
    std::string template_version;
    bool partial = false;  // set when a run was cut short by a backend failure
    std::string error;     // the failure, when partial
    int alignment_errors = 0;
    std::map<MetricKind, MetricSummary> metrics;
    std::optional<AdversarialBlock> adversarial;
    std::vector<InstanceResult> instances;   // sorted by id
    std::vector<ComponentRecord> components; // sorted by (id, choice)
};

// --- aggregation ---------------------------------------------------------------

inline EvalReport aggregate(std::vector<InstanceResult> results,
                            const EvalConfig& config,
                            const std::string& template_version,
                            std::vector<ComponentRecord> components = {},
                            int alignment_errors = 0) {
    if (results.empty())
        throw Error(Errc::EmptyResultSet, "aggregate over no results");
    std::sort(results.begin(), results.end(),
              [](const InstanceResult& a, const InstanceResult& b) { return a.id < b.id; });
    std::sort(components.begin(), components.end(),
              [](const ComponentRecord& a, const ComponentRecord& b) {
                  if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
                  return a.choice_index < b.choice_index;
              });

    EvalReport rep;
    rep.config = config;
    rep.template_version = template_version;
    rep.alignment_errors = alignment_errors;

    const double n = static_cast<double>(results.size());
    for (MetricKind m : config.metrics) {
        MetricSummary s;
        s.accuracy = accuracy(results, m);
        s.choice_sensitivity = choice_sensitivity(results, m);
        std::size_t clean = 0, clean_sensitive = 0;
        int cells[4] = {0, 0, 0, 0};
        for (const InstanceResult& r : results) {
            const MetricOutcome& o = outcome_for(r, m);
            ++cells[static_cast<int>(attribute(o))];
            s.degenerate_choices += o.degenerate_choices;
            if (o.degenerate_choices > 0) {
                ++s.degenerate_instances;
            } else {
                ++clean;
                if (o.choice_sensitive) ++clean_sensitive;
            }
        }
        s.choice_sensitivity_excl_degenerate =
            clean == 0 ? 0.0
                       : static_cast<double>(clean_sensitive) / static_cast<double>(clean);
        s.attribution.by_question_correct = cells[0] / n * 100.0;
        s.attribution.by_question_incorrect = cells[1] / n * 100.0;
        s.attribution.by_choice_correct = cells[2] / n * 100.0;
        s.attribution.by_choice_incorrect = cells[3] / n * 100.0;
        rep.metrics[m] = s;
    }
    rep.instances = std::move(results);
    rep.components = std::move(components);
    return rep;
}

// Attaches the adversarial summary; `baseline` and `adversarial` must cover
// the same instance ids.
inline void attach_adversarial(EvalReport& rep,
                               const std::vector<InstanceResult>& baseline,
                               const std::vector<InstanceResult>& adversarial,
                               std::vector<SubstitutionRecord> records,
                               AdversarialKind kind) {
    AdversarialBlock block;
    block.kind = kind;
    for (MetricKind m : rep.config.metrics) {
        AdversarialMetricSummary s;
        s.baseline_accuracy = accuracy(baseline, m);
        s.adversarial_accuracy = accuracy(adversarial, m);
        s.accuracy_delta_points = accuracy_delta_points(baseline, adversarial, m);
        s.flip_to_adversarial_rate =
            flip_to_adversarial_rate(baseline, adversarial, records, m);
        s.raw_prediction_change_rate =
            raw_prediction_change_rate(baseline, adversarial, m);
        block.metrics[m] = s;
    }
    std::sort(records.begin(), records.end(),
              [](const SubstitutionRecord& a, const SubstitutionRecord& b) {
                  return a.instance_id < b.instance_id;
              });
    block.substitutions = std::move(records);
    rep.adversarial = std::move(block);
}

// --- Pearson product-moment correlation ------------------------------------------

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error(Errc::DegenerateVariance, "pearson: length mismatch");
    if (xs.size() < 2)
        throw Error(Errc::DegenerateVariance, "pearson: need at least 2 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(Errc::DegenerateVariance, "pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

// --- serialization -----------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string fmt_percent(double v) { // two decimals, report convention
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string slot_policy_to_string(const SlotPolicy& p) {
    if (p.kind == SlotPolicy::Kind::Fixed)
        return "fixed:" + std::to_string(p.fixed_slot);
    return "random";
}

inline SlotPolicy slot_policy_from_string(const std::string& s) {
    SlotPolicy p;
    if (s == "random") return p;
    if (s.rfind("fixed:", 0) == 0) {
        p.kind = SlotPolicy::Kind::Fixed;
        p.fixed_slot = std::stoi(s.substr(6));
        return p;
    }
    throw Error(Errc::ConfigError, "bad slot policy '" + s + "'");
}

} // namespace detail

inline nlohmann::json config_to_json(const EvalConfig& c) {
    nlohmann::json j;
    j["format"] = format_name(c.format);
    nlohmann::json metrics = nlohmann::json::array();
    for (MetricKind m : c.metrics) metrics.push_back(metric_name(m));
    j["metrics"] = metrics;
    j["shots"] = c.shots;
    j["demo_seed"] = c.demo_seed;
    j["instruction_enabled"] = c.instruction_enabled;
    j["backend"] = {{"kind", scorer_kind_name(c.backend.kind)},
                    {"target", c.backend.target},
                    {"model", c.backend.model},
                    {"timeout_ms", c.backend.timeout_ms},
                    {"max_retries", c.backend.max_retries}};
    if (c.adversarial) {
        j["adversarial"] = {{"kind", adversarial_name(c.adversarial->kind)},
                            {"slot_policy",
                             detail::slot_policy_to_string(c.adversarial->slot_policy)},
                            {"seed", c.adversarial->seed}};
    }
    return j;
}

inline EvalConfig config_from_json(const nlohmann::json& j) {
    EvalConfig c;
    c.format = parse_format(j.at("format").get<std::string>());
    c.metrics.clear();
    for (const auto& m : j.at("metrics")) c.metrics.push_back(parse_metric(m));
    c.shots = j.at("shots").get<int>();
    c.demo_seed = j.at("demo_seed").get<std::uint64_t>();
    c.instruction_enabled = j.at("instruction_enabled").get<bool>();
    const auto& b = j.at("backend");
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "wire") c.backend.kind = ScorerKind::Wire;
    else if (kind == "fixture") c.backend.kind = ScorerKind::Fixture;
    else if (kind == "ngram") c.backend.kind = ScorerKind::Ngram;
    else throw Error(Errc::ConfigError, "unknown backend kind '" + kind + "'");
    c.backend.target = b.at("target").get<std::string>();
    c.backend.model = b.at("model").get<std::string>();
    c.backend.timeout_ms = b.at("timeout_ms").get<int>();
    c.backend.max_retries = b.at("max_retries").get<int>();
    if (j.contains("adversarial")) {
        AdversarialConfig a;
        a.kind = parse_adversarial(j.at("adversarial").at("kind").get<std::string>());
        a.slot_policy = detail::slot_policy_from_string(
            j.at("adversarial").at("slot_policy").get<std::string>());
        a.seed = j.at("adversarial").at("seed").get<std::uint64_t>();
        c.adversarial = a;
    }
    return c;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["schema_version"] = r.schema_version;
    j["template_version"] = r.template_version;
    j["config"] = config_to_json(r.config);
    j["partial"] = r.partial;
    if (r.partial) j["error"] = r.error;
    j["counts"] = {{"instances", r.instances.size()},
                   {"alignment_errors", r.alignment_errors}};

    nlohmann::json metrics;
    for (const auto& [m, s] : r.metrics) {
        metrics[metric_name(m)] = {
            {"accuracy", s.accuracy},
            {"choice_sensitivity", s.choice_sensitivity},
            {"choice_sensitivity_excluding_degenerate",
             s.choice_sensitivity_excl_degenerate},
            {"degenerate_instances", s.degenerate_instances},
            {"degenerate_choices", s.degenerate_choices},
            {"attribution_percent",
             {{"by_question_correct", s.attribution.by_question_correct},
              {"by_question_incorrect", s.attribution.by_question_incorrect},
              {"by_choice_correct", s.attribution.by_choice_correct},
              {"by_choice_incorrect", s.attribution.by_choice_incorrect}}}};
    }
    j["metrics"] = metrics.is_null() ? nlohmann::json::object() : metrics;

    if (r.adversarial) {
        nlohmann::json a;
        a["kind"] = adversarial_name(r.adversarial->kind);
        a["targeted_format"] = format_name(targeted_format(r.adversarial->kind));
        nlohmann::json am;
        for (const auto& [m, s] : r.adversarial->metrics) {
            am[metric_name(m)] = {
                {"baseline_accuracy", s.baseline_accuracy},
                {"adversarial_accuracy", s.adversarial_accuracy},
                {"accuracy_delta_points", s.accuracy_delta_points},
                {"flip_to_adversarial_rate", s.flip_to_adversarial_rate},
                {"raw_prediction_change_rate", s.raw_prediction_change_rate}};
        }
        a["metrics"] = am.is_null() ? nlohmann::json::object() : am;
        nlohmann::json subs = nlohmann::json::array();
        for (const SubstitutionRecord& rec : r.adversarial->substitutions) {
            subs.push_back({{"id", rec.instance_id},
                            {"slot", rec.slot},
                            {"original_text", rec.original_text},
                            {"adversarial_text", rec.adversarial_text},
                            {"kind", adversarial_name(rec.kind)}});
        }
        a["substitutions"] = subs;
        j["adversarial"] = a;
    }

    nlohmann::json insts = nlohmann::json::array();
    for (const InstanceResult& ir : r.instances) {
        nlohmann::json e;
        e["id"] = ir.id;
        e["answer_index"] = ir.answer_index;
        nlohmann::json em;
        for (const auto& [m, o] : ir.metrics) {
            em[metric_name(m)] = {{"predicted", o.predicted},
                                  {"correct", o.correct},
                                  {"delta_choice", o.delta_choice},
                                  {"delta_question", o.delta_question},
                                  {"choice_sensitive", o.choice_sensitive},
                                  {"attribution", attribution_name(attribute(o))},
                                  {"degenerate_choices", o.degenerate_choices}};
        }
        e["metrics"] = em.is_null() ? nlohmann::json::object() : em;
        insts.push_back(e);
    }
    j["instances"] = insts;

    nlohmann::json comps = nlohmann::json::array();
    for (const ComponentRecord& c : r.components) {
        comps.push_back({{"instance_id", c.instance_id},
                         {"choice_index", c.choice_index},
                         {"component", c.component},
                         {"is_adversarial", c.is_adversarial}});
    }
    j["components"] = comps;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.schema_version = j.at("schema_version").get<std::string>();
    if (r.schema_version != kReportSchemaVersion)
        throw Error(Errc::SchemaVersionMismatch,
                    "report schema '" + r.schema_version + "', expected '" +
                        kReportSchemaVersion + "'");
    r.template_version = j.at("template_version").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.partial = j.value("partial", false);
    r.error = j.value("error", "");
    r.alignment_errors = j.at("counts").at("alignment_errors").get<int>();

    for (const auto& [name, sj] : j.at("metrics").items()) {
        MetricSummary s;
        s.accuracy = sj.at("accuracy").get<double>();
        s.choice_sensitivity = sj.at("choice_sensitivity").get<double>();
        s.choice_sensitivity_excl_degenerate =
            sj.at("choice_sensitivity_excluding_degenerate").get<double>();
        s.degenerate_instances = sj.at("degenerate_instances").get<int>();
        s.degenerate_choices = sj.at("degenerate_choices").get<int>();
        const auto& at = sj.at("attribution_percent");
        s.attribution.by_question_correct = at.at("by_question_correct").get<double>();
        s.attribution.by_question_incorrect =
            at.at("by_question_incorrect").get<double>();
        s.attribution.by_choice_correct = at.at("by_choice_correct").get<double>();
        s.attribution.by_choice_incorrect = at.at("by_choice_incorrect").get<double>();
        r.metrics[parse_metric(name)] = s;
    }

    if (j.contains("adversarial")) {
        AdversarialBlock block;
        block.kind = parse_adversarial(j.at("adversarial").at("kind").get<std::string>());
        for (const auto& [name, sj] : j.at("adversarial").at("metrics").items()) {
            AdversarialMetricSummary s;
            s.baseline_accuracy = sj.at("baseline_accuracy").get<double>();
            s.adversarial_accuracy = sj.at("adversarial_accuracy").get<double>();
            s.accuracy_delta_points = sj.at("accuracy_delta_points").get<double>();
            s.flip_to_adversarial_rate = sj.at("flip_to_adversarial_rate").get<double>();
            s.raw_prediction_change_rate =
                sj.at("raw_prediction_change_rate").get<double>();
            block.metrics[parse_metric(name)] = s;
        }
        for (const auto& rec : j.at("adversarial").at("substitutions")) {
            SubstitutionRecord sr;
            sr.instance_id = rec.at("id").get<std::string>();
            sr.slot = rec.at("slot").get<int>();
            sr.original_text = rec.at("original_text").get<std::string>();
            sr.adversarial_text = rec.at("adversarial_text").get<std::string>();
            sr.kind = parse_adversarial(rec.at("kind").get<std::string>());
            block.substitutions.push_back(std::move(sr));
        }
        r.adversarial = std::move(block);
    }

    for (const auto& e : j.at("instances")) {
        InstanceResult ir;
        ir.id = e.at("id").get<std::string>();
        ir.answer_index = e.at("answer_index").get<int>();
        for (const auto& [name, oj] : e.at("metrics").items()) {
            MetricOutcome o;
            o.predicted = oj.at("predicted").get<int>();
            o.correct = oj.at("correct").get<bool>();
            o.delta_choice = oj.at("delta_choice").get<double>();
            o.delta_question = oj.at("delta_question").get<double>();
            o.choice_sensitive = oj.at("choice_sensitive").get<bool>();
            o.degenerate_choices = oj.at("degenerate_choices").get<int>();
            ir.metrics[parse_metric(name)] = o;
        }
        r.instances.push_back(std::move(ir));
    }

    for (const auto& e : j.at("components")) {
        ComponentRecord c;
        c.instance_id = e.at("instance_id").get<std::string>();
        c.choice_index = e.at("choice_index").get<int>();
        c.component = e.at("component").get<double>();
        c.is_adversarial = e.at("is_adversarial").get<bool>();
        r.components.push_back(std::move(c));
    }
    return r;
}

// CSV layout: a summary block with one row per (metric, statistic), then a
// per-instance table with one row per instance. Percentages carry two
// decimals; other numbers use the shortest round-trip form.
inline std::string report_to_csv(const EvalReport& r) {
    using detail::csv_escape;
    using detail::fmt_double;
    using detail::fmt_percent;
    std::ostringstream out;
    out << "metric,stat,value\n";
    for (const auto& [m, s] : r.metrics) {
        const std::string name = metric_name(m);
        out << name << ",accuracy," << fmt_double(s.accuracy) << "\n";
        out << name << ",choice_sensitivity," << fmt_double(s.choice_sensitivity)
            << "\n";
        out << name << ",choice_sensitivity_excluding_degenerate,"
            << fmt_double(s.choice_sensitivity_excl_degenerate) << "\n";
        out << name << ",degenerate_instances," << s.degenerate_instances << "\n";
        out << name << ",degenerate_choices," << s.degenerate_choices << "\n";
        out << name << ",attribution_by_question_correct_percent,"
            << fmt_percent(s.attribution.by_question_correct) << "\n";
        out << name << ",attribution_by_question_incorrect_percent,"
            << fmt_percent(s.attribution.by_question_incorrect) << "\n";
        out << name << ",attribution_by_choice_correct_percent,"
            << fmt_percent(s.attribution.by_choice_correct) << "\n";
        out << name << ",attribution_by_choice_incorrect_percent,"
            << fmt_percent(s.attribution.by_choice_incorrect) << "\n";
        if (r.adversarial) {
            const auto& a = r.adversarial->metrics.at(m);
            out << name << ",baseline_accuracy," << fmt_double(a.baseline_accuracy)
                << "\n";
            out << name << ",adversarial_accuracy,"
                << fmt_double(a.adversarial_accuracy) << "\n";
            out << name << ",accuracy_delta_points,"
                << fmt_percent(a.accuracy_delta_points) << "\n";
            out << name << ",flip_to_adversarial_rate,"
                << fmt_double(a.flip_to_adversarial_rate) << "\n";
            out << name << ",raw_prediction_change_rate,"
                << fmt_double(a.raw_prediction_change_rate) << "\n";
        }
    }

    out << "id,answer_index";
    for (const auto& [m, s] : r.metrics) {
        const std::string name = metric_name(m);
        out << "," << name << "_predicted," << name << "_correct," << name
            << "_delta_choice," << name << "_delta_question," << name
            << "_choice_sensitive," << name << "_attribution";
    }
    out << "\n";
    for (const InstanceResult& ir : r.instances) {
        out << csv_escape(ir.id) << "," << ir.answer_index;
        for (const auto& [m, s] : r.metrics) {
            const MetricOutcome& o = outcome_for(ir, m);
            out << "," << o.predicted << "," << (o.correct ? 1 : 0) << ","
                << fmt_double(o.delta_choice) << "," << fmt_double(o.delta_question)
                << "," << (o.choice_sensitive ? 1 : 0) << ","
                << attribution_name(attribute(o));
        }
        out << "\n";
    }
    return out.str();
}

inline std::string components_to_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "instance_id,choice_index,component,is_adversarial\n";
    for (const ComponentRecord& c : r.components)
        out << detail::csv_escape(c.instance_id) << "," << c.choice_index << ","
            << detail::fmt_double(c.component) << "," << (c.is_adversarial ? 1 : 0)
            << "\n";
    return out.str();
}

inline std::string serialize_report(const EvalReport& r, const std::string& format) {
    if (format == "json") return report_to_json(r).dump(2) + "\n";
    if (format == "csv") return report_to_csv(r);
    throw Error(Errc::ConfigError, "unknown report format '" + format + "'");
}

inline void save_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path);
    out << content;
    if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline EvalReport load_report(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, path + ": " + e.what());
    }
    try {
        return report_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaMismatch, path + ": " + e.what());
    }
}

} // namespace qshift
