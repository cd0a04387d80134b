// Command-line front end.
//
//   qshift evaluate    --data eval.jsonl --backend ngram --out report.json
//   qshift adversarial --data eval.jsonl --adversarial simple --out report.json
//   qshift correlate   report1.json report2.json ...
//   qshift render      --data eval.jsonl --id some-id --format symbols
//   qshift adapt       --schema arc --in raw.jsonl --out canonical.jsonl
//
// Exit codes: 0 ok, 1 configuration error, 2 backend failure, 3 data error.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qshift/qshift.hpp"

namespace {

using namespace qshift;

int exit_code_for(Errc c) {
    switch (c) {
        case Errc::BackendUnavailable:
        case Errc::AlignmentError:
        case Errc::MissingFixtureEntry:
            return 2;
        case Errc::ParseError:
        case Errc::DuplicateId:
        case Errc::ValidationError:
        case Errc::SchemaMismatch:
        case Errc::IoError:
        case Errc::UnknownInstance:
        case Errc::EmptyField:
        case Errc::AnswerIndexOutOfRange:
        case Errc::TooFewChoices:
            return 3;
        default:
            return 1;
    }
}

ScorerDescriptor parse_backend(const std::string& selector, const std::string& model,
                               int timeout_ms, int retries) {
    ScorerDescriptor d;
    d.model = model;
    d.timeout_ms = timeout_ms;
    d.max_retries = retries;
    auto colon = selector.find(':');
    const std::string kind =
        colon == std::string::npos ? selector : selector.substr(0, colon);
    const std::string rest =
        colon == std::string::npos ? "" : selector.substr(colon + 1);
    if (kind == "ngram") {
        d.kind = ScorerKind::Ngram;
        d.target = rest;
    } else if (kind == "fixture") {
        if (rest.empty())
            throw Error(Errc::ConfigError, "fixture backend needs a path: fixture:<path>");
        d.kind = ScorerKind::Fixture;
        d.target = rest;
    } else if (kind == "wire") {
        if (rest.empty())
            throw Error(Errc::ConfigError, "wire backend needs a URL: wire:<base-url>");
        d.kind = ScorerKind::Wire;
        d.target = rest;
    } else {
        throw Error(Errc::ConfigError, "unknown backend '" + selector + "'");
    }
    return d;
}

std::vector<MetricKind> parse_metrics(const std::string& csv) {
    std::vector<MetricKind> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        MetricKind m = parse_metric(item);
        bool seen = false;
        for (MetricKind e : out) seen = seen || e == m;
        if (!seen) out.push_back(m);
    }
    if (out.empty()) throw Error(Errc::ConfigError, "no metrics requested");
    return out;
}

struct CommonFlags {
    std::string data;
    std::string demo_pool;
    std::string format = "cloze";
    std::string metrics = "acc,acc_norm,acc_npsq";
    int shots = 0;
    std::uint64_t demo_seed = 1234;
    bool no_instruction = false;
    std::string backend = "ngram";
    std::string model;
    int timeout_ms = 30000;
    int retries = 2;
    std::string out;
    std::string csv;
    std::string components;
    std::string templates;
    int parallel = 1;
    bool drop_question = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool needs_out) {
    cmd->add_option("--data", f.data, "canonical JSONL to evaluate")->required();
    cmd->add_option("--demo-pool", f.demo_pool, "canonical JSONL demo pool (few-shot)");
    cmd->add_option("--format", f.format, "cloze|symbols|hybrid");
    cmd->add_option("--metrics", f.metrics, "comma list of acc,acc_norm,acc_npsq");
    cmd->add_option("--shots", f.shots, "number of demonstrations");
    cmd->add_option("--demo-seed", f.demo_seed, "demonstration sampling seed");
    cmd->add_flag("--no-instruction", f.no_instruction,
                  "drop the task instruction sentence");
    cmd->add_option("--backend", f.backend,
                    "ngram[:corpus] | fixture:<path> | wire:<base-url>");
    cmd->add_option("--model", f.model, "model name sent to a wire backend");
    cmd->add_option("--timeout-ms", f.timeout_ms, "wire request timeout");
    cmd->add_option("--retries", f.retries, "wire retry budget");
    auto* out = cmd->add_option("--out", f.out, "report JSON path");
    if (needs_out) out->required();
    cmd->add_option("--csv", f.csv, "also write a CSV report");
    cmd->add_option("--components", f.components,
                    "write the choice-driven component dump CSV");
    cmd->add_option("--templates", f.templates, "prompt template file override");
    cmd->add_option("--parallel", f.parallel, "instance-level worker count");
    cmd->add_flag("--drop-question", f.drop_question,
                  "diagnostic: blank every target question before rendering");
}

RunPlan plan_from_flags(const CommonFlags& f) {
    RunPlan plan;
    plan.config.format = parse_format(f.format);
    plan.config.metrics = parse_metrics(f.metrics);
    plan.config.shots = f.shots;
    plan.config.demo_seed = f.demo_seed;
    plan.config.instruction_enabled = !f.no_instruction;
    plan.config.backend = parse_backend(f.backend, f.model, f.timeout_ms, f.retries);
    plan.data_path = f.data;
    plan.demo_pool_path = f.demo_pool;
    plan.out_path = f.out;
    plan.csv_path = f.csv;
    plan.components_path = f.components;
    plan.templates_path = f.templates;
    plan.parallel = f.parallel;
    plan.drop_question = f.drop_question;
    return plan;
}

void print_summary(const EvalReport& rep) {
    std::printf("instances: %zu  alignment_errors: %d%s\n", rep.instances.size(),
                rep.alignment_errors, rep.partial ? "  [PARTIAL]" : "");
    for (const auto& [m, s] : rep.metrics)
        std::printf("%-9s accuracy %.4f  choice_sensitivity %.4f\n", metric_name(m),
                    s.accuracy, s.choice_sensitivity);
    if (rep.adversarial) {
        for (const auto& [m, s] : rep.adversarial->metrics)
            std::printf("%-9s flip_rate %.4f  raw_change %.4f  acc_delta %+.2f pts\n",
                        metric_name(m), s.flip_to_adversarial_rate,
                        s.raw_prediction_change_rate, s.accuracy_delta_points);
    }
}

int cmd_evaluate(const CommonFlags& f) {
    EvalReport rep = run_evaluate(plan_from_flags(f));
    print_summary(rep);
    if (rep.partial) {
        std::fprintf(stderr, "error: run incomplete: %s\n", rep.error.c_str());
        return 2;
    }
    return 0;
}

int cmd_adversarial(const CommonFlags& f, const std::string& kind_name,
                    const std::string& slot_policy, std::uint64_t seed) {
    RunPlan plan = plan_from_flags(f);
    AdversarialConfig adv;
    adv.kind = parse_adversarial(kind_name);
    adv.slot_policy = detail::slot_policy_from_string(slot_policy);
    adv.seed = seed;
    plan.config.adversarial = adv;
    if (targeted_format(adv.kind) != plan.config.format)
        std::fprintf(stderr,
                     "warning: adversarial kind '%s' targets the %s format, run "
                     "uses %s\n",
                     adversarial_name(adv.kind),
                     format_name(targeted_format(adv.kind)),
                     format_name(plan.config.format));
    EvalReport rep = run_adversarial(plan);
    print_summary(rep);
    if (rep.partial) {
        std::fprintf(stderr, "error: run incomplete: %s\n", rep.error.c_str());
        return 2;
    }
    return 0;
}

int cmd_correlate(const std::vector<std::string>& paths, const std::string& out) {
    std::vector<CorrelationRow> rows = run_correlate(paths);
    std::printf("%-10s %-10s %4s %10s\n", "format", "metric", "n", "pearson_r");
    nlohmann::json j = nlohmann::json::array();
    for (const CorrelationRow& row : rows) {
        std::printf("%-10s %-10s %4d %10.4f\n", row.format.c_str(),
                    metric_name(row.metric), row.n, row.r);
        j.push_back({{"format", row.format},
                     {"metric", metric_name(row.metric)},
                     {"n", row.n},
                     {"pearson_r", row.r}});
    }
    if (!out.empty()) save_text(out, j.dump(2) + "\n");
    return 0;
}

int cmd_render(const CommonFlags& f, const std::string& id) {
    RenderedQuery rq = run_render(plan_from_flags(f), id);
    std::printf("=== context (with question) ===\n%s\n", rq.context_with_q.c_str());
    std::printf("=== context (question dropped) ===\n%s\n",
                rq.context_without_q.c_str());
    std::printf("=== continuations ===\n");
    for (std::size_t i = 0; i < rq.continuations.size(); ++i)
        std::printf("[%zu] \"%s\"\n", i, rq.continuations[i].c_str());
    return 0;
}

int cmd_adapt(const std::string& schema, const std::string& in,
              const std::string& out) {
    std::vector<MCQAInstance> instances = adapt_file(in, parse_schema(schema));
    write_canonical(instances, out);
    std::printf("%zu records -> %s\n", instances.size(), out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MCQA evaluation harness: score decomposition, choice "
                 "sensitivity, the npsq metric and adversarial-choice runs"};
    app.require_subcommand(1);

    CommonFlags eval_flags;
    CLI::App* evaluate = app.add_subcommand("evaluate", "run an evaluation");
    add_common_flags(evaluate, eval_flags, /*needs_out=*/true);

    CommonFlags adv_flags;
    std::string adv_kind;
    std::string slot_policy = "random";
    std::uint64_t adv_seed = 1234;
    CLI::App* adversarial =
        app.add_subcommand("adversarial", "baseline + substituted-distractor run");
    add_common_flags(adversarial, adv_flags, /*needs_out=*/true);
    adversarial
        ->add_option("--adversarial", adv_kind,
                     "simple|extended|instructional|neutral")
        ->required();
    adversarial->add_option("--slot-policy", slot_policy, "random | fixed:<index>");
    adversarial->add_option("--adv-seed", adv_seed, "slot selection seed");

    std::vector<std::string> report_paths;
    std::string correlate_out;
    CLI::App* correlate =
        app.add_subcommand("correlate", "accuracy vs sensitivity across reports");
    correlate->add_option("reports", report_paths, "report JSON files")
        ->required()
        ->expected(-2);
    correlate->add_option("--out", correlate_out, "write the table as JSON");

    CommonFlags render_flags;
    std::string render_id;
    CLI::App* render_cmd =
        app.add_subcommand("render", "print both prompt variants for one instance");
    add_common_flags(render_cmd, render_flags, /*needs_out=*/false);
    render_cmd->add_option("--id", render_id, "instance id")->required();

    std::string adapt_schema, adapt_in, adapt_out;
    CLI::App* adapt = app.add_subcommand("adapt", "convert a raw export to canonical JSONL");
    adapt->add_option("--schema", adapt_schema, "hellaswag|arc|mmlu")->required();
    adapt->add_option("--in", adapt_in, "raw export JSONL")->required();
    adapt->add_option("--out", adapt_out, "canonical JSONL output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*evaluate) return cmd_evaluate(eval_flags);
        if (*adversarial) return cmd_adversarial(adv_flags, adv_kind, slot_policy, adv_seed);
        if (*correlate) return cmd_correlate(report_paths, correlate_out);
        if (*render_cmd) return cmd_render(render_flags, render_id);
        if (*adapt) return cmd_adapt(adapt_schema, adapt_in, adapt_out);
    } catch (const qshift::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
