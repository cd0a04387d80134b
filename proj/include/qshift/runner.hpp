#pragma once
// End-to-end runs: load data, render both context variants, score every
// continuation, compute all requested metrics, aggregate and serialize.
//
// Scoring work parallelizes per instance under a bounded worker count; every
// reduction is order-independent, so reports are byte-identical no matter how
// work interleaves. A run-wide cache deduplicates (context, continuation)
// pairs — the two arms of an adversarial run share every untouched pair.
//
// An AlignmentError skips the affected instance and is counted in the report.
// Any other backend failure stops the run: results for instances before the
// failure are aggregated and flushed with partial=true.

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "qshift/adversarial.hpp"
#include "qshift/backends.hpp"
#include "qshift/core.hpp"
#include "qshift/datasets.hpp"
#include "qshift/formats.hpp"
#include "qshift/report.hpp"
#include "qshift/scoring.hpp"
#include "qshift/templates.hpp"
#include "qshift/wire.hpp"

namespace qshift {

struct RunPlan {
    EvalConfig config;
    std::string data_path;        // canonical JSONL to evaluate
    std::string demo_pool_path;   // canonical JSONL; required when shots > 0
    std::string out_path;         // report JSON
    std::string csv_path;         // optional CSV report
    std::string components_path;  // optional components CSV
    std::string templates_path;   // optional override of the embedded templates
    int parallel = 1;
    bool drop_question = false;   // diagnostic: blank every target question
};

inline std::unique_ptr<Scorer> make_scorer(const ScorerDescriptor& desc) {
    switch (desc.kind) {
        case ScorerKind::Fixture:
            return std::make_unique<FixtureScorer>(FixtureScorer::from_file(desc.target));
        case ScorerKind::Ngram:
            return desc.target.empty() ? std::make_unique<NgramScorer>()
                                       : std::make_unique<NgramScorer>(desc.target);
        case ScorerKind::Wire:
            return std::make_unique<WireScorer>(desc);
    }
    throw Error(Errc::ConfigError, "bad scorer kind");
}

struct EvalOutcome {
    std::vector<InstanceResult> results;     // instance order of the input
    std::vector<ComponentRecord> components;
    int alignment_errors = 0;
    std::optional<std::string> error;        // first fatal backend failure
};

namespace detail {

struct InstanceEval {
    std::optional<InstanceResult> result; // empty when skipped on alignment
    std::vector<ComponentRecord> components;
    bool alignment_skipped = false;
};

inline InstanceEval evaluate_one(const MCQAInstance& inst, const EvalConfig& config,
                                 const DemoSet& demos, const Scorer& scorer,
                                 const TemplateSet& templates, bool drop_question,
                                 int adversarial_slot) {
    const MCQAInstance* target = &inst;
    MCQAInstance blanked;
    if (drop_question) {
        blanked = inst;
        blanked.question.clear();
        target = &blanked;
    }

    RenderedQuery rq = render(*target, config.format, demos,
                              config.instruction_enabled, templates);

    ChoiceScores cs;
    cs.instance_id = inst.id;
    cs.answer_index = inst.answer_index;
    InstanceEval ev;
    try {
        for (const std::string& cont : rq.continuations) {
            TokenScores full = scorer.score(rq.context_with_q, cont);
            TokenScores base = scorer.score(rq.context_without_q, cont);
            cs.choices.push_back(ChoiceScore{full.total_logprob, full.token_count,
                                             base.total_logprob, base.token_count});
        }
    } catch (const Error& e) {
        if (e.code() == Errc::AlignmentError) {
            ev.alignment_skipped = true;
            return ev;
        }
        throw;
    }

    ev.result = evaluate_instance_scores(cs, config.metrics);
    for (int i = 0; i < static_cast<int>(cs.choices.size()); ++i)
        ev.components.push_back(ComponentRecord{
            inst.id, i, cs.choices[i].logprob_choice_only, i == adversarial_slot});
    return ev;
}

} // namespace detail

// `adversarial_slots`, when given, marks instances[i]'s substituted choice so
// its component record carries the flag; pass -1 for untouched instances.
inline EvalOutcome evaluate_instances(const std::vector<MCQAInstance>& instances,
                                      const EvalConfig& config, const DemoSet& demos,
                                      const Scorer& scorer,
                                      const TemplateSet& templates, int parallel,
                                      bool drop_question = false,
                                      const std::vector<int>* adversarial_slots = nullptr) {
    if (config.metrics.empty())
        throw Error(Errc::ConfigError, "no metrics configured");
    const std::size_t n = instances.size();
    std::vector<detail::InstanceEval> evals(n);
    std::vector<std::optional<std::string>> failures(n);

    auto work = [&](std::size_t i) {
        int slot = adversarial_slots ? (*adversarial_slots)[i] : -1;
        try {
            evals[i] = detail::evaluate_one(instances[i], config, demos, scorer,
                                            templates, drop_question, slot);
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    };

    const int workers =
        std::max(1, std::min<int>(parallel, static_cast<int>(n == 0 ? 1 : n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            work(i);
            if (failures[i]) break; // later instances stay unevaluated
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    work(i);
            });
        for (std::thread& t : pool) t.join();
    }

    // Deterministic partial semantics: keep everything before the first
    // failure, regardless of completion order.
    std::size_t limit = n;
    EvalOutcome out;
    for (std::size_t i = 0; i < n; ++i) {
        if (failures[i]) {
            limit = i;
            out.error = failures[i];
            break;
        }
    }
    for (std::size_t i = 0; i < limit; ++i) {
        detail::InstanceEval& ev = evals[i];
        if (ev.alignment_skipped) {
            ++out.alignment_errors;
            continue;
        }
        if (!ev.result) continue; // unevaluated tail of a serial partial run
        out.results.push_back(std::move(*ev.result));
        for (ComponentRecord& c : ev.components) out.components.push_back(std::move(c));
    }
    return out;
}

namespace detail {

inline TemplateSet resolve_templates(const RunPlan& plan) {
    return plan.templates_path.empty() ? TemplateSet::embedded()
                                       : TemplateSet::load(plan.templates_path);
}

inline DemoSet resolve_demos(const RunPlan& plan) {
    if (plan.config.shots == 0) return DemoSet{{}, plan.config.demo_seed, 0};
    if (plan.demo_pool_path.empty())
        throw Error(Errc::ConfigError, "shots > 0 requires a demo pool");
    std::vector<MCQAInstance> pool = load_canonical(plan.demo_pool_path);
    return assemble_demos(pool, plan.config.shots, plan.config.demo_seed);
}

// Skeleton for runs that failed before producing any result.
inline EvalReport empty_partial_report(const EvalConfig& config,
                                       const std::string& template_version,
                                       const std::string& error, int alignment_errors) {
    EvalReport rep;
    rep.config = config;
    rep.template_version = template_version;
    rep.partial = true;
    rep.error = error;
    rep.alignment_errors = alignment_errors;
    return rep;
}

inline EvalReport finish_report(const EvalOutcome& outcome, const EvalConfig& config,
                                const std::string& template_version) {
    EvalReport rep =
        outcome.results.empty()
            ? empty_partial_report(config, template_version,
                                   outcome.error.value_or("no instances evaluated"),
                                   outcome.alignment_errors)
            : aggregate(outcome.results, config, template_version,
                        outcome.components, outcome.alignment_errors);
    if (outcome.error) {
        rep.partial = true;
        rep.error = *outcome.error;
    }
    return rep;
}

inline void write_outputs(const EvalReport& rep, const RunPlan& plan) {
    if (!plan.out_path.empty())
        save_text(plan.out_path, serialize_report(rep, "json"));
    if (!plan.csv_path.empty())
        save_text(plan.csv_path, serialize_report(rep, "csv"));
    if (!plan.components_path.empty())
        save_text(plan.components_path, components_to_csv(rep));
}

} // namespace detail

inline EvalReport run_evaluate(const RunPlan& plan) {
    TemplateSet templates = detail::resolve_templates(plan);
    std::vector<MCQAInstance> instances = load_canonical(plan.data_path);
    DemoSet demos = detail::resolve_demos(plan);
    std::unique_ptr<Scorer> scorer = make_scorer(plan.config.backend);
    CachingScorer cached(*scorer);

    EvalOutcome outcome =
        evaluate_instances(instances, plan.config, demos, cached, templates,
                           plan.parallel, plan.drop_question);
    EvalReport rep = detail::finish_report(outcome, plan.config, templates.version());
    detail::write_outputs(rep, plan);
    return rep;
}

// Baseline and substituted arm on identical instances, demos and seeds. The
// report body describes the baseline arm; the adversarial block carries flip
// rates and accuracy deltas, and the component dump comes from the modified
// arm so original and adversarial choices can be compared.
inline EvalReport run_adversarial(const RunPlan& plan) {
    if (!plan.config.adversarial)
        throw Error(Errc::ConfigError, "adversarial run without adversarial config");
    const AdversarialConfig& adv = *plan.config.adversarial;

    TemplateSet templates = detail::resolve_templates(plan);
    std::vector<MCQAInstance> instances = load_canonical(plan.data_path);
    DemoSet demos = detail::resolve_demos(plan);
    std::unique_ptr<Scorer> scorer = make_scorer(plan.config.backend);
    CachingScorer cached(*scorer);

    std::vector<MCQAInstance> modified;
    std::vector<SubstitutionRecord> records;
    std::vector<int> slots;
    modified.reserve(instances.size());
    for (const MCQAInstance& inst : instances) {
        auto [mod, rec] = substitute(inst, adv.kind, adv.slot_policy, adv.seed);
        slots.push_back(rec.slot);
        modified.push_back(std::move(mod));
        records.push_back(std::move(rec));
    }

    EvalOutcome base_outcome =
        evaluate_instances(instances, plan.config, demos, cached, templates,
                           plan.parallel, plan.drop_question);
    if (base_outcome.error) {
        EvalReport rep =
            detail::finish_report(base_outcome, plan.config, templates.version());
        detail::write_outputs(rep, plan);
        return rep;
    }
    EvalOutcome adv_outcome =
        evaluate_instances(modified, plan.config, demos, cached, templates,
                           plan.parallel, plan.drop_question, &slots);

    EvalOutcome merged;
    merged.results = base_outcome.results;
    merged.components = adv_outcome.components; // adversarial-arm dump
    merged.alignment_errors =
        base_outcome.alignment_errors + adv_outcome.alignment_errors;
    merged.error = adv_outcome.error;
    EvalReport rep = detail::finish_report(merged, plan.config, templates.version());

    if (!rep.partial && !base_outcome.results.empty()) {
        // Rates compare only ids evaluated in both arms (either arm may have
        // skipped instances on alignment errors).
        std::unordered_set<std::string> base_ids, adv_ids;
        for (const InstanceResult& b : base_outcome.results) base_ids.insert(b.id);
        for (const InstanceResult& a : adv_outcome.results) adv_ids.insert(a.id);
        std::vector<InstanceResult> base_kept, adv_kept;
        for (const InstanceResult& b : base_outcome.results)
            if (adv_ids.count(b.id)) base_kept.push_back(b);
        for (const InstanceResult& a : adv_outcome.results)
            if (base_ids.count(a.id)) adv_kept.push_back(a);
        std::vector<SubstitutionRecord> kept;
        for (const SubstitutionRecord& rec : records)
            if (adv_ids.count(rec.instance_id) && base_ids.count(rec.instance_id))
                kept.push_back(rec);
        if (!base_kept.empty())
            attach_adversarial(rep, base_kept, adv_kept, kept, adv.kind);
    }
    detail::write_outputs(rep, plan);
    return rep;
}

// --- correlation across reports ---------------------------------------------------

struct CorrelationRow {
    std::string format;
    MetricKind metric = MetricKind::Acc;
    int n = 0;
    double r = 0.0;
};

// Pearson r between accuracy and choice sensitivity across reports, grouped
// by (format, metric). Needs at least two reports per group.
inline std::vector<CorrelationRow> correlate_reports(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2)
        throw Error(Errc::ConfigError, "correlate needs at least 2 reports");
    std::map<std::pair<std::string, MetricKind>, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (const EvalReport& rep : reports)
        for (const auto& [m, s] : rep.metrics) {
            auto& [xs, ys] = groups[{format_name(rep.config.format), m}];
            xs.push_back(s.accuracy);
            ys.push_back(s.choice_sensitivity);
        }
    std::vector<CorrelationRow> rows;
    bool any = false;
    for (const auto& [key, data] : groups) {
        if (data.first.size() < 2) continue;
        any = true;
        rows.push_back(CorrelationRow{key.first, key.second,
                                      static_cast<int>(data.first.size()),
                                      pearson(data.first, data.second)});
    }
    if (!any)
        throw Error(Errc::ConfigError, "no metric is shared by 2 or more reports");
    return rows;
}

inline std::vector<CorrelationRow> run_correlate(const std::vector<std::string>& report_paths) {
    std::vector<EvalReport> reports;
    reports.reserve(report_paths.size());
    for (const std::string& p : report_paths) reports.push_back(load_report(p));
    return correlate_reports(reports);
}

// --- prompt inspection --------------------------------------------------------------

struct RenderDump {
    RenderedQuery query;
    const MCQAInstance* instance = nullptr; // borrowed from the loaded list
};

inline RenderedQuery run_render(const RunPlan& plan, const std::string& instance_id) {
    TemplateSet templates = detail::resolve_templates(plan);
    std::vector<MCQAInstance> instances = load_canonical(plan.data_path);
    DemoSet demos = detail::resolve_demos(plan);
    for (const MCQAInstance& inst : instances)
        if (inst.id == instance_id)
            return render(inst, plan.config.format, demos,
                          plan.config.instruction_enabled, templates);
    throw Error(Errc::UnknownInstance,
                "no instance '" + instance_id + "' in " + plan.data_path);
}

} // namespace qshift
