#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "qshift/qshift.hpp"

using namespace qshift;
namespace fs = std::filesystem;

namespace {

const std::string kSamples = std::string(QSHIFT_REPO_DIR) + "/samples";

std::vector<MCQAInstance> synthetic_instances(int n, int choices = 4) {
    std::vector<MCQAInstance> out;
    for (int k = 0; k < n; ++k) {
        MCQAInstance inst;
        inst.id = "syn-" + std::to_string(k);
        inst.question = "what is item " + std::to_string(k) + "?";
        for (int i = 0; i < choices; ++i)
            inst.choices.push_back("thing " + std::to_string(k) + "-" +
                                   std::to_string(i));
        inst.answer_index = k % choices;
        inst.source = {"synthetic", "test"};
        out.push_back(std::move(inst));
    }
    return out;
}

// Fixture with seeded logprobs for every (context, continuation) pair the
// pipeline will request; `question_blind` pins the with-question score to the
// question-dropped one.
FixtureScorer fixture_for(const std::vector<MCQAInstance>& instances,
                          FormatKind format, bool question_blind,
                          std::uint64_t seed = 41) {
    FixtureScorer fx;
    Lcg64 rng(seed);
    for (const MCQAInstance& inst : instances) {
        RenderedQuery rq = render(inst, format, DemoSet{}, true);
        for (const std::string& cont : rq.continuations) {
            double base = -0.5 - 8.0 * rng.next_unit();
            double full = question_blind ? base : -0.5 - 8.0 * rng.next_unit();
            fx.add(rq.context_without_q, cont, {base / 2.0, base / 2.0});
            fx.add(rq.context_with_q, cont, {full / 2.0, full / 2.0});
        }
    }
    return fx;
}

EvalConfig ngram_config(FormatKind format) {
    EvalConfig c;
    c.format = format;
    c.backend.kind = ScorerKind::Ngram;
    return c;
}

} // namespace

TEST_CASE("evaluate_instances produces a result per instance with all metrics") {
    auto instances = synthetic_instances(10);
    FixtureScorer fx = fixture_for(instances, FormatKind::Symbols, false);
    EvalConfig config = ngram_config(FormatKind::Symbols);
    config.backend.kind = ScorerKind::Fixture;

    EvalOutcome out = evaluate_instances(instances, config, DemoSet{}, fx,
                                         TemplateSet::embedded(), 1);
    REQUIRE_FALSE(out.error.has_value());
    REQUIRE(out.results.size() == 10);
    for (const InstanceResult& r : out.results) {
        CHECK(r.metrics.size() == 3);
        for (const auto& [m, o] : r.metrics)
            CHECK(o.predicted >= 0);
    }
    // one component record per (instance, choice)
    CHECK(out.components.size() == 40);

    EvalReport rep = aggregate(out.results, config, "1", out.components);
    CHECK(rep.instances.size() == 10);
    CHECK(rep.metrics.size() == 3);
}

TEST_CASE("question-blind fixture: npsq scores collapse to zero") {
    auto instances = synthetic_instances(6);
    FixtureScorer fx = fixture_for(instances, FormatKind::Cloze, true);
    EvalConfig config = ngram_config(FormatKind::Cloze);
    config.backend.kind = ScorerKind::Fixture;

    EvalOutcome out = evaluate_instances(instances, config, DemoSet{}, fx,
                                         TemplateSet::embedded(), 1);
    REQUIRE(out.results.size() == 6);
    for (const InstanceResult& r : out.results) {
        // all npsq values zero -> tie-break predicts index 0
        CHECK(outcome_for(r, MetricKind::AccNpsq).predicted == 0);
        CHECK(outcome_for(r, MetricKind::AccNpsq).delta_question == 0.0);
        // under acc, every decision is choice-driven
        CHECK(outcome_for(r, MetricKind::Acc).choice_sensitive);
    }
    CHECK(choice_sensitivity(out.results, MetricKind::Acc) == 1.0);
    CHECK(choice_sensitivity(out.results, MetricKind::AccNpsq) == 0.0);
}

TEST_CASE("parallel evaluation matches serial byte for byte") {
    auto instances = synthetic_instances(24);
    EvalConfig config = ngram_config(FormatKind::Hybrid);
    NgramScorer scorer;

    EvalOutcome serial = evaluate_instances(instances, config, DemoSet{}, scorer,
                                            TemplateSet::embedded(), 1);
    EvalOutcome parallel = evaluate_instances(instances, config, DemoSet{}, scorer,
                                              TemplateSet::embedded(), 8);
    EvalReport a = aggregate(serial.results, config, "1", serial.components);
    EvalReport b = aggregate(parallel.results, config, "1", parallel.components);
    CHECK(serialize_report(a, "json") == serialize_report(b, "json"));
}

TEST_CASE("missing fixture entries flush a deterministic partial prefix") {
    auto instances = synthetic_instances(8);
    FixtureScorer fx;
    Lcg64 rng(7);
    for (int k = 0; k < 8; ++k) {
        if (k == 5) continue; // leave instance 5 unscoreable
        RenderedQuery rq = render(instances[k], FormatKind::Cloze, DemoSet{}, true);
        for (const std::string& cont : rq.continuations) {
            fx.add(rq.context_with_q, cont, {-1.0 - rng.next_unit()});
            fx.add(rq.context_without_q, cont, {-1.0 - rng.next_unit()});
        }
    }
    EvalConfig config = ngram_config(FormatKind::Cloze);
    config.backend.kind = ScorerKind::Fixture;

    for (int workers : {1, 4}) {
        EvalOutcome out = evaluate_instances(instances, config, DemoSet{}, fx,
                                             TemplateSet::embedded(), workers);
        REQUIRE(out.error.has_value());
        CHECK(out.error->find("MissingFixtureEntry") != std::string::npos);
        CHECK(out.results.size() == 5); // instances 0..4 precede the failure
    }
}

TEST_CASE("run_evaluate writes byte-identical reports across runs") {
    fs::path dir = fs::temp_directory_path() / "qshift_runner_test";
    fs::create_directories(dir);

    RunPlan plan;
    plan.config = ngram_config(FormatKind::Symbols);
    plan.config.shots = 3;
    plan.data_path = kSamples + "/arc_sample.jsonl";
    plan.demo_pool_path = kSamples + "/arc_demo_pool.jsonl";
    plan.out_path = (dir / "r1.json").string();
    plan.csv_path = (dir / "r1.csv").string();
    plan.components_path = (dir / "c1.csv").string();

    EvalReport r1 = run_evaluate(plan);
    CHECK_FALSE(r1.partial);
    CHECK(r1.instances.size() == 5);

    RunPlan plan2 = plan;
    plan2.out_path = (dir / "r2.json").string();
    plan2.csv_path = (dir / "r2.csv").string();
    plan2.components_path = (dir / "c2.csv").string();
    run_evaluate(plan2);

    CHECK(read_text(plan.out_path) == read_text(plan2.out_path));
    CHECK(read_text(plan.csv_path) == read_text(plan2.csv_path));
    CHECK(read_text(plan.components_path) == read_text(plan2.components_path));
    fs::remove_all(dir);
}

TEST_CASE("drop-question runs make every npsq exactly zero") {
    RunPlan plan;
    plan.config = ngram_config(FormatKind::Cloze);
    plan.data_path = kSamples + "/arc_sample.jsonl";
    plan.drop_question = true;

    EvalReport rep = run_evaluate(plan);
    for (const InstanceResult& r : rep.instances) {
        const MetricOutcome& o = outcome_for(r, MetricKind::AccNpsq);
        CHECK(o.predicted == 0);
        CHECK(o.delta_question == 0.0);
        CHECK(o.delta_choice == 0.0);
    }
    CHECK(rep.metrics.at(MetricKind::AccNpsq).choice_sensitivity == 0.0);
}

TEST_CASE("adversarial baseline arm equals a plain evaluate run") {
    RunPlan plan;
    plan.config = ngram_config(FormatKind::Cloze);
    plan.data_path = kSamples + "/arc_sample.jsonl";

    EvalReport plain = run_evaluate(plan);

    RunPlan adv_plan = plan;
    adv_plan.config.adversarial =
        AdversarialConfig{AdversarialKind::Simple, SlotPolicy{}, 1234};
    EvalReport adv = run_adversarial(adv_plan);

    REQUIRE(adv.adversarial.has_value());
    CHECK(adv.adversarial->substitutions.size() == plain.instances.size());
    // baseline-arm numbers match the plain run exactly
    for (const auto& [m, s] : plain.metrics) {
        CHECK(adv.metrics.at(m).accuracy == s.accuracy);
        CHECK(adv.metrics.at(m).choice_sensitivity == s.choice_sensitivity);
        CHECK(adv.adversarial->metrics.at(m).baseline_accuracy == s.accuracy);
    }
    // substitutions never touch the gold slot
    for (const SubstitutionRecord& rec : adv.adversarial->substitutions) {
        for (const InstanceResult& r : adv.instances)
            if (r.id == rec.instance_id) CHECK(rec.slot != r.answer_index);
        CHECK(rec.adversarial_text == "Hello, everyone.");
    }
    // adversarial components flag exactly one choice per instance
    int flagged = 0;
    for (const ComponentRecord& c : adv.components) flagged += c.is_adversarial;
    CHECK(flagged == static_cast<int>(adv.adversarial->substitutions.size()));
}

TEST_CASE("adversarial arms share untouched pairs through the cache") {
    auto instances = synthetic_instances(5);
    EvalConfig config = ngram_config(FormatKind::Cloze);
    NgramScorer inner;
    CachingScorer cached(inner);

    EvalOutcome base = evaluate_instances(instances, config, DemoSet{}, cached,
                                          TemplateSet::embedded(), 1);
    std::size_t misses_after_base = cached.misses();
    std::vector<MCQAInstance> modified;
    std::vector<int> slots;
    for (const MCQAInstance& inst : instances) {
        auto [mod, rec] = substitute(inst, AdversarialKind::Simple, SlotPolicy{}, 1);
        modified.push_back(mod);
        slots.push_back(rec.slot);
    }
    evaluate_instances(modified, config, DemoSet{}, cached, TemplateSet::embedded(), 1,
                       false, &slots);
    // cloze: only the substituted continuation is new. Each instance adds one
    // with-question pair; the question-dropped scaffold is shared by every
    // instance, so the substituted text adds a single pair there.
    CHECK(cached.misses() == misses_after_base + instances.size() + 1);
    CHECK(base.results.size() == 5);
}

TEST_CASE("run_render dumps the exact prompt pair") {
    RunPlan plan;
    plan.config = ngram_config(FormatKind::Symbols);
    plan.data_path = kSamples + "/arc_sample.jsonl";

    RenderedQuery rq = run_render(plan, "arc-table4");
    CHECK(rq.context_with_q.rfind("The best answer is") ==
          rq.context_with_q.size() - std::string("The best answer is").size());
    CHECK(rq.context_without_q.find("Question: \n") != std::string::npos);
    CHECK(rq.continuations[2] == " C");

    CHECK_THROWS_MATCHES(run_render(plan, "no-such-id"), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::UnknownInstance;
                         }));
}

TEST_CASE("correlate recovers pinned correlations across reports") {
    fs::path dir = fs::temp_directory_path() / "qshift_correlate_test";
    fs::create_directories(dir);

    // craft reports with accuracy/sensitivity pairs on a perfect inverse line
    std::vector<std::pair<double, double>> points = {{0.6, 0.5}, {0.7, 0.4}, {0.8, 0.3}};
    std::vector<std::string> paths;
    int file_idx = 0;
    for (auto [acc_target, sens_target] : points) {
        std::vector<InstanceResult> rs;
        for (int i = 0; i < 10; ++i) {
            InstanceResult r;
            r.id = "i" + std::to_string(i);
            MetricOutcome o;
            o.correct = i < static_cast<int>(acc_target * 10 + 0.5);
            o.choice_sensitive = i < static_cast<int>(sens_target * 10 + 0.5);
            r.metrics[MetricKind::Acc] = o;
            rs.push_back(r);
        }
        EvalConfig cfg;
        cfg.format = FormatKind::Cloze;
        cfg.metrics = {MetricKind::Acc};
        EvalReport rep = aggregate(rs, cfg, "1");
        std::string p = (dir / ("rep" + std::to_string(file_idx++) + ".json")).string();
        save_text(p, serialize_report(rep, "json"));
        paths.push_back(p);
    }

    auto rows = run_correlate(paths);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].format == "cloze");
    CHECK(rows[0].metric == MetricKind::Acc);
    CHECK(rows[0].n == 3);
    CHECK(rows[0].r == Catch::Approx(-1.0).margin(1e-9));

    CHECK_THROWS_AS(run_correlate({paths[0]}), Error);

    SECTION("four reports on the hand-computed 0.8 line") {
        // accuracy 0.1,0.2,0.3,0.4 against sensitivity 0.1,0.3,0.2,0.4:
        // same correlation as the integer series (1,2,3,4) vs (1,3,2,4)
        std::vector<std::pair<double, double>> pts = {
            {0.1, 0.1}, {0.2, 0.3}, {0.3, 0.2}, {0.4, 0.4}};
        std::vector<std::string> ps;
        int idx = 0;
        for (auto [acc_target, sens_target] : pts) {
            std::vector<InstanceResult> rs;
            for (int i = 0; i < 10; ++i) {
                InstanceResult r;
                r.id = "i" + std::to_string(i);
                MetricOutcome o;
                o.correct = i < static_cast<int>(acc_target * 10 + 0.5);
                o.choice_sensitive = i < static_cast<int>(sens_target * 10 + 0.5);
                r.metrics[MetricKind::Acc] = o;
                rs.push_back(r);
            }
            EvalConfig cfg;
            cfg.format = FormatKind::Symbols;
            cfg.metrics = {MetricKind::Acc};
            std::string p = (dir / ("q" + std::to_string(idx++) + ".json")).string();
            save_text(p, serialize_report(aggregate(rs, cfg, "1"), "json"));
            ps.push_back(p);
        }
        auto r2 = run_correlate(ps);
        REQUIRE(r2.size() == 1);
        CHECK(r2[0].n == 4);
        CHECK(r2[0].r == Catch::Approx(0.8).margin(1e-9));
    }
    fs::remove_all(dir);
}

TEST_CASE("backend failure flushes a partial report file") {
    fs::path dir = fs::temp_directory_path() / "qshift_partial_test";
    fs::create_directories(dir);

    // fixture covering only the first instance of the sample set
    auto instances = load_canonical(kSamples + "/arc_sample.jsonl");
    FixtureScorer fx;
    RenderedQuery rq = render(instances[0], FormatKind::Cloze, DemoSet{}, true);
    fs::path fixture_path = dir / "partial_fixture.jsonl";
    {
        std::ofstream out(fixture_path);
        Lcg64 rng(3);
        for (const std::string& cont : rq.continuations) {
            for (const std::string* ctx : {&rq.context_with_q, &rq.context_without_q}) {
                nlohmann::json j = {{"context", *ctx},
                                    {"continuation", cont},
                                    {"token_logprobs", {-1.0 - rng.next_unit()}}};
                out << j << "\n";
            }
        }
    }

    RunPlan plan;
    plan.config = ngram_config(FormatKind::Cloze);
    plan.config.backend.kind = ScorerKind::Fixture;
    plan.config.backend.target = fixture_path.string();
    plan.data_path = kSamples + "/arc_sample.jsonl";
    plan.out_path = (dir / "partial.json").string();

    EvalReport rep = run_evaluate(plan);
    CHECK(rep.partial);
    CHECK(rep.error.find("MissingFixtureEntry") != std::string::npos);
    CHECK(rep.instances.size() == 1);

    // the flushed file is machine-readable and carries the flag
    nlohmann::json j = nlohmann::json::parse(read_text(plan.out_path));
    CHECK(j.at("partial").get<bool>());
    CHECK_FALSE(j.at("error").get<std::string>().empty());
    fs::remove_all(dir);
}

TEST_CASE("run_evaluate surfaces config errors") {
    RunPlan plan;
    plan.config = ngram_config(FormatKind::Cloze);
    plan.config.shots = 3; // no demo pool provided
    plan.data_path = kSamples + "/arc_sample.jsonl";
    CHECK_THROWS_MATCHES(run_evaluate(plan), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::ConfigError;
                         }));

    RunPlan no_adv;
    no_adv.config = ngram_config(FormatKind::Cloze);
    no_adv.data_path = kSamples + "/arc_sample.jsonl";
    CHECK_THROWS_MATCHES(run_adversarial(no_adv), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::ConfigError;
                         }));
}

TEST_CASE("metric subsetting flows through to the report") {
    RunPlan plan;
    plan.config = ngram_config(FormatKind::Cloze);
    plan.config.metrics = {MetricKind::AccNorm};
    plan.data_path = kSamples + "/arc_sample.jsonl";

    EvalReport rep = run_evaluate(plan);
    CHECK(rep.metrics.size() == 1);
    CHECK(rep.metrics.count(MetricKind::AccNorm) == 1);
    for (const InstanceResult& r : rep.instances) {
        CHECK(r.metrics.size() == 1);
        CHECK(r.metrics.count(MetricKind::AccNorm) == 1);
    }
}
