#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "qshift/formats.hpp"
#include "qshift/rng.hpp"

using namespace qshift;

namespace {

MCQAInstance arc_table4() {
    MCQAInstance inst;
    inst.id = "arc-table4";
    inst.question =
        "An astronomer observes that a planet rotates faster after a meteorite "
        "impact. Which is the most likely effect of this increase in rotation?";
    inst.choices = {"Planetary density will decrease.",
                    "Planetary years will become longer.",
                    "Planetary days will become shorter.",
                    "Planetary gravity will become stronger."};
    inst.answer_index = 2;
    inst.source = {"arc", "test"};
    return inst;
}

MCQAInstance synthetic(int k, int n_choices = 4) {
    MCQAInstance inst;
    inst.id = "syn-" + std::to_string(k);
    inst.question = "question number " + std::to_string(k) + "?";
    for (int i = 0; i < n_choices; ++i)
        inst.choices.push_back("choice " + std::to_string(k) + "-" + std::to_string(i));
    inst.answer_index = k % n_choices;
    inst.source = {"synthetic", "test"};
    return inst;
}

std::vector<MCQAInstance> demo_pool(int n) {
    std::vector<MCQAInstance> pool;
    for (int i = 0; i < n; ++i) pool.push_back(synthetic(100 + i));
    return pool;
}

// Verifies the question-drop locality invariant: with_q differs from
// without_q by exactly one contiguous deleted substring equal to `question`.
void check_drop_locality(const RenderedQuery& rq, const std::string& question) {
    const std::string& w = rq.context_with_q;
    const std::string& wo = rq.context_without_q;
    REQUIRE(w.size() == wo.size() + question.size());
    std::size_t p = 0;
    while (p < wo.size() && w[p] == wo[p]) ++p;
    std::size_t s = 0;
    while (s < wo.size() && w[w.size() - 1 - s] == wo[wo.size() - 1 - s]) ++s;
    // common prefix + common suffix must cover the whole without-q string
    REQUIRE(p + s >= wo.size());
    std::size_t cut = wo.size() - s; // deletion can only sit in [cut, p]
    CHECK(w.substr(cut, question.size()) == question);
}

} // namespace

TEST_CASE("symbols rendering matches the reference prompt byte for byte") {
    RenderedQuery rq = render(arc_table4(), FormatKind::Symbols, DemoSet{}, true);
    const std::string expected =
        "Given the following question and four candidate answers (A, B, C and D), "
        "select the best answer.\n"
        "Question: An astronomer observes that a planet rotates faster after a "
        "meteorite impact. Which is the most likely effect of this increase in "
        "rotation?\n"
        "A. Planetary density will decrease.\n"
        "B. Planetary years will become longer.\n"
        "C. Planetary days will become shorter.\n"
        "D. Planetary gravity will become stronger.\n"
        "Your response should end with \"The best completion is [the_letter]\" "
        "where the [the_letter] is one of A, B, C or D.\n"
        "The best answer is";
    CHECK(rq.context_with_q == expected);
    REQUIRE(rq.continuations.size() == 4);
    CHECK(rq.continuations[2] == " C");
    CHECK(rq.continuations[0] == " A");
}

TEST_CASE("cloze rendering matches the reference prompt byte for byte") {
    RenderedQuery rq = render(arc_table4(), FormatKind::Cloze, DemoSet{}, true);
    const std::string expected =
        "Answer the given question.\n"
        "Question: An astronomer observes that a planet rotates faster after a "
        "meteorite impact. Which is the most likely effect of this increase in "
        "rotation?\n"
        "Answer:";
    CHECK(rq.context_with_q == expected);
    CHECK(rq.continuations[2] == " Planetary days will become shorter.");
    // the choice set never appears in a cloze context
    CHECK(rq.context_with_q.find("A.") == std::string::npos);
    CHECK(rq.context_with_q.find("Planetary") == std::string::npos);
}

TEST_CASE("hybrid continuations carry label and full text") {
    RenderedQuery rq = render(arc_table4(), FormatKind::Hybrid, DemoSet{}, true);
    CHECK(rq.continuations[2] == " C. Planetary days will become shorter.");
    CHECK(rq.context_with_q.rfind("The best answer is") ==
          rq.context_with_q.size() - std::string("The best answer is").size());
    // hybrid instruction has no letter list
    CHECK(rq.context_with_q.rfind("Given the following question and four candidate "
                                  "answers, select the best answer.\n", 0) == 0);
}

TEST_CASE("question drop removes exactly the question text") {
    for (FormatKind f : {FormatKind::Cloze, FormatKind::Symbols, FormatKind::Hybrid}) {
        RenderedQuery rq = render(arc_table4(), f, DemoSet{}, true);
        check_drop_locality(rq, arc_table4().question);
    }
}

TEST_CASE("dropping an empty question is a no-op") {
    MCQAInstance inst = arc_table4();
    inst.question.clear(); // rendered directly, skipping validation
    RenderedQuery rq = render(inst, FormatKind::Symbols, DemoSet{}, true);
    CHECK(rq.context_with_q == rq.context_without_q);
}

TEST_CASE("instruction toggle removes only the instruction line") {
    RenderedQuery with = render(arc_table4(), FormatKind::Cloze, DemoSet{}, true);
    RenderedQuery without = render(arc_table4(), FormatKind::Cloze, DemoSet{}, false);
    CHECK(with.context_with_q == "Answer the given question.\n" + without.context_with_q);
    CHECK(without.context_with_q.rfind("Question:", 0) == 0);
    // the question-dropped variant keeps the instruction and the prefixes
    CHECK(with.context_without_q.rfind("Answer the given question.\n", 0) == 0);
    CHECK(with.context_without_q.find("Question: \n") != std::string::npos);
}

TEST_CASE("demonstrations are prepended in order and kept verbatim in both variants") {
    auto pool = demo_pool(6);
    DemoSet demos = assemble_demos(pool, 3, 1234);
    RenderedQuery rq = render(arc_table4(), FormatKind::Symbols, demos, true);

    // each demo block ends with its gold continuation and a blank line follows
    std::size_t pos = 0;
    for (const MCQAInstance& d : demos.demos) {
        std::size_t q = rq.context_with_q.find(d.question, pos);
        REQUIRE(q != std::string::npos);
        std::size_t gold = rq.context_with_q.find(
            std::string("The best answer is ") + label_for(d.answer_index) + "\n\n", q);
        REQUIRE(gold != std::string::npos);
        pos = q;
    }

    // demo invariance: the shared prefix covers every demonstration
    RenderedQuery target_only = render(arc_table4(), FormatKind::Symbols, DemoSet{}, true);
    const std::string demos_prefix = rq.context_with_q.substr(
        0, rq.context_with_q.size() - target_only.context_with_q.size());
    CHECK(rq.context_without_q.rfind(demos_prefix, 0) == 0);
    check_drop_locality(rq, arc_table4().question);

    // demo blocks keep their own questions even in the without-q variant
    for (const MCQAInstance& d : demos.demos)
        CHECK(rq.context_without_q.find(d.question) != std::string::npos);
}

TEST_CASE("rendering is a pure function") {
    auto pool = demo_pool(5);
    DemoSet demos = assemble_demos(pool, 2, 99);
    RenderedQuery a = render(arc_table4(), FormatKind::Hybrid, demos, true);
    RenderedQuery b = render(arc_table4(), FormatKind::Hybrid, demos, true);
    CHECK(a.context_with_q == b.context_with_q);
    CHECK(a.context_without_q == b.context_without_q);
    CHECK(a.continuations == b.continuations);
}

TEST_CASE("every continuation begins with exactly one space") {
    MCQAInstance inst = synthetic(7, 5);
    for (FormatKind f : {FormatKind::Cloze, FormatKind::Symbols, FormatKind::Hybrid}) {
        RenderedQuery rq = render(inst, f, DemoSet{}, true);
        REQUIRE(rq.continuations.size() == inst.choices.size());
        for (const std::string& c : rq.continuations) {
            REQUIRE(c.size() >= 2);
            CHECK(c[0] == ' ');
            CHECK(c[1] != ' ');
        }
        CHECK(rq.context_with_q.back() != ' ');
    }
}

TEST_CASE("label lists generalize beyond four choices") {
    MCQAInstance inst = synthetic(3, 6);
    RenderedQuery rq = render(inst, FormatKind::Symbols, DemoSet{}, true);
    CHECK(rq.context_with_q.find("six candidate answers (A, B, C, D, E and F)") !=
          std::string::npos);
    CHECK(rq.context_with_q.find("one of A, B, C, D, E or F.") != std::string::npos);
    CHECK(rq.continuations[5] == " F");
}

TEST_CASE("assemble_demos is deterministic and without replacement") {
    auto pool = demo_pool(100);
    DemoSet a = assemble_demos(pool, 5, 1234);
    DemoSet b = assemble_demos(pool, 5, 1234);
    REQUIRE(a.demos.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a.demos[i].id == b.demos[i].id);

    std::vector<std::string> ids;
    for (const auto& d : a.demos) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());

    DemoSet c = assemble_demos(pool, 5, 4321);
    bool differs = false;
    for (std::size_t i = 0; i < 5; ++i) differs = differs || a.demos[i].id != c.demos[i].id;
    CHECK(differs);
}

TEST_CASE("assemble_demos edge cases") {
    auto pool = demo_pool(3);
    CHECK(assemble_demos(pool, 0, 1234).demos.empty());
    CHECK_THROWS_MATCHES(assemble_demos(pool, 5, 1234), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::PoolTooSmall;
                         }));
}

TEST_CASE("hellaswag family resolves its own template") {
    MCQAInstance inst;
    inst.id = "hs-1";
    inst.question = "A man is being pulled on a water ski as he floats in the water "
                    "casually. he";
    inst.choices = {"mounts the water ski and tears through the water at fast speeds.",
                    "goes over several speeds, trying to stay upright.",
                    "struggles a little bit as he talks about it.",
                    "is seated in a boat with three other people."};
    inst.answer_index = 3;
    inst.source = {"hellaswag", "validation"};

    RenderedQuery cloze = render(inst, FormatKind::Cloze, DemoSet{}, true);
    CHECK(cloze.context_with_q ==
          "Answer the most appropriate completion for the given incomplete context.\n"
          "Incomplete context: A man is being pulled on a water ski as he floats in "
          "the water casually. he\n"
          "Completion:");
    CHECK(cloze.continuations[3] == " is seated in a boat with three other people.");

    RenderedQuery sym = render(inst, FormatKind::Symbols, DemoSet{}, true);
    CHECK(sym.context_with_q.rfind(
              "Given the following incomplete context and four possible completions "
              "(A, B, C and D), select the best completion.\n", 0) == 0);
    CHECK(sym.context_with_q.rfind("The best completion is") ==
          sym.context_with_q.size() - std::string("The best completion is").size());
    CHECK(sym.continuations[3] == " D");
}

TEST_CASE("symbols rendering refuses more than 26 choices") {
    MCQAInstance inst = synthetic(1, 4);
    inst.choices.clear();
    for (int i = 0; i < 27; ++i) inst.choices.push_back("c" + std::to_string(i));
    inst.answer_index = 0;
    CHECK_THROWS_MATCHES(render(inst, FormatKind::Symbols, DemoSet{}, true), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::UnsupportedChoiceCount;
                         }));
}

TEST_CASE("drop locality and boundary conventions hold on randomized content") {
    // characters deliberately include json-escapes, format braces and digits
    const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJ 0123456789 ?!.,;:'\"\\{}[]%$-";
    Lcg64 rng(2024);
    auto random_text = [&](std::size_t min_len) {
        std::size_t len = min_len + rng.next_below(40);
        std::string s;
        for (std::size_t i = 0; i < len; ++i)
            s += alphabet[rng.next_below(alphabet.size())];
        // keep the boundary convention meaningful: no edge whitespace
        s.front() = 'q';
        s.back() = 'z';
        return s;
    };

    for (int trial = 0; trial < 200; ++trial) {
        MCQAInstance inst;
        inst.id = "rnd-" + std::to_string(trial);
        inst.question = random_text(1);
        int n = 2 + static_cast<int>(rng.next_below(7));
        for (int i = 0; i < n; ++i) inst.choices.push_back(random_text(1));
        inst.answer_index = static_cast<int>(rng.next_below(n));
        inst.source = {"synthetic", "test"};
        validate_instance(inst);

        FormatKind f = static_cast<FormatKind>(rng.next_below(3));
        RenderedQuery rq = render(inst, f, DemoSet{}, true);
        REQUIRE(rq.continuations.size() == inst.choices.size());
        check_drop_locality(rq, inst.question);
        for (const std::string& c : rq.continuations) {
            REQUIRE(c.size() >= 2);
            CHECK(c[0] == ' ');
        }
        CHECK(rq.context_with_q.back() != ' ');
        CHECK(rq.context_without_q.back() != ' ');
    }
}

TEST_CASE("embedded templates match the bundled file byte for byte") {
    const std::string from_file = [] {
        std::ifstream in(std::string(QSHIFT_REPO_DIR) + "/data/templates.json",
                         std::ios::binary);
        REQUIRE(in);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }();
    CHECK(from_file == std::string(detail::kEmbeddedTemplates));
    TemplateSet loaded =
        TemplateSet::load(std::string(QSHIFT_REPO_DIR) + "/data/templates.json");
    CHECK(loaded.version() == TemplateSet::embedded().version());
}
