#pragma once
// Turns an instance into scoreable (context, continuation) pairs.
//
// Boundary convention: contexts end at the answer trigger with no trailing
// whitespace and every continuation begins with exactly one space. This gives
// backends a stable character boundary to align tokens against.
//
// The question-dropped context is the same string with the target question
// text deleted and nothing else changed: instruction, prefixes, choice block
// and all demonstrations stay byte-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "qshift/core.hpp"
#include "qshift/rng.hpp"
#include "qshift/templates.hpp"

namespace qshift {

struct RenderedQuery {
    FormatKind format = FormatKind::Cloze;
    std::string context_with_q;
    std::string context_without_q;
    std::vector<std::string> continuations; // one per choice, each " ..."
    std::string instance_ref;
};

struct DemoSet {
    std::vector<MCQAInstance> demos;
    std::uint64_t seed = 0;
    std::size_t pool_size = 0;
};

// The continuation scored for choice `index`: the choice text (cloze), the
// bare label (symbols) or "<label>. <text>" (hybrid), with the leading space.
inline std::string continuation_for(const MCQAInstance& inst, FormatKind format,
                                    int index) {
    switch (format) {
        case FormatKind::Cloze:
            return " " + inst.choices[index];
        case FormatKind::Symbols:
            return std::string(" ") + label_for(index);
        case FormatKind::Hybrid:
            return std::string(" ") + label_for(index) + ". " + inst.choices[index];
    }
    throw Error(Errc::ConfigError, "bad format");
}

namespace detail {

// Context split around the question text, so the with-question and
// without-question variants differ by exactly that substring.
struct ContextParts {
    std::string before_question;
    std::string after_question;
};

inline ContextParts context_parts(const MCQAInstance& inst, FormatKind format,
                                  const PromptTemplate& tmpl,
                                  bool instruction_enabled) {
    const int n = static_cast<int>(inst.choices.size());
    if (format != FormatKind::Cloze && n > kMaxChoices)
        throw Error(Errc::UnsupportedChoiceCount,
                    "instance '" + inst.id + "': " + std::to_string(n) +
                        " choices exceed the A..Z label range");

    ContextParts parts;
    if (instruction_enabled && !tmpl.instruction.empty())
        parts.before_question = expand_template_text(tmpl.instruction, n) + "\n";
    parts.before_question += tmpl.question_prefix + " ";

    std::string& after = parts.after_question;
    after = "\n";
    if (format != FormatKind::Cloze) {
        for (int i = 0; i < n; ++i)
            after += std::string(1, label_for(i)) + ". " + inst.choices[i] + "\n";
        after += expand_template_text(tmpl.response_format, n) + "\n";
    }
    after += tmpl.answer_trigger;
    return parts;
}

// One demonstration block: the full rendering plus its gold continuation.
inline std::string demo_block(const MCQAInstance& demo, FormatKind format,
                              const TemplateSet& templates,
                              bool instruction_enabled) {
    const PromptTemplate& tmpl = templates.resolve(demo.source.dataset, format);
    ContextParts parts = context_parts(demo, format, tmpl, instruction_enabled);
    return parts.before_question + demo.question + parts.after_question +
           continuation_for(demo, format, demo.answer_index);
}

} // namespace detail

inline RenderedQuery render(const MCQAInstance& inst, FormatKind format,
                            const DemoSet& demos, bool instruction_enabled,
                            const TemplateSet& templates = TemplateSet::embedded()) {
    const PromptTemplate& tmpl = templates.resolve(inst.source.dataset, format);
    detail::ContextParts parts =
        detail::context_parts(inst, format, tmpl, instruction_enabled);

    std::string prefix;
    for (const MCQAInstance& demo : demos.demos)
        prefix += detail::demo_block(demo, format, templates, instruction_enabled) +
                  "\n\n";

    RenderedQuery rq;
    rq.format = format;
    rq.instance_ref = inst.id;
    rq.context_with_q =
        prefix + parts.before_question + inst.question + parts.after_question;
    rq.context_without_q =
        prefix + parts.before_question + parts.after_question;
    rq.continuations.reserve(inst.choices.size());
    for (int i = 0; i < static_cast<int>(inst.choices.size()); ++i)
        rq.continuations.push_back(continuation_for(inst, format, i));
    return rq;
}

// Draws `shots` demonstrations from the pool without replacement, a pure
// function of (seed, pool order, shots).
inline DemoSet assemble_demos(const std::vector<MCQAInstance>& pool, int shots,
                              std::uint64_t seed) {
    if (shots < 0)
        throw Error(Errc::ConfigError, "shots must be >= 0");
    if (static_cast<std::size_t>(shots) > pool.size())
        throw Error(Errc::PoolTooSmall,
                    "need " + std::to_string(shots) + " demos from a pool of " +
                        std::to_string(pool.size()));
    DemoSet ds;
    ds.seed = seed;
    ds.pool_size = pool.size();
    for (std::size_t i :
         sample_without_replacement(pool.size(), static_cast<std::size_t>(shots), seed))
        ds.demos.push_back(pool[i]);
    return ds;
}

} // namespace qshift
