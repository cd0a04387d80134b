#pragma once
// Domain types shared by every module: instances, formats, metrics and the
// run configuration. Everything here is plain immutable data plus validation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qshift/error.hpp"

namespace qshift {

inline constexpr int kMaxChoices = 26; // labels A..Z

struct SourceRef {
    std::string dataset;
    std::string split;
};

// One multiple-choice question: the question text, the ordered answer
// candidates and the 0-based gold index. Labels are presentation-only.
struct MCQAInstance {
    std::string id;
    std::string question;
    std::vector<std::string> choices;
    int answer_index = 0;
    SourceRef source;
};

enum class FormatKind { Cloze, Symbols, Hybrid };
enum class MetricKind { Acc, AccNorm, AccNpsq };

enum class AdversarialKind { Simple, Extended, Instructional, Neutral };

// How the replaced distractor slot is chosen in adversarial runs.
struct SlotPolicy {
    enum class Kind { SeededRandom, Fixed };
    Kind kind = Kind::SeededRandom;
    int fixed_slot = -1; // used when kind == Fixed
};

enum class ScorerKind { Wire, Fixture, Ngram };

// Selects exactly one scoring source. `target` is the base URL for Wire and
// a file path for Fixture / Ngram (empty Ngram path means the embedded corpus).
struct ScorerDescriptor {
    ScorerKind kind = ScorerKind::Ngram;
    std::string target;
    std::string model;
    int timeout_ms = 30000;
    int max_retries = 2;
};

struct AdversarialConfig {
    AdversarialKind kind = AdversarialKind::Simple;
    SlotPolicy slot_policy;
    std::uint64_t seed = 1234;
};

// Full description of one evaluation run. Serialized into every report so
// any number in the output can be traced back to its configuration.
struct EvalConfig {
    FormatKind format = FormatKind::Cloze;
    std::vector<MetricKind> metrics = {MetricKind::Acc, MetricKind::AccNorm,
                                       MetricKind::AccNpsq};
    int shots = 0;
    std::uint64_t demo_seed = 1234;
    bool instruction_enabled = true;
    ScorerDescriptor backend;
    std::optional<AdversarialConfig> adversarial;
};

// --- name <-> enum helpers (wire/report spellings) --------------------------

inline const char* format_name(FormatKind f) {
    switch (f) {
        case FormatKind::Cloze: return "cloze";
        case FormatKind::Symbols: return "symbols";
        case FormatKind::Hybrid: return "hybrid";
    }
    return "?";
}

inline FormatKind parse_format(const std::string& s) {
    if (s == "cloze") return FormatKind::Cloze;
    if (s == "symbols") return FormatKind::Symbols;
    if (s == "hybrid") return FormatKind::Hybrid;
    throw Error(Errc::ConfigError, "unknown format '" + s + "'");
}

inline const char* metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::Acc: return "acc";
        case MetricKind::AccNorm: return "acc_norm";
        case MetricKind::AccNpsq: return "acc_npsq";
    }
    return "?";
}

inline MetricKind parse_metric(const std::string& s) {
    if (s == "acc") return MetricKind::Acc;
    if (s == "acc_norm") return MetricKind::AccNorm;
    if (s == "acc_npsq") return MetricKind::AccNpsq;
    throw Error(Errc::ConfigError, "unknown metric '" + s + "'");
}

inline const char* adversarial_name(AdversarialKind k) {
    switch (k) {
        case AdversarialKind::Simple: return "simple";
        case AdversarialKind::Extended: return "extended";
        case AdversarialKind::Instructional: return "instructional";
        case AdversarialKind::Neutral: return "neutral";
    }
    return "?";
}

inline AdversarialKind parse_adversarial(const std::string& s) {
    if (s == "simple") return AdversarialKind::Simple;
    if (s == "extended") return AdversarialKind::Extended;
    if (s == "instructional") return AdversarialKind::Instructional;
    if (s == "neutral") return AdversarialKind::Neutral;
    throw Error(Errc::ConfigError, "unknown adversarial kind '" + s + "'");
}

inline const char* scorer_kind_name(ScorerKind k) {
    switch (k) {
        case ScorerKind::Wire: return "wire";
        case ScorerKind::Fixture: return "fixture";
        case ScorerKind::Ngram: return "ngram";
    }
    return "?";
}

// --- operations --------------------------------------------------------------

// 0 -> 'A', 25 -> 'Z'. Anything else is out of label range.
inline char label_for(int index) {
    if (index < 0 || index >= kMaxChoices)
        throw Error(Errc::IndexOutOfLabelRange,
                    "choice index " + std::to_string(index) + " has no letter label");
    return static_cast<char>('A' + index);
}

// Returns the instance untouched iff every invariant holds.
inline const MCQAInstance& validate_instance(const MCQAInstance& inst) {
    if (inst.id.empty())
        throw Error(Errc::EmptyField, "instance has empty id");
    if (inst.question.empty())
        throw Error(Errc::EmptyField, "instance '" + inst.id + "': empty question");
    if (inst.choices.size() < 2)
        throw Error(Errc::TooFewChoices,
                    "instance '" + inst.id + "': needs at least 2 choices, got " +
                        std::to_string(inst.choices.size()));
    if (inst.choices.size() > static_cast<size_t>(kMaxChoices))
        throw Error(Errc::UnsupportedChoiceCount,
                    "instance '" + inst.id + "': more than " +
                        std::to_string(kMaxChoices) + " choices");
    for (size_t i = 0; i < inst.choices.size(); ++i) {
        if (inst.choices[i].empty())
            throw Error(Errc::EmptyField, "instance '" + inst.id + "': choice " +
                                              std::to_string(i) + " is empty");
    }
    if (inst.answer_index < 0 ||
        static_cast<size_t>(inst.answer_index) >= inst.choices.size())
        throw Error(Errc::AnswerIndexOutOfRange,
                    "instance '" + inst.id + "': answer_index " +
                        std::to_string(inst.answer_index) + " not in [0, " +
                        std::to_string(inst.choices.size()) + ")");
    return inst;
}

} // namespace qshift
