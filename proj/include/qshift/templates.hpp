#pragma once
// Prompt templates, one per (dataset family, format). The canonical copy
// ships as data/templates.json; the same bytes are embedded here so the
// library works without a file lookup. Placeholders expanded at render time:
//   {count}      number word for the choice count ("four")
//   {labels_and} "A, B, C and D"
//   {labels_or}  "A, B, C or D"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qshift/core.hpp"

namespace qshift {

struct PromptTemplate {
    std::string instruction;     // task-defining sentence, toggleable per run
    std::string question_prefix; // "Question:" / "Incomplete context:"
    std::string response_format; // answer-format sentence; empty in cloze
    std::string answer_trigger;  // "Answer:" / "The best answer is"
};

namespace detail {

inline const char* kEmbeddedTemplates =
#include "qshift/templates_embedded.inc"
    ;

inline const char* count_word(int n) {
    static const char* words[] = {
        "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
        "seventeen", "eighteen", "nineteen", "twenty", "twenty-one",
        "twenty-two", "twenty-three", "twenty-four", "twenty-five",
        "twenty-six"};
    if (n < 2 || n > kMaxChoices)
        throw Error(Errc::UnsupportedChoiceCount,
                    "no count word for " + std::to_string(n) + " choices");
    return words[n - 2];
}

// "A, B, C and D" / "A, B, C or D"
inline std::string label_list(int n, const char* last_sep) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i > 0) out += (i == n - 1) ? std::string(" ") + last_sep + " " : ", ";
        out += label_for(i);
    }
    return out;
}

inline void replace_all(std::string& s, const std::string& from,
                        const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos;
         pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

} // namespace detail

// Fills {count} / {labels_and} / {labels_or} for a concrete choice count.
inline std::string expand_template_text(std::string text, int num_choices) {
    detail::replace_all(text, "{count}", detail::count_word(num_choices));
    detail::replace_all(text, "{labels_and}", detail::label_list(num_choices, "and"));
    detail::replace_all(text, "{labels_or}", detail::label_list(num_choices, "or"));
    return text;
}

class TemplateSet {
public:
    static TemplateSet from_json_text(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError, std::string("templates: ") + e.what());
        }
        TemplateSet ts;
        if (!j.contains("version") || !j.contains("families"))
            throw Error(Errc::SchemaMismatch, "templates: missing version/families");
        ts.version_ = j.at("version").get<std::string>();
        for (auto& [family, formats] : j.at("families").items()) {
            for (auto& [fmt_name, t] : formats.items()) {
                PromptTemplate pt;
                pt.instruction = t.at("instruction").get<std::string>();
                pt.question_prefix = t.at("question_prefix").get<std::string>();
                pt.response_format = t.at("response_format").get<std::string>();
                pt.answer_trigger = t.at("answer_trigger").get<std::string>();
                ts.table_[family][parse_format(fmt_name)] = pt;
            }
        }
        if (ts.table_.find("default") == ts.table_.end())
            throw Error(Errc::SchemaMismatch, "templates: no 'default' family");
        return ts;
    }

    static TemplateSet load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot open templates file " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_json_text(ss.str());
    }

    // The copy compiled into the library; byte-identical to data/templates.json.
    static const TemplateSet& embedded() {
        static const TemplateSet ts = from_json_text(detail::kEmbeddedTemplates);
        return ts;
    }

    const std::string& version() const { return version_; }

    // Family resolution: a dataset name containing "hellaswag", "arc" or
    // "mmlu" (case-insensitive) maps to that family, anything else to default.
    const PromptTemplate& resolve(const std::string& dataset,
                                  FormatKind format) const {
        std::string lower;
        lower.reserve(dataset.size());
        for (char c : dataset)
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const char* family = "default";
        if (lower.find("hellaswag") != std::string::npos) family = "hellaswag";
        else if (lower.find("arc") != std::string::npos) family = "arc";
        else if (lower.find("mmlu") != std::string::npos) family = "mmlu";
        auto fit = table_.find(family);
        if (fit == table_.end()) fit = table_.find("default");
        auto tit = fit->second.find(format);
        if (tit == fit->second.end())
            throw Error(Errc::SchemaMismatch,
                        std::string("templates: family '") + family +
                            "' lacks format " + format_name(format));
        return tit->second;
    }

private:
    std::string version_;
    std::map<std::string, std::map<FormatKind, PromptTemplate>> table_;
};

} // namespace qshift
