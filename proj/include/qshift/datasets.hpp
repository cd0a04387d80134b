#pragma once
// Dataset ingestion. The evaluation core reads exactly one format — canonical
// JSONL, one instance per line:
//
//   {"id": "...", "question": "...", "choices": ["..."], "answer_index": 0,
//    "dataset": "...", "split": "..."}
//
// Raw benchmark exports are converted by per-schema adapters; every
// dataset-specific quirk lives here and nowhere else. Field mappings are
// documented in the README.

#include <cctype>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "qshift/core.hpp"

namespace qshift {

inline nlohmann::json instance_to_json(const MCQAInstance& inst) {
    return nlohmann::json{{"id", inst.id},
                          {"question", inst.question},
                          {"choices", inst.choices},
                          {"answer_index", inst.answer_index},
                          {"dataset", inst.source.dataset},
                          {"split", inst.source.split}};
}

inline MCQAInstance instance_from_json(const nlohmann::json& j) {
    MCQAInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    inst.choices = j.at("choices").get<std::vector<std::string>>();
    inst.answer_index = j.at("answer_index").get<int>();
    inst.source.dataset = j.value("dataset", "");
    inst.source.split = j.value("split", "");
    return inst;
}

// Loads and validates canonical JSONL, preserving file order.
inline std::vector<MCQAInstance> load_canonical(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open dataset file " + path);
    std::vector<MCQAInstance> out;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        MCQAInstance inst;
        try {
            inst = instance_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError,
                        path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            validate_instance(inst);
        } catch (const Error& e) {
            throw Error(Errc::ValidationError,
                        path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(inst.id).second)
            throw Error(Errc::DuplicateId, path + ":" + std::to_string(lineno) +
                                               ": duplicate id '" + inst.id + "'");
        out.push_back(std::move(inst));
    }
    return out;
}

inline void write_canonical(const std::vector<MCQAInstance>& instances,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write dataset file " + path);
    for (const MCQAInstance& inst : instances) out << instance_to_json(inst) << "\n";
}

enum class RawSchema { HellaSwag, Arc, Mmlu };

inline RawSchema parse_schema(const std::string& s) {
    if (s == "hellaswag") return RawSchema::HellaSwag;
    if (s == "arc") return RawSchema::Arc;
    if (s == "mmlu") return RawSchema::Mmlu;
    throw Error(Errc::ConfigError, "unknown raw schema '" + s + "'");
}

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& path, int lineno,
                                     const std::string& field,
                                     const std::string& why) {
    throw Error(Errc::SchemaMismatch, path + ":" + std::to_string(lineno) + ": " +
                                          field + ": " + why);
}

// Accepts integer labels and their string spellings ("3").
inline int as_index(const nlohmann::json& v, const std::string& path, int lineno,
                    const std::string& field) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            std::size_t used = 0;
            int n = std::stoi(s, &used);
            if (used == s.size()) return n;
        } catch (...) {
        }
    }
    schema_fail(path, lineno, field, "expected an integer index");
}

inline MCQAInstance adapt_hellaswag(const nlohmann::json& j, const std::string& path,
                                    int lineno) {
    MCQAInstance inst;
    if (!j.contains("ctx")) schema_fail(path, lineno, "ctx", "missing");
    inst.question = j.at("ctx").get<std::string>();
    if (!j.contains("endings") || !j.at("endings").is_array())
        schema_fail(path, lineno, "endings", "missing or not an array");
    inst.choices = j.at("endings").get<std::vector<std::string>>();
    if (!j.contains("label")) schema_fail(path, lineno, "label", "missing");
    inst.answer_index = as_index(j.at("label"), path, lineno, "label");
    inst.id = "hellaswag-" +
              (j.contains("ind") ? std::to_string(j.at("ind").get<long long>())
                                 : std::to_string(lineno));
    inst.source.dataset = "hellaswag";
    inst.source.split = j.value("split", "validation");
    return inst;
}

// ARC ships flat ({"question": "...", "choices": {"text": [...], "label":
// [...]}}) and nested ({"question": {"stem": ..., "choices": [{"text","label"}]}})
// exports; both are accepted. The answer key is located by position in the
// label list when one exists, otherwise "1".."9" map to 0.. and "A".."Z" to 0..
inline MCQAInstance adapt_arc(const nlohmann::json& j, const std::string& path,
                              int lineno) {
    MCQAInstance inst;
    std::vector<std::string> labels;
    if (!j.contains("question")) schema_fail(path, lineno, "question", "missing");
    const nlohmann::json& q = j.at("question");
    if (q.is_object()) {
        if (!q.contains("stem")) schema_fail(path, lineno, "question.stem", "missing");
        inst.question = q.at("stem").get<std::string>();
        if (!q.contains("choices") || !q.at("choices").is_array())
            schema_fail(path, lineno, "question.choices", "missing or not an array");
        for (const auto& c : q.at("choices")) {
            inst.choices.push_back(c.at("text").get<std::string>());
            labels.push_back(c.value("label", ""));
        }
    } else {
        inst.question = q.get<std::string>();
        if (!j.contains("choices") || !j.at("choices").is_object())
            schema_fail(path, lineno, "choices", "missing or not an object");
        const nlohmann::json& c = j.at("choices");
        if (!c.contains("text")) schema_fail(path, lineno, "choices.text", "missing");
        inst.choices = c.at("text").get<std::vector<std::string>>();
        if (c.contains("label"))
            labels = c.at("label").get<std::vector<std::string>>();
    }
    if (!j.contains("answerKey")) schema_fail(path, lineno, "answerKey", "missing");
    const std::string key = j.at("answerKey").is_string()
                                ? j.at("answerKey").get<std::string>()
                                : std::to_string(j.at("answerKey").get<int>());
    int idx = -1;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == key) idx = static_cast<int>(i);
    if (idx < 0 && key.size() == 1) {
        if (key[0] >= '1' && key[0] <= '9') idx = key[0] - '1';
        else if (key[0] >= 'A' && key[0] <= 'Z') idx = key[0] - 'A';
    }
    if (idx < 0) schema_fail(path, lineno, "answerKey", "cannot resolve '" + key + "'");
    inst.answer_index = idx;
    inst.id = j.contains("id") ? j.at("id").get<std::string>()
                               : "arc-" + std::to_string(lineno);
    inst.source.dataset = "arc";
    inst.source.split = j.value("split", "test");
    return inst;
}

inline MCQAInstance adapt_mmlu(const nlohmann::json& j, const std::string& path,
                               int lineno) {
    MCQAInstance inst;
    if (!j.contains("question")) schema_fail(path, lineno, "question", "missing");
    inst.question = j.at("question").get<std::string>();
    if (!j.contains("choices") || !j.at("choices").is_array())
        schema_fail(path, lineno, "choices", "missing or not an array");
    inst.choices = j.at("choices").get<std::vector<std::string>>();
    if (!j.contains("answer")) schema_fail(path, lineno, "answer", "missing");
    inst.answer_index = as_index(j.at("answer"), path, lineno, "answer");
    inst.id = "mmlu-" + std::to_string(lineno);
    inst.source.dataset = "mmlu";
    inst.source.split = j.value("split", "test");
    return inst;
}

} // namespace detail

// Converts a raw export to validated canonical instances, preserving record
// order and count; any malformed record aborts with the offending field path.
inline std::vector<MCQAInstance> adapt_file(const std::string& raw_path,
                                            RawSchema schema) {
    std::ifstream in(raw_path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open raw export " + raw_path);
    std::vector<MCQAInstance> out;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError,
                        raw_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        MCQAInstance inst;
        switch (schema) {
            case RawSchema::HellaSwag:
                inst = detail::adapt_hellaswag(j, raw_path, lineno);
                break;
            case RawSchema::Arc:
                inst = detail::adapt_arc(j, raw_path, lineno);
                break;
            case RawSchema::Mmlu:
                inst = detail::adapt_mmlu(j, raw_path, lineno);
                break;
        }
        try {
            validate_instance(inst);
        } catch (const Error& e) {
            throw Error(Errc::ValidationError,
                        raw_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(inst.id).second)
            throw Error(Errc::DuplicateId, raw_path + ":" + std::to_string(lineno) +
                                               ": duplicate id '" + inst.id + "'");
        out.push_back(std::move(inst));
    }
    return out;
}

} // namespace qshift
