#pragma once

#include <stdexcept>
#include <string>

namespace qshift {

// Every failure the library reports, one code per condition.
enum class Errc {
    // core / validation
    EmptyField,
    AnswerIndexOutOfRange,
    TooFewChoices,
    IndexOutOfLabelRange,
    // formats
    UnsupportedChoiceCount,
    PoolTooSmall,
    // backends
    BackendUnavailable,
    AlignmentError,
    MissingFixtureEntry,
    // scoring
    DegenerateBaseline,
    EmptyResultSet,
    // adversarial
    SlotIsGold,
    IdMismatch,
    // datasets
    ParseError,
    DuplicateId,
    ValidationError,
    SchemaMismatch,
    // report
    DegenerateVariance,
    SchemaVersionMismatch,
    IoError,
    // cli
    UnknownInstance,
    ConfigError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::EmptyField: return "EmptyField";
        case Errc::AnswerIndexOutOfRange: return "AnswerIndexOutOfRange";
        case Errc::TooFewChoices: return "TooFewChoices";
        case Errc::IndexOutOfLabelRange: return "IndexOutOfLabelRange";
        case Errc::UnsupportedChoiceCount: return "UnsupportedChoiceCount";
        case Errc::PoolTooSmall: return "PoolTooSmall";
        case Errc::BackendUnavailable: return "BackendUnavailable";
        case Errc::AlignmentError: return "AlignmentError";
        case Errc::MissingFixtureEntry: return "MissingFixtureEntry";
        case Errc::DegenerateBaseline: return "DegenerateBaseline";
        case Errc::EmptyResultSet: return "EmptyResultSet";
        case Errc::SlotIsGold: return "SlotIsGold";
        case Errc::IdMismatch: return "IdMismatch";
        case Errc::ParseError: return "ParseError";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::ValidationError: return "ValidationError";
        case Errc::SchemaMismatch: return "SchemaMismatch";
        case Errc::DegenerateVariance: return "DegenerateVariance";
        case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case Errc::IoError: return "IoError";
        case Errc::UnknownInstance: return "UnknownInstance";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

} // namespace qshift
