#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semaudit {

/// Failure kinds raised by the library. Each maps onto one of the coarse
/// categories the CLI turns into exit codes.
enum class ErrorCode {
    // input parsing
    EmptyInput,
    DuplicateModel,
    DuplicateIndicator,
    RaggedRow,
    NonNumericCell,
    MalformedInput,
    MalformedTaxonomy,
    UnknownConstruct,
    DoubleAssignment,
    CyclicStructure,
    InsufficientIndicators,
    SpecError,
    Io,
    // dataset validation
    MissingIndicator,
    ZeroVariance,
    TooFewRows,
    UnknownIndicator,
    LengthMismatch,
    // estimation and statistics
    DegenerateCorrelation,
    SingularDesign,
    DomainError,
    DegenerateConstruct,
    StructureError,
    UndefinedHTMT,
    UndefinedMetric,
    UndefinedCorrelation,
};

enum class ErrorCategory { parse, validate, estimate };

inline ErrorCategory category_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyInput:
    case ErrorCode::DuplicateModel:
    case ErrorCode::DuplicateIndicator:
    case ErrorCode::RaggedRow:
    case ErrorCode::NonNumericCell:
    case ErrorCode::MalformedInput:
    case ErrorCode::MalformedTaxonomy:
    case ErrorCode::UnknownConstruct:
    case ErrorCode::DoubleAssignment:
    case ErrorCode::CyclicStructure:
    case ErrorCode::InsufficientIndicators:
    case ErrorCode::SpecError:
    case ErrorCode::Io:
        return ErrorCategory::parse;
    case ErrorCode::MissingIndicator:
    case ErrorCode::ZeroVariance:
    case ErrorCode::TooFewRows:
    case ErrorCode::UnknownIndicator:
    case ErrorCode::LengthMismatch:
        return ErrorCategory::validate;
    default:
        return ErrorCategory::estimate;
    }
}

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateModel: return "DuplicateModel";
    case ErrorCode::DuplicateIndicator: return "DuplicateIndicator";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::MalformedTaxonomy: return "MalformedTaxonomy";
    case ErrorCode::UnknownConstruct: return "UnknownConstruct";
    case ErrorCode::DoubleAssignment: return "DoubleAssignment";
    case ErrorCode::CyclicStructure: return "CyclicStructure";
    case ErrorCode::InsufficientIndicators: return "InsufficientIndicators";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingIndicator: return "MissingIndicator";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::UnknownIndicator: return "UnknownIndicator";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateConstruct: return "DegenerateConstruct";
    case ErrorCode::StructureError: return "StructureError";
    case ErrorCode::UndefinedHTMT: return "UndefinedHTMT";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::UndefinedCorrelation: return "UndefinedCorrelation";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
};

} // namespace semaudit
