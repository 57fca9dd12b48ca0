#include "vizpipe/error.hpp"

namespace vizpipe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::TokenBudgetExceeded: return "TokenBudgetExceeded";
    case ErrorCode::UnparseableScore: return "UnparseableScore";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::HeaderMissing: return "HeaderMissing";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::EnrichmentParseFailure: return "EnrichmentParseFailure";
    case ErrorCode::NoParsableJSON: return "NoParsableJSON";
    case ErrorCode::AllGoalsRejected: return "AllGoalsRejected";
    case ErrorCode::UnknownGrammar: return "UnknownGrammar";
    case ErrorCode::EmptyStub: return "EmptyStub";
    case ErrorCode::NoViableCandidate: return "NoViableCandidate";
    case ErrorCode::ExplanationParseFailure: return "ExplanationParseFailure";
    case ErrorCode::ScoreParseFailure: return "ScoreParseFailure";
    case ErrorCode::UnknownStyle: return "UnknownStyle";
    case ErrorCode::StrengthOutOfRange: return "StrengthOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DivisionByZeroTotal: return "DivisionByZeroTotal";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::IndexNotFound: return "IndexNotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
  }
  return "Unknown";
}

void raise(ErrorCode code, const std::string& message, nlohmann::json details) {
  throw Error(code, message, std::move(details));
}

int exit_code_for(ErrorCode code) noexcept {
  // 1 and 2 are reserved for generic failure and usage errors.
  return 10 + static_cast<int>(code);
}

}  // namespace vizpipe
