#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace vizpipe {

/// Every failure the pipeline can report. The CLI maps each code to its own
/// exit status and the service maps them to HTTP statuses.
enum class ErrorCode {
  // provider port
  ProviderUnavailable,
  CassetteMiss,
  TokenBudgetExceeded,
  UnparseableScore,
  // summarizer
  ParseError,
  EmptyDataset,
  HeaderMissing,
  UnknownField,
  EnrichmentParseFailure,
  // goals
  NoParsableJSON,
  AllGoalsRejected,
  // visualization
  UnknownGrammar,
  EmptyStub,
  NoViableCandidate,
  // ops
  ExplanationParseFailure,
  ScoreParseFailure,
  // infographics
  UnknownStyle,
  StrengthOutOfRange,
  DimensionMismatch,
  // harness
  DivisionByZeroTotal,
  // general
  PreconditionViolation,
  ConfigError,
  IoError,
  SessionNotFound,
  IndexNotFound,
  Conflict,
  PayloadTooLarge,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nullptr)
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  // Structured context, e.g. {row, column} for parse errors or the raw
  // provider text for explanation failures.
  const nlohmann::json& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message, nlohmann::json details = nullptr);

/// Distinct nonzero process exit status per error class.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace vizpipe
