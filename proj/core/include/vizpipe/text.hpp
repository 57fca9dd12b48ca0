#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

// Small text helpers shared by the modules that post-process model replies.
namespace vizpipe::text {

/// If `reply` contains a markdown code fence, returns the body of the first
/// fenced block (language tag dropped). Otherwise returns `reply` unchanged.
std::string strip_code_fences(std::string_view reply);

/// Locates the first balanced JSON array or object in `reply` (after fence
/// stripping) and parses it. Returns nullopt when nothing parses.
std::optional<nlohmann::json> extract_json(std::string_view reply);

/// First real number appearing in `s`, if any.
std::optional<double> first_real(std::string_view s);

/// First integer token appearing in `s` together with the text after it.
struct IntegerMatch {
  long long value;
  std::string rest;
};
std::optional<IntegerMatch> first_integer(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);

/// Rough token estimate used for context-budget checks (~4 bytes per token).
std::size_t estimate_tokens(std::string_view s) noexcept;

}  // namespace vizpipe::text
