#include "vizpipe/viz/filters.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::viz {

namespace {

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Removes comments while leaving string literals intact.
std::string strip_comments(const std::string& code, const std::string& language_id) {
  const bool hash = language_id == "python" || language_id == "r";
  const bool slashes = language_id == "javascript" || language_id == "typescript";
  if (!hash && !slashes) return code;
  std::string out;
  char quote = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const char c = code[i];
    if (quote) {
      out += c;
      if (c == '\\' && i + 1 < code.size()) {
        out += code[++i];
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'' || (slashes && c == '`')) {
      quote = c;
      out += c;
    } else if ((hash && c == '#') || (slashes && c == '/' && i + 1 < code.size() && code[i + 1] == '/')) {
      while (i < code.size() && code[i] != '\n') ++i;
      if (i < code.size()) out += '\n';
    } else {
      out += c;
    }
  }
  return out;
}

std::string normalize_line(const std::string& line) {
  std::string out;
  char quote = 0;
  bool pending_space = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      out += c;
      if (c == '\\' && i + 1 < line.size()) {
        out += line[++i];
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty() && is_ident(out.back()) && is_ident(c)) out += ' ';
    pending_space = false;
    if (c == '"' || c == '\'' || c == '`') quote = c;
    out += c;
  }
  return out;
}

}  // namespace

std::string normalize_code(const std::string& code, const std::string& language_id) {
  if (language_id == "json") {
    // Line breaks carry no meaning in JSON.
    std::string flat = code;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    return normalize_line(flat);
  }
  const bool keep_indent = language_id == "python";
  std::vector<std::string> lines;
  for (const auto& raw : text::split_lines(strip_comments(code, language_id))) {
    auto body = normalize_line(raw);
    if (body.empty()) continue;
    std::size_t indent = 0;
    while (keep_indent && indent < raw.size() && (raw[indent] == ' ' || raw[indent] == '\t')) ++indent;
    lines.push_back(raw.substr(0, indent) + body);
  }
  return text::join(lines, "\n");
}

CandidateProgram select_first_compiled(const std::vector<CandidateProgram>& candidates) {
  for (const auto& c : candidates)
    if (c.status == CandidateStatus::CompiledOk) return c;
  raise(ErrorCode::NoViableCandidate, "no candidate compiled");
}

CandidateProgram select_by_consistency(const std::vector<CandidateProgram>& candidates,
                                       const std::string& language_id) {
  if (candidates.size() < 2)
    raise(ErrorCode::PreconditionViolation, "consensus selection needs at least two candidates");
  // key -> (size, first position)
  std::map<std::string, std::pair<std::size_t, std::size_t>> clusters;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].status != CandidateStatus::CompiledOk) continue;
    auto [it, inserted] = clusters.try_emplace(normalize_code(candidates[i].assembled_code, language_id), 0, i);
    ++it->second.first;
  }
  if (clusters.empty()) raise(ErrorCode::NoViableCandidate, "no candidate compiled");
  std::size_t best_size = 0;
  std::size_t best_pos = 0;
  for (const auto& [key, cluster] : clusters) {
    const auto [size, pos] = cluster;
    if (size > best_size || (size == best_size && pos < best_pos)) {
      best_size = size;
      best_pos = pos;
    }
  }
  return candidates[best_pos];
}

CandidateProgram select_by_scores(const std::vector<CandidateProgram>& candidates, const std::vector<double>& scores) {
  if (scores.size() != candidates.size())
    raise(ErrorCode::PreconditionViolation, "one score per candidate is required");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].status != CandidateStatus::CompiledOk) continue;
    if (!best || scores[i] > scores[*best]) best = i;
  }
  if (!best) raise(ErrorCode::NoViableCandidate, "no candidate compiled");
  auto out = candidates[*best];
  out.correctness_score = scores[*best];
  return out;
}

CandidateProgram select_by_correctness(const std::vector<CandidateProgram>& candidates, llm::TextProvider& provider,
                                       const llm::GenerationConfig& config, const std::string& context) {
  std::vector<double> scores(candidates.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].status != CandidateStatus::CompiledOk) continue;
    any = true;
    try {
      scores[i] = llm::score_correctness(provider, candidates[i].assembled_code, context, config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableScore) throw;
      spdlog::warn("candidate {} correctness reply unparseable; scoring 0", candidates[i].candidate_index);
    }
  }
  if (!any) raise(ErrorCode::NoViableCandidate, "no candidate compiled");
  return select_by_scores(candidates, scores);
}

}  // namespace vizpipe::viz
