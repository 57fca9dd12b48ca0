#include "vizpipe/viz/codegen.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::viz {

namespace {

constexpr const char* kCodegenSystem =
    "You write visualization code. You are given a program scaffold with a single hole marked <stub>. "
    "Write only the code that replaces <stub>: do not repeat the code before or after it, do not "
    "add explanations, and use only fields that exist in the dataset.";

constexpr std::array<std::string_view, 14> kLeadingKeywords = {
    "for", "if", "while", "with", "try", "return", "def", "import", "from", "else", "elif", "class", "lambda", "print"};

bool is_blank(const std::string& line) { return text::trim(line).empty(); }

std::size_t indent_width(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return i;
}

// A line of chatter such as "Here is the updated stub:" rather than code.
bool looks_like_prose(const std::string& line) {
  if (line.empty() || std::isspace(static_cast<unsigned char>(line.front()))) return false;
  if (!std::isalpha(static_cast<unsigned char>(line.front()))) return false;
  if (line.find_first_of("()[]{}=\"'`,<>#") != std::string::npos) return false;
  const auto word_end = line.find_first_of(" :");
  const auto first = line.substr(0, word_end);
  if (std::find(kLeadingKeywords.begin(), kLeadingKeywords.end(), first) != kLeadingKeywords.end()) return false;
  return line.find(' ') != std::string::npos;
}

std::string last_code_line(const std::string& s) {
  auto lines = text::split_lines(s);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it)
    if (!is_blank(*it)) return text::trim(*it);
  return {};
}

std::string rtrim(const std::string& s) {
  const auto end = s.find_last_not_of(" \t\r");
  return end == std::string::npos ? std::string() : s.substr(0, end + 1);
}

// Keeps leading indentation.
std::string first_code_line(const std::string& s) {
  for (const auto& l : text::split_lines(s))
    if (!is_blank(l)) return rtrim(l);
  return {};
}

}  // namespace

llm::PromptRequest build_codegen_prompt(const std::string& summary_text, const goals::Goal& goal,
                                        const Scaffold& scaffold) {
  llm::PromptRequest req;
  req.system = kCodegenSystem;
  req.mode = llm::PromptMode::FillInMiddle;
  req.fim_prefix = scaffold.preamble;
  req.fim_suffix = scaffold.postamble;
  std::string user;
  user += "Dataset summary:\n";
  user += summary_text.empty() ? std::string("(no summary available)\n") : summary_text;
  user += fmt::format("\nGoal: {}\nVisualization: {}\n", goal.question, goal.visualization);
  if (!goal.rationale.empty()) user += "Rationale: " + goal.rationale + "\n";
  user += fmt::format("\nScaffold ({}):\n{}\n", scaffold.grammar_id, scaffold.template_text());
  if (!scaffold.prompt_hint.empty()) user += "\n" + scaffold.prompt_hint + "\n";
  user += "\nReturn only the code that replaces <stub>.";
  req.messages.push_back({"user", std::move(user)});
  req.metadata["task"] = "codegen";
  req.metadata["grammar"] = scaffold.grammar_id;
  req.metadata["goal_index"] = std::to_string(goal.index);
  return req;
}

std::string prepare_stub(const Scaffold& scaffold, const std::string& raw) {
  auto lines = text::split_lines(text::strip_code_fences(raw));

  // Echoed scaffold: keep what lies between the preamble's last line and
  // the postamble's first line. A short postamble head such as "}" only
  // counts when the preamble was echoed too and it sits at the same
  // indentation, so nested closers inside the stub survive.
  const auto pre_tail = last_code_line(scaffold.preamble);
  const auto post_head = first_code_line(scaffold.postamble);
  bool echoed = false;
  if (!pre_tail.empty()) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]) == pre_tail) {
        lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        echoed = true;
        break;
      }
    }
  }
  const auto post_head_text = text::trim(post_head);
  if (!post_head_text.empty() && (echoed || post_head_text.size() >= 4)) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (rtrim(lines[i]) == post_head) {
        lines.resize(i);
        break;
      }
    }
  }

  std::size_t start = 0;
  while (start < lines.size() && (is_blank(lines[start]) || looks_like_prose(lines[start]))) ++start;
  lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(start));
  while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
  if (lines.empty()) return {};

  // A trailing comma would break the enclosing JSON object.
  if (scaffold.language_id == "json") {
    auto& last = lines.back();
    const auto end = last.find_last_not_of(" \t");
    if (end != std::string::npos && last[end] == ',') last.erase(end);
  }

  if (!scaffold.stub_indent.empty()) {
    std::size_t common = std::string::npos;
    for (const auto& l : lines)
      if (!is_blank(l)) common = std::min(common, indent_width(l));
    for (auto& l : lines) l = is_blank(l) ? std::string() : scaffold.stub_indent + l.substr(common);
  }
  return text::join(lines, "\n");
}

std::string assemble(const Scaffold& scaffold, const std::string& stub) {
  if (text::trim(stub).empty()) raise(ErrorCode::EmptyStub, "stub is empty after post-processing");
  return scaffold.preamble + stub + scaffold.postamble;
}

}  // namespace vizpipe::viz
