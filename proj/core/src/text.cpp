#include "vizpipe/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>

namespace vizpipe::text {

std::string strip_code_fences(std::string_view reply) {
  const auto open = reply.find("```");
  if (open == std::string_view::npos) return std::string(reply);
  // Skip the language tag on the opening fence line.
  auto body_start = reply.find('\n', open);
  if (body_start == std::string_view::npos) return std::string(reply.substr(open + 3));
  ++body_start;
  const auto close = reply.find("```", body_start);
  std::string_view body = close == std::string_view::npos
                              ? reply.substr(body_start)
                              : reply.substr(body_start, close - body_start);
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  return std::string(body);
}

namespace {

// End offset (exclusive) of the balanced bracket group starting at `start`,
// honouring JSON string literals.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t start) {
  const char open = s[start];
  const char close = open == '[' ? ']' : '}';
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == open) {
      ++depth;
    } else if (c == close) {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<nlohmann::json> extract_json(std::string_view reply) {
  const std::string body = strip_code_fences(reply);
  std::string_view s = body;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '[' && s[i] != '{') continue;
    if (auto end = balanced_end(s, i)) {
      auto parsed = nlohmann::json::parse(s.substr(i, *end - i), nullptr, false);
      if (!parsed.is_discarded()) return parsed;
    }
  }
  return std::nullopt;
}

std::optional<double> first_real(std::string_view s) {
  static const std::regex re(R"([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(s.begin(), s.end(), m, re)) return std::nullopt;
  const std::string token = m.str();
  double value = 0;
  const char* first = token.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc()) return std::nullopt;
  return value;
}

std::optional<IntegerMatch> first_integer(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, value);
    if (ec != std::errc()) return std::nullopt;
    if (i > 0 && s[i - 1] == '-') value = -value;
    return IntegerMatch{value, std::string(s.substr(j))};
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    auto line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::size_t estimate_tokens(std::string_view s) noexcept { return (s.size() + 3) / 4; }

}  // namespace vizpipe::text
