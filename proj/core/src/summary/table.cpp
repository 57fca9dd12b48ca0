#include "vizpipe/summary/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::summary {

std::string to_string(AtomicType t) {
  switch (t) {
    case AtomicType::Integer: return "integer";
    case AtomicType::Float: return "float";
    case AtomicType::Boolean: return "boolean";
    case AtomicType::String: return "string";
    case AtomicType::Date: return "date";
    case AtomicType::Unknown: return "unknown";
  }
  return "unknown";
}

AtomicType atomic_type_from_string(std::string_view s) {
  if (s == "integer") return AtomicType::Integer;
  if (s == "float") return AtomicType::Float;
  if (s == "boolean") return AtomicType::Boolean;
  if (s == "string") return AtomicType::String;
  if (s == "date") return AtomicType::Date;
  if (s == "unknown") return AtomicType::Unknown;
  raise(ErrorCode::ParseError, "unknown atomic type: " + std::string(s));
}

nlohmann::json scalar_to_json(const Scalar& s) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, s);
}

Scalar scalar_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  raise(ErrorCode::ParseError, "not a scalar: " + j.dump());
}

const Column* Table::find(std::string_view column) const {
  for (const auto& c : columns)
    if (c.name == column) return &c;
  return nullptr;
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool in_range(std::string_view digits, int lo, int hi) {
  int v = 0;
  std::from_chars(digits.data(), digits.data() + digits.size(), v);
  return v >= lo && v <= hi;
}

}  // namespace

bool is_iso8601(std::string_view s) {
  // YYYY-MM-DD
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return false;
  if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2))) return false;
  if (!in_range(s.substr(5, 2), 1, 12) || !in_range(s.substr(8, 2), 1, 31)) return false;
  if (s.size() == 10) return true;
  // [T ]HH:MM[:SS[.fff]][Z|+HH:MM|+HHMM]
  if (s[10] != 'T' && s[10] != ' ') return false;
  auto rest = s.substr(11);
  if (rest.size() < 5 || rest[2] != ':' || !all_digits(rest.substr(0, 2)) || !all_digits(rest.substr(3, 2)))
    return false;
  if (!in_range(rest.substr(0, 2), 0, 23) || !in_range(rest.substr(3, 2), 0, 59)) return false;
  rest.remove_prefix(5);
  if (rest.size() >= 3 && rest[0] == ':') {
    if (!all_digits(rest.substr(1, 2)) || !in_range(rest.substr(1, 2), 0, 60)) return false;
    rest.remove_prefix(3);
    if (!rest.empty() && rest[0] == '.') {
      std::size_t n = 1;
      while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
      if (n == 1) return false;
      rest.remove_prefix(n);
    }
  }
  if (rest.empty() || rest == "Z") return true;
  if (rest[0] != '+' && rest[0] != '-') return false;
  rest.remove_prefix(1);
  if (rest.size() == 5 && rest[2] == ':') return all_digits(rest.substr(0, 2)) && all_digits(rest.substr(3, 2));
  return rest.size() == 4 && all_digits(rest);
}

namespace {

// Join of the inference lattice: Unknown < Integer < Float < String, with
// Boolean only compatible with itself.
AtomicType unify(AtomicType a, AtomicType b) {
  if (a == AtomicType::Unknown) return b;
  if (b == AtomicType::Unknown || a == b) return a;
  const bool numeric_a = a == AtomicType::Integer || a == AtomicType::Float;
  const bool numeric_b = b == AtomicType::Integer || b == AtomicType::Float;
  if (numeric_a && numeric_b) return AtomicType::Float;
  return AtomicType::String;
}

constexpr double kDateShare = 0.9;

struct RawCell {
  AtomicType type = AtomicType::Unknown;  // Unknown == null
  Scalar value;
  std::string text;  // textual form, used when the column widens to string
};

RawCell classify_text(std::string_view s) {
  RawCell cell;
  if (s.empty()) return cell;
  cell.text = std::string(s);
  {
    std::int64_t v = 0;
    const char* first = s.data() + (s.front() == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && first != ptr) {
      cell.type = AtomicType::Integer;
      cell.value = v;
      return cell;
    }
  }
  {
    double v = 0;
    const char* first = s.data() + (s.front() == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v)) {
      cell.type = AtomicType::Float;
      cell.value = v;
      return cell;
    }
  }
  const auto lower = text::to_lower(s);
  if (lower == "true" || lower == "false") {
    cell.type = AtomicType::Boolean;
    cell.value = lower == "true";
    return cell;
  }
  cell.type = AtomicType::String;
  cell.value = std::string(s);
  return cell;
}

RawCell classify_json(const nlohmann::json& v, std::size_t row, const std::string& column) {
  RawCell cell;
  if (v.is_null()) return cell;
  if (v.is_object() || v.is_array())
    raise(ErrorCode::ParseError, "nested value in json_records", {{"row", row}, {"column", column}});
  if (v.is_boolean()) {
    cell.type = AtomicType::Boolean;
    cell.value = v.get<bool>();
    cell.text = v.dump();
  } else if (v.is_number_integer()) {
    cell.type = AtomicType::Integer;
    cell.value = v.get<std::int64_t>();
    cell.text = v.dump();
  } else if (v.is_number()) {
    cell.type = AtomicType::Float;
    cell.value = v.get<double>();
    cell.text = v.dump();
  } else {
    cell.type = AtomicType::String;
    cell.value = v.get<std::string>();
    cell.text = v.get<std::string>();
  }
  return cell;
}

Column finalize_column(std::string name, const std::vector<RawCell>& raw) {
  Column col;
  col.name = std::move(name);
  for (const auto& c : raw) col.type = unify(col.type, c.type);

  if (col.type == AtomicType::String) {
    std::size_t non_null = 0;
    std::size_t dates = 0;
    for (const auto& c : raw) {
      if (c.type == AtomicType::Unknown) continue;
      ++non_null;
      if (is_iso8601(c.text)) ++dates;
    }
    if (non_null > 0 && static_cast<double>(dates) >= kDateShare * static_cast<double>(non_null))
      col.type = AtomicType::Date;
  }

  col.cells.reserve(raw.size());
  for (const auto& c : raw) {
    if (c.type == AtomicType::Unknown) {
      col.cells.emplace_back(std::nullopt);
      continue;
    }
    switch (col.type) {
      case AtomicType::Float:
        col.cells.emplace_back(c.type == AtomicType::Integer
                                   ? Scalar(static_cast<double>(std::get<std::int64_t>(c.value)))
                                   : c.value);
        break;
      case AtomicType::String:
        col.cells.emplace_back(Scalar(c.text));
        break;
      case AtomicType::Date:
        // Values that do not parse as dates are coerced to null.
        if (is_iso8601(c.text))
          col.cells.emplace_back(Scalar(c.text));
        else
          col.cells.emplace_back(std::nullopt);
        break;
      default:
        col.cells.emplace_back(c.value);
    }
  }
  return col;
}

std::vector<std::string> dedupe_names(std::vector<std::string> names) {
  std::unordered_map<std::string, int> seen;
  std::unordered_set<std::string> used(names.begin(), names.end());
  for (auto& n : names) {
    int& count = seen[n];
    if (count++ == 0) continue;
    std::string candidate;
    do {
      candidate = n + "." + std::to_string(count - 1);
      ++count;
    } while (used.count(candidate));
    used.insert(candidate);
    n = candidate;
  }
  return names;
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line;
};

// RFC 4180 tokenizer. Stops after `max_records` records when nonzero.
std::vector<CsvRecord> tokenize_csv(std::string_view s, std::size_t max_records = 0) {
  std::vector<CsvRecord> records;
  if (s.size() >= 3 && s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
  CsvRecord current{{}, 1};
  std::string field;
  std::size_t line = 1;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // Blank lines are skipped.
    if (record_has_content || current.fields.size() > 1) records.push_back(std::move(current));
    current = CsvRecord{{}, line};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted)
          raise(ErrorCode::ParseError, "stray quote inside unquoted field",
                {{"row", records.size()}, {"column", current.fields.size()}});
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < s.size() && s[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        ++line;
        end_record();
        if (max_records && records.size() >= max_records) return records;
        break;
      default:
        field += c;
        record_has_content = true;
    }
  }
  if (in_quotes)
    raise(ErrorCode::ParseError, "unterminated quoted field",
          {{"row", records.size()}, {"column", current.fields.size()}});
  if (record_has_content || !field.empty() || !current.fields.empty()) end_record();
  return records;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Table parse_csv(std::string_view content, std::string name) {
  auto records = tokenize_csv(content);
  if (records.empty()) raise(ErrorCode::HeaderMissing, "csv has no header row");
  auto header = dedupe_names(records.front().fields);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (text::trim(header[c]).empty())
      raise(ErrorCode::HeaderMissing, "empty column name in header", {{"row", 0}, {"column", c}});
  if (records.size() == 1) raise(ErrorCode::EmptyDataset, "csv has a header but no rows");

  const std::size_t n_rows = records.size() - 1;
  std::vector<std::vector<RawCell>> raw(header.size(), std::vector<RawCell>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& rec = records[r + 1];
    if (rec.fields.size() != header.size())
      raise(ErrorCode::ParseError,
            "row " + std::to_string(r + 1) + " has " + std::to_string(rec.fields.size()) + " fields, expected " +
                std::to_string(header.size()),
            {{"row", r + 1}, {"column", std::min(rec.fields.size(), header.size() - 1)}, {"line", rec.line}});
    for (std::size_t c = 0; c < header.size(); ++c) raw[c][r] = classify_text(rec.fields[c]);
  }

  Table table;
  table.name = std::move(name);
  for (std::size_t c = 0; c < header.size(); ++c) table.columns.push_back(finalize_column(header[c], raw[c]));
  return table;
}

Table parse_json_records(std::string_view content, std::string name) {
  auto doc = nlohmann::json::parse(content, nullptr, false);
  if (doc.is_discarded()) raise(ErrorCode::ParseError, "json_records is not valid JSON", {{"row", 0}, {"column", ""}});
  if (!doc.is_array()) raise(ErrorCode::ParseError, "json_records must be an array", {{"row", 0}, {"column", ""}});
  if (doc.empty()) raise(ErrorCode::EmptyDataset, "json_records array is empty");

  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    if (!doc[r].is_object())
      raise(ErrorCode::ParseError, "record is not an object", {{"row", r}, {"column", ""}});
    // items() iterates in sorted key order; use the ordered parser for
    // first-appearance column order.
  }
  auto ordered = nlohmann::ordered_json::parse(content);
  for (const auto& rec : ordered)
    for (const auto& [k, v] : rec.items())
      if (!index.count(k)) {
        index.emplace(k, names.size());
        names.push_back(k);
      }
  if (names.empty()) raise(ErrorCode::HeaderMissing, "records have no keys");

  std::vector<std::vector<RawCell>> raw(names.size(), std::vector<RawCell>(doc.size()));
  for (std::size_t r = 0; r < doc.size(); ++r)
    for (const auto& [k, v] : doc[r].items()) raw[index.at(k)][r] = classify_json(v, r, k);

  Table table;
  table.name = std::move(name);
  for (std::size_t c = 0; c < names.size(); ++c) table.columns.push_back(finalize_column(names[c], raw[c]));
  return table;
}

InputFormat format_for(const std::filesystem::path& path) {
  return text::to_lower(path.extension().string()) == ".json" ? InputFormat::JsonRecords : InputFormat::Csv;
}

Table ingest(const std::filesystem::path& path, InputFormat format) {
  const auto content = read_file(path);
  const auto name = path.stem().string();
  Table t = format == InputFormat::Csv ? parse_csv(content, name) : parse_json_records(content, name);
  t.source_path = path.string();
  return t;
}

Table ingest(const std::filesystem::path& path) { return ingest(path, format_for(path)); }

std::vector<std::string> read_field_names(const std::filesystem::path& path) {
  const auto content = read_file(path);
  if (format_for(path) == InputFormat::JsonRecords) {
    std::vector<std::string> names;
    auto doc = nlohmann::ordered_json::parse(content, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) raise(ErrorCode::ParseError, "json_records must be an array");
    for (const auto& rec : doc)
      if (rec.is_object())
        for (const auto& [k, v] : rec.items())
          if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
    return names;
  }
  auto records = tokenize_csv(content, 1);
  if (records.empty()) raise(ErrorCode::HeaderMissing, "csv has no header row");
  return dedupe_names(records.front().fields);
}

}  // namespace vizpipe::summary
