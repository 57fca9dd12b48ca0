#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizpipe::summary {

enum class AtomicType { Integer, Float, Boolean, String, Date, Unknown };

std::string to_string(AtomicType t);
AtomicType atomic_type_from_string(std::string_view s);

/// A typed, non-null cell value. Dates keep their ISO-8601 text.
using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using Cell = std::optional<Scalar>;

nlohmann::json scalar_to_json(const Scalar& s);
Scalar scalar_from_json(const nlohmann::json& j);

struct Column {
  std::string name;
  AtomicType type = AtomicType::Unknown;
  std::vector<Cell> cells;
};

/// In-memory columnar table. Column order follows the source file.
struct Table {
  std::string name;
  std::string source_path;
  std::vector<Column> columns;

  std::size_t row_count() const { return columns.empty() ? 0 : columns.front().cells.size(); }
  const Column* find(std::string_view column) const;
};

enum class InputFormat { Csv, JsonRecords };

/// Picks the format from the file extension (.json -> records, else csv).
InputFormat format_for(const std::filesystem::path& path);

/// Reads a CSV (RFC 4180, header row, UTF-8) or a JSON array of flat objects.
/// Empty CSV cells become null. Throws ParseError{row,column}, EmptyDataset,
/// HeaderMissing or IoError.
Table ingest(const std::filesystem::path& path, InputFormat format);
Table ingest(const std::filesystem::path& path);

Table parse_csv(std::string_view content, std::string name = "data");
Table parse_json_records(std::string_view content, std::string name = "data");

/// Column names only, without typing the body. Used by validators that
/// need to know which fields a dataset has.
std::vector<std::string> read_field_names(const std::filesystem::path& path);

/// True for YYYY-MM-DD with an optional time part ("T" or space separated,
/// optional seconds, fraction and zone designator).
bool is_iso8601(std::string_view s);

}  // namespace vizpipe::summary
