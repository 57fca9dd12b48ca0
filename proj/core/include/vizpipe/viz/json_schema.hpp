#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizpipe::viz {

/// Validator for the JSON Schema subset used by the bundled declarative
/// grammars: type, enum, const, required, properties, additionalProperties, minProperties,
/// items, minItems, maxItems, minimum, maximum, minLength, anyOf, oneOf and
/// local "#/definitions/..." references.
class JsonSchema {
 public:
  explicit JsonSchema(nlohmann::json schema) : root_(std::move(schema)) {}

  /// Human-readable violations; empty when `instance` is valid.
  std::vector<std::string> validate(const nlohmann::json& instance) const;
  bool is_valid(const nlohmann::json& instance) const { return validate(instance).empty(); }

  const nlohmann::json& document() const { return root_; }

 private:
  void check(const nlohmann::json& schema, const nlohmann::json& instance, const std::string& path,
             std::vector<std::string>& errors, int depth) const;
  const nlohmann::json& resolve(const nlohmann::json& schema) const;

  nlohmann::json root_;
};

}  // namespace vizpipe::viz
