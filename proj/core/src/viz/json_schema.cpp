#include "vizpipe/viz/json_schema.hpp"

#include <fmt/format.h>

#include "vizpipe/error.hpp"

namespace vizpipe::viz {

namespace {

constexpr int kMaxDepth = 64;

bool type_matches(const std::string& type, const nlohmann::json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
  if (type == "number") return v.is_number();
  return false;
}

std::string display(const nlohmann::json& v) {
  auto s = v.dump();
  return s.size() > 60 ? s.substr(0, 57) + "..." : s;
}

}  // namespace

const nlohmann::json& JsonSchema::resolve(const nlohmann::json& schema) const {
  if (!schema.is_object() || !schema.contains("$ref")) return schema;
  const auto ref = schema["$ref"].get<std::string>();
  if (ref.rfind("#/", 0) != 0) raise(ErrorCode::ConfigError, "only local schema references are supported: " + ref);
  const nlohmann::json* node = &root_;
  std::size_t pos = 2;
  while (pos <= ref.size()) {
    const auto slash = ref.find('/', pos);
    const auto key = ref.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
    if (!node->is_object() || !node->contains(key)) raise(ErrorCode::ConfigError, "dangling schema reference: " + ref);
    node = &(*node)[key];
    if (slash == std::string::npos) break;
    pos = slash + 1;
  }
  return resolve(*node);
}

void JsonSchema::check(const nlohmann::json& raw_schema, const nlohmann::json& v, const std::string& path,
                       std::vector<std::string>& errors, int depth) const {
  if (depth > kMaxDepth) {
    errors.push_back(path + ": schema nesting too deep");
    return;
  }
  if (raw_schema.is_boolean()) {
    if (!raw_schema.get<bool>()) errors.push_back(path + ": no value is allowed here");
    return;
  }
  const auto& s = resolve(raw_schema);
  const std::string where = path.empty() ? "/" : path;

  if (s.contains("type")) {
    const auto& t = s["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(t.get<std::string>(), v);
    } else {
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), v);
    }
    if (!ok) {
      errors.push_back(fmt::format("{}: expected type {}, got {}", where, t.dump(), display(v)));
      return;
    }
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) errors.push_back(fmt::format("{}: {} is not one of {}", where, display(v), s["enum"].dump()));
  }
  if (s.contains("const") && s["const"] != v)
    errors.push_back(fmt::format("{}: expected {}", where, s["const"].dump()));

  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>())
      errors.push_back(fmt::format("{}: {} is below minimum {}", where, x, s["minimum"].dump()));
    if (s.contains("maximum") && x > s["maximum"].get<double>())
      errors.push_back(fmt::format("{}: {} is above maximum {}", where, x, s["maximum"].dump()));
  }
  if (v.is_string() && s.contains("minLength") && v.get<std::string>().size() < s["minLength"].get<std::size_t>())
    errors.push_back(fmt::format("{}: string shorter than {}", where, s["minLength"].dump()));

  if (v.is_object()) {
    if (s.contains("minProperties") && v.size() < s["minProperties"].get<std::size_t>())
      errors.push_back(fmt::format("{}: fewer than {} properties", where, s["minProperties"].dump()));
    if (s.contains("required"))
      for (const auto& key : s["required"])
        if (!v.contains(key.get<std::string>()))
          errors.push_back(fmt::format("{}: missing required property \"{}\"", where, key.get<std::string>()));
    const nlohmann::json empty = nlohmann::json::object();
    const auto& props = s.contains("properties") ? s["properties"] : empty;
    for (const auto& [key, value] : v.items()) {
      const auto child = path + "/" + key;
      if (props.contains(key)) {
        check(props[key], value, child, errors, depth + 1);
      } else if (s.contains("additionalProperties")) {
        const auto& extra = s["additionalProperties"];
        if (extra.is_boolean() && !extra.get<bool>())
          errors.push_back(fmt::format("{}: unexpected property \"{}\"", where, key));
        else if (extra.is_object())
          check(extra, value, child, errors, depth + 1);
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
      errors.push_back(fmt::format("{}: fewer than {} items", where, s["minItems"].dump()));
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
      errors.push_back(fmt::format("{}: more than {} items", where, s["maxItems"].dump()));
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i)
        check(s["items"], v[i], path + "/" + std::to_string(i), errors, depth + 1);
  }

  auto count_valid = [&](const nlohmann::json& alternatives) {
    int valid = 0;
    for (const auto& alt : alternatives) {
      std::vector<std::string> sub;
      check(alt, v, path, sub, depth + 1);
      if (sub.empty()) ++valid;
    }
    return valid;
  };
  if (s.contains("anyOf") && count_valid(s["anyOf"]) == 0)
    errors.push_back(fmt::format("{}: {} matches none of the allowed forms", where, display(v)));
  if (s.contains("oneOf") && count_valid(s["oneOf"]) != 1)
    errors.push_back(fmt::format("{}: {} must match exactly one allowed form", where, display(v)));
}

std::vector<std::string> JsonSchema::validate(const nlohmann::json& instance) const {
  std::vector<std::string> errors;
  check(root_, instance, "", errors, 0);
  return errors;
}

}  // namespace vizpipe::viz
