#include "vizpipe/viz/scaffold.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/resources.hpp"

namespace vizpipe::viz {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_string(ExecutionMode m) {
  return m == ExecutionMode::Subprocess ? "subprocess" : "declarative_validation";
}

ExecutionMode execution_mode_from_string(const std::string& s) {
  if (s == "subprocess") return ExecutionMode::Subprocess;
  if (s == "declarative_validation") return ExecutionMode::DeclarativeValidation;
  raise(ErrorCode::ConfigError, "unknown execution mode: " + s);
}

Scaffold ScaffoldLibrary::from_template(const std::string& text, std::string grammar_id, std::string language_id,
                                        ExecutionMode mode) {
  const auto first = text.find(kStubMarker);
  if (first == std::string::npos)
    raise(ErrorCode::ConfigError, fmt::format("scaffold {} has no {} marker", grammar_id, kStubMarker));
  const std::string marker = kStubMarker;
  if (text.find(marker, first + marker.size()) != std::string::npos)
    raise(ErrorCode::ConfigError, fmt::format("scaffold {} has more than one {} marker", grammar_id, marker));
  Scaffold s;
  s.grammar_id = std::move(grammar_id);
  s.language_id = std::move(language_id);
  s.execution_mode = mode;
  s.preamble = text.substr(0, first);
  s.postamble = text.substr(first + marker.size());
  return s;
}

ScaffoldLibrary ScaffoldLibrary::load(const std::filesystem::path& registry_file) {
  nlohmann::json registry;
  try {
    registry = nlohmann::json::parse(read_file(registry_file));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigError, fmt::format("grammar registry {}: {}", registry_file.string(), e.what()));
  }
  if (!registry.is_array()) raise(ErrorCode::ConfigError, "grammar registry must be a JSON array");
  const auto base = registry_file.parent_path();

  ScaffoldLibrary lib;
  for (const auto& entry : registry) {
    try {
      const auto id = entry.at("grammar_id").get<std::string>();
      if (lib.scaffolds_.count(id)) raise(ErrorCode::ConfigError, "duplicate grammar id: " + id);
      auto s = from_template(read_file(base / entry.at("scaffold_path").get<std::string>()), id,
                             entry.at("language_id").get<std::string>(),
                             execution_mode_from_string(entry.at("execution_mode").get<std::string>()));
      s.stub_indent = entry.value("stub_indent", "");
      s.self_test_stub = entry.value("self_test_stub", "");
      s.prompt_hint = entry.value("prompt_hint", "");
      s.program_extension = entry.value("program_extension", s.program_extension);
      if (entry.contains("runner")) s.runner = entry["runner"].get<std::vector<std::string>>();
      if (entry.contains("schema_path"))
        s.schema = std::make_shared<const JsonSchema>(
            nlohmann::json::parse(read_file(base / entry["schema_path"].get<std::string>())));
      if (s.execution_mode == ExecutionMode::Subprocess && s.runner.empty())
        raise(ErrorCode::ConfigError, "subprocess grammar without runner: " + id);
      if (s.execution_mode == ExecutionMode::DeclarativeValidation && !s.schema)
        raise(ErrorCode::ConfigError, "declarative grammar without schema: " + id);
      lib.scaffolds_.emplace(id, std::move(s));
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::ConfigError, fmt::format("bad grammar registry entry {}: {}", entry.dump(), e.what()));
    }
  }
  return lib;
}

const ScaffoldLibrary& ScaffoldLibrary::bundled() {
  static const ScaffoldLibrary lib = load(resources_dir() / "grammars.json");
  return lib;
}

const Scaffold& ScaffoldLibrary::get(const std::string& grammar_id) const {
  auto it = scaffolds_.find(grammar_id);
  if (it == scaffolds_.end())
    raise(ErrorCode::UnknownGrammar, "unknown grammar: " + grammar_id, {{"known", grammar_ids()}});
  return it->second;
}

std::vector<std::string> ScaffoldLibrary::grammar_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : scaffolds_) ids.push_back(id);
  return ids;
}

nlohmann::json ScaffoldLibrary::describe() const {
  auto out = nlohmann::json::array();
  for (const auto& [id, s] : scaffolds_)
    out.push_back({{"grammar_id", id},
                   {"language_id", s.language_id},
                   {"execution_mode", to_string(s.execution_mode)},
                   {"template", s.template_text()}});
  return out;
}

}  // namespace vizpipe::viz
