#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/viz/json_schema.hpp"

namespace vizpipe::viz {

enum class ExecutionMode { Subprocess, DeclarativeValidation };

std::string to_string(ExecutionMode m);
ExecutionMode execution_mode_from_string(const std::string& s);

inline constexpr const char* kStubMarker = "<stub>";
/// Placeholder in declarative scaffolds replaced by the dataset path at
/// execution time.
inline constexpr const char* kDatasetPlaceholder = "{{dataset_path}}";

/// An executable program template with a single hole the model fills.
struct Scaffold {
  std::string grammar_id;
  std::string language_id;
  std::string preamble;
  std::string stub_marker = kStubMarker;
  std::string postamble;
  ExecutionMode execution_mode = ExecutionMode::Subprocess;

  // Indentation every stub line must carry (e.g. a function body).
  std::string stub_indent;
  // A stub producing an empty chart; used by the scaffold self-test.
  std::string self_test_stub;
  // Grammar-specific guidance appended to code-generation prompts.
  std::string prompt_hint;
  // Child command for subprocess grammars. Tokens {program}, {dataset} and
  // {artifact} are substituted.
  std::vector<std::string> runner;
  std::string program_extension = ".txt";
  // Schema for declarative grammars.
  std::shared_ptr<const JsonSchema> schema;

  std::string template_text() const { return preamble + stub_marker + postamble; }
};

/// Immutable registry of scaffolds loaded from a grammar registry file:
/// a JSON array of {grammar_id, language_id, execution_mode, scaffold_path,
/// ...} with paths relative to the registry file.
class ScaffoldLibrary {
 public:
  static ScaffoldLibrary load(const std::filesystem::path& registry_file);
  /// The library bundled with the project resources.
  static const ScaffoldLibrary& bundled();

  /// Throws UnknownGrammar.
  const Scaffold& get(const std::string& grammar_id) const;
  bool contains(const std::string& grammar_id) const { return scaffolds_.count(grammar_id) != 0; }
  std::vector<std::string> grammar_ids() const;
  nlohmann::json describe() const;

  /// Splits a scaffold template at its single stub marker.
  static Scaffold from_template(const std::string& text, std::string grammar_id, std::string language_id,
                                ExecutionMode mode);

 private:
  std::map<std::string, Scaffold> scaffolds_;
};

}  // namespace vizpipe::viz
