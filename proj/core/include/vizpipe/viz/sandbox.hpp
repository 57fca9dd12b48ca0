#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/viz/scaffold.hpp"

namespace vizpipe::viz {

enum class CandidateStatus { Unexecuted, CompiledOk, CompileError, RuntimeError, Timeout };

std::string to_string(CandidateStatus s);
CandidateStatus candidate_status_from_string(const std::string& s);
bool is_error(CandidateStatus s);

struct Artifact {
  std::string kind;  // "png" or "spec"
  std::filesystem::path path;
  nlohmann::json spec;  // validated spec for declarative grammars
  bool operator==(const Artifact&) const = default;
};

struct CandidateProgram {
  int goal_index = 0;
  int candidate_index = 0;
  std::string scaffold_ref;
  std::string stub;
  std::string assembled_code;
  CandidateStatus status = CandidateStatus::Unexecuted;
  std::optional<std::string> error_detail;
  std::optional<Artifact> artifact;
  std::optional<double> correctness_score;
  // Paths created or modified outside the run's working directory.
  std::vector<std::string> sandbox_violations;
  bool operator==(const CandidateProgram&) const = default;
};

void to_json(nlohmann::json& j, const CandidateProgram& c);
void from_json(const nlohmann::json& j, CandidateProgram& c);

struct ExecutionLimits {
  double timeout_s = 30.0;
  int memory_mb = 2048;  // address space; the Python plotting stack maps large regions up front
};

struct SandboxOptions {
  std::filesystem::path root;  // defaults to a per-process temp directory
  // Extra directories whose contents must not change during a run.
  std::vector<std::filesystem::path> audit_paths;
  // Audit the dataset's directory as well.
  bool audit_dataset_dir = true;
  int max_parallel = 2;
};

/// Runs candidate programs, each in its own directory <root>/run-N/work.
/// Before and after each run the executor snapshots run-N (minus work/)
/// and the audit paths; any file created or modified there marks the run
/// as a runtime_error.
class Sandbox {
 public:
  explicit Sandbox(SandboxOptions options = {}, const ScaffoldLibrary* library = nullptr);

  /// Never throws for program failures; the outcome is in status and
  /// error_detail. Returns `candidate` unchanged unless it is unexecuted.
  CandidateProgram execute(CandidateProgram candidate, const std::filesystem::path& dataset_path,
                           const ExecutionLimits& limits) const;

  /// execute() over all candidates with at most options.max_parallel
  /// running at once. Order is preserved.
  std::vector<CandidateProgram> execute_all(std::vector<CandidateProgram> candidates,
                                            const std::filesystem::path& dataset_path,
                                            const ExecutionLimits& limits) const;

  const std::filesystem::path& root() const { return options_.root; }
  const SandboxOptions& options() const { return options_; }

  static Sandbox& shared();

 private:
  std::filesystem::path next_run_dir() const;

  SandboxOptions options_;
  const ScaffoldLibrary* library_;
  mutable std::atomic<std::size_t> run_counter_{0};
};

/// Convenience wrapper over Sandbox::shared().
CandidateProgram execute(CandidateProgram candidate, const std::filesystem::path& dataset_path,
                         const ExecutionLimits& limits = {});

/// Number of child processes started by any sandbox in this process.
std::size_t spawned_process_count();

/// Field names a declarative spec refers to through "field" keys.
std::vector<std::string> spec_field_references(const nlohmann::json& spec);
/// Names a spec's transforms introduce ("as" targets, fold outputs).
std::vector<std::string> spec_derived_fields(const nlohmann::json& spec);

}  // namespace vizpipe::viz
