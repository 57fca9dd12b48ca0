#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/llm/provider.hpp"
#include "vizpipe/summary/table.hpp"

namespace vizpipe::summary {

inline constexpr int kDefaultSampleN = 5;

struct FieldStats {
  std::optional<Scalar> min;
  std::optional<Scalar> max;
  std::size_t n_unique = 0;
  std::size_t n_null = 0;
  std::size_t n_rows = 0;
  bool operator==(const FieldStats&) const = default;
};

struct FieldProfile {
  std::string name;
  AtomicType atomic_type = AtomicType::Unknown;
  FieldStats stats;
  std::vector<Scalar> samples;  // distinct, non-null, seeded draw
  std::optional<std::string> semantic_type;
  std::optional<std::string> description;
  bool operator==(const FieldProfile&) const = default;
};

enum class EnrichmentStatus { Base, LlmEnriched, UserRefined };

struct DatasetSummary {
  std::string name;
  std::string source_path;
  std::optional<std::string> description;
  std::vector<FieldProfile> fields;
  std::size_t row_count = 0;
  EnrichmentStatus enrichment_status = EnrichmentStatus::Base;

  const FieldProfile* find(std::string_view field) const;
  std::vector<std::string> field_names() const;
  bool operator==(const DatasetSummary&) const = default;
};

/// Summary ablation settings. `Enrich` renders descriptions and semantic
/// types; `NoEnrich` renders only the rule-based profile.
enum class SummaryCondition { NoEnrich, Enrich, Schema, NoSummary };

std::string to_string(EnrichmentStatus s);
EnrichmentStatus enrichment_status_from_string(std::string_view s);
std::string to_string(SummaryCondition c);
SummaryCondition summary_condition_from_string(std::string_view s);
const std::vector<SummaryCondition>& all_conditions();

/// Stats over non-null values; min/max only for numeric and date columns.
/// Samples are drawn without replacement from the distinct non-null values.
FieldProfile profile_column(const Column& column, int sample_n, std::uint64_t rng_seed);

/// Rule-based stage: profiles every column. Throws EmptyDataset.
DatasetSummary build_base_summary(const Table& table, int sample_n = kDefaultSampleN, std::uint64_t rng_seed = 0);

struct EnrichmentOutcome {
  DatasetSummary summary;
  std::optional<std::string> warning;  // set when the reply could not be merged
};

/// Model stage: one provider call returning dataset description, field
/// descriptions and semantic types. Parse failures are non-fatal and leave
/// the summary unchanged. ProviderUnavailable propagates.
EnrichmentOutcome enrich_summary(const DatasetSummary& summary, llm::TextProvider& provider,
                                 const llm::GenerationConfig& config);

/// The prompt enrich_summary sends.
llm::PromptRequest build_enrichment_prompt(const DatasetSummary& summary);

struct FieldEdit {
  std::optional<std::string> description;
  std::optional<std::string> semantic_type;
};

struct SummaryEdits {
  std::optional<std::string> description;
  std::map<std::string, FieldEdit> fields;
};

SummaryEdits summary_edits_from_json(const nlohmann::json& j);

/// Applies user overrides; stats are never touched. Throws UnknownField.
DatasetSummary apply_user_refinement(const DatasetSummary& summary, const SummaryEdits& edits);

/// Deterministic key: value text embedded in downstream prompts.
std::string render_summary(const DatasetSummary& summary, SummaryCondition condition);

void to_json(nlohmann::json& j, const FieldProfile& f);
void from_json(const nlohmann::json& j, FieldProfile& f);
void to_json(nlohmann::json& j, const DatasetSummary& s);
void from_json(const nlohmann::json& j, DatasetSummary& s);

}  // namespace vizpipe::summary
