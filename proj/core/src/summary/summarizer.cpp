#include "vizpipe/summary/summarizer.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/rng.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::summary {

std::string to_string(EnrichmentStatus s) {
  switch (s) {
    case EnrichmentStatus::Base: return "base";
    case EnrichmentStatus::LlmEnriched: return "llm_enriched";
    case EnrichmentStatus::UserRefined: return "user_refined";
  }
  return "base";
}

EnrichmentStatus enrichment_status_from_string(std::string_view s) {
  if (s == "base") return EnrichmentStatus::Base;
  if (s == "llm_enriched") return EnrichmentStatus::LlmEnriched;
  if (s == "user_refined") return EnrichmentStatus::UserRefined;
  raise(ErrorCode::ParseError, "unknown enrichment status: " + std::string(s));
}

std::string to_string(SummaryCondition c) {
  switch (c) {
    case SummaryCondition::NoEnrich: return "no_enrich";
    case SummaryCondition::Enrich: return "enrich";
    case SummaryCondition::Schema: return "schema";
    case SummaryCondition::NoSummary: return "no_summary";
  }
  return "no_enrich";
}

SummaryCondition summary_condition_from_string(std::string_view s) {
  if (s == "no_enrich") return SummaryCondition::NoEnrich;
  if (s == "enrich") return SummaryCondition::Enrich;
  if (s == "schema") return SummaryCondition::Schema;
  if (s == "no_summary") return SummaryCondition::NoSummary;
  raise(ErrorCode::ConfigError, "unknown summary condition: " + std::string(s));
}

const std::vector<SummaryCondition>& all_conditions() {
  static const std::vector<SummaryCondition> all = {SummaryCondition::NoEnrich, SummaryCondition::Enrich,
                                                    SummaryCondition::Schema, SummaryCondition::NoSummary};
  return all;
}

const FieldProfile* DatasetSummary::find(std::string_view field) const {
  for (const auto& f : fields)
    if (f.name == field) return &f;
  return nullptr;
}

std::vector<std::string> DatasetSummary::field_names() const {
  std::vector<std::string> names;
  names.reserve(fields.size());
  for (const auto& f : fields) names.push_back(f.name);
  return names;
}

namespace {

double as_double(const Scalar& s) {
  if (const auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&s)) return *d;
  return 0.0;
}

bool has_range(AtomicType t) {
  return t == AtomicType::Integer || t == AtomicType::Float || t == AtomicType::Date;
}

}  // namespace

FieldProfile profile_column(const Column& column, int sample_n, std::uint64_t rng_seed) {
  if (sample_n < 1) raise(ErrorCode::PreconditionViolation, "sample_n must be positive");
  FieldProfile p;
  p.name = column.name;
  p.atomic_type = column.type;
  p.stats.n_rows = column.cells.size();

  std::set<Scalar> seen;
  std::vector<Scalar> distinct;
  for (const auto& cell : column.cells) {
    if (!cell) {
      ++p.stats.n_null;
      continue;
    }
    if (seen.insert(*cell).second) distinct.push_back(*cell);
    if (!has_range(column.type)) continue;
    if (column.type == AtomicType::Date) {
      // ISO-8601 text orders chronologically for a common format.
      const auto& s = std::get<std::string>(*cell);
      if (!p.stats.min || s < std::get<std::string>(*p.stats.min)) p.stats.min = *cell;
      if (!p.stats.max || s > std::get<std::string>(*p.stats.max)) p.stats.max = *cell;
    } else {
      const double v = as_double(*cell);
      if (!p.stats.min || v < as_double(*p.stats.min)) p.stats.min = *cell;
      if (!p.stats.max || v > as_double(*p.stats.max)) p.stats.max = *cell;
    }
  }
  p.stats.n_unique = distinct.size();
  if (distinct.empty()) p.atomic_type = AtomicType::Unknown;

  // Partial Fisher-Yates over the first-appearance ordering.
  std::mt19937_64 rng(rng_seed);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(sample_n), distinct.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, distinct.size() - i));
    std::swap(distinct[i], distinct[j]);
  }
  distinct.resize(take);
  p.samples = std::move(distinct);
  return p;
}

DatasetSummary build_base_summary(const Table& table, int sample_n, std::uint64_t rng_seed) {
  if (table.columns.empty() || table.row_count() == 0) raise(ErrorCode::EmptyDataset, "table has no rows");
  DatasetSummary s;
  s.name = table.name;
  s.source_path = table.source_path;
  s.row_count = table.row_count();
  s.enrichment_status = EnrichmentStatus::Base;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    // Per-column seeds keep columns independent of each other's size.
    s.fields.push_back(profile_column(table.columns[i], sample_n, rng_seed + i));
  }
  return s;
}

namespace {

constexpr const char* kEnrichSystem =
    "You are an experienced data analyst who annotates datasets. Given a dataset summary, write a one "
    "sentence description of the dataset, a short description of every field, and a semantic type for "
    "every field (e.g. country, year, temperature, miles_per_gallon, company_name).";

constexpr const char* kEnrichFormat =
    "Respond with a single JSON object and nothing else, using this shape:\n"
    "{\"dataset_description\": \"...\", \"fields\": [{\"name\": \"<field name>\", \"description\": \"...\", "
    "\"semantic_type\": \"...\"}]}\n"
    "Use the exact field names from the summary.";

}  // namespace

llm::PromptRequest build_enrichment_prompt(const DatasetSummary& summary) {
  llm::PromptRequest req;
  req.system = kEnrichSystem;
  req.messages.push_back(
      {"user", "Dataset summary:\n" + render_summary(summary, SummaryCondition::NoEnrich) + "\n\n" + kEnrichFormat});
  req.metadata = {{"task", "enrich"}, {"dataset", summary.name}};
  return req;
}

EnrichmentOutcome enrich_summary(const DatasetSummary& summary, llm::TextProvider& provider,
                                 const llm::GenerationConfig& config) {
  if (summary.enrichment_status == EnrichmentStatus::LlmEnriched)
    raise(ErrorCode::PreconditionViolation, "summary is already enriched");
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  const auto response = provider.generate(build_enrichment_prompt(summary), single);

  EnrichmentOutcome out{summary, std::nullopt};
  auto fail = [&](std::string why) {
    spdlog::warn("enrichment for '{}' not applied: {}", summary.name, why);
    out.summary = summary;
    out.warning = std::move(why);
    return out;
  };

  if (response.candidates.empty()) return fail("empty reply");
  auto parsed = text::extract_json(response.candidates.front());
  if (!parsed || !parsed->is_object()) return fail("reply contains no JSON object");
  const auto& j = *parsed;
  const bool has_desc = j.contains("dataset_description") && j["dataset_description"].is_string();
  const bool has_fields = j.contains("fields") && j["fields"].is_array();
  if (!has_desc && !has_fields) return fail("reply lacks dataset_description and fields");

  if (has_desc) out.summary.description = j["dataset_description"].get<std::string>();
  if (has_fields) {
    for (const auto& f : j["fields"]) {
      if (!f.is_object() || !f.contains("name") || !f["name"].is_string()) continue;
      const auto name = f["name"].get<std::string>();
      auto it = std::find_if(out.summary.fields.begin(), out.summary.fields.end(),
                             [&](const FieldProfile& p) { return p.name == name; });
      if (it == out.summary.fields.end()) continue;
      if (f.contains("description") && f["description"].is_string())
        it->description = f["description"].get<std::string>();
      if (f.contains("semantic_type") && f["semantic_type"].is_string())
        it->semantic_type = f["semantic_type"].get<std::string>();
    }
  }
  out.summary.enrichment_status = EnrichmentStatus::LlmEnriched;
  return out;
}

SummaryEdits summary_edits_from_json(const nlohmann::json& j) {
  SummaryEdits edits;
  if (!j.is_object()) raise(ErrorCode::PreconditionViolation, "summary edits must be a JSON object");
  if (j.contains("description") && j["description"].is_string()) edits.description = j["description"].get<std::string>();
  if (j.contains("fields")) {
    for (const auto& [name, e] : j["fields"].items()) {
      FieldEdit fe;
      if (e.contains("description") && e["description"].is_string()) fe.description = e["description"].get<std::string>();
      if (e.contains("semantic_type") && e["semantic_type"].is_string())
        fe.semantic_type = e["semantic_type"].get<std::string>();
      edits.fields.emplace(name, std::move(fe));
    }
  }
  return edits;
}

DatasetSummary apply_user_refinement(const DatasetSummary& summary, const SummaryEdits& edits) {
  for (const auto& [name, _] : edits.fields)
    if (!summary.find(name)) raise(ErrorCode::UnknownField, "unknown field: " + name, {{"field", name}});
  DatasetSummary out = summary;
  if (edits.description) out.description = edits.description;
  for (auto& f : out.fields) {
    auto it = edits.fields.find(f.name);
    if (it == edits.fields.end()) continue;
    if (it->second.description) f.description = it->second.description;
    if (it->second.semantic_type) f.semantic_type = it->second.semantic_type;
  }
  out.enrichment_status = EnrichmentStatus::UserRefined;
  return out;
}

namespace {

std::string render_scalar(const Scalar& s) {
  if (const auto* d = std::get_if<double>(&s)) return text::format_double(*d);
  return scalar_to_json(s).dump();
}

}  // namespace

std::string render_summary(const DatasetSummary& summary, SummaryCondition condition) {
  if (condition == SummaryCondition::NoSummary) return "";
  std::ostringstream out;
  if (condition == SummaryCondition::Schema) {
    out << "fields:\n";
    for (const auto& f : summary.fields) out << "- " << f.name << '\n';
    return out.str();
  }
  const bool enriched = condition == SummaryCondition::Enrich;
  out << "dataset: " << summary.name << '\n';
  if (enriched && summary.description) out << "description: " << *summary.description << '\n';
  out << "fields:\n";
  for (const auto& f : summary.fields) {
    out << "- name: " << f.name << '\n';
    out << "  type: " << to_string(f.atomic_type) << '\n';
    if (enriched && f.semantic_type) out << "  semantic_type: " << *f.semantic_type << '\n';
    if (enriched && f.description) out << "  description: " << *f.description << '\n';
    if (f.stats.min) out << "  min: " << render_scalar(*f.stats.min) << '\n';
    if (f.stats.max) out << "  max: " << render_scalar(*f.stats.max) << '\n';
    out << "  n_unique: " << f.stats.n_unique << '\n';
    out << "  samples: [";
    for (std::size_t i = 0; i < f.samples.size(); ++i) out << (i ? ", " : "") << render_scalar(f.samples[i]);
    out << "]\n";
  }
  return out.str();
}

namespace {

nlohmann::json opt_scalar(const std::optional<Scalar>& s) { return s ? scalar_to_json(*s) : nlohmann::json(nullptr); }

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

Scalar coerce(const nlohmann::json& j, AtomicType t) {
  if (t == AtomicType::Float && j.is_number()) return j.get<double>();
  return scalar_from_json(j);
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

void to_json(nlohmann::json& j, const FieldProfile& f) {
  auto samples = nlohmann::json::array();
  for (const auto& s : f.samples) samples.push_back(scalar_to_json(s));
  j = {{"name", f.name},
       {"atomic_type", to_string(f.atomic_type)},
       {"stats",
        {{"min", opt_scalar(f.stats.min)},
         {"max", opt_scalar(f.stats.max)},
         {"n_unique", f.stats.n_unique},
         {"n_null", f.stats.n_null},
         {"n_rows", f.stats.n_rows}}},
       {"samples", std::move(samples)},
       {"semantic_type", opt(f.semantic_type)},
       {"description", opt(f.description)}};
}

void from_json(const nlohmann::json& j, FieldProfile& f) {
  f = FieldProfile{};
  f.name = j.at("name").get<std::string>();
  f.atomic_type = atomic_type_from_string(j.at("atomic_type").get<std::string>());
  const auto& st = j.at("stats");
  if (!st.at("min").is_null()) f.stats.min = coerce(st["min"], f.atomic_type);
  if (!st.at("max").is_null()) f.stats.max = coerce(st["max"], f.atomic_type);
  f.stats.n_unique = st.at("n_unique").get<std::size_t>();
  f.stats.n_null = st.at("n_null").get<std::size_t>();
  f.stats.n_rows = st.at("n_rows").get<std::size_t>();
  for (const auto& s : j.at("samples")) f.samples.push_back(coerce(s, f.atomic_type));
  f.semantic_type = opt_string(j, "semantic_type");
  f.description = opt_string(j, "description");
}

void to_json(nlohmann::json& j, const DatasetSummary& s) {
  j = {{"name", s.name},
       {"source_path", s.source_path},
       {"description", opt(s.description)},
       {"fields", s.fields},
       {"row_count", s.row_count},
       {"enrichment_status", to_string(s.enrichment_status)}};
}

void from_json(const nlohmann::json& j, DatasetSummary& s) {
  s = DatasetSummary{};
  s.name = j.at("name").get<std::string>();
  s.source_path = j.value("source_path", "");
  s.description = opt_string(j, "description");
  s.fields = j.at("fields").get<std::vector<FieldProfile>>();
  s.row_count = j.at("row_count").get<std::size_t>();
  s.enrichment_status = enrichment_status_from_string(j.value("enrichment_status", "base"));
  std::unordered_set<std::string> names;
  for (const auto& f : s.fields) {
    if (!names.insert(f.name).second) raise(ErrorCode::ParseError, "duplicate field name: " + f.name);
    if (f.stats.n_rows != s.row_count) raise(ErrorCode::ParseError, "row_count mismatch for field " + f.name);
  }
}

}  // namespace vizpipe::summary
