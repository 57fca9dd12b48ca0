#include "vizpipe/service/api.hpp"

#include <atomic>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/text.hpp"

namespace vizpipe::service {

namespace fs = std::filesystem;

namespace body {

nlohmann::json summary(const summary::DatasetSummary& s) { return s; }

nlohmann::json goals(const std::vector<goals::Goal>& g) { return g; }

nlohmann::json candidate(const viz::CandidateProgram& c, const fs::path& artifact_root) {
  nlohmann::json j = c;
  j["artifact_url"] = nullptr;
  if (c.artifact && !artifact_root.empty()) {
    const auto rel = c.artifact->path.lexically_relative(artifact_root);
    if (!rel.empty() && rel.begin()->string() != "..") j["artifact_url"] = "/artifacts/" + rel.generic_string();
  }
  return j;
}

nlohmann::json visualization(int index, const goals::Goal& goal, const viz::VisualizationResult& r,
                             const fs::path& artifact_root) {
  auto candidates = nlohmann::json::array();
  for (const auto& c : r.candidates)
    candidates.push_back({{"candidate_index", c.candidate_index},
                          {"status", viz::to_string(c.status)},
                          {"error_detail", c.error_detail ? nlohmann::json(*c.error_detail) : nlohmann::json(nullptr)}});
  return {{"index", index},
          {"goal", goal},
          {"grammar_id", r.grammar_id},
          {"candidate", candidate(r.selected, artifact_root)},
          {"candidates", candidates},
          {"summary_used", r.summary_text},
          {"scaffold_id", r.grammar_id},
          {"prompt", r.prompt}};
}

nlohmann::json error(const Error& e) {
  return {{"error", {{"class", std::string(to_string(e.code()))}, {"message", e.what()}, {"details", e.details()}}}};
}

}  // namespace body

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::SessionNotFound:
    case ErrorCode::IndexNotFound:
      return 404;
    case ErrorCode::Conflict:
      return 409;
    case ErrorCode::PayloadTooLarge:
      return 413;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::CassetteMiss:
    case ErrorCode::TokenBudgetExceeded:
    case ErrorCode::UnparseableScore:
      return 502;
    case ErrorCode::IoError:
      return 500;
    default:
      return 422;
  }
}

namespace {

std::string sanitize_filename(const std::string& raw) {
  std::string name = fs::path(raw).filename().string();
  for (auto& c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
  while (!name.empty() && name.front() == '.') name.erase(0, 1);
  if (name.empty()) name = "data.csv";
  return name;
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  if (j.is_object() && j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return std::nullopt;
}

viz::FilterPolicy policy_from(const nlohmann::json& j) {
  viz::FilterPolicy p;
  if (!j.is_object() || !j.contains("policy")) return p;
  const auto& v = j["policy"];
  if (v.is_string()) {
    p.kind = viz::filter_kind_from_string(v.get<std::string>());
    p.n_candidates = j.value("n_candidates", p.kind == viz::FilterKind::CompileDiscard ? 1 : 3);
  } else if (v.is_object()) {
    p = v.get<viz::FilterPolicy>();
  }
  return p;
}

std::string stub_or_code(const viz::CandidateProgram& c) { return c.stub.empty() ? c.assembled_code : c.stub; }

}  // namespace

Api::Api(ApiConfig config)
    : config_(std::move(config)),
      sessions_(config_.session_ttl, config_.persist_dir, config_.clock),
      sandbox_([&] {
        if (config_.work_root.empty())
          config_.work_root = fs::temp_directory_path() / fmt::format("vizpipe-service-{}", SessionStore::new_id());
        fs::create_directories(config_.work_root);
        config_.work_root = fs::canonical(config_.work_root);
        viz::SandboxOptions o;
        o.root = config_.work_root / "sandbox";
        return o;
      }()),
      styles_(config_.styles_file ? info::StyleLibrary::load(*config_.styles_file) : info::StyleLibrary::bundled()) {
  if (!config_.provider) raise(ErrorCode::ConfigError, "service needs a text provider");
  const auto restored = sessions_.restore();
  if (restored) spdlog::info("restored {} session(s)", restored);
}

llm::TextProvider& Api::provider() const { return *config_.provider; }

void Api::touch(Session& s) { sessions_.persist(s); }

nlohmann::json Api::upload(const std::string& filename, const std::string& content,
                           const std::optional<std::string>& session_id, const nlohmann::json& options) {
  if (content.size() > config_.max_upload_bytes)
    raise(ErrorCode::PayloadTooLarge,
          fmt::format("upload is {} bytes, the limit is {}", content.size(), config_.max_upload_bytes));
  const auto id = session_id.value_or(SessionStore::new_id());
  if (!SessionStore::valid_id(id)) raise(ErrorCode::PreconditionViolation, "invalid session id: " + id);
  if (sessions_.contains(id)) raise(ErrorCode::Conflict, "session id already in use: " + id);
  const auto name = sanitize_filename(filename);
  const auto ext = fs::path(name).extension().string();
  if (ext != ".csv" && ext != ".json")
    raise(ErrorCode::PreconditionViolation, "datasets must be .csv or .json files");

  const auto condition = options.is_object() && options.contains("condition")
                             ? summary::summary_condition_from_string(options["condition"].get<std::string>())
                             : config_.condition;
  const int n_goals = options.is_object() ? options.value("n_goals", config_.n_goals) : config_.n_goals;
  const auto persona = optional_string(options, "persona");

  const auto dir = config_.work_root / "uploads" / id;
  fs::create_directories(dir);
  const auto path = dir / name;
  {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) raise(ErrorCode::IoError, "cannot store upload");
  }

  std::string stage = kStageSummarize;
  try {
    events_.publish(id, kStageSummarize, "started", {{"file", name}});
    auto s = summary::build_base_summary(summary::ingest(path), summary::kDefaultSampleN, config_.sample_seed);
    nlohmann::json summarize_payload = {{"fields", s.fields.size()}, {"rows", s.row_count}};
    if (condition == summary::SummaryCondition::Enrich) {
      auto enriched = summary::enrich_summary(s, provider(), config_.generation);
      if (enriched.warning) summarize_payload["warning"] = *enriched.warning;
      s = std::move(enriched.summary);
    }
    events_.publish(id, kStageSummarize, "completed", summarize_payload);

    stage = kStageGoals;
    events_.publish(id, kStageGoals, "started");
    auto goals = goals::explore_goals(s, condition, n_goals, provider(), config_.generation, persona);
    events_.publish(id, kStageGoals, "completed", {{"count", goals.size()}});

    auto session = std::make_shared<Session>();
    session->id = id;
    session->dataset_path = path;
    session->created_at = session->last_active = config_.clock();
    session->summary = std::move(s);
    session->goals = std::move(goals);
    sessions_.insert(session);
    return {{"session_id", id}, {"summary", body::summary(session->summary)}, {"goals", body::goals(session->goals)}};
  } catch (const Error& e) {
    events_.publish(id, stage, "failed", {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
}

nlohmann::json Api::get_session(const std::string& id) {
  auto s = sessions_.get(id);
  auto j = s->to_json();
  j.erase("dataset_path");
  return j;
}

nlohmann::json Api::refine_summary(const std::string& id, const nlohmann::json& edits) {
  auto s = sessions_.get(id);
  const auto parsed = summary::summary_edits_from_json(edits);
  {
    std::unique_lock lock(s->mu);
    s->summary = summary::apply_user_refinement(s->summary, parsed);
  }
  touch(*s);
  std::shared_lock lock(s->mu);
  return body::summary(s->summary);
}

nlohmann::json Api::visualize(const std::string& id, const nlohmann::json& request) {
  auto s = sessions_.get(id);
  goals::Goal goal;
  summary::DatasetSummary snapshot;
  {
    std::unique_lock lock(s->mu);
    if (auto text = optional_string(request, "nl_goal")) {
      goal = goals::user_goal(*text, static_cast<int>(s->goals.size()));
      s->goals.push_back(goal);
    } else {
      const int k = request.value("goal_index", 0);
      if (k < 0 || k >= static_cast<int>(s->goals.size()))
        raise(ErrorCode::IndexNotFound, fmt::format("session {} has no goal {}", id, k));
      goal = s->goals[static_cast<std::size_t>(k)];
    }
    snapshot = s->summary;
  }

  viz::VisualizationRequest req;
  req.summary = &snapshot;
  req.condition = request.contains("condition")
                      ? summary::summary_condition_from_string(request["condition"].get<std::string>())
                      : config_.condition;
  req.goal = goal;
  req.grammar_id = request.value("grammar_id", config_.default_grammar);
  req.policy = policy_from(request);
  req.limits = config_.limits;

  events_.publish(id, kStageGenerate, "started", {{"goal_index", goal.index}, {"grammar_id", req.grammar_id}});
  viz::VisualizationResult result;
  try {
    result = viz::generate_visualization_detailed(req, provider(), config_.generation, viz::ScaffoldLibrary::bundled(),
                                                  sandbox_);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoViableCandidate) {
      events_.publish(id, kStageGenerate, "completed");
      events_.publish(id, kStageExecute, "completed", e.details());
      events_.publish(id, kStageFilter, "failed", {{"message", e.what()}});
    } else {
      events_.publish(id, kStageGenerate, "failed", {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    }
    throw;
  }
  auto statuses = nlohmann::json::array();
  for (const auto& c : result.candidates) statuses.push_back(viz::to_string(c.status));
  events_.publish(id, kStageGenerate, "completed", {{"candidates", result.candidates.size()}});
  events_.publish(id, kStageExecute, "completed", {{"statuses", statuses}});
  events_.publish(id, kStageFilter, "completed",
                  {{"policy", viz::to_string(req.policy.kind)}, {"selected", result.selected.candidate_index}});

  int index = 0;
  {
    std::unique_lock lock(s->mu);
    index = static_cast<int>(s->visualizations.size());
    s->visualizations.push_back(
        std::make_shared<VisualizationEntry>(goal, req.grammar_id, result.selected, s->dataset_path));
  }
  touch(*s);
  return body::visualization(index, goal, result, config_.work_root);
}

nlohmann::json Api::refine(const std::string& id, int index, const nlohmann::json& request) {
  auto s = sessions_.get(id);
  auto entry = s->visualization(index);
  const auto instruction = optional_string(request, "instruction");
  if (!instruction) raise(ErrorCode::PreconditionViolation, "instruction is required");
  const auto& scaffold = viz::ScaffoldLibrary::bundled().get(entry->grammar_id);
  try {
    auto turn = entry->refinement.refine(*instruction, scaffold, provider(), config_.generation, config_.limits, sandbox_);
    {
      std::lock_guard lock(entry->report_mu);
      entry->report.reset();
    }
    touch(*s);
    nlohmann::json j = turn;
    j["candidate"] = body::candidate(entry->refinement.current(), config_.work_root);
    return j;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoViableCandidate) touch(*s);
    throw;
  }
}

nlohmann::json Api::explain(const std::string& id, int index) {
  auto entry = sessions_.get(id)->visualization(index);
  return ops::explain(entry->refinement.current().assembled_code, provider(), config_.generation);
}

nlohmann::json Api::evaluate(const std::string& id, int index) {
  auto s = sessions_.get(id);
  auto entry = s->visualization(index);
  auto report = ops::evaluate(entry->refinement.current().assembled_code, entry->goal, provider(), config_.generation);
  {
    std::lock_guard lock(entry->report_mu);
    entry->report = report;
  }
  touch(*s);
  return report;
}

nlohmann::json Api::repair(const std::string& id, int index, const nlohmann::json& request) {
  auto s = sessions_.get(id);
  auto entry = s->visualization(index);
  std::optional<ops::EvaluationReport> report;
  {
    std::lock_guard lock(entry->report_mu);
    report = entry->report;
  }
  if (!report) raise(ErrorCode::PreconditionViolation, "evaluate this visualization before repairing it");
  ops::RepairOptions options;
  options.max_depth = request.is_object() ? request.value("depth", config_.repair_depth) : config_.repair_depth;
  options.limits = config_.limits;
  options.goal = entry->goal;
  const auto& scaffold = viz::ScaffoldLibrary::bundled().get(entry->grammar_id);
  auto outcome = ops::repair(stub_or_code(entry->refinement.current()), *report, scaffold, provider(),
                             config_.generation, s->dataset_path, options, sandbox_);
  entry->refinement.replace(outcome.candidate);
  {
    std::lock_guard lock(entry->report_mu);
    entry->report.reset();
  }
  touch(*s);
  auto j = body::candidate(outcome.candidate, config_.work_root);
  j["attempts"] = outcome.attempts.size();
  return j;
}

nlohmann::json Api::recommend(const std::string& id, int index, const nlohmann::json& request) {
  auto s = sessions_.get(id);
  auto entry = s->visualization(index);
  summary::DatasetSummary snapshot;
  {
    std::shared_lock lock(s->mu);
    snapshot = s->summary;
  }
  ops::RecommendContext ctx;
  ctx.summary = &snapshot;
  ctx.goal = entry->goal;
  ctx.code = entry->refinement.current().assembled_code;
  const int k = request.is_object() ? request.value("k", 3) : 3;
  return body::goals(ops::recommend(ctx, k, provider(), config_.generation));
}

nlohmann::json Api::infographic(const std::string& id, int index, const nlohmann::json& request) {
  auto s = sessions_.get(id);
  auto entry = s->visualization(index);
  const auto current = entry->refinement.current();
  if (!current.artifact || current.artifact->kind != "png")
    raise(ErrorCode::PreconditionViolation, "infographics need a raster (PNG) visualization");
  const auto style_ids = request.value("style_ids", std::vector<std::string>{});
  std::optional<std::int64_t> seed;
  if (request.contains("seed") && request["seed"].is_number_integer()) seed = request["seed"].get<std::int64_t>();
  info::IgmRequest igm_request;
  {
    std::lock_guard lock(styles_mu_);
    igm_request = info::compose_request(current.artifact->path, style_ids, optional_string(request, "custom_prompt"),
                                        request.value("strength", info::kDefaultStrength), seed, styles_);
  }
  static std::atomic<unsigned> counter{0};
  const auto out = config_.work_root / "infographics" / id / fmt::format("{}-{}.png", index, counter.fetch_add(1));
  const auto result = info::stylize(igm_request, config_.igm.get(), out);
  nlohmann::json j = {{"image_url", "/artifacts/" + out.lexically_relative(config_.work_root).generic_string()},
                      {"width", result.size.width},
                      {"height", result.size.height},
                      {"request", igm_request},
                      {"strength_warning", igm_request.strength_warning}};
  j["request"].erase("base_image");
  return j;
}

nlohmann::json Api::transcript(const std::string& id, int index) {
  auto entry = sessions_.get(id)->visualization(index);
  auto j = entry->refinement.transcript();
  j["current"] = body::candidate(entry->refinement.current(), config_.work_root);
  j["goal"] = entry->goal;
  j["grammar_id"] = entry->grammar_id;
  return j;
}

nlohmann::json Api::grammars() const { return viz::ScaffoldLibrary::bundled().describe(); }

nlohmann::json Api::styles() const { return styles_.to_json(); }

std::optional<fs::path> Api::artifact_file(const std::string& relative) const {
  const fs::path rel(relative);
  if (rel.is_absolute()) return std::nullopt;
  for (const auto& part : rel)
    if (part == "..") return std::nullopt;
  std::error_code ec;
  const auto full = fs::weakly_canonical(config_.work_root / rel, ec);
  if (ec || !fs::is_regular_file(full, ec)) return std::nullopt;
  const auto check = full.lexically_relative(config_.work_root);
  if (check.empty() || check.begin()->string() == "..") return std::nullopt;
  // Uploaded datasets are not served back.
  if (check.begin()->string() == "uploads") return std::nullopt;
  return full;
}

}  // namespace vizpipe::service
