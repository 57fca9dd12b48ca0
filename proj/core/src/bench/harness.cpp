#include "vizpipe/bench/harness.hpp"

#include <map>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/ops/evaluate.hpp"
#include "vizpipe/text.hpp"
#include "vizpipe/viz/generator.hpp"

namespace vizpipe::bench {

namespace {

struct Tally {
  long long errors = 0;
  long long total = 0;
  double sevq_sum = 0.0;
  long long sevq_n = 0;

  void add(const RunOutcome& o) {
    ++total;
    if (viz::is_error(o.status)) ++errors;
    if (o.sevq) {
      sevq_sum += *o.sevq;
      ++sevq_n;
    }
  }
  std::optional<double> mean_sevq() const {
    return sevq_n ? std::optional<double>(sevq_sum / static_cast<double>(sevq_n)) : std::nullopt;
  }
  double ver() const { return total ? compute_ver(errors, total) : 0.0; }
};

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> read_optional_number(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && j[key].is_number()) return j[key].get<double>();
  return std::nullopt;
}

std::string fmt_sevq(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string(); }

}  // namespace

double compute_ver(long long errors, long long total) {
  if (total < 1) raise(ErrorCode::DivisionByZeroTotal, "VER needs at least one outcome");
  if (errors < 0 || errors > total)
    raise(ErrorCode::PreconditionViolation, fmt::format("error count {} outside [0, {}]", errors, total));
  return static_cast<double>(errors) / static_cast<double>(total) * 100.0;
}

void BenchmarkConfig::validate() const {
  if (datasets.empty()) raise(ErrorCode::ConfigError, "benchmark needs at least one dataset");
  if (grammars.empty()) raise(ErrorCode::ConfigError, "benchmark needs at least one grammar");
  if (conditions.empty()) raise(ErrorCode::ConfigError, "benchmark needs at least one summary condition");
  if (n_goals_per_dataset < 1) raise(ErrorCode::ConfigError, "n_goals_per_dataset must be >= 1");
  if (visualizations_per_goal < 1) raise(ErrorCode::ConfigError, "visualizations_per_goal must be >= 1");
  generation.validate();
}

MetricsReport aggregate(std::vector<RunOutcome> outcomes, const std::vector<std::string>& datasets,
                        const std::vector<std::string>& grammars,
                        const std::vector<summary::SummaryCondition>& conditions,
                        std::vector<SkippedDataset> skipped) {
  Tally overall;
  std::map<std::pair<std::string, summary::SummaryCondition>, Tally> by_gc;
  std::map<std::tuple<std::string, std::string, summary::SummaryCondition>, Tally> by_dgc;
  for (const auto& o : outcomes) {
    overall.add(o);
    by_gc[{o.grammar, o.condition}].add(o);
    by_dgc[{o.dataset, o.grammar, o.condition}].add(o);
  }
  MetricsReport r;
  r.E = overall.errors;
  r.T = overall.total;
  r.ver = compute_ver(r.E, r.T);
  r.mean_sevq = overall.mean_sevq();
  for (const auto& g : grammars)
    for (auto c : conditions) {
      const auto& t = by_gc[{g, c}];
      r.breakdown.push_back(CellReport{"", g, c, t.errors, t.total, t.ver(), t.mean_sevq()});
    }
  for (const auto& d : datasets)
    for (const auto& g : grammars)
      for (auto c : conditions) {
        const auto& t = by_dgc[{d, g, c}];
        r.cells.push_back(CellReport{d, g, c, t.errors, t.total, t.ver(), t.mean_sevq()});
      }
  r.outcomes = std::move(outcomes);
  r.skipped = std::move(skipped);
  return r;
}

MetricsReport run_benchmark(const BenchmarkConfig& config, llm::TextProvider& provider, llm::TextProvider* evaluator,
                            const viz::Sandbox& sandbox) {
  config.validate();
  const auto& library = viz::ScaffoldLibrary::bundled();
  for (const auto& g : config.grammars) (void)library.get(g);
  if (!evaluator) evaluator = &provider;

  std::vector<std::string> dataset_names;
  std::vector<RunOutcome> outcomes;
  std::vector<SkippedDataset> skipped;
  const bool wants_enrich = std::find(config.conditions.begin(), config.conditions.end(),
                                      summary::SummaryCondition::Enrich) != config.conditions.end();

  for (const auto& path : config.datasets) {
    const auto table = summary::ingest(path);
    const auto name = table.name;
    dataset_names.push_back(name);
    const auto base = summary::build_base_summary(table, summary::kDefaultSampleN, config.sample_seed);
    auto enriched = base;
    if (wants_enrich) {
      auto outcome = summary::enrich_summary(base, provider, config.generation);
      if (outcome.warning) spdlog::warn("{}: {}", name, *outcome.warning);
      enriched = std::move(outcome.summary);
    }

    for (auto condition : config.conditions) {
      const auto& s = condition == summary::SummaryCondition::Enrich ? enriched : base;
      std::vector<goals::Goal> goals;
      try {
        goals = goals::explore_goals(s, condition, config.n_goals_per_dataset, provider, config.generation);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoParsableJSON && e.code() != ErrorCode::AllGoalsRejected) throw;
        spdlog::warn("{} [{}]: goal generation failed, no runs counted: {}", name, summary::to_string(condition),
                     e.what());
        skipped.push_back({name, condition, e.what()});
        continue;
      }
      for (const auto& goal : goals)
        for (const auto& grammar : config.grammars)
          for (int v = 0; v < config.visualizations_per_goal; ++v) {
            viz::VisualizationRequest req;
            req.summary = &s;
            req.condition = condition;
            req.goal = goal;
            req.grammar_id = grammar;
            req.limits = config.limits;
            req.policy.kind = viz::FilterKind::CompileDiscard;
            req.policy.n_candidates = config.single_try ? 1 : std::max(1, config.generation.n_candidates);
            if (config.visualizations_per_goal > 1) req.tags["visualization_index"] = std::to_string(v);

            RunOutcome o{name, grammar, condition, goal.index, v, viz::CandidateStatus::CompiledOk, std::nullopt};
            try {
              const auto result = viz::generate_visualization_detailed(req, provider, config.generation, library, sandbox);
              if (config.compute_sevq)
                o.sevq = ops::evaluate(result.selected.assembled_code, goal, *evaluator, config.generation).sevq;
            } catch (const Error& e) {
              if (e.code() != ErrorCode::NoViableCandidate) throw;
              const auto& details = e.details();
              o.status = viz::CandidateStatus::RuntimeError;
              if (details.contains("candidates") && !details["candidates"].empty())
                o.status = viz::candidate_status_from_string(details["candidates"][0]["status"].get<std::string>());
              spdlog::debug("{} [{}] goal {} {}: {}", name, summary::to_string(condition), goal.index, grammar,
                            viz::to_string(o.status));
            }
            outcomes.push_back(std::move(o));
          }
    }
  }
  if (outcomes.empty()) raise(ErrorCode::DivisionByZeroTotal, "benchmark produced no outcomes", {{"skipped", skipped.size()}});
  return aggregate(std::move(outcomes), dataset_names, config.grammars, config.conditions, std::move(skipped));
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "markdown" || s == "markdown_table" || s == "md") return ReportFormat::MarkdownTable;
  if (s == "csv") return ReportFormat::Csv;
  raise(ErrorCode::ConfigError, "unknown report format: " + s);
}

std::string emit_report(const MetricsReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json:
      return nlohmann::json(report).dump(2) + "\n";
    case ReportFormat::Csv: {
      // Grammar x condition rows carry an empty dataset column.
      std::string out = "dataset,grammar,condition,E,T,ver,mean_sevq\n";
      for (const auto* rows : {&report.breakdown, &report.cells})
        for (const auto& c : *rows)
          out += fmt::format("{},{},{},{},{},{},{}\n", c.dataset, c.grammar, summary::to_string(c.condition), c.E, c.T,
                             text::format_double(c.ver), c.mean_sevq ? text::format_double(*c.mean_sevq) : "");
      return out;
    }
    case ReportFormat::MarkdownTable: {
      std::string out = fmt::format("Overall VER: {:.1f}% ({} errors / {} runs)", report.ver, report.E, report.T);
      if (report.mean_sevq) out += fmt::format(", mean SEVQ {:.2f}", *report.mean_sevq);
      out += "\n\n| grammar | condition | E | T | VER (%) | mean SEVQ |\n|---|---|---|---|---|---|\n";
      for (const auto& c : report.breakdown)
        out += fmt::format("| {} | {} | {} | {} | {:.1f} | {} |\n", c.grammar, summary::to_string(c.condition), c.E,
                           c.T, c.ver, fmt_sevq(c.mean_sevq));
      if (!report.cells.empty()) {
        out += "\n| dataset | grammar | condition | E | T | VER (%) |\n|---|---|---|---|---|---|\n";
        for (const auto& c : report.cells)
          out += fmt::format("| {} | {} | {} | {} | {} | {:.1f} |\n", c.dataset, c.grammar,
                             summary::to_string(c.condition), c.E, c.T, c.ver);
      }
      return out;
    }
  }
  return {};
}

void to_json(nlohmann::json& j, const RunOutcome& o) {
  j = {{"dataset", o.dataset},
       {"grammar", o.grammar},
       {"condition", summary::to_string(o.condition)},
       {"goal_index", o.goal_index},
       {"visualization_index", o.visualization_index},
       {"status", viz::to_string(o.status)},
       {"sevq", optional_number(o.sevq)}};
}

void from_json(const nlohmann::json& j, RunOutcome& o) {
  o.dataset = j.at("dataset").get<std::string>();
  o.grammar = j.at("grammar").get<std::string>();
  o.condition = summary::summary_condition_from_string(j.at("condition").get<std::string>());
  o.goal_index = j.at("goal_index").get<int>();
  o.visualization_index = j.value("visualization_index", 0);
  o.status = viz::candidate_status_from_string(j.at("status").get<std::string>());
  o.sevq = read_optional_number(j, "sevq");
}

void to_json(nlohmann::json& j, const CellReport& c) {
  j = {{"grammar", c.grammar}, {"condition", summary::to_string(c.condition)}, {"E", c.E}, {"T", c.T},
       {"ver", c.ver}, {"mean_sevq", optional_number(c.mean_sevq)}};
  if (!c.dataset.empty()) j["dataset"] = c.dataset;
}

void from_json(const nlohmann::json& j, CellReport& c) {
  c.dataset = j.value("dataset", "");
  c.grammar = j.at("grammar").get<std::string>();
  c.condition = summary::summary_condition_from_string(j.at("condition").get<std::string>());
  c.E = j.at("E").get<long long>();
  c.T = j.at("T").get<long long>();
  c.ver = j.at("ver").get<double>();
  c.mean_sevq = read_optional_number(j, "mean_sevq");
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto skipped = nlohmann::json::array();
  for (const auto& s : r.skipped)
    skipped.push_back({{"dataset", s.dataset}, {"condition", summary::to_string(s.condition)}, {"reason", s.reason}});
  j = {{"E", r.E},
       {"T", r.T},
       {"ver", r.ver},
       {"mean_sevq", optional_number(r.mean_sevq)},
       {"breakdown", r.breakdown},
       {"cells", r.cells},
       {"outcomes", r.outcomes},
       {"skipped", skipped}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.E = j.at("E").get<long long>();
  r.T = j.at("T").get<long long>();
  r.ver = j.at("ver").get<double>();
  r.mean_sevq = read_optional_number(j, "mean_sevq");
  r.breakdown = j.at("breakdown").get<std::vector<CellReport>>();
  r.cells = j.value("cells", std::vector<CellReport>{});
  r.outcomes = j.value("outcomes", std::vector<RunOutcome>{});
  r.skipped.clear();
  for (const auto& s : j.value("skipped", nlohmann::json::array()))
    r.skipped.push_back({s.at("dataset").get<std::string>(),
                         summary::summary_condition_from_string(s.at("condition").get<std::string>()),
                         s.value("reason", "")});
}

}  // namespace vizpipe::bench
