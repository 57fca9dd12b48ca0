#include <gtest/gtest.h>

#include <future>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/llm/scripted.hpp"
#include "vizpipe/ops/evaluate.hpp"
#include "vizpipe/ops/viz_ops.hpp"
#include "vizpipe/viz/generator.hpp"

using namespace vizpipe;
using namespace vizpipe::ops;
namespace tu = vizpipe::testutil;

namespace {

struct World {
  fixtures::SyntheticModel model = fixtures::SyntheticModel::for_corpus(tu::source_dir() / "data" / "corpus");
  summary::DatasetSummary cars = *model.dataset("cars");
  std::vector<goals::Goal> goals = fixtures::propose_goals(cars, 5);

  viz::CandidateProgram chart(int goal, const std::string& grammar = "vegalite") {
    return viz::generate_visualization(cars, summary::SummaryCondition::NoEnrich, goals[static_cast<std::size_t>(goal)],
                                       grammar, {}, *model.provider(), {});
  }
  const viz::Scaffold& scaffold(const std::string& grammar = "vegalite") {
    return viz::ScaffoldLibrary::bundled().get(grammar);
  }
};

std::vector<DimensionScore> scores_of(const std::vector<int>& values) {
  std::vector<DimensionScore> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({all_dimensions()[i % kDimensionCount], values[i], ""});
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vizpipe::Error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace

// ---- self-evaluation -------------------------------------------------------

TEST(Sevq, EqualsTheArithmeticMeanOnRandomTuples) {
  std::mt19937 rng(1234);
  for (int i = 0; i < 200; ++i) {
    std::vector<int> v(6);
    for (auto& x : v) x = 1 + static_cast<int>(rng() % 10);
    const double oracle = std::accumulate(v.begin(), v.end(), 0.0) / 6.0;
    const auto report = make_report(scores_of(v));
    EXPECT_NEAR(report.sevq, oracle, 1e-9);
    EXPECT_TRUE(report.complete());
  }
}

TEST(Sevq, RejectsEmptyAndOutOfRange) {
  EXPECT_EQ(code_of([] { compute_sevq({}); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([] { compute_sevq(scores_of({0})); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([] { compute_sevq(scores_of({11})); }), ErrorCode::PreconditionViolation);
}

TEST(DimensionPrompts, ByteMatchFrozenCopies) {
  // Frozen here on purpose: any edit to the bundled resources shows up.
  const std::map<Dimension, std::string> frozen = {
      {Dimension::CodeAccuracy,
       "Does the code contain bugs, logic errors, syntax error or typos? How serious are the bugs? How should it be "
       "fixed?"},
      {Dimension::DataTransformation, "Is the data transformed appropriately for the visualization type?"},
      {Dimension::GoalCompliance, "How well the code meets the specified visualization goals?"},
      {Dimension::VisualizationType,
       "Considering best practices, is the visualization type appropriate for the data and intent? Is there a "
       "visualization type that would be more effective in conveying insights?"},
      {Dimension::DataEncoding, "Is the data encoded appropriately for the visualization type?"},
      {Dimension::Aesthetics,
       "Are the aesthetics of the visualization appropriate and effective for the visualization type and the data?"},
  };
  ASSERT_EQ(all_dimensions().size(), 6u);
  for (auto d : all_dimensions()) EXPECT_EQ(dimension_prompt(d), frozen.at(d)) << to_string(d);
}

TEST(DimensionScores, ParseScoreAndRationale) {
  auto s = parse_dimension_score(Dimension::Aesthetics, "7: clear labels");
  EXPECT_EQ(s.score, 7);
  EXPECT_EQ(s.rationale, "clear labels");
  s = parse_dimension_score(Dimension::Aesthetics, "Score 9/10 - solid");
  EXPECT_EQ(s.score, 9);
  EXPECT_EQ(s.rationale, "- solid");
  EXPECT_EQ(code_of([] { parse_dimension_score(Dimension::Aesthetics, "great"); }), ErrorCode::ScoreParseFailure);
  EXPECT_EQ(code_of([] { parse_dimension_score(Dimension::Aesthetics, "42: wow"); }), ErrorCode::ScoreParseFailure);
  for (auto d : all_dimensions()) EXPECT_EQ(dimension_from_string(to_string(d)), d);
}

TEST(Evaluate, SixCallsOnePerDimension) {
  World w;
  llm::CallLog log(w.model.provider());
  const auto c = w.chart(0);
  const auto report = evaluate(c.assembled_code, w.goals[0], log, {});
  EXPECT_TRUE(report.complete());
  EXPECT_EQ(log.count_task("evaluate/"), 6u);
  std::set<std::string> tasks;
  for (const auto& r : log.requests()) {
    tasks.insert(r.metadata.at("task"));
    EXPECT_NE(r.messages.back().text.find(dimension_prompt(dimension_from_string(r.metadata.at("task").substr(9)))),
              std::string::npos);
  }
  EXPECT_EQ(tasks.size(), 6u);
  double sum = 0;
  for (const auto& s : report.scores) sum += s.score;
  EXPECT_NEAR(report.sevq, sum / 6.0, 1e-9);
}

TEST(Evaluate, UnparseableDimensionsMakeThePartialReport) {
  llm::ScriptedProvider p([](const llm::PromptRequest& r, const llm::GenerationConfig&) {
    return std::vector<std::string>{r.metadata.at("task") == "evaluate/aesthetics" ? "pretty" : "8: fine"};
  });
  const auto report = evaluate("code", {0, "q", "v", "r"}, p, {});
  EXPECT_TRUE(report.partial);
  EXPECT_FALSE(report.complete());
  EXPECT_EQ(report.scores.size(), 5u);
  EXPECT_EQ(report.failed_dimensions, std::vector<std::string>{"aesthetics"});
  EXPECT_DOUBLE_EQ(report.sevq, 8.0);

  llm::ScriptedProvider none([](const auto&, const auto&) { return std::vector<std::string>{"n/a"}; });
  EXPECT_EQ(code_of([&] { evaluate("code", {0, "q", "v", "r"}, none, {}); }), ErrorCode::ScoreParseFailure);
  llm::UnavailableProvider down;
  EXPECT_EQ(code_of([&] { evaluate("code", {0, "q", "v", "r"}, down, {}); }), ErrorCode::ProviderUnavailable);
}

TEST(Evaluate, ReportJsonRoundTrip) {
  const auto r = make_report(scores_of({1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(nlohmann::json(r).get<EvaluationReport>(), r);
}

// ---- refinement --------------------------------------------------------------

TEST(Refine, ChangesTheChartAndKeepsTheScaffold) {
  World w;
  const auto c = w.chart(0);
  const auto r = refine(c, "make the bars orange", w.scaffold(), {}, *w.model.provider(), {}, w.cars.source_path);
  EXPECT_EQ(r.candidate.status, viz::CandidateStatus::CompiledOk);
  EXPECT_FALSE(r.turn.no_op);
  EXPECT_NE(r.candidate.assembled_code.find("orange"), std::string::npos);
  EXPECT_EQ(r.candidate.assembled_code.rfind(w.scaffold().preamble, 0), 0u);
  EXPECT_EQ(r.turn.before_code, c.assembled_code);
}

TEST(Refine, PromptReplaysABoundedHistory) {
  World w;
  const auto c = w.chart(0);
  std::vector<RefinementTurn> history;
  for (int i = 0; i < 6; ++i) history.push_back({"turn " + std::to_string(i), "b", "a", viz::CandidateStatus::CompiledOk, {}, false});
  history[5].executed = viz::CandidateStatus::CompileError;
  const auto p = build_refine_prompt(c, "sort the bars", w.scaffold(), history);
  std::string all;
  for (const auto& m : p.messages) all += m.text + "\n";
  EXPECT_EQ(all.find("turn 1"), std::string::npos);
  EXPECT_NE(all.find("turn 2"), std::string::npos);
  EXPECT_NE(all.find("failed to run"), std::string::npos);
  EXPECT_EQ(p.mode, llm::PromptMode::FillInMiddle);
  EXPECT_EQ(p.metadata.at("task"), "refine");
  EXPECT_EQ(p.messages.size(), 1u + 2u * kHistoryWindow + 1u);
}

TEST(RefinementSession, FailedTurnIsRecordedButNotApplied) {
  World w;
  const auto c = w.chart(0);
  RefinementSession session(c, w.cars.source_path);
  llm::ScriptedProvider broken([](const auto&, const auto&) { return std::vector<std::string>{"  \"mark\": \"bar\",,"}; });
  EXPECT_EQ(code_of([&] { session.refine("break it", w.scaffold(), broken, {}); }), ErrorCode::NoViableCandidate);
  EXPECT_EQ(session.current(), c);
  ASSERT_EQ(session.history().size(), 1u);
  EXPECT_EQ(session.history()[0].executed, viz::CandidateStatus::CompileError);

  session.refine("add a title \"X\"", w.scaffold(), *w.model.provider(), {});
  EXPECT_EQ(session.history().size(), 2u);
  EXPECT_NE(session.current().assembled_code, c.assembled_code);
  EXPECT_EQ(session.transcript()["turns"].size(), 2u);
}

TEST(RefinementSession, ConcurrentTurnIsAConflict) {
  World w;
  RefinementSession session(w.chart(0), w.cars.source_path);
  std::promise<void> entered;
  std::promise<void> release;
  auto released = release.get_future().share();
  llm::ScriptedProvider slow([&](const auto&, const auto&) {
    entered.set_value();
    released.wait();
    return std::vector<std::string>{"  \"mark\": \"point\""};
  });
  auto first = std::async(std::launch::async, [&] { return session.refine("use points", w.scaffold(), slow, {}); });
  entered.get_future().wait();
  EXPECT_EQ(code_of([&] { session.refine("other", w.scaffold(), *w.model.provider(), {}); }), ErrorCode::Conflict);
  EXPECT_EQ(code_of([&] { session.replace(w.chart(1)); }), ErrorCode::Conflict);
  release.set_value();
  EXPECT_EQ(first.get().executed, viz::CandidateStatus::CompiledOk);
  EXPECT_EQ(session.history().size(), 1u);
}

TEST(Refine, RequiresACompiledProgramAndAnInstruction) {
  World w;
  auto c = w.chart(0);
  EXPECT_EQ(code_of([&] { refine(c, "  ", w.scaffold(), {}, *w.model.provider(), {}, w.cars.source_path); }),
            ErrorCode::PreconditionViolation);
  c.status = viz::CandidateStatus::RuntimeError;
  EXPECT_EQ(code_of([&] { refine(c, "x", w.scaffold(), {}, *w.model.provider(), {}, w.cars.source_path); }),
            ErrorCode::PreconditionViolation);
}

// ---- explanation ---------------------------------------------------------------

TEST(Explain, ReadsBothSections) {
  World w;
  const auto e = explain(w.chart(0).assembled_code, *w.model.provider(), {});
  EXPECT_FALSE(e.code_walkthrough.empty());
  EXPECT_FALSE(e.accessibility_description.empty());
  const auto parsed = parse_explanation("## Code Walkthrough\nline one\n\n## Accessibility Description\nA bar chart.");
  EXPECT_EQ(parsed.code_walkthrough, "line one");
  EXPECT_EQ(parsed.accessibility_description, "A bar chart.");
  try {
    parse_explanation("just words");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ExplanationParseFailure);
    EXPECT_EQ(err.details()["raw"], "just words");
  }
}

// ---- repair -------------------------------------------------------------------

TEST(Repair, FixesThePieChartFlaggedByEvaluation) {
  World w;
  const auto pie = w.chart(4);
  ASSERT_NE(pie.assembled_code.find("arc"), std::string::npos);
  const auto before = evaluate(pie.assembled_code, w.goals[4], *w.model.provider(), {});
  RepairOptions o;
  o.goal = w.goals[4];
  const auto out = repair(pie.assembled_code, before, w.scaffold(), *w.model.provider(), {}, w.cars.source_path, o);
  EXPECT_EQ(out.candidate.status, viz::CandidateStatus::CompiledOk);
  EXPECT_EQ(out.attempts.size(), 1u);
  const auto after = evaluate(out.candidate.assembled_code, w.goals[4], *w.model.provider(), {});
  EXPECT_GT(after.sevq, before.sevq);
}

TEST(Repair, PromptQuotesLowDimensionsAndFailedAttempts) {
  World w;
  auto report = make_report({{Dimension::Aesthetics, 4, "no title"}, {Dimension::DataEncoding, 9, "fine"}});
  viz::CandidateProgram failed;
  failed.status = viz::CandidateStatus::CompileError;
  failed.error_detail = "invalid JSON at 3";
  const auto p = build_repair_prompt("code", report, w.scaffold(), {}, {failed});
  const auto& text = p.messages.back().text;
  EXPECT_NE(text.find("aesthetics (4/10): no title"), std::string::npos);
  EXPECT_EQ(text.find("data_encoding"), std::string::npos);
  EXPECT_NE(text.find("invalid JSON at 3"), std::string::npos);
  EXPECT_EQ(p.metadata.at("attempt"), "1");
}

TEST(Repair, GivesUpAfterDepthPlusOneAttempts) {
  World w;
  std::atomic<int> calls{0};
  llm::ScriptedProvider broken([&](const auto&, const auto&) {
    ++calls;
    return std::vector<std::string>{"  \"mark\": \"bar\",,"};
  });
  RepairOptions o;
  o.max_depth = 2;
  try {
    repair("code", make_report(scores_of({3})), w.scaffold(), broken, {}, w.cars.source_path, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoViableCandidate);
    EXPECT_EQ(e.details()["attempts"].size(), 3u);
  }
  EXPECT_EQ(calls.load(), 3);
  EXPECT_EQ(code_of([&] { repair("code", EvaluationReport{}, w.scaffold(), broken, {}, w.cars.source_path); }),
            ErrorCode::PreconditionViolation);
}

// ---- recommendation ----------------------------------------------------------

TEST(Recommend, ReturnsKNewGroundedGoals) {
  World w;
  RecommendContext ctx{&w.cars, w.goals[0], w.chart(0).assembled_code};
  const auto recs = recommend(ctx, 3, *w.model.provider(), {});
  ASSERT_EQ(recs.size(), 3u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].index, static_cast<int>(i));
    EXPECT_NE(recs[i].visualization, w.goals[0].visualization);
    EXPECT_TRUE(goals::is_grounded(recs[i].visualization, w.cars.field_names()));
  }
  EXPECT_EQ(code_of([&] { recommend(ctx, 0, *w.model.provider(), {}); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([&] { build_recommend_prompt(RecommendContext{}, 2); }), ErrorCode::PreconditionViolation);
}
