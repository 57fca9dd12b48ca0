#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/llm/scripted.hpp"
#include "vizpipe/viz/filters.hpp"
#include "vizpipe/viz/generator.hpp"

using namespace vizpipe;
using namespace vizpipe::viz;
namespace tu = vizpipe::testutil;

namespace {

struct Fixture {
  fixtures::SyntheticModel model = fixtures::SyntheticModel::for_corpus(tu::source_dir() / "data" / "corpus");
  summary::DatasetSummary cars = *model.dataset("cars");
  std::vector<goals::Goal> goals = fixtures::propose_goals(cars, 5);
};

VisualizationRequest request_for(const Fixture& f, int goal, const std::string& grammar, FilterPolicy policy = {}) {
  VisualizationRequest r;
  r.summary = &f.cars;
  r.condition = summary::SummaryCondition::NoEnrich;
  r.goal = f.goals[static_cast<std::size_t>(goal)];
  r.grammar_id = grammar;
  r.policy = policy;
  return r;
}

}  // namespace

TEST(Policy, ValidationAndTemperature) {
  EXPECT_NO_THROW((FilterPolicy{FilterKind::CompileDiscard, 1, std::nullopt}.validate()));
  EXPECT_THROW((FilterPolicy{FilterKind::CompileDiscard, 0, std::nullopt}.validate()), Error);
  EXPECT_THROW((FilterPolicy{FilterKind::SelfConsistency, 1, std::nullopt}.validate()), Error);
  EXPECT_THROW((FilterPolicy{FilterKind::CorrectnessProbability, 1, std::nullopt}.validate()), Error);
  EXPECT_DOUBLE_EQ((FilterPolicy{FilterKind::CompileDiscard, 1, std::nullopt}.temperature(0.0)), 0.0);
  EXPECT_DOUBLE_EQ((FilterPolicy{FilterKind::CompileDiscard, 3, std::nullopt}.temperature(0.0)), kDiscardTemperature);
  EXPECT_DOUBLE_EQ((FilterPolicy{FilterKind::SelfConsistency, 3, 0.2}.temperature(0.0)), 0.2);
  for (auto k : {FilterKind::CompileDiscard, FilterKind::SelfConsistency, FilterKind::CorrectnessProbability})
    EXPECT_EQ(filter_kind_from_string(to_string(k)), k);
}

TEST(Generator, DeclarativePathIsOfflineAndSpawnsNothing) {
  Fixture f;
  llm::CallLog log(f.model.provider());
  const auto before = spawned_process_count();
  for (int g = 0; g < 5; ++g) {
    const auto r = generate_visualization_detailed(request_for(f, g, "vegalite"), log, {});
    EXPECT_EQ(r.selected.status, CandidateStatus::CompiledOk) << g;
    EXPECT_EQ(r.selected.goal_index, g);
    ASSERT_TRUE(r.selected.artifact.has_value());
    EXPECT_EQ(r.selected.artifact->kind, "spec");
  }
  EXPECT_EQ(spawned_process_count(), before);
  EXPECT_EQ(log.count_task("codegen"), 5u);
}

TEST(Generator, SubprocessGrammarProducesPng) {
  Fixture f;
  const auto r = generate_visualization_detailed(request_for(f, 0, "matplotlib"), *f.model.provider(), {});
  ASSERT_EQ(r.selected.status, CandidateStatus::CompiledOk) << r.selected.error_detail.value_or("");
  EXPECT_EQ(r.selected.artifact->kind, "png");
  const auto png = tu::read_file(r.selected.artifact->path);
  EXPECT_EQ(png.substr(1, 3), "PNG");
}

TEST(Generator, PoliciesPickTheIntendedCandidate) {
  // The synthetic model writes: 0 main, 1 layout variant of main, 2 a
  // "(draft)" variant, 3 broken syntax.
  Fixture f;
  for (auto kind : {FilterKind::CompileDiscard, FilterKind::SelfConsistency, FilterKind::CorrectnessProbability}) {
    llm::CallLog log(f.model.provider());
    const auto r = generate_visualization_detailed(request_for(f, 0, "vegalite", {kind, 4, std::nullopt}), log, {});
    ASSERT_EQ(r.candidates.size(), 4u);
    EXPECT_EQ(r.candidates[3].status, CandidateStatus::CompileError);
    EXPECT_EQ(normalize_code(r.candidates[0].assembled_code, "json"), normalize_code(r.candidates[1].assembled_code, "json"));
    EXPECT_NE(r.candidates[0].assembled_code, r.candidates[1].assembled_code);
    EXPECT_EQ(r.selected.candidate_index, 0) << to_string(kind);
    EXPECT_EQ(log.count_task("score"), kind == FilterKind::CorrectnessProbability ? 3u : 0u);
  }
}

TEST(Generator, SamplingTemperatureFollowsThePolicy) {
  Fixture f;
  llm::CallLog log(f.model.provider());
  generate_visualization_detailed(request_for(f, 1, "vegalite", {FilterKind::CompileDiscard, 3, std::nullopt}), log, {});
  ASSERT_EQ(log.requests().size(), 1u);
}

TEST(Generator, AllCandidatesFailingIsNoViableCandidate) {
  Fixture f;
  llm::ScriptedProvider broken([](const auto&, const auto&) { return std::vector<std::string>{"  \"mark\": "}; });
  try {
    generate_visualization_detailed(request_for(f, 0, "vegalite"), broken, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoViableCandidate);
    EXPECT_TRUE(e.details().contains("candidates"));
  }
  llm::ScriptedProvider prose([](const auto&, const auto&) { return std::vector<std::string>{"Sorry, I can't."}; });
  EXPECT_THROW(generate_visualization_detailed(request_for(f, 0, "vegalite"), prose, {}), Error);
}

TEST(Generator, UnknownGrammar) {
  Fixture f;
  try {
    generate_visualization_detailed(request_for(f, 0, "ggplot"), *f.model.provider(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownGrammar);
  }
}

TEST(Generator, ProviderErrorsPropagate) {
  Fixture f;
  llm::UnavailableProvider down;
  try {
    generate_visualization_detailed(request_for(f, 0, "vegalite"), down, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
  }
}

TEST(Generator, ReplayFromTheBundledCassetteIsDeterministic) {
  // The recorded ablation covers cars under no_enrich on vegalite.
  Fixture f;
  llm::ReplayProvider replay(llm::Cassette::load(tu::cassette("ablation.json")));
  const auto goals = goals::explore_goals(f.cars, summary::SummaryCondition::NoEnrich, 5, replay,
                                          llm::GenerationConfig::benchmark_preset());
  VisualizationRequest r;
  r.summary = &f.cars;
  r.condition = summary::SummaryCondition::NoEnrich;
  r.goal = goals[0];
  r.grammar_id = "vegalite";
  const auto a = generate_visualization_detailed(r, replay, llm::GenerationConfig::benchmark_preset());
  const auto b = generate_visualization_detailed(r, replay, llm::GenerationConfig::benchmark_preset());
  EXPECT_EQ(a.selected.stub, b.selected.stub);
  EXPECT_EQ(a.selected.status, CandidateStatus::CompiledOk);
}
