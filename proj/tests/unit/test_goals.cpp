#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/scripted.hpp"

using namespace vizpipe;
using namespace vizpipe::goals;
namespace tu = vizpipe::testutil;

namespace {

const summary::DatasetSummary& cars() {
  static const auto s = summary::build_base_summary(summary::ingest(tu::corpus("cars.csv")));
  return s;
}

nlohmann::json record(const std::string& vis) {
  return {{"question", "q?"}, {"visualization", vis}, {"rationale", "because"}};
}

}  // namespace

TEST(Goals, PromptCarriesSummaryCountAndPersona) {
  const auto p = build_goal_prompt({"dataset: cars\n", 4, std::string("a mechanic")});
  const auto& text = p.messages.back().text;
  EXPECT_NE(text.find("dataset: cars"), std::string::npos);
  EXPECT_NE(text.find("exactly 4 goals"), std::string::npos);
  EXPECT_NE(text.find("a mechanic"), std::string::npos);
  EXPECT_EQ(p.metadata.at("task"), "goals");
  // Best-practice nudge.
  EXPECT_NE(p.system.find("avoid pie charts"), std::string::npos);
  EXPECT_THROW(build_goal_prompt({"", 0, std::nullopt}), Error);
}

TEST(Goals, GroundingRequiresKnownFields) {
  const auto fields = cars().field_names();
  EXPECT_TRUE(is_grounded("bar chart of `mpg` by `origin`", fields));
  EXPECT_TRUE(is_grounded("histogram of MPG", fields));
  EXPECT_FALSE(is_grounded("bar chart of `price`", fields));
  EXPECT_FALSE(is_grounded("a nice chart", fields));
  EXPECT_FALSE(is_grounded("bar chart of `mpg` by `brand`", fields));
  // Whole-token matching: "hp" inside "shape" is not a reference.
  EXPECT_EQ(referenced_fields("shape of the data", fields), std::vector<std::string>{});
  EXPECT_EQ(referenced_fields("hp vs mpg", fields), (std::vector<std::string>{"mpg", "hp"}));
  EXPECT_EQ(unknown_symbols("`mpg` and `colour`", fields), std::vector<std::string>{"colour"});
}

TEST(Goals, ParseDropsMalformedAndHallucinatedRecords) {
  nlohmann::json reply = nlohmann::json::array();
  reply.push_back(record("bar chart of `mpg` by `origin`"));
  reply.push_back(record("scatter of `price` vs `mpg`"));
  reply.push_back({{"question", "q"}, {"visualization", "histogram of `hp`"}});
  reply.push_back(record("histogram of `hp`"));
  const auto r = parse_goals_detailed("Sure!\n```json\n" + reply.dump(2) + "\n```", cars());
  ASSERT_EQ(r.goals.size(), 2u);
  EXPECT_EQ(r.rejected_hallucinated, 1);
  EXPECT_EQ(r.rejected_malformed, 1);
  EXPECT_EQ(r.goals[0].index, 0);
  EXPECT_EQ(r.goals[1].index, 1);
  EXPECT_EQ(r.goals[1].visualization, "histogram of `hp`");
}

TEST(Goals, ParseAcceptsWrappedObjectsAndTruncates) {
  nlohmann::json goals = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) goals.push_back(record("histogram of `mpg`"));
  EXPECT_EQ(parse_goals(nlohmann::json{{"goals", goals}}.dump(), cars(), 3).size(), 3u);
  EXPECT_EQ(parse_goals(record("histogram of `mpg`").dump(), cars()).size(), 1u);
}

TEST(Goals, ParseFailures) {
  try {
    parse_goals("no json here", cars());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoParsableJSON);
  }
  try {
    parse_goals(nlohmann::json::array({record("chart of `price`")}).dump(), cars());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllGoalsRejected);
    EXPECT_EQ(e.details()["hallucinated"], 1);
  }
}

TEST(Goals, ExploreTagsTheRequestAndHonoursN) {
  auto model = fixtures::SyntheticModel::for_corpus(tu::source_dir() / "data" / "corpus");
  llm::CallLog log(model.provider());
  for (auto c : summary::all_conditions()) {
    const auto g = explore_goals(cars(), c, 5, log, {});
    EXPECT_EQ(g.size(), 5u) << summary::to_string(c);
    for (const auto& goal : g) EXPECT_TRUE(is_grounded(goal.visualization, cars().field_names()));
  }
  const auto reqs = log.requests();
  ASSERT_EQ(reqs.size(), 4u);
  EXPECT_EQ(reqs[0].metadata.at("dataset"), "cars");
  EXPECT_EQ(reqs[2].metadata.at("condition"), "schema");
  EXPECT_NE(reqs[3].messages.back().text.find("(no summary available)"), std::string::npos);
}

TEST(Goals, UserGoalAndJson) {
  const auto g = user_goal("what is the fuel efficiency per country?", 7);
  EXPECT_EQ(g.index, 7);
  EXPECT_EQ(g.question, g.visualization);
  EXPECT_THROW(user_goal("  ", 0), Error);
  EXPECT_EQ(nlohmann::json(g).get<Goal>(), g);
}
