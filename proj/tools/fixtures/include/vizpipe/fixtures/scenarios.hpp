#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Requests replayed by the recorded cassettes. The recorder issues exactly
// these; tests and examples that replay a cassette must follow the same
// sequence, because refinement prompts carry the earlier turns.
namespace vizpipe::fixtures::scenario {

inline constexpr const char* kCarsFile = "cars.csv";
inline constexpr int kGoals = 5;
// Goal 4 of the cars dataset is a pie chart; evaluation flags the chart type
// and repair turns it into a bar chart.
inline constexpr int kPieGoal = 4;
inline constexpr const char* kNlGoal = "what is the fuel efficiency per country?";

inline const std::vector<std::string> kVegaliteRefinements = {
    "change the title to \"Average mpg by cylinder count\"",
    "make the bars orange",
    "sort the bars by value",
};
inline const std::vector<std::string> kPythonRefinements = {
    "add a grid",
    "change the title to \"Average mpg by cylinder count\"",
};

inline constexpr int kRecommendK = 3;
inline constexpr int kPolicyCandidates = 3;

struct IgmCase {
  std::vector<std::string> styles;
  double strength;
  std::int64_t seed;
};
inline const std::vector<IgmCase> kIgmCases = {
    {{"watercolor"}, 0.35, 7},
    {{"oil-paint", "neon-night"}, 0.6, 7},
};

}  // namespace vizpipe::fixtures::scenario
