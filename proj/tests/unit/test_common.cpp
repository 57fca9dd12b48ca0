#include <gtest/gtest.h>

#include <random>
#include <set>

#include "vizpipe/error.hpp"
#include "vizpipe/hash.hpp"
#include "vizpipe/text.hpp"

using namespace vizpipe;

TEST(Errors, EveryCodeHasANameAndItsOwnExitStatus) {
  std::set<int> exits;
  std::set<std::string> names;
  for (int i = 0; i <= static_cast<int>(ErrorCode::PayloadTooLarge); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    const int rc = exit_code_for(code);
    EXPECT_GT(rc, 2) << "0, 1 and 2 are reserved";
    EXPECT_LT(rc, 126) << "shell-reserved statuses";
    EXPECT_TRUE(exits.insert(rc).second);
    EXPECT_TRUE(names.insert(std::string(to_string(code))).second);
  }
  EXPECT_EQ(to_string(ErrorCode::CassetteMiss), "CassetteMiss");
}

TEST(Errors, RaiseCarriesDetails) {
  try {
    raise(ErrorCode::ParseError, "bad", {{"row", 3}});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_STREQ(e.what(), "bad");
    EXPECT_EQ(e.details()["row"], 3);
  }
}

TEST(Hash, KnownSha256Vectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Base64KnownVectorsAndRoundTrip) {
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_decode("Zm8="), "fo");
  std::mt19937 rng(4);
  for (int i = 0; i < 200; ++i) {
    std::string bytes(rng() % 64, '\0');
    for (auto& b : bytes) b = static_cast<char>(rng() & 0xff);
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  }
  EXPECT_THROW(base64_decode("Zm9v!"), Error);
}

TEST(Text, StripFencesAndExtractJson) {
  EXPECT_EQ(text::strip_code_fences("before\n```python\nx = 1\n```\nafter"), "x = 1");
  EXPECT_EQ(text::strip_code_fences("plain"), "plain");
  EXPECT_EQ(*text::extract_json("Here: [1, {\"a\": \"]\"}] trailing"), nlohmann::json::parse(R"([1, {"a": "]"}])"));
  EXPECT_EQ(*text::extract_json("```json\n{\"k\": 2}\n```"), nlohmann::json({{"k", 2}}));
  EXPECT_FALSE(text::extract_json("nothing {here").has_value());
}

TEST(Text, NumberScanning) {
  EXPECT_DOUBLE_EQ(*text::first_real("p = .75 maybe"), 0.75);
  EXPECT_DOUBLE_EQ(*text::first_real("-1e-2"), -0.01);
  EXPECT_FALSE(text::first_real("none").has_value());
  const auto m = text::first_integer("score 8: tidy");
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->value, 8);
  EXPECT_EQ(m->rest, ": tidy");
}

TEST(Text, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 500; ++i) {
    const double v = d(rng);
    EXPECT_EQ(std::stod(text::format_double(v)), v);
  }
  EXPECT_EQ(text::format_double(0.35), "0.35");
  EXPECT_EQ(text::format_double(100.0), "100");
}

TEST(Text, SmallHelpers) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::to_lower("MiXeD"), "mixed");
  EXPECT_EQ(text::split_lines("a\r\nb\nc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(text::join({"a", "b"}, ", "), "a, b");
  EXPECT_EQ(text::estimate_tokens(std::string(400, 'x')), 100u);
}
