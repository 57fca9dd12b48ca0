#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <thread>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/hash.hpp"
#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/llm/live.hpp"
#include "vizpipe/llm/scripted.hpp"

using namespace vizpipe;
using namespace vizpipe::llm;

namespace {

PromptRequest sample_request() {
  PromptRequest r;
  r.system = "sys";
  r.messages = {{"user", "hello  world\n"}};
  r.metadata = {{"task", "codegen"}, {"dataset", "cars"}};
  return r;
}

ProviderPtr echo_provider(std::vector<std::string> texts) {
  return std::make_shared<ScriptedProvider>([texts](const PromptRequest&, const GenerationConfig&) { return texts; });
}

}  // namespace

TEST(GenerationConfig, BenchmarkPresetIsGreedySingleSample) {
  const auto c = GenerationConfig::benchmark_preset();
  EXPECT_EQ(c.temperature, 0.0);
  EXPECT_EQ(c.n_candidates, 1);
  EXPECT_NO_THROW(c.validate());
}

TEST(GenerationConfig, RejectsOutOfRangeFields) {
  GenerationConfig c;
  c.temperature = -0.1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.temperature = 2.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.n_candidates = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_tokens = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(PromptRequest, FimFieldsMustMatchMode) {
  PromptRequest r = sample_request();
  EXPECT_NO_THROW(r.validate());
  r.fim_prefix = "a";
  EXPECT_THROW(r.validate(), Error);
  r.mode = PromptMode::FillInMiddle;
  EXPECT_THROW(r.validate(), Error);  // suffix missing
  r.fim_suffix = "b";
  EXPECT_NO_THROW(r.validate());
}

TEST(Fingerprint, IdenticalRequestsHashIdentically) {
  EXPECT_EQ(fingerprint(sample_request(), {}), fingerprint(sample_request(), {}));
  EXPECT_EQ(fingerprint(sample_request(), {}).size(), 64u);
}

TEST(Fingerprint, TemperatureIsPartOfIdentity) {
  GenerationConfig a, b;
  b.temperature = 0.7;
  EXPECT_NE(fingerprint(sample_request(), a), fingerprint(sample_request(), b));
}

TEST(Fingerprint, MessageWhitespaceIsSignificant) {
  auto r = sample_request();
  r.messages[0].text = "hello world\n";
  EXPECT_NE(fingerprint(r, {}), fingerprint(sample_request(), {}));
}

TEST(Fingerprint, MetadataOrderDoesNotMatter) {
  // Parse the same request from JSON documents whose metadata keys appear in
  // different orders.
  const std::string a = R"({"system":"sys","messages":[{"role":"user","text":"x"}],"mode":"completion",
    "metadata":{"task":"goals","dataset":"cars","condition":"enrich"}})";
  const std::string b = R"({"mode":"completion","metadata":{"condition":"enrich","dataset":"cars","task":"goals"},
    "messages":[{"role":"user","text":"x"}],"system":"sys"})";
  const auto ra = nlohmann::json::parse(a).get<PromptRequest>();
  const auto rb = nlohmann::json::parse(b).get<PromptRequest>();
  EXPECT_EQ(fingerprint(ra, {}), fingerprint(rb, {}));
}

TEST(Fingerprint, MatchesKeySortedCanonicalOracle) {
  // Oracle: hand-build the canonical document with every object's keys in
  // lexicographic order, then hash its compact form.
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    PromptRequest r;
    r.system = fmt::format("system {}", rng() % 97);
    std::vector<std::pair<std::string, std::string>> meta;
    for (int i = 0; i < 4; ++i) meta.emplace_back(fmt::format("k{}", rng() % 1000), fmt::format("v{}", rng()));
    std::shuffle(meta.begin(), meta.end(), rng);
    for (const auto& [k, v] : meta) r.metadata[k] = v;
    r.messages = {{"user", fmt::format("msg {}\n  indented", rng())}};
    GenerationConfig c;
    c.temperature = static_cast<double>(rng() % 20) / 10.0;
    c.n_candidates = 1 + static_cast<int>(rng() % 5);

    nlohmann::ordered_json oracle_meta;
    std::map<std::string, std::string> sorted(r.metadata.begin(), r.metadata.end());
    for (const auto& [k, v] : sorted) oracle_meta[k] = v;
    const auto canonical = canonical_form(r, c);
    // Re-serialize the canonical form through a key-sorting path and check
    // the library's dump already equals it.
    const auto resorted = nlohmann::json::parse(canonical.dump());
    EXPECT_EQ(canonical.dump(), resorted.dump());
    EXPECT_EQ(canonical["request"]["metadata"].dump(), oracle_meta.dump());
    EXPECT_EQ(fingerprint(r, c), sha256_hex(resorted.dump()));
  }
}

TEST(Replay, ReturnsRecordedCandidatesInOrder) {
  Cassette cas;
  GenerationConfig c;
  c.n_candidates = 3;
  cas.put({fingerprint(sample_request(), c), request_summary(sample_request()), {{"a", "b", "c"}, {10, 5}, {}}});
  ReplayProvider replay(cas);
  const auto r = replay.generate(sample_request(), c);
  EXPECT_EQ(r.candidates, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(r.usage.prompt_tokens, 10);
}

TEST(Replay, UnknownFingerprintIsCassetteMiss) {
  ReplayProvider replay(Cassette{});
  try {
    replay.generate(sample_request(), {});
    FAIL() << "expected CassetteMiss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CassetteMiss);
  }
}

TEST(Replay, TokenBudgetIsEnforcedBeforeLookup) {
  auto r = sample_request();
  r.messages[0].text = std::string(4000, 'x');
  GenerationConfig c;
  c.max_tokens = 200;
  ReplayProvider replay(Cassette{}, /*context_window=*/1000);
  try {
    replay.generate(r, c);
    FAIL() << "expected TokenBudgetExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TokenBudgetExceeded);
  }
}

TEST(Recording, RoundTripsThroughAFile) {
  testutil::TempDir dir("cassette");
  GenerationConfig c;
  c.n_candidates = 3;
  auto recorder = std::make_shared<RecordingProvider>(echo_provider({"x", "y", "z", "extra"}));
  const auto live = recorder->generate(sample_request(), c);
  EXPECT_EQ(live.candidates.size(), 3u) << "never more than n_candidates";
  recorder->save(dir / "c.json");

  ReplayProvider replay(Cassette::load(dir / "c.json"));
  EXPECT_EQ(replay.generate(sample_request(), c).candidates, live.candidates);
  const auto j = nlohmann::json::parse(testutil::read_file(dir / "c.json"));
  ASSERT_TRUE(j.is_array());
  EXPECT_TRUE(j[0].contains("request_summary"));
  EXPECT_TRUE(j[0]["response"].contains("usage"));
}

TEST(Recording, HybridReplaysBeforeCallingThrough) {
  std::atomic<int> calls{0};
  auto inner = std::make_shared<ScriptedProvider>([&](const PromptRequest&, const GenerationConfig&) {
    ++calls;
    return std::vector<std::string>{"live"};
  });
  Cassette seed;
  seed.put({fingerprint(sample_request(), {}), "", {{"recorded"}, {}, {}}});
  RecordingProvider hybrid(inner, seed, /*replay_first=*/true);
  EXPECT_EQ(hybrid.generate(sample_request(), {}).candidates.front(), "recorded");
  EXPECT_EQ(calls.load(), 0);
  auto other = sample_request();
  other.system = "different";
  EXPECT_EQ(hybrid.generate(other, {}).candidates.front(), "live");
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(hybrid.snapshot().size(), 2u);
}

TEST(Cassette, PutReplacesSameFingerprint) {
  Cassette c;
  c.put({"f", "", {{"a"}, {}, {}}});
  c.put({"f", "", {{"b"}, {}, {}}});
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c.find("f")->candidates.front(), "b");
  EXPECT_EQ(c.find("g"), nullptr);
}

TEST(Cassette, RejectsMalformedFiles) {
  testutil::TempDir dir("cassette");
  testutil::write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(Cassette::load(dir / "bad.json"), Error);
  EXPECT_THROW(Cassette::load(dir / "missing.json"), Error);
}

TEST(Cassette, BundledCassettesHaveUniqueFingerprints) {
  for (const auto* name : {"cars.json", "ablation.json"}) {
    const auto j = nlohmann::json::parse(testutil::read_file(testutil::cassette(name)));
    std::set<std::string> seen;
    for (const auto& e : j) EXPECT_TRUE(seen.insert(e["fingerprint"].get<std::string>()).second) << name;
    EXPECT_GT(seen.size(), 10u);
  }
}

TEST(Replay, ConcurrentLookupsAgree) {
  Cassette cas;
  for (int i = 0; i < 32; ++i) {
    auto r = sample_request();
    r.system = std::to_string(i);
    cas.put({fingerprint(r, {}), "", {{std::to_string(i * i)}, {}, {}}});
  }
  ReplayProvider replay(cas);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 32; ++i) {
        auto r = sample_request();
        r.system = std::to_string(i);
        if (replay.generate(r, {}).candidates.front() != std::to_string(i * i)) ++mismatches;
      }
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(ScoreCorrectness, ParsesAndClamps) {
  EXPECT_DOUBLE_EQ(parse_probability("0.92"), 0.92);
  EXPECT_DOUBLE_EQ(parse_probability("I'd say 0.3 or so"), 0.3);
  EXPECT_DOUBLE_EQ(parse_probability("1.7"), 1.0);
  EXPECT_DOUBLE_EQ(parse_probability("-2"), 0.0);
  try {
    parse_probability("certainly correct");
    FAIL() << "expected UnparseableScore";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnparseableScore);
  }
}

TEST(ScoreCorrectness, ClampOracleOverRandomReplies) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const double x = dist(rng);
    const auto reply = fmt::format("{:.6f}", x);
    const double parsed = std::stod(reply);
    EXPECT_DOUBLE_EQ(parse_probability(reply), std::max(0.0, std::min(1.0, parsed)));
  }
}

TEST(ScoreCorrectness, UsesTheScoreTask) {
  auto log = std::make_shared<CallLog>(echo_provider({"0.4"}));
  EXPECT_DOUBLE_EQ(score_correctness(*log, "print(1)", "goal", {}), 0.4);
  EXPECT_EQ(log->count_task("score"), 1u);
  EXPECT_THROW(score_correctness(*log, "", "goal", {}), Error);
}

TEST(Unavailable, AlwaysFails) {
  UnavailableProvider p;
  try {
    p.generate(sample_request(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
  }
}

TEST(Live, BodyRendersFimAsInstruction) {
  LiveProviderOptions o;
  o.api_key = "k";
  LiveProvider live(o);
  PromptRequest r;
  r.mode = PromptMode::FillInMiddle;
  r.fim_prefix = "PRE";
  r.fim_suffix = "SUF";
  r.system = "sys";
  r.messages = {{"user", "fill it"}};
  GenerationConfig c;
  c.n_candidates = 2;
  c.seed = 5;
  const auto body = live.build_body(r, c);
  EXPECT_EQ(body["n"], 2);
  EXPECT_EQ(body["seed"], 5);
  const auto dumped = body["messages"].dump();
  EXPECT_NE(dumped.find("PRE"), std::string::npos);
  EXPECT_NE(dumped.find("SUF"), std::string::npos);
}

TEST(Live, UnreachableEndpointIsProviderUnavailable) {
  LiveProviderOptions o;
  o.base_url = "http://127.0.0.1:9";
  o.api_key = "k";
  o.max_retries = 1;
  o.initial_backoff = std::chrono::milliseconds(1);
  o.request_timeout = std::chrono::seconds(2);
  LiveProvider live(o);
  try {
    live.generate(sample_request(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
  }
}

TEST(ProviderSetup, ReplayNeedsACassette) {
  ProviderSetup s;
  s.mode = ProviderMode::Replay;
  EXPECT_THROW(make_provider(s), Error);
  s.cassette = testutil::cassette("cars.json");
  EXPECT_EQ(make_provider(s)->name(), "replay");
  EXPECT_EQ(provider_mode_from_string("hybrid"), ProviderMode::Hybrid);
  EXPECT_THROW(provider_mode_from_string("psychic"), Error);
}
