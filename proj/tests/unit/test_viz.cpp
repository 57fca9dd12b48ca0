#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/viz/codegen.hpp"
#include "vizpipe/viz/generator.hpp"
#include "vizpipe/viz/json_schema.hpp"
#include "vizpipe/viz/sandbox.hpp"
#include "vizpipe/viz/scaffold.hpp"

using namespace vizpipe;
using namespace vizpipe::viz;
namespace tu = vizpipe::testutil;

namespace {

const ScaffoldLibrary& lib() { return ScaffoldLibrary::bundled(); }

CandidateProgram python_candidate(const std::string& stub, const std::string& grammar = "matplotlib") {
  CandidateProgram c;
  c.scaffold_ref = grammar;
  c.stub = stub;
  c.assembled_code = assemble(lib().get(grammar), stub);
  return c;
}

}  // namespace

// ---- JSON schema subset ----------------------------------------------------

TEST(JsonSchema, TypesRequiredAndAdditionalProperties) {
  JsonSchema s(nlohmann::json::parse(R"({
    "type": "object", "required": ["a"], "additionalProperties": false,
    "properties": {"a": {"type": "integer", "minimum": 1, "maximum": 3}, "b": {"type": ["string", "null"]}}})"));
  EXPECT_TRUE(s.is_valid({{"a", 2}}));
  EXPECT_TRUE(s.is_valid({{"a", 2.0}, {"b", nullptr}}));
  EXPECT_FALSE(s.is_valid({{"b", "x"}}));
  EXPECT_FALSE(s.is_valid({{"a", 4}}));
  EXPECT_FALSE(s.is_valid({{"a", 1.5}}));
  EXPECT_FALSE(s.is_valid({{"a", 1}, {"c", 1}}));
  EXPECT_FALSE(s.is_valid({{"a", 1}, {"b", 3}}));
  EXPECT_FALSE(s.is_valid(nlohmann::json::array()));
}

TEST(JsonSchema, AnyOfOneOfAndReferences) {
  JsonSchema s(nlohmann::json::parse(R"({
    "definitions": {"small": {"type": "number", "maximum": 10}, "even": {"enum": [2, 4, 6, 8, 20]}},
    "type": "object",
    "properties": {
      "any": {"anyOf": [{"$ref": "#/definitions/small"}, {"type": "string"}]},
      "one": {"oneOf": [{"$ref": "#/definitions/small"}, {"$ref": "#/definitions/even"}]},
      "list": {"type": "array", "minItems": 1, "maxItems": 2, "items": {"const": "x"}}
    }})"));
  EXPECT_TRUE(s.is_valid({{"any", 3}}));
  EXPECT_TRUE(s.is_valid({{"any", "s"}}));
  EXPECT_FALSE(s.is_valid({{"any", 30}}));
  EXPECT_TRUE(s.is_valid({{"one", 3}}));    // small only
  EXPECT_TRUE(s.is_valid({{"one", 20}}));   // even only
  EXPECT_FALSE(s.is_valid({{"one", 4}}));   // both
  EXPECT_FALSE(s.is_valid({{"one", 11}}));  // neither
  EXPECT_TRUE(s.is_valid({{"list", {"x"}}}));
  EXPECT_FALSE(s.is_valid({{"list", nlohmann::json::array()}}));
  EXPECT_FALSE(s.is_valid({{"list", {"x", "x", "x"}}}));
  EXPECT_FALSE(s.is_valid({{"list", {"y"}}}));
}

TEST(JsonSchema, ErrorsNameThePath) {
  JsonSchema s(nlohmann::json{{"type", "object"}, {"properties", {{"enc", {{"type", "object"}, {"required", {"x"}}}}}}});
  const auto errors = s.validate({{"enc", nlohmann::json::object()}});
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_NE(errors[0].find("/enc"), std::string::npos);
  EXPECT_NE(errors[0].find("\"x\""), std::string::npos);
}

TEST(JsonSchema, DanglingReferenceIsConfigError) {
  JsonSchema s(nlohmann::json{{"$ref", "#/definitions/missing"}});
  try {
    s.validate(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(JsonSchema, BundledVegaliteSubsetAcceptsTypicalSpecs) {
  const auto& schema = *lib().get("vegalite").schema;
  EXPECT_TRUE(schema.is_valid(nlohmann::json::parse(R"({
    "data": {"url": "x.csv"}, "mark": {"type": "bar", "tooltip": true}, "title": "t",
    "encoding": {"x": {"field": "a", "type": "nominal"}, "y": {"field": "b", "type": "quantitative", "aggregate": "mean"}}})")));
  EXPECT_FALSE(schema.is_valid(nlohmann::json::parse(R"({"data": {"url": "x.csv"}})")));
  EXPECT_FALSE(schema.is_valid(nlohmann::json::parse(R"({"mark": "sparkle"})")));
  EXPECT_FALSE(schema.is_valid(nlohmann::json::parse(R"({"mark": "bar", "layers": []})")));
}

// ---- scaffolds -------------------------------------------------------------

TEST(Scaffold, BundledLibraryListsTheGrammars) {
  const auto ids = lib().grammar_ids();
  EXPECT_EQ(ids, (std::vector<std::string>{"matplotlib", "seaborn", "vegalite"}));
  EXPECT_EQ(lib().get("vegalite").execution_mode, ExecutionMode::DeclarativeValidation);
  EXPECT_EQ(lib().get("matplotlib").execution_mode, ExecutionMode::Subprocess);
  EXPECT_TRUE(lib().get("vegalite").schema != nullptr);
  try {
    lib().get("ggplot");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownGrammar);
  }
  EXPECT_EQ(lib().describe().size(), 3u);
}

TEST(Scaffold, EveryBundledScaffoldPassesItsSelfTest) {
  for (const auto& id : lib().grammar_ids()) {
    const auto& s = lib().get(id);
    const auto c = run_stub(s, s.self_test_stub, tu::corpus("cars.csv"), {});
    EXPECT_EQ(c.status, CandidateStatus::CompiledOk) << id << ": " << c.error_detail.value_or("");
    ASSERT_TRUE(c.artifact.has_value()) << id;
    EXPECT_TRUE(std::filesystem::exists(c.artifact->path)) << id;
  }
}

TEST(Scaffold, AssemblyKeepsEveryPartVerbatim) {
  std::mt19937 rng(2024);
  const std::string alphabet = "abcdefXYZ0123 \t\n{}[]()\"',:;#<>=+-*/\\`~!@$%^&|?._";
  for (int i = 0; i < 500; ++i) {
    const auto& s = lib().get(lib().grammar_ids()[static_cast<std::size_t>(i) % 3]);
    std::string stub;
    const auto len = 1 + rng() % 200;
    for (std::size_t k = 0; k < len; ++k) stub += alphabet[rng() % alphabet.size()];
    stub += 'q';  // never blank
    const auto code = assemble(s, stub);
    ASSERT_EQ(code.size(), s.preamble.size() + stub.size() + s.postamble.size());
    EXPECT_EQ(code.compare(0, s.preamble.size(), s.preamble), 0);
    EXPECT_EQ(code.compare(s.preamble.size(), stub.size(), stub), 0);
    EXPECT_EQ(code.compare(s.preamble.size() + stub.size(), std::string::npos, s.postamble), 0);
  }
}

TEST(Scaffold, BlankStubIsRejected) {
  for (const auto* stub : {"", "   ", "\n\t\n"}) {
    try {
      assemble(lib().get("matplotlib"), stub);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EmptyStub);
    }
  }
}

TEST(Scaffold, TemplateNeedsExactlyOneMarker) {
  EXPECT_NO_THROW(ScaffoldLibrary::from_template("a<stub>b", "g", "python", ExecutionMode::Subprocess));
  EXPECT_THROW(ScaffoldLibrary::from_template("ab", "g", "python", ExecutionMode::Subprocess), Error);
  EXPECT_THROW(ScaffoldLibrary::from_template("<stub><stub>", "g", "python", ExecutionMode::Subprocess), Error);
  const auto s = ScaffoldLibrary::from_template("pre\n<stub>\npost", "g", "python", ExecutionMode::Subprocess);
  EXPECT_EQ(s.preamble, "pre\n");
  EXPECT_EQ(s.postamble, "\npost");
  EXPECT_EQ(s.template_text(), "pre\n<stub>\npost");
}

// ---- code generation post-processing --------------------------------------

TEST(PrepareStub, StripsFencesAndProse) {
  const auto& s = lib().get("matplotlib");
  const auto stub = prepare_stub(s, "Here is the code:\n```python\nfig, ax = plt.subplots()\nreturn plt\n```\nHope it helps");
  EXPECT_EQ(stub, "    fig, ax = plt.subplots()\n    return plt");
}

TEST(PrepareStub, CutsAnEchoedPythonScaffold) {
  const auto& s = lib().get("matplotlib");
  const auto raw = s.preamble + "    ax = data.plot()\n    return plt\n" + s.postamble;
  EXPECT_EQ(prepare_stub(s, raw), "    ax = data.plot()\n    return plt");
}

TEST(PrepareStub, KeepsNestedIndentationInPython) {
  const auto& s = lib().get("matplotlib");
  const auto stub = prepare_stub(s, "for k in [1, 2]:\n    print(k)\nreturn plt");
  EXPECT_EQ(stub, "    for k in [1, 2]:\n        print(k)\n    return plt");
}

TEST(PrepareStub, VegaliteKeepsNestedClosersAndDropsTrailingComma) {
  const auto& s = lib().get("vegalite");
  const std::string members = "  \"mark\": \"bar\",\n  \"encoding\": {\n    \"x\": {\"field\": \"origin\", \"type\": \"nominal\"}\n  }";
  EXPECT_EQ(prepare_stub(s, members + ",\n"), members);
  const auto echoed = s.preamble + members + s.postamble;
  EXPECT_EQ(prepare_stub(s, echoed), members);
}

TEST(PrepareStub, ProseOnlyBecomesEmpty) {
  EXPECT_EQ(prepare_stub(lib().get("matplotlib"), "I cannot help with that."), "");
}

TEST(CodegenPrompt, IsFillInTheMiddleWithScaffoldHalves) {
  const auto& s = lib().get("vegalite");
  goals::Goal g{0, "q?", "bar chart of `mpg`", "r"};
  const auto p = build_codegen_prompt("dataset: cars\n", g, s);
  EXPECT_EQ(p.mode, llm::PromptMode::FillInMiddle);
  EXPECT_EQ(*p.fim_prefix, s.preamble);
  EXPECT_EQ(*p.fim_suffix, s.postamble);
  EXPECT_EQ(p.metadata.at("task"), "codegen");
  EXPECT_EQ(p.metadata.at("grammar"), "vegalite");
  const auto& user = p.messages.back().text;
  EXPECT_NE(user.find("bar chart of `mpg`"), std::string::npos);
  EXPECT_NO_THROW(p.validate());
}

// ---- sandbox -----------------------------------------------------------------

TEST(Sandbox, DeclarativeRunsSpawnNoProcess) {
  const auto before = spawned_process_count();
  const std::string good = "  \"mark\": \"bar\",\n  \"encoding\": {\"x\": {\"field\": \"origin\", \"type\": \"nominal\"}}";
  const auto ok = run_stub(lib().get("vegalite"), good, tu::corpus("cars.csv"), {});
  EXPECT_EQ(ok.status, CandidateStatus::CompiledOk);
  EXPECT_EQ(ok.artifact->kind, "spec");
  EXPECT_EQ(ok.artifact->spec["data"]["url"], tu::corpus("cars.csv").string());
  const auto bad_json = run_stub(lib().get("vegalite"), "  \"mark\": \"bar\",,", tu::corpus("cars.csv"), {});
  EXPECT_EQ(bad_json.status, CandidateStatus::CompileError);
  const auto bad_schema = run_stub(lib().get("vegalite"), "  \"mark\": \"sparkle\"", tu::corpus("cars.csv"), {});
  EXPECT_EQ(bad_schema.status, CandidateStatus::CompileError);
  const auto bad_field = run_stub(lib().get("vegalite"),
                                  "  \"mark\": \"bar\",\n  \"encoding\": {\"x\": {\"field\": \"Origin\", \"type\": \"nominal\"}}",
                                  tu::corpus("cars.csv"), {});
  EXPECT_EQ(bad_field.status, CandidateStatus::RuntimeError);
  EXPECT_NE(bad_field.error_detail->find("Origin"), std::string::npos);
  EXPECT_EQ(spawned_process_count(), before);
}

TEST(Sandbox, DerivedFieldsAreKnown) {
  const std::string stub =
      "  \"transform\": [{\"calculate\": \"datum.mpg * 2\", \"as\": \"double_mpg\"}],\n"
      "  \"mark\": \"point\",\n  \"encoding\": {\"x\": {\"field\": \"double_mpg\", \"type\": \"quantitative\"}}";
  EXPECT_EQ(run_stub(lib().get("vegalite"), stub, tu::corpus("cars.csv"), {}).status, CandidateStatus::CompiledOk);
}

TEST(Sandbox, SleepingTwiceTheLimitTimesOut) {
  ExecutionLimits limits;
  limits.timeout_s = 3.0;
  const auto start = std::chrono::steady_clock::now();
  const auto c = execute(python_candidate("    import time\n    time.sleep(6)\n    return plt"), tu::corpus("cars.csv"), limits);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(c.status, CandidateStatus::Timeout);
  EXPECT_LT(elapsed, 5.9);
}

TEST(Sandbox, WritingOutsideTheWorkDirIsDetected) {
  tu::TempDir root("sbx");
  Sandbox sandbox(SandboxOptions{root.path(), {}, true, 1});
  const auto c = sandbox.execute(
      python_candidate("    open('../escape.txt', 'w').write('x')\n    fig, ax = plt.subplots()\n    return plt"),
      tu::corpus("cars.csv"), {});
  EXPECT_EQ(c.status, CandidateStatus::RuntimeError);
  ASSERT_EQ(c.sandbox_violations.size(), 1u);
  EXPECT_NE(c.sandbox_violations[0].find("escape.txt"), std::string::npos);
}

TEST(Sandbox, AuditedDirectoriesAreDiffed) {
  tu::TempDir root("sbx");
  tu::TempDir watched("watched");
  tu::write_file(watched / "keep.txt", "original");
  Sandbox sandbox(SandboxOptions{root.path(), {watched.path()}, true, 1});
  const auto stub = fmt::format("    open({}, 'w').write('changed')\n    fig, ax = plt.subplots()\n    return plt",
                                nlohmann::json((watched / "keep.txt").string()).dump());
  const auto c = sandbox.execute(python_candidate(stub), tu::corpus("cars.csv"), {});
  EXPECT_EQ(c.status, CandidateStatus::RuntimeError);
  EXPECT_FALSE(c.sandbox_violations.empty());

  // Writes inside the work directory are fine.
  const auto ok = sandbox.execute(
      python_candidate("    open('scratch.txt', 'w').write('x')\n    fig, ax = plt.subplots()\n    return plt"),
      tu::corpus("cars.csv"), {});
  EXPECT_EQ(ok.status, CandidateStatus::CompiledOk) << ok.error_detail.value_or("");
  EXPECT_TRUE(ok.sandbox_violations.empty());
}

TEST(Sandbox, ClassifiesCompileAndRuntimeErrors) {
  const auto syntax = execute(python_candidate("    fig, ax = plt.subplots(\n    return plt"), tu::corpus("cars.csv"));
  EXPECT_EQ(syntax.status, CandidateStatus::CompileError);
  const auto runtime = execute(python_candidate("    raise ValueError('boom')"), tu::corpus("cars.csv"));
  EXPECT_EQ(runtime.status, CandidateStatus::RuntimeError);
  EXPECT_NE(runtime.error_detail->find("boom"), std::string::npos);
  const auto missing_column = execute(python_candidate("    plt.plot(data['nope'])\n    return plt"), tu::corpus("cars.csv"));
  EXPECT_EQ(missing_column.status, CandidateStatus::RuntimeError);
  EXPECT_FALSE(missing_column.artifact.has_value());
}

TEST(Sandbox, ExecutedCandidatesAreReturnedUnchanged) {
  auto c = python_candidate("    return plt");
  c.status = CandidateStatus::CompileError;
  c.error_detail = "kept";
  const auto before = spawned_process_count();
  const auto out = execute(c, tu::corpus("cars.csv"));
  EXPECT_EQ(out, c);
  EXPECT_EQ(spawned_process_count(), before);
}

TEST(Sandbox, ExecuteAllPreservesOrder) {
  std::vector<CandidateProgram> batch;
  for (int i = 0; i < 4; ++i) {
    auto c = python_candidate(i % 2 ? "    raise ValueError('odd')" : "    fig, ax = plt.subplots()\n    return plt");
    c.candidate_index = i;
    batch.push_back(c);
  }
  const auto out = Sandbox::shared().execute_all(batch, tu::corpus("cars.csv"), {});
  ASSERT_EQ(out.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(out[static_cast<std::size_t>(i)].candidate_index, i);
    EXPECT_EQ(out[static_cast<std::size_t>(i)].status, i % 2 ? CandidateStatus::RuntimeError : CandidateStatus::CompiledOk);
  }
}

TEST(Candidate, JsonRoundTrip) {
  auto c = python_candidate("    return plt");
  c.status = CandidateStatus::RuntimeError;
  c.error_detail = "x";
  c.correctness_score = 0.5;
  c.sandbox_violations = {"a"};
  EXPECT_EQ(nlohmann::json(c).get<CandidateProgram>(), c);
  for (auto s : {CandidateStatus::Unexecuted, CandidateStatus::CompiledOk, CandidateStatus::CompileError,
                 CandidateStatus::RuntimeError, CandidateStatus::Timeout})
    EXPECT_EQ(candidate_status_from_string(to_string(s)), s);
}
