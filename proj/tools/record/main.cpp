// Records the bundled cassettes by running the pipeline against the
// synthetic model. Re-running it reproduces the files byte for byte.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/bench/harness.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/fixtures/scenarios.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/hash.hpp"
#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/service/api.hpp"

namespace fs = std::filesystem;
using namespace vizpipe;
namespace sc = fixtures::scenario;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

// Runs tools/synthetic_igm.py and keeps every exchange.
class ScriptIgm final : public info::IgmProvider {
 public:
  ScriptIgm(fs::path script, fs::path scratch) : script_(std::move(script)), scratch_(std::move(scratch)) {
    fs::create_directories(scratch_);
  }

  std::string stylize(const std::string& png, const std::string& prompt, double strength,
                      std::optional<std::int64_t> seed) override {
    const auto in = scratch_ / "in.png";
    const auto out = scratch_ / "out.png";
    write_file(in, png);
    const auto prompt_file = scratch_ / "prompt.txt";
    write_file(prompt_file, prompt);
    const auto cmd = fmt::format("python3 '{}' '{}' '{}' \"$(cat '{}')\" {} {}", script_.string(), in.string(),
                                 out.string(), prompt_file.string(), strength, seed.value_or(0));
    if (std::system(cmd.c_str()) != 0) raise(ErrorCode::ProviderUnavailable, "synthetic image model failed");
    auto result = read_file(out);
    cassette.put(info::igm_fingerprint(png, prompt, strength, seed), result);
    return result;
  }
  std::string name() const override { return "synthetic-igm"; }

  info::CassetteIgm cassette;

 private:
  fs::path script_;
  fs::path scratch_;
};

void record_cars(const fs::path& corpus, const fs::path& out_dir, const fs::path& igm_script, const fs::path& fixtures) {
  auto model = fixtures::SyntheticModel::for_corpus(corpus);
  auto recorder = std::make_shared<llm::RecordingProvider>(model.provider());
  auto igm = std::make_shared<ScriptIgm>(igm_script, fs::temp_directory_path() / "vizpipe-record-igm");

  service::ApiConfig config;
  config.provider = recorder;
  config.igm = igm;
  config.work_root = fs::temp_directory_path() / "vizpipe-record-cars";
  fs::remove_all(config.work_root);
  service::Api api(config);

  const auto cars = corpus / sc::kCarsFile;
  const auto upload = api.upload(sc::kCarsFile, read_file(cars), std::nullopt, {{"n_goals", sc::kGoals}});
  const auto id = upload["session_id"].get<std::string>();
  auto visualize = [&](nlohmann::json req) {
    auto body = api.visualize(id, req);
    spdlog::info("visualization {} [{}]: {}", body["index"].get<int>(), req.dump(),
                 body["candidate"]["status"].get<std::string>());
    return body["index"].get<int>();
  };

  std::vector<int> vega;
  for (int g = 0; g < sc::kGoals; ++g) vega.push_back(visualize({{"goal_index", g}, {"grammar_id", "vegalite"}}));
  const int mpl0 = visualize({{"goal_index", 0}, {"grammar_id", "matplotlib"}});
  const int mpl_pie = visualize({{"goal_index", sc::kPieGoal}, {"grammar_id", "matplotlib"}});
  visualize({{"goal_index", 0}, {"grammar_id", "seaborn"}});
  visualize({{"nl_goal", sc::kNlGoal}, {"grammar_id", "vegalite"}});
  visualize({{"nl_goal", sc::kNlGoal}, {"grammar_id", "matplotlib"}});
  for (const auto* policy : {"self_consistency", "correctness_probability", "compile_discard"})
    visualize({{"goal_index", 0},
               {"grammar_id", "vegalite"},
               {"policy", {{"kind", policy}, {"n_candidates", sc::kPolicyCandidates}}}});

  for (int k : {vega[0], mpl0}) {
    api.explain(id, k);
    api.recommend(id, k, {{"k", sc::kRecommendK}});
    api.evaluate(id, k);
  }
  for (int k : {vega[sc::kPieGoal], mpl_pie}) {
    api.evaluate(id, k);
    api.repair(id, k, nlohmann::json::object());
    api.evaluate(id, k);
  }
  for (const auto& c : sc::kIgmCases)
    api.infographic(id, mpl0, {{"style_ids", c.styles}, {"strength", c.strength}, {"seed", c.seed}});
  for (const auto& instruction : sc::kVegaliteRefinements) api.refine(id, vega[0], {{"instruction", instruction}});
  for (const auto& instruction : sc::kPythonRefinements) api.refine(id, mpl0, {{"instruction", instruction}});

  // Standalone requests used by the CLI examples and unit tests.
  for (const auto& c : sc::kIgmCases) {
    info::StyleLibrary styles = info::StyleLibrary::bundled();
    auto req = info::compose_request(fixtures / "chart.png", c.styles, std::nullopt, c.strength, c.seed, styles);
    igm->stylize(read_file(fixtures / "chart.png"), req.style_prompt, req.strength, req.seed);
  }

  recorder->save(out_dir / "cars.json");
  igm->cassette.save(out_dir / "igm.json");
  std::cout << fmt::format("cars.json: {} exchanges, igm.json written\n", recorder->snapshot().size());
}

void record_ablation(const fs::path& corpus, const fs::path& out_dir) {
  std::vector<std::string> names;
  bench::BenchmarkConfig config;
  for (const auto& e : fs::directory_iterator(corpus))
    if (e.path().extension() == ".csv") config.datasets.push_back(e.path());
  std::sort(config.datasets.begin(), config.datasets.end());
  for (const auto& d : config.datasets) names.push_back(d.stem().string());
  config.compute_sevq = true;

  auto model = fixtures::SyntheticModel::for_corpus(corpus, fixtures::ablation_faults(names));
  llm::RecordingProvider recorder(model.provider());
  const auto report = bench::run_benchmark(config, recorder);
  recorder.save(out_dir / "ablation.json");
  std::cout << fmt::format("ablation.json: {} exchanges, overall VER {:.1f}%\n", recorder.snapshot().size(),
                           report.ver);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Record the bundled cassettes from the synthetic model"};
  fs::path root = fs::path(VIZPIPE_SOURCE_DIR);
  app.add_option("--root", root, "Project root")->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::info);
  try {
    const auto corpus = root / "data" / "corpus";
    const auto out = root / "data" / "cassettes";
    fs::create_directories(out);
    record_cars(corpus, out, root / "tools" / "synthetic_igm.py", root / "data" / "fixtures");
    record_ablation(corpus, out);
  } catch (const Error& e) {
    std::cerr << e.what() << " " << e.details().dump() << "\n";
    return exit_code_for(e.code());
  }
  return 0;
}
