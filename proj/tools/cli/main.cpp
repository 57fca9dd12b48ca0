// vizpipe command line: summarize | goals | viz | ops | benchmark | serve.
// Every subcommand prints the JSON document the HTTP API returns for the
// same request.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vizpipe/bench/harness.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/live.hpp"
#include "vizpipe/service/api.hpp"
#include "vizpipe/service/server.hpp"
#include "vizpipe/summary/summarizer.hpp"

namespace fs = std::filesystem;
using namespace vizpipe;

namespace {

struct Options {
  std::string provider = "replay";
  std::string cassette;
  std::string model;
  double temperature = 0.0;
  int n = 1;
  std::string log_level = "warn";
  std::string out;
  std::uint64_t seed = 0;

  std::string data;
  std::string condition = "enrich";
  std::string grammar = "vegalite";
  int goal_index = 0;
  std::string goal;
  std::string policy = "compile_discard";
  int n_goals = 5;
  std::string work;
  double timeout_s = 30.0;

  // ops
  std::string op;
  std::string instruction;
  int k = 3;
  int depth = 2;
  std::vector<std::string> styles;
  std::string custom_prompt;
  double strength = info::kDefaultStrength;
  std::string igm;
  std::int64_t igm_seed = 7;

  // benchmark
  std::vector<std::string> datasets;
  std::vector<std::string> grammars;
  std::vector<std::string> conditions;
  std::string format = "json";
  bool sevq = false;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string persist;
  int ttl = 3600;
  std::size_t max_upload = service::kDefaultUploadCap;
};

llm::ProviderPtr make_provider(const Options& o) {
  llm::ProviderSetup setup;
  setup.mode = llm::provider_mode_from_string(o.provider);
  if (!o.cassette.empty()) setup.cassette = o.cassette;
  if (!o.model.empty()) setup.live.model_id = o.model;
  return llm::make_provider(setup);
}

// Defers construction so commands that never call the model (e.g.
// summarize without enrichment) need no cassette.
class LazyProvider final : public llm::TextProvider {
 public:
  explicit LazyProvider(const Options& o) : options_(o) {}
  llm::ProviderResponse generate(const llm::PromptRequest& r, const llm::GenerationConfig& c) override {
    std::call_once(once_, [&] { inner_ = make_provider(options_); });
    return inner_->generate(r, c);
  }
  std::string name() const override { return options_.provider; }

 private:
  const Options& options_;
  std::once_flag once_;
  llm::ProviderPtr inner_;
};

llm::GenerationConfig generation(const Options& o) {
  auto g = llm::GenerationConfig::benchmark_preset();
  g.temperature = o.temperature;
  if (!o.model.empty()) g.model_id = o.model;
  g.validate();
  return g;
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  f << text << "\n";
  if (!f) raise(ErrorCode::IoError, "cannot write " + o.out);
  spdlog::info("wrote {}", o.out);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

info::IgmPtr make_igm(const std::string& spec) {
  if (spec.empty()) return nullptr;
  if (spec == "identity") return std::make_shared<info::IdentityIgm>();
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) return std::make_shared<info::HttpIgm>(spec);
  return info::CassetteIgm::load(spec);
}

service::ApiConfig api_config(const Options& o, llm::ProviderPtr provider) {
  service::ApiConfig c;
  c.provider = std::move(provider);
  c.igm = make_igm(o.igm);
  if (!o.work.empty()) c.work_root = o.work;
  if (!o.persist.empty()) c.persist_dir = fs::path(o.persist);
  c.session_ttl = std::chrono::seconds(o.ttl);
  c.max_upload_bytes = o.max_upload;
  c.n_goals = o.n_goals;
  c.condition = summary::summary_condition_from_string(o.condition);
  c.default_grammar = o.grammar;
  c.generation = generation(o);
  c.limits.timeout_s = o.timeout_s;
  c.repair_depth = o.depth;
  c.sample_seed = o.seed;
  return c;
}

summary::DatasetSummary summarize(const Options& o, llm::TextProvider& provider) {
  auto s = summary::build_base_summary(summary::ingest(o.data), summary::kDefaultSampleN, o.seed);
  if (summary::summary_condition_from_string(o.condition) == summary::SummaryCondition::Enrich) {
    auto enriched = summary::enrich_summary(s, provider, generation(o));
    if (enriched.warning) spdlog::warn("enrichment skipped: {}", *enriched.warning);
    s = std::move(enriched.summary);
  }
  return s;
}

nlohmann::json visualize_request(const Options& o) {
  nlohmann::json req = {{"grammar_id", o.grammar},
                        {"condition", o.condition},
                        {"policy", {{"kind", o.policy}, {"n_candidates", o.n}, {"temperature_override", nullptr}}}};
  if (!o.goal.empty()) req["nl_goal"] = o.goal;
  else req["goal_index"] = o.goal_index;
  return req;
}

// Uploads the dataset and renders one visualization; returns (session, body).
std::pair<std::string, nlohmann::json> first_visualization(service::Api& api, const Options& o) {
  const auto upload = api.upload(fs::path(o.data).filename().string(), read_file(o.data), std::nullopt,
                                 {{"condition", o.condition}, {"n_goals", o.n_goals}});
  const auto id = upload["session_id"].get<std::string>();
  return {id, api.visualize(id, visualize_request(o))};
}

int run_viz(const Options& o) {
  service::Api api(api_config(o, std::make_shared<LazyProvider>(o)));
  const auto [id, body] = first_visualization(api, o);
  const auto& artifact = body["candidate"]["artifact"];
  if (artifact.is_object()) std::cerr << "artifact: " << artifact["path"].get<std::string>() << "\n";
  emit(o, body.dump(2));
  return 0;
}

int run_ops(const Options& o) {
  service::Api api(api_config(o, std::make_shared<LazyProvider>(o)));
  const auto [id, vis] = first_visualization(api, o);
  const int k = vis["index"].get<int>();
  nlohmann::json out;
  if (o.op == "refine") {
    out = api.refine(id, k, {{"instruction", o.instruction}});
  } else if (o.op == "explain") {
    out = api.explain(id, k);
  } else if (o.op == "evaluate") {
    out = api.evaluate(id, k);
  } else if (o.op == "repair") {
    api.evaluate(id, k);
    out = api.repair(id, k, {{"depth", o.depth}});
  } else if (o.op == "recommend") {
    out = api.recommend(id, k, {{"k", o.k}});
  } else if (o.op == "infographic") {
    nlohmann::json req = {{"style_ids", o.styles}, {"strength", o.strength}, {"seed", o.igm_seed}};
    if (!o.custom_prompt.empty()) req["custom_prompt"] = o.custom_prompt;
    out = api.infographic(id, k, req);
    if (auto file = api.artifact_file(out["image_url"].get<std::string>().substr(std::string("/artifacts/").size())))
      std::cerr << "image: " << file->string() << "\n";
  }
  emit(o, out.dump(2));
  return 0;
}

int run_benchmark(const Options& o) {
  bench::BenchmarkConfig c;
  for (const auto& d : o.datasets) {
    if (fs::is_directory(d)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(d))
        if (e.path().extension() == ".csv" || e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      c.datasets.insert(c.datasets.end(), files.begin(), files.end());
    } else {
      c.datasets.emplace_back(d);
    }
  }
  c.n_goals_per_dataset = o.n_goals;
  if (!o.grammars.empty()) c.grammars = o.grammars;
  if (!o.conditions.empty()) {
    c.conditions.clear();
    for (const auto& s : o.conditions) c.conditions.push_back(summary::summary_condition_from_string(s));
  }
  c.generation = generation(o);
  c.compute_sevq = o.sevq;
  c.limits.timeout_s = o.timeout_s;
  c.sample_seed = o.seed;
  LazyProvider provider(o);
  const auto report = bench::run_benchmark(c, provider);
  emit(o, bench::emit_report(report, bench::report_format_from_string(o.format)));
  return 0;
}

int run_serve(const Options& o) {
  // Block termination signals before any thread starts so sigwait below
  // receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Api api(api_config(o, std::make_shared<LazyProvider>(o)));
  service::ServerOptions so;
  so.host = o.host;
  so.port = static_cast<unsigned short>(o.port);
  if (!o.static_dir.empty()) so.static_dir = fs::path(o.static_dir);
  service::Server server(api, so);
  const auto port = server.start();
  std::cout << fmt::format("serving on http://{}:{}", o.host, port) << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("vizpipe");
  spdlog::set_default_logger(logger);

  Options o;
  CLI::App app{"vizpipe: turn datasets into visualizations with a language model"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a TOML or INI file");
  app.add_option("--provider", o.provider, "Model backend")
      ->check(CLI::IsMember({"live", "replay", "hybrid"}))
      ->envname("VIZPIPE_PROVIDER");
  app.add_option("--cassette", o.cassette, "Recorded exchanges for replay/hybrid")->envname("VIZPIPE_CASSETTE");
  app.add_option("--model", o.model, "Model id for live calls")->envname("VIZPIPE_MODEL");
  app.add_option("--temperature", o.temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
  app.add_option("--n", o.n, "Candidates per visualization")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Write the JSON result here instead of stdout");
  app.add_option("--seed", o.seed, "Sample seed for summaries");
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error")->envname("VIZPIPE_LOG_LEVEL");
  app.add_option("--work", o.work, "Directory for sessions, sandbox runs and artifacts");
  app.add_option("--timeout", o.timeout_s, "Execution timeout per program in seconds")->check(CLI::PositiveNumber);

  const auto conditions = CLI::IsMember({"no_enrich", "enrich", "schema", "no_summary"});
  auto add_data = [&](CLI::App* cmd) { cmd->add_option("--data", o.data, "Dataset (CSV or JSON records)")->required()->check(CLI::ExistingFile); };
  auto add_condition = [&](CLI::App* cmd) { cmd->add_option("--condition", o.condition, "Summary condition")->check(conditions); };
  auto add_viz = [&](CLI::App* cmd) {
    cmd->add_option("--grammar", o.grammar, "Visualization grammar");
    cmd->add_option("--goal-index", o.goal_index, "Which generated goal to draw")->check(CLI::NonNegativeNumber);
    cmd->add_option("--goal", o.goal, "Draw this question instead of a generated goal");
    cmd->add_option("--policy", o.policy, "Candidate filter")
        ->check(CLI::IsMember({"compile_discard", "self_consistency", "correctness_probability"}));
    cmd->add_option("--n-goals", o.n_goals, "Goals generated on upload")->check(CLI::PositiveNumber);
  };

  auto* summarize_cmd = app.add_subcommand("summarize", "Profile a dataset and print its summary");
  add_data(summarize_cmd);
  add_condition(summarize_cmd);

  auto* goals_cmd = app.add_subcommand("goals", "Generate exploration goals for a dataset");
  add_data(goals_cmd);
  add_condition(goals_cmd);
  goals_cmd->add_option("--n-goals", o.n_goals, "How many goals")->check(CLI::PositiveNumber);

  auto* viz_cmd = app.add_subcommand("viz", "Generate and execute a visualization");
  add_data(viz_cmd);
  add_condition(viz_cmd);
  add_viz(viz_cmd);

  auto* ops_cmd = app.add_subcommand("ops", "Generate a visualization, then apply one operation to it");
  ops_cmd->add_option("op", o.op, "Operation")
      ->required()
      ->check(CLI::IsMember({"refine", "explain", "evaluate", "repair", "recommend", "infographic"}));
  add_data(ops_cmd);
  add_condition(ops_cmd);
  add_viz(ops_cmd);
  ops_cmd->add_option("--instruction", o.instruction, "Refinement instruction");
  ops_cmd->add_option("--k", o.k, "Recommendations to return")->check(CLI::PositiveNumber);
  ops_cmd->add_option("--depth", o.depth, "Repair attempts after the first")->check(CLI::NonNegativeNumber);
  ops_cmd->add_option("--style", o.styles, "Infographic style id (repeatable)");
  ops_cmd->add_option("--prompt", o.custom_prompt, "Free-form infographic style prompt");
  ops_cmd->add_option("--strength", o.strength, "Infographic strength in [0,1]");
  ops_cmd->add_option("--igm", o.igm, "Image model: identity, an image cassette file or an HTTP endpoint");
  ops_cmd->add_option("--igm-seed", o.igm_seed, "Image model seed");

  auto* bench_cmd = app.add_subcommand("benchmark", "Run the error-rate benchmark");
  bench_cmd->add_option("--data", o.datasets, "Datasets or directories of datasets")->required()->check(CLI::ExistingPath);
  bench_cmd->add_option("--grammar", o.grammars, "Grammars (repeatable)");
  bench_cmd->add_option("--condition", o.conditions, "Summary conditions (repeatable, default all)")->check(conditions);
  bench_cmd->add_option("--n-goals", o.n_goals, "Goals per dataset")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv", "markdown"}));
  bench_cmd->add_flag("--sevq", o.sevq, "Also score every compiled visualization");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP/WebSocket service");
  serve_cmd->add_option("--host", o.host, "Listen address");
  serve_cmd->add_option("--port", o.port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--static", o.static_dir, "Serve UI assets from this directory")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--persist", o.persist, "Snapshot sessions into this directory");
  serve_cmd->add_option("--ttl", o.ttl, "Idle session lifetime in seconds")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--max-upload", o.max_upload, "Upload size cap in bytes")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--condition", o.condition, "Summary condition for uploads")->check(conditions);
  serve_cmd->add_option("--grammar", o.grammar, "Default grammar");
  serve_cmd->add_option("--igm", o.igm, "Image model: identity, an image cassette file or an HTTP endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(o.log_level));

  try {
    if (*summarize_cmd) {
      LazyProvider provider(o);
      emit(o, service::body::summary(summarize(o, provider)).dump(2));
    } else if (*goals_cmd) {
      LazyProvider provider(o);
      const auto s = summarize(o, provider);
      const auto g = goals::explore_goals(s, summary::summary_condition_from_string(o.condition), o.n_goals, provider,
                                          generation(o));
      emit(o, service::body::goals(g).dump(2));
    } else if (*viz_cmd) {
      return run_viz(o);
    } else if (*ops_cmd) {
      if (o.op == "refine" && o.instruction.empty()) throw CLI::RequiredError("--instruction");
      return run_ops(o);
    } else if (*bench_cmd) {
      return run_benchmark(o);
    } else if (*serve_cmd) {
      return run_serve(o);
    }
  } catch (const Error& e) {
    std::cerr << service::body::error(e).dump(2) << "\n";
    return exit_code_for(e.code());
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
