#include "vizpipe/viz/sandbox.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/summary/table.hpp"
#include "vizpipe/text.hpp"

extern char** environ;

namespace vizpipe::viz {

namespace fs = std::filesystem;

namespace {

std::atomic<std::size_t> g_spawned{0};

constexpr std::size_t kMaxAuditEntries = 20000;
constexpr std::size_t kMaxErrorDetail = 4000;

struct FileState {
  std::uintmax_t size = 0;
  std::int64_t mtime_ns = 0;
  bool operator==(const FileState&) const = default;
};

using Snapshot = std::map<std::string, FileState>;

void snapshot_into(const fs::path& dir, const fs::path& skip, Snapshot& out) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) return;
  fs::recursive_directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec), end;
  for (; !ec && it != end; it.increment(ec)) {
    const auto& p = it->path();
    if (!skip.empty() && p == skip) {
      it.disable_recursion_pending();
      continue;
    }
    if (out.size() >= kMaxAuditEntries) break;
    struct stat st {};
    if (::lstat(p.c_str(), &st) != 0) continue;
    out[p.string()] = FileState{static_cast<std::uintmax_t>(st.st_size),
                                static_cast<std::int64_t>(st.st_mtim.tv_sec) * 1000000000LL + st.st_mtim.tv_nsec};
  }
}

std::vector<std::string> diff(const Snapshot& before, const Snapshot& after) {
  std::vector<std::string> changed;
  for (const auto& [path, state] : after) {
    auto it = before.find(path);
    if (it == before.end() || !(it->second == state)) changed.push_back(path);
  }
  return changed;
}

std::string read_text(const fs::path& p, std::size_t limit) {
  std::ifstream in(p, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (s.size() > limit) s = "..." + s.substr(s.size() - limit);
  return s;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) raise(ErrorCode::IoError, "cannot write " + p.string());
}

std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* path = std::getenv("PATH");
  std::stringstream ss(path ? path : "/usr/bin:/bin");
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    const auto candidate = fs::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate.string();
  }
  return name;
}

std::string substitute(std::string s, const std::string& token, const std::string& value) {
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size()))
    s.replace(pos, token.size(), value);
  return s;
}

bool is_python_compile_failure(const std::string& stderr_text) {
  return stderr_text.find("SyntaxError") != std::string::npos ||
         stderr_text.find("IndentationError") != std::string::npos ||
         stderr_text.find("TabError") != std::string::npos;
}

struct ProcessResult {
  bool timed_out = false;
  bool spawn_failed = false;
  int exit_code = -1;
  int term_signal = 0;
};

ProcessResult run_process(const std::vector<std::string>& argv, const std::vector<std::string>& env,
                          const fs::path& cwd, const fs::path& out_file, const fs::path& err_file,
                          const ExecutionLimits& limits) {
  // Everything the child touches is prepared before fork.
  std::vector<char*> c_argv;
  for (const auto& a : argv) c_argv.push_back(const_cast<char*>(a.c_str()));
  c_argv.push_back(nullptr);
  std::vector<char*> c_env;
  for (const auto& e : env) c_env.push_back(const_cast<char*>(e.c_str()));
  c_env.push_back(nullptr);
  const std::string exe = resolve_executable(argv.front());
  const std::string cwd_s = cwd.string();
  const int out_fd = ::open(out_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  const int err_fd = ::open(err_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  const int null_fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
  const rlim_t mem = static_cast<rlim_t>(limits.memory_mb) * 1024 * 1024;

  ProcessResult result;
  const pid_t pid = ::fork();
  if (pid < 0) {
    result.spawn_failed = true;
    for (int fd : {out_fd, err_fd, null_fd})
      if (fd >= 0) ::close(fd);
    return result;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(cwd_s.c_str()) != 0) ::_exit(126);
    if (null_fd >= 0) ::dup2(null_fd, 0);
    if (out_fd >= 0) ::dup2(out_fd, 1);
    if (err_fd >= 0) ::dup2(err_fd, 2);
    if (limits.memory_mb > 0) {
      struct rlimit rl {mem, mem};
      ::setrlimit(RLIMIT_AS, &rl);
    }
    struct rlimit core {0, 0};
    ::setrlimit(RLIMIT_CORE, &core);
    ::execve(exe.c_str(), c_argv.data(), c_env.data());
    ::_exit(127);
  }
  g_spawned.fetch_add(1);
  ::setpgid(pid, pid);
  for (int fd : {out_fd, err_fd, null_fd})
    if (fd >= 0) ::close(fd);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(limits.timeout_s);
  int status = 0;
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) {
      result.spawn_failed = true;
      return result;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      result.timed_out = true;
      return result;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  // Reap anything the program left running in its group.
  ::kill(-pid, SIGKILL);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) result.term_signal = WTERMSIG(status);
  return result;
}

std::vector<std::string> child_environment(const fs::path& work) {
  std::vector<std::string> env;
  const char* path = std::getenv("PATH");
  env.push_back(std::string("PATH=") + (path ? path : "/usr/local/bin:/usr/bin:/bin"));
  env.push_back("HOME=" + work.string());
  env.push_back("TMPDIR=" + (work / "tmp").string());
  env.push_back("MPLBACKEND=Agg");
  env.push_back("MPLCONFIGDIR=" + (work / ".mpl").string());
  env.push_back("XDG_CACHE_HOME=" + (work / ".cache").string());
  env.push_back("PYTHONDONTWRITEBYTECODE=1");
  env.push_back("PYTHONUNBUFFERED=1");
  env.push_back("OPENBLAS_NUM_THREADS=1");
  env.push_back("OMP_NUM_THREADS=1");
  env.push_back("MKL_NUM_THREADS=1");
  env.push_back("LANG=C.UTF-8");
  return env;
}

void collect_fields(const nlohmann::json& node, std::set<std::string>& out, bool in_encoding) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      if (key == "transform") continue;
      const bool enc = in_encoding || key == "encoding";
      if (enc && key == "field" && value.is_string()) out.insert(value.get<std::string>());
      collect_fields(value, out, enc);
    }
  } else if (node.is_array()) {
    for (const auto& v : node) collect_fields(v, out, in_encoding);
  }
}

void add_names(const nlohmann::json& v, std::vector<std::string>& out) {
  if (v.is_string()) out.push_back(v.get<std::string>());
  if (v.is_array())
    for (const auto& x : v)
      if (x.is_string()) out.push_back(x.get<std::string>());
}

}  // namespace

std::string to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Unexecuted: return "unexecuted";
    case CandidateStatus::CompiledOk: return "compiled_ok";
    case CandidateStatus::CompileError: return "compile_error";
    case CandidateStatus::RuntimeError: return "runtime_error";
    case CandidateStatus::Timeout: return "timeout";
  }
  return "unexecuted";
}

CandidateStatus candidate_status_from_string(const std::string& s) {
  for (auto st : {CandidateStatus::Unexecuted, CandidateStatus::CompiledOk, CandidateStatus::CompileError,
                  CandidateStatus::RuntimeError, CandidateStatus::Timeout})
    if (to_string(st) == s) return st;
  raise(ErrorCode::ParseError, "unknown candidate status: " + s);
}

bool is_error(CandidateStatus s) {
  return s == CandidateStatus::CompileError || s == CandidateStatus::RuntimeError || s == CandidateStatus::Timeout;
}

void to_json(nlohmann::json& j, const CandidateProgram& c) {
  j = {{"goal_index", c.goal_index},
       {"candidate_index", c.candidate_index},
       {"scaffold_ref", c.scaffold_ref},
       {"stub", c.stub},
       {"assembled_code", c.assembled_code},
       {"status", to_string(c.status)},
       {"error_detail", c.error_detail ? nlohmann::json(*c.error_detail) : nlohmann::json(nullptr)},
       {"correctness_score", c.correctness_score ? nlohmann::json(*c.correctness_score) : nlohmann::json(nullptr)}};
  if (c.artifact)
    j["artifact"] = {{"kind", c.artifact->kind}, {"path", c.artifact->path.string()}, {"spec", c.artifact->spec}};
  else
    j["artifact"] = nullptr;
  if (!c.sandbox_violations.empty()) j["sandbox_violations"] = c.sandbox_violations;
}

void from_json(const nlohmann::json& j, CandidateProgram& c) {
  c.goal_index = j.value("goal_index", 0);
  c.candidate_index = j.value("candidate_index", 0);
  c.scaffold_ref = j.at("scaffold_ref").get<std::string>();
  c.stub = j.value("stub", "");
  c.assembled_code = j.value("assembled_code", "");
  c.status = candidate_status_from_string(j.value("status", "unexecuted"));
  c.error_detail.reset();
  if (j.contains("error_detail") && j["error_detail"].is_string()) c.error_detail = j["error_detail"].get<std::string>();
  c.correctness_score.reset();
  if (j.contains("correctness_score") && j["correctness_score"].is_number())
    c.correctness_score = j["correctness_score"].get<double>();
  c.artifact.reset();
  if (j.contains("artifact") && j["artifact"].is_object()) {
    const auto& a = j["artifact"];
    c.artifact = Artifact{a.at("kind").get<std::string>(), a.at("path").get<std::string>(), a.value("spec", nlohmann::json())};
  }
  c.sandbox_violations = j.value("sandbox_violations", std::vector<std::string>{});
}

std::vector<std::string> spec_field_references(const nlohmann::json& spec) {
  std::set<std::string> fields;
  collect_fields(spec, fields, false);
  return {fields.begin(), fields.end()};
}

std::vector<std::string> spec_derived_fields(const nlohmann::json& spec) {
  std::vector<std::string> out;
  if (!spec.is_object() || !spec.contains("transform") || !spec["transform"].is_array()) return out;
  for (const auto& t : spec["transform"]) {
    if (!t.is_object()) continue;
    if (t.contains("as")) add_names(t["as"], out);
    if (t.contains("fold") && !t.contains("as")) {
      out.push_back("key");
      out.push_back("value");
    }
    for (const char* listed : {"aggregate", "window", "joinaggregate"})
      if (t.contains(listed) && t[listed].is_array())
        for (const auto& op : t[listed])
          if (op.is_object() && op.contains("as")) add_names(op["as"], out);
    if (t.contains("timeUnit") && t.contains("field") && !t.contains("as")) out.push_back(t["field"].get<std::string>());
  }
  return out;
}

Sandbox::Sandbox(SandboxOptions options, const ScaffoldLibrary* library)
    : options_(std::move(options)), library_(library) {
  if (options_.root.empty())
    options_.root = fs::temp_directory_path() / fmt::format("vizpipe-sandbox-{}-{}", ::getpid(),
                                                            reinterpret_cast<std::uintptr_t>(this));
  fs::create_directories(options_.root);
  options_.root = fs::canonical(options_.root);
  if (options_.max_parallel < 1) options_.max_parallel = 1;
}

Sandbox& Sandbox::shared() {
  static Sandbox sandbox;
  return sandbox;
}

fs::path Sandbox::next_run_dir() const {
  while (true) {
    const auto n = run_counter_.fetch_add(1);
    auto dir = options_.root / fmt::format("run-{}", n);
    std::error_code ec;
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) raise(ErrorCode::IoError, "cannot create sandbox directory " + dir.string() + ": " + ec.message());
  }
}

CandidateProgram Sandbox::execute(CandidateProgram c, const fs::path& dataset_path,
                                  const ExecutionLimits& limits) const {
  if (c.status != CandidateStatus::Unexecuted) return c;
  auto fail = [&c](CandidateStatus s, std::string detail) {
    c.status = s;
    if (detail.size() > kMaxErrorDetail) detail = detail.substr(0, kMaxErrorDetail) + "...";
    c.error_detail = detail.empty() ? std::string("(no diagnostic output)") : std::move(detail);
    c.artifact.reset();
    return c;
  };

  try {
    const auto& library = library_ ? *library_ : ScaffoldLibrary::bundled();
    const auto& scaffold = library.get(c.scaffold_ref);
    const auto run_dir = next_run_dir();
    const auto work = run_dir / "work";
    fs::create_directories(work / "tmp");
    const auto dataset = fs::absolute(dataset_path);

    std::vector<fs::path> audited = options_.audit_paths;
    if (options_.audit_dataset_dir && dataset.has_parent_path()) audited.push_back(dataset.parent_path());
    Snapshot before;
    snapshot_into(run_dir, work, before);
    for (const auto& p : audited) snapshot_into(p, work, before);

    if (scaffold.execution_mode == ExecutionMode::DeclarativeValidation) {
      std::string literal = nlohmann::json(dataset.string()).dump();
      literal = literal.substr(1, literal.size() - 2);
      const auto code = substitute(c.assembled_code, kDatasetPlaceholder, literal);
      auto spec = nlohmann::json::parse(code, nullptr, false);
      if (spec.is_discarded()) {
        // Locate the failure for the detail message.
        try {
          [[maybe_unused]] const auto reparsed = nlohmann::json::parse(code);
        } catch (const nlohmann::json::parse_error& e) {
          return fail(CandidateStatus::CompileError, std::string("invalid JSON: ") + e.what());
        }
        return fail(CandidateStatus::CompileError, "invalid JSON");
      }
      if (scaffold.schema) {
        const auto errors = scaffold.schema->validate(spec);
        if (!errors.empty()) return fail(CandidateStatus::CompileError, "schema: " + text::join(errors, "; "));
      }
      const auto header = summary::read_field_names(dataset);
      std::set<std::string> known(header.begin(), header.end());
      for (const auto& d : spec_derived_fields(spec)) known.insert(d);
      std::vector<std::string> unknown;
      for (const auto& f : spec_field_references(spec))
        if (!known.count(f)) unknown.push_back(f);
      if (!unknown.empty())
        return fail(CandidateStatus::RuntimeError, "unknown field(s): " + text::join(unknown, ", "));
      const auto artifact = work / "spec.json";
      write_text(artifact, spec.dump(2) + "\n");
      c.status = CandidateStatus::CompiledOk;
      c.error_detail.reset();
      c.artifact = Artifact{"spec", artifact, std::move(spec)};
      return c;
    }

    const auto program = work / ("program" + scaffold.program_extension);
    const auto artifact = work / "artifact.png";
    write_text(program, c.assembled_code);
    std::vector<std::string> argv;
    for (const auto& token : scaffold.runner) {
      auto t = substitute(token, "{program}", program.string());
      t = substitute(t, "{dataset}", dataset.string());
      argv.push_back(substitute(t, "{artifact}", artifact.string()));
    }
    const auto result =
        run_process(argv, child_environment(work), work, work / "stdout.txt", work / "stderr.txt", limits);

    Snapshot after;
    snapshot_into(run_dir, work, after);
    for (const auto& p : audited) snapshot_into(p, work, after);
    c.sandbox_violations = diff(before, after);

    const auto err = read_text(work / "stderr.txt", kMaxErrorDetail);
    if (result.spawn_failed) return fail(CandidateStatus::RuntimeError, "could not start " + argv.front());
    if (result.timed_out)
      return fail(CandidateStatus::Timeout, fmt::format("exceeded {} s wall-clock limit", limits.timeout_s));
    if (!c.sandbox_violations.empty())
      return fail(CandidateStatus::RuntimeError,
                  "wrote outside its working directory: " + text::join(c.sandbox_violations, ", "));
    if (result.term_signal != 0)
      return fail(CandidateStatus::RuntimeError, fmt::format("killed by signal {}\n{}", result.term_signal, err));
    if (result.exit_code == 127 && err.empty()) return fail(CandidateStatus::RuntimeError, "could not execute " + argv.front());
    if (result.exit_code != 0) {
      const bool compile = scaffold.language_id == "python" && is_python_compile_failure(err);
      return fail(compile ? CandidateStatus::CompileError : CandidateStatus::RuntimeError, err);
    }
    std::error_code ec;
    if (!fs::is_regular_file(artifact, ec) || fs::file_size(artifact, ec) == 0)
      return fail(CandidateStatus::RuntimeError, "program exited cleanly but wrote no artifact\n" + err);
    c.status = CandidateStatus::CompiledOk;
    c.error_detail.reset();
    c.artifact = Artifact{"png", artifact, nullptr};
    return c;
  } catch (const std::exception& e) {
    return fail(CandidateStatus::RuntimeError, std::string("sandbox failure: ") + e.what());
  }
}

std::vector<CandidateProgram> Sandbox::execute_all(std::vector<CandidateProgram> candidates,
                                                   const fs::path& dataset_path, const ExecutionLimits& limits) const {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options_.max_parallel), candidates.size());
  if (workers <= 1) {
    for (auto& c : candidates) c = execute(std::move(c), dataset_path, limits);
    return candidates;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < candidates.size(); i = next.fetch_add(1))
        candidates[i] = execute(std::move(candidates[i]), dataset_path, limits);
    });
  for (auto& t : pool) t.join();
  return candidates;
}

CandidateProgram execute(CandidateProgram candidate, const fs::path& dataset_path, const ExecutionLimits& limits) {
  return Sandbox::shared().execute(std::move(candidate), dataset_path, limits);
}

std::size_t spawned_process_count() { return g_spawned.load(); }

}  // namespace vizpipe::viz
