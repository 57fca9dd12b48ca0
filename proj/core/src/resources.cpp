#include "vizpipe/resources.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vizpipe/error.hpp"

namespace vizpipe {

std::filesystem::path resources_dir() {
  if (const char* env = std::getenv("VIZPIPE_RESOURCES"); env && *env) return env;
#ifdef VIZPIPE_SOURCE_RESOURCES
  if (std::filesystem::exists(VIZPIPE_SOURCE_RESOURCES)) return VIZPIPE_SOURCE_RESOURCES;
#endif
#ifdef VIZPIPE_INSTALL_RESOURCES
  if (std::filesystem::exists(VIZPIPE_INSTALL_RESOURCES)) return VIZPIPE_INSTALL_RESOURCES;
#endif
  raise(ErrorCode::ConfigError, "resource directory not found; set VIZPIPE_RESOURCES");
}

std::string read_resource(const std::filesystem::path& relative) {
  const auto path = resources_dir() / relative;
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read resource " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vizpipe
