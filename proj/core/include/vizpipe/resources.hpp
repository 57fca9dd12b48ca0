#pragma once

#include <filesystem>
#include <string>

namespace vizpipe {

/// Directory holding bundled resources (scaffolds, schemas, prompts, styles).
/// Resolution order: $VIZPIPE_RESOURCES, the source tree, the install prefix.
std::filesystem::path resources_dir();

/// Reads a resource file relative to resources_dir(), byte for byte.
std::string read_resource(const std::filesystem::path& relative);

}  // namespace vizpipe
