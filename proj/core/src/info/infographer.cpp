#include "vizpipe/info/infographer.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>

#include "vizpipe/error.hpp"
#include "vizpipe/hash.hpp"
#include "vizpipe/resources.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::info {

namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
  if (!out) raise(ErrorCode::IoError, "cannot write " + p.string());
}

std::vector<std::string> split_fragments(const std::string& prompt) {
  std::vector<std::string> out;
  std::stringstream ss(prompt);
  std::string part;
  while (std::getline(ss, part, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::size_t word_count(const std::string& s) {
  std::stringstream ss(s);
  std::string w;
  std::size_t n = 0;
  while (ss >> w) ++n;
  return n;
}

std::string first_words(const std::string& s, std::size_t n) {
  std::stringstream ss(s);
  std::string w;
  std::vector<std::string> words;
  while (words.size() < n && ss >> w) words.push_back(w);
  return text::join(words, " ");
}

}  // namespace

void to_json(nlohmann::json& j, const StyleEntry& e) { j = {{"id", e.id}, {"prompt", e.prompt}, {"tags", e.tags}}; }

void from_json(const nlohmann::json& j, StyleEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.prompt = j.at("prompt").get<std::string>();
  e.tags = j.value("tags", std::vector<std::string>{});
}

StyleLibrary::StyleLibrary(std::vector<StyleEntry> entries) {
  for (auto& e : entries) {
    if (text::trim(e.prompt).empty()) raise(ErrorCode::ConfigError, "style " + e.id + " has an empty prompt");
    if (contains(e.id)) raise(ErrorCode::ConfigError, "duplicate style id: " + e.id);
    entries_.push_back(std::move(e));
  }
}

StyleLibrary StyleLibrary::from_json(const nlohmann::json& j) {
  try {
    return StyleLibrary(j.get<std::vector<StyleEntry>>());
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("malformed style library: ") + e.what());
  }
}

nlohmann::json StyleLibrary::to_json() const { return entries_; }

StyleLibrary StyleLibrary::load(const fs::path& file) {
  auto j = nlohmann::json::parse(read_bytes(file), nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ConfigError, "style library is not JSON: " + file.string());
  return from_json(j);
}

StyleLibrary StyleLibrary::bundled() { return load(resources_dir() / "styles" / "default_styles.json"); }

void StyleLibrary::save(const fs::path& file) const { write_bytes(file, to_json().dump(2) + "\n"); }

const StyleEntry& StyleLibrary::get(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return e;
  raise(ErrorCode::UnknownStyle, "unknown style: " + id);
}

bool StyleLibrary::contains(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.id == id) return true;
  return false;
}

void StyleLibrary::upsert(StyleEntry entry) {
  if (text::trim(entry.prompt).empty()) raise(ErrorCode::PreconditionViolation, "style prompt is empty");
  for (auto& e : entries_)
    if (e.id == entry.id) {
      e = std::move(entry);
      return;
    }
  entries_.push_back(std::move(entry));
}

void to_json(nlohmann::json& j, const IgmRequest& r) {
  j = {{"base_image", r.base_image.string()},
       {"style_prompt", r.style_prompt},
       {"strength", r.strength},
       {"strength_warning", r.strength_warning}};
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
}

IgmRequest compose_request(const fs::path& artifact, const std::vector<std::string>& style_ids,
                           const std::optional<std::string>& custom_prompt, double strength,
                           std::optional<std::int64_t> seed, const StyleLibrary& library, std::size_t word_cap) {
  if (!std::isfinite(strength) || strength < 0.0 || strength > 1.0)
    raise(ErrorCode::StrengthOutOfRange, fmt::format("strength {} outside [0, 1]", strength), {{"strength", strength}});
  const bool has_custom = custom_prompt && !text::trim(*custom_prompt).empty();
  if (style_ids.empty() && !has_custom)
    raise(ErrorCode::PreconditionViolation, "give at least one style id or a custom prompt");

  std::vector<std::string> fragments;
  for (const auto& id : style_ids)
    for (auto& f : split_fragments(library.get(id).prompt)) fragments.push_back(std::move(f));
  if (has_custom)
    for (auto& f : split_fragments(*custom_prompt)) fragments.push_back(std::move(f));

  std::set<std::string> seen;
  std::vector<std::string> kept;
  std::size_t words = 0;
  for (const auto& f : fragments) {
    if (!seen.insert(text::to_lower(f)).second) continue;
    const auto n = word_count(f);
    if (words + n > word_cap) {
      if (kept.empty()) kept.push_back(first_words(f, word_cap));
      break;
    }
    kept.push_back(f);
    words += n;
  }

  std::error_code ec;
  if (!fs::is_regular_file(artifact, ec)) raise(ErrorCode::IoError, "artifact not found: " + artifact.string());

  IgmRequest r;
  r.base_image = artifact;
  r.style_prompt = text::join(kept, ", ");
  r.strength = strength;
  r.seed = seed;
  r.strength_warning = strength < kStrengthBandLow || strength > kStrengthBandHigh;
  return r;
}

std::string igm_fingerprint(const std::string& png, const std::string& prompt, double strength,
                            std::optional<std::int64_t> seed) {
  const nlohmann::json key = {{"image_sha256", sha256_hex(png)},
                              {"prompt", prompt},
                              {"strength", text::format_double(strength)},
                              {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)}};
  return sha256_hex(key.dump());
}

std::shared_ptr<CassetteIgm> CassetteIgm::load(const fs::path& file) {
  auto j = nlohmann::json::parse(read_bytes(file), nullptr, false);
  if (j.is_discarded() || !j.is_array()) raise(ErrorCode::ConfigError, "image cassette must be a JSON array");
  auto c = std::make_shared<CassetteIgm>();
  for (const auto& e : j) c->put(e.at("fingerprint").get<std::string>(), base64_decode(e.at("image_base64").get<std::string>()));
  return c;
}

void CassetteIgm::put(const std::string& fingerprint, const std::string& png) { images_[fingerprint] = png; }

void CassetteIgm::save(const fs::path& file) const {
  auto j = nlohmann::json::array();
  for (const auto& [fp, png] : images_) j.push_back({{"fingerprint", fp}, {"image_base64", base64_encode(png)}});
  write_bytes(file, j.dump(2) + "\n");
}

std::string CassetteIgm::stylize(const std::string& png, const std::string& prompt, double strength,
                                 std::optional<std::int64_t> seed) {
  const auto fp = igm_fingerprint(png, prompt, strength, seed);
  auto it = images_.find(fp);
  if (it == images_.end()) raise(ErrorCode::CassetteMiss, "no recorded image for this request", {{"fingerprint", fp}});
  return it->second;
}

HttpIgm::HttpIgm(std::string endpoint_url, double timeout_s) : url_(std::move(endpoint_url)), timeout_s_(timeout_s) {}

std::string HttpIgm::stylize(const std::string& png, const std::string& prompt, double strength,
                             std::optional<std::int64_t> seed) {
  const auto scheme_end = url_.find("://");
  const auto path_start = url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const auto host = url_.substr(0, path_start);
  const auto path = path_start == std::string::npos ? std::string("/") : url_.substr(path_start);
  httplib::Client client(host);
  const auto secs = static_cast<time_t>(timeout_s_);
  client.set_read_timeout(secs, 0);
  client.set_connection_timeout(10, 0);
  nlohmann::json body = {{"image_base64", base64_encode(png)}, {"prompt", prompt}, {"strength", strength}};
  body["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) raise(ErrorCode::ProviderUnavailable, "image provider unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    raise(ErrorCode::ProviderUnavailable, fmt::format("image provider returned HTTP {}", res->status));
  auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("image_base64"))
    raise(ErrorCode::ProviderUnavailable, "image provider reply lacks image_base64");
  return base64_decode(reply["image_base64"].get<std::string>());
}

PngSize png_size(const std::string& png) {
  static const std::string kSignature = "\x89PNG\r\n\x1a\n";
  if (png.size() < 24 || png.compare(0, 8, kSignature) != 0 || png.compare(12, 4, "IHDR") != 0)
    raise(ErrorCode::ParseError, "not a PNG image");
  auto be32 = [&](std::size_t off) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 3]));
  };
  return PngSize{be32(16), be32(20)};
}

StylizeResult stylize(const IgmRequest& request, IgmProvider* provider, const fs::path& output,
                      const PostProcess& post) {
  if (!provider) raise(ErrorCode::ProviderUnavailable, "no image generation provider is configured");
  const auto base = read_bytes(request.base_image);
  const auto base_size = png_size(base);
  auto styled = provider->stylize(base, request.style_prompt, request.strength, request.seed);
  if (post) styled = post(styled, base);
  const auto out_size = png_size(styled);
  if (!(out_size == base_size))
    raise(ErrorCode::DimensionMismatch,
          fmt::format("stylized image is {}x{}, base image is {}x{}", out_size.width, out_size.height,
                      base_size.width, base_size.height));
  write_bytes(output, styled);
  return StylizeResult{output, out_size};
}

}  // namespace vizpipe::info
