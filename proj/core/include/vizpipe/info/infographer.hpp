#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizpipe::info {

inline constexpr double kDefaultStrength = 0.35;
inline constexpr double kStrengthBandLow = 0.25;
inline constexpr double kStrengthBandHigh = 0.45;
inline constexpr std::size_t kDefaultStyleWordCap = 60;

struct StyleEntry {
  std::string id;
  std::string prompt;
  std::vector<std::string> tags;
  bool operator==(const StyleEntry&) const = default;
};

void to_json(nlohmann::json& j, const StyleEntry& e);
void from_json(const nlohmann::json& j, StyleEntry& e);

/// User-editable list of natural-language styles, kept in file order.
class StyleLibrary {
 public:
  StyleLibrary() = default;
  explicit StyleLibrary(std::vector<StyleEntry> entries);

  static StyleLibrary load(const std::filesystem::path& file);
  static StyleLibrary bundled();
  void save(const std::filesystem::path& file) const;

  /// Throws UnknownStyle.
  const StyleEntry& get(const std::string& id) const;
  bool contains(const std::string& id) const;
  /// Adds or replaces the entry with the same id.
  void upsert(StyleEntry entry);
  const std::vector<StyleEntry>& entries() const { return entries_; }

  nlohmann::json to_json() const;
  static StyleLibrary from_json(const nlohmann::json& j);
  bool operator==(const StyleLibrary&) const = default;

 private:
  std::vector<StyleEntry> entries_;
};

struct IgmRequest {
  std::filesystem::path base_image;
  std::string style_prompt;
  double strength = kDefaultStrength;
  std::optional<std::int64_t> seed;
  // Strength outside the band where the chart stays recognisable.
  bool strength_warning = false;
  bool operator==(const IgmRequest&) const = default;
};

void to_json(nlohmann::json& j, const IgmRequest& r);

/// Comma-joined library prompts followed by the custom prompt, with
/// repeated fragments removed and the result cut to `word_cap` words.
/// Throws UnknownStyle, StrengthOutOfRange, PreconditionViolation (no
/// style given) and IoError (missing artifact).
IgmRequest compose_request(const std::filesystem::path& artifact, const std::vector<std::string>& style_ids,
                           const std::optional<std::string>& custom_prompt, double strength,
                           std::optional<std::int64_t> seed, const StyleLibrary& library,
                           std::size_t word_cap = kDefaultStyleWordCap);

/// Image-to-image port: PNG bytes in, PNG bytes out.
class IgmProvider {
 public:
  virtual ~IgmProvider() = default;
  virtual std::string stylize(const std::string& png, const std::string& prompt, double strength,
                              std::optional<std::int64_t> seed) = 0;
  virtual std::string name() const = 0;
};

using IgmPtr = std::shared_ptr<IgmProvider>;

/// Returns the input unchanged.
class IdentityIgm final : public IgmProvider {
 public:
  std::string stylize(const std::string& png, const std::string&, double, std::optional<std::int64_t>) override {
    return png;
  }
  std::string name() const override { return "identity"; }
};

/// Key for recorded image responses.
std::string igm_fingerprint(const std::string& png, const std::string& prompt, double strength,
                            std::optional<std::int64_t> seed);

/// Replays recorded images: a JSON array of {fingerprint, image_base64}.
/// Throws CassetteMiss for unrecorded requests.
class CassetteIgm final : public IgmProvider {
 public:
  static std::shared_ptr<CassetteIgm> load(const std::filesystem::path& file);
  void put(const std::string& fingerprint, const std::string& png);
  void save(const std::filesystem::path& file) const;

  std::string stylize(const std::string& png, const std::string& prompt, double strength,
                      std::optional<std::int64_t> seed) override;
  std::string name() const override { return "igm-cassette"; }

 private:
  std::map<std::string, std::string> images_;
};

/// Posts {image_base64, prompt, strength, seed} to an HTTP endpoint that
/// answers with {image_base64}.
class HttpIgm final : public IgmProvider {
 public:
  explicit HttpIgm(std::string endpoint_url, double timeout_s = 120.0);
  std::string stylize(const std::string& png, const std::string& prompt, double strength,
                      std::optional<std::int64_t> seed) override;
  std::string name() const override { return "igm-http"; }

 private:
  std::string url_;
  double timeout_s_;
};

struct PngSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  bool operator==(const PngSize&) const = default;
};

/// Dimensions from the IHDR chunk. Throws ParseError for non-PNG input.
PngSize png_size(const std::string& png);

/// Post-processing applied to the stylized image; receives (stylized,
/// original) PNG bytes. The default keeps the stylized image.
using PostProcess = std::function<std::string(const std::string&, const std::string&)>;

struct StylizeResult {
  std::filesystem::path image;
  PngSize size;
};

/// Calls the provider, applies `post`, checks the output has the base
/// image's dimensions (DimensionMismatch otherwise) and writes it to
/// `output`. A null provider throws ProviderUnavailable.
StylizeResult stylize(const IgmRequest& request, IgmProvider* provider, const std::filesystem::path& output,
                      const PostProcess& post = {});

}  // namespace vizpipe::info
