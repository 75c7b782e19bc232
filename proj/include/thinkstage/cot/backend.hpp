#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace thinkstage::cot {

enum class GenRole { kPseudoCot, kDescription, kReasoning };

std::string to_string(GenRole role);

struct GenRequest {
  GenRole role = GenRole::kPseudoCot;
  std::string prompt;
  std::string image_ref;  // empty for text-only requests
};

struct GenResponse {
  std::string text;
  std::string timestamp;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text generation service used by the data pipeline. Implementations must
/// be callable from several threads at once.
class GenBackend {
 public:
  virtual ~GenBackend() = default;
  virtual GenResponse generate(const GenRequest& request) const = 0;
  virtual std::string id() const = 0;
};

/// Canonical JSON of the request, the thing replay fixtures are keyed by.
std::string request_payload(const GenRequest& request);
std::string request_key(const GenRequest& request);  // sha256 of the payload

/// Serves recorded responses from `<dir>/<request_key>.json`. A missing
/// entry raises BackendError.
class ReplayBackend final : public GenBackend {
 public:
  explicit ReplayBackend(std::filesystem::path fixture_dir, std::string name = "replay");
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return name_; }

 private:
  std::filesystem::path dir_;
  std::string name_;
};

/// Writes (or overwrites) the fixture for `request`.
void write_fixture(const std::filesystem::path& dir, const GenRequest& request, const std::string& response,
                   const std::string& recorded_at = "");

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_env = "OPENAI_API_KEY";  // bearer token source; empty or unset sends no header
  double temperature = 0.6;
  int timeout_seconds = 120;
  int max_retries = 3;
  bool vision = false;  // pass image_ref as an image_url content part
};

/// Chat-completions client: POST {model, messages:[{role, content}],
/// temperature} and read choices[0].message.content.
class RemoteBackend final : public GenBackend {
 public:
  explicit RemoteBackend(EndpointConfig config);
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return config_.model + "@" + config_.base_url; }

  /// The JSON body sent for `request`.
  std::string build_body(const GenRequest& request) const;
  /// choices[0].message.content, or BackendError.
  static std::string parse_content(const std::string& body);

 private:
  EndpointConfig config_;
};

/// Forwards to `inner` and records every response as a replay fixture.
class RecordingBackend final : public GenBackend {
 public:
  RecordingBackend(std::shared_ptr<const GenBackend> inner, std::filesystem::path fixture_dir);
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<const GenBackend> inner_;
  std::filesystem::path dir_;
};

}  // namespace thinkstage::cot
