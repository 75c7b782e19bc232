#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "thinkstage/cot/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "thinkstage/digest.hpp"

namespace thinkstage::cot {

using nlohmann::json;

std::string to_string(GenRole role) {
  switch (role) {
    case GenRole::kPseudoCot: return "pseudo_cot";
    case GenRole::kDescription: return "description";
    case GenRole::kReasoning: return "reasoning";
  }
  return "unknown";
}

std::string request_payload(const GenRequest& request) {
  // nlohmann::json orders object keys, so the dump is canonical.
  json j;
  j["role"] = to_string(request.role);
  j["prompt"] = request.prompt;
  j["image_ref"] = request.image_ref;
  return j.dump();
}

std::string request_key(const GenRequest& request) { return sha256_hex(request_payload(request)); }

ReplayBackend::ReplayBackend(std::filesystem::path fixture_dir, std::string name)
    : dir_(std::move(fixture_dir)), name_(std::move(name)) {}

GenResponse ReplayBackend::generate(const GenRequest& request) const {
  const auto path = dir_ / (request_key(request) + ".json");
  std::ifstream in(path);
  if (!in) throw BackendError("no replay fixture for " + to_string(request.role) + " request " + path.filename().string());
  json j;
  try {
    in >> j;
    return {j.at("response").get<std::string>(), j.value("recorded_at", std::string{})};
  } catch (const json::exception& e) {
    throw BackendError("malformed replay fixture " + path.string() + ": " + e.what());
  }
}

void write_fixture(const std::filesystem::path& dir, const GenRequest& request, const std::string& response,
                   const std::string& recorded_at) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["role"] = to_string(request.role);
  j["prompt"] = request.prompt;
  j["image_ref"] = request.image_ref;
  j["response"] = response;
  j["recorded_at"] = recorded_at;
  const auto path = dir / (request_key(request) + ".json");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write fixture " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RemoteBackend::RemoteBackend(EndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw std::invalid_argument("remote backend needs a base_url");
  if (config_.model.empty()) throw std::invalid_argument("remote backend needs a model name");
}

std::string RemoteBackend::build_body(const GenRequest& request) const {
  nlohmann::ordered_json message;
  message["role"] = "user";
  if (config_.vision && !request.image_ref.empty()) {
    message["content"] = json::array({
        {{"type", "text"}, {"text", request.prompt}},
        {{"type", "image_url"}, {"image_url", {{"url", request.image_ref}}}},
    });
  } else {
    message["content"] = request.prompt;
  }
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::ordered_json::array({message});
  body["temperature"] = config_.temperature;
  return body.dump();
}

std::string RemoteBackend::parse_content(const std::string& body) {
  try {
    const auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected chat completion response: ") + e.what());
  }
}

GenResponse RemoteBackend::generate(const GenRequest& request) const {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.auth_env.empty()) {
    if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string body = build_body(request);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    auto res = client.Post(config_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return {parse_content(res->body), utc_now()};
    last_error = "HTTP " + std::to_string(res->status);
    // Client errors other than rate limiting will not improve on retry.
    if (res->status >= 400 && res->status < 500 && res->status != 429) break;
  }
  throw BackendError(id() + ": " + last_error);
}

RecordingBackend::RecordingBackend(std::shared_ptr<const GenBackend> inner, std::filesystem::path fixture_dir)
    : inner_(std::move(inner)), dir_(std::move(fixture_dir)) {}

GenResponse RecordingBackend::generate(const GenRequest& request) const {
  auto response = inner_->generate(request);
  write_fixture(dir_, request, response.text, response.timestamp);
  return response;
}

}  // namespace thinkstage::cot
