#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docstep/errors.hpp"

namespace docstep {

enum class Role { System, User, Assistant };

struct ContentPart {
  enum class Kind { Text, Image };

  Kind kind = Kind::Text;
  std::string value;  // text, or an image file path / URL

  static ContentPart text(std::string t) { return {Kind::Text, std::move(t)}; }
  static ContentPart image(std::string ref) { return {Kind::Image, std::move(ref)}; }
};

struct Message {
  Role role = Role::User;
  std::vector<ContentPart> parts;
};

struct ModelRequest {
  std::string model_name;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  void validate() const;
};

enum class FinishReason { Stop, Length, Error };

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ModelResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
  Usage usage;
  int attempts = 1;
};

// SHA-256 over the canonical JSON of (model_name, messages, temperature).
std::string request_digest(const ModelRequest& request);

// The chat-completions request body; images become data URIs (local files) or stay URLs.
nlohmann::json to_wire(const ModelRequest& request);
ModelResponse from_wire(const nlohmann::json& body);

class ModelError : public Error {
 public:
  using Error::Error;
};

class ReplayMiss : public ModelError {
 public:
  explicit ReplayMiss(std::string digest)
      : ModelError("replay log has no response for request digest " + digest), digest_(std::move(digest)) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

struct TransportResult {
  std::optional<ModelResponse> response;
  bool transient = false;  // worth retrying (rate limit, 5xx, connection failure)
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const ModelRequest& request) = 0;
};

// POSTs to <endpoint>/chat/completions (or the endpoint itself when it already ends there).
std::unique_ptr<Transport> make_http_transport(const std::string& endpoint, const std::string& api_key,
                                               std::chrono::seconds timeout = std::chrono::seconds(120));

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  double jitter = 0.25;  // each delay scaled by a factor drawn from [1 - jitter, 1 + jitter]
};

struct ClientOptions {
  RetryPolicy retry;
  int concurrency = 4;              // in-flight request bound
  double requests_per_second = 0;   // 0 disables the token bucket
  std::uint64_t seed = 0;           // jitter stream
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

enum class ReplayMode { Off, Record, Replay };

class ModelClient {
 public:
  // Live client, no log.
  ModelClient(std::unique_ptr<Transport> transport, ClientOptions options = {});
  ~ModelClient();
  ModelClient(ModelClient&&) noexcept;
  ModelClient& operator=(ModelClient&&) noexcept;

  // Record: transport required; existing entries are reused, new ones appended.
  // Replay: log must exist; transport is never used.
  static ModelClient open_replay(const std::filesystem::path& path, ReplayMode mode,
                                 std::unique_ptr<Transport> transport = nullptr, ClientOptions options = {});

  ModelResponse complete(const ModelRequest& request);

  ReplayMode mode() const;

  // Test hooks.
  std::size_t transport_calls() const;
  std::size_t max_in_flight() const;
  std::vector<std::string> lookups() const;  // digests served, in call order
  std::size_t log_size() const;

 private:
  struct Impl;
  explicit ModelClient(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace docstep
