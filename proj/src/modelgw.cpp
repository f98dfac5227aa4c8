#include "docstep/modelgw.hpp"

#include <condition_variable>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "docstep/digest.hpp"

namespace docstep {

using nlohmann::json;

namespace {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string_view finish_name(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason parse_finish(const std::string& text) {
  if (text == "stop") return FinishReason::Stop;
  if (text == "length") return FinishReason::Length;
  return FinishReason::Error;
}

json digest_payload(const ModelRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::Text) parts.push_back({{"type", "text"}, {"text", p.value}});
      else parts.push_back({{"type", "image"}, {"ref", p.value}});
    }
    messages.push_back({{"role", std::string(role_name(m.role))}, {"parts", parts}});
  }
  return {{"model", request.model_name}, {"messages", messages}, {"temperature", request.temperature}};
}

json response_to_json(const ModelResponse& r) {
  return {{"text", r.text},
          {"finish_reason", std::string(finish_name(r.finish_reason))},
          {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}}};
}

ModelResponse response_from_json(const json& j) {
  ModelResponse r;
  r.text = j.at("text").get<std::string>();
  r.finish_reason = parse_finish(j.value("finish_reason", "stop"));
  if (auto u = j.find("usage"); u != j.end()) {
    r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
  }
  return r;
}

std::string mime_for(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count > 0 ? count : 1) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }

  void release() {
    {
      std::lock_guard lock(mutex_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int count_;
};

class TokenBucket {
 public:
  explicit TokenBucket(double rate) : rate_(rate), capacity_(rate > 1 ? rate : 1), tokens_(capacity_) {}

  // Time to wait before the next request may go out; reserves the token.
  std::chrono::milliseconds reserve() {
    if (rate_ <= 0) return std::chrono::milliseconds(0);
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    tokens_ -= 1.0;
    if (tokens_ >= 0) return std::chrono::milliseconds(0);
    return std::chrono::milliseconds(static_cast<long long>(-tokens_ / rate_ * 1000.0));
  }

 private:
  std::mutex mutex_;
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

void ModelRequest::validate() const {
  if (messages.empty()) throw ValidationError("model request needs at least one message");
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::Image && m.role != Role::User) {
        throw ValidationError("image parts are only allowed on user messages");
      }
    }
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ValidationError("temperature must lie in [0, 2]");
  if (max_tokens <= 0) throw ValidationError("max_tokens must be positive");
}

std::string request_digest(const ModelRequest& request) { return sha256_hex(canonical_json(digest_payload(request))); }

json to_wire(const ModelRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json message{{"role", std::string(role_name(m.role))}};
    if (m.parts.size() == 1 && m.parts[0].kind == ContentPart::Kind::Text) {
      message["content"] = m.parts[0].value;
    } else {
      json content = json::array();
      for (const auto& p : m.parts) {
        if (p.kind == ContentPart::Kind::Text) {
          content.push_back({{"type", "text"}, {"text", p.value}});
          continue;
        }
        std::string url = p.value;
        if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0 && url.rfind("data:", 0) != 0) {
          std::ifstream in(p.value, std::ios::binary);
          if (!in) throw ModelError("cannot read image " + p.value);
          std::ostringstream bytes;
          bytes << in.rdbuf();
          url = "data:" + mime_for(p.value) + ";base64," + base64_encode(bytes.str());
        }
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      }
      message["content"] = std::move(content);
    }
    messages.push_back(std::move(message));
  }
  return {{"model", request.model_name},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

ModelResponse from_wire(const json& body) {
  const auto& choice = body.at("choices").at(0);
  ModelResponse r;
  const auto& content = choice.at("message").at("content");
  if (content.is_string()) {
    r.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") r.text += part.value("text", "");
    }
  }
  r.finish_reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                        ? parse_finish(choice["finish_reason"].get<std::string>())
                        : FinishReason::Stop;
  if (r.finish_reason == FinishReason::Stop && r.text.empty()) r.finish_reason = FinishReason::Error;
  if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
    r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
  }
  return r;
}

struct ModelClient::Impl {
  ReplayMode mode = ReplayMode::Off;
  std::unique_ptr<Transport> transport;
  ClientOptions options;
  std::filesystem::path log_path;

  std::mutex log_mutex;
  std::unordered_map<std::string, ModelResponse> log;
  std::ofstream log_out;

  std::mutex stats_mutex;
  std::vector<std::string> lookups;
  std::size_t transport_calls = 0;
  std::size_t in_flight = 0;
  std::size_t max_in_flight = 0;

  Semaphore slots;
  TokenBucket bucket;
  std::mutex rng_mutex;
  std::mt19937_64 rng;

  Impl(ReplayMode m, std::unique_ptr<Transport> t, ClientOptions o)
      : mode(m),
        transport(std::move(t)),
        options(std::move(o)),
        slots(options.concurrency),
        bucket(options.requests_per_second),
        rng(options.seed) {
    if (!options.sleep) options.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  void note_lookup(const std::string& digest) {
    std::lock_guard lock(stats_mutex);
    lookups.push_back(digest);
  }

  std::chrono::milliseconds backoff(int attempt) {
    double scale = 1.0;
    if (options.retry.jitter > 0) {
      std::lock_guard lock(rng_mutex);
      scale = std::uniform_real_distribution<double>(1.0 - options.retry.jitter, 1.0 + options.retry.jitter)(rng);
    }
    double ms = static_cast<double>(options.retry.base.count()) * scale;
    for (int i = 1; i < attempt; ++i) ms *= options.retry.factor;
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }

  ModelResponse call_transport(const ModelRequest& request) {
    if (!transport) throw ModelError("no model endpoint configured");
    std::string last_error;
    const int attempts = std::max(1, options.retry.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      if (auto wait = bucket.reserve(); wait.count() > 0) options.sleep(wait);
      slots.acquire();
      {
        std::lock_guard lock(stats_mutex);
        ++transport_calls;
        max_in_flight = std::max(max_in_flight, ++in_flight);
      }
      TransportResult result;
      try {
        result = transport->send(request);
      } catch (...) {
        {
          std::lock_guard lock(stats_mutex);
          --in_flight;
        }
        slots.release();
        throw;
      }
      {
        std::lock_guard lock(stats_mutex);
        --in_flight;
      }
      slots.release();

      if (result.response) {
        result.response->attempts = attempt;
        return *result.response;
      }
      last_error = result.error;
      if (!result.transient) throw ModelError("model request failed: " + last_error);
      if (attempt < attempts) options.sleep(backoff(attempt));
    }
    throw ModelError("model request failed after " + std::to_string(attempts) + " attempts: " + last_error);
  }

  void load_log() {
    std::ifstream in(log_path);
    if (!in) {
      if (mode == ReplayMode::Replay) throw Error("replay log not found: " + log_path.string());
      return;
    }
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json entry = json::parse(line);
        log.insert_or_assign(entry.at("digest").get<std::string>(), response_from_json(entry.at("response")));
      } catch (const json::exception& e) {
        throw FormatError(log_path.string(), number, std::string("corrupt replay entry: ") + e.what());
      }
    }
  }
};

ModelClient::ModelClient(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

ModelClient::ModelClient(std::unique_ptr<Transport> transport, ClientOptions options)
    : impl_(std::make_unique<Impl>(ReplayMode::Off, std::move(transport), std::move(options))) {}

ModelClient::~ModelClient() = default;
ModelClient::ModelClient(ModelClient&&) noexcept = default;
ModelClient& ModelClient::operator=(ModelClient&&) noexcept = default;

ModelClient ModelClient::open_replay(const std::filesystem::path& path, ReplayMode mode,
                                     std::unique_ptr<Transport> transport, ClientOptions options) {
  if (mode == ReplayMode::Record && !transport) throw Error("record mode needs a live endpoint");
  if (mode == ReplayMode::Replay) transport.reset();
  auto impl = std::make_unique<Impl>(mode, std::move(transport), std::move(options));
  impl->log_path = path;
  if (mode != ReplayMode::Off) impl->load_log();
  if (mode == ReplayMode::Record) {
    impl->log_out.open(path, std::ios::app | std::ios::binary);
    if (!impl->log_out) throw Error("cannot append to replay log " + path.string());
  }
  return ModelClient(std::move(impl));
}

ModelResponse ModelClient::complete(const ModelRequest& request) {
  request.validate();
  Impl& s = *impl_;
  const std::string digest = request_digest(request);
  s.note_lookup(digest);

  if (s.mode != ReplayMode::Off) {
    std::lock_guard lock(s.log_mutex);
    if (auto it = s.log.find(digest); it != s.log.end()) return it->second;
    if (s.mode == ReplayMode::Replay) throw ReplayMiss(digest);
  }

  ModelResponse response = s.call_transport(request);
  if (s.mode == ReplayMode::Record) {
    std::lock_guard lock(s.log_mutex);
    if (auto it = s.log.find(digest); it != s.log.end()) return it->second;
    ModelResponse stored = response;
    stored.attempts = 1;
    s.log.emplace(digest, stored);
    const json entry{{"digest", digest}, {"request", digest_payload(request)}, {"response", response_to_json(stored)}};
    s.log_out << entry.dump() << '\n';
    s.log_out.flush();
  }
  return response;
}

ReplayMode ModelClient::mode() const { return impl_->mode; }

std::size_t ModelClient::transport_calls() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->transport_calls;
}

std::size_t ModelClient::max_in_flight() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->max_in_flight;
}

std::vector<std::string> ModelClient::lookups() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->lookups;
}

std::size_t ModelClient::log_size() const {
  std::lock_guard lock(impl_->log_mutex);
  return impl_->log.size();
}

}  // namespace docstep
