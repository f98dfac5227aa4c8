#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "docstep/modelgw.hpp"

namespace docstep {

namespace {

class HttpTransport : public Transport {
 public:
  HttpTransport(const std::string& endpoint, std::string api_key, std::chrono::seconds timeout)
      : api_key_(std::move(api_key)), timeout_(timeout) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint must be an http(s) URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    origin_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? std::string() : endpoint.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    const std::string suffix = "/chat/completions";
    if (path_.size() < suffix.size() || path_.compare(path_.size() - suffix.size(), suffix.size(), suffix) != 0) {
      path_ += suffix;
    }
  }

  TransportResult send(const ModelRequest& request) override {
    TransportResult out;
    std::string body;
    try {
      body = to_wire(request).dump();
    } catch (const ModelError& e) {
      out.error = e.what();
      return out;
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      out.transient = true;
      out.error = "connection failed: " + httplib::to_string(res.error());
      return out;
    }
    if (res->status == 429 || res->status >= 500) {
      out.transient = true;
      out.error = "HTTP " + std::to_string(res->status);
      return out;
    }
    if (res->status != 200) {
      out.error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      return out;
    }
    try {
      out.response = from_wire(nlohmann::json::parse(res->body));
    } catch (const nlohmann::json::exception& e) {
      out.error = std::string("malformed completion body: ") + e.what();
    }
    return out;
  }

 private:
  std::string origin_;
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& endpoint, const std::string& api_key,
                                               std::chrono::seconds timeout) {
  return std::make_unique<HttpTransport>(endpoint, api_key, timeout);
}

}  // namespace docstep
