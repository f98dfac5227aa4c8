#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fstream>
#include <thread>

#include "docstep/digest.hpp"
#include "docstep/errors.hpp"
#include "docstep/modelgw.hpp"
#include "synthetic.hpp"

using namespace docstep;
using docstep::testing::ScriptedTransport;

namespace {

ModelRequest text_request(const std::string& text, double temperature = 0.0) {
  ModelRequest r;
  r.model_name = "m";
  r.temperature = temperature;
  r.messages.push_back({Role::User, {ContentPart::text(text)}});
  return r;
}

ClientOptions fast_options() {
  ClientOptions o;
  o.sleep = [](std::chrono::milliseconds) {};
  return o;
}

TransportResult ok(const std::string& text) {
  ModelResponse r;
  r.text = text;
  return {r, false, {}};
}

}  // namespace

TEST_SUITE("modelgw") {
  TEST_CASE("request validation") {
    ModelRequest r = text_request("hi");
    CHECK_NOTHROW(r.validate());
    r.temperature = 2.5;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    ModelRequest empty;
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    ModelRequest sys = text_request("hi");
    sys.messages[0].role = Role::System;
    sys.messages[0].parts.push_back(ContentPart::image("a.png"));
    CHECK_THROWS_AS(sys.validate(), ValidationError);
  }

  TEST_CASE("digest covers model, messages and temperature only") {
    ModelRequest a = text_request("hi");
    ModelRequest b = text_request("hi");
    b.max_tokens = 7;
    CHECK(request_digest(a) == request_digest(b));
    CHECK(request_digest(a) != request_digest(text_request("hi", 0.5)));
    CHECK(request_digest(a) != request_digest(text_request("ho")));
    CHECK(request_digest(a).size() == 64);
  }

  TEST_CASE("retry on transient failures") {
    auto transport = std::make_unique<ScriptedTransport>([](const ModelRequest&, std::size_t call) {
      if (call < 2) return TransportResult{std::nullopt, true, "HTTP 429"};
      return ok("done");
    });
    std::vector<std::chrono::milliseconds> waits;
    ClientOptions o;
    o.retry.jitter = 0;
    o.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d); };
    ModelClient client(std::move(transport), o);
    ModelResponse r = client.complete(text_request("x"));
    CHECK(r.text == "done");
    CHECK(r.attempts == 3);
    CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000)});
  }

  TEST_CASE("permanent failures and exhausted retries") {
    ModelClient permanent(std::make_unique<ScriptedTransport>([](const ModelRequest&, std::size_t) {
                            return TransportResult{std::nullopt, false, "HTTP 400"};
                          }),
                          fast_options());
    CHECK_THROWS_AS(permanent.complete(text_request("x")), ModelError);
    CHECK(permanent.transport_calls() == 1);

    ModelClient flaky(std::make_unique<ScriptedTransport>([](const ModelRequest&, std::size_t) {
                        return TransportResult{std::nullopt, true, "HTTP 503"};
                      }),
                      fast_options());
    CHECK_THROWS_AS(flaky.complete(text_request("x")), ModelError);
    CHECK(flaky.transport_calls() == 5);
  }

  TEST_CASE("replay echo, misses and empty logs") {
    auto dir = docstep::testing::scratch_dir("gw-replay");
    const ModelRequest req = text_request("Which disease?");
    {
      std::ofstream log(dir / "log.jsonl");
      log << nlohmann::json{{"digest", request_digest(req)},
                            {"response", {{"text", "The answer is: EBOLA."}, {"finish_reason", "stop"}}}}
                 .dump()
          << "\n";
    }
    ModelClient client = ModelClient::open_replay(dir / "log.jsonl", ReplayMode::Replay);
    CHECK(client.complete(req).text == "The answer is: EBOLA.");
    try {
      client.complete(text_request("other"));
      FAIL("expected a miss");
    } catch (const ReplayMiss& e) {
      CHECK(e.digest() == request_digest(text_request("other")));
      CHECK(std::string(e.what()).find(e.digest()) != std::string::npos);
    }
    CHECK(client.transport_calls() == 0);

    std::ofstream(dir / "empty.jsonl") << "";
    ModelClient empty = ModelClient::open_replay(dir / "empty.jsonl", ReplayMode::Replay);
    CHECK_THROWS_AS(empty.complete(req), ReplayMiss);

    CHECK_THROWS_AS(ModelClient::open_replay(dir / "missing.jsonl", ReplayMode::Replay), Error);
    std::ofstream(dir / "corrupt.jsonl") << "{not json\n";
    CHECK_THROWS_AS(ModelClient::open_replay(dir / "corrupt.jsonl", ReplayMode::Replay), FormatError);
  }

  TEST_CASE("record then replay gives identical responses without network calls") {
    auto dir = docstep::testing::scratch_dir("gw-record");
    std::vector<std::string> recorded;
    {
      auto transport = std::make_unique<ScriptedTransport>(
          [](const ModelRequest& r, std::size_t call) { return ok("reply " + std::to_string(call) + " to " + r.model_name); });
      ModelClient rec = ModelClient::open_replay(dir / "log.jsonl", ReplayMode::Record, std::move(transport), fast_options());
      for (const char* q : {"a", "b", "c"}) recorded.push_back(rec.complete(text_request(q)).text);
      // identical request reuses the single entry
      CHECK(rec.complete(text_request("a")).text == recorded[0]);
      CHECK(rec.log_size() == 3);
      CHECK(rec.transport_calls() == 3);
    }
    CHECK(docstep::testing::read_file(dir / "log.jsonl").find("\"request\"") != std::string::npos);
    ModelClient replay = ModelClient::open_replay(dir / "log.jsonl", ReplayMode::Replay);
    std::size_t i = 0;
    for (const char* q : {"a", "b", "c"}) CHECK(replay.complete(text_request(q)).text == recorded[i++]);
    CHECK(replay.transport_calls() == 0);
    CHECK(replay.lookups().size() == 3);
  }

  TEST_CASE("in-flight requests stay within the concurrency bound") {
    std::atomic<int> now{0};
    auto transport = std::make_unique<ScriptedTransport>([&](const ModelRequest&, std::size_t) {
      ++now;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --now;
      return ok("x");
    });
    ClientOptions o = fast_options();
    o.concurrency = 2;
    ModelClient client(std::move(transport), o);
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t) {
      threads.emplace_back([&client, t] { client.complete(text_request(std::to_string(t))); });
    }
    for (auto& t : threads) t.join();
    CHECK(client.transport_calls() == 6);
    CHECK(client.max_in_flight() <= 2);
  }

  TEST_CASE("wire format") {
    auto dir = docstep::testing::scratch_dir("gw-wire");
    std::ofstream(dir / "img.png", std::ios::binary) << "PNG";
    ModelRequest r = text_request("describe");
    r.messages[0].parts.push_back(ContentPart::image((dir / "img.png").string()));
    r.messages[0].parts.push_back(ContentPart::image("https://example.org/a.jpg"));
    nlohmann::json wire = to_wire(r);
    CHECK(wire["model"] == "m");
    const auto& content = wire["messages"][0]["content"];
    CHECK(content[1]["image_url"]["url"] == "data:image/png;base64," + base64_encode("PNG"));
    CHECK(content[2]["image_url"]["url"] == "https://example.org/a.jpg");

    ModelResponse resp = from_wire(
        {{"choices", {{{"message", {{"content", "hello"}}}, {"finish_reason", "length"}}}},
         {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 1}}}});
    CHECK(resp.text == "hello");
    CHECK(resp.finish_reason == FinishReason::Length);
    CHECK(resp.usage.prompt_tokens == 3);
  }

  TEST_CASE("HTTP transport against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      auth = req.get_header_value("Authorization");
      if (hits++ == 0) {
        res.status = 503;
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo " + body["messages"][0]["content"].get<std::string>()}}}, {"finish_reason", "stop"}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelClient client(make_http_transport("http://127.0.0.1:" + std::to_string(port) + "/v1", "secret"),
                       fast_options());
    ModelResponse r = client.complete(text_request("ping"));
    CHECK(r.text == "echo ping");
    CHECK(r.attempts == 2);
    CHECK(auth == "Bearer secret");

    server.stop();
    worker.join();
  }

  TEST_CASE("bad endpoints") {
    CHECK_THROWS_AS(make_http_transport("localhost:80", ""), ValidationError);
  }
}
