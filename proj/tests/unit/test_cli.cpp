#include <doctest.h>

#include <fstream>
#include <sstream>

#include "docstep/cli.hpp"
#include "docstep/digest.hpp"
#include "synthetic.hpp"

using namespace docstep;
using docstep::testing::read_file;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, bool live = false) {
  std::ostringstream out;
  std::ostringstream err;
  cli::Hooks hooks;
  if (live) hooks.transport = [](const cli::RunConfig&) { return std::make_unique<testing::SyntheticModel>(); };
  const int code = cli::run(args, out, err, hooks);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::filesystem::path& p) {
  const std::string text = read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("unknown subcommand prints usage and exits 1") {
    Result r = run({"frobnicate"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({"generate", "--bogus"}).code == 1);
    CHECK(run({}).code == 1);
  }

  TEST_CASE("generate, check, classify, stats and eval") {
    auto dir = testing::scratch_dir("cli-flow");
    testing::write_synthetic_corpus(dir, 2);
    const std::string d = dir.string() + "/";

    // Record a log against the synthetic model, then run purely from the log.
    Result rec = run({"generate", "--kind", "docvqa", "--mode", "extend", "--corpus", d + "corpus.jsonl", "--out",
                      d + "rec.jsonl", "--record", d + "log.jsonl", "--endpoint", "http://unused"},
                     true);
    REQUIRE_MESSAGE(rec.code == 0, rec.err);

    Result gen = run({"generate", "--kind", "docvqa", "--mode", "extend", "--corpus", d + "corpus.jsonl", "--out",
                      d + "g.jsonl", "--replay", d + "log.jsonl"});
    REQUIRE_MESSAGE(gen.code == 0, gen.err);
    CHECK(lines(d + "g.jsonl") == 6);
    CHECK(read_file(d + "g.jsonl") == read_file(d + "rec.jsonl"));
    RunManifest m = RunManifest::read(d + "g.jsonl.manifest.json");
    CHECK(m.counts["generated_extend"] == 6);
    CHECK(m.config_digest == sha256_hex(canonical_json(m.config)));
    CHECK(m.command == "generate");

    Result recheck = run({"check", "--in", d + "g.jsonl", "--corpus", d + "corpus.jsonl", "--gold", d + "ocr.jsonl",
                          "--out", d + "f0.jsonl", "--record", d + "log.jsonl", "--endpoint", "http://unused"},
                         true);
    REQUIRE_MESSAGE(recheck.code == 0, recheck.err);
    Result check = run({"check", "--in", d + "g.jsonl", "--corpus", d + "corpus.jsonl", "--gold", d + "ocr.jsonl",
                        "--out", d + "f.jsonl", "--report", d + "r.txt", "--replay", d + "log.jsonl"});
    REQUIRE_MESSAGE(check.code == 0, check.err);
    CHECK(lines(d + "f.jsonl") + lines(d + "f.rejected.jsonl") == 6);
    const std::string report = read_file(d + "r.txt");
    for (const char* column : {"Dataset", "Images", "Generated (augment)", "Generated (extend)", "Filtered", "Rejected"}) {
      CHECK(report.find(column) != std::string::npos);
    }

    Result cls_rec = run({"classify", "--in", d + "f.jsonl", "--out", d + "c0.jsonl", "--record", d + "log.jsonl",
                          "--endpoint", "http://unused"},
                         true);
    REQUIRE_MESSAGE(cls_rec.code == 0, cls_rec.err);
    Result cls = run({"classify", "--in", d + "f.jsonl", "--out", d + "c.jsonl", "--replay", d + "log.jsonl"});
    REQUIRE_MESSAGE(cls.code == 0, cls.err);

    Result st = run({"stats", "--in", d + "c.jsonl", "--rejected", d + "f.rejected.jsonl", "--corpus",
                     d + "corpus.jsonl"});
    REQUIRE_MESSAGE(st.code == 0, st.err);
    CHECK(st.out.find("docvqa") != std::string::npos);

    {
      std::ofstream pred(d + "p.jsonl");
      for (const auto& inst : read_instances(d + "f.jsonl")) {
        pred << nlohmann::json{{"instance_id", inst.instance_id}, {"text", "The answer is: " + inst.answer}}.dump()
             << "\n";
      }
    }
    Result ev = run({"eval", "--pred", d + "p.jsonl", "--refs", d + "f.jsonl", "--metric", "anls"});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    CHECK(ev.out.find("overall anls: 1.0000") != std::string::npos);
  }

  TEST_CASE("dry runs make no model calls") {
    auto dir = testing::scratch_dir("cli-dry");
    testing::write_synthetic_corpus(dir, 7);
    const std::string d = dir.string() + "/";
    Result r = run({"generate", "--corpus", d + "corpus.jsonl", "--out", d + "g.jsonl", "--endpoint",
                    "http://127.0.0.1:9", "--dry-run"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("21 model requests") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(d + "g.jsonl"));
  }

  TEST_CASE("validation errors exit 1 before any stage runs") {
    auto dir = testing::scratch_dir("cli-invalid");
    testing::write_synthetic_corpus(dir, 1);
    const std::string d = dir.string() + "/";
    CHECK(run({"generate", "--corpus", d + "missing.jsonl", "--out", d + "g.jsonl", "--replay", d + "x"}).code == 1);
    CHECK(run({"generate", "--corpus", d + "corpus.jsonl", "--out", d + "g.jsonl", "--replay", d + "nolog.jsonl"})
              .code == 1);
    CHECK(run({"generate", "--corpus", d + "corpus.jsonl", "--out", d + "nodir/g.jsonl", "--endpoint", "http://x"})
              .code == 1);
    CHECK(run({"generate", "--corpus", d + "corpus.jsonl", "--out", d + "g.jsonl", "--mode", "sideways", "--endpoint",
               "http://x"})
              .code == 1);
    CHECK(run({"eval", "--pred", d + "corpus.jsonl", "--refs", d + "corpus.jsonl", "--metric", "bleu"}).code == 1);
    CHECK_FALSE(std::filesystem::exists(d + "g.jsonl"));
  }

  TEST_CASE("replay misses are runtime failures") {
    auto dir = testing::scratch_dir("cli-miss");
    testing::write_synthetic_corpus(dir, 1);
    const std::string d = dir.string() + "/";
    std::ofstream(d + "empty.jsonl") << "";
    Result r = run({"generate", "--corpus", d + "corpus.jsonl", "--out", d + "g.jsonl", "--replay", d + "empty.jsonl"});
    CHECK(r.code == 2);
    CHECK(r.err.find("replay log has no response") != std::string::npos);
  }

  TEST_CASE("config file with flag overrides") {
    auto dir = testing::scratch_dir("cli-config");
    testing::write_synthetic_corpus(dir, 2);
    const std::string d = dir.string() + "/";
    std::ofstream(d + "cfg.json") << nlohmann::json{{"corpus", d + "corpus.jsonl"}, {"per_image", 5}, {"out", d + "g.jsonl"}}.dump();
    Result r = run({"generate", "--config", d + "cfg.json", "--per-image", "2", "--endpoint", "http://x", "--dry-run"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("4 model requests") != std::string::npos);

    std::ofstream(d + "bad.json") << R"({"corpus": 3})";
    CHECK(run({"generate", "--config", d + "bad.json", "--dry-run"}).code == 1);
    std::ofstream(d + "unknown.json") << R"({"colour": "red"})";
    CHECK(run({"generate", "--config", d + "unknown.json", "--dry-run"}).code == 1);
  }

  TEST_CASE("config digest ignores key order") {
    cli::RunConfig a = cli::RunConfig::from_json(nlohmann::json::parse(R"({"seed": 3, "metric": "relaxed"})"));
    cli::RunConfig b = cli::RunConfig::from_json(nlohmann::json::parse(R"({"metric": "relaxed", "seed": 3})"));
    CHECK(a.digest() == b.digest());
    CHECK(cli::RunConfig::from_json(a.to_json()).to_json() == a.to_json());
  }
}
