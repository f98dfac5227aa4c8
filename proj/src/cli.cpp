#include "docstep/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "docstep/digest.hpp"
#include "docstep/eval.hpp"
#include "docstep/templates.hpp"

namespace docstep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json RunConfig::to_json() const {
  return {{"command", command},
          {"endpoint", endpoint},
          {"kind", kind ? json(std::string(docstep::to_string(*kind))) : json(nullptr)},
          {"mode", mode},
          {"corpus", corpus},
          {"gold", gold},
          {"in", in},
          {"out", out},
          {"rejected", rejected},
          {"report", report},
          {"pred", pred},
          {"refs", refs},
          {"replay", replay},
          {"record", record},
          {"checkpoint", checkpoint},
          {"templates", templates},
          {"per_image", per_image},
          {"seed", seed},
          {"concurrency", concurrency},
          {"requests_per_second", requests_per_second},
          {"models", models.to_json()},
          {"rules", rules},
          {"judge", judge},
          {"tol_rel", tol_rel},
          {"tol_abs", tol_abs},
          {"metric", metric},
          {"threshold", threshold}};
}

RunConfig RunConfig::from_json(const json& record) {
  if (!record.is_object()) throw ValidationError("config must be a JSON object");
  RunConfig c;
  const json known = c.to_json();
  for (const auto& [key, value] : record.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  try {
    auto take = [&](const char* key, auto& field) {
      if (record.contains(key)) record.at(key).get_to(field);
    };
    take("command", c.command);
    take("endpoint", c.endpoint);
    if (record.contains("kind") && !record.at("kind").is_null()) {
      const auto text = record.at("kind").get<std::string>();
      c.kind = parse_dataset_kind(text);
      if (!c.kind) throw ValidationError("unknown dataset kind '" + text + "'");
    }
    take("mode", c.mode);
    take("corpus", c.corpus);
    take("gold", c.gold);
    take("in", c.in);
    take("out", c.out);
    take("rejected", c.rejected);
    take("report", c.report);
    take("pred", c.pred);
    take("refs", c.refs);
    take("replay", c.replay);
    take("record", c.record);
    take("checkpoint", c.checkpoint);
    take("templates", c.templates);
    take("tol_rel", c.tol_rel);
    take("tol_abs", c.tol_abs);
    take("metric", c.metric);
    take("per_image", c.per_image);
    take("seed", c.seed);
    take("concurrency", c.concurrency);
    take("requests_per_second", c.requests_per_second);
    take("rules", c.rules);
    take("judge", c.judge);
    take("threshold", c.threshold);
    if (record.contains("models")) {
      const json& m = record.at("models");
      if (!m.is_object()) throw ValidationError("config 'models' must be an object");
      const json known_models = c.models.to_json();
      for (const auto& [key, value] : m.items()) {
        if (!known_models.contains(key)) throw ValidationError("unknown config key 'models." + key + "'");
      }
      auto take_model = [&](const char* key, auto& field) {
        if (m.contains(key)) m.at(key).get_to(field);
      };
      take_model("generator_model", c.models.generator_model);
      take_model("judge_model", c.models.judge_model);
      take_model("classifier_model", c.models.classifier_model);
      take_model("generation_temperature", c.models.generation_temperature);
      take_model("judge_temperature", c.models.judge_temperature);
      take_model("classifier_temperature", c.models.classifier_temperature);
      take_model("max_tokens", c.models.max_tokens);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return c;
}

std::string RunConfig::digest() const { return sha256_hex(canonical_json(to_json())); }

namespace {

struct Flags {
  RunConfig values;
  std::string config_path;
  std::string kind;
  bool dry_run = false;
  bool no_judge = false;
  std::size_t stop_after = 0;
  std::vector<std::function<void(RunConfig&)>> overlays;
};

template <typename T>
void bind_flag(CLI::App* app, Flags& flags, const std::string& name, T RunConfig::*field, const std::string& desc) {
  CLI::Option* opt = app->add_option(name, flags.values.*field, desc);
  flags.overlays.push_back([opt, field, &flags](RunConfig& c) {
    if (opt->count()) c.*field = flags.values.*field;
  });
}

void bind_model(CLI::App* app, Flags& flags, const std::string& name, std::string ModelSettings::*field,
                const std::string& desc) {
  CLI::Option* opt = app->add_option(name, flags.values.models.*field, desc);
  flags.overlays.push_back([opt, field, &flags](RunConfig& c) {
    if (opt->count()) c.models.*field = flags.values.models.*field;
  });
}

void add_common(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_path, "JSON run config; flags override its values")
      ->check(CLI::ExistingFile);
  app->add_flag("--dry-run", flags.dry_run, "validate and plan without model calls");
  bind_flag(app, flags, "--concurrency", &RunConfig::concurrency, "worker pool size");
  bind_flag(app, flags, "--seed", &RunConfig::seed, "seed for rotation offset and retry jitter");
}

void add_model_flags(CLI::App* app, Flags& flags) {
  bind_flag(app, flags, "--replay", &RunConfig::replay, "answer model calls from this log only");
  bind_flag(app, flags, "--record", &RunConfig::record, "call the endpoint and append responses to this log");
  bind_flag(app, flags, "--endpoint", &RunConfig::endpoint, "chat-completions endpoint (default: $MODEL_ENDPOINT)");
  bind_flag(app, flags, "--rps", &RunConfig::requests_per_second, "request rate limit, 0 for none");
  bind_flag(app, flags, "--checkpoint", &RunConfig::checkpoint, "resume file for interrupted runs");
  bind_flag(app, flags, "--templates", &RunConfig::templates, "directory of <template_id>.txt overrides");
  bind_model(app, flags, "--generator-model", &ModelSettings::generator_model, "generator model name");
  bind_model(app, flags, "--judge-model", &ModelSettings::judge_model, "judge model name");
  bind_model(app, flags, "--classifier-model", &ModelSettings::classifier_model, "classifier model name");
  app->add_option("--stop-after", flags.stop_after, "stop after N work items (resume with --checkpoint)");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_input(const std::string& path, const std::string& flag) {
  require(!path.empty(), flag + " is required");
  require(fs::is_regular_file(path), flag + " " + path + " does not exist");
}

void require_output(const std::string& path, const std::string& flag) {
  require(!path.empty(), flag + " is required");
  const fs::path parent = fs::absolute(path).parent_path();
  require(fs::is_directory(parent), flag + " directory " + parent.string() + " does not exist");
  require(!fs::is_directory(path), flag + " " + path + " is a directory");
}

void require_distinct(const std::vector<std::string>& paths) {
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t j = i + 1; j < paths.size(); ++j) {
      if (paths[i].empty() || paths[j].empty()) continue;
      require(fs::weakly_canonical(paths[i]) != fs::weakly_canonical(paths[j]),
              "path " + paths[i] + " is used twice in one run");
    }
  }
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

std::string default_rejected(const std::string& out) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + ".rejected" + p.extension().string())).string();
}

std::optional<Rule> parse_rule(const std::string& name) {
  if (name == "format_valid") return Rule::FormatValid;
  if (name == "answer_consistency") return Rule::AnswerConsistency;
  if (name == "arithmetic") return Rule::Arithmetic;
  return std::nullopt;
}

FilterPolicy policy_from(const RunConfig& c) {
  FilterPolicy policy;
  policy.rules_enabled.clear();
  for (const auto& name : c.rules) {
    auto rule = parse_rule(name);
    require(rule.has_value(), "unknown rule '" + name + "' (format_valid, answer_consistency, arithmetic)");
    policy.rules_enabled.insert(*rule);
  }
  policy.judge_enabled = c.judge;
  try {
    policy.tolerance = ToleranceRule::from_strings(c.tol_rel, c.tol_abs);
  } catch (const Error& e) {
    throw ValidationError(std::string("bad tolerance: ") + e.what());
  }
  policy.validate();
  return policy;
}

TemplateRegistry templates_from(const RunConfig& c) {
  if (c.templates.empty()) return TemplateRegistry();
  require(fs::is_directory(c.templates), "--templates " + c.templates + " is not a directory");
  return TemplateRegistry::with_overrides(c.templates);
}

void validate_model_source(const RunConfig& c) {
  require(c.replay.empty() || c.record.empty(), "--replay and --record are mutually exclusive");
  require(c.concurrency >= 1, "--concurrency must be at least 1");
  require(c.requests_per_second >= 0, "--rps must not be negative");
  if (!c.replay.empty()) require(fs::is_regular_file(c.replay), "replay log " + c.replay + " does not exist");
  if (!c.record.empty()) require_output(c.record, "--record");
  if (c.replay.empty()) {
    require(!c.endpoint.empty(), "no model endpoint: pass --replay, --endpoint or set MODEL_ENDPOINT");
  }
}

ModelClient make_client(const RunConfig& c, const Hooks& hooks) {
  ClientOptions options;
  options.concurrency = c.concurrency;
  options.requests_per_second = c.requests_per_second;
  options.seed = c.seed;
  if (!c.replay.empty()) return ModelClient::open_replay(c.replay, ReplayMode::Replay, nullptr, options);

  std::unique_ptr<Transport> transport;
  if (hooks.transport) {
    transport = hooks.transport(c);
  } else {
    const char* key = std::getenv("MODEL_API_KEY");
    transport = make_http_transport(c.endpoint, key ? key : "");
  }
  if (!c.record.empty()) return ModelClient::open_replay(c.record, ReplayMode::Record, std::move(transport), options);
  return ModelClient(std::move(transport), options);
}

struct Session {
  const RunConfig& config;
  std::string started = timestamp_now();

  RunManifest manifest(std::map<std::string, std::uint64_t> counts) const {
    RunManifest m;
    m.command = config.command;
    m.config = config.to_json();
    m.config_digest = config.digest();
    m.run_id = sha256_hex(m.config_digest + "\n" + m.command + "\n" + std::to_string(config.seed)).substr(0, 16);
    m.started = started;
    m.finished = timestamp_now();
    m.counts = std::move(counts);
    return m;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f.flush()) throw Error("write failed for " + path);
}

CorpusHandle load_with_gold(const RunConfig& c, std::ostream& err) {
  CorpusHandle corpus = load_corpus(c.corpus, c.kind);
  if (c.gold.empty()) return corpus;
  AttachResult attached = attach_gold_text(corpus, c.gold);
  if (!attached.unknown_ids.empty()) {
    err << "warning: " << attached.unknown_ids.size() << " gold text records name documents outside the corpus\n";
  }
  return attached.corpus;
}

std::unique_ptr<Checkpoint> open_checkpoint(const RunConfig& c) {
  if (c.checkpoint.empty()) return nullptr;
  return Checkpoint::open(c.checkpoint);
}

int cmd_generate(const RunConfig& c, const Flags& flags, const Hooks& hooks, std::ostream& out, std::ostream& err) {
  require_input(c.corpus, "--corpus");
  if (!c.gold.empty()) require_input(c.gold, "--gold");
  require_output(c.out, "--out");
  require(c.mode == "extend" || c.mode == "augment", "--mode must be augment or extend");
  if (c.mode == "augment") require_input(c.in, "--in");
  require_distinct({c.corpus, c.gold, c.in, c.out, c.replay, c.record, c.checkpoint});
  require(c.per_image >= 0, "--per-image must not be negative");
  validate_model_source(c);
  const TemplateRegistry templates = templates_from(c);
  const CorpusHandle corpus = load_with_gold(c, err);

  GenerationPlan plan = GenerationPlan::defaults(corpus.kind(), c.seed);
  if (c.per_image > 0) plan.per_image_count = c.per_image;
  plan.validate();

  std::vector<QAInstance> originals;
  std::size_t requests = 0;
  if (c.mode == "augment") {
    originals = read_instances(c.in);
    for (const auto& inst : originals) {
      require(corpus.find(inst.doc_id) != nullptr,
              "instance '" + inst.instance_id + "' refers to unknown doc '" + inst.doc_id + "'");
    }
    requests = originals.size();
  } else {
    requests = plan_requests(corpus, plan).size();
  }

  if (flags.dry_run) {
    out << "dry run: " << c.mode << " over " << corpus.size() << " " << to_string(corpus.kind()) << " images, "
        << requests << " model requests planned\n";
    return kOk;
  }

  Session session{c};
  ModelClient client = make_client(c, hooks);
  auto checkpoint = open_checkpoint(c);
  RunControl control;
  control.stop_after = flags.stop_after;
  StageContext ctx{client, templates, c.models, c.concurrency, checkpoint.get(), &control};

  std::vector<QAInstance> generated =
      c.mode == "augment" ? augment(corpus, originals, ctx) : extend(corpus, plan, ctx);
  RunManifest written = write_instances(generated, c.out);
  session.manifest(written.counts).write(manifest_path(c.out));
  out << "wrote " << generated.size() << " instances to " << c.out << "\n";
  return kOk;
}

int cmd_check(const RunConfig& c, const Flags& flags, const Hooks& hooks, std::ostream& out, std::ostream& err) {
  require_input(c.in, "--in");
  require_input(c.corpus, "--corpus");
  if (!c.gold.empty()) require_input(c.gold, "--gold");
  require_output(c.out, "--out");
  const std::string rejected_path = c.rejected.empty() ? default_rejected(c.out) : c.rejected;
  require_output(rejected_path, "--rejected");
  if (!c.report.empty()) require_output(c.report, "--report");
  require_distinct({c.in, c.corpus, c.gold, c.out, rejected_path, c.report, c.replay, c.record, c.checkpoint});
  const FilterPolicy policy = policy_from(c);
  if (policy.judge_enabled) validate_model_source(c);
  const TemplateRegistry templates = templates_from(c);
  const CorpusHandle corpus = load_with_gold(c, err);
  const std::vector<QAInstance> instances = read_instances(c.in);
  for (const auto& inst : instances) {
    require(corpus.find(inst.doc_id) != nullptr,
            "instance '" + inst.instance_id + "' refers to unknown doc '" + inst.doc_id + "'");
  }

  if (flags.dry_run) {
    std::size_t pending = 0;
    for (const auto& inst : instances) pending += inst.status != Status::Rejected;
    out << "dry run: " << instances.size() << " instances, " << pending << " to check, at most "
        << (policy.judge_enabled ? pending : 0) << " judge requests\n";
    return kOk;
  }

  Session session{c};
  std::optional<ModelClient> client;
  if (policy.judge_enabled) {
    client.emplace(make_client(c, hooks));
  } else {
    // Rules only: a client that fails loudly if anything tries to call it.
    struct NoTransport : Transport {
      TransportResult send(const ModelRequest&) override { return {std::nullopt, false, "judge disabled"}; }
    };
    client.emplace(std::make_unique<NoTransport>());
  }
  auto checkpoint = open_checkpoint(c);
  RunControl control;
  control.stop_after = flags.stop_after;
  StageContext ctx{*client, templates, c.models, c.concurrency, checkpoint.get(), &control};

  FilterResult result = filter(instances, corpus, policy, ctx);
  std::vector<QAInstance> all = result.accepted;
  all.insert(all.end(), result.rejected.begin(), result.rejected.end());
  RunManifest accepted = write_instances(result.accepted, c.out);
  RunManifest rejected = write_instances(result.rejected, rejected_path);

  std::map<std::string, std::uint64_t> counts = accepted.counts;
  for (const auto& [key, n] : rejected.counts) counts[key] += n;
  if (!c.report.empty()) {
    const StatsReport report = stats(all, corpus);
    write_text(c.report, report.render_text());
    write_text(c.report + ".json", report.to_json().dump(2) + "\n");
  }
  session.manifest(counts).write(manifest_path(c.out));
  out << "accepted " << result.accepted.size() << ", rejected " << result.rejected.size() << "\n";
  return kOk;
}

int cmd_classify(const RunConfig& c, const Flags& flags, const Hooks& hooks, std::ostream& out, std::ostream&) {
  require_input(c.in, "--in");
  require_output(c.out, "--out");
  require_distinct({c.in, c.out, c.replay, c.record, c.checkpoint});
  validate_model_source(c);
  const TemplateRegistry templates = templates_from(c);
  const std::vector<QAInstance> instances = read_instances(c.in);

  if (flags.dry_run) {
    out << "dry run: " << instances.size() << " classifier requests\n";
    return kOk;
  }

  Session session{c};
  ModelClient client = make_client(c, hooks);
  auto checkpoint = open_checkpoint(c);
  RunControl control;
  control.stop_after = flags.stop_after;
  StageContext ctx{client, templates, c.models, c.concurrency, checkpoint.get(), &control};
  std::vector<QAInstance> classified = classify(instances, ctx);
  std::size_t unclassified = 0;
  for (const auto& inst : classified) unclassified += !inst.question_type.has_value();
  RunManifest written = write_instances(classified, c.out);
  written.counts["unclassified"] = unclassified;
  session.manifest(written.counts).write(manifest_path(c.out));
  out << "classified " << classified.size() - unclassified << " of " << classified.size() << " instances\n";
  return kOk;
}

int cmd_eval(const RunConfig& c, const Flags& flags, std::ostream& out) {
  require_input(c.pred, "--pred");
  require_input(c.refs, "--refs");
  if (!c.report.empty()) require_output(c.report, "--report");
  require_distinct({c.pred, c.refs, c.report});
  require(c.concurrency >= 1, "--concurrency must be at least 1");
  auto metric = parse_metric(c.metric);
  require(metric.has_value(), "--metric must be anls, relaxed or accuracy");
  require(c.threshold >= 0.0 && c.threshold <= 1.0, "--threshold must lie in [0, 1]");
  ScoringSettings settings;
  settings.metric = *metric;
  settings.threshold = c.threshold;
  if (*metric == Metric::Relaxed && (c.tol_rel != "0.01" || c.tol_abs != "0.01")) {
    settings.tolerance = ToleranceRule::from_strings(c.tol_rel, c.tol_abs);
  }
  const auto predictions = read_predictions(c.pred);
  const auto references = read_instances(c.refs);

  if (flags.dry_run) {
    out << "dry run: " << predictions.size() << " predictions against " << references.size() << " references\n";
    return kOk;
  }

  Session session{c};
  const EvalReport report = evaluate_run(predictions, references, settings, c.concurrency);
  out << report.render_text();
  std::ostringstream overall;
  overall << std::fixed << std::setprecision(4) << report.overall;
  out << "overall " << to_string(report.metric) << ": " << overall.str() << "\n";
  const std::string anchor = c.report.empty() ? c.pred + ".eval" : c.report;
  if (!c.report.empty()) {
    write_text(c.report, report.render_text());
    write_text(c.report + ".json", report.to_json().dump(2) + "\n");
  }
  session.manifest({{"predictions", predictions.size()}, {"unclassified", report.unclassified}})
      .write(manifest_path(anchor));
  return kOk;
}

int cmd_stats(const RunConfig& c, const Flags& flags, std::ostream& out, std::ostream& err) {
  require_input(c.in, "--in");
  if (!c.rejected.empty()) require_input(c.rejected, "--rejected");
  require_input(c.corpus, "--corpus");
  if (!c.report.empty()) require_output(c.report, "--report");
  require_distinct({c.in, c.rejected, c.corpus, c.report});
  const CorpusHandle corpus = load_with_gold(c, err);
  std::vector<QAInstance> instances = read_instances(c.in);
  if (!c.rejected.empty()) {
    auto more = read_instances(c.rejected);
    instances.insert(instances.end(), more.begin(), more.end());
  }
  if (flags.dry_run) {
    out << "dry run: " << instances.size() << " instances over " << corpus.size() << " images\n";
    return kOk;
  }
  Session session{c};
  const StatsReport report = stats(instances, corpus);
  out << report.render_text();
  const std::string anchor = c.report.empty() ? c.in + ".stats" : c.report;
  if (!c.report.empty()) {
    write_text(c.report, report.render_text());
    write_text(c.report + ".json", report.to_json().dump(2) + "\n");
  }
  session.manifest({{"instances", instances.size()}}).write(manifest_path(anchor));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  CLI::App app{"docstep: step-wise document VQA data synthesis, checking and evaluation", "docstep"};
  app.require_subcommand(1);
  Flags flags;

  CLI::App* gen = app.add_subcommand("generate", "augment gold QA pairs or extend images with new QA chains");
  add_common(gen, flags);
  add_model_flags(gen, flags);
  gen->add_option("--kind", flags.kind, "docvqa, infovqa or chartqa (default: from corpus)");
  bind_flag(gen, flags, "--mode", &RunConfig::mode, "augment or extend");
  bind_flag(gen, flags, "--corpus", &RunConfig::corpus, "document corpus JSONL");
  bind_flag(gen, flags, "--gold", &RunConfig::gold, "gold text JSONL");
  bind_flag(gen, flags, "--in", &RunConfig::in, "original QA instances (augment mode)");
  bind_flag(gen, flags, "--out", &RunConfig::out, "generated instances JSONL");
  bind_flag(gen, flags, "--per-image", &RunConfig::per_image, "questions per image (extend mode)");

  CLI::App* check = app.add_subcommand("check", "filter generated instances by rules and the judge");
  add_common(check, flags);
  add_model_flags(check, flags);
  check->add_option("--kind", flags.kind, "docvqa, infovqa or chartqa (default: from corpus)");
  bind_flag(check, flags, "--in", &RunConfig::in, "generated instances JSONL");
  bind_flag(check, flags, "--corpus", &RunConfig::corpus, "document corpus JSONL");
  bind_flag(check, flags, "--gold", &RunConfig::gold, "gold text JSONL shown to the judge");
  bind_flag(check, flags, "--out", &RunConfig::out, "accepted instances JSONL");
  bind_flag(check, flags, "--rejected", &RunConfig::rejected, "rejected instances JSONL (default: <out>.rejected)");
  bind_flag(check, flags, "--report", &RunConfig::report, "statistics report");
  bind_flag(check, flags, "--rules", &RunConfig::rules, "rules to apply");
  bind_flag(check, flags, "--tol-rel", &RunConfig::tol_rel, "relative tolerance for arithmetic claims");
  bind_flag(check, flags, "--tol-abs", &RunConfig::tol_abs, "absolute tolerance for arithmetic claims");
  check->add_flag("--no-judge", flags.no_judge, "rules only");

  CLI::App* cls = app.add_subcommand("classify", "label question types");
  add_common(cls, flags);
  add_model_flags(cls, flags);
  bind_flag(cls, flags, "--in", &RunConfig::in, "instances JSONL");
  bind_flag(cls, flags, "--out", &RunConfig::out, "classified instances JSONL");

  CLI::App* ev = app.add_subcommand("eval", "score predictions");
  add_common(ev, flags);
  bind_flag(ev, flags, "--pred", &RunConfig::pred, "predictions JSONL (instance_id, text)");
  bind_flag(ev, flags, "--refs", &RunConfig::refs, "reference instances JSONL");
  bind_flag(ev, flags, "--metric", &RunConfig::metric, "anls, relaxed or accuracy");
  bind_flag(ev, flags, "--threshold", &RunConfig::threshold, "ANLS threshold");
  bind_flag(ev, flags, "--tol-rel", &RunConfig::tol_rel, "relative tolerance (relaxed)");
  bind_flag(ev, flags, "--tol-abs", &RunConfig::tol_abs, "absolute tolerance (relaxed)");
  bind_flag(ev, flags, "--report", &RunConfig::report, "report file");

  CLI::App* st = app.add_subcommand("stats", "tabulate a generated set");
  add_common(st, flags);
  bind_flag(st, flags, "--in", &RunConfig::in, "instances JSONL");
  bind_flag(st, flags, "--rejected", &RunConfig::rejected, "rejected instances JSONL");
  bind_flag(st, flags, "--corpus", &RunConfig::corpus, "document corpus JSONL");
  bind_flag(st, flags, "--report", &RunConfig::report, "report file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunConfig config;
    if (!flags.config_path.empty()) {
      std::ifstream in(flags.config_path);
      json record;
      try {
        record = json::parse(in);
      } catch (const json::exception& e) {
        throw ValidationError("config " + flags.config_path + ": " + e.what());
      }
      config = RunConfig::from_json(record);
    }
    for (auto& overlay : flags.overlays) overlay(config);
    if (!flags.kind.empty()) {
      config.kind = parse_dataset_kind(flags.kind);
      require(config.kind.has_value(), "unknown --kind '" + flags.kind + "'");
    }
    if (flags.no_judge) config.judge = false;
    if (config.endpoint.empty()) {
      if (const char* env = std::getenv("MODEL_ENDPOINT")) config.endpoint = env;
    }
    config.command = sub->get_name();

    if (config.command == "generate") return cmd_generate(config, flags, hooks, out, err);
    if (config.command == "check") return cmd_check(config, flags, hooks, out, err);
    if (config.command == "classify") return cmd_classify(config, flags, hooks, out, err);
    if (config.command == "eval") return cmd_eval(config, flags, out);
    return cmd_stats(config, flags, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const Interrupted& e) {
    err << "interrupted: " << e.what() << "; rerun with the same --checkpoint to resume\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace docstep::cli
