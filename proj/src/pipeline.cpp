#include "docstep/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_set>

#include <omp.h>

#include "docstep/digest.hpp"
#include "docstep/eval.hpp"
#include "docstep/mathcheck.hpp"

namespace docstep {

using nlohmann::json;

namespace {

constexpr std::pair<RejectionReason, std::string_view> kReasons[] = {
    {RejectionReason::ModelError, "model_error"},
    {RejectionReason::ParseError, "parse_error"},
    {RejectionReason::Duplicate, "duplicate"},
    {RejectionReason::AnswerMismatch, "answer_mismatch"},
    {RejectionReason::RuleArithmetic, "rule_arithmetic"},
    {RejectionReason::JudgeFalse, "judge_false"},
    {RejectionReason::JudgeParseError, "judge_parse_error"}};

std::string reason(RejectionReason r) { return std::string(to_string(r)); }

// Runs fn(i) for i in [0, n) on up to `concurrency` OpenMP threads. Exceptions are
// collected per item and the first one (by index) rethrown after the loop.
template <typename Fn>
void for_each_item(std::size_t n, int concurrency, RunControl* control, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, concurrency))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (control && control->stopped) {
    throw Interrupted("stopped after " + std::to_string(control->completed.load()) + " work items");
  }
}

struct CallOutcome {
  std::optional<ModelResponse> response;
  std::string error;
};

// Endpoint failures become a rejectable outcome; replay misses abort the run.
CallOutcome call_model(ModelClient& client, const ModelRequest& request) {
  try {
    ModelResponse r = client.complete(request);
    if (r.finish_reason == FinishReason::Error) return {std::nullopt, "model returned an error finish"};
    return {std::move(r), {}};
  } catch (const ReplayMiss&) {
    throw;
  } catch (const ModelError& e) {
    return {std::nullopt, e.what()};
  }
}

ModelRequest image_request(const std::string& model, const std::string& image_ref, std::string text,
                           const ModelSettings& models) {
  ModelRequest request;
  request.model_name = model;
  request.temperature = models.generation_temperature;
  request.max_tokens = models.max_tokens;
  request.messages.push_back({Role::User, {ContentPart::image(image_ref), ContentPart::text(std::move(text))}});
  return request;
}

ModelRequest text_request(const std::string& model, double temperature, std::string text, const ModelSettings& models) {
  ModelRequest request;
  request.model_name = model;
  request.temperature = temperature;
  request.max_tokens = models.max_tokens;
  request.messages.push_back({Role::User, {ContentPart::text(std::move(text))}});
  return request;
}

std::string normalized_question(std::string_view q) { return normalize_answer(q); }

ReasoningChain chain_from_rows(const std::vector<StepRow>& rows, std::size_t first) {
  ReasoningChain chain;
  int index = 0;
  for (std::size_t i = first; i < rows.size(); ++i) chain.steps.push_back({++index, rows[i].payload});
  return chain;
}

bool checkpoint_lookup(const StageContext& ctx, std::string_view stage, const std::string& digest, QAInstance& out) {
  if (!ctx.checkpoint) return false;
  auto hit = ctx.checkpoint->find(stage, digest);
  if (!hit) return false;
  out = instance_from_json(*hit);
  return true;
}

void checkpoint_store(const StageContext& ctx, std::string_view stage, const std::string& digest,
                      const QAInstance& inst) {
  if (ctx.checkpoint) ctx.checkpoint->record(stage, digest, to_json(inst));
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_phrase(const std::string& text, const std::string& phrase) {
  if (phrase.empty()) return false;
  for (std::size_t pos = text.find(phrase); pos != std::string::npos; pos = text.find(phrase, pos + 1)) {
    const bool left = pos == 0 || !word_char(text[pos - 1]) || !word_char(phrase.front());
    const std::size_t end = pos + phrase.size();
    const bool right = end == text.size() || !word_char(text[end]) || !word_char(phrase.back());
    if (left && right) return true;
  }
  return false;
}

std::string rationale_block(const QAInstance& inst) {
  std::vector<StepRow> rows;
  if (inst.chain) {
    for (const auto& s : inst.chain->steps) rows.push_back({s.index, s.text});
  }
  return render_step_table(rows) + "The answer is: " + inst.answer;
}

std::string images_cell(const std::map<std::string, std::uint64_t>& images) {
  std::string out;
  for (const auto& [source, n] : images) {
    if (!out.empty()) out += "+";
    out += std::to_string(n);
  }
  return out.empty() ? "0" : out;
}

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      line += row[i];
      if (i + 1 < row.size()) line.append(width[i] - row[i].size(), ' ');
    }
    os << line << '\n';
  }
  return os.str();
}

}  // namespace

std::string_view to_string(RejectionReason r) {
  for (const auto& [v, name] : kReasons) {
    if (v == r) return name;
  }
  return "?";
}

std::optional<RejectionReason> parse_rejection_reason(std::string_view text) {
  for (const auto& [v, name] : kReasons) {
    if (name == text) return v;
  }
  return std::nullopt;
}

GenerationPlan GenerationPlan::defaults(DatasetKind kind, std::uint64_t seed) {
  GenerationPlan plan;
  plan.dataset_kind = kind;
  plan.per_image_count = kind == DatasetKind::DocVQA ? 3 : kind == DatasetKind::InfoVQA ? 4 : 2;
  plan.template_id = kind == DatasetKind::ChartQA ? TemplateId::ChartFewshot : TemplateId::QaGen;
  const std::size_t n = constraint_list(kind).constraints.size();
  for (std::size_t i = 0; i < n; ++i) plan.constraint_rotation.push_back(i);
  if (seed != 0) plan.rotation_offset = static_cast<std::size_t>(std::mt19937_64(seed)() % n);
  return plan;
}

void GenerationPlan::validate() const {
  if (per_image_count <= 0) throw ValidationError("per_image_count must be positive");
  if (constraint_rotation.empty()) throw ValidationError("constraint rotation is empty");
  const std::size_t n = constraint_list(dataset_kind).constraints.size();
  for (auto index : constraint_rotation) {
    if (index >= n) throw ValidationError("constraint index " + std::to_string(index) + " out of range");
  }
  const TemplateId expected = dataset_kind == DatasetKind::ChartQA ? TemplateId::ChartFewshot : TemplateId::QaGen;
  if (template_id != expected) {
    throw ValidationError(std::string(to_string(dataset_kind)) + " generation uses the " +
                          std::string(to_string(expected)) + " template");
  }
}

std::vector<PlannedRequest> plan_requests(const CorpusHandle& corpus, const GenerationPlan& plan) {
  plan.validate();
  if (corpus.kind() != plan.dataset_kind) throw ValidationError("plan dataset kind differs from corpus kind");
  const auto constraints = constraint_list(plan.dataset_kind).constraints;
  std::vector<PlannedRequest> out;
  out.reserve(corpus.size() * static_cast<std::size_t>(plan.per_image_count));
  std::size_t k = 0;
  for (const auto& doc : corpus.records()) {
    for (int slot = 0; slot < plan.per_image_count; ++slot, ++k) {
      const std::size_t index = plan.constraint_rotation[(plan.rotation_offset + k) % plan.constraint_rotation.size()];
      out.push_back({doc.doc_id, slot, index, constraints[index]});
    }
  }
  return out;
}

json ModelSettings::to_json() const {
  return {{"generator_model", generator_model},
          {"judge_model", judge_model},
          {"classifier_model", classifier_model},
          {"generation_temperature", generation_temperature},
          {"judge_temperature", judge_temperature},
          {"classifier_temperature", classifier_temperature},
          {"max_tokens", max_tokens}};
}

std::unique_ptr<Checkpoint> Checkpoint::open(const std::filesystem::path& path) {
  auto cp = std::make_unique<Checkpoint>();
  cp->enabled_ = true;
  if (std::ifstream in(path); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const json entry = json::parse(line);
        cp->entries_[entry.at("stage").get<std::string>() + "/" + entry.at("digest").get<std::string>()] =
            entry.at("outcome");
      } catch (const json::exception&) {
        // A torn final line from an interrupted write; the item is simply redone.
      }
    }
  }
  bool torn = false;
  if (std::ifstream tail(path, std::ios::binary | std::ios::ate); tail && tail.tellg() > 0) {
    tail.seekg(-1, std::ios::end);
    torn = tail.get() != '\n';
  }
  cp->out_.open(path, std::ios::app | std::ios::binary);
  if (!cp->out_) throw Error("cannot append to checkpoint " + path.string());
  if (torn) cp->out_ << '\n';
  return cp;
}

std::optional<json> Checkpoint::find(std::string_view stage, std::string_view digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(std::string(stage) + "/" + std::string(digest));
  if (it == entries_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second);
}

void Checkpoint::record(std::string_view stage, std::string_view digest, const json& outcome) {
  if (!enabled_) return;
  std::lock_guard lock(mutex_);
  entries_[std::string(stage) + "/" + std::string(digest)] = outcome;
  out_ << json{{"stage", stage}, {"digest", digest}, {"outcome", outcome}}.dump() << '\n';
  out_.flush();
}

std::size_t Checkpoint::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void RunControl::finish_item() {
  const std::size_t done = ++completed;
  if (stop_after != 0 && done >= stop_after) stopped = true;
}

ModelRequest augment_request(const DocumentRecord& doc, const QAInstance& original, const TemplateRegistry& templates,
                             const ModelSettings& models) {
  const std::string gold = original.gold_answers.empty() ? original.answer : original.gold_answers.front();
  std::string prompt;
  if (doc.dataset_kind == DatasetKind::ChartQA) {
    prompt = templates.render(TemplateId::ChartFewshot, {}) +
             "\n\nWrite the reasoning steps for this question and its known answer.\nQuestion: " + original.question +
             "\nGold_answer: " + gold;
  } else {
    prompt = templates.render(TemplateId::RationaleGen, {{"question", original.question}, {"answer", gold}});
  }
  return image_request(models.generator_model, doc.image_ref, std::move(prompt), models);
}

ModelRequest extend_request(const DocumentRecord& doc, const PlannedRequest& planned,
                            const TemplateRegistry& templates, const ModelSettings& models) {
  std::string prompt;
  if (doc.dataset_kind == DatasetKind::ChartQA) {
    prompt = templates.render(TemplateId::ChartFewshot, {}) + "\n" + planned.constraint;
  } else {
    prompt = templates.render(TemplateId::QaGen, {{"constraint", planned.constraint}});
  }
  return image_request(models.generator_model, doc.image_ref, std::move(prompt), models);
}

ModelRequest judge_request(const QAInstance& inst, const DocumentRecord* doc, const TemplateRegistry& templates,
                           const ModelSettings& models) {
  std::string prompt = templates.render(
      TemplateId::Checker, {{"qa", inst.question + " answer: " + inst.answer}, {"rationale", rationale_block(inst)}});
  if (doc && doc->gold_text) prompt += "\n###Gold_text\n" + doc->gold_text->render_inline();
  return text_request(models.judge_model, models.judge_temperature, std::move(prompt), models);
}

ModelRequest classify_request(const QAInstance& inst, const TemplateRegistry& templates, const ModelSettings& models) {
  return text_request(models.classifier_model, models.classifier_temperature,
                      templates.render(TemplateId::Classifier, {{"question", inst.question}}), models);
}

std::vector<QAInstance> augment(const CorpusHandle& corpus, const std::vector<QAInstance>& originals,
                                StageContext& ctx) {
  for (const auto& orig : originals) {
    if (!corpus.find(orig.doc_id)) throw ValidationError("instance '" + orig.instance_id + "' refers to unknown doc '" + orig.doc_id + "'");
    if (orig.gold_answers.empty() && orig.answer.empty()) {
      throw ValidationError("instance '" + orig.instance_id + "' has no gold answer");
    }
  }
  std::vector<QAInstance> out(originals.size());
  for_each_item(originals.size(), ctx.concurrency, ctx.control, [&](std::size_t i) {
    if (ctx.control && !ctx.control->begin_item()) return;
    const QAInstance& orig = originals[i];
    const DocumentRecord& doc = *corpus.find(orig.doc_id);
    const ModelRequest request = augment_request(doc, orig, ctx.templates, ctx.models);
    const std::string digest = request_digest(request);

    QAInstance inst;
    if (!checkpoint_lookup(ctx, "augment", digest, inst)) {
      inst.instance_id = orig.instance_id;
      inst.doc_id = orig.doc_id;
      inst.question = orig.question;
      inst.gold_answers = orig.gold_answers.empty() ? std::vector<std::string>{orig.answer} : orig.gold_answers;
      inst.question_type = orig.question_type;
      inst.provenance = Provenance::Augmented;

      const CallOutcome call = call_model(ctx.client, request);
      if (!call.response) {
        inst.reject(reason(RejectionReason::ModelError));
        inst.extra["error"] = call.error;
      } else {
        try {
          ReasoningChain chain;
          if (doc.dataset_kind == DatasetKind::ChartQA) {
            chain = parse_chart_chain(call.response->text);
          } else {
            chain = chain_from_rows(parse_step_table(call.response->text).rows, 0);
            chain.final_answer = extract_final_answer(call.response->text);
          }
          inst.answer = chain.final_answer;
          inst.chain = std::move(chain);
        } catch (const ParseError& e) {
          inst.reject(reason(RejectionReason::ParseError));
          inst.extra["error"] = e.what();
        }
      }
      checkpoint_store(ctx, "augment", digest, inst);
    }
    out[i] = std::move(inst);
    if (ctx.control) ctx.control->finish_item();
  });
  return out;
}

std::vector<QAInstance> extend(const CorpusHandle& corpus, const GenerationPlan& plan, StageContext& ctx) {
  const auto planned = plan_requests(corpus, plan);
  const auto per_image = static_cast<std::size_t>(plan.per_image_count);
  std::vector<QAInstance> out(planned.size());

  for_each_item(corpus.size(), ctx.concurrency, ctx.control, [&](std::size_t image) {
    const DocumentRecord& doc = corpus.records()[image];
    std::unordered_set<std::string> seen;
    for (std::size_t slot = 0; slot < per_image; ++slot) {
      if (ctx.control && !ctx.control->begin_item()) return;
      const PlannedRequest& p = planned[image * per_image + slot];
      const ModelRequest request = extend_request(doc, p, ctx.templates, ctx.models);
      const std::string digest = sha256_hex(request_digest(request) + "/" + std::to_string(slot));

      QAInstance inst;
      if (!checkpoint_lookup(ctx, "extend", digest, inst)) {
        std::ostringstream id;
        id << doc.doc_id << "-ext" << std::setw(2) << std::setfill('0') << (slot + 1);
        inst.instance_id = id.str();
        inst.doc_id = doc.doc_id;
        inst.provenance = Provenance::Extended;
        inst.extra["constraint"] = p.constraint;

        const CallOutcome call = call_model(ctx.client, request);
        if (!call.response) {
          inst.reject(reason(RejectionReason::ModelError));
          inst.extra["error"] = call.error;
        } else {
          try {
            const std::string& text = call.response->text;
            ReasoningChain chain;
            if (doc.dataset_kind == DatasetKind::ChartQA) {
              auto question = parse_chart_question(text);
              if (!question) throw ParseError("no 'Question:' in chart response", 0);
              inst.question = *question;
              chain = parse_chart_chain(text);
            } else {
              const StepTable table = parse_step_table(text);
              if (table.rows.size() < 2) throw ParseError("generated table needs a question row and a step", 0);
              inst.question = table.rows.front().payload;
              chain = chain_from_rows(table.rows, 1);
              chain.final_answer = extract_final_answer(text);
            }
            inst.answer = chain.final_answer;
            inst.chain = std::move(chain);
          } catch (const ParseError& e) {
            inst.reject(reason(RejectionReason::ParseError));
            inst.extra["error"] = e.what();
          }
        }
        if (inst.status != Status::Rejected && seen.count(normalized_question(inst.question))) {
          inst.reject(reason(RejectionReason::Duplicate));
        }
        checkpoint_store(ctx, "extend", digest, inst);
      }
      if (inst.status != Status::Rejected || inst.rejection_reason == reason(RejectionReason::Duplicate)) {
        seen.insert(normalized_question(inst.question));
      }
      out[image * per_image + slot] = std::move(inst);
      if (ctx.control) ctx.control->finish_item();
    }
  });
  return out;
}

void FilterPolicy::validate() const {
  if (rules_enabled.empty() && !judge_enabled) throw ValidationError("filter policy enables no checks");
}

json FilterPolicy::to_json() const {
  json rules = json::array();
  for (Rule r : rules_enabled) {
    rules.push_back(r == Rule::FormatValid ? "format_valid" : r == Rule::AnswerConsistency ? "answer_consistency" : "arithmetic");
  }
  return {{"rules", rules},
          {"judge", judge_enabled},
          {"tolerance", {{"relative", format_decimal(tolerance.relative)}, {"absolute", format_decimal(tolerance.absolute)}}},
          {"answer_tolerance",
           {{"relative", format_decimal(answer_tolerance.relative)}, {"absolute", format_decimal(answer_tolerance.absolute)}}}};
}

bool answer_consistent(std::string_view answer, const std::vector<std::string>& golds, const ToleranceRule& tol) {
  const std::string norm = normalize_answer(answer);
  for (const auto& gold : golds) {
    if (relaxed_match(answer, gold, tol)) return true;
    if (contains_phrase(norm, normalize_answer(gold))) return true;
  }
  return false;
}

FilterResult filter(const std::vector<QAInstance>& instances, const CorpusHandle& corpus, const FilterPolicy& policy,
                    StageContext& ctx) {
  policy.validate();
  const std::string policy_digest =
      sha256_hex(canonical_json(policy.to_json()) + canonical_json(ctx.models.to_json()));
  std::vector<QAInstance> out(instances.size());

  for_each_item(instances.size(), ctx.concurrency, ctx.control, [&](std::size_t i) {
    if (ctx.control && !ctx.control->begin_item()) return;
    QAInstance inst = instances[i];
    if (inst.status == Status::Rejected) {
      out[i] = std::move(inst);
      if (ctx.control) ctx.control->finish_item();
      return;
    }
    const std::string digest = sha256_hex(canonical_json(to_json(inst)) + policy_digest);
    QAInstance done;
    if (checkpoint_lookup(ctx, "filter", digest, done)) {
      out[i] = std::move(done);
      if (ctx.control) ctx.control->finish_item();
      return;
    }

    auto decide = [&]() -> std::optional<RejectionReason> {
      const auto& rules = policy.rules_enabled;
      if (rules.count(Rule::FormatValid)) {
        if (trim(inst.question).empty() || trim(inst.answer).empty() || !inst.chain || inst.chain->steps.empty()) {
          return RejectionReason::ParseError;
        }
      }
      if (rules.count(Rule::AnswerConsistency) && inst.provenance == Provenance::Augmented) {
        if (!answer_consistent(inst.answer, inst.gold_answers, policy.answer_tolerance)) {
          return RejectionReason::AnswerMismatch;
        }
      }
      if (rules.count(Rule::Arithmetic) && inst.chain) {
        const ChainReport report = verify_chain(*inst.chain, policy.tolerance);
        inst.extra["rule_report"] = report.to_json();
        if (report.verdict == ChainReport::Verdict::Fail) return RejectionReason::RuleArithmetic;
      }
      if (policy.judge_enabled) {
        const ModelRequest request = judge_request(inst, corpus.find(inst.doc_id), ctx.templates, ctx.models);
        const CallOutcome call = call_model(ctx.client, request);
        if (!call.response) {
          inst.extra["error"] = call.error;
          return RejectionReason::ModelError;
        }
        try {
          const Verdict v = parse_verdict(call.response->text);
          inst.extra["judge"] = {{"is_faithful", v.is_faithful},
                                 {"is_include", v.is_include},
                                 {"result", v.result},
                                 {"mismatch", v.mismatch}};
          if (!v.result) return RejectionReason::JudgeFalse;
        } catch (const ParseError& e) {
          inst.extra["error"] = e.what();
          return RejectionReason::JudgeParseError;
        }
      }
      return std::nullopt;
    };

    if (auto failed = decide()) {
      inst.reject(reason(*failed));
    } else {
      inst.status = Status::Accepted;
      inst.rejection_reason.reset();
    }
    checkpoint_store(ctx, "filter", digest, inst);
    out[i] = std::move(inst);
    if (ctx.control) ctx.control->finish_item();
  });

  FilterResult result;
  for (auto& inst : out) {
    (inst.status == Status::Accepted ? result.accepted : result.rejected).push_back(std::move(inst));
  }
  return result;
}

std::optional<QuestionType> map_type_label(std::string_view label) {
  std::string norm;
  for (char c : label) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) norm.push_back(static_cast<char>(std::tolower(u)));
    else if (c == '_' || c == '-' || std::isspace(u)) norm.push_back(' ');
    else norm.push_back(' ');
  }
  const std::string compact = normalize_answer(norm);
  if (compact == "text extractive") return QuestionType::TextExtractive;
  for (QuestionType t : kAllQuestionTypes) {
    if (compact == to_string(t)) return t;
  }
  std::optional<QuestionType> found;
  auto consider = [&](QuestionType t, const std::string& word) {
    if (contains_phrase(compact, word)) {
      if (found && *found != t) found = QuestionType(-1);
      else if (!found) found = t;
    }
  };
  consider(QuestionType::TextExtractive, "text extractive");
  consider(QuestionType::Color, "color");
  consider(QuestionType::Spatial, "spatial");
  consider(QuestionType::Count, "count");
  consider(QuestionType::Reasoning, "reasoning");
  if (found && static_cast<int>(*found) == -1) return std::nullopt;
  return found;
}

std::vector<QAInstance> classify(const std::vector<QAInstance>& instances, StageContext& ctx) {
  std::vector<QAInstance> out(instances.size());
  for_each_item(instances.size(), ctx.concurrency, ctx.control, [&](std::size_t i) {
    if (ctx.control && !ctx.control->begin_item()) return;
    QAInstance inst = instances[i];
    const ModelRequest request = classify_request(inst, ctx.templates, ctx.models);
    const std::string digest = request_digest(request);
    QAInstance done;
    if (checkpoint_lookup(ctx, "classify", digest + "/" + inst.instance_id, done)) {
      out[i] = std::move(done);
    } else {
      const CallOutcome call = call_model(ctx.client, request);
      inst.question_type.reset();
      inst.extra.erase("classifier_label");
      inst.extra.erase("classifier_error");
      if (call.response) {
        inst.question_type = map_type_label(call.response->text);
        if (!inst.question_type) inst.extra["classifier_label"] = call.response->text;
      } else {
        inst.extra["classifier_error"] = call.error;
      }
      checkpoint_store(ctx, "classify", digest + "/" + inst.instance_id, inst);
      out[i] = std::move(inst);
    }
    if (ctx.control) ctx.control->finish_item();
  });
  return out;
}

std::uint64_t DatasetStats::rejected_total() const {
  std::uint64_t n = 0;
  for (const auto& [r, c] : rejected) n += c;
  return n;
}

StatsReport stats(const std::vector<QAInstance>& instances, const CorpusHandle& corpus) {
  StatsReport report;
  DatasetStats& ds = report.datasets[corpus.kind()];
  ds.images = corpus.images_by_source();
  for (const auto& inst : instances) {
    if (!corpus.find(inst.doc_id)) throw ValidationError("instance '" + inst.instance_id + "' refers to a document outside the corpus");
    switch (inst.provenance) {
      case Provenance::Original: ++ds.original; break;
      case Provenance::Augmented: ++ds.generated_augment; break;
      case Provenance::Extended: ++ds.generated_extend; break;
    }
    switch (inst.status) {
      case Status::Accepted: ++ds.accepted; break;
      case Status::Raw: ++ds.raw; break;
      case Status::Rejected: ++ds.rejected[inst.rejection_reason.value_or("unknown")]; break;
    }
    if (inst.status == Status::Rejected) continue;
    if (inst.question_type) ++ds.per_type[*inst.question_type];
    else ++ds.unclassified;
  }
  return report;
}

std::string StatsReport::render_text() const {
  std::vector<std::vector<std::string>> main{{"Dataset", "Images", "Generated (augment)", "Generated (extend)",
                                              "Filtered", "Rejected"}};
  for (const auto& [kind, ds] : datasets) {
    main.push_back({std::string(to_string(kind)), images_cell(ds.images), std::to_string(ds.generated_augment),
                    std::to_string(ds.generated_extend), std::to_string(ds.accepted),
                    std::to_string(ds.rejected_total())});
  }
  std::string out = table(main);

  for (const auto& [kind, ds] : datasets) {
    if (!ds.rejected.empty()) {
      std::vector<std::vector<std::string>> rows{{"Rejection reason (" + std::string(to_string(kind)) + ")", "Count"}};
      for (const auto& [r, n] : ds.rejected) rows.push_back({r, std::to_string(n)});
      out += "\n" + table(rows);
    }
    std::vector<std::string> header{"Question types (" + std::string(to_string(kind)) + ")"};
    std::vector<std::string> counts{"count"};
    for (QuestionType t : kAllQuestionTypes) {
      header.emplace_back(to_string(t));
      auto it = ds.per_type.find(t);
      counts.push_back(std::to_string(it == ds.per_type.end() ? 0 : it->second));
    }
    header.emplace_back("unclassified");
    counts.push_back(std::to_string(ds.unclassified));
    out += "\n" + table({header, counts});
    if (ds.raw) out += "unchecked (raw): " + std::to_string(ds.raw) + "\n";
  }
  return out;
}

json StatsReport::to_json() const {
  json out = json::object();
  for (const auto& [kind, ds] : datasets) {
    json types = json::object();
    for (const auto& [t, n] : ds.per_type) types[std::string(to_string(t))] = n;
    out[std::string(to_string(kind))] = {{"images", ds.images},
                                         {"original", ds.original},
                                         {"generated_augment", ds.generated_augment},
                                         {"generated_extend", ds.generated_extend},
                                         {"accepted", ds.accepted},
                                         {"raw", ds.raw},
                                         {"rejected", ds.rejected},
                                         {"per_type", types},
                                         {"unclassified", ds.unclassified}};
  }
  return out;
}

}  // namespace docstep
