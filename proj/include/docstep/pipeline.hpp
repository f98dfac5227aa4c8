#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "docstep/corpus.hpp"
#include "docstep/decimal.hpp"
#include "docstep/errors.hpp"
#include "docstep/modelgw.hpp"
#include "docstep/stepparse.hpp"
#include "docstep/templates.hpp"

namespace docstep {

enum class RejectionReason {
  ModelError,
  ParseError,
  Duplicate,
  AnswerMismatch,
  RuleArithmetic,
  JudgeFalse,
  JudgeParseError,
};

std::string_view to_string(RejectionReason reason);
std::optional<RejectionReason> parse_rejection_reason(std::string_view text);

struct GenerationPlan {
  DatasetKind dataset_kind = DatasetKind::DocVQA;
  int per_image_count = 3;
  std::vector<std::size_t> constraint_rotation;  // indices into constraint_list(dataset_kind)
  std::size_t rotation_offset = 0;
  TemplateId template_id = TemplateId::QaGen;

  // docvqa 3 per image, infovqa 4, chartqa 2; rotation over the whole constraint list.
  // A non-zero seed picks the rotation offset.
  static GenerationPlan defaults(DatasetKind kind, std::uint64_t seed = 0);
  void validate() const;
};

struct PlannedRequest {
  std::string doc_id;
  int slot = 0;  // 0-based position within the image
  std::size_t constraint_index = 0;
  std::string constraint;
};

// The k-th request overall (image-major) takes rotation[(offset + k) % rotation.size()].
std::vector<PlannedRequest> plan_requests(const CorpusHandle& corpus, const GenerationPlan& plan);

struct ModelSettings {
  std::string generator_model = "generator";
  std::string judge_model = "judge";
  std::string classifier_model = "classifier";
  double generation_temperature = 0.7;
  double judge_temperature = 0.0;
  double classifier_temperature = 0.0;
  int max_tokens = 1024;

  nlohmann::json to_json() const;
};

// Line-delimited (digest, stage, outcome) records; lets an interrupted run resume
// without repeating model calls. Appends are serialized.
class Checkpoint {
 public:
  Checkpoint() = default;  // disabled: never hits, never writes
  static std::unique_ptr<Checkpoint> open(const std::filesystem::path& path);

  std::optional<nlohmann::json> find(std::string_view stage, std::string_view digest) const;
  void record(std::string_view stage, std::string_view digest, const nlohmann::json& outcome);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> entries_;  // "stage/digest" -> outcome
  std::ofstream out_;
  bool enabled_ = false;
};

class Interrupted : public Error {
 public:
  using Error::Error;
};

// Stops a stage after a number of completed work items (0 = never); the stage
// then throws Interrupted. Used for resume testing and --stop-after.
struct RunControl {
  std::size_t stop_after = 0;
  std::atomic<std::size_t> completed{0};
  std::atomic<bool> stopped{false};

  bool begin_item() const { return !stopped.load(); }
  void finish_item();
};

struct StageContext {
  ModelClient& client;
  const TemplateRegistry& templates;
  ModelSettings models;
  int concurrency = 1;
  Checkpoint* checkpoint = nullptr;
  RunControl* control = nullptr;
};

// Request builders; stages call these, and they are exposed for dry runs and fixtures.
ModelRequest augment_request(const DocumentRecord& doc, const QAInstance& original, const TemplateRegistry& templates,
                             const ModelSettings& models);
ModelRequest extend_request(const DocumentRecord& doc, const PlannedRequest& planned,
                            const TemplateRegistry& templates, const ModelSettings& models);
ModelRequest judge_request(const QAInstance& instance, const DocumentRecord* doc, const TemplateRegistry& templates,
                           const ModelSettings& models);
ModelRequest classify_request(const QAInstance& instance, const TemplateRegistry& templates,
                              const ModelSettings& models);

// Rationale for an existing gold QA pair. Output keeps the input instance_id.
std::vector<QAInstance> augment(const CorpusHandle& corpus, const std::vector<QAInstance>& originals,
                                StageContext& ctx);

// New (question, chain, answer) triplets per image under the plan's constraints.
// Output ids are <doc_id>-ext<NN>.
std::vector<QAInstance> extend(const CorpusHandle& corpus, const GenerationPlan& plan, StageContext& ctx);

enum class Rule { FormatValid, AnswerConsistency, Arithmetic };

struct FilterPolicy {
  std::set<Rule> rules_enabled{Rule::FormatValid, Rule::AnswerConsistency, Rule::Arithmetic};
  bool judge_enabled = true;
  ToleranceRule tolerance = ToleranceRule::claim_default();
  ToleranceRule answer_tolerance = ToleranceRule::relaxed_default();

  void validate() const;
  nlohmann::json to_json() const;
};

struct FilterResult {
  std::vector<QAInstance> accepted;
  std::vector<QAInstance> rejected;
};

// Checks in order format_valid, answer_consistency (augmented only), arithmetic, judge;
// the first failure rejects. Instances already rejected upstream pass straight through.
FilterResult filter(const std::vector<QAInstance>& instances, const CorpusHandle& corpus, const FilterPolicy& policy,
                    StageContext& ctx);

// Augmented answers match a gold answer relaxed-numerically, by normalized equality,
// or by containing the normalized gold as a whole-word phrase.
bool answer_consistent(std::string_view answer, const std::vector<std::string>& golds, const ToleranceRule& tol);

// Maps a classifier reply onto the five question types.
std::optional<QuestionType> map_type_label(std::string_view label);

std::vector<QAInstance> classify(const std::vector<QAInstance>& instances, StageContext& ctx);

struct DatasetStats {
  std::map<std::string, std::uint64_t> images;  // by source tag
  std::uint64_t original = 0;
  std::uint64_t generated_augment = 0;
  std::uint64_t generated_extend = 0;
  std::uint64_t accepted = 0;
  std::uint64_t raw = 0;
  std::map<std::string, std::uint64_t> rejected;  // by reason
  std::map<QuestionType, std::uint64_t> per_type;  // over non-rejected instances
  std::uint64_t unclassified = 0;

  std::uint64_t generated_total() const { return generated_augment + generated_extend; }
  std::uint64_t rejected_total() const;

  bool operator==(const DatasetStats&) const = default;
};

struct StatsReport {
  std::map<DatasetKind, DatasetStats> datasets;

  std::string render_text() const;
  nlohmann::json to_json() const;

  bool operator==(const StatsReport&) const = default;
};

StatsReport stats(const std::vector<QAInstance>& instances, const CorpusHandle& corpus);

}  // namespace docstep
