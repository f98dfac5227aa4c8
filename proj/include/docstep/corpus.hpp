#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace docstep {

enum class DatasetKind { DocVQA, InfoVQA, ChartQA };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> parse_dataset_kind(std::string_view text);

struct TableCell {
  std::string row;
  std::string column;
  std::string value;

  bool operator==(const TableCell&) const = default;
};

// Tool-extracted ground truth for one document: OCR lines or a linearized chart table.
// Numbers stay as text here; only mathcheck turns them into decimals.
struct GoldText {
  enum class Kind { OcrLines, ChartTable };

  Kind kind = Kind::OcrLines;
  std::vector<std::string> lines;
  std::vector<TableCell> cells;

  void validate() const;

  // Plain-text rendering for text-only judges: OCR lines joined by newlines,
  // chart cells as "row | column | value" lines.
  std::string render_inline() const;

  bool operator==(const GoldText&) const = default;
};

struct DocumentRecord {
  std::string doc_id;
  std::string image_ref;
  DatasetKind dataset_kind = DatasetKind::DocVQA;
  std::optional<GoldText> gold_text;
  // Optional image source tag (e.g. "chartqa" vs "chart-to-text"); counted separately in manifests.
  std::string source;
};

// Immutable view over a loaded corpus. Copies share the underlying records.
class CorpusHandle {
 public:
  CorpusHandle() = default;
  CorpusHandle(DatasetKind kind, std::vector<DocumentRecord> records);

  DatasetKind kind() const { return kind_; }
  std::size_t size() const { return records_ ? records_->size() : 0; }
  const std::vector<DocumentRecord>& records() const;
  const DocumentRecord* find(std::string_view doc_id) const;
  std::size_t gold_count() const;

  // Image counts keyed by source tag; untagged records count under "".
  std::map<std::string, std::uint64_t> images_by_source() const;

 private:
  DatasetKind kind_ = DatasetKind::DocVQA;
  std::shared_ptr<const std::vector<DocumentRecord>> records_;
  std::shared_ptr<const std::unordered_map<std::string, std::size_t>> index_;
};

// kind may be omitted, in which case the first record's dataset_kind fixes it.
CorpusHandle load_corpus(const std::filesystem::path& path,
                         std::optional<DatasetKind> kind = std::nullopt);

struct AttachResult {
  CorpusHandle corpus;
  std::size_t attached = 0;
  std::size_t without_gold = 0;
  std::vector<std::string> unknown_ids;  // present in the gold file, absent from the corpus
};

AttachResult attach_gold_text(const CorpusHandle& corpus, const std::filesystem::path& path);

enum class QuestionType { Color, Spatial, TextExtractive, Count, Reasoning };
enum class Provenance { Original, Augmented, Extended };
enum class Status { Raw, Accepted, Rejected };

inline constexpr QuestionType kAllQuestionTypes[] = {
    QuestionType::Color, QuestionType::TextExtractive, QuestionType::Spatial,
    QuestionType::Count, QuestionType::Reasoning};

std::string_view to_string(QuestionType type);
std::string_view to_string(Provenance provenance);
std::string_view to_string(Status status);
std::optional<QuestionType> parse_question_type(std::string_view text);
std::optional<Provenance> parse_provenance(std::string_view text);
std::optional<Status> parse_status(std::string_view text);

struct Step {
  int index = 0;
  std::string text;

  bool operator==(const Step&) const = default;
};

struct ReasoningChain {
  std::vector<Step> steps;
  std::string final_answer;

  bool operator==(const ReasoningChain&) const = default;
};

struct QAInstance {
  std::string instance_id;
  std::string doc_id;
  std::string question;
  std::optional<ReasoningChain> chain;
  std::string answer;
  std::vector<std::string> gold_answers;
  std::optional<QuestionType> question_type;
  Provenance provenance = Provenance::Original;
  Status status = Status::Raw;
  std::optional<std::string> rejection_reason;
  // Fields outside the fixed schema (rule_report, judge, ...) kept verbatim.
  nlohmann::json extra = nlohmann::json::object();

  void validate() const;
  void reject(std::string reason);

  bool operator==(const QAInstance&) const = default;
};

nlohmann::json to_json(const QAInstance& instance);
QAInstance instance_from_json(const nlohmann::json& record);

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string started;
  std::string finished;
  std::map<std::string, std::uint64_t> counts;
  std::string config_digest;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& record);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);
};

// ISO-8601 UTC; honours SOURCE_DATE_EPOCH so replayed runs are byte-identical.
std::string timestamp_now();

// Writes one record per line sorted by instance_id. Returns a manifest whose
// counts reflect the written instances (generated_* by provenance, filtered_* by status).
RunManifest write_instances(std::vector<QAInstance> instances, const std::filesystem::path& path);

std::vector<QAInstance> read_instances(const std::filesystem::path& path);

}  // namespace docstep
