#include "docstep/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "docstep/errors.hpp"

namespace docstep {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::pair<Enum, std::string_view> (&table)[N], std::string_view text) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(const std::pair<Enum, std::string_view> (&table)[N], Enum value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::pair<DatasetKind, std::string_view> kKinds[] = {
    {DatasetKind::DocVQA, "docvqa"}, {DatasetKind::InfoVQA, "infovqa"}, {DatasetKind::ChartQA, "chartqa"}};
constexpr std::pair<QuestionType, std::string_view> kTypes[] = {
    {QuestionType::Color, "color"},
    {QuestionType::Spatial, "spatial"},
    {QuestionType::TextExtractive, "text_extractive"},
    {QuestionType::Count, "count"},
    {QuestionType::Reasoning, "reasoning"}};
constexpr std::pair<Provenance, std::string_view> kProvenances[] = {
    {Provenance::Original, "original"}, {Provenance::Augmented, "augmented"}, {Provenance::Extended, "extended"}};
constexpr std::pair<Status, std::string_view> kStatuses[] = {
    {Status::Raw, "raw"}, {Status::Accepted, "accepted"}, {Status::Rejected, "rejected"}};

std::string required_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw ValidationError(std::string("missing or non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Calls fn(line_number, json) for each non-blank line; wraps failures with the line number.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string(), number, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw FormatError(path.string(), number, "record is not an object");
    try {
      fn(number, record);
    } catch (const FormatError&) {
      throw;
    } catch (const ValidationError& e) {
      throw FormatError(path.string(), number, e.what());
    } catch (const json::exception& e) {
      throw FormatError(path.string(), number, e.what());
    }
  }
}

GoldText gold_from_json(const json& record) {
  GoldText gold;
  const std::string kind = required_string(record, "kind");
  if (kind == "ocr_lines") {
    gold.kind = GoldText::Kind::OcrLines;
    auto it = record.find("lines");
    if (it == record.end() || !it->is_array()) throw ValidationError("ocr_lines payload needs a 'lines' array");
    for (const auto& line : *it) gold.lines.push_back(line.get<std::string>());
  } else if (kind == "chart_table") {
    gold.kind = GoldText::Kind::ChartTable;
    auto it = record.find("cells");
    if (it == record.end() || !it->is_array()) throw ValidationError("chart_table payload needs a 'cells' array");
    for (const auto& cell : *it) {
      if (!cell.is_object()) throw ValidationError("malformed table cell: expected {row, column, value}");
      TableCell c;
      c.row = optional_string(cell, "row");
      c.column = optional_string(cell, "column");
      auto v = cell.find("value");
      if (v == cell.end() || !v->is_string()) throw ValidationError("malformed table cell: value must be text");
      c.value = v->get<std::string>();
      gold.cells.push_back(std::move(c));
    }
  } else {
    throw ValidationError("unknown gold text kind '" + kind + "'");
  }
  gold.validate();
  return gold;
}

}  // namespace

std::string_view to_string(DatasetKind kind) { return name_of(kKinds, kind); }
std::optional<DatasetKind> parse_dataset_kind(std::string_view text) { return lookup(kKinds, text); }
std::string_view to_string(QuestionType type) { return name_of(kTypes, type); }
std::string_view to_string(Provenance provenance) { return name_of(kProvenances, provenance); }
std::string_view to_string(Status status) { return name_of(kStatuses, status); }
std::optional<QuestionType> parse_question_type(std::string_view text) { return lookup(kTypes, text); }
std::optional<Provenance> parse_provenance(std::string_view text) { return lookup(kProvenances, text); }
std::optional<Status> parse_status(std::string_view text) { return lookup(kStatuses, text); }

void GoldText::validate() const {
  if (kind == Kind::OcrLines && lines.empty()) throw ValidationError("ocr_lines gold text has no lines");
  if (kind == Kind::ChartTable) {
    if (cells.empty()) throw ValidationError("chart_table gold text has no cells");
    for (const auto& cell : cells) {
      if (blank(cell.value)) throw ValidationError("malformed table cell: empty value for row '" + cell.row + "'");
    }
  }
}

std::string GoldText::render_inline() const {
  std::string out;
  if (kind == Kind::OcrLines) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i) out += '\n';
      out += lines[i];
    }
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += '\n';
      out += cells[i].row + " | " + cells[i].column + " | " + cells[i].value;
    }
  }
  return out;
}

CorpusHandle::CorpusHandle(DatasetKind kind, std::vector<DocumentRecord> records) : kind_(kind) {
  auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.doc_id.empty()) throw ValidationError("document with empty doc_id");
    if (r.image_ref.empty()) throw ValidationError("document '" + r.doc_id + "' has empty image_ref");
    if (r.dataset_kind != kind) {
      throw ValidationError("document '" + r.doc_id + "' has dataset_kind " + std::string(to_string(r.dataset_kind)) +
                            ", corpus is " + std::string(to_string(kind)));
    }
    if (!index->emplace(r.doc_id, i).second) throw ValidationError("duplicate doc_id '" + r.doc_id + "'");
  }
  records_ = std::make_shared<const std::vector<DocumentRecord>>(std::move(records));
  index_ = std::move(index);
}

const std::vector<DocumentRecord>& CorpusHandle::records() const {
  static const std::vector<DocumentRecord> kEmpty;
  return records_ ? *records_ : kEmpty;
}

const DocumentRecord* CorpusHandle::find(std::string_view doc_id) const {
  if (!index_) return nullptr;
  auto it = index_->find(std::string(doc_id));
  return it == index_->end() ? nullptr : &(*records_)[it->second];
}

std::size_t CorpusHandle::gold_count() const {
  const auto& rs = records();
  return static_cast<std::size_t>(
      std::count_if(rs.begin(), rs.end(), [](const DocumentRecord& r) { return r.gold_text.has_value(); }));
}

std::map<std::string, std::uint64_t> CorpusHandle::images_by_source() const {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& r : records()) ++counts[r.source];
  return counts;
}

CorpusHandle load_corpus(const std::filesystem::path& path, std::optional<DatasetKind> kind) {
  std::vector<DocumentRecord> records;
  std::set<std::string> seen;
  for_each_record(path, [&](std::size_t line, const json& record) {
    DocumentRecord doc;
    doc.doc_id = required_string(record, "doc_id");
    doc.image_ref = required_string(record, "image_ref");
    if (doc.doc_id.empty()) throw ValidationError("empty doc_id");
    if (doc.image_ref.empty()) throw ValidationError("empty image_ref");
    const std::string kind_text = optional_string(record, "dataset_kind");
    if (!kind_text.empty()) {
      auto parsed = parse_dataset_kind(kind_text);
      if (!parsed) throw ValidationError("unknown dataset_kind '" + kind_text + "'");
      if (!kind) kind = *parsed;
      if (*parsed != *kind) {
        throw ValidationError("dataset_kind '" + kind_text + "' differs from corpus kind " +
                              std::string(to_string(*kind)));
      }
    }
    if (!kind) throw ValidationError("dataset_kind missing and not given by the caller");
    doc.dataset_kind = *kind;
    doc.source = optional_string(record, "source");
    if (!seen.insert(doc.doc_id).second) {
      throw FormatError(path.string(), line, "duplicate doc_id '" + doc.doc_id + "'");
    }
    records.push_back(std::move(doc));
  });
  return CorpusHandle(kind.value_or(DatasetKind::DocVQA), std::move(records));
}

AttachResult attach_gold_text(const CorpusHandle& corpus, const std::filesystem::path& path) {
  std::unordered_map<std::string, GoldText> payloads;
  AttachResult result;
  for_each_record(path, [&](std::size_t, const json& record) {
    std::string doc_id = required_string(record, "doc_id");
    GoldText gold = gold_from_json(record);
    if (!corpus.find(doc_id)) {
      result.unknown_ids.push_back(std::move(doc_id));
      return;
    }
    payloads.insert_or_assign(std::move(doc_id), std::move(gold));
  });

  std::vector<DocumentRecord> records = corpus.records();
  for (auto& r : records) {
    auto it = payloads.find(r.doc_id);
    if (it == payloads.end()) {
      if (!r.gold_text) ++result.without_gold;
      continue;
    }
    r.gold_text = std::move(it->second);
    ++result.attached;
  }
  result.corpus = CorpusHandle(corpus.kind(), std::move(records));
  return result;
}

void QAInstance::validate() const {
  if (instance_id.empty()) throw ValidationError("instance with empty instance_id");
  const std::string who = "instance '" + instance_id + "': ";
  if ((status == Status::Rejected) != rejection_reason.has_value()) {
    throw ValidationError(who + "status=rejected requires a rejection_reason and vice versa");
  }
  if (provenance == Provenance::Augmented && gold_answers.empty()) {
    throw ValidationError(who + "augmented instance without gold answers");
  }
  if (chain) {
    if (chain->steps.empty()) throw ValidationError(who + "reasoning chain has no steps");
    if (chain->final_answer != answer) throw ValidationError(who + "chain final answer differs from answer");
  }
  if (!extra.is_object()) throw ValidationError(who + "extra fields must form an object");
}

void QAInstance::reject(std::string reason) {
  status = Status::Rejected;
  rejection_reason = std::move(reason);
}

namespace {
const std::set<std::string>& known_fields() {
  static const std::set<std::string> kFields = {
      "instance_id", "doc_id", "question", "answer", "gold_answers", "steps",
      "question_type", "provenance", "status", "rejection_reason"};
  return kFields;
}
}  // namespace

json to_json(const QAInstance& inst) {
  json record = inst.extra;
  record["instance_id"] = inst.instance_id;
  record["doc_id"] = inst.doc_id;
  record["question"] = inst.question;
  record["answer"] = inst.answer;
  record["gold_answers"] = inst.gold_answers;
  json steps = json::array();
  if (inst.chain) {
    for (const auto& s : inst.chain->steps) steps.push_back({{"index", s.index}, {"text", s.text}});
  }
  record["steps"] = std::move(steps);
  record["question_type"] = inst.question_type ? json(std::string(to_string(*inst.question_type))) : json(nullptr);
  record["provenance"] = std::string(to_string(inst.provenance));
  record["status"] = std::string(to_string(inst.status));
  record["rejection_reason"] = inst.rejection_reason ? json(*inst.rejection_reason) : json(nullptr);
  return record;
}

QAInstance instance_from_json(const json& record) {
  QAInstance inst;
  inst.instance_id = required_string(record, "instance_id");
  inst.doc_id = required_string(record, "doc_id");
  inst.question = optional_string(record, "question");
  inst.answer = optional_string(record, "answer");
  if (auto it = record.find("gold_answers"); it != record.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("gold_answers must be a list");
    for (const auto& g : *it) inst.gold_answers.push_back(g.get<std::string>());
  }
  if (auto it = record.find("steps"); it != record.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("steps must be a list");
    if (!it->empty()) {
      ReasoningChain chain;
      for (const auto& s : *it) chain.steps.push_back({s.at("index").get<int>(), s.at("text").get<std::string>()});
      chain.final_answer = inst.answer;
      inst.chain = std::move(chain);
    }
  }
  if (auto t = optional_string(record, "question_type"); !t.empty()) {
    inst.question_type = parse_question_type(t);
    if (!inst.question_type) throw ValidationError("unknown question_type '" + t + "'");
  }
  const std::string provenance = optional_string(record, "provenance");
  if (!provenance.empty()) {
    auto p = parse_provenance(provenance);
    if (!p) throw ValidationError("unknown provenance '" + provenance + "'");
    inst.provenance = *p;
  }
  const std::string status = optional_string(record, "status");
  if (!status.empty()) {
    auto s = parse_status(status);
    if (!s) throw ValidationError("unknown status '" + status + "'");
    inst.status = *s;
  }
  if (auto it = record.find("rejection_reason"); it != record.end() && !it->is_null()) {
    inst.rejection_reason = it->get<std::string>();
  }
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (!known_fields().count(it.key())) inst.extra[it.key()] = it.value();
  }
  inst.validate();
  return inst;
}

json RunManifest::to_json() const {
  return json{{"run_id", run_id},     {"command", command},           {"started", started},
              {"finished", finished}, {"counts", counts},             {"config_digest", config_digest},
              {"config", config}};
}

RunManifest RunManifest::from_json(const json& record) {
  RunManifest m;
  m.run_id = record.value("run_id", "");
  m.command = record.value("command", "");
  m.started = record.value("started", "");
  m.finished = record.value("finished", "");
  m.config_digest = record.value("config_digest", "");
  if (auto it = record.find("counts"); it != record.end()) {
    for (auto c = it->begin(); c != it->end(); ++c) {
      if (!c->is_number_unsigned()) throw ValidationError("manifest count '" + c.key() + "' must be non-negative");
      m.counts[c.key()] = c->get<std::uint64_t>();
    }
  }
  m.config = record.value("config", json::object());
  return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  return from_json(json::parse(in));
}

std::string timestamp_now() {
  std::time_t t;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest write_instances(std::vector<QAInstance> instances, const std::filesystem::path& path) {
  std::set<std::string> ids;
  for (const auto& inst : instances) {
    inst.validate();
    if (!ids.insert(inst.instance_id).second) {
      throw ValidationError("duplicate instance_id '" + inst.instance_id + "'");
    }
  }
  std::sort(instances.begin(), instances.end(),
            [](const QAInstance& a, const QAInstance& b) { return a.instance_id < b.instance_id; });

  RunManifest manifest;
  manifest.started = timestamp_now();
  for (const char* key : {"generated_augment", "generated_extend", "filtered_accepted", "filtered_rejected"}) {
    manifest.counts[key] = 0;
  }

  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& inst : instances) {
    out << to_json(inst).dump() << '\n';
    if (inst.provenance == Provenance::Augmented) ++manifest.counts["generated_augment"];
    if (inst.provenance == Provenance::Extended) ++manifest.counts["generated_extend"];
    if (inst.status == Status::Accepted) ++manifest.counts["filtered_accepted"];
    if (inst.status == Status::Rejected) ++manifest.counts["filtered_rejected"];
  }
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
  manifest.finished = timestamp_now();
  return manifest;
}

std::vector<QAInstance> read_instances(const std::filesystem::path& path) {
  std::vector<QAInstance> instances;
  std::set<std::string> ids;
  for_each_record(path, [&](std::size_t line, const json& record) {
    QAInstance inst = instance_from_json(record);
    if (!ids.insert(inst.instance_id).second) {
      throw FormatError(path.string(), line, "duplicate instance_id '" + inst.instance_id + "'");
    }
    instances.push_back(std::move(inst));
  });
  return instances;
}

}  // namespace docstep
