#include "docstep/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include <omp.h>

#include "docstep/errors.hpp"
#include "docstep/stepparse.hpp"

namespace docstep {

namespace {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(c);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
  if (a.size() < b.size()) return edit_distance(b, a);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diagonal = up;
    }
  }
  return row[b.size()];
}

std::string column_label(QuestionType type) {
  switch (type) {
    case QuestionType::Color: return "Color";
    case QuestionType::TextExtractive: return "Text";
    case QuestionType::Spatial: return "Spatial";
    case QuestionType::Count: return "Count";
    case QuestionType::Reasoning: return "Reasoning";
  }
  return "?";
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return edit_distance(decode_utf8(a), decode_utf8(b));
}

double normalized_levenshtein(std::string_view a, std::string_view b) {
  const auto ua = decode_utf8(a);
  const auto ub = decode_utf8(b);
  const std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(ua, ub)) / static_cast<double>(longest);
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

double anls_score(std::string_view prediction, const std::vector<std::string>& golds, double threshold) {
  if (golds.empty()) throw ValidationError("anls_score needs at least one gold answer");
  const std::string pred = normalize_answer(prediction);
  double best = 0.0;
  for (const auto& gold : golds) {
    const double nl = normalized_levenshtein(pred, normalize_answer(gold));
    if (nl <= threshold) best = std::max(best, 1.0 - nl);
  }
  return best;
}

bool relaxed_match(std::string_view prediction, std::string_view gold, const ToleranceRule& tol) {
  const auto p = parse_number(prediction);
  const auto g = parse_number(gold);
  if (p && g) return tol.within(*p, *g);
  return normalize_answer(prediction) == normalize_answer(gold);
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Anls: return "anls";
    case Metric::Relaxed: return "relaxed";
    case Metric::Accuracy: return "accuracy";
  }
  return "anls";
}

std::optional<Metric> parse_metric(std::string_view text) {
  if (text == "anls") return Metric::Anls;
  if (text == "relaxed") return Metric::Relaxed;
  if (text == "accuracy") return Metric::Accuracy;
  return std::nullopt;
}

double score_item(const ScoringItem& item, const ScoringSettings& settings) {
  if (settings.metric == Metric::Anls) return anls_score(item.prediction, item.golds, settings.threshold);
  const ToleranceRule tol = settings.metric == Metric::Accuracy ? ToleranceRule::exact() : settings.tolerance;
  for (const auto& gold : item.golds) {
    if (relaxed_match(item.prediction, gold, tol)) return 1.0;
  }
  return 0.0;
}

std::vector<double> score_items_serial(const std::vector<ScoringItem>& items, const ScoringSettings& settings) {
  std::vector<double> scores;
  scores.reserve(items.size());
  for (const auto& item : items) scores.push_back(score_item(item, settings));
  return scores;
}

std::vector<double> score_items_parallel(const std::vector<ScoringItem>& items, const ScoringSettings& settings,
                                         int threads) {
  std::vector<double> scores(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  if (threads <= 0) threads = omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = score_item(items[static_cast<std::size_t>(i)], settings);
  }
  return scores;
}

std::string EvalReport::render_text() const {
  std::vector<std::string> header{"Metric"};
  std::vector<std::string> counts{"n"};
  std::vector<std::string> scores{std::string(to_string(metric))};
  for (QuestionType type : kAllQuestionTypes) {
    header.push_back(column_label(type));
    auto it = per_type.find(type);
    counts.push_back(it == per_type.end() ? "0" : std::to_string(it->second.count));
    scores.push_back(it == per_type.end() ? "-" : fixed4(it->second.score));
  }
  header.push_back("Overall");
  counts.push_back(std::to_string(per_item.size()));
  scores.push_back(fixed4(overall));

  std::vector<std::size_t> width(header.size());
  for (const auto* row : {&header, &counts, &scores}) {
    for (std::size_t i = 0; i < row->size(); ++i) width[i] = std::max(width[i], (*row)[i].size());
  }
  std::ostringstream os;
  for (const auto* row : {&header, &scores, &counts}) {
    for (std::size_t i = 0; i < row->size(); ++i) {
      if (i) os << "  ";
      os << std::left << std::setw(static_cast<int>(width[i])) << (*row)[i];
    }
    os << '\n';
  }
  os << "unclassified: " << unclassified << '\n';
  return os.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, ts] : per_type) types[std::string(to_string(type))] = {{"count", ts.count}, {"score", ts.score}};
  nlohmann::json items = nlohmann::json::array();
  for (const auto& [id, score] : per_item) items.push_back({{"instance_id", id}, {"score", score}});
  return {{"metric", std::string(to_string(metric))}, {"overall", overall},      {"per_type", types},
          {"unclassified", unclassified},              {"per_item", items}};
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      out.push_back({record.at("instance_id").get<std::string>(), record.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string(), number, e.what());
    }
  }
  return out;
}

EvalReport evaluate_run(const std::vector<Prediction>& predictions, const std::vector<QAInstance>& references,
                        const ScoringSettings& settings, int threads) {
  std::unordered_map<std::string, const QAInstance*> by_id;
  for (const auto& ref : references) by_id.emplace(ref.instance_id, &ref);

  std::set<std::string> seen;
  std::vector<ScoringItem> items;
  std::vector<const QAInstance*> refs;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.instance_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown instance_id '" + p.instance_id + "'");
    if (!seen.insert(p.instance_id).second) throw ValidationError("duplicate prediction for '" + p.instance_id + "'");
    ScoringItem item;
    try {
      item.prediction = extract_final_answer(p.text);
    } catch (const ParseError&) {
      item.prediction = trim(p.text);
    }
    item.golds = it->second->gold_answers.empty() ? std::vector<std::string>{it->second->answer} : it->second->gold_answers;
    items.push_back(std::move(item));
    refs.push_back(it->second);
  }

  const auto scores = threads == 1 ? score_items_serial(items, settings) : score_items_parallel(items, settings, threads);

  EvalReport report;
  report.metric = settings.metric;
  double total = 0.0;
  std::map<QuestionType, double> sums;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    report.per_item.emplace_back(refs[i]->instance_id, scores[i]);
    total += scores[i];
    if (refs[i]->question_type) {
      ++report.per_type[*refs[i]->question_type].count;
      sums[*refs[i]->question_type] += scores[i];
    } else {
      ++report.unclassified;
    }
  }
  report.overall = scores.empty() ? 0.0 : total / static_cast<double>(scores.size());
  for (auto& [type, ts] : report.per_type) ts.score = sums[type] / static_cast<double>(ts.count);
  return report;
}

}  // namespace docstep
