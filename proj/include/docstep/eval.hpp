#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "docstep/corpus.hpp"
#include "docstep/decimal.hpp"

namespace docstep {

// Unit-cost edit distance over Unicode code points (invalid UTF-8 bytes count as one unit each).
std::size_t levenshtein(std::string_view a, std::string_view b);

// levenshtein / max(|a|, |b|); 0 when both are empty.
double normalized_levenshtein(std::string_view a, std::string_view b);

// Case-fold, trim and collapse internal whitespace.
std::string normalize_answer(std::string_view text);

// Max over golds of 1 - NL when NL <= threshold, else 0. Throws on empty golds.
double anls_score(std::string_view prediction, const std::vector<std::string>& golds, double threshold = 0.5);

// Numeric when both sides parse as numbers: |p - g| <= max(rel * |g|, abs).
// Otherwise normalized string equality.
bool relaxed_match(std::string_view prediction, std::string_view gold,
                   const ToleranceRule& tol = ToleranceRule::relaxed_default());

enum class Metric { Anls, Relaxed, Accuracy };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

struct ScoringSettings {
  Metric metric = Metric::Anls;
  double threshold = 0.5;
  ToleranceRule tolerance = ToleranceRule::relaxed_default();  // relaxed only; accuracy is exact
};

struct ScoringItem {
  std::string prediction;
  std::vector<std::string> golds;
};

double score_item(const ScoringItem& item, const ScoringSettings& settings);

// Per-item scoring kernels; identical results, the parallel one split across OpenMP threads.
std::vector<double> score_items_serial(const std::vector<ScoringItem>& items, const ScoringSettings& settings);
std::vector<double> score_items_parallel(const std::vector<ScoringItem>& items, const ScoringSettings& settings,
                                         int threads = 0);

struct TypeScore {
  std::size_t count = 0;
  double score = 0.0;
};

struct EvalReport {
  Metric metric = Metric::Anls;
  double overall = 0.0;
  std::vector<std::pair<std::string, double>> per_item;
  std::map<QuestionType, TypeScore> per_type;
  std::size_t unclassified = 0;

  // Columns Color, Text, Spatial, Count, Reasoning, Overall.
  std::string render_text() const;
  nlohmann::json to_json() const;
};

struct Prediction {
  std::string instance_id;
  std::string text;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Raw prediction text goes through extract_final_answer; text without any answer
// format is scored as-is. Golds are the reference's gold_answers, or its answer.
EvalReport evaluate_run(const std::vector<Prediction>& predictions, const std::vector<QAInstance>& references,
                        const ScoringSettings& settings, int threads = 1);

}  // namespace docstep
