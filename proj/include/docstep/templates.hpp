#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "docstep/corpus.hpp"

namespace docstep {

enum class TemplateId { RationaleGen, QaGen, ChartFewshot, Checker, Classifier };

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view text);

// Slots are written as [[name]]; single braces such as {evidence} are literal
// model-facing text and pass through rendering untouched.
struct PromptTemplate {
  TemplateId id;
  std::string body;
  std::set<std::string> required_slots;
};

using SlotMap = std::map<std::string, std::string>;

class TemplateRegistry {
 public:
  // Built-in bodies only.
  TemplateRegistry();

  // Built-in bodies, with any <template_id>.txt file in dir replacing its template.
  static TemplateRegistry with_overrides(const std::filesystem::path& dir);

  const PromptTemplate& get(TemplateId id) const;
  std::string render(TemplateId id, const SlotMap& slots) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

// Renders from the built-in registry.
std::string render(TemplateId id, const SlotMap& slots);

// Slot names referenced by a body, in order of first appearance.
std::vector<std::string> slots_in(std::string_view body);

struct ConstraintList {
  DatasetKind dataset_kind;
  std::vector<std::string> constraints;
};

ConstraintList constraint_list(DatasetKind kind);

}  // namespace docstep
