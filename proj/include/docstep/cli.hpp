#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docstep/corpus.hpp"
#include "docstep/modelgw.hpp"
#include "docstep/pipeline.hpp"

namespace docstep::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

// Everything a run depends on, minus secrets. Loaded from --config, then flags on top.
struct RunConfig {
  std::string command;
  std::string endpoint;
  std::optional<DatasetKind> kind;
  std::string mode = "extend";

  std::string corpus;
  std::string gold;
  std::string in;
  std::string out;
  std::string rejected;
  std::string report;
  std::string pred;
  std::string refs;
  std::string replay;
  std::string record;
  std::string checkpoint;
  std::string templates;

  int per_image = 0;  // 0 = dataset default
  std::uint64_t seed = 0;
  int concurrency = 4;
  double requests_per_second = 0;
  ModelSettings models;

  std::vector<std::string> rules{"format_valid", "answer_consistency", "arithmetic"};
  bool judge = true;
  std::string tol_rel = "0.01";
  std::string tol_abs = "0.01";

  std::string metric = "anls";
  double threshold = 0.5;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& record);
  std::string digest() const;  // sha256 of the canonical JSON
};

struct Hooks {
  // Builds the live transport; defaults to HTTP against MODEL_ENDPOINT / MODEL_API_KEY.
  std::function<std::unique_ptr<Transport>(const RunConfig&)> transport;
};

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks = {});
int run(int argc, char** argv);

}  // namespace docstep::cli
