#include "docstep/stepparse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "docstep/errors.hpp"

namespace docstep {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return lower(x) == lower(y);
         });
}

// Case-insensitive search for an ASCII needle.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::size_t irfind(std::string_view haystack, std::string_view needle) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = haystack.size() - needle.size() + 1; i-- > 0;) {
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

struct Line {
  std::string_view text;
  std::size_t offset;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({line, start});
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

// Cells between pipes of a table line, trimmed; leading/trailing empty edges dropped.
std::vector<std::string> table_cells(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    std::size_t bar = line.find('|', pos);
    cells.push_back(trim(line.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos)));
    if (bar == std::string_view::npos) break;
    pos = bar + 1;
  }
  if (!cells.empty() && cells.front().empty()) cells.erase(cells.begin());
  if (!cells.empty() && cells.back().empty()) cells.pop_back();
  return cells;
}

bool is_header(std::string_view line) {
  std::string t = trim(line);
  if (t.empty() || t.front() != '|') return false;
  auto cells = table_cells(t);
  return cells.size() == 2 && iequals(cells[0], "step") && iequals(cells[1], "output");
}

bool is_separator_row(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == '|' || c == '-' || c == ':' || is_space(c); });
}

StepTable parse_block(const std::vector<Line>& lines, std::size_t header) {
  StepTable table;
  for (std::size_t i = header + 1; i < lines.size(); ++i) {
    std::string_view raw = lines[i].text;
    std::string t = trim(raw);
    if (t.empty() || t.front() != '|') break;
    if (is_separator_row(t)) continue;
    const std::size_t first = raw.find('|');
    const std::size_t second = raw.find('|', first + 1);
    if (second == std::string_view::npos) throw ParseError("table row without output cell", lines[i].offset);
    const std::size_t third = raw.find('|', second + 1);
    const std::string index_text = trim(raw.substr(first + 1, second - first - 1));
    std::string payload =
        trim(raw.substr(second + 1, third == std::string_view::npos ? std::string_view::npos : third - second - 1));
    int index = 0;
    auto [ptr, ec] = std::from_chars(index_text.data(), index_text.data() + index_text.size(), index);
    if (ec != std::errc() || ptr != index_text.data() + index_text.size() || index <= 0) {
      throw ParseError("non-numeric step index '" + index_text + "'", lines[i].offset + first + 1);
    }
    if (table.rows.empty() && index != 1) throw ParseError("step table does not start at 1", lines[i].offset);
    if (!table.rows.empty()) {
      if (index == table.rows.back().index) {
        throw ParseError("duplicate step index " + index_text, lines[i].offset + first + 1);
      }
      if (index < table.rows.back().index) throw ParseError("step indices not increasing", lines[i].offset);
    }
    if (payload.empty()) throw ParseError("empty output cell for step " + index_text, lines[i].offset + second + 1);
    table.rows.push_back({index, std::move(payload)});
  }
  if (table.rows.empty()) throw ParseError("step table has no rows", lines[header].offset);
  return table;
}

// Every well-formed step table, in text order. Throws the first block's error when none parse.
std::vector<StepTable> parse_all_tables(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<StepTable> tables;
  std::optional<ParseError> first_error;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_header(lines[i].text)) continue;
    try {
      tables.push_back(parse_block(lines, i));
    } catch (const ParseError& e) {
      if (!first_error) first_error = e;
    }
  }
  if (tables.empty()) {
    if (first_error) throw *first_error;
    throw ParseError("no '| step | output |' table found", 0);
  }
  return tables;
}

struct StepMarker {
  std::size_t begin;  // start of "Step"
  std::size_t end;    // first byte after the '.' or ':'
  int number;
};

std::vector<StepMarker> find_step_markers(std::string_view text) {
  std::vector<StepMarker> markers;
  std::size_t pos = 0;
  while ((pos = ifind(text, "step", pos)) != std::string_view::npos) {
    const std::size_t begin = pos;
    pos += 4;
    if (begin > 0 && std::isalnum(static_cast<unsigned char>(text[begin - 1]))) continue;
    std::size_t p = pos;
    if (p < text.size() && text[p] == ' ') ++p;
    const std::size_t digits = p;
    while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
    if (p == digits || p - digits > 4) continue;
    int number = 0;
    std::from_chars(text.data() + digits, text.data() + p, number);
    while (p < text.size() && text[p] == ' ') ++p;
    if (p >= text.size() || (text[p] != '.' && text[p] != ':')) continue;
    // "Step1.5" is a number, not a marker.
    if (text[p] == '.' && p + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[p + 1]))) continue;
    markers.push_back({begin, p + 1, number});
    pos = p + 1;
  }
  return markers;
}

std::string unquote(std::string_view s) {
  std::string t = trim(s);
  if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
    return t.substr(1, t.size() - 2);
  }
  return t;
}

bool boolean_cell(const std::string& cell, bool& out) {
  std::string t = trim(cell);
  if (iequals(t, "true")) {
    out = true;
    return true;
  }
  if (iequals(t, "false")) {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::string strip_trailing_punctuation(std::string_view text) {
  std::string t = trim(text);
  while (!t.empty()) {
    const char c = t.back();
    if (c == '.' || c == ',' || c == '"' || c == '\'' || c == '`' || is_space(c)) {
      t.pop_back();
      continue;
    }
    // U+201D and U+2019 closing quotes
    if (t.size() >= 3 && static_cast<unsigned char>(t[t.size() - 3]) == 0xE2 &&
        static_cast<unsigned char>(t[t.size() - 2]) == 0x80 &&
        (static_cast<unsigned char>(c) == 0x9D || static_cast<unsigned char>(c) == 0x99)) {
      t.resize(t.size() - 3);
      continue;
    }
    break;
  }
  return t;
}

const std::string* EvidenceMap::find(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

StepTable parse_step_table(std::string_view text) { return parse_all_tables(text).front(); }

EvidenceMap parse_evidence_map(std::string_view payload) {
  EvidenceMap map;
  const std::size_t open = payload.find('{');
  if (open == std::string_view::npos) {
    if (const auto close = payload.find('}'); close != std::string_view::npos) {
      throw ParseError("unbalanced '}'", close);
    }
    int n = 0;
    std::size_t pos = 0;
    while (pos <= payload.size()) {
      std::size_t hash = payload.find('#', pos);
      std::string fragment = trim(payload.substr(pos, hash == std::string_view::npos ? std::string_view::npos : hash - pos));
      if (!fragment.empty()) map.entries.emplace_back("frag" + std::to_string(++n), std::move(fragment));
      if (hash == std::string_view::npos) break;
      pos = hash + 1;
    }
    if (map.entries.empty()) throw ParseError("empty evidence", 0);
    return map;
  }

  // Locate the matching close brace, honouring quoted strings.
  int depth = 0;
  bool quoted = false;
  std::size_t close = std::string_view::npos;
  for (std::size_t i = open; i < payload.size(); ++i) {
    const char c = payload[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
      continue;
    }
    if (c == '"') quoted = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) {
      close = i;
      break;
    }
  }
  if (close == std::string_view::npos) throw ParseError("unbalanced '{'", open);

  const std::string_view body = payload.substr(open + 1, close - open - 1);
  std::vector<std::pair<std::string_view, std::size_t>> items;
  std::size_t start = 0;
  quoted = false;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i < body.size()) {
      const char c = body[i];
      if (quoted) {
        if (c == '\\') ++i;
        else if (c == '"') quoted = false;
        continue;
      }
      if (c == '"') {
        quoted = true;
        continue;
      }
      if (c != ',') continue;
      // 15,587.77: a comma between digit groups belongs to the number
      const bool grouped = i > 0 && i + 3 < body.size() && std::isdigit(static_cast<unsigned char>(body[i - 1])) &&
                           std::isdigit(static_cast<unsigned char>(body[i + 1])) &&
                           std::isdigit(static_cast<unsigned char>(body[i + 2])) &&
                           std::isdigit(static_cast<unsigned char>(body[i + 3])) &&
                           (i + 4 >= body.size() || !std::isdigit(static_cast<unsigned char>(body[i + 4])));
      if (grouped) continue;
    }
    items.emplace_back(body.substr(start, i - start), open + 1 + start);
    start = i + 1;
  }

  for (const auto& [item, offset] : items) {
    if (trim(item).empty()) continue;
    std::size_t colon = std::string_view::npos;
    bool in_quotes = false;
    for (std::size_t i = 0; i < item.size(); ++i) {
      if (item[i] == '\\' && in_quotes) {
        ++i;
        continue;
      }
      if (item[i] == '"') in_quotes = !in_quotes;
      else if (item[i] == ':' && !in_quotes) {
        colon = i;
        break;
      }
    }
    if (colon == std::string_view::npos) throw ParseError("evidence entry without ':'", offset);
    std::string key = unquote(item.substr(0, colon));
    std::string value = unquote(item.substr(colon + 1));
    if (map.find(key)) throw ParseError("duplicate evidence key '" + key + "'", offset);
    map.entries.emplace_back(std::move(key), std::move(value));
  }
  if (map.entries.empty()) throw ParseError("empty evidence map", open);
  return map;
}

ReasoningChain parse_chart_chain(std::string_view text) {
  std::size_t body_start = 0;
  if (auto answer = ifind(text, "answer:"); answer != std::string_view::npos) body_start = answer + 7;
  const std::string_view body = text.substr(body_start);
  const auto markers = find_step_markers(body);
  if (markers.empty()) throw ParseError("no Step markers found", body_start);

  ReasoningChain chain;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const auto& m = markers[i];
    if (m.number != static_cast<int>(i) + 1) {
      throw ParseError("non-contiguous step number " + std::to_string(m.number), body_start + m.begin);
    }
    std::size_t end = i + 1 < markers.size() ? markers[i + 1].begin : body.size();
    // A blank line ends the step, so trailing prose is not absorbed.
    if (auto blank = body.substr(m.end, end - m.end).find("\n\n"); blank != std::string_view::npos) {
      end = m.end + blank;
    }
    if (auto blank = body.substr(m.end, end - m.end).find("\n\r\n"); blank != std::string_view::npos) {
      end = m.end + blank;
    }
    std::string step_text = collapse_whitespace(body.substr(m.end, end - m.end));
    if (!step_text.empty() && step_text.back() == ',') step_text.pop_back();
    step_text = trim(step_text);
    if (step_text.empty()) throw ParseError("empty step " + std::to_string(m.number), body_start + m.begin);
    chain.steps.push_back({m.number, std::move(step_text)});
  }

  const std::string& last = chain.steps.back().text;
  if (auto pos = irfind(last, "obtained:"); pos != std::string::npos) {
    chain.final_answer = strip_trailing_punctuation(std::string_view(last).substr(pos + 9));
  } else {
    chain.final_answer = strip_trailing_punctuation(last);
  }
  if (chain.final_answer.empty()) throw ParseError("empty final answer", body_start + markers.back().begin);
  return chain;
}

std::optional<std::string> parse_chart_question(std::string_view text) {
  const auto q = ifind(text, "question:");
  if (q == std::string_view::npos) return std::nullopt;
  auto end = ifind(text, "answer:", q);
  if (end == std::string_view::npos) end = text.find('\n', q);
  std::string question = collapse_whitespace(text.substr(q + 9, end == std::string_view::npos ? end : end - q - 9));
  if (question.empty()) return std::nullopt;
  return question;
}

std::string extract_final_answer(std::string_view text) {
  if (auto pos = irfind(text, "the answer is:"); pos != std::string_view::npos) {
    std::string_view rest = text.substr(pos + 14);
    rest = rest.substr(0, rest.find('\n'));
    std::string answer = strip_trailing_punctuation(rest);
    if (!answer.empty()) return answer;
  }
  try {
    return parse_chart_chain(text).final_answer;
  } catch (const ParseError&) {
  }
  try {
    return parse_step_table(text).rows.back().payload;
  } catch (const ParseError&) {
  }
  throw ParseError("no answer marker, step chain, or step table found", 0);
}

Verdict parse_verdict(std::string_view text) {
  const auto tables = parse_all_tables(text);
  const StepTable& table = tables.back();
  const StepRow* faithful = nullptr;
  const StepRow* include = nullptr;
  for (const auto& row : table.rows) {
    if (row.index == 1) faithful = &row;
    if (row.index == 2) include = &row;
  }
  if (!faithful || !include) throw ParseError("verdict table lacks rows 1 and 2", 0);

  Verdict v;
  if (!boolean_cell(faithful->payload, v.is_faithful)) {
    throw ParseError("non-boolean is_faithful cell '" + faithful->payload + "'", 0);
  }
  if (!boolean_cell(include->payload, v.is_include)) {
    throw ParseError("non-boolean is_include cell '" + include->payload + "'", 0);
  }
  v.result = v.is_faithful && v.is_include;
  if (auto pos = irfind(text, "the answer is:"); pos != std::string_view::npos) {
    std::string_view rest = text.substr(pos + 14);
    bool stated = false;
    if (boolean_cell(strip_trailing_punctuation(rest.substr(0, rest.find('\n'))), stated)) {
      v.stated_result = stated;
      v.mismatch = stated != v.result;
    }
  }
  return v;
}

std::string render_step_table(const std::vector<StepRow>& rows) {
  std::string out = "| step | output |\n";
  for (const auto& row : rows) out += "| " + std::to_string(row.index) + " | " + row.payload + " |\n";
  return out;
}

std::string render_chart_chain(const ReasoningChain& chain, std::string_view question) {
  std::string out;
  if (!question.empty()) out += "Question: " + std::string(question) + "\nAnswer:\n";
  for (const auto& step : chain.steps) out += "Step" + std::to_string(step.index) + ". " + step.text + "\n";
  return out;
}

}  // namespace docstep
