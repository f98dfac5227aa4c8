#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace docstep::oracle {

using Rational = boost::multiprecision::cpp_rational;

// Random arithmetic tree, kept as a tree so the oracle never parses text.
struct Node {
  char op = 0;  // 0 for a leaf, 'n' for negation, else + - * /
  Rational value;
  std::string literal;
  std::vector<Node> kids;
};

inline int precedence(char op) { return op == '+' || op == '-' ? 1 : op == '*' || op == '/' ? 2 : 3; }

inline Rational eval(const Node& n) {
  switch (n.op) {
    case 0: return n.value;
    case 'n': return -eval(n.kids[0]);
    case '+': return eval(n.kids[0]) + eval(n.kids[1]);
    case '-': return eval(n.kids[0]) - eval(n.kids[1]);
    case '*': return eval(n.kids[0]) * eval(n.kids[1]);
    default: return eval(n.kids[0]) / eval(n.kids[1]);
  }
}

// Parenthesizes only where precedence or left association demands it (or at random).
inline std::string render(const Node& n, std::mt19937_64& rng) {
  if (n.op == 0) return n.literal;
  if (n.op == 'n') {
    const Node& k = n.kids[0];
    const bool wrap = k.op != 0;
    return "-" + (wrap ? "(" + render(k, rng) + ")" : render(k, rng));
  }
  auto side = [&](const Node& k, bool right) {
    std::string text = render(k, rng);
    bool wrap = false;
    if (k.op != 0 && k.op != 'n') {
      const int pk = precedence(k.op);
      const int pn = precedence(n.op);
      wrap = pk < pn || (right && pk == pn);
    }
    if (k.op == 'n') wrap = true;
    if (!wrap && k.op != 0 && rng() % 5 == 0) wrap = true;
    return wrap ? "(" + text + ")" : text;
  };
  const std::string spacer = rng() % 2 ? " " : "";
  return side(n.kids[0], false) + spacer + n.op + spacer + side(n.kids[1], true);
}

inline Node random_leaf(std::mt19937_64& rng) {
  Node n;
  const std::int64_t whole = static_cast<std::int64_t>(rng() % 100000);
  const int decimals = static_cast<int>(rng() % 4);
  std::int64_t frac = 0;
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) {
    frac = frac * 10 + static_cast<std::int64_t>(rng() % 10);
    scale *= 10;
  }
  n.value = Rational(whole) + Rational(frac, scale);
  n.literal = std::to_string(whole);
  if (decimals) {
    std::string f = std::to_string(frac);
    n.literal += "." + std::string(static_cast<std::size_t>(decimals) - f.size(), '0') + f;
  }
  return n;
}

inline Node random_tree(std::mt19937_64& rng, int depth) {
  if (depth == 0 || rng() % 4 == 0) return random_leaf(rng);
  Node n;
  const int pick = static_cast<int>(rng() % 9);
  if (pick == 8) {
    n.op = 'n';
    n.kids.push_back(random_tree(rng, depth - 1));
    return n;
  }
  n.op = "+-*/+-*/"[pick];
  n.kids.push_back(random_tree(rng, depth - 1));
  n.kids.push_back(random_tree(rng, depth - 1));
  return n;
}

// Tree with no division by a zero-valued subtree.
inline bool well_defined(const Node& n) {
  for (const auto& k : n.kids) {
    if (!well_defined(k)) return false;
  }
  return n.op != '/' || eval(n.kids[1]) != 0;
}

inline std::u32string code_points(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
    char32_t cp = len == 1 ? c : c & (0xFF >> (len + 1));
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

// Full-matrix Wagner-Fischer edit distance.
inline std::size_t edit_distance(const std::string& a8, const std::string& b8) {
  const auto a = code_points(a8);
  const auto b = code_points(b8);
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

inline double normalized_distance(const std::string& a, const std::string& b) {
  const std::size_t longest = std::max(code_points(a).size(), code_points(b).size());
  return longest == 0 ? 0.0 : static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> alphabet = {"a", "b", "c", "A", " ", "1", "é", "ß", "中", "€"};
  std::string s;
  const std::size_t len = rng() % (max_len + 1);
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

}  // namespace docstep::oracle
