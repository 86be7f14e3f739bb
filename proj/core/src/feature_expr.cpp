#include "llmreg/feature_expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "llmreg/errors.hpp"

namespace llmreg {

std::string to_string(Transform t) {
  switch (t) {
    case Transform::none: return "none";
    case Transform::log: return "log";
    case Transform::sqrt: return "sqrt";
    case Transform::exp: return "exp";
  }
  return "none";
}

Transform transform_from_string(std::string_view s) {
  if (s == "none") return Transform::none;
  if (s == "log") return Transform::log;
  if (s == "sqrt") return Transform::sqrt;
  if (s == "exp") return Transform::exp;
  throw ParseError("unknown transform: " + std::string(s));
}

FeatureExpr FeatureExpr::base_feature(std::string name, Category category) {
  FeatureExpr e;
  e.kind = Kind::base;
  e.operands = {std::move(name)};
  e.category = category;
  return e;
}

FeatureExpr FeatureExpr::product_of(std::vector<std::string> names, Category category) {
  if (names.size() < 2) throw InvalidArgument("product expression needs >= 2 operands");
  FeatureExpr e;
  e.kind = Kind::product;
  e.operands = std::move(names);
  std::sort(e.operands.begin(), e.operands.end());
  e.category = category;
  return e;
}

FeatureExpr FeatureExpr::transform_of(Transform t, std::string name, Category category) {
  if (t == Transform::none) throw InvalidArgument("transform expression needs a transform");
  FeatureExpr e;
  e.kind = Kind::transform;
  e.operands = {std::move(name)};
  e.transform = t;
  e.category = category;
  return e;
}

std::string FeatureExpr::display_name() const {
  if (kind == Kind::transform) {
    return to_string(transform) + "(" + operands.front() + ")";
  }
  std::vector<std::string> sorted = operands;
  std::sort(sorted.begin(), sorted.end());
  std::string name;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0) name += "*";
    name += sorted[i];
  }
  return name;
}

namespace {

// Lowercase, quotes stripped, runs of spaces/underscores collapsed to one
// underscore. "Neighbor Area Agricultural" == "neighbor_area_agricultural".
std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_separator = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    const unsigned char uc = static_cast<unsigned char>(c);
    // UTF-8 curly quotes (U+2018..U+201D): 0xE2 0x80 0x98..0x9D
    if (uc == 0xe2 && i + 2 < raw.size() &&
        static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
        static_cast<unsigned char>(raw[i + 2]) >= 0x98 &&
        static_cast<unsigned char>(raw[i + 2]) <= 0x9d) {
      i += 2;
      continue;
    }
    if (c == '"' || c == '\'' || c == '`') continue;
    if (c == ' ' || c == '_' || c == '\t') {
      if (!out.empty()) pending_separator = true;
      continue;
    }
    if (pending_separator) {
      out += '_';
      pending_separator = false;
    }
    out += static_cast<char>(std::tolower(uc));
  }
  return out;
}

std::string strip(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

// Drops "(...)" groups: the answer format allows a parenthesized pseudo-code
// note after the column name.
std::string drop_parentheticals(const std::string& s) {
  std::string out;
  int depth = 0;
  for (char c : s) {
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (depth > 0) --depth;
    } else if (depth == 0) {
      out += c;
    }
  }
  return out;
}

// Returns the 1-based column number when the line starts a "New column N:"
// entry (case-insensitive), else 0. `rest` receives the text after ':'.
bool match_new_column_line(const std::string& line, std::string* rest) {
  std::size_t i = 0;
  auto skip_space = [&] {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  };
  auto match_word = [&](std::string_view word) {
    skip_space();
    // tolerate markdown emphasis around the keyword
    while (i < line.size() && (line[i] == '*' || line[i] == '#' || line[i] == '-')) ++i;
    skip_space();
    if (line.size() - i < word.size()) return false;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(line[i + k])) != word[k]) return false;
    }
    i += word.size();
    return true;
  };
  if (!match_word("new")) return false;
  if (!match_word("column")) return false;
  skip_space();
  bool any_digit = false;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
    ++i;
    any_digit = true;
  }
  if (!any_digit) return false;
  // tolerate closing emphasis before the colon
  while (i < line.size() && (line[i] == '*' || std::isspace(static_cast<unsigned char>(line[i])))) ++i;
  if (i >= line.size() || line[i] != ':') return false;
  *rest = line.substr(i + 1);
  return true;
}

}  // namespace

DiscoveryParse parse_discovery_response(const std::string& response,
                                        const std::vector<std::string>& subset_names,
                                        Category subset_category) {
  DiscoveryParse result;

  std::map<std::string, std::string> canonical;  // normalized -> subset spelling
  for (const auto& name : subset_names) canonical[normalize_name(name)] = name;

  std::map<std::string, bool> seen;  // canonical display name dedup

  std::size_t start = 0;
  const std::size_t size = response.size();
  while (start <= size) {
    std::size_t end = response.find('\n', start);
    if (end == std::string::npos) end = size;
    const std::string line = response.substr(start, end - start);
    start = end + 1;
    if (end == size) start = size + 1;

    std::string rest;
    if (!match_new_column_line(line, &rest)) continue;

    // Expression is everything before '|'; the explanation is free text.
    const std::size_t bar = rest.find('|');
    std::string expr_text = strip(bar == std::string::npos ? rest : rest.substr(0, bar));
    expr_text = strip(drop_parentheticals(expr_text));
    if (expr_text.empty()) {
      result.warnings.push_back("skipped line with empty expression: " + strip(line));
      continue;
    }

    std::vector<std::string> operands;
    bool unknown = false;
    std::string unknown_name;
    std::size_t token_start = 0;
    while (token_start <= expr_text.size()) {
      std::size_t token_end = expr_text.find('*', token_start);
      // 'x' is accepted as a multiplication sign when surrounded by spaces
      if (token_end == std::string::npos) token_end = expr_text.size();
      const std::string token = strip(expr_text.substr(token_start, token_end - token_start));
      token_start = token_end + 1;
      if (token.empty()) {
        if (token_end == expr_text.size()) break;
        continue;
      }
      const std::string normalized = normalize_name(token);
      auto it = canonical.find(normalized);
      if (it == canonical.end()) {
        unknown = true;
        unknown_name = token;
        break;
      }
      operands.push_back(it->second);
      if (token_end == expr_text.size()) break;
    }

    if (unknown) {
      result.warnings.push_back("skipped line with unknown module \"" + unknown_name +
                                "\": " + strip(line));
      continue;
    }
    if (operands.empty()) {
      result.warnings.push_back("skipped malformed expression: " + strip(line));
      continue;
    }

    FeatureExpr expr = operands.size() == 1
                           ? FeatureExpr::base_feature(operands.front(), subset_category)
                           : FeatureExpr::product_of(std::move(operands), subset_category);
    const std::string key = expr.display_name();
    if (seen[key]) continue;
    seen[key] = true;
    result.expressions.push_back(std::move(expr));
  }
  return result;
}

namespace {

Eigen::VectorXd signed_log(const Eigen::VectorXd& x) {
  return x.array().sign() * (x.array().abs() + 1.0).log();
}

Eigen::VectorXd signed_sqrt(const Eigen::VectorXd& x) {
  return x.array().sign() * x.array().abs().sqrt();
}

// exp overflows immediately on raw magnitudes (nightlight sums), so it is
// taken on the column z-scored over the whole table, clipped to +-30.
Eigen::VectorXd clipped_exp(const Eigen::VectorXd& x) {
  const double mean = x.mean();
  double std_dev = std::sqrt((x.array() - mean).square().mean());
  if (!(std_dev > 0.0)) std_dev = 1.0;
  Eigen::ArrayXd z = (x.array() - mean) / std_dev;
  z = z.min(30.0).max(-30.0);
  return z.exp();
}

}  // namespace

Eigen::VectorXd evaluate_expr(const FeatureExpr& expr, const RegionTable& table) {
  if (expr.operands.empty()) throw InvalidArgument("expression has no operands");
  switch (expr.kind) {
    case FeatureExpr::Kind::base:
      return table.column(expr.operands.front());
    case FeatureExpr::Kind::product: {
      Eigen::VectorXd out = table.column(expr.operands.front());
      for (std::size_t i = 1; i < expr.operands.size(); ++i) {
        out = out.cwiseProduct(table.column(expr.operands[i]));
      }
      // High-order products of extreme raw magnitudes can overflow; saturate
      // instead of letting Inf poison the design matrix.
      for (Eigen::Index r = 0; r < out.size(); ++r) {
        if (std::isinf(out(r))) {
          out(r) = std::copysign(std::numeric_limits<double>::max(), out(r));
        }
      }
      return out;
    }
    case FeatureExpr::Kind::transform: {
      const Eigen::VectorXd column = table.column(expr.operands.front());
      switch (expr.transform) {
        case Transform::log: return signed_log(column);
        case Transform::sqrt: return signed_sqrt(column);
        case Transform::exp: return clipped_exp(column);
        case Transform::none: break;
      }
      throw InvalidArgument("transform expression without a transform");
    }
  }
  throw InvalidArgument("unreachable expression kind");
}

}  // namespace llmreg
