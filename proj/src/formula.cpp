#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hetscan/heterogeneity.hpp"

namespace hetscan {

namespace {

std::string strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

// Splits on '+' outside parentheses.
std::vector<std::string> split_terms(std::string_view rhs) {
  std::vector<std::string> terms;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (rhs[i] == '(') ++depth;
    if (rhs[i] == ')' && --depth < 0) throw std::invalid_argument("formula: unbalanced ')'");
    if (rhs[i] == '+' && depth == 0) {
      terms.push_back(strip(rhs.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw std::invalid_argument("formula: unbalanced '('");
  terms.push_back(strip(rhs.substr(start)));
  for (const auto& t : terms)
    if (t.empty()) throw std::invalid_argument("formula: empty term");
  return terms;
}

}  // namespace

ParsedFormula parse_formula(const std::string& text) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos || text.find('~', tilde + 1) != std::string::npos)
    throw std::invalid_argument("formula: expected exactly one '~'");
  ParsedFormula out;
  out.response = strip(std::string_view(text).substr(0, tilde));
  if (out.response.empty()) throw std::invalid_argument("formula: missing response");

  for (const std::string& term : split_terms(std::string_view(text).substr(tilde + 1))) {
    if (term.front() != '(') {
      out.population_terms.push_back(term);
      continue;
    }
    if (term.back() != ')') throw std::invalid_argument("formula: malformed group term '" + term + "'");
    const std::string inner = term.substr(1, term.size() - 2);
    const auto bar = inner.find('|');
    if (bar == std::string::npos) throw std::invalid_argument("formula: group term without '|'");
    FormulaTerm group;
    group.grouping = strip(std::string_view(inner).substr(bar + 1));
    if (group.grouping.empty()) throw std::invalid_argument("formula: group term without grouping");
    const auto lhs = split_terms(std::string_view(inner).substr(0, bar));
    if (!(lhs.size() == 1 && lhs[0] == "1")) group.predictors = lhs;
    out.group_terms.push_back(std::move(group));
  }
  return out;
}

}  // namespace hetscan
