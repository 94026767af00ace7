#include "adec/rewards/rewards.hpp"

#include <set>
#include <utility>
#include <vector>

#include "adec/data/grammar.hpp"
#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"

namespace adec::rewards {

double ngram_repeat_rate(std::span<const int> tokens, int n) {
  if (n < 1) throw ContractError("ngram_repeat_rate: n must be at least 1");
  if (tokens.size() < static_cast<std::size_t>(n) + 1) return 0.0;
  std::set<std::vector<int>> seen;
  const std::size_t windows = tokens.size() - n + 1;
  std::size_t dup = 0;
  for (std::size_t i = 0; i < windows; ++i) {
    if (!seen.emplace(tokens.begin() + i, tokens.begin() + i + n).second) ++dup;
  }
  return static_cast<double>(dup) / windows;
}

double constraint_rate(std::span<const int> response, int constraint, int sep) {
  std::size_t sentences = 0, ok = 0;
  bool at_start = true;
  for (int t : response) {
    if (at_start) {
      ++sentences;
      ok += (t == constraint);
      at_start = false;
    }
    if (t == sep) at_start = true;
  }
  return sentences ? static_cast<double>(ok) / sentences : 0.0;
}

std::string canonical_number(std::string_view s) {
  std::size_t i = 0;
  while (i + 1 < s.size() && s[i] == '0') ++i;
  return std::string(s.substr(i));
}

std::optional<std::string> extract_answer(std::string_view text) {
  const auto eq = text.rfind('=');
  if (eq == std::string_view::npos) return std::nullopt;
  std::string_view tail = text.substr(eq + 1);
  while (!tail.empty() && tail.front() == ' ') tail.remove_prefix(1);
  while (!tail.empty() && tail.back() == ' ') tail.remove_suffix(1);
  bool neg = false;
  if (!tail.empty() && tail.front() == '-') {
    neg = true;
    tail.remove_prefix(1);
  }
  if (tail.empty()) return std::nullopt;
  for (char c : tail) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  std::string out = canonical_number(tail);
  if (neg && out != "0") out.insert(out.begin(), '-');
  return out;
}

double exact_answer_reward(std::string_view response_text, const std::string& gold) {
  if (gold.empty()) throw ContractError("exact_answer_reward: gold must be nonempty");
  const auto got = extract_answer(response_text);
  if (!got) return 0.0;
  std::string g = gold;
  const bool neg = !g.empty() && g.front() == '-';
  g = (neg ? "-" : "") + canonical_number(neg ? std::string_view(g).substr(1) : std::string_view(g));
  return *got == g ? 1.0 : 0.0;
}

double distinct2_ratio(std::span<const int> tokens) {
  if (tokens.size() < 2) return 0.0;
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) seen.emplace(tokens[i], tokens[i + 1]);
  return static_cast<double>(seen.size()) / (tokens.size() - 1);
}

double grammar_validity(std::span<const int> tokens) {
  const std::string text = data::tokenizer().decode({tokens.begin(), tokens.end()});
  return data::story_grammar().validity_fraction(text);
}

Score diversity_reward(std::span<const int> response, const ValidityFn& validity) {
  Score s;
  const double d = distinct2_ratio(response);
  const double v = validity(response);
  s.value = d * v;
  s.components = {{"distinct2", d}, {"validity", v}};
  return s;
}

}  // namespace adec::rewards
