#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace adec::rewards {

struct Score {
  double value = 0;
  std::map<std::string, double> components;
};

/// Fraction of length-n windows equal to an earlier window of the same
/// sequence; 0 when there are fewer than n+1 tokens.
double ngram_repeat_rate(std::span<const int> tokens, int n);

/// Fraction of sep-delimited sentences whose first token is `constraint`.
/// A trailing sep does not open a new sentence; an empty response scores 0.
double constraint_rate(std::span<const int> response, int constraint, int sep);

/// Text after the final '=' with surrounding spaces and leading zeros removed;
/// nothing when there is no '=' or what follows is not a number.
std::optional<std::string> extract_answer(std::string_view text);
std::string canonical_number(std::string_view s);
double exact_answer_reward(std::string_view response_text, const std::string& gold);

/// Distinct bigrams over total bigrams; 0 for fewer than two tokens.
double distinct2_ratio(std::span<const int> tokens);

using ValidityFn = std::function<double(std::span<const int>)>;
/// Grammar-validity fraction of the decoded response under the story grammar.
double grammar_validity(std::span<const int> tokens);
/// value = distinct2_ratio * validity; both factors appear as components.
Score diversity_reward(std::span<const int> response, const ValidityFn& validity = grammar_validity);

}  // namespace adec::rewards
