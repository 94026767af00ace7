#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace adec::data {

/// Toy probabilistic story grammar. Sentences are
///   SUBJ VERB OBJ | SUBJ "was" ADJ | SUBJ "ran to the" PLACE
/// with SUBJ = NAME | "the" NOUN and OBJ = NAME | "the" NOUN | "a" NOUN.
/// Word choices follow Zipf weights 1/rank. Sentences end in '.' with no
/// following space.
class StoryGrammar {
 public:
  StoryGrammar();

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& nouns() const { return nouns_; }

  /// First characters a valid sentence can start with.
  std::vector<char> sentence_initials() const;

  /// One sentence including its trailing '.'. When `initial` is set the
  /// subject is chosen so the sentence starts with that character.
  std::string sample_sentence(std::mt19937_64& rng, std::optional<char> initial = {},
                              std::optional<std::string> subject = {}) const;

  bool is_valid_sentence(std::string_view s) const;  // without the trailing '.'

  /// Splits on '.', ignoring the empty piece after a final '.'. A trailing
  /// piece without '.' counts as a sentence.
  static std::vector<std::string_view> sentences(std::string_view text);
  /// Fraction of sentences that parse; 0 for empty text.
  double validity_fraction(std::string_view text) const;

  /// Every sentence the grammar can produce, without the trailing '.'.
  std::vector<std::string> enumerate_sentences() const;

 private:
  std::string pick(const std::vector<std::string>& words, std::mt19937_64& rng) const;
  std::string subject(std::mt19937_64& rng) const;
  std::string object(std::mt19937_64& rng) const;
  bool is_subject(std::string_view s) const;
  bool is_object(std::string_view s) const;

  std::vector<std::string> names_, nouns_, verbs_, adjs_, places_;
};

const StoryGrammar& story_grammar();

}  // namespace adec::data
