#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace adec::data {

/// Fixed character-level vocabulary. '.' is the sentence separator token.
class Tokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;

  Tokenizer();

  int vocab_size() const { return static_cast<int>(chars_.size()); }
  const std::string& alphabet() const { return alphabet_; }

  /// Throws DataError on a character outside the alphabet.
  std::vector<int> encode(std::string_view s) const;
  int id(char c) const;
  /// BOS and EOS decode to nothing; SEP decodes to '.'.
  std::string decode(const std::vector<int>& ids) const;
  char to_char(int id) const;
  bool contains(char c) const { return lookup_[static_cast<unsigned char>(c)] >= 0; }

 private:
  std::string alphabet_;       // printable characters, in id order after the specials
  std::vector<char> chars_;    // id -> char, '\0' for BOS/EOS
  std::array<int, 256> lookup_{};
};

const Tokenizer& tokenizer();

}  // namespace adec::data
