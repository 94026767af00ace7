#include "adec/data/tokenizer.hpp"

#include "adec/errors.hpp"

namespace adec::data {

Tokenizer::Tokenizer() {
  alphabet_ = " abcdefghijklmnopqrstuvwxyz0123456789QASC:?=+-,>|";
  lookup_.fill(-1);
  chars_ = {'\0', '\0', '.'};
  lookup_[static_cast<unsigned char>('.')] = kSep;
  for (char c : alphabet_) {
    lookup_[static_cast<unsigned char>(c)] = static_cast<int>(chars_.size());
    chars_.push_back(c);
  }
  alphabet_.insert(alphabet_.begin(), '.');
}

int Tokenizer::id(char c) const {
  const int v = lookup_[static_cast<unsigned char>(c)];
  if (v < 0) throw DataError(std::string("character outside the alphabet: '") + c + "'");
  return v;
}

std::vector<int> Tokenizer::encode(std::string_view s) const {
  std::vector<int> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(id(c));
  return out;
}

char Tokenizer::to_char(int id) const {
  if (id < 0 || id >= vocab_size()) throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  return chars_[id];
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string s;
  s.reserve(ids.size());
  for (int t : ids) {
    const char c = to_char(t);
    if (c != '\0') s.push_back(c);
  }
  return s;
}

const Tokenizer& tokenizer() {
  static const Tokenizer tok;
  return tok;
}

}  // namespace adec::data
