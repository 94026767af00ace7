#include "adec/data/grammar.hpp"

#include <algorithm>
#include <set>

#include "adec/errors.hpp"

namespace adec::data {

namespace {

std::size_t zipf_index(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng);
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool strip_prefix(std::string_view& s, std::string_view p) {
  if (s.substr(0, p.size()) != p) return false;
  s.remove_prefix(p.size());
  return true;
}

}  // namespace

StoryGrammar::StoryGrammar()
    : names_{"ann", "bob", "dan", "eve", "kim", "max", "sam", "liz"},
      nouns_{"cat", "dog", "fox", "owl", "cow", "pig", "hen", "bee"},
      verbs_{"saw", "met", "fed", "liked", "hugged", "chased"},
      adjs_{"happy", "sad", "big", "small", "tired"},
      places_{"park", "barn", "lake", "hill", "shop"} {}

std::vector<char> StoryGrammar::sentence_initials() const {
  std::set<char> s{'t'};
  for (const auto& n : names_) s.insert(n[0]);
  return {s.begin(), s.end()};
}

std::string StoryGrammar::pick(const std::vector<std::string>& words, std::mt19937_64& rng) const {
  return words[zipf_index(words.size(), rng)];
}

std::string StoryGrammar::subject(std::mt19937_64& rng) const {
  return std::bernoulli_distribution(0.5)(rng) ? pick(names_, rng) : "the " + pick(nouns_, rng);
}

std::string StoryGrammar::object(std::mt19937_64& rng) const {
  switch (zipf_index(3, rng)) {
    case 0: return "the " + pick(nouns_, rng);
    case 1: return pick(names_, rng);
    default: return "a " + pick(nouns_, rng);
  }
}

std::string StoryGrammar::sample_sentence(std::mt19937_64& rng, std::optional<char> initial,
                                          std::optional<std::string> subj) const {
  std::string s;
  if (subj) {
    s = *subj;
  } else if (initial) {
    if (*initial == 't') {
      s = "the " + pick(nouns_, rng);
    } else {
      auto it = std::find_if(names_.begin(), names_.end(), [&](const std::string& n) { return n[0] == *initial; });
      if (it == names_.end()) throw DataError(std::string("no subject starts with '") + *initial + "'");
      s = *it;
    }
  } else {
    s = subject(rng);
  }
  switch (zipf_index(3, rng)) {
    case 0: s += " " + pick(verbs_, rng) + " " + object(rng); break;
    case 1: s += " was " + pick(adjs_, rng); break;
    default: s += " ran to the " + pick(places_, rng); break;
  }
  return s + ".";
}

bool StoryGrammar::is_subject(std::string_view s) const {
  if (contains(names_, s)) return true;
  return strip_prefix(s, "the ") && contains(nouns_, s);
}

bool StoryGrammar::is_object(std::string_view s) const {
  if (contains(names_, s)) return true;
  if (strip_prefix(s, "the ")) return contains(nouns_, s);
  return strip_prefix(s, "a ") && contains(nouns_, s);
}

bool StoryGrammar::is_valid_sentence(std::string_view s) const {
  // Subject is one word (name) or two ("the noun").
  for (std::size_t cut : {std::size_t(3), std::size_t(7)}) {
    if (s.size() <= cut + 1 || s[cut] != ' ') continue;
    std::string_view subj = s.substr(0, cut), rest = s.substr(cut + 1);
    if (!is_subject(subj)) continue;
    if (strip_prefix(rest, "was ")) {
      if (contains(adjs_, rest)) return true;
      continue;
    }
    if (strip_prefix(rest, "ran to the ")) {
      if (contains(places_, rest)) return true;
      continue;
    }
    const auto sp = rest.find(' ');
    if (sp == std::string_view::npos) continue;
    if (contains(verbs_, rest.substr(0, sp)) && is_object(rest.substr(sp + 1))) return true;
  }
  return false;
}

std::vector<std::string_view> StoryGrammar::sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto dot = text.find('.', start);
    if (dot == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, dot - start));
    start = dot + 1;
  }
  return out;
}

double StoryGrammar::validity_fraction(std::string_view text) const {
  const auto ss = sentences(text);
  if (ss.empty()) return 0.0;
  std::size_t ok = 0;
  for (auto s : ss) ok += is_valid_sentence(s);
  return static_cast<double>(ok) / ss.size();
}

std::vector<std::string> StoryGrammar::enumerate_sentences() const {
  std::vector<std::string> subjects = names_, objects = names_;
  for (const auto& n : nouns_) {
    subjects.push_back("the " + n);
    objects.push_back("the " + n);
    objects.push_back("a " + n);
  }
  std::vector<std::string> out;
  for (const auto& s : subjects) {
    for (const auto& v : verbs_)
      for (const auto& o : objects) out.push_back(s + " " + v + " " + o);
    for (const auto& a : adjs_) out.push_back(s + " was " + a);
    for (const auto& p : places_) out.push_back(s + " ran to the " + p);
  }
  return out;
}

const StoryGrammar& story_grammar() {
  static const StoryGrammar g;
  return g;
}

}  // namespace adec::data
