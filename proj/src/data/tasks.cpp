#include "adec/data/tasks.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>

#include "adec/data/grammar.hpp"
#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"

namespace adec::data {

namespace {

// Seed offsets keep task generators on disjoint streams for the same seed.
constexpr std::uint64_t kArithSalt = 0x61726974;
constexpr std::uint64_t kDiverseSalt = 0x64697665;
constexpr std::uint64_t kConstrainedSalt = 0x636f6e73;
constexpr std::uint64_t kCompletionSalt = 0x636f6d70;
constexpr std::uint64_t kMixedSalt = 0x6d697865;

void require_positive(int n, const char* what) {
  if (n <= 0) throw ContractError(std::string(what) + ": n must be positive");
}

std::vector<int> with_bos(const std::string& text) {
  std::vector<int> ids{Tokenizer::kBos};
  const auto body = tokenizer().encode(text);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

char noisy_digit(int d, double noise, std::mt19937_64& rng) {
  if (noise > 0 && std::bernoulli_distribution(noise)(rng)) {
    d = (d + (std::bernoulli_distribution(0.5)(rng) ? 1 : 9)) % 10;
  }
  return static_cast<char>('0' + d);
}

template <class V>
const typename V::value_type& pick_uniform(const V& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

std::string to_string(TaskTag t) {
  switch (t) {
    case TaskTag::Arith: return "arith";
    case TaskTag::Diverse: return "diverse";
    case TaskTag::Constrained: return "constrained";
    case TaskTag::Mixed: return "mixed";
    case TaskTag::Completion: return "completion";
  }
  return "?";
}

TaskTag task_tag_from_string(const std::string& s) {
  if (s == "arith") return TaskTag::Arith;
  if (s == "diverse") return TaskTag::Diverse;
  if (s == "constrained") return TaskTag::Constrained;
  if (s == "mixed") return TaskTag::Mixed;
  if (s == "completion") return TaskTag::Completion;
  throw DataError("unknown task tag '" + s + "'");
}

std::string TaskSample::prompt_text() const { return tokenizer().decode(prompt); }

void TaskSample::validate() const {
  if (prompt.empty() || prompt.front() != Tokenizer::kBos) throw DataError("prompt must start with BOS");
  if (gold.has_value() != (tag == TaskTag::Arith)) throw DataError("gold must be present exactly for arith samples");
  if (constraint.has_value() != (tag == TaskTag::Constrained)) {
    throw DataError("constraint must be present exactly for constrained samples");
  }
}

std::string arith_prompt(const ArithProblem& p) {
  return "Q: " + std::to_string(p.a) + p.op + std::to_string(p.b) + " = ? A:";
}

std::optional<ArithProblem> parse_arith_prompt(const std::string& text) {
  static const std::regex re(R"(Q: (\d{1,3})([+-])(\d{1,3}) = \? A:)");
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return ArithProblem{std::stoi(m[1]), std::stoi(m[3]), m[2].str()[0]};
}

ArithProblem sample_arith(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> operand(10, 99);
  ArithProblem p{operand(rng), operand(rng), std::bernoulli_distribution(0.5)(rng) ? '+' : '-'};
  if (p.op == '-' && p.a < p.b) std::swap(p.a, p.b);
  return p;
}

std::string arith_response(const ArithProblem& p, double noise, std::mt19937_64& rng) {
  const int a1 = p.a / 10, a0 = p.a % 10, b1 = p.b / 10, b0 = p.b % 10;
  std::string s = " ";
  if (p.op == '+') {
    const int u = a0 + b0;
    const char uc = noisy_digit(u / 10, noise, rng), uu = noisy_digit(u % 10, noise, rng);
    s += std::to_string(a0) + "+" + std::to_string(b0) + "=" + uc + uu + ", ";
    const int t = a1 + b1 + (uc - '0');
    const char tc = noisy_digit(t / 10, noise, rng), tu = noisy_digit(t % 10, noise, rng);
    s += std::to_string(a1) + "+" + std::to_string(b1) + "+" + uc + "=" + tc + tu + ", = " + tc + tu + uu;
  } else {
    if (p.a < p.b) throw DataError("subtraction problems need a >= b");
    const int borrow = a0 < b0 ? 1 : 0;
    const char uu = noisy_digit(borrow * 10 + a0 - b0, noise, rng);
    s += std::to_string(borrow) + std::to_string(a0) + "-" + std::to_string(b0) + "=" + uu + ", ";
    const char tu = noisy_digit(a1 - b1 - borrow, noise, rng);
    s += std::to_string(a1) + "-" + std::to_string(b1) + "-" + std::to_string(borrow) + "=" + tu + ", = " + tu + uu;
  }
  return s;
}

std::string diverse_prompt(const std::string& name, const std::string& noun) {
  return "S: " + name + " " + noun + " >";
}

std::string constrained_prompt(const std::string& name, const std::string& noun, char initial) {
  return "S: " + name + " " + noun + " C:" + std::string(1, initial) + " >";
}

std::string story_response(const std::string& name, std::mt19937_64& rng) {
  const auto& g = story_grammar();
  const int n = std::uniform_int_distribution<int>(2, 4)(rng);
  std::string s = g.sample_sentence(rng, std::nullopt, name);
  for (int i = 1; i < n; ++i) s += g.sample_sentence(rng);
  return s;
}

std::string constrained_response(char initial, double compliance, std::mt19937_64& rng) {
  const auto& g = story_grammar();
  const int n = std::uniform_int_distribution<int>(2, 4)(rng);
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (std::bernoulli_distribution(compliance)(rng)) s += g.sample_sentence(rng, initial);
    else s += g.sample_sentence(rng);
  }
  return s;
}

std::string plain_document(std::mt19937_64& rng, int min_sentences, int max_sentences) {
  const auto& g = story_grammar();
  const int n = std::uniform_int_distribution<int>(min_sentences, max_sentences)(rng);
  std::string s;
  for (int i = 0; i < n; ++i) s += g.sample_sentence(rng);
  return s;
}

std::vector<TaskSample> gen_arith(int n, std::uint64_t seed) {
  require_positive(n, "gen_arith");
  std::mt19937_64 rng(seed ^ kArithSalt);
  std::vector<TaskSample> out;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_arith(rng);
    out.push_back({TaskTag::Arith, with_bos(arith_prompt(p)), std::to_string(p.value()), std::nullopt});
  }
  return out;
}

std::vector<TaskSample> gen_diverse(int n, std::uint64_t seed) {
  require_positive(n, "gen_diverse");
  std::mt19937_64 rng(seed ^ kDiverseSalt);
  const auto& g = story_grammar();
  std::vector<TaskSample> out;
  for (int i = 0; i < n; ++i) {
    const auto& name = pick_uniform(g.names(), rng);
    const auto& noun = pick_uniform(g.nouns(), rng);
    out.push_back({TaskTag::Diverse, with_bos(diverse_prompt(name, noun)), std::nullopt, std::nullopt});
  }
  return out;
}

std::vector<TaskSample> gen_constrained(int n, std::uint64_t seed) {
  require_positive(n, "gen_constrained");
  std::mt19937_64 rng(seed ^ kConstrainedSalt);
  const auto& g = story_grammar();
  const auto initials = g.sentence_initials();
  std::vector<TaskSample> out;
  for (int i = 0; i < n; ++i) {
    const auto& name = pick_uniform(g.names(), rng);
    const auto& noun = pick_uniform(g.nouns(), rng);
    const char c = pick_uniform(initials, rng);
    out.push_back({TaskTag::Constrained, with_bos(constrained_prompt(name, noun, c)), std::nullopt,
                   tokenizer().id(c)});
  }
  return out;
}

std::vector<TaskSample> gen_completion(int n, std::uint64_t seed, int prefix_len) {
  require_positive(n, "gen_completion");
  if (prefix_len <= 0) throw ContractError("gen_completion: prefix_len must be positive");
  std::mt19937_64 rng(seed ^ kCompletionSalt);
  std::vector<TaskSample> out;
  for (int i = 0; i < n; ++i) {
    std::string doc;
    while (static_cast<int>(doc.size()) < prefix_len) doc += plain_document(rng);
    out.push_back({TaskTag::Completion, with_bos(doc.substr(0, prefix_len)), std::nullopt, std::nullopt});
  }
  return out;
}

std::vector<TaskSample> gen_mixed(int arith, int diverse, int general, std::uint64_t seed) {
  if (arith < 0 || diverse < 0 || general < 0 || arith + diverse + general == 0) {
    throw ContractError("gen_mixed: counts must be nonnegative and not all zero");
  }
  std::vector<TaskSample> out;
  if (arith) out = gen_arith(arith, seed);
  if (diverse) {
    auto d = gen_diverse(diverse, seed);
    out.insert(out.end(), d.begin(), d.end());
  }
  std::mt19937_64 rng(seed ^ kMixedSalt);
  const auto& g = story_grammar();
  for (int i = 0; i < general; ++i) {
    std::string text;
    if (std::bernoulli_distribution(0.5)(rng)) {
      text = arith_prompt(sample_arith(rng));
    } else {
      text = diverse_prompt(pick_uniform(g.names(), rng), pick_uniform(g.nouns(), rng));
    }
    out.push_back({TaskTag::Mixed, with_bos(text), std::nullopt, std::nullopt});
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

nlohmann::json to_json(const TaskSample& s) {
  nlohmann::json j{{"task", to_string(s.tag)}, {"prompt", s.prompt_text()}};
  if (s.gold) j["gold"] = *s.gold;
  if (s.constraint) j["constraint"] = std::string(1, tokenizer().to_char(*s.constraint));
  return j;
}

TaskSample task_sample_from_json(const nlohmann::json& j) {
  try {
    TaskSample s;
    s.tag = task_tag_from_string(j.at("task").get<std::string>());
    s.prompt = with_bos(j.at("prompt").get<std::string>());
    if (j.contains("gold")) s.gold = j.at("gold").get<std::string>();
    if (j.contains("constraint")) {
      const auto c = j.at("constraint").get<std::string>();
      if (c.size() != 1) throw DataError("constraint must be a single character");
      s.constraint = tokenizer().id(c[0]);
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad task sample: ") + e.what());
  }
}

void write_jsonl(const std::string& path, const std::vector<TaskSample>& samples) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  for (const auto& s : samples) os << to_json(s).dump() << '\n';
}

std::vector<TaskSample> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::vector<TaskSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(task_sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> build_corpus(const CorpusConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const auto& g = story_grammar();
  const auto initials = g.sentence_initials();
  std::vector<std::string> docs;
  for (int i = 0; i < cfg.arith_docs; ++i) {
    const auto p = sample_arith(rng);
    docs.push_back(arith_prompt(p) + arith_response(p, cfg.arith_noise, rng));
  }
  for (int i = 0; i < cfg.diverse_docs; ++i) {
    const auto& name = pick_uniform(g.names(), rng);
    const auto& noun = pick_uniform(g.nouns(), rng);
    docs.push_back(diverse_prompt(name, noun) + story_response(name, rng));
  }
  for (int i = 0; i < cfg.constrained_docs; ++i) {
    const auto& name = pick_uniform(g.names(), rng);
    const auto& noun = pick_uniform(g.nouns(), rng);
    const char c = pick_uniform(initials, rng);
    docs.push_back(constrained_prompt(name, noun, c) + constrained_response(c, cfg.constraint_compliance, rng));
  }
  for (int i = 0; i < cfg.plain_docs; ++i) docs.push_back(plain_document(rng));
  std::shuffle(docs.begin(), docs.end(), rng);
  return docs;
}

std::vector<std::vector<int>> encode_corpus(const std::vector<std::string>& docs) {
  std::vector<std::vector<int>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    auto ids = with_bos(d);
    ids.push_back(Tokenizer::kEos);
    out.push_back(std::move(ids));
  }
  return out;
}

void write_corpus(const std::string& path, const std::vector<std::string>& docs) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  for (const auto& d : docs) os << d << '\n';
}

std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) docs.push_back(line);
  }
  if (docs.empty()) throw DataError(path + ": corpus is empty");
  return docs;
}

}  // namespace adec::data
