#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace adec::data {

enum class TaskTag { Arith, Diverse, Constrained, Mixed, Completion };

std::string to_string(TaskTag t);
TaskTag task_tag_from_string(const std::string& s);

struct TaskSample {
  TaskTag tag = TaskTag::Arith;
  std::vector<int> prompt;  // starts with BOS
  std::optional<std::string> gold;
  std::optional<int> constraint;  // token id of the required sentence-initial character

  std::string prompt_text() const;
  void validate() const;
};

struct ArithProblem {
  int a = 0;
  int b = 0;
  char op = '+';
  int value() const { return op == '+' ? a + b : a - b; }
};

std::string arith_prompt(const ArithProblem& p);
std::optional<ArithProblem> parse_arith_prompt(const std::string& text);

/// Worked solution. With probability `noise` each written result digit moves
/// to (d+1) or (d-1) mod 10, equally likely; later steps copy the digits as
/// written.
std::string arith_response(const ArithProblem& p, double noise, std::mt19937_64& rng);
ArithProblem sample_arith(std::mt19937_64& rng);

std::string diverse_prompt(const std::string& name, const std::string& noun);
std::string constrained_prompt(const std::string& name, const std::string& noun, char initial);
/// 2-4 sentences; the first uses `name` as its subject.
std::string story_response(const std::string& name, std::mt19937_64& rng);
/// Each sentence starts with `initial` with probability `compliance`.
std::string constrained_response(char initial, double compliance, std::mt19937_64& rng);
/// Plain grammar text of several sentences.
std::string plain_document(std::mt19937_64& rng, int min_sentences = 6, int max_sentences = 9);

std::vector<TaskSample> gen_arith(int n, std::uint64_t seed);
std::vector<TaskSample> gen_diverse(int n, std::uint64_t seed);
std::vector<TaskSample> gen_constrained(int n, std::uint64_t seed);
/// Prompts are the first `prefix_len` characters of held-out plain documents.
std::vector<TaskSample> gen_completion(int n, std::uint64_t seed, int prefix_len = 50);
/// Arith, diverse and general ("mixed") samples in the requested counts,
/// shuffled together. General samples are arith- or story-style prompts
/// (50/50) tagged mixed with no gold.
std::vector<TaskSample> gen_mixed(int arith, int diverse, int general, std::uint64_t seed);

nlohmann::json to_json(const TaskSample& s);
TaskSample task_sample_from_json(const nlohmann::json& j);
void write_jsonl(const std::string& path, const std::vector<TaskSample>& samples);
std::vector<TaskSample> read_jsonl(const std::string& path);

struct CorpusConfig {
  int arith_docs = 8000;
  int diverse_docs = 4000;
  int constrained_docs = 4000;
  int plain_docs = 4000;
  double arith_noise = 0.3;
  double constraint_compliance = 0.78;
  std::uint64_t seed = 7;
};

/// One document per entry, without BOS/EOS.
std::vector<std::string> build_corpus(const CorpusConfig& cfg);
/// BOS + characters + EOS for each document.
std::vector<std::vector<int>> encode_corpus(const std::vector<std::string>& docs);
void write_corpus(const std::string& path, const std::vector<std::string>& docs);
std::vector<std::string> read_corpus(const std::string& path);

}  // namespace adec::data
