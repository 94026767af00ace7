#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adec/decoding/record.hpp"
#include "adec/rewards/rewards.hpp"

namespace adec::eval {

/// Sole correct method gets a point; both or neither split it.
double winrate_correctness(const std::vector<bool>& a, const std::vector<bool>& b);
/// Higher score gets a point; exact ties split it.
double winrate_score(const std::vector<double>& a, const std::vector<double>& b);
/// (constraint rate, score) compared lexicographically; full ties split.
double winrate_constrained(const std::vector<std::pair<double, double>>& a,
                           const std::vector<std::pair<double, double>>& b);

/// Winrate of A over B on one task's scores: correctness for arith,
/// lexicographic for constrained, raw score otherwise.
double task_winrate(data::TaskTag task, const std::vector<rewards::Score>& a, const std::vector<rewards::Score>& b);

/// Most frequent answer after numeric canonicalization; ties go to the answer
/// seen first. Returns the first input spelling of the winner.
std::string majority_vote(const std::vector<std::string>& answers);

/// Vote over the extracted answers of `votes` (responses without an answer
/// do not vote); 1 when the result matches `gold`.
double vote_correct(const std::vector<decoding::GenerationRecord>& votes, const std::string& gold);

struct TempStats {
  std::vector<double> grid;
  std::map<std::string, std::vector<double>> histogram;  // task -> mass per grid index
  std::map<std::string, std::size_t> decisions;
  double initial_mean = 0;  // token-level records only
  double other_mean = 0;
  std::size_t initial_count = 0;
  std::size_t other_count = 0;
};

/// Histograms of selected temperatures per task, and for token-level records
/// the mean temperature at sentence-initial tokens versus the rest. EOS is
/// excluded from the positional means. The first response token counts as
/// sentence-initial unless the prompt ends mid-sentence (completion prompts
/// not ending in `sentence_sep`).
TempStats temp_stats(const std::vector<decoding::GenerationRecord>& records, int sentence_sep);

struct EvalReport {
  static constexpr int kVersion = 1;
  nlohmann::json meta = nlohmann::json::object();
  // task -> opponent -> winrate of the evaluated policy
  std::map<std::string, std::map<std::string, double>> winrates;
  std::map<std::string, double> accuracies;
  std::map<std::string, double> metrics;
  std::optional<TempStats> temps;

  void validate() const;
  /// Unweighted mean over tasks of the winrate against `opponent`.
  double average_winrate(const std::string& opponent) const;
};

nlohmann::json to_json(const TempStats& s);
TempStats temp_stats_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

void write_report(const std::string& path, const EvalReport& r);
EvalReport read_report(const std::string& path);
/// winrates.csv, accuracies.csv, metrics.csv and histograms.csv in `dir`.
void write_csv_tables(const std::string& dir, const EvalReport& r);
/// Bar chart of one histogram over the grid.
std::string histogram_svg(const std::string& title, const std::vector<double>& grid, const std::vector<double>& mass);

}  // namespace adec::eval
