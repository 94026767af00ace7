#include "adec/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"

namespace adec::eval {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw ContractError("winrate inputs differ in length (" + std::to_string(a) + " vs " +
                                  std::to_string(b) + ")");
  if (a == 0) throw ContractError("winrate over no samples");
}

template <class T>
double lex_winrate(const std::vector<T>& a, const std::vector<T>& b) {
  check_lengths(a.size(), b.size());
  double points = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] < a[i]) points += 1;
    else if (!(a[i] < b[i])) points += 0.5;
  }
  return points / static_cast<double>(a.size());
}

std::string canonical_answer(const std::string& s) {
  std::string_view v = s;
  const bool neg = !v.empty() && v.front() == '-';
  if (neg) v.remove_prefix(1);
  if (v.empty()) return s;
  for (char c : v) {
    if (c < '0' || c > '9') return s;
  }
  auto out = rewards::canonical_number(v);
  return (neg && out != "0") ? "-" + out : out;
}

double constraint_component(const rewards::Score& s) {
  auto it = s.components.find("constraint_rate");
  if (it == s.components.end()) throw DataError("constrained winrate needs constraint_rate scores");
  return it->second;
}

}  // namespace

double winrate_correctness(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::vector<int> ai(a.begin(), a.end()), bi(b.begin(), b.end());
  return lex_winrate(ai, bi);
}

double winrate_score(const std::vector<double>& a, const std::vector<double>& b) { return lex_winrate(a, b); }

double winrate_constrained(const std::vector<std::pair<double, double>>& a,
                           const std::vector<std::pair<double, double>>& b) {
  return lex_winrate(a, b);
}

double task_winrate(data::TaskTag task, const std::vector<rewards::Score>& a, const std::vector<rewards::Score>& b) {
  check_lengths(a.size(), b.size());
  if (task == data::TaskTag::Arith) {
    std::vector<bool> ac, bc;
    for (const auto& s : a) ac.push_back(s.value > 0.5);
    for (const auto& s : b) bc.push_back(s.value > 0.5);
    return winrate_correctness(ac, bc);
  }
  if (task == data::TaskTag::Constrained) {
    std::vector<std::pair<double, double>> al, bl;
    for (const auto& s : a) al.emplace_back(constraint_component(s), s.value);
    for (const auto& s : b) bl.emplace_back(constraint_component(s), s.value);
    return winrate_constrained(al, bl);
  }
  std::vector<double> av, bv;
  for (const auto& s : a) av.push_back(s.value);
  for (const auto& s : b) bv.push_back(s.value);
  return winrate_score(av, bv);
}

std::string majority_vote(const std::vector<std::string>& answers) {
  if (answers.empty()) throw ContractError("majority vote over no answers");
  std::vector<std::string> keys;
  std::vector<std::size_t> counts, first;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto key = canonical_answer(answers[i]);
    std::size_t k = 0;
    while (k < keys.size() && keys[k] != key) ++k;
    if (k == keys.size()) {
      keys.push_back(key);
      counts.push_back(0);
      first.push_back(i);
    }
    ++counts[k];
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < keys.size(); ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return answers[first[best]];
}

double vote_correct(const std::vector<decoding::GenerationRecord>& votes, const std::string& gold) {
  std::vector<std::string> answers;
  for (const auto& r : votes) {
    if (auto a = rewards::extract_answer(r.response_text())) answers.push_back(*a);
  }
  if (answers.empty()) return 0.0;
  return canonical_answer(majority_vote(answers)) == canonical_answer(gold) ? 1.0 : 0.0;
}

TempStats temp_stats(const std::vector<decoding::GenerationRecord>& records, int sentence_sep) {
  TempStats s;
  double init_sum = 0, other_sum = 0;
  const int eos = data::Tokenizer::kEos;
  for (const auto& r : records) {
    if (r.variant == decoding::Variant::FixedTemp || r.grid.empty()) {
      throw ContractError("temperature statistics need adaptive records");
    }
    if (s.grid.empty()) s.grid = r.grid;
    else if (s.grid != r.grid) throw ContractError("records use different temperature grids");
    const auto task = data::to_string(r.task);
    auto& h = s.histogram[task];
    h.resize(s.grid.size(), 0.0);
    for (int k : r.temp_index) h.at(k) += 1;
    s.decisions[task] += r.temp_index.size();

    if (r.variant != decoding::Variant::AdaptiveTok) continue;
    bool initial = r.task != data::TaskTag::Completion || r.prompt.back() == sentence_sep;
    for (std::size_t t = 0; t < r.response.size(); ++t) {
      const int y = r.response[t];
      if (y != eos) {
        const double tau = r.tau_at(t);
        if (initial) {
          init_sum += tau;
          ++s.initial_count;
        } else {
          other_sum += tau;
          ++s.other_count;
        }
      }
      initial = y == sentence_sep;
    }
  }
  for (auto& [task, h] : s.histogram) {
    const double n = static_cast<double>(s.decisions[task]);
    if (n > 0) {
      for (auto& v : h) v /= n;
    }
  }
  if (s.initial_count) s.initial_mean = init_sum / static_cast<double>(s.initial_count);
  if (s.other_count) s.other_mean = other_sum / static_cast<double>(s.other_count);
  return s;
}

void EvalReport::validate() const {
  for (const auto& [task, row] : winrates) {
    for (const auto& [opp, w] : row) {
      if (!(w >= 0 && w <= 1)) throw DataError("winrate of " + task + " vs " + opp + " outside [0,1]");
    }
  }
  if (temps) {
    for (const auto& [task, h] : temps->histogram) {
      double sum = 0;
      for (double v : h) sum += v;
      if (temps->decisions.at(task) > 0 && std::abs(sum - 1.0) > 1e-6) {
        throw DataError("temperature histogram for " + task + " does not sum to 1");
      }
    }
  }
}

double EvalReport::average_winrate(const std::string& opponent) const {
  if (winrates.empty()) throw ContractError("report has no winrates");
  double s = 0;
  for (const auto& [task, row] : winrates) {
    auto it = row.find(opponent);
    if (it == row.end()) throw ContractError("no winrate against " + opponent + " for task " + task);
    s += it->second;
  }
  return s / static_cast<double>(winrates.size());
}

nlohmann::json to_json(const TempStats& s) {
  return {{"grid", s.grid},
          {"histogram", s.histogram},
          {"decisions", s.decisions},
          {"initial_mean", s.initial_mean},
          {"other_mean", s.other_mean},
          {"initial_count", s.initial_count},
          {"other_count", s.other_count}};
}

TempStats temp_stats_from_json(const nlohmann::json& j) {
  TempStats s;
  s.grid = j.at("grid").get<std::vector<double>>();
  s.histogram = j.at("histogram").get<std::map<std::string, std::vector<double>>>();
  s.decisions = j.at("decisions").get<std::map<std::string, std::size_t>>();
  s.initial_mean = j.at("initial_mean").get<double>();
  s.other_mean = j.at("other_mean").get<double>();
  s.initial_count = j.at("initial_count").get<std::size_t>();
  s.other_count = j.at("other_count").get<std::size_t>();
  return s;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"schema_version", EvalReport::kVersion},
                   {"meta", r.meta},
                   {"winrates", r.winrates},
                   {"accuracies", r.accuracies},
                   {"metrics", r.metrics}};
  if (r.temps) j["temperatures"] = to_json(*r.temps);
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != EvalReport::kVersion) throw FormatError("unsupported report version");
    EvalReport r;
    r.meta = j.at("meta");
    r.winrates = j.at("winrates").get<std::map<std::string, std::map<std::string, double>>>();
    r.accuracies = j.at("accuracies").get<std::map<std::string, double>>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    if (j.contains("temperatures")) r.temps = temp_stats_from_json(j.at("temperatures"));
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report: ") + e.what());
  }
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw Error("cannot write " + p.string());
  os.precision(9);
  return os;
}

}  // namespace

void write_report(const std::string& path, const EvalReport& r) {
  r.validate();
  auto os = open_out(path);
  os << to_json(r).dump(2) << '\n';
}

EvalReport read_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  try {
    return eval_report_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_csv_tables(const std::string& dir, const EvalReport& r) {
  const std::filesystem::path d(dir);
  {
    auto os = open_out(d / "winrates.csv");
    os << "task,opponent,winrate\n";
    for (const auto& [task, row] : r.winrates)
      for (const auto& [opp, w] : row) os << task << ',' << opp << ',' << w << '\n';
  }
  {
    auto os = open_out(d / "accuracies.csv");
    os << "name,accuracy\n";
    for (const auto& [k, v] : r.accuracies) os << k << ',' << v << '\n';
  }
  {
    auto os = open_out(d / "metrics.csv");
    os << "name,value\n";
    for (const auto& [k, v] : r.metrics) os << k << ',' << v << '\n';
  }
  if (r.temps) {
    auto os = open_out(d / "histograms.csv");
    os << "task,tau,mass\n";
    for (const auto& [task, h] : r.temps->histogram)
      for (std::size_t k = 0; k < h.size(); ++k) os << task << ',' << r.temps->grid[k] << ',' << h[k] << '\n';
  }
}

std::string histogram_svg(const std::string& title, const std::vector<double>& grid, const std::vector<double>& mass) {
  if (grid.size() != mass.size()) throw ContractError("histogram and grid differ in length");
  const int w = 60 + 50 * static_cast<int>(grid.size()), h = 240, base = 200, top = 30;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
  os << "<line x1=\"40\" y1=\"" << base << "\" x2=\"" << w - 10 << "\" y2=\"" << base << "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double bar = (base - top) * std::clamp(mass[k], 0.0, 1.0);
    const int x = 50 + 50 * static_cast<int>(k);
    os << "<rect x=\"" << x << "\" y=\"" << base - bar << "\" width=\"36\" height=\"" << bar
       << "\" fill=\"steelblue\"/>\n";
    os << "<text x=\"" << x + 18 << "\" y=\"" << base + 16
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << grid[k] << "</text>\n";
    os.precision(3);
    os << "<text x=\"" << x + 18 << "\" y=\"" << base - bar - 4
       << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << mass[k] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace adec::eval
