// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/matching.hpp"

namespace testing {

inline combo::PassageChain chain(const std::string& id, const std::string& text, combo::Source source) {
  combo::PassageChain c;
  c.source = source;
  combo::Passage p;
  p.id = id;
  p.text = text;
  p.source = source;
  c.segments.push_back(p);
  return c;
}

/// Example whose pools hold the given texts; ids are "<qid>-r<j>" / "<qid>-g<i>".
inline combo::QAExample example(const std::string& qid, const std::string& question,
                                std::vector<std::string> answers, const std::vector<std::string>& retrieved,
                                const std::vector<std::string>& generated) {
  combo::QAExample ex;
  ex.question_id = qid;
  ex.question = question;
  ex.answers = std::move(answers);
  ex.hop_type = combo::HopType::SingleHop;
  for (std::size_t j = 0; j < retrieved.size(); ++j)
    ex.retrieved.push_back(chain(qid + "-r" + std::to_string(j), retrieved[j], combo::Source::Retrieved));
  for (std::size_t i = 0; i < generated.size(); ++i)
    ex.generated.push_back(chain(qid + "-g" + std::to_string(i), generated[i], combo::Source::LlmGenerated));
  return ex;
}

/// Example with n retrieved and m generated chains, of which the first n_a / m_a mention the answer.
inline combo::QAExample counted_example(const std::string& qid, std::size_t n, std::size_t m, std::size_t n_a,
                                        std::size_t m_a) {
  std::vector<std::string> r, g;
  for (std::size_t j = 0; j < n; ++j) r.push_back(j < n_a ? "the winner was Don Shula" : "an unrelated note " + std::to_string(j));
  for (std::size_t i = 0; i < m; ++i) g.push_back(i < m_a ? "coach Don Shula won" : "coach George Halas won");
  return example(qid, "who won", {"Don Shula"}, r, g);
}

/// Maximum total weight over all permutations. Each candidate is summed in
/// descending weight order, the same order a PairMatching lists its pairs.
inline double brute_force_max(const std::vector<double>& w, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> picked(n);
  double best = -1.0;
  do {
    for (std::size_t r = 0; r < n; ++r) picked[r] = w[r * n + perm[r]];
    std::sort(picked.begin(), picked.end(), std::greater<>());
    double total = 0.0;
    for (double v : picked) total += v;
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline combo::WeightedBipartiteGraph random_graph(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> grid(n, std::vector<double>(n));
  for (auto& row : grid)
    for (auto& v : row) v = u(rng);
  return combo::WeightedBipartiteGraph::from_grid(grid);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("combo-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

#include "combo/analysis.hpp"

namespace testing {

/// Reference per-bin subset sizes and method EMs, realised as 100000
/// questions whose exact counts reproduce every cell to one decimal
/// (bin [0, 0.1) exactly: 27257 / 56200 = 48.5%).
struct BinFixture {
  std::vector<combo::ConflictStats> stats;
  combo::MethodPredictions predictions;
  std::vector<combo::QAExample> examples;
};

inline const std::vector<double>& fixture_rates() {
  static const std::vector<double> rates{0.05, 0.15, 0.25, 0.35, 0.45, 0.75};
  return rates;
}

inline const std::vector<std::size_t>& fixture_bin_sizes() {
  static const std::vector<std::size_t> sizes{56200, 22700, 15500, 1800, 2200, 1600};
  return sizes;
}

inline const std::map<std::string, std::vector<double>>& fixture_table() {
  static const std::map<std::string, std::vector<double>> table{
      {"retrieved_only", {41.6, 45.1, 52.5, 62.5, 57.4, 61.8}},
      {"direct_merging", {47.7, 53.1, 59.0, 65.0, 64.0, 56.6}},
      {"combo", {48.5, 53.3, 59.9, 67.5, 66.0, 61.0}},
  };
  return table;
}

inline BinFixture table_fixture() {
  BinFixture f;
  std::size_t q = 0;
  for (std::size_t b = 0; b < fixture_bin_sizes().size(); ++b) {
    const std::size_t size = fixture_bin_sizes()[b];
    std::map<std::string, std::size_t> correct;
    for (const auto& [method, ems] : fixture_table())
      correct[method] = static_cast<std::size_t>(std::llround(ems[b] / 100.0 * static_cast<double>(size)));
    for (std::size_t k = 0; k < size; ++k, ++q) {
      const std::string qid = "t" + std::to_string(q);
      combo::ConflictStats s;
      s.question_id = qid;
      s.conflicting_rate = fixture_rates()[b];
      f.stats.push_back(s);
      combo::QAExample ex;
      ex.question_id = qid;
      ex.answers = {"gold"};
      f.examples.push_back(std::move(ex));
      for (const auto& [method, c] : correct) f.predictions[method][qid] = k < c ? "gold" : "wrong";
    }
  }
  return f;
}

/// 150 annotated pairs, 50 per annotated class, with 40 + 39 + 38 = 117 agreeing.
inline std::pair<std::vector<combo::PairType>, std::vector<combo::PairType>> confusion_fixture() {
  using combo::PairType;
  const PairType types[3] = {PairType::Compatible, PairType::Conflicting, PairType::NonEvidential};
  const std::size_t agree[3] = {40, 39, 38};
  std::vector<PairType> predicted, annotated;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t k = 0; k < 50; ++k) {
      annotated.push_back(types[a]);
      predicted.push_back(k < agree[a] ? types[a] : types[(a + 1 + k % 2) % 3]);
    }
  }
  return {predicted, annotated};
}

}  // namespace testing
