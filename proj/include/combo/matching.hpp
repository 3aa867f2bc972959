// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/jsonl.hpp"
#include "combo/scoring.hpp"

namespace combo {

enum class MatchStrategy { Optimal, Greedy, Random, SameAnswerOracle };

std::string_view to_string(MatchStrategy s);
MatchStrategy parse_match_strategy(std::string_view s);

struct MatchedPair {
  std::size_t lp_index = 0;
  std::size_t rp_index = 0;
  double score = 0.0;

  bool operator==(const MatchedPair&) const = default;
};

struct PairMatching {
  std::string question_id;
  std::vector<MatchedPair> pairs;  // score descending, ties by (lp, rp) ascending
  MatchStrategy strategy = MatchStrategy::Optimal;
  double total_weight = 0.0;       // sum of pair scores in list order
};

/// Complete bipartite graph between (possibly duplicated) generated rows and
/// retrieved columns. `row_origin`/`col_origin` map each row/column back to
/// its pool index.
struct WeightedBipartiteGraph {
  std::string question_id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_origin;
  std::vector<std::size_t> col_origin;
  std::vector<double> weights;  // rows x cols, row-major

  double weight(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
  bool square() const { return rows == cols; }

  /// Graph over a dense grid with identity origins. Rows must be equal length.
  static WeightedBipartiteGraph from_grid(const std::vector<std::vector<double>>& grid);
};

/// Squares the graph by cyclic replication: when M < N generated rows repeat
/// as 0,1,..,M-1,0,1,.. until there are N rows; when M > N retrieved columns
/// repeat the same way.
WeightedBipartiteGraph equalize_pools(const CompatibilityMatrix& matrix);

/// Pair types of a squared graph's cells, row-major, looked up through origins.
std::vector<PairType> expand_pair_types(const CompatibilityMatrix& matrix, const WeightedBipartiteGraph& graph);

/// Maximum-weight perfect assignment of a square row-major weight grid:
/// result[r] is the column assigned to row r. Among maximum-weight
/// assignments, the lexicographically smallest column sequence wins; totals
/// are compared exactly.
std::vector<std::size_t> solve_assignment(const std::vector<double>& weights, std::size_t n);

/// Hungarian optimum over a square graph.
PairMatching match_optimal(const WeightedBipartiteGraph& graph);

/// Type-ordered greedy: Compatible cells first, then Conflicting, then
/// NonEvidential; within a type the highest unused cell is taken next.
PairMatching match_greedy(const WeightedBipartiteGraph& graph, const std::vector<PairType>& types);

/// Uniform random perfect matching of the cyclically squared pools.
PairMatching match_random(std::size_t m, std::size_t n, std::uint64_t seed);
/// Same permutation as above, with scores read from the square graph.
PairMatching match_random(const WeightedBipartiteGraph& graph, std::uint64_t seed);

/// Pairs answer-containing generated and retrieved chains in ascending index
/// order, then pairs the remainder at random. Pair scores are 1 for answer
/// pairs and 0 otherwise.
PairMatching match_same_answer(const QAExample& example, std::uint64_t seed);

Json to_json(const PairMatching& matching);
PairMatching matching_from_json(const Json& record);
std::vector<PairMatching> load_matchings(const std::filesystem::path& path);

}  // namespace combo
