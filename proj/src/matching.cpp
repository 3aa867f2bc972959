// SPDX-License-Identifier: Apache-2.0

#include "combo/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "combo/rng.hpp"

namespace combo {

std::string_view to_string(MatchStrategy s) {
  switch (s) {
    case MatchStrategy::Optimal: return "optimal";
    case MatchStrategy::Greedy: return "greedy";
    case MatchStrategy::Random: return "random";
    case MatchStrategy::SameAnswerOracle: break;
  }
  return "same-answer";
}

MatchStrategy parse_match_strategy(std::string_view s) {
  if (s == "optimal") return MatchStrategy::Optimal;
  if (s == "greedy") return MatchStrategy::Greedy;
  if (s == "random") return MatchStrategy::Random;
  if (s == "same-answer") return MatchStrategy::SameAnswerOracle;
  throw std::invalid_argument("unknown matching strategy '" + std::string(s) + "'");
}

WeightedBipartiteGraph WeightedBipartiteGraph::from_grid(const std::vector<std::vector<double>>& grid) {
  WeightedBipartiteGraph g;
  g.rows = grid.size();
  g.cols = grid.empty() ? 0 : grid.front().size();
  for (const auto& row : grid) {
    if (row.size() != g.cols) throw ContractViolation("ragged weight grid");
    g.weights.insert(g.weights.end(), row.begin(), row.end());
  }
  g.row_origin.resize(g.rows);
  g.col_origin.resize(g.cols);
  std::iota(g.row_origin.begin(), g.row_origin.end(), 0);
  std::iota(g.col_origin.begin(), g.col_origin.end(), 0);
  return g;
}

WeightedBipartiteGraph equalize_pools(const CompatibilityMatrix& matrix) {
  if (matrix.m() == 0 || matrix.n() == 0) throw ContractViolation("equalize_pools: empty pool");
  const std::size_t k = std::max(matrix.m(), matrix.n());
  WeightedBipartiteGraph g;
  g.question_id = matrix.question_id();
  g.rows = g.cols = k;
  g.row_origin.resize(k);
  g.col_origin.resize(k);
  for (std::size_t r = 0; r < k; ++r) g.row_origin[r] = r % matrix.m();
  for (std::size_t c = 0; c < k; ++c) g.col_origin[c] = c % matrix.n();
  g.weights.resize(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) g.weights[r * k + c] = matrix.at(g.row_origin[r], g.col_origin[c]).combined;
  }
  return g;
}

std::vector<PairType> expand_pair_types(const CompatibilityMatrix& matrix, const WeightedBipartiteGraph& graph) {
  std::vector<PairType> types(graph.rows * graph.cols);
  for (std::size_t r = 0; r < graph.rows; ++r) {
    for (std::size_t c = 0; c < graph.cols; ++c)
      types[r * graph.cols + c] = classify_pair(matrix.at(graph.row_origin[r], graph.col_origin[c]));
  }
  return types;
}

// ---------------------------------------------------------------------------
// Assignment solver

namespace {

struct HungarianResult {
  std::vector<std::size_t> assign;  // row -> column
  std::vector<double> u;            // row potentials
  std::vector<double> v;            // column potentials
};

// Shortest augmenting path Hungarian method with potentials, O(n^3). Minimizes
// total cost; reduced costs cost - u - v stay nonnegative.
HungarianResult hungarian_min(const std::vector<double>& cost, std::size_t n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  HungarianResult out;
  out.assign.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.assign[p[j] - 1] = j - 1;
  out.u.assign(u.begin() + 1, u.end());
  out.v.assign(v.begin() + 1, v.end());
  return out;
}

// Sign of sum(a) - sum(b), computed without rounding error by accumulating a
// nonoverlapping floating-point expansion (two-sum per term).
int compare_exact_sums(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> expansion;
  auto grow = [&expansion](double x) {
    std::vector<double> next;
    next.reserve(expansion.size() + 1);
    double q = x;
    for (double e : expansion) {
      const double s = q + e;
      const double bv = s - q;
      const double av = s - bv;
      const double err = (q - av) + (e - bv);
      q = s;
      if (err != 0.0) next.push_back(err);
    }
    next.push_back(q);
    expansion.swap(next);
  };
  for (double x : a) grow(x);
  for (double x : b) grow(-x);
  for (auto it = expansion.rbegin(); it != expansion.rend(); ++it) {
    if (*it > 0.0) return 1;
    if (*it < 0.0) return -1;
  }
  return 0;
}

std::vector<double> assignment_values(const std::vector<double>& w, std::size_t n,
                                      const std::vector<std::size_t>& assign) {
  std::vector<double> vals(n);
  for (std::size_t r = 0; r < n; ++r) vals[r] = w[r * n + assign[r]];
  return vals;
}

// Best assignment of rows [first_row, n) onto `free_cols`, as a full-size
// assignment whose prefix is copied from `prefix`.
std::vector<std::size_t> complete_assignment(const std::vector<double>& w, std::size_t n,
                                             const std::vector<std::size_t>& prefix, std::size_t first_row,
                                             const std::vector<std::size_t>& free_cols) {
  const std::size_t k = n - first_row;
  std::vector<std::size_t> out(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(first_row));
  if (k == 0) return out;
  std::vector<double> sub(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) sub[r * k + c] = -w[(first_row + r) * n + free_cols[c]];
  }
  const auto res = hungarian_min(sub, k);
  for (std::size_t r = 0; r < k; ++r) out.push_back(free_cols[res.assign[r]]);
  return out;
}

PairMatching finish(const WeightedBipartiteGraph& graph, const std::vector<std::size_t>& assign,
                    MatchStrategy strategy) {
  PairMatching m;
  m.question_id = graph.question_id;
  m.strategy = strategy;
  for (std::size_t r = 0; r < assign.size(); ++r)
    m.pairs.push_back({graph.row_origin[r], graph.col_origin[assign[r]], graph.weight(r, assign[r])});
  std::stable_sort(m.pairs.begin(), m.pairs.end(), [](const MatchedPair& a, const MatchedPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.lp_index != b.lp_index) return a.lp_index < b.lp_index;
    return a.rp_index < b.rp_index;
  });
  m.total_weight = 0.0;
  for (const auto& p : m.pairs) m.total_weight += p.score;
  return m;
}

void require_square(const WeightedBipartiteGraph& graph, const char* who) {
  if (!graph.square()) throw ContractViolation(std::string(who) + ": graph must be square; call equalize_pools first");
  if (graph.weights.size() != graph.rows * graph.cols || graph.row_origin.size() != graph.rows ||
      graph.col_origin.size() != graph.cols)
    throw ContractViolation(std::string(who) + ": malformed graph");
}

}  // namespace

std::vector<std::size_t> solve_assignment(const std::vector<double>& weights, std::size_t n) {
  if (weights.size() != n * n) throw ContractViolation("solve_assignment: weights must be n x n");
  if (n == 0) return {};
  for (double x : weights) {
    if (!std::isfinite(x)) throw ContractViolation("solve_assignment: non-finite weight");
  }

  std::vector<double> cost(weights.size());
  std::transform(weights.begin(), weights.end(), cost.begin(), [](double x) { return -x; });
  const auto base = hungarian_min(cost, n);
  auto best = base.assign;
  auto best_vals = assignment_values(weights, n, best);

  // Only cells with (near) zero reduced cost can sit in an optimal assignment;
  // the tolerance only prunes candidates, acceptance is decided exactly.
  double scale = 1.0;
  for (double x : weights) scale = std::max(scale, std::abs(x));
  const double slack_tol = 1e-9 * scale * static_cast<double>(n);

  std::vector<char> col_used(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < best[r]; ++c) {
      if (col_used[c]) continue;
      const double reduced = cost[r * n + c] - base.u[r] - base.v[c];
      if (reduced > slack_tol) continue;

      std::vector<std::size_t> prefix(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(r));
      prefix.push_back(c);
      std::vector<std::size_t> free_cols;
      for (std::size_t cc = 0; cc < n; ++cc) {
        if (!col_used[cc] && cc != c) free_cols.push_back(cc);
      }
      auto candidate = complete_assignment(weights, n, prefix, r + 1, free_cols);
      auto vals = assignment_values(weights, n, candidate);
      if (compare_exact_sums(vals, best_vals) >= 0) {
        best = std::move(candidate);
        best_vals = std::move(vals);
        break;
      }
    }
    col_used[best[r]] = 1;
  }
  return best;
}

PairMatching match_optimal(const WeightedBipartiteGraph& graph) {
  require_square(graph, "match_optimal");
  return finish(graph, solve_assignment(graph.weights, graph.rows), MatchStrategy::Optimal);
}

PairMatching match_greedy(const WeightedBipartiteGraph& graph, const std::vector<PairType>& types) {
  require_square(graph, "match_greedy");
  const std::size_t n = graph.rows;
  if (types.size() != n * n) throw ContractViolation("match_greedy: type grid does not match graph");

  std::vector<std::size_t> assign(n, 0);
  std::vector<char> row_used(n, 0), col_used(n, 0);
  for (PairType type : {PairType::Compatible, PairType::Conflicting, PairType::NonEvidential}) {
    for (;;) {
      std::size_t best_r = n, best_c = n;
      for (std::size_t r = 0; r < n; ++r) {
        if (row_used[r]) continue;
        for (std::size_t c = 0; c < n; ++c) {
          if (col_used[c] || types[r * n + c] != type) continue;
          if (best_r == n || graph.weight(r, c) > graph.weight(best_r, best_c)) {
            best_r = r;
            best_c = c;
          }
        }
      }
      if (best_r == n) break;
      assign[best_r] = best_c;
      row_used[best_r] = col_used[best_c] = 1;
    }
  }
  return finish(graph, assign, MatchStrategy::Greedy);
}

PairMatching match_random(const WeightedBipartiteGraph& graph, std::uint64_t seed) {
  require_square(graph, "match_random");
  std::vector<std::size_t> perm(graph.rows);
  std::iota(perm.begin(), perm.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  return finish(graph, perm, MatchStrategy::Random);
}

PairMatching match_random(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ContractViolation("match_random: empty pool");
  CompatibilityMatrix zeros("", m, n, ScoringMode::Cutoff);
  return match_random(equalize_pools(zeros), seed);
}

PairMatching match_same_answer(const QAExample& example, std::uint64_t seed) {
  if (example.m() == 0 || example.n() == 0) throw ContractViolation("match_same_answer: empty pool");
  const std::size_t k = std::max(example.m(), example.n());

  WeightedBipartiteGraph g;
  g.question_id = example.question_id;
  g.rows = g.cols = k;
  g.row_origin.resize(k);
  g.col_origin.resize(k);
  for (std::size_t r = 0; r < k; ++r) g.row_origin[r] = r % example.m();
  for (std::size_t c = 0; c < k; ++c) g.col_origin[c] = c % example.n();

  std::vector<char> lp_has(example.m()), rp_has(example.n());
  for (std::size_t i = 0; i < example.m(); ++i) lp_has[i] = contains_answer(example.generated[i], example.answers);
  for (std::size_t j = 0; j < example.n(); ++j) rp_has[j] = contains_answer(example.retrieved[j], example.answers);
  g.weights.resize(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c)
      g.weights[r * k + c] = lp_has[g.row_origin[r]] && rp_has[g.col_origin[c]] ? 1.0 : 0.0;
  }

  std::vector<std::size_t> answer_rows, answer_cols;
  for (std::size_t r = 0; r < k; ++r) {
    if (lp_has[g.row_origin[r]]) answer_rows.push_back(r);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (rp_has[g.col_origin[c]]) answer_cols.push_back(c);
  }

  std::vector<std::size_t> assign(k, k);
  std::vector<char> col_used(k, 0);
  const std::size_t paired = std::min(answer_rows.size(), answer_cols.size());
  for (std::size_t t = 0; t < paired; ++t) {
    assign[answer_rows[t]] = answer_cols[t];
    col_used[answer_cols[t]] = 1;
  }

  std::vector<std::size_t> rest_cols;
  for (std::size_t c = 0; c < k; ++c) {
    if (!col_used[c]) rest_cols.push_back(c);
  }
  SeededRng rng(seed);
  rng.shuffle(std::span<std::size_t>(rest_cols));
  std::size_t next = 0;
  for (std::size_t r = 0; r < k; ++r) {
    if (assign[r] == k) assign[r] = rest_cols[next++];
  }
  return finish(g, assign, MatchStrategy::SameAnswerOracle);
}

Json to_json(const PairMatching& matching) {
  Json pairs = Json::array();
  for (const auto& p : matching.pairs) pairs.push_back(Json::array({p.lp_index, p.rp_index, p.score}));
  return Json{{"question_id", matching.question_id},
              {"strategy", to_string(matching.strategy)},
              {"pairs", std::move(pairs)},
              {"total_weight", matching.total_weight}};
}

PairMatching matching_from_json(const Json& record) {
  PairMatching m;
  m.question_id = record.at("question_id").get<std::string>();
  m.strategy = parse_match_strategy(record.at("strategy").get<std::string>());
  for (const auto& p : record.at("pairs")) {
    if (!p.is_array() || p.size() != 3) throw std::invalid_argument("pair must be [i, j, score]");
    m.pairs.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<double>()});
  }
  m.total_weight = record.at("total_weight").get<double>();
  return m;
}

std::vector<PairMatching> load_matchings(const std::filesystem::path& path) {
  std::vector<PairMatching> out;
  auto errors = for_each_jsonl(path, [&](const Json& j, std::size_t) { out.push_back(matching_from_json(j)); });
  if (!errors.empty())
    throw ProtocolError(path.string() + ":" + std::to_string(errors.front().line) + ": " + errors.front().message);
  return out;
}

}  // namespace combo
