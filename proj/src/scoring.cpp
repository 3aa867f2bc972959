// SPDX-License-Identifier: Apache-2.0

#include "combo/scoring.hpp"

#include <map>
#include <sstream>

namespace combo {

std::string_view to_string(ScoringMode m) { return m == ScoringMode::Cutoff ? "cutoff" : "product"; }

ScoringMode parse_scoring_mode(std::string_view s) {
  if (s == "cutoff") return ScoringMode::Cutoff;
  if (s == "product") return ScoringMode::Product;
  throw std::invalid_argument("unknown scoring mode '" + std::string(s) + "'");
}

std::string_view to_string(PairType t) {
  switch (t) {
    case PairType::Compatible: return "compatible";
    case PairType::Conflicting: return "conflicting";
    case PairType::NonEvidential: break;
  }
  return "non_evidential";
}

PairType parse_pair_type(std::string_view s) {
  if (s == "compatible") return PairType::Compatible;
  if (s == "conflicting") return PairType::Conflicting;
  if (s == "non_evidential") return PairType::NonEvidential;
  throw std::invalid_argument("unknown pair type '" + std::string(s) + "'");
}

CompatibilityMatrix::CompatibilityMatrix(std::string question_id, std::size_t m, std::size_t n, ScoringMode mode)
    : question_id_(std::move(question_id)), m_(m), n_(n), mode_(mode), cells_(m * n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cells_[i * n + j].lp_index = i;
      cells_[i * n + j].rp_index = j;
    }
  }
}

const PairScore& CompatibilityMatrix::at(std::size_t lp, std::size_t rp) const {
  if (lp >= m_ || rp >= n_) throw ContractViolation("matrix index out of range");
  return cells_[lp * n_ + rp];
}

PairScore& CompatibilityMatrix::at(std::size_t lp, std::size_t rp) {
  return const_cast<PairScore&>(std::as_const(*this).at(lp, rp));
}

void CompatibilityMatrix::recombine() {
  for (auto& c : cells_) c.combined = combine(c.evidentiality, c.consistency, mode_);
}

double combine(double evidentiality, double consistency, ScoringMode mode) {
  if (!(evidentiality >= 0.0 && evidentiality <= 1.0) || !(consistency >= 0.0 && consistency <= 1.0))
    throw ContractViolation("combine: probabilities must lie in [0,1]");
  if (mode == ScoringMode::Product) return evidentiality * consistency;
  return evidentiality > 0.5 ? consistency : 0.0;
}

PairType classify_pair(const PairScore& score) {
  if (score.evidentiality <= 0.5) return PairType::NonEvidential;
  if (score.consistency <= 0.5) return PairType::Conflicting;
  return PairType::Compatible;
}

MatrixBuild build_matrix(const QAExample& example, Scorer& scorer, ScoringMode mode) {
  if (example.m() == 0 || example.n() == 0)
    throw ContractViolation("build_matrix: question " + example.question_id + " has an empty passage pool");

  MatrixBuild out;
  CompatibilityMatrix matrix(example.question_id, example.m(), example.n(), mode);
  ScoreContext ctx{example.question_id, 0, std::nullopt, example.answers};
  try {
    std::vector<double> evid(example.n());
    std::vector<std::string> rp_texts(example.n());
    for (std::size_t j = 0; j < example.n(); ++j) {
      rp_texts[j] = chain_text(example.retrieved[j]);
      ctx.rp_index = j;
      ctx.lp_index.reset();
      ++out.evidentiality_calls;
      evid[j] = scorer.score({ScoreKind::Evidentiality, example.question, rp_texts[j], std::nullopt}, ctx);
    }
    for (std::size_t i = 0; i < example.m(); ++i) {
      const std::string lp_text = chain_text(example.generated[i]);
      for (std::size_t j = 0; j < example.n(); ++j) {
        ctx.rp_index = j;
        ctx.lp_index = i;
        ++out.consistency_calls;
        auto& cell = matrix.at(i, j);
        cell.evidentiality = evid[j];
        cell.consistency = scorer.score({ScoreKind::Consistency, example.question, rp_texts[j], lp_text}, ctx);
      }
    }
    matrix.recombine();
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception& e) {
    out.error = e.what();
    return out;
  }
  out.matrix = std::move(matrix);
  return out;
}

std::vector<Json> matrix_records(const CompatibilityMatrix& matrix) {
  std::vector<Json> records;
  records.reserve(matrix.cells().size());
  for (const auto& c : matrix.cells()) {
    records.push_back(Json{{"question_id", matrix.question_id()},
                           {"i", c.lp_index},
                           {"j", c.rp_index},
                           {"evidentiality", c.evidentiality},
                           {"consistency", c.consistency},
                           {"combined", c.combined}});
  }
  return records;
}

std::vector<CompatibilityMatrix> matrices_from_records(const std::vector<Json>& records, ScoringMode mode) {
  struct Pending {
    std::size_t m = 0, n = 0;
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> cells;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> pending;
  for (const auto& r : records) {
    const auto qid = r.at("question_id").get<std::string>();
    const auto i = r.at("i").get<std::size_t>();
    const auto j = r.at("j").get<std::size_t>();
    auto [it, fresh] = pending.try_emplace(qid);
    if (fresh) order.push_back(qid);
    auto& p = it->second;
    p.m = std::max(p.m, i + 1);
    p.n = std::max(p.n, j + 1);
    p.cells[{i, j}] = {r.at("evidentiality").get<double>(), r.at("consistency").get<double>()};
  }

  std::vector<CompatibilityMatrix> out;
  for (const auto& qid : order) {
    const auto& p = pending.at(qid);
    if (p.cells.size() != p.m * p.n) {
      std::ostringstream msg;
      msg << "matrix for " << qid << " has " << p.cells.size() << " cells, expected " << p.m << "x" << p.n;
      throw ProtocolError(msg.str());
    }
    CompatibilityMatrix matrix(qid, p.m, p.n, mode);
    for (const auto& [ij, probs] : p.cells) {
      auto& cell = matrix.at(ij.first, ij.second);
      cell.evidentiality = clamp_probability(probs.first, "matrix dump");
      cell.consistency = clamp_probability(probs.second, "matrix dump");
    }
    matrix.recombine();
    out.push_back(std::move(matrix));
  }
  return out;
}

std::vector<CompatibilityMatrix> load_matrices(const std::filesystem::path& path, ScoringMode mode) {
  std::vector<Json> records;
  auto errors = for_each_jsonl(path, [&](const Json& j, std::size_t) { records.push_back(j); });
  if (!errors.empty())
    throw ProtocolError(path.string() + ":" + std::to_string(errors.front().line) + ": " + errors.front().message);
  return matrices_from_records(records, mode);
}

}  // namespace combo
