// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/providers.hpp"

namespace combo {

/// How evidentiality and consistency fold into one pair weight.
///  - Cutoff:  consistency if evidentiality > 0.5, else 0.
///  - Product: evidentiality * consistency.
enum class ScoringMode { Cutoff, Product };

std::string_view to_string(ScoringMode m);
ScoringMode parse_scoring_mode(std::string_view s);

enum class PairType { Compatible, Conflicting, NonEvidential };

std::string_view to_string(PairType t);
PairType parse_pair_type(std::string_view s);

struct PairScore {
  std::size_t lp_index = 0;
  std::size_t rp_index = 0;
  double evidentiality = 0.0;
  double consistency = 0.0;
  double combined = 0.0;
};

/// Dense M x N grid of pair scores for one question, row-major by lp index.
class CompatibilityMatrix {
 public:
  CompatibilityMatrix() = default;
  CompatibilityMatrix(std::string question_id, std::size_t m, std::size_t n, ScoringMode mode);

  const std::string& question_id() const { return question_id_; }
  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  ScoringMode mode() const { return mode_; }

  const PairScore& at(std::size_t lp, std::size_t rp) const;
  PairScore& at(std::size_t lp, std::size_t rp);
  const std::vector<PairScore>& cells() const { return cells_; }

  /// Recomputes every combined score from its two probabilities.
  void recombine();

 private:
  std::string question_id_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  ScoringMode mode_ = ScoringMode::Cutoff;
  std::vector<PairScore> cells_;
};

/// Inputs must lie in [0,1]; throws ContractViolation otherwise.
double combine(double evidentiality, double consistency, ScoringMode mode);

/// NonEvidential if evidentiality <= 0.5, else Conflicting if consistency <= 0.5,
/// else Compatible.
PairType classify_pair(const PairScore& score);

struct MatrixBuild {
  std::optional<CompatibilityMatrix> matrix;  // empty when the question was dropped
  std::string error;                          // why it was dropped
  std::size_t evidentiality_calls = 0;
  std::size_t consistency_calls = 0;
};

/// Queries the scorer once per retrieved chain (evidentiality) and once per
/// (generated, retrieved) pair (consistency). Any scorer failure drops the
/// whole question. Throws ContractViolation if either pool is empty.
MatrixBuild build_matrix(const QAExample& example, Scorer& scorer, ScoringMode mode);

/// Matrix dump: one record per cell, row-major.
std::vector<Json> matrix_records(const CompatibilityMatrix& matrix);

/// Groups dump records back into matrices, in first-appearance order. Throws
/// ProtocolError for records that leave a matrix with holes.
std::vector<CompatibilityMatrix> matrices_from_records(const std::vector<Json>& records, ScoringMode mode);

std::vector<CompatibilityMatrix> load_matrices(const std::filesystem::path& path, ScoringMode mode);

}  // namespace combo
