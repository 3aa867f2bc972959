// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "combo/corpus.hpp"
#include "combo/scoring.hpp"

namespace combo {

struct ConflictStats {
  std::string question_id;
  std::size_t n = 0;    // retrieved chains
  std::size_t m = 0;    // generated chains
  std::size_t n_a = 0;  // retrieved chains containing a gold alias
  std::size_t m_a = 0;  // generated chains containing a gold alias
  double conflicting_rate = 0.0;
};

/// Fraction of (retrieved, generated) pairs where only the retrieved side
/// contains the answer: n_a * (m - m_a) / (n * m). Throws ContractViolation
/// naming the empty pool.
ConflictStats conflicting_rate(const QAExample& example);

/// [0,.1) [.1,.2) [.2,.3) [.3,.4) [.4,.5) [.5,1]
inline constexpr std::array<std::pair<double, double>, 6> kConflictBins{
    {{0.0, 0.1}, {0.1, 0.2}, {0.2, 0.3}, {0.3, 0.4}, {0.4, 0.5}, {0.5, 1.0}}};

/// Index into kConflictBins. Rates outside [0,1] throw ContractViolation.
std::size_t conflict_bin(double rate);

struct ConflictBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double subset_fraction = 0.0;
  std::map<std::string, double> em_by_method;  // absent for empty bins
};

struct BinReport {
  std::vector<ConflictBin> bins;
  std::size_t total = 0;     // questions binned
  std::size_t excluded = 0;  // questions missing a prediction
  std::vector<std::string> warnings;
};

/// method name -> (question_id -> predicted answer)
using MethodPredictions = std::map<std::string, std::map<std::string, std::string>>;

/// Exact match per conflict bin and method. Questions lacking a prediction for
/// any method are excluded and counted.
BinReport bin_report(const std::vector<ConflictStats>& stats, const MethodPredictions& predictions,
                     const std::vector<QAExample>& examples);

std::string bin_report_csv(const BinReport& report);
std::vector<Json> bin_report_records(const BinReport& report);
std::string format_bin_table(const BinReport& report);

struct PairTypeDistribution {
  std::map<PairType, double> fractions;
  std::size_t cells = 0;
  std::size_t excluded_matrices = 0;
};

PairTypeDistribution pair_type_distribution(const std::vector<CompatibilityMatrix>& matrices);

struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [predicted][annotated], PairType order
  std::size_t total = 0;
  double accuracy = 0.0;
};

/// Throws ContractViolation on empty input or mismatched lengths.
ConfusionMatrix label_confusion(const std::vector<PairType>& predicted, const std::vector<PairType>& annotated);

Json to_json(const ConflictStats& stats);
Json to_json(const PairTypeDistribution& dist);
Json to_json(const ConfusionMatrix& confusion);

}  // namespace combo
