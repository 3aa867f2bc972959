// SPDX-License-Identifier: Apache-2.0

#include "combo/analysis.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "combo/errors.hpp"
#include "combo/log.hpp"

namespace combo {

ConflictStats conflicting_rate(const QAExample& example) {
  if (example.n() == 0) throw ContractViolation("conflicting_rate: retrieved pool of " + example.question_id + " is empty");
  if (example.m() == 0) throw ContractViolation("conflicting_rate: generated pool of " + example.question_id + " is empty");
  ConflictStats s;
  s.question_id = example.question_id;
  s.n = example.n();
  s.m = example.m();
  for (const auto& c : example.retrieved) s.n_a += contains_answer(c, example.answers) ? 1 : 0;
  for (const auto& c : example.generated) s.m_a += contains_answer(c, example.answers) ? 1 : 0;
  s.conflicting_rate = static_cast<double>(s.n_a * (s.m - s.m_a)) / static_cast<double>(s.n * s.m);
  return s;
}

std::size_t conflict_bin(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ContractViolation("conflict rate outside [0,1]");
  for (std::size_t b = 0; b + 1 < kConflictBins.size(); ++b) {
    if (rate < kConflictBins[b].second) return b;
  }
  return kConflictBins.size() - 1;
}

BinReport bin_report(const std::vector<ConflictStats>& stats, const MethodPredictions& predictions,
                     const std::vector<QAExample>& examples) {
  std::unordered_map<std::string, const QAExample*> by_id;
  for (const auto& ex : examples) by_id.emplace(ex.question_id, &ex);

  BinReport report;
  std::vector<std::size_t> counts(kConflictBins.size(), 0);
  std::vector<std::map<std::string, std::size_t>> hits(kConflictBins.size());

  for (const auto& s : stats) {
    auto ex_it = by_id.find(s.question_id);
    bool missing = ex_it == by_id.end();
    for (const auto& [method, preds] : predictions) {
      if (!preds.count(s.question_id)) missing = true;
    }
    if (missing) {
      ++report.excluded;
      report.warnings.push_back("question " + s.question_id + " excluded: missing example or prediction");
      continue;
    }
    const std::size_t b = conflict_bin(s.conflicting_rate);
    ++counts[b];
    for (const auto& [method, preds] : predictions) {
      if (exact_match(preds.at(s.question_id), ex_it->second->answers).exact_match) ++hits[b][method];
    }
  }
  if (report.excluded > 0) log_warning(std::to_string(report.excluded) + " question(s) excluded from the bin report");

  for (std::size_t c : counts) report.total += c;
  for (std::size_t b = 0; b < kConflictBins.size(); ++b) {
    ConflictBin bin;
    bin.lower = kConflictBins[b].first;
    bin.upper = kConflictBins[b].second;
    bin.count = counts[b];
    bin.subset_fraction = report.total ? static_cast<double>(counts[b]) / static_cast<double>(report.total) : 0.0;
    if (counts[b] > 0) {
      for (const auto& [method, preds] : predictions) {
        auto it = hits[b].find(method);
        const std::size_t h = it == hits[b].end() ? 0 : it->second;
        bin.em_by_method[method] = 100.0 * static_cast<double>(h) / static_cast<double>(counts[b]);
      }
    }
    report.bins.push_back(std::move(bin));
  }
  return report;
}

std::string bin_report_csv(const BinReport& report) {
  std::ostringstream out;
  out << "bin_lower,bin_upper,fraction,method,em\n";
  for (const auto& bin : report.bins) {
    for (const auto& [method, em] : bin.em_by_method)
      out << bin.lower << ',' << bin.upper << ',' << bin.subset_fraction << ',' << method << ',' << em << '\n';
  }
  return out.str();
}

std::vector<Json> bin_report_records(const BinReport& report) {
  std::vector<Json> out;
  for (const auto& bin : report.bins) {
    out.push_back(Json{{"bin_lower", bin.lower},
                       {"bin_upper", bin.upper},
                       {"count", bin.count},
                       {"fraction", bin.subset_fraction},
                       {"em", bin.em_by_method}});
  }
  return out;
}

std::string format_bin_table(const BinReport& report) {
  std::vector<std::string> methods;
  for (const auto& bin : report.bins) {
    for (const auto& [m, _] : bin.em_by_method) {
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
  }
  std::ostringstream out;
  out << std::left << std::setw(12) << "rate" << std::setw(10) << "subset%";
  for (const auto& m : methods) out << std::setw(14) << m;
  out << '\n' << std::fixed << std::setprecision(1);
  for (const auto& bin : report.bins) {
    std::ostringstream label;
    label << bin.lower << " -- " << bin.upper;
    out << std::setw(12) << label.str() << std::setw(10) << 100.0 * bin.subset_fraction;
    for (const auto& m : methods) {
      auto it = bin.em_by_method.find(m);
      if (it == bin.em_by_method.end()) {
        out << std::setw(14) << "-";
      } else {
        out << std::setw(14) << it->second;
      }
    }
    out << '\n';
  }
  out << "questions: " << report.total << ", excluded: " << report.excluded << '\n';
  return out.str();
}

PairTypeDistribution pair_type_distribution(const std::vector<CompatibilityMatrix>& matrices) {
  PairTypeDistribution dist;
  std::map<PairType, std::size_t> counts{{PairType::Compatible, 0}, {PairType::Conflicting, 0}, {PairType::NonEvidential, 0}};
  for (const auto& matrix : matrices) {
    if (matrix.cells().empty() || matrix.cells().size() != matrix.m() * matrix.n()) {
      ++dist.excluded_matrices;
      log_warning("pair type distribution: skipping incomplete matrix " + matrix.question_id());
      continue;
    }
    for (const auto& cell : matrix.cells()) ++counts[classify_pair(cell)];
    dist.cells += matrix.cells().size();
  }
  for (const auto& [type, count] : counts) {
    dist.fractions[type] = dist.cells ? static_cast<double>(count) / static_cast<double>(dist.cells) : 0.0;
  }
  return dist;
}

ConfusionMatrix label_confusion(const std::vector<PairType>& predicted, const std::vector<PairType>& annotated) {
  if (predicted.size() != annotated.size()) throw ContractViolation("label_confusion: length mismatch");
  if (predicted.empty()) throw ContractViolation("label_confusion: no labels");
  ConfusionMatrix cm;
  for (std::size_t k = 0; k < predicted.size(); ++k)
    ++cm.counts[static_cast<std::size_t>(predicted[k])][static_cast<std::size_t>(annotated[k])];
  cm.total = predicted.size();
  std::size_t trace = 0;
  for (std::size_t t = 0; t < 3; ++t) trace += cm.counts[t][t];
  cm.accuracy = static_cast<double>(trace) / static_cast<double>(cm.total);
  return cm;
}

Json to_json(const ConflictStats& s) {
  return Json{{"question_id", s.question_id}, {"n", s.n},     {"m", s.m},
              {"n_a", s.n_a},                 {"m_a", s.m_a}, {"conflicting_rate", s.conflicting_rate}};
}

Json to_json(const PairTypeDistribution& dist) {
  Json fractions = Json::object();
  for (const auto& [type, f] : dist.fractions) fractions[std::string(to_string(type))] = f;
  return Json{{"fractions", fractions}, {"cells", dist.cells}, {"excluded_matrices", dist.excluded_matrices}};
}

Json to_json(const ConfusionMatrix& cm) {
  Json counts = Json::array();
  for (const auto& row : cm.counts) counts.push_back(Json(row));
  return Json{{"order", {"compatible", "conflicting", "non_evidential"}},
              {"counts", counts},
              {"total", cm.total},
              {"accuracy", cm.accuracy}};
}

}  // namespace combo
