// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "combo/analysis.hpp"
#include "combo/errors.hpp"
#include "combo/log.hpp"
#include "support.hpp"

using namespace combo;

TEST_CASE("conflicting rate fixtures") {
  const auto s = conflicting_rate(testing::counted_example("q", 10, 10, 5, 3));
  CHECK(s.n == 10);
  CHECK(s.m == 10);
  CHECK(s.n_a == 5);
  CHECK(s.m_a == 3);
  CHECK(s.conflicting_rate == 0.35);
  CHECK(conflicting_rate(testing::counted_example("q", 4, 3, 0, 1)).conflicting_rate == 0.0);
  CHECK(conflicting_rate(testing::counted_example("q", 4, 3, 2, 3)).conflicting_rate == 0.0);

  try {
    conflicting_rate(testing::counted_example("q", 4, 0, 2, 0));
    FAIL("expected ContractViolation");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("generated") != std::string::npos);
  }
}

TEST_CASE("conflicting rate is permutation invariant") {
  auto ex = testing::counted_example("q", 10, 10, 5, 3);
  std::mt19937 rng(4);
  for (int t = 0; t < 100; ++t) {
    std::shuffle(ex.retrieved.begin(), ex.retrieved.end(), rng);
    std::shuffle(ex.generated.begin(), ex.generated.end(), rng);
    CHECK(conflicting_rate(ex).conflicting_rate == 0.35);
  }
}

TEST_CASE("bin membership") {
  const std::vector<double> rates{0.0, 0.05, 0.1, 0.15, 0.25, 0.35, 0.45, 0.5, 0.75, 1.0};
  const std::vector<std::size_t> bins{0, 0, 1, 1, 2, 3, 4, 5, 5, 5};
  for (std::size_t k = 0; k < rates.size(); ++k) CHECK(conflict_bin(rates[k]) == bins[k]);
  CHECK(conflict_bin(0.35) == 3);
  CHECK(kConflictBins[3].first == 0.3);
}

TEST_CASE("reference bin table is reproduced") {
  const auto f = testing::table_fixture();
  const auto report = bin_report(f.stats, f.predictions, f.examples);
  CHECK(report.total == 100000);
  CHECK(report.excluded == 0);
  REQUIRE(report.bins.size() == 6);
  CHECK(report.bins[0].subset_fraction == 0.562);
  CHECK(report.bins[0].em_by_method.at("combo") == 48.5);

  double fractions = 0.0;
  std::size_t members = 0;
  for (std::size_t b = 0; b < 6; ++b) {
    fractions += report.bins[b].subset_fraction;
    members += report.bins[b].count;
    CHECK(report.bins[b].count == testing::fixture_bin_sizes()[b]);
    for (const auto& [method, ems] : testing::fixture_table())
      CHECK(std::round(report.bins[b].em_by_method.at(method) * 10.0) / 10.0 == doctest::Approx(ems[b]));
  }
  CHECK(fractions == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(members == report.total);

  const auto csv = bin_report_csv(report);
  CHECK(csv.rfind("bin_lower,bin_upper,fraction,method,em\n", 0) == 0);
  CHECK(bin_report_records(report).size() == 6);
  CHECK(format_bin_table(report).find("combo") != std::string::npos);
}

TEST_CASE("bin report edge cases") {
  set_warnings_quiet(true);
  auto ex = testing::counted_example("a", 2, 2, 0, 0);
  auto ex2 = testing::counted_example("b", 2, 2, 0, 0);
  std::vector<ConflictStats> stats{conflicting_rate(ex), conflicting_rate(ex2)};
  MethodPredictions preds{{"m", {{"a", "Don Shula"}}}};
  const auto report = bin_report(stats, preds, {ex, ex2});
  CHECK(report.total == 1);
  CHECK(report.excluded == 1);
  CHECK(report.warnings.size() == 1);
  CHECK(report.bins[0].subset_fraction == 1.0);
  CHECK(report.bins[0].em_by_method.at("m") == 100.0);
  CHECK(report.bins[1].em_by_method.empty());
  set_warnings_quiet(false);
}

TEST_CASE("pair type distribution") {
  CompatibilityMatrix m("q", 2, 2, ScoringMode::Cutoff);
  const double e[2] = {0.9, 0.2};
  const double c[2][2] = {{0.9, 0.8}, {0.1, 0.7}};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      m.at(i, j).evidentiality = e[j];
      m.at(i, j).consistency = c[i][j];
    }
  m.recombine();
  const auto d = pair_type_distribution({m});
  CHECK(d.cells == 4);
  CHECK(d.fractions.at(PairType::Compatible) == 0.25);
  CHECK(d.fractions.at(PairType::Conflicting) == 0.25);
  CHECK(d.fractions.at(PairType::NonEvidential) == 0.5);

  CompatibilityMatrix one("q", 1, 1, ScoringMode::Cutoff);
  one.at(0, 0).evidentiality = 0.3;
  one.at(0, 0).consistency = 0.9;
  CHECK(pair_type_distribution({one}).fractions.at(PairType::NonEvidential) == 1.0);
  const auto j = to_json(d);
  CHECK(j["fractions"]["compatible"] == 0.25);
}

TEST_CASE("label confusion") {
  const auto [predicted, annotated] = testing::confusion_fixture();
  REQUIRE(predicted.size() == 150);
  const auto cm = label_confusion(predicted, annotated);
  CHECK(cm.total == 150);
  CHECK(cm.accuracy == 0.78);
  CHECK(cm.counts[0][0] == 40);
  CHECK(label_confusion(annotated, annotated).accuracy == 1.0);
  CHECK_THROWS_AS(label_confusion({}, {}), ContractViolation);
  CHECK_THROWS_AS(label_confusion({PairType::Compatible}, {}), ContractViolation);
}
