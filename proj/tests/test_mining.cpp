// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "combo/errors.hpp"
#include "combo/mining.hpp"
#include "combo/sim.hpp"
#include "support.hpp"

using namespace combo;

namespace {

ConfigOutcome outcome(MiningConfig c, bool ok) { return {c, ok ? "gold" : "other", ok}; }

std::vector<ConfigOutcome> four(bool i, bool ii, bool iii, bool iv) {
  return {outcome(MiningConfig::I_Full, i), outcome(MiningConfig::II_DropRp, ii),
          outcome(MiningConfig::III_AddLp, iii), outcome(MiningConfig::IV_SwapLpForRp, iv)};
}

/// Answers "gold" iff the reader input holds one of `supporting` and none of `misleading`.
struct RulePredictor : Predictor {
  std::set<std::string> supporting, misleading;
  std::vector<PredictRequest> seen;
  std::string predict(const PredictRequest& req) override {
    seen.push_back(req);
    bool ok = false, bad = false;
    for (const auto& id : req.passage_ids) {
      ok = ok || supporting.count(id);
      bad = bad || misleading.count(id);
    }
    return ok && !bad ? "gold" : "other";
  }
  std::string tag() const override { return "rule"; }
};

struct FailingPredictor : Predictor {
  std::string predict(const PredictRequest&) override { throw RetryableError("reader offline", 3); }
  std::string tag() const override { return "down"; }
};

QAExample three_by_two() {
  return testing::example("q", "what?", {"gold"}, {"r0", "r1", "r2"}, {"g0", "g1"});
}

}  // namespace

TEST_CASE("evidentiality verdicts") {
  CHECK(evidentiality_verdict({outcome(MiningConfig::I_Full, true), outcome(MiningConfig::II_DropRp, false)}) ==
        Verdict::Positive);
  CHECK(evidentiality_verdict({outcome(MiningConfig::I_Full, false), outcome(MiningConfig::II_DropRp, true)}) ==
        Verdict::Negative);
  CHECK(evidentiality_verdict({outcome(MiningConfig::I_Full, true), outcome(MiningConfig::II_DropRp, true)}) ==
        Verdict::Undetermined);
  CHECK(evidentiality_verdict({outcome(MiningConfig::I_Full, false), outcome(MiningConfig::II_DropRp, false)}) ==
        Verdict::Undetermined);
}

TEST_CASE("consistency verdicts over all sixteen patterns") {
  for (int bits = 0; bits < 16; ++bits) {
    const bool i = bits & 1, ii = bits & 2, iii = bits & 4, iv = bits & 8;
    Verdict want = Verdict::Undetermined;
    if (i && !ii && iii && iv) want = Verdict::Positive;
    if (i && !ii && !iii && !iv) want = Verdict::Negative;
    CHECK(consistency_verdict(four(i, ii, iii, iv)) == want);
  }
  CHECK(consistency_verdict({outcome(MiningConfig::I_Full, false), outcome(MiningConfig::II_DropRp, false)}) ==
        Verdict::Undetermined);
}

TEST_CASE("mining requests") {
  const auto ex = three_by_two();
  const auto full = mining_request(ex, MiningConfig::I_Full, 1, std::nullopt);
  CHECK(full.passage_ids == std::vector<std::string>{"R:q-r0", "R:q-r1", "R:q-r2"});
  CHECK(full.passages[0] == "question: what? retrieved passage: r0");
  const auto drop = mining_request(ex, MiningConfig::II_DropRp, 1, std::nullopt);
  CHECK(drop.passage_ids == std::vector<std::string>{"R:q-r0", "R:q-r2"});
  const auto add = mining_request(ex, MiningConfig::III_AddLp, 1, 0);
  CHECK(add.passage_ids.back() == "L:q-g0");
  CHECK(add.passages.back() == "question: what? generated passage: g0");
  CHECK(add.passage_ids.size() == 4);
  const auto swap = mining_request(ex, MiningConfig::IV_SwapLpForRp, 1, 1);
  CHECK(swap.passage_ids == std::vector<std::string>{"R:q-r0", "R:q-r2", "L:q-g1"});
  CHECK_THROWS_AS(mining_request(ex, MiningConfig::III_AddLp, 0, std::nullopt), ContractViolation);
}

TEST_CASE("pivotal retrieved passage yields consistent and conflicting labels") {
  const auto ex = three_by_two();
  auto rule = std::make_shared<RulePredictor>();
  rule->supporting = {"R:q-r1", "L:q-g0"};
  rule->misleading = {"L:q-g1"};
  CountingPredictor counter(rule);
  const auto result = mine_question(ex, counter);

  REQUIRE(result.evidentiality.size() == 3);
  CHECK(result.evidentiality[0].verdict == Verdict::Undetermined);
  CHECK(result.evidentiality[1].verdict == Verdict::Positive);
  CHECK_FALSE(result.evidentiality[1].lp_index);

  REQUIRE(result.consistency.size() == 6);
  for (const auto& l : result.consistency) {
    CAPTURE(l.rp_index);
    CAPTURE(*l.lp_index);
    if (l.rp_index != 1) {
      CHECK(l.verdict == Verdict::Undetermined);
      CHECK(l.outcomes.size() == 2);
    } else {
      CHECK(l.verdict == (*l.lp_index == 0 ? Verdict::Positive : Verdict::Negative));
      CHECK(l.outcomes.size() == 4);
    }
    CHECK(consistency_verdict(l.outcomes) == l.verdict);
  }
  CHECK(result.stats.gated_pairs == 2);
  // I once, II per rp, III per lp, IV per gated pair.
  CHECK(counter.calls() == 1 + 3 + 2 + 2);
  CHECK(counter.calls() <= ex.n() + 1 + 2 * result.stats.gated_pairs);
  CHECK(result.stats.third_fourth_calls == 4);
}

TEST_CASE("no gate means no third or fourth configuration") {
  const auto ex = three_by_two();
  auto rule = std::make_shared<RulePredictor>();
  CountingPredictor counter(rule);
  const auto result = mine_question(ex, counter);
  CHECK(result.stats.gated_pairs == 0);
  CHECK(result.stats.third_fourth_calls == 0);
  CHECK(counter.calls() == 1 + 3);
  for (const auto& l : result.consistency) CHECK(l.verdict == Verdict::Undetermined);
}

TEST_CASE("labels are stable under permutation of non-target passages") {
  SynthSpec spec;
  spec.num_questions = 20;
  spec.single_pivot = true;
  spec.p_llm_hallucinated = 0.5;
  spec.seed = 99;
  const auto corpus = generate_corpus(spec);
  SimPredictor sim(corpus.truth);
  for (const auto& ex : corpus.examples) {
    const auto base = mine_question(ex, sim);
    auto shuffled = ex;
    std::reverse(shuffled.retrieved.begin(), shuffled.retrieved.end());
    const auto moved = mine_question(shuffled, sim);
    for (const auto& l : base.consistency) {
      const std::size_t j = ex.n() - 1 - l.rp_index;
      const auto& other = moved.consistency[j * ex.m() + *l.lp_index];
      CHECK(other.rp_index == j);
      CHECK(other.verdict == l.verdict);
    }
  }
}

TEST_CASE("predictor failures are recorded, not fatal") {
  const auto ex = three_by_two();
  FailingPredictor down;
  const auto result = mine_question(ex, down);
  CHECK(result.stats.failures >= 1);
  for (const auto& l : result.evidentiality) {
    CHECK(l.verdict == Verdict::Undetermined);
    CHECK(l.note.find("reader offline") != std::string::npos);
  }
  auto one = testing::example("q", "what?", {"gold"}, {"r0"}, {"g0"});
  CHECK_THROWS_AS(mine_question(one, down), ContractViolation);
}

TEST_CASE("silver label JSON round trip") {
  SilverLabel l;
  l.question_id = "q";
  l.kind = ScoreKind::Consistency;
  l.lp_index = 3;
  l.rp_index = 1;
  l.outcomes = four(true, false, true, true);
  l.verdict = consistency_verdict(l.outcomes);
  const auto j = to_json(l);
  CHECK(j["kind"] == "consistency");
  CHECK(j["verdict"] == "positive");
  const auto back = silver_label_from_json(j);
  CHECK(back.outcomes == l.outcomes);
  CHECK(back.lp_index == l.lp_index);
  CHECK(consistency_verdict(back.outcomes) == back.verdict);
}

TEST_CASE("training record emission") {
  testing::TempDir dir("mining");
  const auto ex = testing::example("q", "what?", {"gold"}, {"r0", "r1", "r2", "r3", "r4"}, {"g0"});
  std::vector<SilverLabel> labels;
  const std::vector<Verdict> verdicts{Verdict::Positive, Verdict::Positive, Verdict::Positive, Verdict::Negative,
                                      Verdict::Negative, Verdict::Undetermined};
  for (std::size_t k = 0; k < verdicts.size(); ++k) {
    SilverLabel l;
    l.question_id = "q";
    l.rp_index = k % 5;
    l.verdict = verdicts[k];
    labels.push_back(l);
  }
  auto counts = emit_training_records(labels, {ex}, dir.path());
  CHECK(counts[ScoreKind::Evidentiality].positive == 3);
  CHECK(counts[ScoreKind::Evidentiality].negative == 2);
  const auto evid = read_text_file(dir.path() / "evidentiality_train.jsonl");
  CHECK(std::count(evid.begin(), evid.end(), '\n') == 5);
  CHECK(evid.find("\"label\":1") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir.path() / "consistency_train.jsonl"));

  SilverLabel cons;
  cons.question_id = "q";
  cons.kind = ScoreKind::Consistency;
  cons.lp_index = 0;
  cons.verdict = Verdict::Negative;
  labels.push_back(cons);
  testing::TempDir both("mining-both");
  counts = emit_training_records(labels, {ex}, both.path());
  CHECK(counts[ScoreKind::Consistency].negative == 1);
  const auto cons_text = read_text_file(both.path() / "consistency_train.jsonl");
  CHECK(cons_text.find("\"generated\":\"g0\"") != std::string::npos);

  testing::TempDir none("mining-none");
  SilverLabel undetermined;
  undetermined.question_id = "q";
  counts = emit_training_records({undetermined}, {ex}, none.path());
  CHECK(counts[ScoreKind::Evidentiality].positive == 0);
  CHECK(counts[ScoreKind::Evidentiality].negative == 0);
  CHECK(read_text_file(none.path() / "evidentiality_train.jsonl").empty());
}
